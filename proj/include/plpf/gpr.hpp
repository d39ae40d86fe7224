#pragma once

#include <Eigen/Cholesky>

#include <cstddef>
#include <cstdint>
#include <optional>

#include <json.hpp>

#include "plpf/netmodel.hpp"

namespace plpf::gp {

struct Dataset {
    Matrix X;  // N x m inputs
    Vector y;  // N targets
};

struct Hyperparams {
    double signal_var = 1.0;
    double length_scale = 1.0;
    double noise_var = 0.0;
};

/// Per-dimension standardization; zero spreads are replaced by 1.
struct Scaler {
    Vector mean;
    Vector scale;

    static Scaler fit(Matrix const& X);
    Matrix apply(Matrix const& X) const;
};

/// SE kernel sigma^2 exp(-|a - b|^2 / (2 l^2)) between the rows of A and B.
/// Throws Error(DimMismatch).
Matrix kernel(Matrix const& A, Matrix const& B, Hyperparams const& hp);

/// Log marginal likelihood and its gradient with respect to
/// (log signal_var, log length_scale), on already standardized inputs.
struct Likelihood {
    double value = 0.0;
    Eigen::Vector2d grad = Eigen::Vector2d::Zero();
    double jitter = 0.0;  // relative jitter that made K factorizable
};

Likelihood log_marginal_likelihood(Matrix const& Z, Vector const& y, Hyperparams const& hp);

struct FitOptions {
    int restarts = 5;
    std::uint64_t seed = 0;
    double noise_var = 0.0;
    double bound_low = 1e-3;   // box for signal_var (relative to mean(y^2)) and length_scale
    double bound_high = 1e3;
    int max_iter = 200;
};

/// Exact GP with everything needed for closed-form queries. Immutable after fit.
class Model {
public:
    Hyperparams const& hyperparams() const { return hp_; }
    Scaler const& scaler() const { return scaler_; }
    Matrix const& inputs() const { return Z_; }  // standardized training inputs
    Vector const& weights() const { return weights_; }
    double jitter() const { return jitter_; }
    double log_likelihood() const { return lml_; }
    /// Lower Cholesky factor of K + (noise + jitter * signal_var) I.
    Matrix chol() const { return llt_.matrixL(); }
    int size() const { return static_cast<int>(Z_.rows()); }

    nlohmann::json to_json() const;
    static Model from_json(nlohmann::json const& j);

private:
    friend Model fit(Dataset const& data, FitOptions const& opt);
    friend Model make_model(Matrix const& X, Vector const& y, Hyperparams const& hp);
    void factorize(Vector const& y);

    Hyperparams hp_;
    Scaler scaler_;
    Matrix Z_;
    Vector weights_;
    Eigen::LLT<Matrix> llt_;
    double jitter_ = 0.0;
    double lml_ = 0.0;
};

/// Maximizes the log marginal likelihood over (log signal_var, log l) by
/// multi-start projected BFGS; the first start is signal_var = mean(y^2),
/// l = 1, the rest are drawn from the box with `seed`.
/// Throws Error(InvalidArgument | DegenerateTargets | FactorizationFailure).
Model fit(Dataset const& data, FitOptions const& opt = {});

/// Model with fixed hyperparameters (no optimization).
Model make_model(Matrix const& X, Vector const& y, Hyperparams const& hp);

struct Posterior {
    Vector mean;
    Vector var;
    std::optional<Matrix> cov;
};

/// Queries in raw input units; standardization uses the stored scaler.
/// `kernel_evals` accumulates the number of kernel evaluations performed.
Posterior posterior(Model const& m, Matrix const& X_star, bool with_cov = false,
                    std::size_t* kernel_evals = nullptr);

/// Mean only: O(N) kernel evaluations per query through the cached weights.
Vector posterior_mean(Model const& m, Matrix const& X_star, std::size_t* kernel_evals = nullptr);

}  // namespace plpf::gp
