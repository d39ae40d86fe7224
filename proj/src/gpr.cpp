#include "plpf/gpr.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "plpf/random.hpp"

namespace plpf::gp {

namespace {

constexpr std::array<double, 5> kJitterLadder{1e-10, 1e-9, 1e-8, 1e-7, 1e-6};

Matrix squared_distances(Matrix const& A, Matrix const& B) {
    Matrix D(A.rows(), B.rows());
    for (Eigen::Index j = 0; j < B.rows(); ++j) {
        for (Eigen::Index i = 0; i < A.rows(); ++i) {
            D(i, j) = (A.row(i) - B.row(j)).squaredNorm();
        }
    }
    return D;
}

Matrix se_from_distances(Matrix const& D2, Hyperparams const& hp) {
    double const c = -0.5 / (hp.length_scale * hp.length_scale);
    return hp.signal_var * (c * D2.array()).exp().matrix();
}

// K + (noise + jitter * signal_var) I for the first ladder step that factorizes.
bool factorize_ladder(Matrix const& Kf, Hyperparams const& hp, Eigen::LLT<Matrix>& llt, double& jitter) {
    for (double j : kJitterLadder) {
        Matrix K = Kf;
        K.diagonal().array() += hp.noise_var + j * hp.signal_var;
        llt.compute(K);
        if (llt.info() == Eigen::Success && llt.matrixLLT().diagonal().minCoeff() > 0.0) {
            jitter = j;
            return true;
        }
    }
    return false;
}

void check_finite(Matrix const& X, Vector const& y) {
    if (!X.allFinite() || !y.allFinite()) {
        throw Error(ErrorKind::InvalidArgument, "dataset contains non-finite entries");
    }
}

struct Objective {
    Matrix const& Z;
    Matrix D2;
    Vector const& y;
    double y_ms;  // mean(y^2), the unit of the signal variance box
    double noise;

    Hyperparams at(Eigen::Vector2d const& t) const { return Hyperparams{y_ms * std::exp(t[0]), std::exp(t[1]), noise}; }

    // Negative log likelihood and gradient; +inf when K cannot be factorized.
    double operator()(Eigen::Vector2d const& t, Eigen::Vector2d& g) const {
        Hyperparams hp = at(t);
        Matrix Kf = se_from_distances(D2, hp);
        Eigen::LLT<Matrix> llt;
        double jitter = 0.0;
        if (!factorize_ladder(Kf, hp, llt, jitter)) {
            g.setZero();
            return std::numeric_limits<double>::infinity();
        }
        Vector a = llt.solve(y);
        double logdet = llt.matrixLLT().diagonal().array().log().sum();
        double nll = 0.5 * y.dot(a) + logdet + 0.5 * static_cast<double>(y.size()) * std::log(2.0 * std::numbers::pi);
        Matrix Kinv = llt.solve(Matrix::Identity(y.size(), y.size()));
        Matrix W = a * a.transpose() - Kinv;
        Matrix dK_s = Kf;
        dK_s.diagonal().array() += jitter * hp.signal_var;
        Matrix dK_l = Kf.cwiseProduct(D2) / (hp.length_scale * hp.length_scale);
        g[0] = -0.5 * W.cwiseProduct(dK_s).sum();
        g[1] = -0.5 * W.cwiseProduct(dK_l).sum();
        return nll;
    }
};

struct Minimum {
    Eigen::Vector2d t;
    double f;
};

Minimum projected_bfgs(Objective const& obj, Eigen::Vector2d t, double lo, double hi, int max_iter) {
    auto clamp = [&](Eigen::Vector2d v) { return v.cwiseMax(lo).cwiseMin(hi); };
    t = clamp(t);
    Eigen::Vector2d g;
    double f = obj(t, g);
    if (!std::isfinite(f)) return {t, f};
    Eigen::Matrix2d H = Eigen::Matrix2d::Identity();

    for (int it = 0; it < max_iter; ++it) {
        std::array<bool, 2> active{};
        Eigen::Vector2d pg = g;
        for (int i = 0; i < 2; ++i) {
            active[i] = (t[i] <= lo && g[i] > 0.0) || (t[i] >= hi && g[i] < 0.0);
            if (active[i]) pg[i] = 0.0;
        }
        if (pg.lpNorm<Eigen::Infinity>() < 1e-8) break;

        Eigen::Vector2d d = -H * g;
        for (int i = 0; i < 2; ++i) {
            if (active[i]) d[i] = 0.0;
        }
        if (d.dot(pg) >= 0.0) {
            H.setIdentity();
            d = -pg;
        }
        double const longest = d.lpNorm<Eigen::Infinity>();
        if (longest > 3.0) d *= 3.0 / longest;

        double step = 1.0;
        Eigen::Vector2d tn;
        Eigen::Vector2d gn;
        double fn = std::numeric_limits<double>::infinity();
        bool accepted = false;
        for (int ls = 0; ls < 40; ++ls) {
            tn = clamp(t + step * d);
            fn = obj(tn, gn);
            if (std::isfinite(fn) && fn <= f + 1e-4 * g.dot(tn - t)) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;

        Eigen::Vector2d s = tn - t;
        Eigen::Vector2d yv = gn - g;
        double const sy = s.dot(yv);
        if (sy > 1e-12) {
            double const rho = 1.0 / sy;
            Eigen::Matrix2d I = Eigen::Matrix2d::Identity();
            H = (I - rho * s * yv.transpose()) * H * (I - rho * yv * s.transpose()) + rho * s * s.transpose();
        }
        bool const stalled = std::abs(f - fn) <= 1e-12 * (1.0 + std::abs(f));
        t = tn;
        f = fn;
        g = gn;
        if (stalled) break;
    }
    return {t, f};
}

}  // namespace

Scaler Scaler::fit(Matrix const& X) {
    Scaler s;
    s.mean = X.colwise().mean().transpose();
    s.scale.resize(X.cols());
    for (Eigen::Index c = 0; c < X.cols(); ++c) {
        double var = (X.col(c).array() - s.mean[c]).square().mean();
        double sd = std::sqrt(var);
        s.scale[c] = sd > 0.0 ? sd : 1.0;
    }
    return s;
}

Matrix Scaler::apply(Matrix const& X) const {
    if (X.cols() != mean.size()) {
        throw Error(ErrorKind::DimMismatch, "inputs have " + std::to_string(X.cols()) + " columns, scaler expects " +
                                                std::to_string(mean.size()));
    }
    return (X.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
}

Matrix kernel(Matrix const& A, Matrix const& B, Hyperparams const& hp) {
    if (A.cols() != B.cols()) {
        throw Error(ErrorKind::DimMismatch,
                    "kernel inputs have " + std::to_string(A.cols()) + " and " + std::to_string(B.cols()) + " columns");
    }
    return se_from_distances(squared_distances(A, B), hp);
}

Likelihood log_marginal_likelihood(Matrix const& Z, Vector const& y, Hyperparams const& hp) {
    if (Z.rows() != y.size()) {
        throw Error(ErrorKind::DimMismatch, "inputs and targets differ in length");
    }
    Vector ys = y;
    Objective obj{Z, squared_distances(Z, Z), ys, 1.0, hp.noise_var};
    Eigen::Vector2d t(std::log(hp.signal_var), std::log(hp.length_scale));
    Eigen::Vector2d g;
    double nll = obj(t, g);
    if (!std::isfinite(nll)) {
        throw Error(ErrorKind::FactorizationFailure, "kernel matrix is not positive definite at jitter 1e-6");
    }
    Likelihood out;
    out.value = -nll;
    out.grad = -g;
    Eigen::LLT<Matrix> llt;
    factorize_ladder(se_from_distances(obj.D2, hp), hp, llt, out.jitter);
    return out;
}

void Model::factorize(Vector const& y) {
    Matrix Kf = kernel(Z_, Z_, hp_);
    if (!factorize_ladder(Kf, hp_, llt_, jitter_)) {
        throw Error(ErrorKind::FactorizationFailure, "kernel matrix is not positive definite at jitter 1e-6");
    }
    if (y.size() > 0) {
        weights_ = llt_.solve(y);
        double logdet = llt_.matrixLLT().diagonal().array().log().sum();
        lml_ = -0.5 * y.dot(weights_) - logdet - 0.5 * static_cast<double>(y.size()) * std::log(2.0 * std::numbers::pi);
        // refine against K + noise I: conjugate gradients preconditioned by the jittered factor
        Matrix Kt = Kf;
        Kt.diagonal().array() += hp_.noise_var;
        Vector r = y - Kt * weights_;
        double best = r.norm();
        Vector best_w = weights_;
        Vector z = llt_.solve(r);
        Vector d = z;
        double rz = r.dot(z);
        for (int k = 0; k < 4 * static_cast<int>(y.size()) && best > 0.0; ++k) {
            Vector Kd = Kt * d;
            double dKd = d.dot(Kd);
            if (!(dKd > 0.0)) break;
            double step = rz / dKd;
            weights_ += step * d;
            r -= step * Kd;
            Vector true_r = y - Kt * weights_;
            double norm = true_r.norm();
            if (norm < best) {
                best = norm;
                best_w = weights_;
            }
            z = llt_.solve(r);
            double rz_next = r.dot(z);
            d = z + (rz_next / rz) * d;
            rz = rz_next;
        }
        weights_ = std::move(best_w);
    }
}

Model make_model(Matrix const& X, Vector const& y, Hyperparams const& hp) {
    if (X.rows() != y.size()) {
        throw Error(ErrorKind::DimMismatch, "inputs and targets differ in length");
    }
    check_finite(X, y);
    Model m;
    m.hp_ = hp;
    m.scaler_ = Scaler::fit(X);
    m.Z_ = m.scaler_.apply(X);
    m.factorize(y);
    return m;
}

Model fit(Dataset const& data, FitOptions const& opt) {
    if (data.X.rows() != data.y.size()) {
        throw Error(ErrorKind::DimMismatch, "inputs and targets differ in length");
    }
    if (data.y.size() < 2) {
        throw Error(ErrorKind::InvalidArgument, "GP fit needs at least 2 samples, got " + std::to_string(data.y.size()));
    }
    check_finite(data.X, data.y);
    if (data.y.maxCoeff() == data.y.minCoeff()) {
        throw Error(ErrorKind::DegenerateTargets, "all targets equal " + std::to_string(data.y[0]));
    }
    if (opt.restarts < 1) {
        throw Error(ErrorKind::InvalidArgument, "restarts must be >= 1");
    }

    Scaler scaler = Scaler::fit(data.X);
    Matrix Z = scaler.apply(data.X);
    double const y_ms = data.y.squaredNorm() / static_cast<double>(data.y.size());
    Objective obj{Z, squared_distances(Z, Z), data.y, y_ms, opt.noise_var};

    double const lo = std::log(opt.bound_low);
    double const hi = std::log(opt.bound_high);
    std::mt19937_64 rng(opt.seed);

    Minimum best{Eigen::Vector2d::Zero(), std::numeric_limits<double>::infinity()};
    for (int r = 0; r < opt.restarts; ++r) {
        Eigen::Vector2d t0 = Eigen::Vector2d::Zero();
        if (r > 0) {
            t0[0] = uniform_draw(rng, lo, hi);
            t0[1] = uniform_draw(rng, lo, hi);
        }
        Minimum m = projected_bfgs(obj, t0, lo, hi, opt.max_iter);
        if (m.f < best.f) best = m;
    }
    if (!std::isfinite(best.f)) {
        throw Error(ErrorKind::FactorizationFailure, "no start produced a factorizable kernel matrix");
    }

    Model model;
    model.hp_ = obj.at(best.t);
    model.scaler_ = std::move(scaler);
    model.Z_ = std::move(Z);
    model.factorize(data.y);
    return model;
}

Vector posterior_mean(Model const& m, Matrix const& X_star, std::size_t* kernel_evals) {
    Matrix Zs = m.scaler().apply(X_star);
    Matrix Ks = kernel(m.inputs(), Zs, m.hyperparams());
    if (kernel_evals != nullptr) *kernel_evals += static_cast<std::size_t>(Ks.size());
    return Ks.transpose() * m.weights();
}

Posterior posterior(Model const& m, Matrix const& X_star, bool with_cov, std::size_t* kernel_evals) {
    Matrix Zs = m.scaler().apply(X_star);
    Hyperparams const& hp = m.hyperparams();
    Matrix Ks = kernel(m.inputs(), Zs, hp);
    if (kernel_evals != nullptr) *kernel_evals += static_cast<std::size_t>(Ks.size());
    Posterior out;
    out.mean = Ks.transpose() * m.weights();
    Matrix L = m.chol();
    Matrix V = L.triangularView<Eigen::Lower>().solve(Ks);
    out.var = (Vector::Constant(Zs.rows(), hp.signal_var) - V.colwise().squaredNorm().transpose()).cwiseMax(0.0);
    if (with_cov) {
        Matrix Kss = kernel(Zs, Zs, hp);
        if (kernel_evals != nullptr) *kernel_evals += static_cast<std::size_t>(Kss.size());
        out.cov = Kss - V.transpose() * V;
    }
    return out;
}

nlohmann::json Model::to_json() const {
    nlohmann::json j;
    j["signal_var"] = hp_.signal_var;
    j["length_scale"] = hp_.length_scale;
    j["noise_var"] = hp_.noise_var;
    j["jitter"] = jitter_;
    j["log_likelihood"] = lml_;
    j["scaler"] = {{"mean", std::vector<double>(scaler_.mean.begin(), scaler_.mean.end())},
                   {"scale", std::vector<double>(scaler_.scale.begin(), scaler_.scale.end())}};
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < Z_.rows(); ++i) {
        std::vector<double> row(static_cast<std::size_t>(Z_.cols()));
        for (Eigen::Index c = 0; c < Z_.cols(); ++c) row[static_cast<std::size_t>(c)] = Z_(i, c);
        rows.push_back(row);
    }
    j["inputs"] = std::move(rows);
    j["weights"] = std::vector<double>(weights_.begin(), weights_.end());
    return j;
}

Model Model::from_json(nlohmann::json const& j) {
    Model m;
    m.hp_.signal_var = j.at("signal_var").get<double>();
    m.hp_.length_scale = j.at("length_scale").get<double>();
    m.hp_.noise_var = j.at("noise_var").get<double>();
    m.lml_ = j.at("log_likelihood").get<double>();
    auto mean = j.at("scaler").at("mean").get<std::vector<double>>();
    auto scale = j.at("scaler").at("scale").get<std::vector<double>>();
    m.scaler_.mean = Eigen::Map<Vector>(mean.data(), static_cast<Eigen::Index>(mean.size()));
    m.scaler_.scale = Eigen::Map<Vector>(scale.data(), static_cast<Eigen::Index>(scale.size()));
    auto const& rows = j.at("inputs");
    auto weights = j.at("weights").get<std::vector<double>>();
    if (rows.size() != weights.size() || mean.size() != scale.size()) {
        throw Error(ErrorKind::ShapeMismatch, "GP model arrays disagree in size");
    }
    m.Z_.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(mean.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        auto row = rows[i].get<std::vector<double>>();
        if (row.size() != mean.size()) {
            throw Error(ErrorKind::ShapeMismatch, "GP input row has the wrong width");
        }
        for (std::size_t c = 0; c < row.size(); ++c) m.Z_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = row[c];
    }
    m.weights_ = Eigen::Map<Vector>(weights.data(), static_cast<Eigen::Index>(weights.size()));
    m.factorize(Vector());
    double stored = j.at("jitter").get<double>();
    if (m.jitter_ != stored) {
        throw Error(ErrorKind::FactorizationFailure, "stored jitter does not reproduce the factorization");
    }
    return m;
}

}  // namespace plpf::gp
