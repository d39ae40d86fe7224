#pragma once

#include <span>
#include <string_view>

namespace plpf::casefile {

struct EmbeddedCase {
    std::string_view name;
    std::string_view text;
};

std::span<EmbeddedCase const> embedded_cases();

}  // namespace plpf::casefile
