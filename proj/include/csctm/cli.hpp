#pragma once

// Command-line front end: train, eval, inspect and sweep.

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace csctm {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDataError = 1;
inline constexpr int kExitUsage = 2;

/// Runs one command; args excludes the program name.
int run_cli(std::span<const std::string> args, std::ostream& out, std::ostream& err);

/// Auto sweep ladder: l_ave rounded up to a power of two, then halved down to 1.
std::vector<std::size_t> budget_ladder(double vanilla_average_literals);

/// "1,2,4" or "1,all". An empty optional stands for "all". Throws
/// std::invalid_argument on malformed or non-positive entries.
std::vector<std::optional<std::size_t>> parse_budget_list(const std::string& text);

}  // namespace csctm
