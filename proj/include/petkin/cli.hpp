#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace petkin::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitNumeric = 3;
inline constexpr int kExitInternal = 1;

/// Runs one subcommand (simulate, fit, sime, metrics, plot). args excludes the
/// program name. Errors are reported as one JSON line on `err`.
int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

int run(int argc, char **argv);

} // namespace petkin::cli
