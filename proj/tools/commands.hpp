#pragma once

// Subcommands of the entangle_boundary tool. Each returns a process exit
// code: 0 success, 1 verification failure, 2 usage or format error.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace entangle::cli {

enum ExitCode : int { kOk = 0, kFailure = 1, kUsage = 2 };

struct Common {
  std::uint64_t seed = 0;
  double tol = 1e-8;  // bound on the nine extremal residuals
  double gap = 1e-6;  // oracle duality-gap target
  int jobs = 1;
};

struct GenOptions {
  int count = 10;
  double max_condition = 10.0;
  std::string out_dir = ".";
  std::optional<double> limit;  // epsilon for rank-deficient limit states
};

struct RayOptions {
  std::string state_path;
  std::vector<double> x;
  std::vector<double> fraction;  // multiples of x_max
  std::string out_csv;           // empty: stdout
};

struct VerifyOptions {
  std::string input;  // state file or manifest
  std::string out_json;
};

struct ReeOptions {
  std::string state_path;
  long max_iter = 100000;
  bool bits = false;
  bool strict = false;
  std::string out_json;
};

struct ValidateOptions {
  std::string manifest;
  double fraction = 0.5;
  long max_iter = 100000;
  std::string out_json;
};

int cmd_gen(const Common& c, const GenOptions& o, std::ostream& out, std::ostream& err);
int cmd_ray(const Common& c, const RayOptions& o, std::ostream& out, std::ostream& err);
int cmd_verify(const Common& c, const VerifyOptions& o, std::ostream& out, std::ostream& err);
int cmd_ree(const Common& c, const ReeOptions& o, std::ostream& out, std::ostream& err);
int cmd_validate(const Common& c, const ValidateOptions& o, std::ostream& out, std::ostream& err);

/// Parses argv (argv[0] is the program name) and dispatches.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Seed of case `index` derived from the run seed; independent of --jobs.
std::uint64_t case_seed(std::uint64_t seed, std::size_t index);

}  // namespace entangle::cli
