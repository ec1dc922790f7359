#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <set>
#include <string>
#include <vector>

#include "mlkrim/error.hpp"
#include "mlkrim/model.hpp"

namespace mlkrim::cli {

namespace fs = std::filesystem;

// Exit codes of the mlkrim tool.
enum ExitCode : int { kOk = 0, kConfigError = 2, kNumericalError = 3, kIoError = 4 };

class ConfigError : public ParameterError {
 public:
  using ParameterError::ParameterError;
};

struct RunConfig {
  // Phantom
  std::size_t n_f = 64, n_p = 64, n_fr = 32;
  double ring_period = 0.0;      // 0: n_fr / 4
  double ring_amplitude = -1.0;  // < 0: phantom default
  double noise_std = 0.0;
  std::uint64_t phantom_seed = 0;

  // Sampling
  std::string mask_kind = "cartesian";  // cartesian | radial
  double acceleration = 4.0;
  std::size_t spokes = 0;  // radial; 0 derives the count from acceleration
  std::size_t upsilon = 6;
  std::uint64_t mask_seed = 1;

  // Files
  fs::path kspace, mask, truth;
  std::vector<fs::path> estimates;
  fs::path output_dir = "out";

  // Model
  std::size_t kernels = 1;
  std::size_t depth = 2;
  std::vector<std::size_t> inner_dims;  // empty: (6), (2, 6), (2, 4, 6) by depth
  std::size_t landmarks = 16;

  // Solver; lambda3 is relative to the RMS of the measured k-space.
  Hyperparams hp{};
  std::vector<std::uint64_t> seeds = {1};

  std::set<std::string> emit = {"csv", "trace"};
  std::size_t workers = 0;

  // Key/value pairs as read, in file order, for the manifest.
  std::vector<std::pair<std::string, std::string>> entries;

  static RunConfig parse(std::istream& in);
  static RunConfig load(const fs::path& path);

  std::vector<std::size_t> resolved_inner_dims() const;
  std::string echo() const;
};

// Commands throw on failure; run_command maps exceptions onto exit codes.
void cmd_generate(const RunConfig& cfg, std::ostream& out);
void cmd_mask(const RunConfig& cfg, std::ostream& out);
void cmd_reconstruct(const RunConfig& cfg, std::ostream& out);
void cmd_evaluate(const RunConfig& cfg, std::ostream& out);
void cmd_report(const RunConfig& cfg, std::ostream& out);

int run_command(const std::string& name, const RunConfig& cfg, std::ostream& out,
                std::ostream& err);

// 8-bit grayscale PNG per frame, magnitudes scaled by the min/max of the whole series.
void write_png_series(const ComplexTensor3& x, const fs::path& dir, const std::string& stem);
std::vector<std::uint8_t> grayscale_frame(const ComplexTensor3& x, std::size_t t, double lo,
                                          double hi);

}  // namespace mlkrim::cli
