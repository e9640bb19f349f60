#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rearsim/outcome.hpp"

namespace rearsim::cli {

namespace fs = std::filesystem;

struct Options {
  fs::path config;
  fs::path out;
  unsigned workers = 1;
  std::optional<std::uint64_t> seed;
};

// Each command returns its exit code; failures are reported by throwing
// rearsim::Error (or a std::exception for internal faults).
int cmd_synth(const Options& o);
int cmd_simulate(const Options& o);
int cmd_weight(const Options& o);
int cmd_fit_bias(const Options& o);
int cmd_apply_bias(const Options& o);
int cmd_validate(const Options& o);
int cmd_assess_dms(const Options& o);
int cmd_report(const Options& o);
int cmd_pipeline(const Options& o);
/// Writes the bundled synthetic input files and a pipeline config to `o.out`.
int cmd_fixtures(const Options& o);

/// Parses argv, dispatches, and maps exceptions to exit codes with a JSON
/// error object on stderr.
int run(int argc, char** argv);

/// Hex SHA-256 of a file's bytes.
std::string sha256_file(const fs::path& path);
std::string sha256_bytes(const std::string& bytes);

/// Records input/output digests for one command invocation. Paths are stored
/// relative to the output directory so reruns elsewhere produce the same bytes.
class Manifest {
 public:
  Manifest(std::string command, fs::path out_dir);

  void config(const fs::path& path);
  void input(const fs::path& path);
  void input_dir(const fs::path& dir);
  void output(const fs::path& path);
  /// Every regular file under the output directory except the manifest.
  void outputs_from_dir();
  /// Writes manifest.json. `timestamp` is informational and excluded from
  /// any byte comparison of reruns.
  void write() const;

 private:
  std::string rel(const fs::path& p) const;

  std::string command_;
  fs::path out_;
  nlohmann::json config_;
  std::vector<std::pair<std::string, std::string>> inputs_;
  std::vector<std::pair<std::string, std::string>> outputs_;
};

struct Series {
  std::string name;
  DeltaVDistribution hist;
};

/// Overlaid step histograms.
std::string svg_histograms(const std::string& title, const std::vector<Series>& series);
/// Bar chart of labelled values.
std::string svg_bars(const std::string& title, const std::vector<std::string>& labels, const std::vector<double>& values,
                     const std::string& y_label);

}  // namespace rearsim::cli
