#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "msamp/amp.hpp"
#include "msamp/serialization.hpp"

namespace msamp {

struct Tolerances {
  double se_scale = 5.0;             // state-evolution items: se_scale / sqrt(lambda_s N)
  double inconclusive_above = 0.5;   // items whose tolerance exceeds this are not judged
  double phi_residual = 1e-6;        // pseudo-maximizer residuals
};

struct ExperimentConfig {
  MixtureSpec spec;
  std::string spec_path;             // empty when the spec was inline
  std::optional<std::string> phi_path;
  int N = 500;
  std::vector<std::uint64_t> seeds{1};
  int ell_lower = 25;                // Stage-II step count parameter
  int k_max = 25;                    // Stage-I iterations checked
  int grid = 400;
  Tolerances tol;
  AmpOptions amp;
  std::vector<SignPattern> signs;    // extra Stage-I sign patterns besides all-plus
  std::optional<TreeSpec> tree;
  bool stage2 = true;
  std::string out;                   // report path, empty for none
  std::string trace_dir;             // per-seed CSV traces, empty for none
  int threads = 1;

  // Relative paths resolve against base_dir. Throws InvalidArgument on
  // missing files, empty seeds or out-of-range numbers.
  static ExperimentConfig from_json(const json& j, const std::string& base_dir = ".");
  json to_json() const;
  void validate() const;
};

enum class CheckStatus { Pass, Fail, Inconclusive };
const char* to_string(CheckStatus s);

struct CheckItem {
  std::string name;
  std::string anchor;                // what the expected value is
  double measured = 0.0;
  double expected = 0.0;
  double tolerance = 0.0;
  CheckStatus status = CheckStatus::Pass;
};

// |measured - expected| <= tolerance, Inconclusive when tolerance exceeds the cap.
CheckItem make_check(std::string name, std::string anchor, double measured, double expected, double tolerance,
                     double inconclusive_above);

struct RunReport {
  json config;
  json predictions;
  json per_seed = json::array();
  std::vector<CheckItem> items;
  double seconds = 0.0;

  bool passed() const;  // no item failed
  int count(CheckStatus s) const;
  json to_json() const;
};

// Default worker count: MSAMP_THREADS when set and positive, else 1.
int default_threads();

// Stage I/II across seeds against every state-evolution table, averaged over
// seeds, at se_scale / sqrt(lambda_s N).
RunReport validate_se(const ExperimentConfig& cfg);

// CSV traces: k, energy, then per-species self and step overlaps.
std::string stage1_trace_csv(const AmpRun& run);
// l, energy, then per-species self-overlaps.
std::string stage2_trace_csv(const AmpRun& run);
// Square matrix with a header row of leaf labels.
std::string matrix_csv(const Mat& m, const std::vector<std::string>& labels);

}  // namespace msamp
