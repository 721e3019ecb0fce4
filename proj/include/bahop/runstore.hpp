#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bahop/optimize.hpp"
#include "bahop/oracle.hpp"
#include "bahop/paramspace.hpp"

namespace bahop {

inline constexpr const char* kToolVersion = "0.3.0";

/// Everything needed to re-run an optimisation bit-identically.
///
/// JSON schema (all keys optional):
///   run_id        string, [A-Za-z0-9._-]+; default derived from the config hash
///   strategy      "bahop" | "grid" | "random" | "sa" | "bayes"
///   budget        integer >= 0, or "full" for the space size
///   seed          integer
///   space         "small" | "desk"
///   start         "x1:x2:x3:x4:x5:x6"
///   tau_mode      "calibrated" or a fixed threshold in dB
///   gate_enabled  bool
///   greedy_accept bool
///   sa            {"t0": real, "alpha": real}
///   bayes         {"warm_start": int, "length_scale": real, "noise": real}
///   cohort        {"seed", "slides", "width", "height", "patch_size", "variant", "dir"}
struct RunConfig {
  std::string run_id;
  std::string space = "small";
  bool full_budget = false;
  OptimizerConfig optimizer;
  CohortSettings cohort;
  // Load slides written by `generate` instead of regenerating in memory.
  std::string cohort_dir;

  /// Throws ConfigError naming the offending key.
  static RunConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  ParamSpace param_space() const;
  /// Budget after resolving "full".
  std::uint64_t effective_budget() const;
  /// strategy-<16 hex digits of a hash of the canonical config>.
  std::string resolved_run_id() const;
};

/// Reads a JSON config file. IoError if unreadable, ConfigError if malformed.
RunConfig load_config(const std::filesystem::path& path);

/// explicit > $BAHOP_OUT > ./bahop_out
std::filesystem::path output_root(const std::optional<std::filesystem::path>& explicit_root);

std::filesystem::path run_dir(const std::filesystem::path& root, const std::string& run_id);

/// Exclusive ownership of a run directory through a `.lock` file created with
/// O_EXCL. Throws IoError when the lock is already held.
class RunLock {
 public:
  explicit RunLock(const std::filesystem::path& dir);
  ~RunLock();
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  std::filesystem::path path_;
};

/// 64-bit FNV-1a over raw sample bytes.
std::uint64_t raster_digest(const RasterImage& img);

/// cohort.json plus slides/<id>.ppm (P6).
void write_cohort(const SyntheticCohort& cohort, const std::filesystem::path& dir);
/// Reads and digest-checks a cohort written by write_cohort. Regions are not
/// stored, so the result carries labels and rasters only.
SyntheticCohort read_cohort(const std::filesystem::path& dir);

struct GenerateOptions {
  std::filesystem::path dir;
  CohortSettings settings;
  bool force = false;
};
/// Refuses (ConfigError "force") to write into a non-empty directory unless
/// `force` is set, in which case the previous cohort files are removed first.
void cmd_generate(const GenerateOptions& opt);

struct OptimizeOutcome {
  std::string run_id;
  std::filesystem::path dir;
  OptimResult result;
  std::size_t best_patches = 0;
};
OptimizeOutcome cmd_optimize(const RunConfig& cfg, const std::filesystem::path& root);

struct CompareRow {
  std::string run_id;
  std::string strategy;
  double best_objective = 0.0;
  CostReport cost;
};
/// Rows stable-sorted by strategy name. IoError for a missing run.
std::vector<CompareRow> cmd_compare(const std::filesystem::path& root, const std::vector<std::string>& run_ids);
std::string format_compare(const std::vector<CompareRow>& rows);

struct LandscapeRow {
  PreprocParams params;
  double objective = 0.0;
  Psnr psnr = Psnr::infinite();
  double gap = 0.0;  // |objective - reference objective|
};
struct LandscapeReport {
  PreprocParams reference;
  double reference_objective = 0.0;
  std::vector<LandscapeRow> rows;  // space order
  double spearman = 0.0;           // rank correlation of psnr and gap
  std::filesystem::path csv;
};
/// Needs an exhaustive run (every configuration evaluated); otherwise throws
/// ConfigError. Writes landscape.csv into the run directory.
LandscapeReport cmd_landscape(const std::filesystem::path& root, const std::string& run_id,
                              const std::optional<std::string>& reference_key = std::nullopt);

/// Replays the run's ledger and cost report. Empty result means pass.
std::vector<VerifyFailure> cmd_verify(const std::filesystem::path& root, const std::string& run_id);

/// Spearman rank correlation with average ranks for ties. Returns 0 when
/// either side is constant.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

/// PSNR as a sortable number: infinite maps to +infinity.
double psnr_rank_value(const Psnr& p);

/// Local maxima under the one-step neighbourhood whose objective is strictly
/// above every neighbour's. `objective` is indexed by ParamSpace::index_of.
std::vector<PreprocParams> strict_local_maxima(const ParamSpace& space, const std::vector<double>& objective);

}  // namespace bahop
