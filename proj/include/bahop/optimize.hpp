#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "bahop/ledger.hpp"
#include "bahop/oracle.hpp"
#include "bahop/paramspace.hpp"

namespace bahop {

enum class Strategy { bahop, grid, random, sa, bayes };
const char* to_string(Strategy s);
Strategy parse_strategy(const std::string& s);

struct OptimizerConfig {
  Strategy strategy = Strategy::bahop;
  std::uint64_t budget = 100;
  std::uint64_t seed = 1;
  // Gate threshold: calibrated from the start point, or a fixed value in dB.
  std::optional<double> fixed_tau;
  bool gate_enabled = true;
  // Basin-hopping toggle: perturb the incumbent and accept only strict
  // improvements. Off: perturb the last proposal the gate admitted, no
  // acceptance test.
  bool greedy_accept = true;
  double sa_t0 = 0.05;
  double sa_alpha = 0.97;
  int bayes_warm_start = 8;
  double gp_length_scale = 0.3;
  double gp_noise = 1e-4;
  PreprocParams start = ParamSpace::default_start();

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

struct OptimResult {
  PreprocParams best;
  double best_objective = 0.0;
  RunLedger ledger;
  CostReport cost;
  std::optional<double> tau;
};

/// Proposal generator for the basin-hopping loop: (base point, rng) -> next.
using ProposalFn = std::function<PreprocParams(const PreprocParams&, Rng&)>;

/// PSNR-gated basin hopping. Evaluates the start point, then for each of
/// `budget` iterations perturbs the incumbent, skips keys already evaluated,
/// skips proposals whose thumbnail-set PSNR against the incumbent does not
/// exceed tau, and otherwise evaluates and replaces the incumbent on strict
/// improvement. cfg.gate_enabled / cfg.greedy_accept give the ablations.
OptimResult run_bahop(const ParamSpace& space, const Evaluator& eval, const OptimizerConfig& cfg);

/// Same loop with the ablation toggles taken from cfg as-is.
OptimResult run_ablation(const ParamSpace& space, const Evaluator& eval, const OptimizerConfig& cfg);

/// Loop with an injected proposal generator; `propose` defaults to perturb().
OptimResult run_basin_hopping(const ParamSpace& space, const Evaluator& eval,
                              const OptimizerConfig& cfg, const ProposalFn& propose);

OptimResult run_grid(const ParamSpace& space, const Evaluator& eval, const OptimizerConfig& cfg);
OptimResult run_random(const ParamSpace& space, const Evaluator& eval, const OptimizerConfig& cfg);
OptimResult run_sa(const ParamSpace& space, const Evaluator& eval, const OptimizerConfig& cfg);
OptimResult run_bayes(const ParamSpace& space, const Evaluator& eval, const OptimizerConfig& cfg);

/// Dispatch on cfg.strategy.
OptimResult run(const ParamSpace& space, const Evaluator& eval, const OptimizerConfig& cfg);

/// Best objective and the earliest evaluated record attaining it.
std::pair<PreprocParams, double> best_of(const RunLedger& ledger);

struct VerifyFailure {
  std::string invariant;
  std::optional<std::uint64_t> iteration;
  std::string detail;
};

/// Replays a ledger against the evaluator: recomputes every evaluated
/// objective and cost delta, recomputes gate PSNRs against the replayed
/// incumbent, and checks set semantics, accounting and incumbent
/// monotonicity. Empty result means the ledger verifies.
std::vector<VerifyFailure> verify_ledger(const RunLedger& ledger, const Evaluator& eval,
                                         const ParamSpace& space);

}  // namespace bahop
