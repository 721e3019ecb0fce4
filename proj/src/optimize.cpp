#include "bahop/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "bahop/errors.hpp"
#include "bahop/gp.hpp"

namespace bahop {

const char* to_string(Strategy s) {
  switch (s) {
    case Strategy::bahop: return "bahop";
    case Strategy::grid: return "grid";
    case Strategy::random: return "random";
    case Strategy::sa: return "sa";
    case Strategy::bayes: return "bayes";
  }
  return "?";
}

Strategy parse_strategy(const std::string& s) {
  if (s == "bahop") return Strategy::bahop;
  if (s == "grid") return Strategy::grid;
  if (s == "random") return Strategy::random;
  if (s == "sa") return Strategy::sa;
  if (s == "bayes") return Strategy::bayes;
  throw ConfigError("strategy", "unknown strategy '" + s + "'");
}

void OptimizerConfig::validate() const {
  if (budget < 1 && strategy != Strategy::bahop) throw ConfigError("budget", "must be >= 1");
  if (fixed_tau && !(*fixed_tau > 0.0 && std::isfinite(*fixed_tau))) {
    throw ConfigError("tau_mode", "fixed tau must be positive and finite");
  }
  if (!(sa_t0 >= 0.0) || !std::isfinite(sa_t0)) throw ConfigError("sa.t0", "must be >= 0");
  if (!(sa_alpha >= 0.0 && sa_alpha <= 1.0)) throw ConfigError("sa.alpha", "must be in [0, 1]");
  if (bayes_warm_start < 1) throw ConfigError("bayes.warm_start", "must be >= 1");
  if (!(gp_length_scale > 0.0)) throw ConfigError("bayes.length_scale", "must be > 0");
  if (!(gp_noise >= 0.0)) throw ConfigError("bayes.noise", "must be >= 0");
  try {
    start.validate();
  } catch (const InvalidParameter& e) {
    throw ConfigError("start", e.what());
  }
}

namespace {

// Shared bookkeeping for every strategy: ledger, running incumbent, and the
// per-record cost fields.
class Recorder {
 public:
  Recorder(LedgerHeader header, std::uint64_t seed) : ledger_(std::move(header)), seed_(seed) {}

  void evaluated(std::uint64_t it, const PreprocParams& p, const std::string& proposer,
                 const Evaluation& e, std::optional<Psnr> gate) {
    LedgerRecord r = base(it, p, proposer, Decision::evaluated);
    r.gate_psnr = gate;
    r.objective = e.objective;
    r.patches = e.cost.patches;
    r.latency_minutes = e.cost.latency_minutes;
    r.feature_bytes = e.cost.feature_bytes;
    if (!incumbent_ || e.objective > *incumbent_) incumbent_ = e.objective;
    r.incumbent = incumbent_;
    ledger_.append(std::move(r));
  }

  void skipped(std::uint64_t it, const PreprocParams& p, const std::string& proposer, Decision d,
               std::optional<Psnr> gate = std::nullopt) {
    LedgerRecord r = base(it, p, proposer, d);
    r.gate_psnr = gate;
    r.incumbent = incumbent_;
    ledger_.append(std::move(r));
  }

  const RunLedger& ledger() const { return ledger_; }

  OptimResult finish() && {
    OptimResult out;
    auto [best, y] = best_of(ledger_);
    out.best = best;
    out.best_objective = y;
    out.cost = ledger_.cost();
    out.tau = ledger_.header().tau;
    out.ledger = std::move(ledger_);
    return out;
  }

 private:
  LedgerRecord base(std::uint64_t it, const PreprocParams& p, const std::string& proposer, Decision d) const {
    LedgerRecord r;
    r.iteration = it;
    r.params = p;
    r.key = canonical_key(p);
    r.proposer = proposer;
    r.decision = d;
    r.seed = seed_;
    return r;
  }

  RunLedger ledger_;
  std::uint64_t seed_;
  std::optional<double> incumbent_;
};

LedgerHeader make_header(const ParamSpace& space, const OptimizerConfig& cfg) {
  LedgerHeader h;
  h.strategy = to_string(cfg.strategy);
  h.budget = cfg.budget;
  h.seed = cfg.seed;
  h.space_size = space.size();
  h.start_key = canonical_key(cfg.start);
  h.skips_consume_iterations = true;
  return h;
}

void require_in_space(const ParamSpace& space, const PreprocParams& p) {
  if (!space.contains(p)) throw ConfigError("start", canonical_key(p) + " is not in the parameter space");
}

}  // namespace

std::pair<PreprocParams, double> best_of(const RunLedger& ledger) {
  const LedgerRecord* best = nullptr;
  for (const auto& r : ledger.records()) {
    if (r.decision != Decision::evaluated || !r.objective) continue;
    if (!best || *r.objective > *best->objective) best = &r;
  }
  if (!best) throw std::logic_error("best_of: ledger has no evaluated records");
  return {best->params, *best->objective};
}

OptimResult run_basin_hopping(const ParamSpace& space, const Evaluator& eval,
                              const OptimizerConfig& cfg, const ProposalFn& propose) {
  cfg.validate();
  require_in_space(space, cfg.start);
  LedgerHeader header = make_header(space, cfg);
  header.strategy = to_string(Strategy::bahop);
  header.gate_enabled = cfg.gate_enabled;
  header.greedy_accept = cfg.greedy_accept;
  std::optional<double> tau;
  if (cfg.gate_enabled) {
    tau = cfg.fixed_tau ? *cfg.fixed_tau : calibrate_tau(eval.renderer(), cfg.start).tau;
    header.tau = tau;
    header.tau_calibrated = !cfg.fixed_tau;
  }
  Recorder rec(header, cfg.seed);
  Rng rng(cfg.seed);

  const Evaluation first = eval.evaluate(cfg.start);
  rec.evaluated(0, cfg.start, "init", first, std::nullopt);
  PreprocParams best = cfg.start;
  double best_y = first.objective;
  ThumbnailSet best_thumbs = first.thumbnails;
  // Without greedy acceptance the walk moves to every proposal the gate
  // admits (duplicates included); gate-rejected proposals are dropped.
  PreprocParams position = cfg.start;

  for (std::uint64_t it = 1; it <= cfg.budget; ++it) {
    const PreprocParams& base = cfg.greedy_accept ? best : position;
    const PreprocParams cand = propose(base, rng);
    const std::string key = canonical_key(cand);
    if (rec.ledger().has_evaluated(key)) {
      rec.skipped(it, cand, "perturb", Decision::skipped_duplicate);
      position = cand;
      continue;
    }
    std::optional<Psnr> gate;
    if (cfg.gate_enabled) {
      gate = set_psnr(eval.thumbnails(cand), best_thumbs);
      if (!gate->exceeds(*tau)) {
        rec.skipped(it, cand, "perturb", Decision::skipped_gate, gate);
        continue;
      }
    }
    Evaluation e = eval.evaluate(cand);
    rec.evaluated(it, cand, "perturb", e, gate);
    position = cand;
    if (e.objective > best_y) {
      best = cand;
      best_y = e.objective;
      best_thumbs = std::move(e.thumbnails);
    }
  }
  return std::move(rec).finish();
}

OptimResult run_ablation(const ParamSpace& space, const Evaluator& eval, const OptimizerConfig& cfg) {
  return run_basin_hopping(space, eval, cfg, [&space](const PreprocParams& p, Rng& rng) {
    return perturb(p, space, rng);
  });
}

OptimResult run_bahop(const ParamSpace& space, const Evaluator& eval, const OptimizerConfig& cfg) {
  if (cfg.strategy != Strategy::bahop) throw ConfigError("strategy", "run_bahop requires strategy bahop");
  if (!cfg.gate_enabled || !cfg.greedy_accept) {
    throw ConfigError("gate_enabled", "run_bahop requires the gate and greedy acceptance; use run_ablation");
  }
  return run_ablation(space, eval, cfg);
}

OptimResult run_grid(const ParamSpace& space, const Evaluator& eval, const OptimizerConfig& cfg) {
  cfg.validate();
  Recorder rec(make_header(space, cfg), cfg.seed);
  const std::uint64_t n = std::min<std::uint64_t>(cfg.budget, space.size());
  for (std::uint64_t i = 0; i < n; ++i) {
    const PreprocParams p = space.at(i);
    rec.evaluated(i + 1, p, "grid", eval.evaluate(p), std::nullopt);
  }
  return std::move(rec).finish();
}

OptimResult run_random(const ParamSpace& space, const Evaluator& eval, const OptimizerConfig& cfg) {
  cfg.validate();
  Recorder rec(make_header(space, cfg), cfg.seed);
  Rng rng(cfg.seed);
  for (std::uint64_t it = 1; it <= cfg.budget; ++it) {
    const PreprocParams p = space.at(rng.below(space.size()));
    if (rec.ledger().has_evaluated(canonical_key(p))) {
      rec.skipped(it, p, "random", Decision::skipped_duplicate);
    } else {
      rec.evaluated(it, p, "random", eval.evaluate(p), std::nullopt);
    }
  }
  return std::move(rec).finish();
}

OptimResult run_sa(const ParamSpace& space, const Evaluator& eval, const OptimizerConfig& cfg) {
  cfg.validate();
  require_in_space(space, cfg.start);
  Recorder rec(make_header(space, cfg), cfg.seed);
  Rng rng(cfg.seed);
  const Evaluation first = eval.evaluate(cfg.start);
  rec.evaluated(0, cfg.start, "init", first, std::nullopt);
  PreprocParams current = cfg.start;
  double current_y = first.objective;
  double temperature = cfg.sa_t0;

  // Each iteration pays one expensive evaluation: proposals that hit an
  // already-evaluated key are redrawn. Only when the whole neighbourhood is
  // exhausted does the step fall back to the cached objective.
  constexpr int kRedraws = 64;
  for (std::uint64_t it = 1; it <= cfg.budget; ++it) {
    PreprocParams cand = perturb(current, space, rng);
    for (int d = 0; d < kRedraws && rec.ledger().has_evaluated(canonical_key(cand)); ++d) {
      cand = perturb(current, space, rng);
    }
    double y = 0.0;
    if (const LedgerRecord* known = rec.ledger().find_evaluated(canonical_key(cand))) {
      y = *known->objective;
      rec.skipped(it, cand, "perturb", Decision::skipped_duplicate);
    } else {
      const Evaluation e = eval.evaluate(cand);
      y = e.objective;
      rec.evaluated(it, cand, "perturb", e, std::nullopt);
    }
    bool accept = y >= current_y;
    if (!accept && temperature > 0.0) accept = rng.uniform() < std::exp((y - current_y) / temperature);
    if (accept) {
      current = cand;
      current_y = y;
    }
    temperature *= cfg.sa_alpha;
  }
  return std::move(rec).finish();
}

OptimResult run_bayes(const ParamSpace& space, const Evaluator& eval, const OptimizerConfig& cfg) {
  cfg.validate();
  Recorder rec(make_header(space, cfg), cfg.seed);
  Rng rng(cfg.seed);
  const auto n_space = space.size();
  std::vector<char> evaluated(static_cast<std::size_t>(n_space), 0);
  std::vector<std::uint64_t> xs;
  std::vector<double> ys;

  auto record_eval = [&](std::uint64_t it, std::uint64_t idx, const char* proposer) {
    const PreprocParams p = space.at(idx);
    const Evaluation e = eval.evaluate(p);
    rec.evaluated(it, p, proposer, e, std::nullopt);
    evaluated[static_cast<std::size_t>(idx)] = 1;
    xs.push_back(idx);
    ys.push_back(e.objective);
  };
  auto features = [&](std::uint64_t idx) {
    const auto v = space.normalized(space.at(idx));
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())).eval();
  };

  std::vector<Eigen::VectorXd> all_x;
  all_x.reserve(static_cast<std::size_t>(n_space));
  for (std::uint64_t i = 0; i < n_space; ++i) all_x.push_back(features(i));

  const std::uint64_t warm = std::min<std::uint64_t>(static_cast<std::uint64_t>(cfg.bayes_warm_start), cfg.budget);
  std::uint64_t it = 1;
  for (; it <= warm; ++it) {
    const std::uint64_t idx = rng.below(n_space);
    if (evaluated[static_cast<std::size_t>(idx)]) {
      rec.skipped(it, space.at(idx), "random", Decision::skipped_duplicate);
    } else {
      record_eval(it, idx, "random");
    }
  }

  GaussianProcess gp(cfg.gp_length_scale, cfg.gp_noise);
  for (; it <= cfg.budget && xs.size() < n_space; ++it) {
    Eigen::MatrixXd X(static_cast<Eigen::Index>(xs.size()), static_cast<Eigen::Index>(PreprocParams::kAxes));
    Eigen::VectorXd Y(static_cast<Eigen::Index>(ys.size()));
    for (std::size_t i = 0; i < xs.size(); ++i) {
      X.row(static_cast<Eigen::Index>(i)) = all_x[static_cast<std::size_t>(xs[i])].transpose();
      Y(static_cast<Eigen::Index>(i)) = ys[i];
    }
    gp.fit(X, Y);
    const double best = *std::max_element(ys.begin(), ys.end());
    std::uint64_t arg = n_space;
    double best_ei = -1.0;
    for (std::uint64_t i = 0; i < n_space; ++i) {
      if (evaluated[static_cast<std::size_t>(i)]) continue;
      const auto pred = gp.predict(all_x[static_cast<std::size_t>(i)]);
      const double ei = expected_improvement(pred.mean, pred.stddev, best);
      if (ei > best_ei) {
        best_ei = ei;
        arg = i;
      }
    }
    record_eval(it, arg, "gp-ei");
  }
  return std::move(rec).finish();
}

OptimResult run(const ParamSpace& space, const Evaluator& eval, const OptimizerConfig& cfg) {
  switch (cfg.strategy) {
    case Strategy::bahop: return run_ablation(space, eval, cfg);
    case Strategy::grid: return run_grid(space, eval, cfg);
    case Strategy::random: return run_random(space, eval, cfg);
    case Strategy::sa: return run_sa(space, eval, cfg);
    case Strategy::bayes: return run_bayes(space, eval, cfg);
  }
  throw ConfigError("strategy", "unhandled strategy");
}

std::vector<VerifyFailure> verify_ledger(const RunLedger& ledger, const Evaluator& eval,
                                         const ParamSpace& space) {
  std::vector<VerifyFailure> fails;
  auto fail = [&](std::string inv, std::optional<std::uint64_t> it, std::string detail) {
    fails.push_back({std::move(inv), it, std::move(detail)});
  };
  const auto& h = ledger.header();
  const auto& recs = ledger.records();
  const bool basin = h.strategy == "bahop";

  // Set semantics, key integrity, iteration order.
  std::map<std::string, std::uint64_t> seen;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    const auto& r = recs[i];
    if (i > 0 && r.iteration <= recs[i - 1].iteration) fail("iteration-order", r.iteration, "iteration not strictly increasing");
    if (r.key != canonical_key(r.params)) fail("canonical-key", r.iteration, "key does not match params");
    if (!space.contains(r.params)) fail("in-space", r.iteration, r.key + " not in parameter space");
    if (r.decision == Decision::evaluated) {
      if (!r.objective) fail("objective-present", r.iteration, "evaluated record without objective");
      if (auto [pos, inserted] = seen.emplace(r.key, r.iteration); !inserted) {
        fail("set-semantics", r.iteration, r.key + " already evaluated at iteration " + std::to_string(pos->second));
      }
    } else {
      if (r.objective) fail("objective-present", r.iteration, "skipped record carries an objective");
      if (r.decision == Decision::skipped_duplicate && !seen.contains(r.key)) {
        fail("duplicate-skip", r.iteration, r.key + " skipped as duplicate but never evaluated before");
      }
    }
  }
  if (!fails.empty()) return fails;

  // Accounting.
  std::uint64_t expected = 0;
  if (basin || h.strategy == "sa") {
    expected = h.budget + 1;
  } else if (h.strategy == "grid") {
    expected = std::min(h.budget, space.size());
  } else {
    expected = h.budget;
  }
  if (h.strategy == "bayes" && recs.size() < expected && seen.size() == space.size()) expected = recs.size();
  const CostReport cost = ledger.cost();
  if (cost.proposals() != recs.size() || recs.size() != expected) {
    fail("accounting", std::nullopt,
         "records=" + std::to_string(recs.size()) + " expected=" + std::to_string(expected));
  }
  if (h.space_size != space.size()) fail("space-size", std::nullopt, "header space size differs from configured space");

  // Replay objectives, costs, incumbents and gate decisions.
  std::optional<double> running;
  std::optional<PreprocParams> best_params;
  std::optional<ThumbnailSet> best_thumbs;
  std::optional<double> tau = h.tau;
  if (basin && h.gate_enabled) {
    if (!tau) {
      fail("gate-threshold", std::nullopt, "gated run without tau");
    } else if (h.tau_calibrated) {
      const double t = calibrate_tau(eval.renderer(), parse_key(h.start_key)).tau;
      if (t != *tau) fail("gate-threshold", std::nullopt, "calibrated tau does not replay");
    }
  }
  std::optional<PreprocParams> previous;
  for (const auto& r : recs) {
    if (basin && previous && r.iteration > 0) {
      const PreprocParams& base = h.greedy_accept ? *best_params : *previous;
      const auto nb = space.neighbors(base);
      if (std::find(nb.begin(), nb.end(), r.params) == nb.end()) {
        fail("one-step-proposal", r.iteration, r.key + " is not one grid step from " + canonical_key(base));
      }
    }
    if (r.decision != Decision::skipped_gate) previous = r.params;
    if (r.decision == Decision::evaluated) {
      const Evaluation e = eval.evaluate(r.params);
      if (e.objective != *r.objective) {
        fail("objective-replay", r.iteration,
             r.key + " recorded " + std::to_string(*r.objective) + " replayed " + std::to_string(e.objective));
      }
      if (e.cost.patches != r.patches || e.cost.feature_bytes != r.feature_bytes ||
          e.cost.latency_minutes != r.latency_minutes) {
        fail("cost-replay", r.iteration, r.key + " cost delta does not replay");
      }
      if (basin && h.gate_enabled && r.iteration > 0 && tau && best_thumbs) {
        const Psnr g = set_psnr(e.thumbnails, *best_thumbs);
        if (!r.gate_psnr || r.gate_psnr->to_string() != g.to_string()) {
          fail("gate-replay", r.iteration, r.key + " gate PSNR does not replay");
        } else if (!g.exceeds(*tau)) {
          fail("gate-respected", r.iteration, r.key + " evaluated with PSNR " + g.to_string() + " <= tau");
        }
      }
      const double y = e.objective;
      if (!running || y > *running) {
        running = y;
        best_params = r.params;
        best_thumbs = e.thumbnails;
      }
    } else if (r.decision == Decision::skipped_gate) {
      if (!basin || !h.gate_enabled || !tau || !best_thumbs) {
        fail("gate-skip", r.iteration, "gate skip in a run without a gate");
      } else {
        const Psnr g = set_psnr(eval.thumbnails(r.params), *best_thumbs);
        if (!r.gate_psnr || r.gate_psnr->to_string() != g.to_string()) {
          fail("gate-replay", r.iteration, r.key + " gate PSNR does not replay");
        } else if (g.exceeds(*tau)) {
          fail("gate-respected", r.iteration, r.key + " skipped although PSNR " + g.to_string() + " > tau");
        }
      }
    }
    if (r.incumbent != running) {
      fail("monotone-incumbent", r.iteration, "recorded incumbent differs from running maximum");
    }
  }
  return fails;
}

}  // namespace bahop
