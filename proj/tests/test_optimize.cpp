#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "bahop/errors.hpp"
#include "bahop/optimize.hpp"
#include "common.hpp"

using namespace bahop;

namespace {

const Evaluator& ev() { return testing::frozen_evaluator(CohortVariant::A); }

OptimizerConfig config(Strategy s, std::uint64_t budget, std::uint64_t seed) {
  OptimizerConfig c;
  c.strategy = s;
  c.budget = budget;
  c.seed = seed;
  return c;
}

void check_common_invariants(const OptimResult& r) {
  double best = -1;
  std::set<std::string> keys;
  for (const auto& rec : r.ledger.records()) {
    if (rec.decision != Decision::evaluated) continue;
    CHECK(keys.insert(rec.key).second);
    best = std::max(best, *rec.objective);
  }
  CHECK(r.best_objective == best);
  CHECK(r.cost == r.ledger.cost());
  CHECK(r.ledger.find_evaluated(canonical_key(r.best))->objective == r.best_objective);
}

}  // namespace

TEST_CASE("bahop with budget 0 returns the start point") {
  const auto r = run_bahop(ParamSpace::small(), ev(), config(Strategy::bahop, 0, 1));
  CHECK(r.best == ParamSpace::default_start());
  CHECK(r.ledger.records().size() == 1);
  CHECK(r.cost.expensive_evals == 1);
  CHECK(r.best_objective == ev().evaluate(ParamSpace::default_start()).objective);
}

TEST_CASE("bahop loop accounting and gate rules") {
  const ParamSpace s = ParamSpace::small();
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto r = run_bahop(s, ev(), config(Strategy::bahop, 100, seed));
    check_common_invariants(r);
    // init record + one record per iteration
    CHECK(r.cost.proposals() == 101);
    REQUIRE(r.tau);
    double inc = -1;
    for (const auto& rec : r.ledger.records()) {
      if (rec.decision == Decision::evaluated && rec.iteration > 0) {
        REQUIRE(rec.gate_psnr);
        CHECK(rec.gate_psnr->exceeds(*r.tau));
      }
      if (rec.decision == Decision::skipped_gate) CHECK_FALSE(rec.gate_psnr->exceeds(*r.tau));
      REQUIRE(rec.incumbent);
      CHECK(*rec.incumbent >= inc);
      inc = *rec.incumbent;
    }
    CHECK(verify_ledger(r.ledger, ev(), s).empty());
    CHECK(r.best_objective > ev().evaluate(ParamSpace::default_start()).objective);
  }
}

TEST_CASE("bahop is seeded and deterministic") {
  const ParamSpace s = ParamSpace::small();
  const auto a = run_bahop(s, ev(), config(Strategy::bahop, 60, 4));
  const auto b = run_bahop(s, ev(), config(Strategy::bahop, 60, 4));
  CHECK(a.ledger.to_jsonl() == b.ledger.to_jsonl());
  const auto c = run_bahop(s, ev(), config(Strategy::bahop, 60, 5));
  CHECK(a.ledger.to_jsonl() != c.ledger.to_jsonl());
}

TEST_CASE("fixed tau is honoured") {
  OptimizerConfig c = config(Strategy::bahop, 40, 1);
  c.fixed_tau = 1000.0;
  const auto r = run_bahop(ParamSpace::small(), ev(), c);
  CHECK(*r.tau == 1000.0);
  // only identical-thumbnail proposals can pass
  for (const auto& rec : r.ledger.records()) {
    if (rec.decision == Decision::evaluated && rec.iteration > 0) CHECK(rec.gate_psnr->is_infinite());
  }
}

TEST_CASE("gate off evaluates a superset along the same proposals") {
  const ParamSpace s = ParamSpace::small();
  // Gate-skipped proposals do not move the incumbent, so with an injected
  // proposal sequence independent of the base point the gate-off run sees
  // the same proposals.
  std::vector<PreprocParams> seq;
  Rng r0(99);
  PreprocParams cur = ParamSpace::default_start();
  for (int i = 0; i < 60; ++i) {
    cur = perturb(cur, s, r0);
    seq.push_back(cur);
  }
  auto make = [&]() {
    auto idx = std::make_shared<std::size_t>(0);
    return ProposalFn([seq, idx](const PreprocParams&, Rng&) { return seq[(*idx)++]; });
  };
  OptimizerConfig on = config(Strategy::bahop, 60, 1);
  OptimizerConfig off = on;
  off.gate_enabled = false;
  const auto a = run_basin_hopping(s, ev(), on, make());
  const auto b = run_basin_hopping(s, ev(), off, make());
  for (const auto& rec : a.ledger.records()) {
    if (rec.decision == Decision::evaluated) CHECK(b.ledger.has_evaluated(rec.key));
  }
  CHECK(b.cost.gate_skips == 0);
  CHECK(b.cost.expensive_evals >= a.cost.expensive_evals);
}

TEST_CASE("ablation toggles") {
  const ParamSpace s = ParamSpace::small();
  OptimizerConfig off = config(Strategy::bahop, 100, 2);
  off.gate_enabled = false;
  const auto g = run_ablation(s, ev(), off);
  check_common_invariants(g);
  CHECK(g.cost.gate_skips == 0);
  // every novel proposal is evaluated
  CHECK(g.cost.expensive_evals + g.cost.duplicate_skips == 101);

  OptimizerConfig wander = config(Strategy::bahop, 100, 2);
  wander.greedy_accept = false;
  const auto w = run_ablation(s, ev(), wander);
  check_common_invariants(w);
  CHECK(verify_ledger(w.ledger, ev(), s).empty());
}

TEST_CASE("grid search") {
  const ParamSpace s = ParamSpace::small();
  const auto one = run_grid(s, ev(), config(Strategy::grid, 1, 1));
  CHECK(one.best == PreprocParams{6, 5, 2, 40, 8, 0});
  CHECK(one.cost.expensive_evals == 1);
  const auto r = run_grid(s, ev(), config(Strategy::grid, 37, 1));
  CHECK(r.cost.expensive_evals == 37);
  CHECK(r.cost.gate_skips == 0);
  for (std::size_t i = 0; i < r.ledger.records().size(); ++i) CHECK(r.ledger.records()[i].params == s.at(i));
  check_common_invariants(r);
}

TEST_CASE("random search") {
  const ParamSpace s = ParamSpace::small();
  const auto a = run_random(s, ev(), config(Strategy::random, 100, 3));
  const auto b = run_random(s, ev(), config(Strategy::random, 100, 3));
  CHECK(a.ledger.to_jsonl() == b.ledger.to_jsonl());
  check_common_invariants(a);
  CHECK(a.cost.proposals() == 100);

  const double expected = 1296.0 * (1.0 - std::pow(1.0 - 1.0 / 1296.0, 100));
  double sum = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto r = run_random(s, ev(), config(Strategy::random, 100, seed));
    CHECK(r.cost.duplicate_skips + r.cost.expensive_evals == 100);
    sum += static_cast<double>(r.cost.expensive_evals);
  }
  CHECK(std::abs(sum / 20.0 - expected) <= 5.0);
}

TEST_CASE("simulated annealing") {
  const ParamSpace s = ParamSpace::small();
  const auto r = run_sa(s, ev(), config(Strategy::sa, 50, 1));
  check_common_invariants(r);
  CHECK(r.cost.gate_skips == 0);

  // every SA step pays for an evaluation; BAHOP on the same seed does not
  CHECK(r.cost.expensive_evals == 51);
  CHECK(run_bahop(s, ev(), config(Strategy::bahop, 50, 1)).cost.expensive_evals < r.cost.expensive_evals);

  // alpha = 0: zero temperature after the first step, greedy from then on
  OptimizerConfig greedy = config(Strategy::sa, 50, 2);
  greedy.sa_alpha = 0.0;
  const auto g = run_sa(s, ev(), greedy);
  check_common_invariants(g);
  CHECK(g.best_objective >= g.ledger.records().front().objective.value());

  OptimizerConfig bad = config(Strategy::sa, 10, 1);
  bad.sa_alpha = 1.5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("bayesian optimisation") {
  const ParamSpace s = ParamSpace::small();
  const auto r = run_bayes(s, ev(), config(Strategy::bayes, 20, 1));
  check_common_invariants(r);
  const auto& recs = r.ledger.records();
  for (std::size_t i = 0; i < 8; ++i) CHECK(recs[i].proposer == "random");
  for (std::size_t i = 8; i < recs.size(); ++i) CHECK(recs[i].proposer == "gp-ei");
  CHECK(r.cost.proposals() == 20);
}

TEST_CASE("config validation names the key") {
  OptimizerConfig c;
  c.fixed_tau = -1.0;
  try {
    c.validate();
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.key() == "tau_mode");
  }
  OptimizerConfig g = config(Strategy::grid, 0, 1);
  CHECK_THROWS_AS(g.validate(), ConfigError);
  CHECK_THROWS_AS(parse_strategy("hyperband"), ConfigError);
}

TEST_CASE("verify catches tampering") {
  const ParamSpace s = ParamSpace::small();
  const auto r = run_bahop(s, ev(), config(Strategy::bahop, 30, 1));
  const std::string text = r.ledger.to_jsonl();

  RunLedger edited = RunLedger::from_jsonl_unchecked(text);
  RunLedger rebuilt(edited.header());
  bool done = false;
  for (auto rec : edited.records()) {
    if (!done && rec.decision == Decision::evaluated) {
      *rec.objective += 0.25;
      done = true;
    }
    rebuilt.append_unchecked(rec);
  }
  const auto f = verify_ledger(rebuilt, ev(), s);
  REQUIRE_FALSE(f.empty());
  CHECK(f[0].iteration.has_value());

  RunLedger dup(edited.header());
  for (const auto& rec : edited.records()) dup.append_unchecked(rec);
  LedgerRecord extra = edited.records().front();
  extra.iteration = edited.records().back().iteration + 1;
  dup.append_unchecked(extra);
  const auto f2 = verify_ledger(dup, ev(), s);
  CHECK(std::any_of(f2.begin(), f2.end(), [](const VerifyFailure& v) { return v.invariant == "set-semantics"; }));
}
