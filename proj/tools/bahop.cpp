// bahop: generate cohorts, run optimisers, compare runs, export landscapes,
// verify ledgers.
//
// Exit codes: 0 ok, 2 config error, 3 verification failure, 4 I/O error.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bahop/errors.hpp"
#include "bahop/runstore.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitVerify = 3;
constexpr int kExitIo = 4;

struct Common {
  std::string out;
  std::optional<std::filesystem::path> root() const {
    if (out.empty()) return std::nullopt;
    return std::filesystem::path(out);
  }
};

int do_generate(const Common& c, const bahop::CohortSettings& s, const std::string& dir, bool force) {
  bahop::GenerateOptions opt;
  opt.settings = s;
  opt.force = force;
  opt.dir = dir.empty() ? bahop::output_root(c.root()) / "cohort" : std::filesystem::path(dir);
  bahop::cmd_generate(opt);
  std::printf("cohort %s (%d slides, seed %llu)\n", opt.dir.string().c_str(), s.slides,
              static_cast<unsigned long long>(s.seed));
  return kExitOk;
}

struct OptimizeArgs {
  std::string config;
  std::string strategy;
  std::string budget;
  std::optional<std::uint64_t> seed;
  std::string run_id;
  std::string variant;
  std::string cohort_dir;
  bool small = false;
  bool desk = false;
  bool no_gate = false;
  bool no_bh = false;
};

int do_optimize(const Common& c, const OptimizeArgs& a) {
  nlohmann::json j = nlohmann::json::object();
  if (!a.config.empty()) j = bahop::load_config(a.config).to_json();
  // Command-line flags override the file.
  if (!a.strategy.empty()) j["strategy"] = a.strategy;
  if (!a.budget.empty()) {
    if (a.budget == "full") {
      j["budget"] = "full";
    } else {
      try {
        std::size_t used = 0;
        const auto v = std::stoull(a.budget, &used);
        if (used != a.budget.size()) throw std::invalid_argument("");
        j["budget"] = v;
      } catch (const std::exception&) {
        throw bahop::ConfigError("budget", "expected an integer or \"full\"");
      }
    }
  }
  if (a.seed) j["seed"] = *a.seed;
  if (!a.run_id.empty()) j["run_id"] = a.run_id;
  if (a.small) j["space"] = "small";
  if (a.desk) j["space"] = "desk";
  if (a.no_gate) j["gate_enabled"] = false;
  if (a.no_bh) j["greedy_accept"] = false;
  if (!a.variant.empty()) j["cohort"]["variant"] = a.variant;
  if (!a.cohort_dir.empty()) j["cohort"]["dir"] = a.cohort_dir;

  const bahop::RunConfig cfg = bahop::RunConfig::from_json(j);
  const auto out = bahop::cmd_optimize(cfg, bahop::output_root(c.root()));
  const auto& r = out.result;
  std::printf("run %s\n", out.run_id.c_str());
  std::printf("best %s objective %.4f patches %zu\n", bahop::canonical_key(r.best).c_str(), r.best_objective,
              out.best_patches);
  if (r.tau) std::printf("tau %.4f\n", *r.tau);
  std::printf("expensive_evals %llu gate_skips %llu duplicate_skips %llu sim_latency_minutes %.4f\n",
              static_cast<unsigned long long>(r.cost.expensive_evals),
              static_cast<unsigned long long>(r.cost.gate_skips),
              static_cast<unsigned long long>(r.cost.duplicate_skips), r.cost.sim_latency_minutes);
  std::printf("dir %s\n", out.dir.string().c_str());
  return kExitOk;
}

int do_compare(const Common& c, const std::vector<std::string>& ids) {
  const auto rows = bahop::cmd_compare(bahop::output_root(c.root()), ids);
  std::fputs(bahop::format_compare(rows).c_str(), stdout);
  return kExitOk;
}

int do_landscape(const Common& c, const std::string& id, const std::string& reference) {
  std::optional<std::string> ref;
  if (!reference.empty()) ref = reference;
  const auto rep = bahop::cmd_landscape(bahop::output_root(c.root()), id, ref);
  std::printf("reference %s objective %.4f\n", bahop::canonical_key(rep.reference).c_str(),
              rep.reference_objective);
  std::printf("rows %zu\n", rep.rows.size());
  std::printf("spearman %.4f\n", rep.spearman);
  std::printf("csv %s\n", rep.csv.string().c_str());
  return kExitOk;
}

int do_verify(const Common& c, const std::string& id) {
  const auto fails = bahop::cmd_verify(bahop::output_root(c.root()), id);
  if (fails.empty()) {
    std::printf("PASS %s\n", id.c_str());
    return kExitOk;
  }
  for (const auto& f : fails) {
    if (f.iteration) {
      std::printf("FAIL %s iteration %llu: %s\n", f.invariant.c_str(),
                  static_cast<unsigned long long>(*f.iteration), f.detail.c_str());
    } else {
      std::printf("FAIL %s: %s\n", f.invariant.c_str(), f.detail.c_str());
    }
  }
  return kExitVerify;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PSNR-gated basin hopping for slide preprocessing"};
  app.require_subcommand(1);
  Common common;
  app.add_option("--out", common.out, "Output root (default $BAHOP_OUT, then ./bahop_out)");

  bahop::CohortSettings cs;
  std::string gen_dir;
  std::string gen_variant = "A";
  bool force = false;
  auto* gen = app.add_subcommand("generate", "Write a synthetic cohort to disk");
  gen->add_option("--seed", cs.seed, "Cohort seed");
  gen->add_option("--slides", cs.slides, "Slide count");
  gen->add_option("--width", cs.width);
  gen->add_option("--height", cs.height);
  gen->add_option("--patch-size", cs.patch_size);
  gen->add_option("--variant", gen_variant, "A or B");
  gen->add_option("--dir", gen_dir, "Target directory (default <out>/cohort)");
  gen->add_flag("--force", force, "Overwrite a non-empty target");

  OptimizeArgs oa;
  auto* opt = app.add_subcommand("optimize", "Run a strategy and write its artifacts");
  opt->add_option("--config", oa.config, "JSON config file");
  opt->add_option("--strategy", oa.strategy, "bahop, grid, random, sa or bayes");
  opt->add_option("--budget", oa.budget, "Iterations, or 'full'");
  opt->add_option("--seed", oa.seed);
  opt->add_option("--run-id", oa.run_id);
  opt->add_option("--variant", oa.variant, "Cohort variant A or B");
  opt->add_option("--cohort", oa.cohort_dir, "Cohort directory written by generate");
  opt->add_flag("--small", oa.small, "Use the small space");
  opt->add_flag("--desk", oa.desk, "Use the default desk space");
  opt->add_flag("--no-gate", oa.no_gate, "Disable the PSNR gate");
  opt->add_flag("--no-bh", oa.no_bh, "Disable greedy acceptance");

  std::vector<std::string> cmp_ids;
  auto* cmp = app.add_subcommand("compare", "Tabulate best objective and cost per run");
  cmp->add_option("run_ids", cmp_ids)->required();

  std::string land_id, land_ref;
  auto* land = app.add_subcommand("landscape", "Export PSNR vs objective for an exhaustive run");
  land->add_option("run_id", land_id)->required();
  land->add_option("--reference", land_ref, "Reference key (default: best)");

  std::string ver_id;
  auto* ver = app.add_subcommand("verify", "Replay a run ledger");
  ver->add_option("run_id", ver_id)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*gen) {
      cs.variant = bahop::parse_variant(gen_variant);
      return do_generate(common, cs, gen_dir, force);
    }
    if (*opt) return do_optimize(common, oa);
    if (*cmp) return do_compare(common, cmp_ids);
    if (*land) return do_landscape(common, land_id, land_ref);
    if (*ver) return do_verify(common, ver_id);
  } catch (const bahop::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const bahop::InvalidParameter& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const bahop::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}
