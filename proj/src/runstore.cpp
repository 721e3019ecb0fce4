#include "bahop/runstore.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <ctime>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "bahop/errors.hpp"
#include "bahop/pnm.hpp"

namespace bahop {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = kFnvOffset) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= kFnvPrime;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failed: " + path.string());
  return ss.str();
}

// Write to a sibling temp file and rename, so readers never see a torn file.
void write_text(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << text;
    out.flush();
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("rename " + tmp.string() + ": " + ec.message());
}

void make_dirs(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

json parse_json_file(const fs::path& path) {
  const std::string text = read_text(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw IoError(path.string() + ": malformed JSON: " + e.what());
  }
}

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// --- config parsing -------------------------------------------------------

std::string join_key(const std::string& prefix, const std::string& key) {
  return prefix.empty() ? key : prefix + "." + key;
}

void reject_unknown(const json& obj, const std::string& prefix, std::initializer_list<const char*> known) {
  for (const auto& [k, v] : obj.items()) {
    bool ok = false;
    for (const char* n : known) ok = ok || k == n;
    if (!ok) throw ConfigError(join_key(prefix, k), "unknown key");
  }
}

std::uint64_t as_count(const json& v, const std::string& key) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(v.get<std::int64_t>());
  throw ConfigError(key, "expected a non-negative integer");
}

int as_int(const json& v, const std::string& key) {
  if (!v.is_number_integer()) throw ConfigError(key, "expected an integer");
  const auto x = v.get<std::int64_t>();
  if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) {
    throw ConfigError(key, "out of range");
  }
  return static_cast<int>(x);
}

double as_real(const json& v, const std::string& key) {
  if (!v.is_number()) throw ConfigError(key, "expected a number");
  return v.get<double>();
}

bool as_bool(const json& v, const std::string& key) {
  if (!v.is_boolean()) throw ConfigError(key, "expected true or false");
  return v.get<bool>();
}

std::string as_string(const json& v, const std::string& key) {
  if (!v.is_string()) throw ConfigError(key, "expected a string");
  return v.get<std::string>();
}

bool valid_run_id(const std::string& id) {
  if (id.empty() || id == "." || id == "..") return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '_' || c == '-';
  });
}

CohortSettings parse_cohort(const json& j, std::string& dir) {
  if (!j.is_object()) throw ConfigError("cohort", "expected an object");
  reject_unknown(j, "cohort", {"seed", "slides", "width", "height", "patch_size", "variant", "dir"});
  CohortSettings s;
  if (j.contains("seed")) s.seed = as_count(j["seed"], "cohort.seed");
  if (j.contains("slides")) s.slides = as_int(j["slides"], "cohort.slides");
  if (j.contains("width")) s.width = as_int(j["width"], "cohort.width");
  if (j.contains("height")) s.height = as_int(j["height"], "cohort.height");
  if (j.contains("patch_size")) s.patch_size = as_int(j["patch_size"], "cohort.patch_size");
  if (j.contains("variant")) {
    try {
      s.variant = parse_variant(as_string(j["variant"], "cohort.variant"));
    } catch (const InvalidParameter& e) {
      throw ConfigError("cohort.variant", e.what());
    }
  }
  if (j.contains("dir")) dir = as_string(j["dir"], "cohort.dir");
  try {
    s.validate();
  } catch (const InvalidParameter& e) {
    throw ConfigError("cohort", e.what());
  }
  return s;
}

ordered_json cohort_settings_json(const CohortSettings& s) {
  ordered_json j;
  j["seed"] = s.seed;
  j["slides"] = s.slides;
  j["width"] = s.width;
  j["height"] = s.height;
  j["patch_size"] = s.patch_size;
  j["variant"] = to_string(s.variant);
  return j;
}

ordered_json params_json(const PreprocParams& p) {
  ordered_json j;
  j["key"] = canonical_key(p);
  const auto v = p.values();
  for (std::size_t i = 0; i < v.size(); ++i) j[kParamNames[i]] = v[i];
  return j;
}

ordered_json cost_json(const CostReport& c) {
  ordered_json j;
  j["expensive_evals"] = c.expensive_evals;
  j["gate_skips"] = c.gate_skips;
  j["duplicate_skips"] = c.duplicate_skips;
  j["sim_latency_minutes"] = c.sim_latency_minutes;
  j["sim_feature_bytes"] = c.sim_feature_bytes;
  return j;
}

CostReport cost_from_json(const json& j) {
  CostReport c;
  c.expensive_evals = j.at("expensive_evals").get<std::uint64_t>();
  c.gate_skips = j.at("gate_skips").get<std::uint64_t>();
  c.duplicate_skips = j.at("duplicate_skips").get<std::uint64_t>();
  c.sim_latency_minutes = j.at("sim_latency_minutes").get<double>();
  c.sim_feature_bytes = j.at("sim_feature_bytes").get<std::uint64_t>();
  return c;
}

// --- cohort on disk ------------------------------------------------------

bool dir_has_entries(const fs::path& dir, const std::set<std::string>& ignore) {
  std::error_code ec;
  if (!fs::exists(dir, ec)) return false;
  if (!fs::is_directory(dir, ec)) throw IoError(dir.string() + " exists and is not a directory");
  for (const auto& e : fs::directory_iterator(dir, ec)) {
    if (!ignore.contains(e.path().filename().string())) return true;
  }
  if (ec) throw IoError("cannot list " + dir.string() + ": " + ec.message());
  return false;
}

ordered_json cohort_manifest(const SyntheticCohort& c) {
  ordered_json j;
  j["format"] = "bahop-cohort/1";
  j["seed"] = c.settings.seed;
  j["settings"] = cohort_settings_json(c.settings);
  j["tumor_slides"] = c.tumor_count();
  ordered_json slides = ordered_json::array();
  for (const auto& s : c.slides) {
    ordered_json e;
    e["id"] = s.id;
    e["label"] = to_string(s.label);
    e["file"] = "slides/" + s.id + ".ppm";
    e["fnv1a"] = hex64(raster_digest(s.raster));
    slides.push_back(e);
  }
  j["slides"] = slides;
  return j;
}

// An existing, intact cohort with identical settings makes generate a no-op.
bool cohort_matches(const fs::path& dir, const CohortSettings& settings) {
  try {
    const SyntheticCohort c = read_cohort(dir);
    return c.settings.seed == settings.seed && c.settings.slides == settings.slides &&
           c.settings.width == settings.width && c.settings.height == settings.height &&
           c.settings.patch_size == settings.patch_size && c.settings.variant == settings.variant;
  } catch (const std::exception&) {
    return false;
  }
}

bool same_pixels_settings(const CohortSettings& a, const CohortSettings& b) {
  return a.seed == b.seed && a.slides == b.slides && a.width == b.width && a.height == b.height &&
         a.patch_size == b.patch_size;
}

// --- runs ------------------------------------------------------------------

struct LoadedRun {
  fs::path dir;
  RunConfig config;
  json manifest;
};

LoadedRun load_run(const fs::path& root, const std::string& run_id) {
  const fs::path dir = run_dir(root, run_id);
  const fs::path mpath = dir / "manifest.json";
  if (!fs::exists(mpath)) throw IoError("no run '" + run_id + "' under " + (root / "runs").string());
  LoadedRun r;
  r.dir = dir;
  r.manifest = parse_json_file(mpath);
  if (!r.manifest.contains("config")) throw IoError(mpath.string() + ": missing config snapshot");
  r.config = RunConfig::from_json(r.manifest["config"]);
  return r;
}

std::shared_ptr<const SyntheticCohort> materialise_cohort(const RunConfig& cfg) {
  if (cfg.cohort_dir.empty()) return std::make_shared<const SyntheticCohort>(generate_cohort(cfg.cohort));
  SyntheticCohort c = read_cohort(cfg.cohort_dir);
  if (!same_pixels_settings(c.settings, cfg.cohort)) {
    throw ConfigError("cohort.dir", "settings in " + cfg.cohort_dir + "/cohort.json differ from the config");
  }
  c.settings.variant = cfg.cohort.variant;
  return std::make_shared<const SyntheticCohort>(std::move(c));
}

ordered_json cohort_reference(const RunConfig& cfg) {
  ordered_json j;
  if (cfg.cohort_dir.empty()) {
    j["source"] = "generated";
  } else {
    const std::string text = read_text(fs::path(cfg.cohort_dir) / "cohort.json");
    j["source"] = "dir";
    j["path"] = (fs::path(cfg.cohort_dir) / "cohort.json").string();
    j["fnv1a"] = hex64(fnv1a(text.data(), text.size()));
  }
  j["settings"] = cohort_settings_json(cfg.cohort);
  return j;
}

std::string landscape_csv(const LandscapeReport& rep) {
  std::string out = "key";
  for (const char* n : kParamNames) out += std::string(",") + n;
  out += ",objective,psnr,gap\n";
  char buf[64];
  for (const auto& r : rep.rows) {
    out += canonical_key(r.params);
    for (int v : r.params.values()) out += "," + std::to_string(v);
    std::snprintf(buf, sizeof buf, ",%.17g,", r.objective);
    out += buf;
    out += r.psnr.to_string();
    std::snprintf(buf, sizeof buf, ",%.17g\n", r.gap);
    out += buf;
  }
  return out;
}

LandscapeReport build_landscape(const RunConfig& cfg, const RunLedger& ledger, const Evaluator& eval,
                                const std::optional<std::string>& reference_key) {
  const ParamSpace space = cfg.param_space();
  std::vector<std::optional<double>> obj(space.size());
  std::uint64_t seen = 0;
  for (const auto& r : ledger.records()) {
    if (r.decision != Decision::evaluated || !r.objective || !space.contains(r.params)) continue;
    auto& slot = obj[space.index_of(r.params)];
    if (!slot) ++seen;
    slot = *r.objective;
  }
  if (seen != space.size()) {
    throw ConfigError("run_id", "landscape needs an exhaustive run: " + std::to_string(seen) + " of " +
                                    std::to_string(space.size()) +
                                    " configurations evaluated (use strategy grid with budget full)");
  }

  LandscapeReport rep;
  if (reference_key) {
    try {
      rep.reference = parse_key(*reference_key);
    } catch (const InvalidInput& e) {
      throw ConfigError("reference", e.what());
    }
    if (!space.contains(rep.reference)) throw ConfigError("reference", "not on the run's grid");
  } else {
    rep.reference = best_of(ledger).first;
  }
  rep.reference_objective = *obj[space.index_of(rep.reference)];
  const ThumbnailSet ref_thumbs = eval.thumbnails(rep.reference);

  rep.rows.resize(space.size());
  std::vector<double> xs(space.size()), ys(space.size());
  for (std::uint64_t i = 0; i < space.size(); ++i) {
    LandscapeRow& row = rep.rows[i];
    row.params = space.at(i);
    row.objective = *obj[i];
    row.psnr = set_psnr(eval.thumbnails(row.params), ref_thumbs);
    row.gap = std::abs(row.objective - rep.reference_objective);
    xs[i] = psnr_rank_value(row.psnr);
    ys[i] = row.gap;
  }
  rep.spearman = spearman(xs, ys);
  return rep;
}

}  // namespace

// --- RunConfig -------------------------------------------------------------

RunConfig RunConfig::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("(root)", "config must be a JSON object");
  reject_unknown(j, "", {"run_id", "strategy", "budget", "seed", "space", "start", "tau_mode", "gate_enabled",
                         "greedy_accept", "sa", "bayes", "cohort"});
  RunConfig c;
  if (j.contains("run_id")) {
    c.run_id = as_string(j["run_id"], "run_id");
    if (!valid_run_id(c.run_id)) throw ConfigError("run_id", "must match [A-Za-z0-9._-]+");
  }
  if (j.contains("strategy")) c.optimizer.strategy = parse_strategy(as_string(j["strategy"], "strategy"));
  if (j.contains("budget")) {
    const json& b = j["budget"];
    if (b.is_string()) {
      if (b.get<std::string>() != "full") throw ConfigError("budget", "expected an integer or \"full\"");
      c.full_budget = true;
    } else {
      c.optimizer.budget = as_count(b, "budget");
    }
  }
  if (j.contains("seed")) c.optimizer.seed = as_count(j["seed"], "seed");
  if (j.contains("space")) {
    c.space = as_string(j["space"], "space");
    if (c.space != "small" && c.space != "desk") throw ConfigError("space", "expected \"small\" or \"desk\"");
  }
  if (j.contains("start")) {
    try {
      c.optimizer.start = parse_key(as_string(j["start"], "start"));
    } catch (const InvalidInput& e) {
      throw ConfigError("start", e.what());
    }
  }
  if (j.contains("tau_mode")) {
    const json& t = j["tau_mode"];
    if (t.is_string()) {
      if (t.get<std::string>() != "calibrated") throw ConfigError("tau_mode", "expected \"calibrated\" or a number");
      c.optimizer.fixed_tau.reset();
    } else {
      c.optimizer.fixed_tau = as_real(t, "tau_mode");
    }
  }
  if (j.contains("gate_enabled")) c.optimizer.gate_enabled = as_bool(j["gate_enabled"], "gate_enabled");
  if (j.contains("greedy_accept")) c.optimizer.greedy_accept = as_bool(j["greedy_accept"], "greedy_accept");
  if (j.contains("sa")) {
    const json& s = j["sa"];
    if (!s.is_object()) throw ConfigError("sa", "expected an object");
    reject_unknown(s, "sa", {"t0", "alpha"});
    if (s.contains("t0")) c.optimizer.sa_t0 = as_real(s["t0"], "sa.t0");
    if (s.contains("alpha")) c.optimizer.sa_alpha = as_real(s["alpha"], "sa.alpha");
  }
  if (j.contains("bayes")) {
    const json& b = j["bayes"];
    if (!b.is_object()) throw ConfigError("bayes", "expected an object");
    reject_unknown(b, "bayes", {"warm_start", "length_scale", "noise"});
    if (b.contains("warm_start")) c.optimizer.bayes_warm_start = as_int(b["warm_start"], "bayes.warm_start");
    if (b.contains("length_scale")) c.optimizer.gp_length_scale = as_real(b["length_scale"], "bayes.length_scale");
    if (b.contains("noise")) c.optimizer.gp_noise = as_real(b["noise"], "bayes.noise");
  }
  if (j.contains("cohort")) c.cohort = parse_cohort(j["cohort"], c.cohort_dir);

  c.optimizer.validate();
  if (!c.param_space().contains(c.optimizer.start)) {
    throw ConfigError("start", canonical_key(c.optimizer.start) + " is not on the " + c.space + " grid");
  }
  if (c.effective_budget() < 1 && c.optimizer.strategy != Strategy::bahop) {
    throw ConfigError("budget", "must be >= 1");
  }
  return c;
}

json RunConfig::to_json() const {
  ordered_json j;
  if (!run_id.empty()) j["run_id"] = run_id;
  j["strategy"] = to_string(optimizer.strategy);
  if (full_budget) {
    j["budget"] = "full";
  } else {
    j["budget"] = optimizer.budget;
  }
  j["seed"] = optimizer.seed;
  j["space"] = space;
  j["start"] = canonical_key(optimizer.start);
  if (optimizer.fixed_tau) {
    j["tau_mode"] = *optimizer.fixed_tau;
  } else {
    j["tau_mode"] = "calibrated";
  }
  j["gate_enabled"] = optimizer.gate_enabled;
  j["greedy_accept"] = optimizer.greedy_accept;
  j["sa"] = {{"t0", optimizer.sa_t0}, {"alpha", optimizer.sa_alpha}};
  j["bayes"] = {{"warm_start", optimizer.bayes_warm_start},
                {"length_scale", optimizer.gp_length_scale},
                {"noise", optimizer.gp_noise}};
  ordered_json cj = cohort_settings_json(cohort);
  if (!cohort_dir.empty()) cj["dir"] = cohort_dir;
  j["cohort"] = cj;
  return json::parse(j.dump());
}

ParamSpace RunConfig::param_space() const { return space == "desk" ? ParamSpace::desk() : ParamSpace::small(); }

std::uint64_t RunConfig::effective_budget() const { return full_budget ? param_space().size() : optimizer.budget; }

std::string RunConfig::resolved_run_id() const {
  if (!run_id.empty()) return run_id;
  json j = to_json();
  j.erase("run_id");
  const std::string canon = j.dump();  // keys sorted
  return std::string(to_string(optimizer.strategy)) + "-" + hex64(fnv1a(canon.data(), canon.size()));
}

RunConfig load_config(const fs::path& path) {
  const std::string text = read_text(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("(file)", path.string() + ": " + e.what());
  }
  return RunConfig::from_json(j);
}

fs::path output_root(const std::optional<fs::path>& explicit_root) {
  if (explicit_root && !explicit_root->empty()) return *explicit_root;
  if (const char* env = std::getenv("BAHOP_OUT"); env && *env) return fs::path(env);
  return fs::path("bahop_out");
}

fs::path run_dir(const fs::path& root, const std::string& run_id) {
  if (!valid_run_id(run_id)) throw ConfigError("run_id", "invalid run id '" + run_id + "'");
  return root / "runs" / run_id;
}

// --- RunLock -----------------------------------------------------------------

RunLock::RunLock(const fs::path& dir) : path_(dir / ".lock") {
  make_dirs(dir);
  const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) {
    if (errno == EEXIST) throw IoError(dir.string() + " is locked by another invocation (" + path_.string() + ")");
    throw IoError("cannot create " + path_.string() + ": " + std::strerror(errno));
  }
  const std::string pid = std::to_string(::getpid()) + "\n";
  (void)!::write(fd, pid.data(), pid.size());
  ::close(fd);
}

RunLock::~RunLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

// --- cohort --------------------------------------------------------------------

std::uint64_t raster_digest(const RasterImage& img) {
  std::uint64_t h = kFnvOffset;
  const int dims[3] = {img.width(), img.height(), img.channels()};
  h = fnv1a(dims, sizeof dims, h);
  return fnv1a(img.data().data(), img.data().size(), h);
}

void write_cohort(const SyntheticCohort& cohort, const fs::path& dir) {
  make_dirs(dir / "slides");
  for (const auto& s : cohort.slides) pnm::write(dir / "slides" / (s.id + ".ppm"), s.raster);
  write_text(dir / "cohort.json", cohort_manifest(cohort).dump(2) + "\n");
}

SyntheticCohort read_cohort(const fs::path& dir) {
  const json j = parse_json_file(dir / "cohort.json");
  SyntheticCohort c;
  try {
    std::string ignored;
    c.settings = parse_cohort(j.at("settings"), ignored);
    for (const auto& e : j.at("slides")) {
      Slide s;
      s.id = e.at("id").get<std::string>();
      const std::string label = e.at("label").get<std::string>();
      if (label != "tumor" && label != "normal") throw IoError("bad label '" + label + "'");
      s.label = label == "tumor" ? SlideLabel::tumor : SlideLabel::normal;
      s.raster = pnm::read(dir / e.at("file").get<std::string>());
      if (s.raster.width() != c.settings.width || s.raster.height() != c.settings.height ||
          s.raster.channels() != 3) {
        throw IoError("slide " + s.id + " has the wrong geometry");
      }
      if (hex64(raster_digest(s.raster)) != e.at("fnv1a").get<std::string>()) {
        throw IoError("slide " + s.id + " does not match its recorded digest");
      }
      c.slides.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw IoError((dir / "cohort.json").string() + ": " + e.what());
  } catch (const ConfigError& e) {
    throw IoError((dir / "cohort.json").string() + ": " + e.what());
  } catch (const InvalidInput& e) {
    throw IoError(e.what());
  }
  if (static_cast<int>(c.slides.size()) != c.settings.slides) {
    throw IoError((dir / "cohort.json").string() + ": slide count does not match settings");
  }
  return c;
}

void cmd_generate(const GenerateOptions& opt) {
  try {
    opt.settings.validate();
  } catch (const InvalidParameter& e) {
    throw ConfigError("cohort", e.what());
  }
  make_dirs(opt.dir);
  RunLock lock(opt.dir);
  if (dir_has_entries(opt.dir, {".lock"})) {
    if (!opt.force) {
      if (cohort_matches(opt.dir, opt.settings)) return;
      throw ConfigError("force", opt.dir.string() + " is not empty; pass --force to overwrite");
    }
    std::error_code ec;
    for (const auto& e : fs::directory_iterator(opt.dir)) {
      if (e.path().filename() == ".lock") continue;
      fs::remove_all(e.path(), ec);
      if (ec) throw IoError("cannot remove " + e.path().string() + ": " + ec.message());
    }
  }
  write_cohort(generate_cohort(opt.settings), opt.dir);
}

// --- optimize ------------------------------------------------------------------

OptimizeOutcome cmd_optimize(const RunConfig& cfg, const fs::path& root) {
  OptimizeOutcome out;
  out.run_id = cfg.resolved_run_id();
  out.dir = run_dir(root, out.run_id);
  RunLock lock(out.dir);

  json snapshot = cfg.to_json();
  snapshot["run_id"] = out.run_id;
  if (fs::exists(out.dir / "manifest.json")) {
    json old;
    try {
      old = parse_json_file(out.dir / "manifest.json").at("config");
    } catch (const std::exception&) {
      old = nullptr;
    }
    if (old != snapshot) {
      throw ConfigError("run_id", "run '" + out.run_id + "' already exists with a different config");
    }
  }

  const std::string started = utc_now();
  const auto cohort = materialise_cohort(cfg);
  const Evaluator eval(cohort, cfg.cohort.variant);
  const ParamSpace space = cfg.param_space();
  OptimizerConfig oc = cfg.optimizer;
  oc.budget = cfg.effective_budget();
  out.result = run(space, eval, oc);

  const Evaluation best = eval.evaluate(out.result.best);
  out.best_patches = best.cost.patches;

  std::vector<std::string> artifacts = {"ledger.jsonl", "best_params.json", "cost.json", "patches.csv"};
  write_text(out.dir / "ledger.jsonl", out.result.ledger.to_jsonl());

  ordered_json bp = params_json(out.result.best);
  bp["objective"] = out.result.best_objective;
  bp["patches"] = out.best_patches;
  write_text(out.dir / "best_params.json", bp.dump(2) + "\n");
  write_text(out.dir / "cost.json", cost_json(out.result.cost).dump(2) + "\n");

  make_dirs(out.dir / "thumbs");
  for (std::size_t i = 0; i < best.thumbnails.size(); ++i) {
    const std::string rel = "thumbs/" + best.thumbnails.slide_ids[i] + ".ppm";
    pnm::write(out.dir / rel, best.thumbnails.images[i]);
    artifacts.push_back(rel);
  }
  std::string csv = "slide_id,row,col\n";
  for (std::size_t i = 0; i < best.grids.size(); ++i) {
    for (const auto& pc : best.grids[i].kept) {
      csv += cohort->slides[i].id + "," + std::to_string(pc.row) + "," + std::to_string(pc.col) + "\n";
    }
  }
  write_text(out.dir / "patches.csv", csv);

  std::error_code ec;
  fs::remove(out.dir / "landscape.csv", ec);
  if (out.result.cost.expensive_evals == space.size()) {
    const LandscapeReport rep = build_landscape(cfg, out.result.ledger, eval, std::nullopt);
    write_text(out.dir / "landscape.csv", landscape_csv(rep));
    artifacts.push_back("landscape.csv");
  }

  ordered_json m;
  m["run_id"] = out.run_id;
  m["tool_version"] = kToolVersion;
  m["config"] = snapshot;
  m["cohort"] = cohort_reference(cfg);
  m["artifacts"] = artifacts;
  m["started_at"] = started;
  m["finished_at"] = utc_now();
  write_text(out.dir / "manifest.json", m.dump(2) + "\n");
  return out;
}

// --- compare -------------------------------------------------------------------

std::vector<CompareRow> cmd_compare(const fs::path& root, const std::vector<std::string>& run_ids) {
  std::vector<CompareRow> rows;
  for (const auto& id : run_ids) {
    const LoadedRun run = load_run(root, id);
    CompareRow r;
    r.run_id = id;
    r.strategy = to_string(run.config.optimizer.strategy);
    try {
      r.best_objective = parse_json_file(run.dir / "best_params.json").at("objective").get<double>();
      r.cost = cost_from_json(parse_json_file(run.dir / "cost.json"));
    } catch (const json::exception& e) {
      throw IoError("run '" + id + "': " + e.what());
    }
    rows.push_back(std::move(r));
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const CompareRow& a, const CompareRow& b) { return a.strategy < b.strategy; });
  return rows;
}

std::string format_compare(const std::vector<CompareRow>& rows) {
  std::string out = "strategy\trun_id\tbest_objective\texpensive_evals\tsim_latency_minutes\tsim_feature_bytes\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s\t%s\t%.4f\t%llu\t%.4f\t%llu\n", r.strategy.c_str(), r.run_id.c_str(),
                  r.best_objective, static_cast<unsigned long long>(r.cost.expensive_evals),
                  r.cost.sim_latency_minutes, static_cast<unsigned long long>(r.cost.sim_feature_bytes));
    out += buf;
  }
  return out;
}

// --- landscape -----------------------------------------------------------------

LandscapeReport cmd_landscape(const fs::path& root, const std::string& run_id,
                              const std::optional<std::string>& reference_key) {
  const LoadedRun run = load_run(root, run_id);
  RunLock lock(run.dir);
  const RunLedger ledger = RunLedger::from_jsonl(read_text(run.dir / "ledger.jsonl"));
  const Evaluator eval(materialise_cohort(run.config), run.config.cohort.variant);
  LandscapeReport rep = build_landscape(run.config, ledger, eval, reference_key);
  rep.csv = run.dir / "landscape.csv";
  write_text(rep.csv, landscape_csv(rep));
  return rep;
}

// --- verify --------------------------------------------------------------------

std::vector<VerifyFailure> cmd_verify(const fs::path& root, const std::string& run_id) {
  const LoadedRun run = load_run(root, run_id);
  RunLock lock(run.dir);
  std::vector<VerifyFailure> fails;

  RunLedger ledger;
  try {
    ledger = RunLedger::from_jsonl_unchecked(read_text(run.dir / "ledger.jsonl"));
  } catch (const IoError&) {
    throw;
  } catch (const std::exception& e) {
    fails.push_back({"ledger-format", std::nullopt, e.what()});
    return fails;
  }

  const RunConfig& cfg = run.config;
  const LedgerHeader& h = ledger.header();
  if (h.strategy != to_string(cfg.optimizer.strategy) || h.seed != cfg.optimizer.seed ||
      h.budget != cfg.effective_budget() || h.space_size != cfg.param_space().size()) {
    fails.push_back({"config-snapshot", std::nullopt, "ledger header disagrees with the manifest config"});
  }

  const Evaluator eval(materialise_cohort(cfg), cfg.cohort.variant);
  auto more = verify_ledger(ledger, eval, cfg.param_space());
  fails.insert(fails.end(), more.begin(), more.end());

  try {
    const CostReport stored = cost_from_json(parse_json_file(run.dir / "cost.json"));
    if (!(stored == ledger.cost())) {
      fails.push_back({"cost-report", std::nullopt, "cost.json differs from the ledger replay"});
    }
  } catch (const json::exception& e) {
    fails.push_back({"cost-report", std::nullopt, e.what()});
  }
  return fails;
}

// --- statistics ----------------------------------------------------------------

namespace {

std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> rank(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = r;
    i = j + 1;
  }
  return rank;
}

}  // namespace

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw InvalidInput("spearman: length mismatch");
  const std::size_t n = x.size();
  if (n < 2) return 0.0;
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double mean = 0.5 * static_cast<double>(n + 1);
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (rx[i] - mean) * (ry[i] - mean);
    sxx += (rx[i] - mean) * (rx[i] - mean);
    syy += (ry[i] - mean) * (ry[i] - mean);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

double psnr_rank_value(const Psnr& p) {
  return p.is_infinite() ? std::numeric_limits<double>::infinity() : p.db();
}

std::vector<PreprocParams> strict_local_maxima(const ParamSpace& space, const std::vector<double>& objective) {
  if (objective.size() != space.size()) throw InvalidInput("strict_local_maxima: objective size mismatch");
  std::vector<PreprocParams> out;
  for (std::uint64_t i = 0; i < space.size(); ++i) {
    const PreprocParams p = space.at(i);
    bool strict = true;
    for (const auto& n : space.neighbors(p)) {
      if (!(objective[i] > objective[space.index_of(n)])) {
        strict = false;
        break;
      }
    }
    if (strict) out.push_back(p);
  }
  return out;
}

}  // namespace bahop
