#include "bahop/ledger.hpp"

#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "bahop/errors.hpp"
#include "bahop/paramspace.hpp"

namespace bahop {

using ordered_json = nlohmann::ordered_json;

const char* to_string(Decision d) {
  switch (d) {
    case Decision::evaluated: return "evaluated";
    case Decision::skipped_gate: return "skipped-by-gate";
    case Decision::skipped_duplicate: return "skipped-duplicate";
  }
  return "?";
}

Decision parse_decision(const std::string& s) {
  if (s == "evaluated") return Decision::evaluated;
  if (s == "skipped-by-gate") return Decision::skipped_gate;
  if (s == "skipped-duplicate") return Decision::skipped_duplicate;
  throw InvalidInput("ledger: unknown decision '" + s + "'");
}

void RunLedger::append(LedgerRecord r) {
  if (!records_.empty() && r.iteration <= records_.back().iteration) {
    throw std::logic_error("ledger: iteration indices must strictly increase");
  }
  if (r.decision == Decision::evaluated) {
    if (!evaluated_.insert(r.key).second) {
      throw std::logic_error("ledger: key " + r.key + " already evaluated");
    }
  }
  records_.push_back(std::move(r));
}

void RunLedger::append_unchecked(LedgerRecord r) {
  if (r.decision == Decision::evaluated) evaluated_.insert(r.key);
  records_.push_back(std::move(r));
}

const LedgerRecord* RunLedger::find_evaluated(const std::string& key) const {
  if (!evaluated_.contains(key)) return nullptr;
  for (const auto& r : records_) {
    if (r.decision == Decision::evaluated && r.key == key) return &r;
  }
  return nullptr;
}

CostReport RunLedger::cost() const {
  CostReport c;
  for (const auto& r : records_) {
    switch (r.decision) {
      case Decision::evaluated:
        ++c.expensive_evals;
        c.sim_latency_minutes += r.latency_minutes;
        c.sim_feature_bytes += r.feature_bytes;
        break;
      case Decision::skipped_gate: ++c.gate_skips; break;
      case Decision::skipped_duplicate: ++c.duplicate_skips; break;
    }
  }
  return c;
}

namespace {

template <typename T>
ordered_json opt(const std::optional<T>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

ordered_json header_json(const LedgerHeader& h) {
  ordered_json j;
  j["type"] = "header";
  j["strategy"] = h.strategy;
  j["budget"] = h.budget;
  j["seed"] = h.seed;
  j["tau"] = opt(h.tau);
  j["tau_mode"] = h.tau ? (h.tau_calibrated ? "calibrated" : "fixed") : "none";
  j["gate_enabled"] = h.gate_enabled;
  j["greedy_accept"] = h.greedy_accept;
  j["space_size"] = h.space_size;
  j["start"] = h.start_key;
  j["skips_consume_iterations"] = h.skips_consume_iterations;
  return j;
}

ordered_json record_json(const LedgerRecord& r) {
  ordered_json j;
  j["type"] = "record";
  j["iteration"] = r.iteration;
  j["key"] = r.key;
  j["params"] = r.params.values();
  j["proposer"] = r.proposer;
  j["decision"] = to_string(r.decision);
  j["gate_psnr"] = r.gate_psnr ? ordered_json(r.gate_psnr->to_string()) : ordered_json(nullptr);
  j["objective"] = opt(r.objective);
  j["patches"] = r.patches;
  j["latency_minutes"] = r.latency_minutes;
  j["feature_bytes"] = r.feature_bytes;
  j["incumbent"] = opt(r.incumbent);
  j["seed"] = r.seed;
  return j;
}

template <typename T>
std::optional<T> get_opt(const ordered_json& j, const char* k) {
  if (!j.contains(k) || j.at(k).is_null()) return std::nullopt;
  return j.at(k).get<T>();
}

RunLedger parse(const std::string& text, bool checked) {
  std::istringstream in(text);
  std::string line;
  RunLedger ledger;
  bool have_header = false;
  std::size_t lineno = 0;
  std::vector<LedgerRecord> raw;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    ordered_json j;
    try {
      j = ordered_json::parse(line);
      const std::string type = j.at("type").get<std::string>();
      if (type == "header") {
        LedgerHeader h;
        h.strategy = j.at("strategy").get<std::string>();
        h.budget = j.at("budget").get<std::uint64_t>();
        h.seed = j.at("seed").get<std::uint64_t>();
        h.tau = get_opt<double>(j, "tau");
        h.tau_calibrated = j.at("tau_mode").get<std::string>() == "calibrated";
        h.gate_enabled = j.at("gate_enabled").get<bool>();
        h.greedy_accept = j.at("greedy_accept").get<bool>();
        h.space_size = j.at("space_size").get<std::uint64_t>();
        h.start_key = j.at("start").get<std::string>();
        h.skips_consume_iterations = j.at("skips_consume_iterations").get<bool>();
        ledger = RunLedger(h);
        have_header = true;
        continue;
      }
      LedgerRecord r;
      r.iteration = j.at("iteration").get<std::uint64_t>();
      r.key = j.at("key").get<std::string>();
      r.params = PreprocParams::from_values(j.at("params").get<std::array<int, PreprocParams::kAxes>>());
      r.proposer = j.at("proposer").get<std::string>();
      r.decision = parse_decision(j.at("decision").get<std::string>());
      if (auto g = get_opt<std::string>(j, "gate_psnr")) r.gate_psnr = Psnr::parse(*g);
      r.objective = get_opt<double>(j, "objective");
      r.patches = j.at("patches").get<std::uint64_t>();
      r.latency_minutes = j.at("latency_minutes").get<double>();
      r.feature_bytes = j.at("feature_bytes").get<std::uint64_t>();
      r.incumbent = get_opt<double>(j, "incumbent");
      r.seed = j.at("seed").get<std::uint64_t>();
      raw.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw InvalidInput("ledger line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (!have_header) throw InvalidInput("ledger: missing header line");
  for (auto& r : raw) {
    if (checked) {
      ledger.append(std::move(r));
    } else {
      ledger.append_unchecked(std::move(r));
    }
  }
  return ledger;
}

}  // namespace

std::string RunLedger::to_jsonl() const {
  std::string out = header_json(header_).dump() + "\n";
  for (const auto& r : records_) out += record_json(r).dump() + "\n";
  return out;
}

RunLedger RunLedger::from_jsonl(const std::string& text) { return parse(text, true); }
RunLedger RunLedger::from_jsonl_unchecked(const std::string& text) { return parse(text, false); }

}  // namespace bahop
