#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "bahop/segmentation.hpp"
#include "bahop/similarity.hpp"

namespace bahop {

/// Simulated cost of a run. Only the expensive step (feature extraction +
/// inference) contributes latency and bytes.
struct CostReport {
  std::uint64_t expensive_evals = 0;
  std::uint64_t gate_skips = 0;
  std::uint64_t duplicate_skips = 0;
  double sim_latency_minutes = 0.0;
  std::uint64_t sim_feature_bytes = 0;

  std::uint64_t proposals() const { return expensive_evals + gate_skips + duplicate_skips; }
  friend bool operator==(const CostReport&, const CostReport&) = default;
};

enum class Decision { evaluated, skipped_gate, skipped_duplicate };

const char* to_string(Decision d);
Decision parse_decision(const std::string& s);

struct LedgerRecord {
  std::uint64_t iteration = 0;
  PreprocParams params;
  std::string key;
  // How the proposal was produced: init, perturb, grid, random, gp-ei.
  std::string proposer;
  Decision decision = Decision::evaluated;
  std::optional<Psnr> gate_psnr;
  std::optional<double> objective;
  std::uint64_t patches = 0;
  double latency_minutes = 0.0;
  std::uint64_t feature_bytes = 0;
  // Best objective seen so far, after this record.
  std::optional<double> incumbent;
  std::uint64_t seed = 0;
};

struct LedgerHeader {
  std::string strategy;
  std::uint64_t budget = 0;
  std::uint64_t seed = 0;
  std::optional<double> tau;
  bool tau_calibrated = false;
  bool gate_enabled = false;
  bool greedy_accept = false;
  std::uint64_t space_size = 0;
  std::string start_key;
  // Gate- and duplicate-skipped proposals count against the budget.
  bool skips_consume_iterations = true;
};

/// Append-only run record. Evaluated keys form a set: a second evaluated
/// record for the same key is rejected.
class RunLedger {
 public:
  RunLedger() = default;
  explicit RunLedger(LedgerHeader header) : header_(std::move(header)) {}

  const LedgerHeader& header() const { return header_; }
  LedgerHeader& header() { return header_; }
  const std::vector<LedgerRecord>& records() const { return records_; }

  /// Throws std::logic_error on a duplicate evaluated key or a
  /// non-increasing iteration index.
  void append(LedgerRecord r);

  /// No invariant checks; used when loading a ledger that is itself under
  /// verification.
  void append_unchecked(LedgerRecord r);

  bool has_evaluated(const std::string& key) const { return evaluated_.contains(key); }
  const LedgerRecord* find_evaluated(const std::string& key) const;

  CostReport cost() const;

  /// One JSON object per line; header first. Field order is fixed.
  std::string to_jsonl() const;
  static RunLedger from_jsonl(const std::string& text);
  /// Parses without enforcing set semantics, so verification can report
  /// violations instead of failing to load.
  static RunLedger from_jsonl_unchecked(const std::string& text);

 private:
  LedgerHeader header_;
  std::vector<LedgerRecord> records_;
  std::unordered_set<std::string> evaluated_;
};

}  // namespace bahop
