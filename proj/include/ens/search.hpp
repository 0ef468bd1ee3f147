#pragma once

#include "ens/estimator.hpp"
#include "ens/simulator.hpp"
#include "ens/stats.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ens {

/// One proposed architecture. The payload is an opaque numeric key-value map;
/// evaluators define which keys they understand.
struct CandidateDescriptor {
  std::string id;
  int complexity_bin = 0;
  std::map<std::string, double> payload;
  std::string proposer_name;
};

/// Everything a proposer gets to see when asked for the next candidate:
/// the requested complexity bin, the incumbent, and the ids accepted so far.
struct ProposalContext {
  std::string run_id;
  int iteration = 0;  // 1-based
  int bin = 0;
  int bin_count = 1;
  std::optional<CandidateDescriptor> best_descriptor;  // empty before any accept
  ArchitectureStatsd best_stats;
  std::vector<std::string> history_digest;  // accepted ids, oldest first
};

/// A proposer may decline a request; the search records the reason and the
/// iteration still consumes budget.
struct ProposalResult {
  std::optional<CandidateDescriptor> descriptor;
  std::string skip_reason;

  static ProposalResult of(CandidateDescriptor d) { return {std::move(d), {}}; }
  static ProposalResult skip(std::string reason) { return {std::nullopt, std::move(reason)}; }
};

class Proposer {
 public:
  virtual ~Proposer() = default;
  virtual std::string name() const = 0;
  virtual ProposalResult propose(const ProposalContext& ctx, std::uint64_t seed) = 0;
};

/// Produces the two independently seeded proxy trainings for a candidate.
/// estimate() is what the search consumes; the default runs the batch
/// estimator over evaluate(). ground_truth() exposes the architecture's real
/// statistics when the evaluator knows them (synthetic backends do), enabling
/// decision-quality audits; live backends return nothing.
class DualProxyEvaluator {
 public:
  virtual ~DualProxyEvaluator() = default;
  virtual DualProxySampled evaluate(const CandidateDescriptor& d, std::uint64_t seed) = 0;
  virtual EstimatedStatsd estimate(const CandidateDescriptor& d, std::uint64_t seed);
  virtual std::optional<ArchitectureStatsd> ground_truth(const CandidateDescriptor&) const {
    return std::nullopt;
  }
};

/// Replays a fixed candidate list in order, stamping each with the requested
/// bin; declines once exhausted. Test and demo fixture.
class ScriptedProposer : public Proposer {
 public:
  explicit ScriptedProposer(std::vector<CandidateDescriptor> sequence)
      : sequence_(std::move(sequence)) {}
  std::string name() const override { return "scripted"; }
  ProposalResult propose(const ProposalContext& ctx, std::uint64_t seed) override;

 private:
  std::vector<CandidateDescriptor> sequence_;
  std::size_t next_ = 0;
};

struct RandomProposerOptions {
  double error_jitter_rel = 0.02;
  // Kept at zero by default: the simplified gate certifies a strict error
  // drop only when candidate variance does not fall below the incumbent's,
  // so variance drift would let accepted chains violate the audit.
  double variance_jitter_rel = 0.0;
  double correlation_jitter_abs = 0.1;
  double min_error = 1e-3;
  double min_variance = 1e-4;
  double max_correlation = 0.99;
};

/// Samples architecture-statistics payloads (keys: error, variance,
/// correlation) by jittering the incumbent's statistics. Deterministic in
/// the per-call seed.
class RandomProposer : public Proposer {
 public:
  explicit RandomProposer(RandomProposerOptions opts = {}) : opts_(opts) {}
  std::string name() const override { return "random"; }
  ProposalResult propose(const ProposalContext& ctx, std::uint64_t seed) override;

 private:
  RandomProposerOptions opts_;
};

/// Proposer behind an HTTP endpoint. Each call POSTs a versioned JSON request
/// and expects a versioned descriptor back; unreachable endpoints, non-2xx
/// statuses, malformed bodies, and version mismatches all turn into skips,
/// never exceptions.
class ExternalProposer : public Proposer {
 public:
  explicit ExternalProposer(std::string url, double timeout_seconds = 5.0);
  std::string name() const override { return "external"; }
  ProposalResult propose(const ProposalContext& ctx, std::uint64_t seed) override;

  int call_count() const { return calls_; }
  int unreachable_count() const { return unreachable_; }

 private:
  std::string base_url_;
  std::string path_;
  double timeout_seconds_;
  int calls_ = 0;
  int unreachable_ = 0;
};

struct SimulatedEvaluatorOptions {
  Eigen::Index sample_count = 1000;
  LabelModel label_model = LabelModel::kConstantP;
  double label_rate = 0.2;
  double label_rate_halfwidth = 0.0;
};

/// Maps a payload (error, variance, correlation) onto the synthetic
/// ground-truth generator and draws a correlated dual training from it.
class SimulatedEvaluator : public DualProxyEvaluator {
 public:
  explicit SimulatedEvaluator(SimulatedEvaluatorOptions opts = {}) : opts_(opts) {}
  DualProxySampled evaluate(const CandidateDescriptor& d, std::uint64_t seed) override;
  std::optional<ArchitectureStatsd> ground_truth(const CandidateDescriptor& d) const override;

 private:
  SimConfigd config_for(const CandidateDescriptor& d) const;
  SimulatedEvaluatorOptions opts_;
};

/// Bypasses sampling: estimate() returns the payload statistics verbatim, so
/// gate decisions are exact. evaluate() still exists and synthesizes a
/// four-point sample whose batch estimates reproduce those statistics
/// exactly; it refuses payloads outside that construction's reach.
class ExactEvaluator : public DualProxyEvaluator {
 public:
  DualProxySampled evaluate(const CandidateDescriptor& d, std::uint64_t seed) override;
  EstimatedStatsd estimate(const CandidateDescriptor& d, std::uint64_t seed) override;
  std::optional<ArchitectureStatsd> ground_truth(const CandidateDescriptor& d) const override;
};

/// One search iteration's full audit trail. baseline is the incumbent the
/// decision was made against; reason explains skips and auto-rejects.
struct CandidateRecord {
  int iteration = 0;  // 1-based
  int bin = 0;
  std::optional<CandidateDescriptor> descriptor;
  std::optional<EstimatedStatsd> estimated;
  ArchitectureStatsd baseline;
  double delta_error = 0.0;
  std::optional<double> threshold;
  bool accepted = false;
  bool skipped = false;
  std::string reason;
  std::optional<bool> general_accepted;  // exact-gate verdict, recorded alongside
};

struct SearchTrace {
  std::string run_id;
  ArchitectureStatsd initial_best;
  std::vector<CandidateRecord> records;
  ArchitectureStatsd final_best;
  int budget = 0;
  int bin_count = 0;
  int ensemble_size = 0;
  std::uint64_t rng_seed = 0;
  std::optional<int> winner_iteration;  // deployment marker: last accepted
  int accepted_count = 0;
  int skipped_count = 0;
  int proposer_calls = 0;
  int evaluator_calls = 0;
};

struct SearchOptions {
  int budget = 1;
  int bin_count = 1;
  std::uint64_t rng_seed = 0;
  std::string run_id = "run";
};

/// Iterative monotonic acceptance: per iteration, sample a complexity bin,
/// obtain a candidate, estimate its statistics from a dual training, and
/// accept iff its correlation lies strictly below the incumbent's threshold;
/// accepted statistics become the new incumbent. Exactly budget proposer
/// calls are made; skips consume budget.
SearchTrace run_monotonic_search(const ArchitectureStatsd& baseline, const EnsembleSpec& ens,
                                 Proposer& proposer, DualProxyEvaluator& evaluator,
                                 const SearchOptions& opts);

struct ChainLink {
  int iteration = 0;
  double error_before = 0.0;
  double error_after = 0.0;
  double margin = 0.0;  // error_before - error_after; > 0 on genuine improvement
};

struct AuditResult {
  bool pass = true;
  std::vector<ChainLink> links;
  std::optional<int> failing_iteration;
  std::string message;
  double initial_ensemble_error = 0.0;
  double final_ensemble_error = 0.0;
};

/// Replays a trace: recomputes every gate decision from the stored statistics
/// and verifies the accepted chain's ensemble error is strictly decreasing,
/// with the final incumbent no worse than the initial one (strictly better
/// iff anything was accepted).
AuditResult audit_transitivity(const SearchTrace& trace, const EnsembleSpec& ens);

/// Gate decision quality against ground truth, for evaluators that expose it.
struct GateQualityCell {
  int considered = 0;
  int accepted = 0;
  int accepted_truly_improving = 0;
  int rejected = 0;
  int rejected_truly_nonimproving = 0;

  double accept_precision() const {
    return accepted == 0 ? 1.0 : static_cast<double>(accepted_truly_improving) / accepted;
  }
  double reject_precision() const {
    return rejected == 0 ? 1.0 : static_cast<double>(rejected_truly_nonimproving) / rejected;
  }
};

/// Walks a trace and scores every gate decision against the true ensemble
/// error ordering, tracking the chain of true statistics alongside the
/// estimated ones. Records without ground truth are not scored.
GateQualityCell gate_quality(const SearchTrace& trace, const DualProxyEvaluator& evaluator,
                             const EnsembleSpec& ens);

}  // namespace ens
