#include "ens/search.hpp"

#include "ens/rng.hpp"

#include <httplib.h>
#include <json.hpp>

#include <cmath>
#include <random>
#include <set>
#include <sstream>
#include <utility>

namespace ens {

namespace {

using nlohmann::json;

double payload_value(const CandidateDescriptor& d, const char* key) {
  const auto it = d.payload.find(key);
  if (it == d.payload.end())
    throw std::invalid_argument(std::string("candidate payload missing key '") + key + "'");
  return it->second;
}

ArchitectureStatsd payload_stats(const CandidateDescriptor& d) {
  return ArchitectureStatsd{payload_value(d, "error"), payload_value(d, "variance"),
                            payload_value(d, "correlation")};
}

json descriptor_to_json(const CandidateDescriptor& d) {
  return json{{"id", d.id},
              {"complexity_bin", d.complexity_bin},
              {"payload", d.payload},
              {"proposer_name", d.proposer_name}};
}

}  // namespace

EstimatedStatsd DualProxyEvaluator::estimate(const CandidateDescriptor& d,
                                             std::uint64_t seed) {
  return estimate_stats(evaluate(d, seed));
}

ProposalResult ScriptedProposer::propose(const ProposalContext& ctx, std::uint64_t) {
  if (next_ >= sequence_.size()) return ProposalResult::skip("proposer_exhausted");
  CandidateDescriptor d = sequence_[next_];
  if (d.id.empty()) d.id = "scripted-" + std::to_string(next_);
  ++next_;
  d.complexity_bin = ctx.bin;
  d.proposer_name = name();
  return ProposalResult::of(std::move(d));
}

ProposalResult RandomProposer::propose(const ProposalContext& ctx, std::uint64_t seed) {
  auto engine = make_engine(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const auto& best = ctx.best_stats;

  CandidateDescriptor d;
  d.id = "random-" + std::to_string(ctx.iteration);
  d.complexity_bin = ctx.bin;
  d.proposer_name = name();
  d.payload["error"] =
      std::max(opts_.min_error, best.expected_error * (1.0 + opts_.error_jitter_rel * unit(engine)));
  d.payload["variance"] = std::max(
      opts_.min_variance, best.variance * (1.0 + opts_.variance_jitter_rel * unit(engine)));
  d.payload["correlation"] =
      std::clamp(best.correlation + opts_.correlation_jitter_abs * unit(engine),
                 -opts_.max_correlation, opts_.max_correlation);
  return ProposalResult::of(std::move(d));
}

ExternalProposer::ExternalProposer(std::string url, double timeout_seconds)
    : timeout_seconds_(timeout_seconds) {
  // Split an http://host:port[/path] endpoint; the path defaults to /propose.
  const auto scheme_end = url.find("://");
  const auto path_start =
      url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
  if (path_start == std::string::npos) {
    base_url_ = std::move(url);
    path_ = "/propose";
  } else {
    base_url_ = url.substr(0, path_start);
    path_ = url.substr(path_start);
  }
}

ProposalResult ExternalProposer::propose(const ProposalContext& ctx, std::uint64_t) {
  ++calls_;
  json req{{"v", 1},
           {"run_id", ctx.run_id},
           {"iteration", ctx.iteration},
           {"bin", ctx.bin},
           {"bin_count", ctx.bin_count},
           {"best_stats",
            {{"E", ctx.best_stats.expected_error},
             {"var", ctx.best_stats.variance},
             {"rho", ctx.best_stats.correlation}}},
           {"history_digest", ctx.history_digest}};
  req["best_descriptor"] =
      ctx.best_descriptor ? descriptor_to_json(*ctx.best_descriptor) : json(nullptr);

  httplib::Client client(base_url_);
  const auto timeout = std::chrono::microseconds(
      static_cast<long long>(timeout_seconds_ * 1e6));
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);

  const auto res = client.Post(path_, req.dump(), "application/json");
  if (!res || res->status < 200 || res->status >= 300) {
    ++unreachable_;
    return ProposalResult::skip("proposer_unavailable");
  }

  try {
    const json body = json::parse(res->body);
    if (!body.contains("v") || !body.at("v").is_number_integer() ||
        body.at("v").get<int>() != 1)
      return ProposalResult::skip("protocol_version_mismatch");
    CandidateDescriptor d;
    d.id = body.at("id").get<std::string>();
    d.complexity_bin = body.at("complexity_bin").get<int>();
    d.payload = body.at("payload").get<std::map<std::string, double>>();
    d.proposer_name = name();
    if (d.id.empty()) return ProposalResult::skip("malformed_response");
    return ProposalResult::of(std::move(d));
  } catch (const json::exception&) {
    return ProposalResult::skip("malformed_response");
  }
}

SimConfigd SimulatedEvaluator::config_for(const CandidateDescriptor& d) const {
  const auto stats = payload_stats(d);
  SimConfigd cfg;
  cfg.ensemble_size = 2;
  cfg.sample_count = opts_.sample_count;
  cfg.target_error = stats.expected_error;
  cfg.target_variance = stats.variance;
  cfg.target_correlation = stats.correlation;
  cfg.label_model = opts_.label_model;
  cfg.label_rate = opts_.label_rate;
  cfg.label_rate_halfwidth = opts_.label_rate_halfwidth;
  validate(cfg);
  return cfg;
}

DualProxySampled SimulatedEvaluator::evaluate(const CandidateDescriptor& d,
                                              std::uint64_t seed) {
  SimConfigd cfg = config_for(d);
  cfg.rng_seed = seed;
  return to_dual_sample(build_equicorrelated_ensemble(cfg));
}

std::optional<ArchitectureStatsd> SimulatedEvaluator::ground_truth(
    const CandidateDescriptor& d) const {
  try {
    const auto cfg = config_for(d);
    return ArchitectureStatsd{cfg.target_error, cfg.target_variance, cfg.target_correlation};
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

DualProxySampled ExactEvaluator::evaluate(const CandidateDescriptor& d, std::uint64_t) {
  const auto stats = payload_stats(d);
  validate(stats);
  if (stats.variance <= 0.0 || stats.correlation >= 1.0)
    throw std::domain_error(
        "ExactEvaluator: four-point synthesis needs variance > 0 and correlation < 1");
  const double spread_sq = stats.variance / (1.0 - stats.correlation);
  if (stats.expected_error < spread_sq)
    throw std::domain_error(
        "ExactEvaluator: error too small for the requested variance and correlation");
  const double p = std::sqrt(spread_sq);
  const double mu = std::sqrt(stats.expected_error - spread_sq);
  const double rho = stats.correlation;
  const double ortho = std::sqrt(1.0 - rho * rho);

  // Two direction vectors orthogonal to each other and to the constant vector
  // give independent control of the correlation and the pairwise spread.
  const Eigen::Vector4d g(1.0, -1.0, 1.0, -1.0);
  const Eigen::Vector4d h(1.0, 1.0, -1.0, -1.0);
  DualProxySampled s;
  s.first = Eigen::Vector4d::Constant(mu) + p * g;
  s.second = Eigen::Vector4d::Constant(mu) + p * (rho * g + ortho * h);
  s.labels = Eigen::Vector4d::Zero();
  return s;
}

EstimatedStatsd ExactEvaluator::estimate(const CandidateDescriptor& d, std::uint64_t) {
  const auto stats = payload_stats(d);
  validate(stats);
  EstimatedStatsd est;
  est.stats = stats;
  est.sample_count = 4;
  return est;
}

std::optional<ArchitectureStatsd> ExactEvaluator::ground_truth(
    const CandidateDescriptor& d) const {
  try {
    const auto stats = payload_stats(d);
    validate(stats);
    return stats;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

SearchTrace run_monotonic_search(const ArchitectureStatsd& baseline, const EnsembleSpec& ens,
                                 Proposer& proposer, DualProxyEvaluator& evaluator,
                                 const SearchOptions& opts) {
  validate(baseline);
  validate(ens);
  if (ens.size < 2)
    throw std::invalid_argument("run_monotonic_search: ensemble size must be >= 2");
  if (!(baseline.variance > 0.0))
    throw std::invalid_argument("run_monotonic_search: baseline variance must be > 0");
  if (opts.budget < 1) throw std::invalid_argument("run_monotonic_search: budget must be >= 1");
  if (opts.bin_count < 1)
    throw std::invalid_argument("run_monotonic_search: bin count must be >= 1");

  SearchTrace trace;
  trace.run_id = opts.run_id;
  trace.initial_best = baseline;
  trace.budget = opts.budget;
  trace.bin_count = opts.bin_count;
  trace.ensemble_size = ens.size;
  trace.rng_seed = opts.rng_seed;
  trace.records.reserve(opts.budget);

  auto bin_engine = make_engine(derive_seed(opts.rng_seed, 0xb1u));
  std::uniform_int_distribution<int> bin_dist(0, opts.bin_count - 1);

  ArchitectureStatsd best = baseline;
  std::optional<CandidateDescriptor> best_descriptor;
  std::vector<std::string> digest;
  std::set<std::string> seen_ids;

  for (int i = 1; i <= opts.budget; ++i) {
    const std::uint64_t iter = static_cast<std::uint64_t>(i);
    CandidateRecord rec;
    rec.iteration = i;
    rec.bin = bin_dist(bin_engine);
    rec.baseline = best;

    ProposalContext ctx;
    ctx.run_id = opts.run_id;
    ctx.iteration = i;
    ctx.bin = rec.bin;
    ctx.bin_count = opts.bin_count;
    ctx.best_descriptor = best_descriptor;
    ctx.best_stats = best;
    ctx.history_digest = digest;

    auto proposal = proposer.propose(ctx, derive_seed(opts.rng_seed, iter, 1));
    ++trace.proposer_calls;

    if (!proposal.descriptor) {
      rec.skipped = true;
      rec.reason = proposal.skip_reason.empty() ? "proposer_declined" : proposal.skip_reason;
      ++trace.skipped_count;
      trace.records.push_back(std::move(rec));
      continue;
    }

    CandidateDescriptor descriptor = std::move(*proposal.descriptor);
    if (descriptor.complexity_bin != rec.bin) {
      rec.descriptor = std::move(descriptor);
      rec.skipped = true;
      rec.reason = "bin_mismatch";
      ++trace.skipped_count;
      trace.records.push_back(std::move(rec));
      continue;
    }
    if (!seen_ids.insert(descriptor.id).second) {
      rec.descriptor = std::move(descriptor);
      rec.skipped = true;
      rec.reason = "duplicate_id";
      ++trace.skipped_count;
      trace.records.push_back(std::move(rec));
      continue;
    }
    rec.descriptor = descriptor;

    EstimatedStatsd estimated;
    try {
      estimated = evaluator.estimate(descriptor, derive_seed(opts.rng_seed, iter, 2));
      ++trace.evaluator_calls;
    } catch (const std::exception& e) {
      rec.skipped = true;
      rec.reason = std::string("evaluation_error: ") + e.what();
      ++trace.skipped_count;
      trace.records.push_back(std::move(rec));
      continue;
    }

    rec.estimated = estimated;
    rec.delta_error = estimate_delta_error(estimated, best);

    if (estimated.degenerate_rho) {
      rec.reason = "degenerate_correlation";
    } else if (!(estimated.stats.variance > 0.0)) {
      rec.reason = "zero_variance_estimate";
    } else {
      rec.threshold = monotonic_threshold(best, rec.delta_error, estimated.stats.variance, ens);
      rec.accepted = estimated.stats.correlation < *rec.threshold;
      rec.general_accepted = gate_general(estimated.stats, best, ens);
    }

    if (rec.accepted) {
      best = estimated.stats;
      best_descriptor = descriptor;
      digest.push_back(descriptor.id);
      trace.winner_iteration = i;
      ++trace.accepted_count;
    }
    trace.records.push_back(std::move(rec));
  }

  trace.final_best = best;
  return trace;
}

AuditResult audit_transitivity(const SearchTrace& trace, const EnsembleSpec& ens) {
  AuditResult audit;
  audit.initial_ensemble_error = ensemble_error_homogeneous(trace.initial_best, ens);
  audit.final_ensemble_error = audit.initial_ensemble_error;

  auto fail = [&](int iteration, const std::string& message) {
    audit.pass = false;
    audit.failing_iteration = iteration;
    audit.message = message;
  };

  ArchitectureStatsd best = trace.initial_best;
  for (const auto& rec : trace.records) {
    if (rec.skipped) {
      if (rec.accepted) return fail(rec.iteration, "skipped record marked accepted"), audit;
      continue;
    }
    if (!rec.estimated) return fail(rec.iteration, "missing estimate on live record"), audit;

    const auto& est = *rec.estimated;
    const bool gate_applicable = !est.degenerate_rho && est.stats.variance > 0.0;
    bool expected = false;
    if (gate_applicable) {
      const double threshold =
          monotonic_threshold(best, est.stats.expected_error - best.expected_error,
                              est.stats.variance, ens);
      if (rec.threshold && std::abs(*rec.threshold - threshold) > 1e-12)
        return fail(rec.iteration, "stored threshold does not reproduce"), audit;
      expected = est.stats.correlation < threshold;
    }
    if (rec.accepted != expected)
      return fail(rec.iteration, "accept flag does not reproduce from stored stats"), audit;

    if (rec.accepted) {
      const double before = ensemble_error_homogeneous(best, ens);
      const double after = ensemble_error_homogeneous(est.stats, ens);
      audit.links.push_back(ChainLink{rec.iteration, before, after, before - after});
      if (!(after < before))
        return fail(rec.iteration, "accepted link does not strictly lower the ensemble error"),
               audit;
      best = est.stats;
    }
  }

  audit.final_ensemble_error = ensemble_error_homogeneous(best, ens);
  if (best.expected_error != trace.final_best.expected_error ||
      best.variance != trace.final_best.variance ||
      best.correlation != trace.final_best.correlation) {
    fail(0, "final incumbent does not match the replayed chain");
    return audit;
  }
  const bool any_accept = !audit.links.empty();
  if (any_accept && !(audit.final_ensemble_error < audit.initial_ensemble_error))
    fail(trace.records.empty() ? 0 : trace.records.back().iteration,
         "final incumbent not strictly better despite acceptances");
  return audit;
}

GateQualityCell gate_quality(const SearchTrace& trace, const DualProxyEvaluator& evaluator,
                             const EnsembleSpec& ens) {
  GateQualityCell cell;
  ArchitectureStatsd best_true = trace.initial_best;
  for (const auto& rec : trace.records) {
    if (rec.skipped || !rec.descriptor || !rec.estimated) continue;
    const auto truth = evaluator.ground_truth(*rec.descriptor);
    if (!truth) continue;
    const double true_delta = ensemble_error_homogeneous(*truth, ens) -
                              ensemble_error_homogeneous(best_true, ens);
    ++cell.considered;
    if (rec.accepted) {
      ++cell.accepted;
      if (true_delta < 0.0) ++cell.accepted_truly_improving;
      best_true = *truth;
    } else {
      ++cell.rejected;
      if (true_delta >= 0.0) ++cell.rejected_truly_nonimproving;
    }
  }
  return cell;
}

}  // namespace ens
