#pragma once

// One pseudo-label generation pass over an ensemble output:
// candidates -> anchors -> prototypes -> cost -> {greedy | transport} -> filter.

#include <optional>
#include <string>
#include <string_view>

#include "logo/consensus.hpp"
#include "logo/ensemble.hpp"
#include "logo/prototype.hpp"
#include "logo/transport.hpp"

namespace logo {

/// How the final pseudo-labels are formed.
enum class AssignmentMode {
  Greedy,         // nearest prototype, every sample kept
  Transport,      // transport assignment, every sample kept
  DualConsensus,  // transport assignment intersected with the ensemble label
};

inline std::string_view to_string(AssignmentMode m) {
  switch (m) {
    case AssignmentMode::Greedy: return "greedy";
    case AssignmentMode::Transport: return "transport";
    case AssignmentMode::DualConsensus: return "consensus";
  }
  return "consensus";
}

inline AssignmentMode parse_assignment_mode(std::string_view s) {
  if (s == "greedy") return AssignmentMode::Greedy;
  if (s == "transport" || s == "ot") return AssignmentMode::Transport;
  if (s == "consensus" || s == "full") return AssignmentMode::DualConsensus;
  throw Error(ErrorCode::InvalidConfig, "unknown assignment mode '" + std::string(s) + "'");
}

struct PseudoLabelConfig {
  AnchorConfig anchor;
  SinkhornConfig sinkhorn;
  AssignmentMode mode = AssignmentMode::DualConsensus;
};

struct SolveDiagnostics {
  bool converged = false;
  std::size_t iterations = 0;
  double marginal_error = 0.0;
};

struct PseudoLabelResult {
  LabelVector y_raw;
  std::optional<LabelVector> y_assigned;  // greedy or transport labels before filtering
  LabelVector y_final;
  std::vector<std::size_t> candidate_counts;
  std::vector<std::size_t> anchor_counts;
  std::vector<bool> active;
  std::vector<double> prior;  // full length K, zero for inactive classes
  std::optional<SolveDiagnostics> solve;
  ConsensusResult consensus;  // statistics of y_final against y_raw
};

inline PseudoLabelResult generate_pseudolabels(const EnsembleOutput& ens, const PseudoLabelConfig& cfg) {
  const std::size_t k = ens.p_bar.k();
  PseudoLabelResult out;
  out.y_raw = ens.y_raw;

  const IndexLists candidates = build_candidate_sets(ens.y_raw, k);
  const AnchorSets anchors = mine_anchors(candidates, ens.confidence, cfg.anchor);
  const PrototypeSet prototypes = aggregate_prototypes(anchors, ens.f_bar);
  const CostMatrix cost = build_cost_matrix(ens.f_bar, prototypes);

  out.candidate_counts = anchors.candidate_counts;
  for (const auto& a : anchors.per_class) out.anchor_counts.push_back(a.size());
  out.active = prototypes.active;
  const ClassPrior prior = estimate_class_prior(anchors.candidate_counts);
  out.prior.assign(prior.weights().begin(), prior.weights().end());

  LabelVector assigned;
  if (cfg.mode == AssignmentMode::Greedy) {
    assigned = nearest_prototype_labels(cost);
  } else {
    const TransportPlan plan = sinkhorn_solve(cost, prior, cfg.sinkhorn);
    out.solve = SolveDiagnostics{plan.converged, plan.iterations_used, plan.marginal_error};
    assigned = assign_labels(plan);
  }
  out.y_assigned = assigned;

  if (cfg.mode == AssignmentMode::DualConsensus) {
    out.consensus = dual_consensus_filter(ens.y_raw, assigned);
    out.y_final = out.consensus.y_final;
  } else {
    out.y_final = assigned;
    out.consensus.y_final = assigned;
    out.consensus.kept_count = assigned.size();
    out.consensus.per_class_kept.assign(k, 0);
    for (const Label l : assigned) ++out.consensus.per_class_kept[l.index()];
    out.consensus.consensus_rate = 1.0;
  }
  return out;
}

}  // namespace logo
