#pragma once

// Class-balanced local prototype estimation: partition samples by raw label,
// keep the top-rho most confident members of each class as anchors, and
// average their features into one unit-norm prototype per class. Selection
// is relative within each class; there is no global confidence threshold.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "logo/core.hpp"

namespace logo {

struct AnchorConfig {
  double rho = 0.8;
  std::size_t min_anchors = 1;

  void validate() const {
    if (!(rho > 0.0 && rho <= 1.0)) throw Error(ErrorCode::InvalidConfig, "rho must lie in (0, 1]");
    if (min_anchors < 1) throw Error(ErrorCode::InvalidConfig, "min_anchors must be >= 1");
  }
};

using IndexLists = std::vector<std::vector<std::size_t>>;

struct AnchorSets {
  IndexLists per_class;
  std::vector<std::size_t> candidate_counts;
};

struct PrototypeSet {
  Matrix mu;  // K x D, inactive rows zero
  std::vector<bool> active;

  std::size_t k() const noexcept { return mu.rows(); }
  std::size_t d() const noexcept { return mu.cols(); }
  std::size_t active_count() const {
    return static_cast<std::size_t>(std::count(active.begin(), active.end(), true));
  }
};

/// Lists I_k = {i : y_raw[i] == k}, each in ascending sample order.
inline IndexLists build_candidate_sets(const LabelVector& y_raw, std::size_t k) {
  IndexLists lists(k);
  for (std::size_t i = 0; i < y_raw.size(); ++i) {
    const Label l = y_raw[i];
    if (l.is_ignore()) throw Error(ErrorCode::InvalidArgument, "raw labels must not contain IGNORE", i);
    if (l.index() >= k) throw Error(ErrorCode::ValueExceedsK, "raw label exceeds class count", i, l.index());
    lists[l.index()].push_back(i);
  }
  return lists;
}

/// Number of anchors kept out of `candidates` members:
/// max(min_anchors, floor(rho * candidates)), capped at `candidates`.
inline std::size_t anchor_count(std::size_t candidates, const AnchorConfig& cfg) {
  if (candidates == 0) return 0;
  // The 1e-9 nudge keeps products like 0.7 * 10 from flooring to 6.
  const auto by_ratio = static_cast<std::size_t>(std::floor(cfg.rho * static_cast<double>(candidates) + 1e-9));
  return std::min(candidates, std::max(cfg.min_anchors, by_ratio));
}

/// Top-confidence members of every class. Confidence ties prefer the lower
/// sample index.
inline AnchorSets mine_anchors(const IndexLists& candidates, std::span<const double> confidence,
                               const AnchorConfig& cfg) {
  cfg.validate();
  AnchorSets out;
  out.per_class.resize(candidates.size());
  out.candidate_counts.resize(candidates.size());
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    std::vector<std::size_t> members = candidates[k];
    out.candidate_counts[k] = members.size();
    for (std::size_t i : members) {
      if (i >= confidence.size()) throw Error(ErrorCode::InvalidArgument, "candidate index out of range", i);
      if (!(confidence[i] >= 0.0 && confidence[i] <= 1.0))
        throw Error(ErrorCode::EntryOutOfRange, "confidence outside [0,1]", i, confidence[i]);
    }
    const std::size_t keep = anchor_count(members.size(), cfg);
    auto by_confidence = [&](std::size_t a, std::size_t b) {
      if (confidence[a] != confidence[b]) return confidence[a] > confidence[b];
      return a < b;
    };
    std::partial_sort(members.begin(), members.begin() + static_cast<std::ptrdiff_t>(keep), members.end(),
                      by_confidence);
    members.resize(keep);
    std::sort(members.begin(), members.end());
    out.per_class[k] = std::move(members);
  }
  return out;
}

inline constexpr double kZeroMeanNorm = 1e-12;

/// mu_k = normalize(mean of anchor features); classes without anchors are
/// inactive with an all-zero row.
inline PrototypeSet aggregate_prototypes(const AnchorSets& anchors, const FeatureMatrix& features) {
  const std::size_t k = anchors.per_class.size();
  PrototypeSet out{Matrix(k, features.d()), std::vector<bool>(k, false)};
  std::vector<double> mean(features.d());
  for (std::size_t c = 0; c < k; ++c) {
    // Ascending index order fixes the summation order.
    std::vector<std::size_t> members = anchors.per_class[c];
    if (members.empty()) continue;
    std::sort(members.begin(), members.end());
    std::fill(mean.begin(), mean.end(), 0.0);
    for (std::size_t i : members) {
      if (i >= features.n()) throw Error(ErrorCode::InvalidArgument, "anchor index out of range", i);
      const auto r = features.row(i);
      for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += r[j];
    }
    for (double& x : mean) x /= static_cast<double>(members.size());
    const double norm = l2_norm(mean);
    if (norm < kZeroMeanNorm)
      throw Error(ErrorCode::ZeroMeanVector, "anchor mean of class " + std::to_string(c) + " vanishes", c, norm);
    auto row = out.mu.row(c);
    for (std::size_t j = 0; j < mean.size(); ++j) row[j] = mean[j] / norm;
    out.active[c] = true;
  }
  return out;
}

}  // namespace logo
