#pragma once

// In-memory entry points over caller-owned buffers: pseudo-label refinement
// from features plus per-view probabilities, and a transport solve on a raw
// cost matrix. Inputs are widened to double once; caller memory is only read.

#include <cstdint>
#include <span>
#include <type_traits>
#include <vector>

#include "logo/ensemble.hpp"
#include "logo/pipeline.hpp"
#include "logo/transport.hpp"

namespace logo {

/// Contiguous row-major buffer of float or double with its shape.
template <typename T>
struct ArrayView {
  static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>, "ArrayView holds float or double");

  const T* data = nullptr;
  std::size_t rows = 0;
  std::size_t cols = 0;

  ArrayView() = default;
  ArrayView(const T* d, std::size_t r, std::size_t c) : data(d), rows(r), cols(c) {}
  ArrayView(std::span<const T> values, std::size_t r, std::size_t c) : data(values.data()), rows(r), cols(c) {
    if (values.size() != r * c) throw Error(ErrorCode::ShapeMismatch, "buffer length does not match shape");
  }

  std::size_t size() const noexcept { return rows * cols; }
};

template <typename T>
Matrix widen(const ArrayView<T>& v) {
  if (v.size() > 0 && v.data == nullptr) throw Error(ErrorCode::InvalidArgument, "null buffer with nonzero shape");
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<double>(v.data[i]);
  return Matrix(v.rows, v.cols, std::move(out));
}

inline Matrix widen(const Matrix& m) { return m; }

struct RefineConfig {
  AnchorConfig anchor;
  SinkhornConfig sinkhorn;
  AssignmentMode mode = AssignmentMode::DualConsensus;
};

/// Ensemble output from externally produced views: p_bar is the mean of the
/// probability views, f_bar the mean of the feature views, row-normalized.
inline EnsembleOutput ensemble_from_views(std::span<const Matrix> feature_views, std::span<const Matrix> prob_views) {
  std::vector<ProbMatrix> probs;
  std::vector<FeatureMatrix> feats;
  probs.reserve(prob_views.size());
  feats.reserve(feature_views.size());
  for (const auto& p : prob_views) probs.emplace_back(p);
  for (const auto& f : feature_views) feats.emplace_back(f);
  return aggregate_views(probs, feats);
}

/// Features of one shared embedding plus V probability views to final labels.
template <typename F, typename P>
PseudoLabelResult refine_pseudolabels(const ArrayView<F>& features, std::span<const ArrayView<P>> views,
                                      const RefineConfig& cfg = {}) {
  if (views.empty()) throw Error(ErrorCode::EmptyViewList, "at least one probability view is required");
  const Matrix f = widen(features);
  std::vector<Matrix> p;
  p.reserve(views.size());
  for (const auto& v : views) p.push_back(widen(v));
  const EnsembleOutput ens = ensemble_from_views(std::span<const Matrix>(&f, 1), p);
  return generate_pseudolabels(ens, PseudoLabelConfig{cfg.anchor, cfg.sinkhorn, cfg.mode});
}

/// Class-index labels with IGNORE as -1.
inline std::vector<std::int64_t> to_signed_labels(const LabelVector& labels) {
  std::vector<std::int64_t> out;
  out.reserve(labels.size());
  for (const Label l : labels) out.push_back(l.is_ignore() ? -1 : static_cast<std::int64_t>(l.index()));
  return out;
}

/// Prior from raw weights as stored in a file or buffer. Weights must be
/// finite, nonnegative and sum to 1 within the probability-row tolerance;
/// they are then divided by their sum so binary32 rounding does not trip the
/// tighter prior check. Zero weights mark inactive classes.
inline ClassPrior prior_from_weights(std::span<const double> weights) {
  double sum = 0.0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    if (!std::isfinite(weights[k]) || weights[k] < 0.0)
      throw Error(ErrorCode::EntryOutOfRange, "prior weight must be finite and >= 0", k, weights[k]);
    sum += weights[k];
  }
  if (std::abs(sum - 1.0) > kProbRowTolerance)
    throw Error(ErrorCode::RowNotNormalized, "prior sums to " + std::to_string(sum), 0, sum);
  std::vector<double> c(weights.begin(), weights.end());
  for (double& x : c) x /= sum;
  return ClassPrior::from_weights(std::move(c));
}

/// Plan expanded to all K columns; classes outside the solve hold zero.
inline Matrix full_plan(const TransportPlan& plan) {
  Matrix out(plan.n(), plan.k_total);
  for (std::size_t i = 0; i < plan.n(); ++i)
    for (std::size_t j = 0; j < plan.active_classes.size(); ++j) out(i, plan.active_classes[j]) = plan.q(i, j);
  return out;
}

/// Transport solve on an N x K cost buffer and a length-K prior buffer.
template <typename C, typename W>
TransportPlan sinkhorn_solve_bound(const ArrayView<C>& cost, const ArrayView<W>& prior,
                                   const SinkhornConfig& cfg = {}) {
  if (prior.rows * prior.cols != cost.cols)
    throw Error(ErrorCode::ShapeMismatch, "prior length " + std::to_string(prior.size()) +
                                              " differs from cost columns " + std::to_string(cost.cols));
  if (cost.rows == 0 || cost.cols == 0) throw Error(ErrorCode::EmptyMatrix, "cost matrix is empty");
  const Matrix w = widen(prior);
  return sinkhorn_solve(CostMatrix::dense(widen(cost)), prior_from_weights(w.values()), cfg);
}

}  // namespace logo
