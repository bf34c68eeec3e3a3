#pragma once

// Multi-view ensemble inference: average V per-view class probabilities and
// feature embeddings into smoothed predictions, raw labels and confidences.

#include <algorithm>
#include <vector>

#include "logo/core.hpp"
#include "logo/model.hpp"

namespace logo {

struct EnsembleConfig {
  std::size_t views = 4;
  double augmentation_noise_sigma = 0.05;
  RngSeed seed{};

  void validate() const {
    if (views < 1) throw Error(ErrorCode::InvalidConfig, "ensemble needs at least one view");
    if (!(augmentation_noise_sigma >= 0.0))
      throw Error(ErrorCode::InvalidConfig, "augmentation sigma must be >= 0");
  }
};

struct EnsembleOutput {
  ProbMatrix p_bar;
  LabelVector y_raw;
  std::vector<double> confidence;  // s_i = max_k p_bar[i,k]
  FeatureMatrix f_bar;             // view-mean, then row-normalized
};

namespace detail {

// Mean of the same element across views. Values are summed in sorted order
// as offsets from the minimum, so the result does not depend on view order
// and a constant input is returned exactly.
inline double view_mean(std::vector<double>& scratch) {
  std::sort(scratch.begin(), scratch.end());
  const double base = scratch.front();
  double acc = 0.0;
  for (double x : scratch) acc += x - base;
  return base + acc / static_cast<double>(scratch.size());
}

template <typename Get>
Matrix mean_over_views(std::size_t views, std::size_t rows, std::size_t cols, Get get) {
  Matrix out(rows, cols);
  std::vector<double> scratch(views);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) {
      for (std::size_t v = 0; v < views; ++v) scratch[v] = get(v, i, j);
      out(i, j) = view_mean(scratch);
    }
  return out;
}

}  // namespace detail

/// Averages per-view probabilities and features. Argmax ties resolve to the
/// lowest class index.
inline EnsembleOutput aggregate_views(std::span<const ProbMatrix> views,
                                      std::span<const FeatureMatrix> view_features) {
  if (views.empty() || view_features.empty())
    throw Error(ErrorCode::EmptyViewList, "at least one view is required");
  const std::size_t n = views.front().n();
  const std::size_t k = views.front().k();
  for (const auto& v : views)
    if (v.n() != n || v.k() != k)
      throw Error(ErrorCode::ShapeMismatch, "probability views disagree in shape");
  const std::size_t d = view_features.front().d();
  for (const auto& f : view_features)
    if (f.n() != n || f.d() != d)
      throw Error(ErrorCode::ShapeMismatch, "feature views disagree in shape");

  Matrix p = detail::mean_over_views(views.size(), n, k,
                                     [&](std::size_t v, std::size_t i, std::size_t j) { return views[v](i, j); });
  Matrix f = detail::mean_over_views(view_features.size(), n, d,
                                     [&](std::size_t v, std::size_t i, std::size_t j) { return view_features[v](i, j); });

  std::vector<Label> y;
  std::vector<double> s;
  y.reserve(n);
  s.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t best = argmax(p.row(i));
    y.emplace_back(static_cast<std::uint32_t>(best));
    s.push_back(p(i, best));
  }
  return EnsembleOutput{ProbMatrix(std::move(p)), LabelVector(std::move(y), k), std::move(s),
                        row_normalize(FeatureMatrix(std::move(f)))};
}

/// One augmented copy of the input: additive isotropic Gaussian noise drawn
/// from the view's sub-seed. sigma == 0 returns the input unchanged.
inline FeatureMatrix perturb_view(const FeatureMatrix& features, double sigma, RngSeed view_seed) {
  if (sigma == 0.0) return features;
  Matrix m = features.matrix();
  Rng rng(view_seed);
  for (double& x : m.values()) x += sigma * rng.normal();
  return FeatureMatrix(std::move(m));
}

/// Runs `model` on V perturbed copies of `features` (view v seeded by
/// split(seed, v)) and aggregates the results.
inline EnsembleOutput run_ensemble(const AdapterModel& model, const FeatureMatrix& features,
                                   const EnsembleConfig& cfg) {
  cfg.validate();
  model.require_dim(features);
  std::vector<ProbMatrix> probs;
  std::vector<FeatureMatrix> feats;
  probs.reserve(cfg.views);
  feats.reserve(cfg.views);
  for (std::size_t v = 0; v < cfg.views; ++v) {
    const FeatureMatrix x = perturb_view(features, cfg.augmentation_noise_sigma, split(cfg.seed, v));
    probs.emplace_back(model.probabilities(x));
    feats.emplace_back(model.adapted_features(x));
  }
  return aggregate_views(probs, feats);
}

}  // namespace logo
