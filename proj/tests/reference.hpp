#pragma once

// Independent reference computations shared by the unit tests and the
// acceptance suite.

#include <algorithm>
#include <cmath>
#include <vector>

#include "logo/prototype.hpp"
#include "logo/trainer.hpp"
#include "random_data.hpp"

namespace testing_support {

// Sort (confidence desc, index asc) and slice, with the anchor count computed
// in integer arithmetic from rho = percent / 100.
inline logo::IndexLists sort_and_slice(const logo::LabelVector& y, std::span<const double> s, std::size_t k,
                                       std::size_t percent, std::size_t min_anchors) {
  logo::IndexLists out(k);
  for (std::size_t c = 0; c < k; ++c) {
    std::vector<std::pair<double, std::size_t>> members;
    for (std::size_t i = 0; i < y.size(); ++i)
      if (y[i].index() == c) members.emplace_back(-s[i], i);
    std::sort(members.begin(), members.end());
    if (members.empty()) continue;
    std::size_t keep = std::max(min_anchors, (percent * members.size()) / 100);
    keep = std::min(keep, members.size());
    for (std::size_t j = 0; j < keep; ++j) out[c].push_back(members[j].second);
    std::sort(out[c].begin(), out[c].end());
  }
  return out;
}

inline logo::AdapterModel random_model(logo::Rng& rng, std::size_t k, std::size_t d) {
  logo::AdapterModel m(random_matrix(rng, k, d), std::vector<double>(k));
  for (double& b : m.mutable_bias()) b = rng.uniform(-0.5, 0.5);
  for (double& g : m.gamma()) g = rng.uniform(0.5, 1.5);
  for (double& b : m.beta()) b = rng.uniform(-0.3, 0.3);
  return m;
}

inline logo::LabelVector with_some_ignored(logo::Rng& rng, std::size_t n, std::size_t k) {
  std::vector<logo::Label> out;
  for (std::size_t i = 0; i < n; ++i)
    out.push_back(i == 0 || rng.uniform() > 0.3 ? logo::Label(static_cast<std::uint32_t>(rng.below(k)))
                                                : logo::Label::ignore());
  return logo::LabelVector(std::move(out), k);
}

// Central differences over every gamma and beta coordinate.
inline std::vector<double> numeric_gradient(const logo::AdapterModel& m, const logo::FeatureMatrix& x,
                                            const logo::LabelVector& y) {
  const double h = 1e-6;
  auto loss_at = [&](const logo::AdapterModel& p) { return logo::cross_entropy_valid(p, x, y).loss; };
  std::vector<double> g;
  for (int which = 0; which < 2; ++which)
    for (std::size_t j = 0; j < m.d(); ++j) {
      logo::AdapterModel plus = m, minus = m;
      auto& p = which == 0 ? plus.gamma() : plus.beta();
      auto& q = which == 0 ? minus.gamma() : minus.beta();
      p[j] += h;
      q[j] -= h;
      g.push_back((loss_at(plus) - loss_at(minus)) / (2.0 * h));
    }
  return g;
}

inline std::vector<double> analytic_gradient(const logo::CrossEntropyResult& r) {
  std::vector<double> g = r.grad_gamma;
  g.insert(g.end(), r.grad_beta.begin(), r.grad_beta.end());
  return g;
}

inline double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), 1e-300});
}

}  // namespace testing_support
