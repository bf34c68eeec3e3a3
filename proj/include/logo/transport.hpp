#pragma once

// Global distribution alignment: cosine cost between samples and class
// prototypes, class prior from candidate counts, entropy-regularized optimal
// transport solved with log-domain Sinkhorn-Knopp, and per-sample assignment.
//
//   minimize  <Q, M> - lambda * H(Q)   s.t.  Q 1 = r = 1/N,  Q^T 1 = c
//
// The optimum has the form Q_ik = exp((f_i + g_k - M_ik) / lambda); the solver
// alternates exact updates of the dual potentials f and g.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "logo/core.hpp"
#include "logo/prototype.hpp"

namespace logo {

inline constexpr double kInactiveCost = std::numeric_limits<double>::infinity();

struct CostMatrix {
  Matrix m;                         // N x K, inactive columns hold kInactiveCost
  std::vector<bool> column_active;  // K

  std::size_t n() const noexcept { return m.rows(); }
  std::size_t k() const noexcept { return m.cols(); }

  /// Wraps a dense cost matrix with every column active.
  static CostMatrix dense(Matrix m) {
    std::vector<bool> active(m.cols(), true);
    for (double x : m.values())
      if (!std::isfinite(x)) throw Error(ErrorCode::NonFinite, "cost entries must be finite");
    return CostMatrix{std::move(m), std::move(active)};
  }
};

struct SinkhornConfig {
  double lambda = 0.05;
  std::size_t max_iters = 1000;
  double tol = 1e-6;

  void validate() const {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw Error(ErrorCode::InvalidConfig, "lambda must be > 0");
    if (!(tol > 0.0)) throw Error(ErrorCode::InvalidConfig, "tol must be > 0");
    if (max_iters < 1) throw Error(ErrorCode::InvalidConfig, "max_iters must be >= 1");
  }
};

struct TransportPlan {
  Matrix q;                               // N x K_active
  std::vector<std::size_t> active_classes;  // column -> original class index
  std::vector<double> c;                  // prior restricted to active classes
  std::size_t k_total = 0;
  bool converged = false;
  std::size_t iterations_used = 0;
  double marginal_error = 0.0;

  std::size_t n() const noexcept { return q.rows(); }
  double row_marginal() const { return 1.0 / static_cast<double>(q.rows()); }
};

/// M_ik = 1 - cos(f_i, mu_k), clamped to [0, 2]; inactive prototype columns
/// carry kInactiveCost.
inline CostMatrix build_cost_matrix(const FeatureMatrix& features, const PrototypeSet& prototypes) {
  if (features.d() != prototypes.d())
    throw Error(ErrorCode::DimensionMismatch, "feature and prototype dimensions differ");
  if (prototypes.active_count() == 0) throw Error(ErrorCode::NoActiveClass, "no active prototype");
  const std::size_t k = prototypes.k();
  std::vector<double> proto_norm(k, 0.0);
  for (std::size_t c = 0; c < k; ++c) {
    if (!prototypes.active[c]) continue;
    proto_norm[c] = l2_norm(prototypes.mu.row(c));
    if (proto_norm[c] == 0.0) throw Error(ErrorCode::ZeroRow, "active prototype is zero", c);
  }
  CostMatrix out{Matrix(features.n(), k), prototypes.active};
  for (std::size_t i = 0; i < features.n(); ++i) {
    const auto f = features.row(i);
    const double fn = l2_norm(f);
    if (fn == 0.0) throw Error(ErrorCode::ZeroRow, "feature row is zero", i);
    for (std::size_t c = 0; c < k; ++c) {
      if (!prototypes.active[c]) {
        out.m(i, c) = kInactiveCost;
        continue;
      }
      const double cosine = dot(f, prototypes.mu.row(c)) / (fn * proto_norm[c]);
      out.m(i, c) = std::clamp(1.0 - cosine, 0.0, 2.0);
    }
  }
  return out;
}

/// c_k = |I_k| / sum_j |I_j|; empty classes are inactive.
inline ClassPrior estimate_class_prior(std::span<const std::size_t> candidate_counts) {
  double total = 0.0;
  for (auto n : candidate_counts) total += static_cast<double>(n);
  if (total == 0.0) throw Error(ErrorCode::AllCountsZero, "every candidate count is zero");
  std::vector<double> c(candidate_counts.size());
  std::vector<bool> active(candidate_counts.size());
  for (std::size_t k = 0; k < c.size(); ++k) {
    c[k] = static_cast<double>(candidate_counts[k]) / total;
    active[k] = candidate_counts[k] > 0;
  }
  return ClassPrior(std::move(c), std::move(active));
}

namespace detail {

inline double log_sum_exp(std::span<const double> x) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : x) mx = std::max(mx, v);
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double v : x) s += std::exp(v - mx);
  return mx + std::log(s);
}

}  // namespace detail

/// L1 distance of the plan's row and column sums to (r, c).
inline double marginal_error(const Matrix& q, std::span<const double> c) {
  const double r = 1.0 / static_cast<double>(q.rows());
  std::vector<double> col(q.cols(), 0.0);
  double err = 0.0;
  for (std::size_t i = 0; i < q.rows(); ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < q.cols(); ++j) {
      row += q(i, j);
      col[j] += q(i, j);
    }
    err += std::abs(row - r);
  }
  for (std::size_t j = 0; j < q.cols(); ++j) err += std::abs(col[j] - c[j]);
  return err;
}

/// Log-domain Sinkhorn-Knopp. Classes with zero prior weight are dropped
/// from the solve. Stops when the L1 marginal error is <= tol or after
/// max_iters sweeps; `converged` reports which.
inline TransportPlan sinkhorn_solve(const CostMatrix& cost, const ClassPrior& prior, const SinkhornConfig& cfg) {
  cfg.validate();
  if (cost.k() != prior.k()) throw Error(ErrorCode::ShapeMismatch, "prior length differs from cost columns");
  if (cost.n() == 0) throw Error(ErrorCode::EmptyMatrix, "cost matrix has no rows");

  TransportPlan plan;
  plan.k_total = cost.k();
  for (std::size_t k = 0; k < cost.k(); ++k) {
    if (!prior.active(k)) continue;
    if (!cost.column_active[k])
      throw Error(ErrorCode::InvalidArgument, "prior weights a class whose cost column is inactive", k);
    plan.active_classes.push_back(k);
    plan.c.push_back(prior.weight(k));
  }
  if (plan.active_classes.empty()) throw Error(ErrorCode::NoActiveClass, "prior has no active class");

  const std::size_t n = cost.n();
  const std::size_t ka = plan.active_classes.size();
  const double lambda = cfg.lambda;

  // Active sub-block of M scaled by 1/lambda.
  Matrix scaled(n, ka);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < ka; ++j) {
      const double m = cost.m(i, plan.active_classes[j]);
      if (!std::isfinite(m)) throw Error(ErrorCode::NonFinite, "non-finite cost in an active column", i, m);
      scaled(i, j) = m / lambda;
    }

  const double log_r = -std::log(static_cast<double>(n));
  std::vector<double> log_c(ka);
  for (std::size_t j = 0; j < ka; ++j) log_c[j] = std::log(plan.c[j]);

  // Potentials in units of lambda: u = f / lambda, v = g / lambda.
  std::vector<double> u(n, 0.0), v(ka, 0.0);
  std::vector<double> scratch(std::max(n, ka));
  plan.q = Matrix(n, ka);

  auto fill_plan = [&] {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < ka; ++j) plan.q(i, j) = std::exp(u[i] + v[j] - scaled(i, j));
  };

  for (std::size_t it = 1; it <= cfg.max_iters; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < ka; ++j) scratch[j] = v[j] - scaled(i, j);
      u[i] = log_r - detail::log_sum_exp({scratch.data(), ka});
    }
    for (std::size_t j = 0; j < ka; ++j) {
      for (std::size_t i = 0; i < n; ++i) scratch[i] = u[i] - scaled(i, j);
      v[j] = log_c[j] - detail::log_sum_exp({scratch.data(), n});
    }
    for (double x : u)
      if (!std::isfinite(x)) throw Error(ErrorCode::NumericalDivergence, "row potential diverged", it);
    for (double x : v)
      if (!std::isfinite(x)) throw Error(ErrorCode::NumericalDivergence, "column potential diverged", it);

    fill_plan();
    plan.iterations_used = it;
    plan.marginal_error = marginal_error(plan.q, plan.c);
    if (plan.marginal_error <= cfg.tol) {
      plan.converged = true;
      break;
    }
  }
  return plan;
}

/// <Q, M> over the plan's active columns.
inline double transport_cost(const TransportPlan& plan, const CostMatrix& cost) {
  double total = 0.0;
  for (std::size_t i = 0; i < plan.n(); ++i)
    for (std::size_t j = 0; j < plan.active_classes.size(); ++j)
      total += plan.q(i, j) * cost.m(i, plan.active_classes[j]);
  return total;
}

/// Row argmax of Q mapped back to original class indices; ties go to the
/// lowest class.
inline LabelVector assign_labels(const TransportPlan& plan) {
  if (plan.active_classes.empty()) throw Error(ErrorCode::NoActiveClass, "plan has no active class");
  std::vector<Label> out;
  out.reserve(plan.n());
  for (std::size_t i = 0; i < plan.n(); ++i)
    out.emplace_back(static_cast<std::uint32_t>(plan.active_classes[argmax(plan.q.row(i))]));
  return LabelVector(std::move(out), plan.k_total);
}

/// Greedy reference assignment: each sample to its nearest active prototype.
inline LabelVector nearest_prototype_labels(const CostMatrix& cost) {
  std::vector<Label> out;
  out.reserve(cost.n());
  for (std::size_t i = 0; i < cost.n(); ++i) {
    std::size_t best = cost.k();
    for (std::size_t k = 0; k < cost.k(); ++k) {
      if (!cost.column_active[k]) continue;
      if (best == cost.k() || cost.m(i, k) < cost.m(i, best)) best = k;
    }
    if (best == cost.k()) throw Error(ErrorCode::NoActiveClass, "cost matrix has no active column");
    out.emplace_back(static_cast<std::uint32_t>(best));
  }
  return LabelVector(std::move(out), cost.k());
}

}  // namespace logo
