#pragma once

// Synthetic domain-shift benchmark: long-tailed isotropic Gaussian mixtures.
// Source classes sit at random unit-norm means; target means are the source
// means rotated inside a random 2-plane and translated, optionally with a
// different class prior.

#include <cmath>
#include <string>
#include <vector>

#include "logo/core.hpp"

namespace logo {

struct PriorShift {
  enum class Kind { None, Reverse, Decay };
  Kind kind = Kind::None;
  double target_tail_decay = 1.0;  // used by Kind::Decay

  friend bool operator==(const PriorShift&, const PriorShift&) = default;
};

inline std::string to_string(const PriorShift& p) {
  switch (p.kind) {
    case PriorShift::Kind::None: return "none";
    case PriorShift::Kind::Reverse: return "reverse";
    case PriorShift::Kind::Decay: return "decay:" + std::to_string(p.target_tail_decay);
  }
  return "none";
}

/// Parses "none", "reverse" or "decay:<factor>".
inline PriorShift parse_prior_shift(const std::string& s) {
  if (s == "none") return {};
  if (s == "reverse") return {PriorShift::Kind::Reverse, 1.0};
  if (s.rfind("decay:", 0) == 0) {
    try {
      return {PriorShift::Kind::Decay, std::stod(s.substr(6))};
    } catch (const std::exception&) {
    }
  }
  throw Error(ErrorCode::InvalidConfig, "bad prior_shift '" + s + "'");
}

struct ScenarioConfig {
  std::size_t k = 5;
  std::size_t d = 8;
  std::size_t n_source = 4000;
  std::size_t n_target = 4000;
  double tail_decay = 0.5;
  double cluster_sigma = 0.3;
  double shift_rotation_angle = 0.3;
  double shift_translation = 0.3;
  PriorShift prior_shift{};
  RngSeed seed{7};

  void validate() const {
    if (k < 2) throw Error(ErrorCode::InvalidConfig, "k must be >= 2");
    if (d < 2) throw Error(ErrorCode::InvalidConfig, "d must be >= 2");
    if (n_source < k || n_target < k) throw Error(ErrorCode::InvalidConfig, "sample counts must be >= k");
    if (!(tail_decay > 0.0 && tail_decay <= 1.0)) throw Error(ErrorCode::InvalidConfig, "tail_decay must lie in (0, 1]");
    if (!(cluster_sigma >= 0.0)) throw Error(ErrorCode::InvalidConfig, "cluster_sigma must be >= 0");
    if (!std::isfinite(shift_rotation_angle) || !(shift_translation >= 0.0))
      throw Error(ErrorCode::InvalidConfig, "shift parameters must be finite and translation >= 0");
    if (prior_shift.kind == PriorShift::Kind::Decay &&
        !(prior_shift.target_tail_decay > 0.0 && prior_shift.target_tail_decay <= 1.0))
      throw Error(ErrorCode::InvalidConfig, "target tail decay must lie in (0, 1]");
  }

  friend bool operator==(const ScenarioConfig&, const ScenarioConfig&) = default;
};

struct Scenario {
  FeatureMatrix source_features;
  LabelVector source_labels;
  FeatureMatrix target_features;
  LabelVector target_labels;
  ScenarioConfig config;
  std::vector<double> source_prior;
  std::vector<double> target_prior;
};

/// Normalized geometric prior, class k proportional to decay^k.
inline std::vector<double> geometric_prior(std::size_t k, double decay) {
  std::vector<double> p(k);
  double w = 1.0, total = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    p[c] = w;
    total += w;
    w *= decay;
  }
  for (double& x : p) x /= total;
  return p;
}

inline std::vector<double> target_prior(const ScenarioConfig& cfg) {
  switch (cfg.prior_shift.kind) {
    case PriorShift::Kind::None: return geometric_prior(cfg.k, cfg.tail_decay);
    case PriorShift::Kind::Reverse: {
      auto p = geometric_prior(cfg.k, cfg.tail_decay);
      return {p.rbegin(), p.rend()};
    }
    case PriorShift::Kind::Decay: return geometric_prior(cfg.k, cfg.prior_shift.target_tail_decay);
  }
  return geometric_prior(cfg.k, cfg.tail_decay);
}

namespace detail {

inline std::vector<double> random_unit(Rng& rng, std::size_t d) {
  std::vector<double> v(d);
  double norm = 0.0;
  while (norm < 1e-8) {
    for (double& x : v) x = rng.normal();
    norm = l2_norm(v);
  }
  for (double& x : v) x /= norm;
  return v;
}

inline void sample_domain(Rng& rng, const Matrix& means, std::span<const double> prior, std::size_t n, double sigma,
                          Matrix& features, std::vector<Label>& labels) {
  features = Matrix(n, means.cols());
  labels.clear();
  labels.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = rng.categorical(prior);
    labels.emplace_back(static_cast<std::uint32_t>(c));
    auto row = features.row(i);
    const auto mu = means.row(c);
    for (std::size_t j = 0; j < row.size(); ++j) row[j] = mu[j] + sigma * rng.normal();
  }
}

}  // namespace detail

inline Scenario generate(const ScenarioConfig& cfg) {
  cfg.validate();
  Rng rng(split(cfg.seed, 0));

  Matrix source_means(cfg.k, cfg.d);
  for (std::size_t c = 0; c < cfg.k; ++c) {
    const auto u = detail::random_unit(rng, cfg.d);
    std::copy(u.begin(), u.end(), source_means.row(c).begin());
  }

  // Orthonormal pair (a, b) spanning the rotation plane.
  std::vector<double> a = detail::random_unit(rng, cfg.d);
  std::vector<double> b = detail::random_unit(rng, cfg.d);
  const double ab = dot(a, b);
  for (std::size_t j = 0; j < cfg.d; ++j) b[j] -= ab * a[j];
  const double bn = l2_norm(b);
  for (double& x : b) x /= bn;
  const std::vector<double> t = detail::random_unit(rng, cfg.d);

  const double cs = std::cos(cfg.shift_rotation_angle);
  const double sn = std::sin(cfg.shift_rotation_angle);
  Matrix target_means(cfg.k, cfg.d);
  for (std::size_t c = 0; c < cfg.k; ++c) {
    const auto mu = source_means.row(c);
    auto out = target_means.row(c);
    const double pa = dot(mu, a);
    const double pb = dot(mu, b);
    const double ra = cs * pa - sn * pb;
    const double rb = sn * pa + cs * pb;
    for (std::size_t j = 0; j < cfg.d; ++j)
      out[j] = mu[j] + (ra - pa) * a[j] + (rb - pb) * b[j] + cfg.shift_translation * t[j];
  }

  const auto sp = geometric_prior(cfg.k, cfg.tail_decay);
  const auto tp = target_prior(cfg);
  Matrix sx, tx;
  std::vector<Label> sy, ty;
  Rng source_rng(split(cfg.seed, 1));
  Rng target_rng(split(cfg.seed, 2));
  detail::sample_domain(source_rng, source_means, sp, cfg.n_source, cfg.cluster_sigma, sx, sy);
  detail::sample_domain(target_rng, target_means, tp, cfg.n_target, cfg.cluster_sigma, tx, ty);

  return Scenario{FeatureMatrix(std::move(sx)), LabelVector(std::move(sy), cfg.k),
                  FeatureMatrix(std::move(tx)), LabelVector(std::move(ty), cfg.k),
                  cfg, sp, tp};
}

struct NamedScenario {
  std::string name;
  ScenarioConfig config;
};

/// Baseline configuration used by sensitivity sweeps.
inline ScenarioConfig default_scenario() { return ScenarioConfig{}; }

inline std::vector<NamedScenario> default_scenarios() {
  ScenarioConfig mild = default_scenario();

  ScenarioConfig severe = default_scenario();
  severe.shift_rotation_angle = 0.6;
  severe.shift_translation = 0.6;
  severe.seed = RngSeed{11};

  // Long tail plus a reversed target prior: the source head is the target
  // tail and vice versa.
  ScenarioConfig long_tail = default_scenario();
  long_tail.k = 6;
  long_tail.d = 32;
  long_tail.tail_decay = 0.4;
  long_tail.cluster_sigma = 0.2;
  long_tail.shift_rotation_angle = 0.6;
  long_tail.shift_translation = 1.2;
  long_tail.prior_shift = {PriorShift::Kind::Reverse, 1.0};
  long_tail.seed = RngSeed{13};

  return {{"mild-shift", mild}, {"severe-shift", severe}, {"long-tail-severe", long_tail}};
}

inline ScenarioConfig scenario_by_name(const std::string& name) {
  if (name == "default") return default_scenario();
  for (const auto& s : default_scenarios())
    if (s.name == name) return s.config;
  throw Error(ErrorCode::InvalidConfig, "unknown scenario '" + name + "'");
}

}  // namespace logo
