#pragma once

// Synthetic benchmark runner: generate a scenario, pretrain on source,
// adapt on target, score source-only vs adapted teacher.

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "logo/metrics.hpp"
#include "logo/synth.hpp"
#include "logo/trainer.hpp"

namespace logo {

/// Desk-scale training preset used on the synthetic scenarios. The linear
/// adapter needs a larger step and a faster teacher than a deep backbone to
/// move within three short epochs.
inline TrainConfig benchmark_train_config() {
  TrainConfig c;
  c.epochs = 3;
  c.steps_per_epoch = 100;
  c.batch_size = 64;
  c.learning_rate = 0.05;
  c.ema_momentum = 0.99;
  c.ensemble.views = 4;
  c.ensemble.augmentation_noise_sigma = 0.2;
  c.ensemble.seed = RngSeed{5};
  c.anchor.rho = 0.8;
  c.seed = RngSeed{3};
  return c;
}

inline PretrainConfig benchmark_pretrain_config() {
  PretrainConfig c;
  c.seed = RngSeed{1};
  return c;
}

struct BenchmarkResult {
  double source_domain_miou = 0.0;
  double source_only_miou = 0.0;  // source model on target
  double adapted_miou = 0.0;      // final teacher on target
  double adapted_oa = 0.0;
  AdaptationReport report;
};

/// A generated scenario with its pretrained source model, reusable across
/// several adaptation runs.
struct PreparedScenario {
  Scenario scenario;
  AdapterModel source;
};

inline PreparedScenario prepare_scenario(const ScenarioConfig& cfg,
                                         const PretrainConfig& pretrain = benchmark_pretrain_config()) {
  Scenario s = generate(cfg);
  AdapterModel m = source_pretrain(s.source_features, s.source_labels, pretrain);
  return PreparedScenario{std::move(s), std::move(m)};
}

inline BenchmarkResult run_benchmark(const PreparedScenario& p, const TrainConfig& train) {
  BenchmarkResult r{0.0, 0.0, 0.0, 0.0, adapt(p.source, p.scenario.target_features, train, p.scenario.target_labels)};
  r.source_domain_miou = evaluate(p.scenario.source_labels, p.source.predict(p.scenario.source_features)).miou;
  r.source_only_miou = *r.report.source_miou;
  r.adapted_miou = *r.report.final_miou;
  r.adapted_oa = *r.report.final_oa;
  return r;
}

inline BenchmarkResult run_benchmark(const ScenarioConfig& scenario, const TrainConfig& train = benchmark_train_config(),
                                     const PretrainConfig& pretrain = benchmark_pretrain_config()) {
  return run_benchmark(prepare_scenario(scenario, pretrain), train);
}

using Variant = std::pair<std::string, TrainConfig>;

/// Assignment-mode ablation: greedy, transport, dual consensus.
inline std::vector<Variant> ablation_variants(const TrainConfig& base) {
  std::vector<Variant> out;
  for (auto m : {AssignmentMode::Greedy, AssignmentMode::Transport, AssignmentMode::DualConsensus}) {
    TrainConfig c = base;
    c.mode = m;
    out.emplace_back(std::string(to_string(m)), c);
  }
  return out;
}

inline std::vector<Variant> view_variants(const TrainConfig& base, std::span<const std::size_t> views) {
  std::vector<Variant> out;
  for (auto v : views) {
    TrainConfig c = base;
    c.ensemble.views = v;
    out.emplace_back("V=" + std::to_string(v), c);
  }
  return out;
}

inline std::vector<Variant> rho_variants(const TrainConfig& base, std::span<const double> rhos) {
  std::vector<Variant> out;
  for (auto r : rhos) {
    TrainConfig c = base;
    c.anchor.rho = r;
    std::string name = std::to_string(r);
    name.erase(name.find_last_not_of('0') + 1);
    if (name.back() == '.') name += '0';
    out.emplace_back("rho=" + name, c);
  }
  return out;
}

inline constexpr std::size_t kSweepViews[] = {1, 2, 4, 6};
inline constexpr double kSweepRhos[] = {0.5, 0.7, 0.8, 1.0};

}  // namespace logo
