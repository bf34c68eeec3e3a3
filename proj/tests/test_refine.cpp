#include <gtest/gtest.h>

#include <cmath>

#include "logo/benchmark.hpp"
#include "logo/refine.hpp"
#include "lp_instances.hpp"
#include "test_support.hpp"

using namespace logo;

namespace {

std::vector<float> narrow(const Matrix& m) { return {m.values().begin(), m.values().end()}; }

Matrix widen_float(const Matrix& m) {
  Matrix out = m;
  for (double& x : out.values()) x = static_cast<double>(static_cast<float>(x));
  return out;
}

struct Fixture {
  Matrix features;
  std::vector<Matrix> views;
};

Fixture random_fixture(std::uint64_t seed, std::size_t n, std::size_t k, std::size_t d, std::size_t v) {
  Rng rng(RngSeed{seed});
  Fixture f{testing_support::random_matrix(rng, n, d), {}};
  for (std::size_t j = 0; j < v; ++j) f.views.push_back(testing_support::random_simplex_rows(rng, n, k));
  return f;
}

}  // namespace

TEST(ArrayView, WidensFloatAndDouble) {
  const std::vector<float> f{1.5f, -0.25f, 3.0f, 0.1f};
  const std::vector<double> d{1.5, -0.25, 3.0, 0.1};
  const Matrix wf = widen(ArrayView<float>(f, 2, 2));
  const Matrix wd = widen(ArrayView<double>(d, 2, 2));
  EXPECT_EQ(wf(0, 1), -0.25);
  EXPECT_EQ(wf(1, 1), static_cast<double>(0.1f));
  EXPECT_EQ(wd(1, 1), 0.1);
  EXPECT_LOGO_ERROR(ArrayView<double>(d, 3, 2), ErrorCode::ShapeMismatch);
  EXPECT_LOGO_ERROR(widen(ArrayView<double>(nullptr, 1, 1)), ErrorCode::InvalidArgument);
}

TEST(Refine, MatchesPipelineOnDoubleBuffers) {
  const Fixture fx = random_fixture(11, 200, 4, 6, 3);
  std::vector<ArrayView<double>> views;
  for (const auto& v : fx.views) views.emplace_back(v.values(), v.rows(), v.cols());
  const auto got = refine_pseudolabels(ArrayView<double>(fx.features.values(), 200, 6),
                                       std::span<const ArrayView<double>>(views));

  std::vector<ProbMatrix> probs(fx.views.begin(), fx.views.end());
  const std::vector<FeatureMatrix> feats{FeatureMatrix(fx.features)};
  const auto want = generate_pseudolabels(aggregate_views(probs, feats), PseudoLabelConfig{});
  EXPECT_EQ(got.y_final, want.y_final);
  EXPECT_EQ(got.y_raw, want.y_raw);
  EXPECT_EQ(got.prior, want.prior);
}

TEST(Refine, FloatBuffersEqualWidenedDoubles) {
  const Fixture fx = random_fixture(13, 150, 3, 5, 2);
  const auto ff = narrow(fx.features);
  std::vector<std::vector<float>> vf;
  std::vector<ArrayView<float>> views;
  for (const auto& v : fx.views) vf.push_back(narrow(v));
  for (const auto& v : vf) views.emplace_back(v, 150, 3);
  const auto got = refine_pseudolabels(ArrayView<float>(ff, 150, 5), std::span<const ArrayView<float>>(views));

  std::vector<ProbMatrix> probs;
  for (const auto& v : fx.views) probs.emplace_back(widen_float(v));
  const std::vector<FeatureMatrix> feats{FeatureMatrix(widen_float(fx.features))};
  EXPECT_EQ(got.y_final, generate_pseudolabels(aggregate_views(probs, feats), PseudoLabelConfig{}).y_final);
}

TEST(Refine, CallerBuffersAreNotModified) {
  const Fixture fx = random_fixture(17, 80, 3, 4, 2);
  std::vector<double> feat(fx.features.values().begin(), fx.features.values().end());
  std::vector<std::vector<double>> raw;
  for (const auto& v : fx.views) raw.emplace_back(v.values().begin(), v.values().end());
  const auto feat_copy = feat;
  const auto raw_copy = raw;
  std::vector<ArrayView<double>> views;
  for (const auto& v : raw) views.emplace_back(v, 80, 3);
  (void)refine_pseudolabels(ArrayView<double>(feat, 80, 4), std::span<const ArrayView<double>>(views));
  EXPECT_EQ(feat, feat_copy);
  EXPECT_EQ(raw, raw_copy);
}

TEST(Refine, SingleSampleSingleClass) {
  const std::vector<double> f{0.3, -0.7};
  const std::vector<double> p{1.0};
  const std::vector<ArrayView<double>> views{ArrayView<double>(p, 1, 1)};
  const auto r = refine_pseudolabels(ArrayView<double>(f, 1, 2), std::span<const ArrayView<double>>(views));
  EXPECT_EQ(to_signed_labels(r.y_final), (std::vector<std::int64_t>{0}));
}

TEST(Refine, Errors) {
  const std::vector<double> f{0.3, -0.7, 0.2, 0.9};
  const std::vector<double> p{0.5, 0.5};
  EXPECT_LOGO_ERROR(refine_pseudolabels(ArrayView<double>(f, 2, 2), std::span<const ArrayView<double>>()),
                    ErrorCode::EmptyViewList);
  const std::vector<ArrayView<double>> short_view{ArrayView<double>(p, 1, 2)};
  EXPECT_LOGO_ERROR(refine_pseudolabels(ArrayView<double>(f, 2, 2), std::span<const ArrayView<double>>(short_view)),
                    ErrorCode::ShapeMismatch);
  const std::vector<double> bad{0.9, 0.9, 0.5, 0.5};
  const std::vector<ArrayView<double>> unnormalized{ArrayView<double>(bad, 2, 2)};
  EXPECT_LOGO_ERROR(refine_pseudolabels(ArrayView<double>(f, 2, 2), std::span<const ArrayView<double>>(unnormalized)),
                    ErrorCode::RowNotNormalized);
}

TEST(Refine, SignedLabels) {
  const LabelVector y({Label(2), Label::ignore(), Label(0)}, 3);
  EXPECT_EQ(to_signed_labels(y), (std::vector<std::int64_t>{2, -1, 0}));
}

TEST(Refine, ModesOnSevereShift) {
  const PreparedScenario p = prepare_scenario(scenario_by_name("severe-shift"));
  const TrainConfig cfg = benchmark_train_config();
  const EnsembleOutput ens = run_ensemble(p.source, p.scenario.target_features, cfg.ensemble);
  std::vector<Matrix> prob_views{ens.p_bar.matrix()};
  std::vector<ArrayView<double>> views{ArrayView<double>(prob_views[0].values(), ens.p_bar.n(), ens.p_bar.k())};
  const Matrix& f = ens.f_bar.matrix();
  auto run = [&](AssignmentMode mode) {
    return refine_pseudolabels(ArrayView<double>(f.values(), f.rows(), f.cols()),
                               std::span<const ArrayView<double>>(views), RefineConfig{cfg.anchor, cfg.sinkhorn, mode});
  };
  const auto greedy = run(AssignmentMode::Greedy);
  const auto transport = run(AssignmentMode::Transport);
  const auto consensus = run(AssignmentMode::DualConsensus);
  EXPECT_EQ(greedy.consensus.kept_count, f.rows());
  EXPECT_EQ(transport.consensus.kept_count, f.rows());
  EXPECT_FALSE(greedy.solve.has_value());
  ASSERT_TRUE(transport.solve.has_value());
  EXPECT_TRUE(transport.solve->converged);
  EXPECT_LE(consensus.consensus.kept_count, f.rows());
  EXPECT_EQ(*consensus.y_assigned, transport.y_final);
  for (std::size_t i = 0; i < f.rows(); ++i)
    if (!consensus.y_final[i].is_ignore()) {
      EXPECT_EQ(consensus.y_final[i], consensus.y_raw[i]);
      EXPECT_EQ(consensus.y_final[i], transport.y_final[i]);
    }
}

TEST(BoundSolve, ZeroCostIsIndependentCoupling) {
  const std::vector<double> cost(5 * 3, 0.0);
  const std::vector<double> prior{0.2, 0.5, 0.3};
  const auto plan = sinkhorn_solve_bound(ArrayView<double>(cost, 5, 3), ArrayView<double>(prior, 1, 3));
  const Matrix q = full_plan(plan);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(q(i, j), prior[j] / 5.0, 1e-8);
}

TEST(BoundSolve, MatchesLinearProgram) {
  const auto& inst = testing_support::lp_instances().front();
  const auto plan = sinkhorn_solve_bound(ArrayView<double>(inst.cost, inst.n, inst.k),
                                         ArrayView<double>(inst.prior, inst.k, 1), SinkhornConfig{1e-3, 200000, 1e-6});
  EXPECT_TRUE(plan.converged);
  const double got = transport_cost(plan, CostMatrix::dense(Matrix(inst.n, inst.k, inst.cost)));
  EXPECT_LE(std::abs(got - inst.optimum), 1e-3 * inst.optimum);
}

TEST(BoundSolve, ZeroPriorColumnIsZeroInFullPlan) {
  const std::vector<double> cost{0.1, 0.9, 0.4, 0.8, 0.2, 0.6};
  const std::vector<float> prior{0.6f, 0.0f, 0.4f};
  const auto plan = sinkhorn_solve_bound(ArrayView<double>(cost, 2, 3), ArrayView<float>(prior, 1, 3));
  EXPECT_EQ(plan.active_classes, (std::vector<std::size_t>{0, 2}));
  const Matrix q = full_plan(plan);
  EXPECT_EQ(q.cols(), 3u);
  EXPECT_EQ(q(0, 1), 0.0);
  EXPECT_EQ(q(1, 1), 0.0);
  EXPECT_NEAR(q(0, 0) + q(1, 0), 0.6, 1e-6);
}

TEST(BoundSolve, Errors) {
  const std::vector<double> cost(6, 0.5);
  const std::vector<double> prior{0.5, 0.5};
  EXPECT_LOGO_ERROR(sinkhorn_solve_bound(ArrayView<double>(cost, 2, 3), ArrayView<double>(prior, 1, 2)),
                    ErrorCode::ShapeMismatch);
  EXPECT_LOGO_ERROR(sinkhorn_solve_bound(ArrayView<double>(cost.data(), 0, 2), ArrayView<double>(prior, 1, 2)),
                    ErrorCode::EmptyMatrix);
  const std::vector<double> unnormalized{0.5, 0.6};
  EXPECT_LOGO_ERROR(sinkhorn_solve_bound(ArrayView<double>(cost, 3, 2), ArrayView<double>(unnormalized, 1, 2)),
                    ErrorCode::RowNotNormalized);
  const std::vector<double> negative{1.5, -0.5};
  EXPECT_LOGO_ERROR(sinkhorn_solve_bound(ArrayView<double>(cost, 3, 2), ArrayView<double>(negative, 1, 2)),
                    ErrorCode::EntryOutOfRange);
}
