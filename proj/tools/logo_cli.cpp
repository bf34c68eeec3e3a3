// Command-line front end: synthetic data generation, source pretraining,
// adaptation, standalone pseudo-labeling and transport, evaluation, and the
// ablation / sensitivity experiment runner.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "logo/benchmark.hpp"
#include "logo/config.hpp"
#include "logo/io.hpp"
#include "logo/refine.hpp"

namespace fs = std::filesystem;
using logo::json;

namespace {

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw logo::Error(logo::ErrorCode::IoFailure, "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void emit_json(const json& j, const std::optional<std::string>& path) {
  const std::string text = j.dump(2) + "\n";
  if (!path) {
    std::cout << text;
    return;
  }
  std::ofstream out(*path, std::ios::binary | std::ios::trunc);
  if (!out) throw logo::Error(logo::ErrorCode::IoFailure, "cannot open '" + *path + "' for writing");
  out << text;
  spdlog::info("wrote {}", *path);
}

template <typename T, typename U>
void apply(const std::optional<T>& flag, U& field) {
  if (flag) field = *flag;
}

void apply_seed(const std::optional<std::uint64_t>& flag, logo::RngSeed& field) {
  if (flag) field = logo::RngSeed{*flag};
}

logo::RunConfig load_config(const std::optional<std::string>& path) {
  if (!path) return {};
  spdlog::debug("config {}", *path);
  return logo::parse_run_config(read_text(*path));
}

// ---------------------------------------------------------------------------
// Option groups shared by several subcommands

struct ScenarioFlags {
  std::string preset = "default";
  std::optional<std::size_t> k, d, n_source, n_target;
  std::optional<double> tail_decay, cluster_sigma, rotation, translation;
  std::optional<std::string> prior_shift;

  void add(CLI::App* app) {
    app->add_option("--scenario", preset, "Preset: default, mild-shift, severe-shift, long-tail-severe")
        ->capture_default_str();
    app->add_option("--k", k, "Number of classes");
    app->add_option("--d", d, "Feature dimension");
    app->add_option("--n-source", n_source, "Source sample count");
    app->add_option("--n-target", n_target, "Target sample count");
    app->add_option("--tail-decay", tail_decay, "Geometric class-frequency decay in (0,1]");
    app->add_option("--cluster-sigma", cluster_sigma, "Per-class isotropic standard deviation");
    app->add_option("--rotation", rotation, "Target rotation angle (radians)");
    app->add_option("--translation", translation, "Target translation magnitude");
    app->add_option("--prior-shift", prior_shift, "none, reverse or decay:<factor>");
  }

  void apply_to(logo::ScenarioConfig& c) const {
    apply(k, c.k);
    apply(d, c.d);
    apply(n_source, c.n_source);
    apply(n_target, c.n_target);
    apply(tail_decay, c.tail_decay);
    apply(cluster_sigma, c.cluster_sigma);
    apply(rotation, c.shift_rotation_angle);
    apply(translation, c.shift_translation);
    if (prior_shift) c.prior_shift = logo::parse_prior_shift(*prior_shift);
  }
};

struct AnchorSinkhornFlags {
  std::optional<double> rho, lambda, tol;
  std::optional<std::size_t> min_anchors, max_iters;
  std::optional<std::string> mode;

  void add(CLI::App* app, bool with_anchor = true) {
    if (with_anchor) {
      app->add_option("--rho", rho, "Anchor ratio in (0,1]");
      app->add_option("--min-anchors", min_anchors, "Anchor floor per non-empty class");
      app->add_option("--mode", mode, "Assignment: greedy, transport, consensus");
    }
    app->add_option("--lambda", lambda, "Entropic regularization");
    app->add_option("--tol", tol, "Marginal L1 tolerance");
    app->add_option("--max-iters", max_iters, "Sinkhorn iteration cap");
  }

  void apply_to(logo::AnchorConfig& a, logo::SinkhornConfig& s, logo::AssignmentMode& m) const {
    apply(rho, a.rho);
    apply(min_anchors, a.min_anchors);
    apply(lambda, s.lambda);
    apply(tol, s.tol);
    apply(max_iters, s.max_iters);
    if (mode) m = logo::parse_assignment_mode(*mode);
  }
};

struct TrainFlags {
  std::optional<std::string> preset;
  std::optional<std::size_t> epochs, steps, batch, views;
  std::optional<double> lr, ema, aug_sigma;
  std::optional<std::uint64_t> ensemble_seed;
  AnchorSinkhornFlags pl;

  void add(CLI::App* app) {
    app->add_option("--preset", preset, "Start from a named preset: default or benchmark");
    app->add_option("--epochs", epochs, "Pseudo-label regeneration rounds");
    app->add_option("--steps-per-epoch", steps, "Student steps per round");
    app->add_option("--batch-size", batch, "Minibatch size");
    app->add_option("--lr", lr, "Learning rate");
    app->add_option("--ema", ema, "Teacher EMA momentum in [0,1)");
    app->add_option("--views", views, "Ensemble views V");
    app->add_option("--aug-sigma", aug_sigma, "Gaussian feature-augmentation sigma");
    app->add_option("--ensemble-seed", ensemble_seed, "Ensemble seed (defaults to --seed)");
    pl.add(app);
  }

  // Precedence: preset, then --config, then flags.
  logo::TrainConfig resolve(const logo::RunConfig& file, bool have_file, const std::optional<std::uint64_t>& seed) const {
    logo::TrainConfig c;
    if (have_file) {
      c = file.train;
    } else if (preset) {
      if (*preset == "benchmark") c = logo::benchmark_train_config();
      else if (*preset != "default") throw logo::Error(logo::ErrorCode::InvalidConfig, "unknown preset '" + *preset + "'");
    }
    apply(epochs, c.epochs);
    apply(steps, c.steps_per_epoch);
    apply(batch, c.batch_size);
    apply(lr, c.learning_rate);
    apply(ema, c.ema_momentum);
    apply(views, c.ensemble.views);
    apply(aug_sigma, c.ensemble.augmentation_noise_sigma);
    if (seed) {
      c.seed = logo::RngSeed{*seed};
      c.ensemble.seed = logo::RngSeed{*seed};
    }
    apply_seed(ensemble_seed, c.ensemble.seed);
    pl.apply_to(c.anchor, c.sinkhorn, c.mode);
    c.validate();
    return c;
  }
};

// ---------------------------------------------------------------------------
// Subcommands

struct GenerateCmd {
  ScenarioFlags scenario;
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
  std::string out;

  void add(CLI::App& root) {
    auto* app = root.add_subcommand("generate", "Write a synthetic source/target scenario");
    scenario.add(app);
    app->add_option("--config", config, "Run configuration JSON (scenario section)");
    app->add_option("--seed", seed, "Scenario seed");
    app->add_option("--out", out, "Output directory")->required();
    app->callback([this] { run(); });
  }

  void run() const {
    logo::ScenarioConfig c = config ? load_config(config).scenario : logo::scenario_by_name(scenario.preset);
    scenario.apply_to(c);
    apply_seed(seed, c.seed);
    const logo::Scenario s = logo::generate(c);
    const fs::path dir(out);
    fs::create_directories(dir);
    logo::io::write_matrix(dir / "source_features.lgf", s.source_features.matrix());
    logo::io::write_labels(dir / "source_labels.lgl", s.source_labels);
    logo::io::write_matrix(dir / "target_features.lgf", s.target_features.matrix());
    logo::io::write_labels(dir / "target_labels.lgl", s.target_labels);
    std::vector<std::size_t> src_hist(c.k, 0), tgt_hist(c.k, 0);
    for (const auto l : s.source_labels) ++src_hist[l.index()];
    for (const auto l : s.target_labels) ++tgt_hist[l.index()];
    json meta = {{"scenario", logo::to_json(c)},
                 {"source_prior", s.source_prior},
                 {"target_prior", s.target_prior},
                 {"source_histogram", src_hist},
                 {"target_histogram", tgt_hist},
                 {"files",
                  {{"source_features", "source_features.lgf"},
                   {"source_labels", "source_labels.lgl"},
                   {"target_features", "target_features.lgf"},
                   {"target_labels", "target_labels.lgl"}}}};
    emit_json(meta, (dir / "metadata.json").string());
  }
};

struct PretrainCmd {
  std::string features, labels, out;
  std::optional<std::string> config, report;
  std::optional<std::size_t> epochs, batch;
  std::optional<double> lr, weight_decay;
  std::optional<std::uint64_t> seed;

  void add(CLI::App& root) {
    auto* app = root.add_subcommand("pretrain", "Fit the frozen classifier on labeled source data");
    app->add_option("--features", features, "Source features (.lgf)")->required();
    app->add_option("--labels", labels, "Source labels (.lgl)")->required();
    app->add_option("--out", out, "Output model (.lgf)")->required();
    app->add_option("--report", report, "JSON report path (stdout if omitted)");
    app->add_option("--config", config, "Run configuration JSON (pretrain section)");
    app->add_option("--epochs", epochs, "Passes over the source set");
    app->add_option("--batch-size", batch, "Minibatch size");
    app->add_option("--lr", lr, "Learning rate");
    app->add_option("--weight-decay", weight_decay, "L2 penalty on W");
    app->add_option("--seed", seed, "Shuffle seed");
    app->callback([this] { run(); });
  }

  void run() const {
    logo::PretrainConfig c = config ? load_config(config).pretrain : logo::PretrainConfig{};
    apply(epochs, c.epochs);
    apply(batch, c.batch_size);
    apply(lr, c.learning_rate);
    apply(weight_decay, c.weight_decay);
    apply_seed(seed, c.seed);
    const auto x = logo::io::read_features(features);
    const auto y = logo::io::read_labels(labels);
    spdlog::info("pretrain n={} d={} k={}", x.n(), x.d(), y.k());
    const logo::AdapterModel model = logo::source_pretrain(x, y, c);
    logo::io::write_model(out, model);
    emit_json({{"config", logo::to_json(c)},
               {"source", logo::to_json(logo::evaluate(y, model.predict(x)))},
               {"frozen_hash", model.frozen_hash()}},
              report);
  }
};

struct AdaptCmd {
  std::string model, features, out_model;
  std::optional<std::string> truth, config, report;
  std::optional<std::uint64_t> seed;
  TrainFlags train;

  void add(CLI::App& root) {
    auto* app = root.add_subcommand("adapt", "Mean-teacher adaptation on unlabeled target features");
    app->add_option("--model", model, "Source model (.lgf)")->required();
    app->add_option("--features", features, "Target features (.lgf)")->required();
    app->add_option("--out-model", out_model, "Adapted teacher (.lgf)")->required();
    app->add_option("--truth", truth, "Optional target labels for per-epoch scoring (.lgl)");
    app->add_option("--report", report, "JSON report path (stdout if omitted)");
    app->add_option("--config", config, "Run configuration JSON");
    app->add_option("--seed", seed, "Seed for sampling and ensemble augmentation");
    train.add(app);
    app->callback([this] { run(); });
  }

  void run() const {
    const logo::TrainConfig c = train.resolve(load_config(config), config.has_value(), seed);
    const auto source = logo::io::read_model(model);
    const auto x = logo::io::read_features(features);
    std::optional<logo::LabelVector> y;
    if (truth) y = logo::io::read_labels(*truth);
    spdlog::info("adapt n={} epochs={} mode={}", x.n(), c.epochs, logo::to_string(c.mode));
    const logo::AdaptationReport r = [&] {
      try {
        return logo::adapt(source, x, c, y);
      } catch (const logo::AdaptationAborted& e) {
        json j = logo::to_json(e.report());
        j["aborted"] = e.what();
        emit_json(j, report);
        throw;
      }
    }();
    for (const auto& e : r.epochs)
      spdlog::debug("epoch {} consensus={:.4f} loss={:.5f}", e.epoch, e.consensus_rate, e.mean_loss);
    logo::io::write_model(out_model, r.final_teacher);
    json j = {{"config", logo::to_json(logo::RunConfig{c, {}, {}})}};
    j["config"].erase("pretrain");
    j["config"].erase("scenario");
    j.update(logo::to_json(r));
    emit_json(j, report);
  }
};

struct PseudolabelCmd {
  std::vector<std::string> features, probs;
  std::optional<std::string> model, truth, report;
  std::string out;
  std::optional<std::size_t> views;
  std::optional<double> aug_sigma;
  std::optional<std::uint64_t> seed;
  AnchorSinkhornFlags pl;

  void add(CLI::App& root) {
    auto* app = root.add_subcommand("pseudolabel", "Ensemble, prototypes, transport and consensus in one pass");
    app->add_option("--features", features, "Feature view(s) (.lgf); repeat for several views")->required();
    app->add_option("--probs", probs, "Probability view(s) (.lgf); repeat for several views");
    app->add_option("--model", model, "Run the ensemble from this model instead of --probs");
    app->add_option("--views", views, "Ensemble views with --model");
    app->add_option("--aug-sigma", aug_sigma, "Augmentation sigma with --model");
    app->add_option("--seed", seed, "Ensemble seed with --model");
    app->add_option("--truth", truth, "Optional labels to score raw and kept pseudo-labels (.lgl)");
    app->add_option("--out", out, "Final labels (.lgl)")->required();
    app->add_option("--report", report, "JSON statistics path (stdout if omitted)");
    pl.add(app);
    app->callback([this] { run(); });
  }

  void run() const {
    logo::PseudoLabelConfig c;
    pl.apply_to(c.anchor, c.sinkhorn, c.mode);
    std::optional<logo::EnsembleOutput> ens;
    if (model) {
      if (!probs.empty() || features.size() != 1)
        throw logo::Error(logo::ErrorCode::InvalidArgument, "--model takes exactly one --features and no --probs");
      logo::EnsembleConfig e;
      apply(views, e.views);
      apply(aug_sigma, e.augmentation_noise_sigma);
      apply_seed(seed, e.seed);
      ens = logo::run_ensemble(logo::io::read_model(*model), logo::io::read_features(features.front()), e);
    } else {
      if (probs.empty()) throw logo::Error(logo::ErrorCode::EmptyViewList, "need --probs or --model");
      std::vector<logo::Matrix> f, p;
      for (const auto& path : features) f.push_back(logo::io::read_matrix(path));
      for (const auto& path : probs) p.push_back(logo::io::read_matrix(path));
      ens = logo::ensemble_from_views(f, p);
    }
    const logo::PseudoLabelResult r = logo::generate_pseudolabels(*ens, c);
    logo::io::write_labels(out, r.y_final);
    json j = logo::to_json(r);
    j["mode"] = std::string(logo::to_string(c.mode));
    if (truth) {
      const auto y = logo::io::read_labels(*truth);
      if (y.size() != r.y_final.size())
        throw logo::Error(logo::ErrorCode::LengthMismatch, "--truth length differs from the sample count");
      std::size_t raw_ok = 0, kept_ok = 0;
      for (std::size_t i = 0; i < y.size(); ++i) {
        raw_ok += r.y_raw[i] == y[i];
        kept_ok += !r.y_final[i].is_ignore() && r.y_final[i] == y[i];
      }
      j["raw_accuracy"] = static_cast<double>(raw_ok) / static_cast<double>(y.size());
      if (r.consensus.kept_count)
        j["kept_accuracy"] = static_cast<double>(kept_ok) / static_cast<double>(r.consensus.kept_count);
    }
    emit_json(j, report);
  }
};

struct SinkhornCmd {
  std::string cost, prior, plan_out;
  std::optional<std::string> labels_out, report;
  AnchorSinkhornFlags pl;

  void add(CLI::App& root) {
    auto* app = root.add_subcommand("sinkhorn", "Entropic transport on a cost matrix and class prior");
    app->add_option("--cost", cost, "N x K cost matrix (.lgf)")->required();
    app->add_option("--prior", prior, "Class prior, 1 x K or K x 1 (.lgf)")->required();
    app->add_option("--plan", plan_out, "Output plan, N x K (.lgf)")->required();
    app->add_option("--labels", labels_out, "Output row-argmax labels (.lgl)");
    app->add_option("--report", report, "JSON convergence report (stdout if omitted)");
    pl.add(app, false);
    app->callback([this] { run(); });
  }

  void run() const {
    logo::SinkhornConfig c;
    logo::AnchorConfig unused_anchor;
    logo::AssignmentMode unused_mode{};
    pl.apply_to(unused_anchor, c, unused_mode);
    const logo::Matrix m = logo::io::read_matrix(cost);
    const logo::Matrix w = logo::io::read_matrix(prior);
    if (w.rows() != 1 && w.cols() != 1)
      throw logo::Error(logo::ErrorCode::ShapeMismatch, "prior file must be a single row or column");
    const logo::TransportPlan plan = logo::sinkhorn_solve_bound(
        logo::ArrayView<double>(m.values(), m.rows(), m.cols()), logo::ArrayView<double>(w.values(), 1, w.values().size()), c);
    logo::io::write_matrix(plan_out, logo::full_plan(plan));
    if (labels_out) logo::io::write_labels(*labels_out, logo::assign_labels(plan));
    emit_json({{"n", plan.n()},
               {"k", plan.k_total},
               {"active_classes", plan.active_classes},
               {"converged", plan.converged},
               {"iterations", plan.iterations_used},
               {"marginal_error", plan.marginal_error},
               {"transport_cost", logo::transport_cost(plan, logo::CostMatrix::dense(m))},
               {"sinkhorn", logo::to_json(c)}},
              report);
  }
};

struct EvaluateCmd {
  std::string truth, pred;
  std::optional<std::string> report;
  bool count_ignored = false;

  void add(CLI::App& root) {
    auto* app = root.add_subcommand("evaluate", "Per-class IoU, mIoU and OA of predicted labels");
    app->add_option("--truth", truth, "Ground-truth labels (.lgl)")->required();
    app->add_option("--pred", pred, "Predicted labels (.lgl), may contain IGNORE")->required();
    app->add_flag("--count-ignored", count_ignored, "Score IGNORE predictions as misses");
    app->add_option("--report", report, "JSON report path (stdout if omitted)");
    app->callback([this] { run(); });
  }

  void run() const {
    const auto y = logo::io::read_labels(truth);
    const auto p = logo::io::read_labels(pred);
    emit_json(logo::to_json(logo::evaluate(y, p, count_ignored)), report);
  }
};

struct ModelEvalCmd {
  std::string model, features, truth;
  std::optional<std::string> pred_out, report;

  void add(CLI::App& root) {
    auto* app = root.add_subcommand("predict", "Label features with a model and optionally score them");
    app->add_option("--model", model, "Model (.lgf)")->required();
    app->add_option("--features", features, "Features (.lgf)")->required();
    app->add_option("--out", pred_out, "Predicted labels (.lgl)");
    app->add_option("--truth", truth, "Ground-truth labels to score against (.lgl)");
    app->add_option("--report", report, "JSON report path (stdout if omitted)");
    app->callback([this] { run(); });
  }

  void run() const {
    const auto m = logo::io::read_model(model);
    const auto y_hat = m.predict(logo::io::read_features(features));
    if (pred_out) logo::io::write_labels(*pred_out, y_hat);
    json j = {{"n", y_hat.size()}, {"k", y_hat.k()}};
    if (!truth.empty()) j["evaluation"] = logo::to_json(logo::evaluate(logo::io::read_labels(truth), y_hat));
    emit_json(j, report);
  }
};

struct ExperimentCmd {
  std::string kind = "gain";
  std::optional<std::string> scenario, report;

  void add(CLI::App& root) {
    auto* app = root.add_subcommand("experiment", "Benchmark sweeps on the synthetic scenarios");
    app->add_option("--kind", kind, "gain, ablation, views or rho")
        ->check(CLI::IsMember({"gain", "ablation", "views", "rho"}))
        ->capture_default_str();
    app->add_option("--scenario", scenario, "Scenario preset (default depends on --kind)");
    app->add_option("--report", report, "JSON report path (stdout if omitted)");
    app->callback([this] { run(); });
  }

  static json sweep(const std::string& name, const std::vector<logo::Variant>& variants) {
    const auto prepared = logo::prepare_scenario(logo::scenario_by_name(name));
    json rows = json::array();
    std::optional<double> source_only;
    for (const auto& [label, cfg] : variants) {
      const auto r = logo::run_benchmark(prepared, cfg);
      source_only = r.source_only_miou;
      spdlog::info("{} {}: miou={:.4f}", name, label, r.adapted_miou);
      rows.push_back({{"variant", label}, {"miou", r.adapted_miou}, {"oa", r.adapted_oa}});
    }
    return {{"scenario", name}, {"source_only_miou", *source_only}, {"results", rows}};
  }

  void run() const {
    const logo::TrainConfig base = logo::benchmark_train_config();
    json out;
    if (kind == "gain") {
      out = json::array();
      for (const auto& s : logo::default_scenarios()) {
        if (scenario && *scenario != s.name) continue;
        const auto r = logo::run_benchmark(s.config, base);
        spdlog::info("{}: {:.4f} -> {:.4f}", s.name, r.source_only_miou, r.adapted_miou);
        out.push_back({{"scenario", s.name},
                       {"source_domain_miou", r.source_domain_miou},
                       {"source_only_miou", r.source_only_miou},
                       {"adapted_miou", r.adapted_miou},
                       {"adapted_oa", r.adapted_oa},
                       {"gain", r.adapted_miou - r.source_only_miou}});
      }
      if (out.empty()) throw logo::Error(logo::ErrorCode::InvalidConfig, "unknown scenario '" + *scenario + "'");
    } else if (kind == "ablation") {
      out = sweep(scenario.value_or("long-tail-severe"), logo::ablation_variants(base));
    } else if (kind == "views") {
      out = sweep(scenario.value_or("default"), logo::view_variants(base, logo::kSweepViews));
    } else {
      out = sweep(scenario.value_or("default"), logo::rho_variants(base, logo::kSweepRhos));
    }
    emit_json({{"kind", kind}, {"train", logo::to_json(base)}, {"results", out}}, report);
  }
};

void configure_logging() {
  auto logger = spdlog::stderr_color_mt("logo");
  logger->set_pattern("[%l] %v");
  spdlog::set_default_logger(logger);
  const char* env = std::getenv("LOGO_LOG");
  const std::string level = env ? env : "off";
  if (level == "off" || level.empty()) spdlog::set_level(spdlog::level::off);
  else if (level == "info") spdlog::set_level(spdlog::level::info);
  else if (level == "debug") spdlog::set_level(spdlog::level::debug);
  else throw logo::Error(logo::ErrorCode::InvalidConfig, "LOGO_LOG must be off, info or debug, got '" + level + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pseudo-label refinement and mean-teacher self-training", "logo"};
  app.set_version_flag("--version", LOGO_VERSION);
  app.require_subcommand(1);

  GenerateCmd generate;
  PretrainCmd pretrain;
  AdaptCmd adapt;
  PseudolabelCmd pseudolabel;
  SinkhornCmd sinkhorn;
  EvaluateCmd evaluate;
  ModelEvalCmd predict;
  ExperimentCmd experiment;
  generate.add(app);
  pretrain.add(app);
  adapt.add(app);
  pseudolabel.add(app);
  sinkhorn.add(app);
  evaluate.add(app);
  predict.add(app);
  experiment.add(app);

  try {
    configure_logging();
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "logo: " << e.what() << "\n";
    const auto* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    std::cerr << sub->help();
    return 2;
  } catch (const logo::Error& e) {
    std::cerr << "logo: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "logo: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
