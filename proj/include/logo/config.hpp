#pragma once

// JSON run configuration and JSON reports.
//
// A run configuration is one object with optional sections
//   "train", "ensemble", "anchor", "sinkhorn", "pretrain", "scenario".
// Missing fields keep their defaults; unknown sections or fields are errors.

#include "json.hpp"

#include <set>
#include <string>

#include "logo/metrics.hpp"
#include "logo/pipeline.hpp"
#include "logo/synth.hpp"
#include "logo/trainer.hpp"

namespace logo {

using json = nlohmann::ordered_json;

struct RunConfig {
  TrainConfig train;
  PretrainConfig pretrain;
  ScenarioConfig scenario;
};

namespace detail {

inline void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw Error(ErrorCode::InvalidConfig, where + " must be a JSON object");
  for (const auto& [key, _] : obj.items())
    if (!allowed.contains(key)) throw Error(ErrorCode::InvalidConfig, "unknown field '" + key + "' in " + where);
}

template <typename T>
void read_field(const json& obj, const char* key, T& out, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, where + "." + key + ": " + e.what());
  }
}

inline void read_seed(const json& obj, const char* key, RngSeed& out, const std::string& where) {
  std::uint64_t v = out.value;
  read_field(obj, key, v, where);
  out.value = v;
}

}  // namespace detail

inline json to_json(const EnsembleConfig& c) {
  return {{"views", c.views}, {"augmentation_noise_sigma", c.augmentation_noise_sigma}, {"seed", c.seed.value}};
}
inline json to_json(const AnchorConfig& c) { return {{"rho", c.rho}, {"min_anchors", c.min_anchors}}; }
inline json to_json(const SinkhornConfig& c) {
  return {{"lambda", c.lambda}, {"max_iters", c.max_iters}, {"tol", c.tol}};
}
inline json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"steps_per_epoch", c.steps_per_epoch},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"ema_momentum", c.ema_momentum},
          {"mode", std::string(to_string(c.mode))},
          {"seed", c.seed.value}};
}
inline json to_json(const PretrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"weight_decay", c.weight_decay},
          {"seed", c.seed.value}};
}
inline json to_json(const ScenarioConfig& c) {
  return {{"k", c.k},
          {"d", c.d},
          {"n_source", c.n_source},
          {"n_target", c.n_target},
          {"tail_decay", c.tail_decay},
          {"cluster_sigma", c.cluster_sigma},
          {"shift_rotation_angle", c.shift_rotation_angle},
          {"shift_translation", c.shift_translation},
          {"prior_shift", to_string(c.prior_shift)},
          {"seed", c.seed.value}};
}

inline json to_json(const RunConfig& c) {
  return {{"train", to_json(c.train)},
          {"ensemble", to_json(c.train.ensemble)},
          {"anchor", to_json(c.train.anchor)},
          {"sinkhorn", to_json(c.train.sinkhorn)},
          {"pretrain", to_json(c.pretrain)},
          {"scenario", to_json(c.scenario)}};
}

inline RunConfig run_config_from_json(const json& j) {
  using detail::read_field;
  using detail::read_seed;
  detail::reject_unknown(j, {"train", "ensemble", "anchor", "sinkhorn", "pretrain", "scenario"}, "run config");
  RunConfig c;
  if (j.contains("train")) {
    const auto& t = j.at("train");
    detail::reject_unknown(t, {"epochs", "steps_per_epoch", "batch_size", "learning_rate", "ema_momentum", "mode", "seed"},
                           "train");
    read_field(t, "epochs", c.train.epochs, "train");
    read_field(t, "steps_per_epoch", c.train.steps_per_epoch, "train");
    read_field(t, "batch_size", c.train.batch_size, "train");
    read_field(t, "learning_rate", c.train.learning_rate, "train");
    read_field(t, "ema_momentum", c.train.ema_momentum, "train");
    std::string mode(to_string(c.train.mode));
    read_field(t, "mode", mode, "train");
    c.train.mode = parse_assignment_mode(mode);
    read_seed(t, "seed", c.train.seed, "train");
  }
  if (j.contains("ensemble")) {
    const auto& e = j.at("ensemble");
    detail::reject_unknown(e, {"views", "augmentation_noise_sigma", "seed"}, "ensemble");
    read_field(e, "views", c.train.ensemble.views, "ensemble");
    read_field(e, "augmentation_noise_sigma", c.train.ensemble.augmentation_noise_sigma, "ensemble");
    read_seed(e, "seed", c.train.ensemble.seed, "ensemble");
  }
  if (j.contains("anchor")) {
    const auto& a = j.at("anchor");
    detail::reject_unknown(a, {"rho", "min_anchors"}, "anchor");
    read_field(a, "rho", c.train.anchor.rho, "anchor");
    read_field(a, "min_anchors", c.train.anchor.min_anchors, "anchor");
  }
  if (j.contains("sinkhorn")) {
    const auto& s = j.at("sinkhorn");
    detail::reject_unknown(s, {"lambda", "max_iters", "tol"}, "sinkhorn");
    read_field(s, "lambda", c.train.sinkhorn.lambda, "sinkhorn");
    read_field(s, "max_iters", c.train.sinkhorn.max_iters, "sinkhorn");
    read_field(s, "tol", c.train.sinkhorn.tol, "sinkhorn");
  }
  if (j.contains("pretrain")) {
    const auto& p = j.at("pretrain");
    detail::reject_unknown(p, {"epochs", "batch_size", "learning_rate", "weight_decay", "seed"}, "pretrain");
    read_field(p, "epochs", c.pretrain.epochs, "pretrain");
    read_field(p, "batch_size", c.pretrain.batch_size, "pretrain");
    read_field(p, "learning_rate", c.pretrain.learning_rate, "pretrain");
    read_field(p, "weight_decay", c.pretrain.weight_decay, "pretrain");
    read_seed(p, "seed", c.pretrain.seed, "pretrain");
  }
  if (j.contains("scenario")) {
    const auto& s = j.at("scenario");
    detail::reject_unknown(s, {"k", "d", "n_source", "n_target", "tail_decay", "cluster_sigma", "shift_rotation_angle",
                               "shift_translation", "prior_shift", "seed"},
                           "scenario");
    read_field(s, "k", c.scenario.k, "scenario");
    read_field(s, "d", c.scenario.d, "scenario");
    read_field(s, "n_source", c.scenario.n_source, "scenario");
    read_field(s, "n_target", c.scenario.n_target, "scenario");
    read_field(s, "tail_decay", c.scenario.tail_decay, "scenario");
    read_field(s, "cluster_sigma", c.scenario.cluster_sigma, "scenario");
    read_field(s, "shift_rotation_angle", c.scenario.shift_rotation_angle, "scenario");
    read_field(s, "shift_translation", c.scenario.shift_translation, "scenario");
    std::string shift = to_string(c.scenario.prior_shift);
    read_field(s, "prior_shift", shift, "scenario");
    c.scenario.prior_shift = parse_prior_shift(shift);
    read_seed(s, "seed", c.scenario.seed, "scenario");
  }
  return c;
}

inline RunConfig parse_run_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("malformed JSON: ") + e.what());
  }
  return run_config_from_json(j);
}

inline std::string serialize_run_config(const RunConfig& c) { return to_json(c).dump(2); }

// ---------------------------------------------------------------------------
// Reports

inline json to_json(const Evaluation& e) {
  json iou = json::array();
  for (const auto& v : e.iou.iou) iou.push_back(v ? json(*v) : json(nullptr));
  return {{"per_class_iou", iou},
          {"miou", e.miou},
          {"oa", e.oa},
          {"coverage", e.coverage},
          {"n_total", e.cm.n_total},
          {"n_ignored", e.cm.n_ignored},
          {"confusion", e.cm.counts}};
}

inline json to_json(const PseudoLabelResult& r) {
  json out = {{"n", r.y_final.size()},
              {"k", r.y_final.k()},
              {"kept_count", r.consensus.kept_count},
              {"consensus_rate", r.consensus.consensus_rate},
              {"per_class_kept", r.consensus.per_class_kept},
              {"candidate_counts", r.candidate_counts},
              {"anchor_counts", r.anchor_counts},
              {"prior", r.prior}};
  json active = json::array();
  for (bool a : r.active) active.push_back(a);
  out["active"] = active;
  if (r.solve)
    out["sinkhorn"] = {{"converged", r.solve->converged},
                       {"iterations", r.solve->iterations},
                       {"marginal_error", r.solve->marginal_error}};
  return out;
}

inline json to_json(const AdaptationReport& r) {
  json epochs = json::array();
  for (const auto& e : r.epochs) {
    json je = {{"epoch", e.epoch},
               {"consensus_rate", e.consensus_rate},
               {"per_class_kept", e.per_class_kept},
               {"mean_loss", e.mean_loss},
               {"loss_steps", e.loss_steps},
               {"sinkhorn_converged", e.sinkhorn_converged}};
    if (e.pseudo_label_accuracy) je["pseudo_label_accuracy"] = *e.pseudo_label_accuracy;
    if (e.teacher_miou) je["teacher_miou"] = *e.teacher_miou;
    if (e.teacher_oa) je["teacher_oa"] = *e.teacher_oa;
    epochs.push_back(std::move(je));
  }
  json out = {{"epochs", epochs}};
  if (r.source_miou) out["source_miou"] = *r.source_miou;
  if (r.final_miou) out["final_miou"] = *r.final_miou;
  if (r.final_oa) out["final_oa"] = *r.final_oa;
  out["frozen_hash"] = r.final_teacher.frozen_hash();
  return out;
}

}  // namespace logo
