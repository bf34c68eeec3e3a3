#pragma once

// Offline mean-teacher self-training on a frozen linear classifier with a
// trainable per-feature affine adapter. Every epoch the teacher regenerates
// pseudo-labels over the whole target set; the student then takes
// steps_per_epoch gradient steps on masked cross-entropy and the teacher
// follows by EMA after each step.

#include <numeric>
#include <optional>
#include <vector>

#include "logo/ensemble.hpp"
#include "logo/metrics.hpp"
#include "logo/model.hpp"
#include "logo/pipeline.hpp"

namespace logo {

struct TrainConfig {
  std::size_t epochs = 3;
  std::size_t steps_per_epoch = 50;
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  double ema_momentum = 0.999;
  EnsembleConfig ensemble;
  AnchorConfig anchor;
  SinkhornConfig sinkhorn;
  AssignmentMode mode = AssignmentMode::DualConsensus;
  RngSeed seed{};

  void validate() const {
    if (steps_per_epoch < 1) throw Error(ErrorCode::InvalidConfig, "steps_per_epoch must be >= 1");
    if (batch_size < 1) throw Error(ErrorCode::InvalidConfig, "batch_size must be >= 1");
    if (!(learning_rate > 0.0)) throw Error(ErrorCode::InvalidConfig, "learning_rate must be > 0");
    if (!(ema_momentum >= 0.0 && ema_momentum < 1.0))
      throw Error(ErrorCode::InvalidConfig, "ema_momentum must lie in [0, 1)");
    ensemble.validate();
    anchor.validate();
    sinkhorn.validate();
  }
};

// ---------------------------------------------------------------------------
// Loss

struct CrossEntropyResult {
  double loss = 0.0;
  std::vector<double> grad_gamma;
  std::vector<double> grad_beta;
  std::size_t valid = 0;
};

/// Mean negative log-likelihood over non-IGNORE samples and its gradient with
/// respect to (gamma, beta). A batch without valid samples yields zero loss
/// and zero gradient.
inline CrossEntropyResult cross_entropy_valid(const AdapterModel& model, const FeatureMatrix& batch,
                                              const LabelVector& labels) {
  model.require_dim(batch);
  if (labels.size() != batch.n()) throw Error(ErrorCode::LengthMismatch, "batch and label counts differ");
  const std::size_t d = model.d();
  const std::size_t k = model.k();
  CrossEntropyResult out;
  out.grad_gamma.assign(d, 0.0);
  out.grad_beta.assign(d, 0.0);
  for (const Label l : labels) out.valid += !l.is_ignore();
  if (out.valid == 0) return out;

  const double scale = 1.0 / static_cast<double>(out.valid);
  std::vector<double> h(d), z(k), dh(d);
  for (std::size_t i = 0; i < batch.n(); ++i) {
    if (labels[i].is_ignore()) continue;
    const std::size_t y = labels[i].index();
    if (y >= k) throw Error(ErrorCode::ValueExceedsK, "label exceeds model classes", i, static_cast<double>(y));
    const auto x = batch.row(i);
    model.adapt_row(x, h);
    model.logits_row(h, z);
    double mx = z[0];
    for (double v : z) mx = std::max(mx, v);
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - mx);
    const double log_norm = mx + std::log(sum);
    out.loss += (log_norm - z[y]) * scale;
    // dL/dz = softmax(z) - onehot(y)
    for (std::size_t c = 0; c < k; ++c) z[c] = (std::exp(z[c] - log_norm) - (c == y ? 1.0 : 0.0)) * scale;
    std::fill(dh.begin(), dh.end(), 0.0);
    for (std::size_t c = 0; c < k; ++c) {
      const auto w = model.weights().row(c);
      for (std::size_t j = 0; j < d; ++j) dh[j] += w[j] * z[c];
    }
    for (std::size_t j = 0; j < d; ++j) {
      out.grad_gamma[j] += dh[j] * x[j];
      out.grad_beta[j] += dh[j];
    }
  }
  return out;
}

/// theta_teacher <- alpha * theta_teacher + (1 - alpha) * theta_student for
/// (gamma, beta); the frozen classifier is copied from the teacher.
inline AdapterModel ema_update(const AdapterModel& teacher, const AdapterModel& student, double alpha) {
  if (teacher.d() != student.d() || teacher.k() != student.k())
    throw Error(ErrorCode::DimensionMismatch, "teacher and student shapes differ");
  if (!teacher.same_frozen(student)) throw Error(ErrorCode::FrozenMismatch, "teacher and student frozen parts differ");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error(ErrorCode::InvalidArgument, "EMA momentum outside [0, 1]");
  AdapterModel out = teacher;
  for (std::size_t j = 0; j < teacher.d(); ++j) {
    out.gamma()[j] = alpha * teacher.gamma()[j] + (1.0 - alpha) * student.gamma()[j];
    out.beta()[j] = alpha * teacher.beta()[j] + (1.0 - alpha) * student.beta()[j];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Adaptation loop

struct EpochReport {
  std::size_t epoch = 0;
  double consensus_rate = 0.0;
  std::vector<std::size_t> per_class_kept;
  double mean_loss = 0.0;
  std::size_t loss_steps = 0;  // steps with at least one valid sample
  bool sinkhorn_converged = true;
  std::optional<double> pseudo_label_accuracy;  // kept labels vs truth
  std::optional<double> teacher_miou;
  std::optional<double> teacher_oa;
};

struct AdaptationReport {
  std::vector<EpochReport> epochs;
  AdapterModel final_teacher;
  std::optional<double> source_miou;  // teacher before any update
  std::optional<double> final_miou;
  std::optional<double> final_oa;
};

/// Thrown when a regeneration pass keeps no sample; carries the report up to
/// the failing epoch.
class AdaptationAborted : public Error {
 public:
  AdaptationAborted(std::size_t epoch, AdaptationReport report)
      : Error(ErrorCode::AllSamplesIgnored, "epoch " + std::to_string(epoch) + " kept zero pseudo-labels", epoch),
        report_(std::move(report)) {}
  const AdaptationReport& report() const noexcept { return report_; }

 private:
  AdaptationReport report_;
};

inline FeatureMatrix gather_rows(const FeatureMatrix& x, std::span<const std::size_t> idx) {
  Matrix m(idx.size(), x.d());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const auto src = x.row(idx[r]);
    std::copy(src.begin(), src.end(), m.row(r).begin());
  }
  return FeatureMatrix(std::move(m));
}

inline LabelVector gather_labels(const LabelVector& y, std::span<const std::size_t> idx) {
  std::vector<Label> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(y[i]);
  return LabelVector(std::move(out), y.k());
}

/// Sequential pass over a reshuffled permutation of [0, n).
class BatchSampler {
 public:
  BatchSampler(std::size_t n, RngSeed seed) : rng_(seed), order_(n) {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    rng_.shuffle(order_);
  }

  std::vector<std::size_t> next(std::size_t batch) {
    std::vector<std::size_t> out;
    out.reserve(batch);
    while (out.size() < batch) {
      if (pos_ == order_.size()) {
        rng_.shuffle(order_);
        pos_ = 0;
      }
      out.push_back(order_[pos_++]);
      if (out.size() == order_.size()) break;
    }
    return out;
  }

 private:
  Rng rng_;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
};

inline AdaptationReport adapt(const AdapterModel& source_model, const FeatureMatrix& target,
                              const TrainConfig& cfg, const std::optional<LabelVector>& ground_truth = std::nullopt) {
  source_model.require_dim(target);
  if (cfg.epochs > 0) cfg.validate();
  if (ground_truth && ground_truth->size() != target.n())
    throw Error(ErrorCode::LengthMismatch, "ground truth length differs from target sample count");

  AdaptationReport report{{}, source_model, std::nullopt, std::nullopt, std::nullopt};
  auto score = [&](const AdapterModel& m) { return evaluate(*ground_truth, m.predict(target)); };
  if (ground_truth) {
    const Evaluation e = score(source_model);
    report.source_miou = e.miou;
    report.final_miou = e.miou;
    report.final_oa = e.oa;
  }
  if (cfg.epochs == 0) return report;

  AdapterModel teacher = source_model;
  AdapterModel student = source_model;
  const PseudoLabelConfig pl_cfg{cfg.anchor, cfg.sinkhorn, cfg.mode};

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    EnsembleConfig ens_cfg = cfg.ensemble;
    ens_cfg.seed = split(cfg.ensemble.seed, epoch);
    const EnsembleOutput ens = run_ensemble(teacher, target, ens_cfg);
    const PseudoLabelResult pl = generate_pseudolabels(ens, pl_cfg);

    EpochReport er;
    er.epoch = epoch;
    er.consensus_rate = pl.consensus.consensus_rate;
    er.per_class_kept = pl.consensus.per_class_kept;
    if (pl.solve) er.sinkhorn_converged = pl.solve->converged;
    if (ground_truth && pl.consensus.kept_count > 0) {
      std::size_t correct = 0;
      for (std::size_t i = 0; i < pl.y_final.size(); ++i)
        correct += !pl.y_final[i].is_ignore() && pl.y_final[i] == (*ground_truth)[i];
      er.pseudo_label_accuracy = static_cast<double>(correct) / static_cast<double>(pl.consensus.kept_count);
    }
    if (pl.consensus.kept_count == 0) {
      report.epochs.push_back(er);
      report.final_teacher = teacher;
      throw AdaptationAborted(epoch, std::move(report));
    }

    BatchSampler sampler(target.n(), split(cfg.seed, epoch));
    double loss_sum = 0.0;
    for (std::size_t step = 0; step < cfg.steps_per_epoch; ++step) {
      const auto idx = sampler.next(cfg.batch_size);
      const CrossEntropyResult ce = cross_entropy_valid(student, gather_rows(target, idx), gather_labels(pl.y_final, idx));
      if (ce.valid > 0) {
        loss_sum += ce.loss;
        ++er.loss_steps;
      }
      for (std::size_t j = 0; j < student.d(); ++j) {
        student.gamma()[j] -= cfg.learning_rate * ce.grad_gamma[j];
        student.beta()[j] -= cfg.learning_rate * ce.grad_beta[j];
      }
      teacher = ema_update(teacher, student, cfg.ema_momentum);
    }
    er.mean_loss = er.loss_steps ? loss_sum / static_cast<double>(er.loss_steps) : 0.0;
    if (ground_truth) {
      const Evaluation e = score(teacher);
      er.teacher_miou = e.miou;
      er.teacher_oa = e.oa;
      report.final_miou = e.miou;
      report.final_oa = e.oa;
    }
    report.epochs.push_back(std::move(er));
  }
  report.final_teacher = teacher;
  return report;
}

// ---------------------------------------------------------------------------
// Source pretraining

struct PretrainConfig {
  std::size_t epochs = 40;
  std::size_t batch_size = 64;
  double learning_rate = 0.5;
  double weight_decay = 1e-4;
  RngSeed seed{};

  void validate() const {
    if (epochs < 1 || batch_size < 1 || !(learning_rate > 0.0) || !(weight_decay >= 0.0))
      throw Error(ErrorCode::InvalidConfig, "invalid pretraining configuration");
  }
};

/// Supervised softmax regression of (W, b) on labeled source data, gamma = 1
/// and beta = 0. Zero-initialized; minibatch order from the seed.
inline AdapterModel source_pretrain(const FeatureMatrix& features, const LabelVector& labels, const PretrainConfig& cfg) {
  cfg.validate();
  if (labels.size() != features.n()) throw Error(ErrorCode::LengthMismatch, "feature and label counts differ");
  if (labels.has_ignore()) throw Error(ErrorCode::InvalidArgument, "source labels must not contain IGNORE");
  const std::size_t d = features.d();
  const std::size_t k = labels.k();
  AdapterModel model(Matrix(k, d), std::vector<double>(k, 0.0));
  Rng rng(cfg.seed);
  std::vector<std::size_t> order(features.n());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Matrix grad_w(k, d);
  std::vector<double> grad_b(k), z(k);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      const double scale = 1.0 / static_cast<double>(stop - start);
      std::fill(grad_w.values().begin(), grad_w.values().end(), 0.0);
      std::fill(grad_b.begin(), grad_b.end(), 0.0);
      for (std::size_t b = start; b < stop; ++b) {
        const std::size_t i = order[b];
        const auto x = features.row(i);
        model.logits_row(x, z);
        AdapterModel::softmax_inplace(z);
        z[labels[i].index()] -= 1.0;
        for (std::size_t c = 0; c < k; ++c) {
          const double g = z[c] * scale;
          grad_b[c] += g;
          auto gw = grad_w.row(c);
          for (std::size_t j = 0; j < d; ++j) gw[j] += g * x[j];
        }
      }
      auto& w = model.mutable_weights();
      auto& bias = model.mutable_bias();
      for (std::size_t c = 0; c < k; ++c) {
        bias[c] -= cfg.learning_rate * grad_b[c];
        auto wr = w.row(c);
        const auto gw = grad_w.row(c);
        for (std::size_t j = 0; j < d; ++j) wr[j] -= cfg.learning_rate * (gw[j] + cfg.weight_decay * wr[j]);
      }
    }
  }
  return model;
}

}  // namespace logo
