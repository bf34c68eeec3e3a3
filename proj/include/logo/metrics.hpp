#pragma once

// Segmentation metrics from a confusion matrix: per-class IoU, mIoU, OA.

#include <optional>
#include <vector>

#include "logo/core.hpp"

namespace logo {

struct ConfusionMatrix {
  std::vector<std::vector<std::uint64_t>> counts;  // [truth][prediction]
  std::uint64_t n_total = 0;    // points tallied into counts
  std::uint64_t n_ignored = 0;  // IGNORE predictions
  std::vector<std::uint64_t> ignored_fn;  // per true class; only when ignored points count as errors

  std::size_t k() const noexcept { return counts.size(); }
  std::uint64_t tp(std::size_t c) const { return counts[c][c]; }
  std::uint64_t fp(std::size_t c) const {
    std::uint64_t s = 0;
    for (std::size_t t = 0; t < k(); ++t)
      if (t != c) s += counts[t][c];
    return s;
  }
  std::uint64_t fn(std::size_t c) const {
    std::uint64_t s = 0;
    for (std::size_t p = 0; p < k(); ++p)
      if (p != c) s += counts[c][p];
    return s;
  }

  static ConfusionMatrix from_counts(std::vector<std::vector<std::uint64_t>> counts) {
    ConfusionMatrix cm;
    for (const auto& row : counts) {
      if (row.size() != counts.size()) throw Error(ErrorCode::ShapeMismatch, "confusion matrix must be square");
      for (auto v : row) cm.n_total += v;
    }
    cm.counts = std::move(counts);
    return cm;
  }
};

/// Tallies truth against prediction. IGNORE predictions are skipped and
/// counted in n_ignored; with `count_ignored` they are additionally booked as
/// misses (a false negative of the true class) and included in n_total.
inline ConfusionMatrix confusion(const LabelVector& y_true, const LabelVector& y_pred, bool count_ignored = false) {
  if (y_true.size() != y_pred.size()) throw Error(ErrorCode::LengthMismatch, "truth and prediction lengths differ");
  const std::size_t k = std::max(y_true.k(), y_pred.k());
  ConfusionMatrix cm;
  cm.counts.assign(k, std::vector<std::uint64_t>(k, 0));
  std::vector<std::uint64_t> ignored_misses(k, 0);
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    if (y_true[i].is_ignore()) throw Error(ErrorCode::InvalidArgument, "truth labels must not contain IGNORE", i);
    const std::size_t t = y_true[i].index();
    if (y_pred[i].is_ignore()) {
      ++cm.n_ignored;
      if (count_ignored) ++ignored_misses[t];
      continue;
    }
    ++cm.counts[t][y_pred[i].index()];
    ++cm.n_total;
  }
  if (count_ignored) {
    // Book each ignored point as a false negative of its true class. The
    // confusion matrix has no column for "no prediction", so these misses are
    // tracked separately and folded into IoU/OA through n_total.
    cm.ignored_fn = std::move(ignored_misses);
    for (auto v : cm.ignored_fn) cm.n_total += v;
  }
  return cm;
}

struct ClassIoU {
  std::vector<std::optional<double>> iou;  // nullopt: zero denominator

  std::size_t defined_count() const {
    std::size_t n = 0;
    for (const auto& v : iou) n += v.has_value();
    return n;
  }
};

inline ClassIoU iou_per_class(const ConfusionMatrix& cm) {
  ClassIoU out;
  out.iou.resize(cm.k());
  for (std::size_t c = 0; c < cm.k(); ++c) {
    const std::uint64_t extra_fn = cm.ignored_fn.empty() ? 0 : cm.ignored_fn[c];
    const std::uint64_t denom = cm.tp(c) + cm.fp(c) + cm.fn(c) + extra_fn;
    if (denom > 0) out.iou[c] = static_cast<double>(cm.tp(c)) / static_cast<double>(denom);
  }
  return out;
}

/// Mean over classes with a defined IoU.
inline double miou(const ClassIoU& ious) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& v : ious.iou)
    if (v) {
      sum += *v;
      ++n;
    }
  if (n == 0) throw Error(ErrorCode::NoDefinedClass, "no class has a defined IoU");
  return sum / static_cast<double>(n);
}

inline double overall_accuracy(const ConfusionMatrix& cm) {
  if (cm.n_total == 0) throw Error(ErrorCode::EmptyEvaluation, "no evaluated points");
  std::uint64_t trace = 0;
  for (std::size_t c = 0; c < cm.k(); ++c) trace += cm.tp(c);
  return static_cast<double>(trace) / static_cast<double>(cm.n_total);
}

struct Evaluation {
  ClassIoU iou;
  double miou = 0.0;
  double oa = 0.0;
  double coverage = 0.0;  // fraction of points with a non-IGNORE prediction
  ConfusionMatrix cm;
};

inline Evaluation evaluate(const LabelVector& y_true, const LabelVector& y_pred, bool count_ignored = false) {
  Evaluation e;
  e.cm = confusion(y_true, y_pred, count_ignored);
  e.iou = iou_per_class(e.cm);
  e.miou = miou(e.iou);
  e.oa = overall_accuracy(e.cm);
  e.coverage = y_true.size() ? 1.0 - static_cast<double>(e.cm.n_ignored) / static_cast<double>(y_true.size()) : 0.0;
  return e;
}

}  // namespace logo
