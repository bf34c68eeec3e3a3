#pragma once

// Frozen linear classifier behind a trainable per-feature affine adapter:
//   h = gamma * x + beta,  logits = W h + b.
// (gamma, beta) play the role of normalization-layer affine parameters; W and
// b are never touched during adaptation.

#include <cmath>
#include <cstring>
#include <vector>

#include "logo/core.hpp"

namespace logo {

class AdapterModel {
 public:
  AdapterModel(Matrix w, std::vector<double> b)
      : w_(std::move(w)), b_(std::move(b)), gamma_(w_.cols(), 1.0), beta_(w_.cols(), 0.0) {
    check_shapes();
  }
  AdapterModel(Matrix w, std::vector<double> b, std::vector<double> gamma, std::vector<double> beta)
      : w_(std::move(w)), b_(std::move(b)), gamma_(std::move(gamma)), beta_(std::move(beta)) {
    check_shapes();
  }

  std::size_t d() const noexcept { return w_.cols(); }
  std::size_t k() const noexcept { return w_.rows(); }

  const Matrix& weights() const noexcept { return w_; }
  const std::vector<double>& bias() const noexcept { return b_; }
  const std::vector<double>& gamma() const noexcept { return gamma_; }
  const std::vector<double>& beta() const noexcept { return beta_; }
  std::vector<double>& gamma() noexcept { return gamma_; }
  std::vector<double>& beta() noexcept { return beta_; }

  /// Full-parameter access, used only by source pretraining.
  Matrix& mutable_weights() noexcept { return w_; }
  std::vector<double>& mutable_bias() noexcept { return b_; }

  bool same_frozen(const AdapterModel& other) const {
    return w_ == other.w_ && b_ == other.b_;
  }

  /// Adapted feature h = gamma * x + beta for one row.
  void adapt_row(std::span<const double> x, std::span<double> h) const {
    for (std::size_t j = 0; j < d(); ++j) h[j] = gamma_[j] * x[j] + beta_[j];
  }

  void logits_row(std::span<const double> h, std::span<double> z) const {
    for (std::size_t c = 0; c < k(); ++c) z[c] = dot(w_.row(c), h) + b_[c];
  }

  Matrix adapted_features(const FeatureMatrix& x) const {
    require_dim(x);
    Matrix h(x.n(), d());
    for (std::size_t i = 0; i < x.n(); ++i) adapt_row(x.row(i), h.row(i));
    return h;
  }

  /// Row-wise softmax probabilities of the raw input.
  Matrix probabilities(const FeatureMatrix& x) const {
    require_dim(x);
    Matrix p(x.n(), k());
    std::vector<double> h(d());
    for (std::size_t i = 0; i < x.n(); ++i) {
      adapt_row(x.row(i), h);
      logits_row(h, p.row(i));
      softmax_inplace(p.row(i));
    }
    return p;
  }

  LabelVector predict(const FeatureMatrix& x) const {
    const Matrix p = probabilities(x);
    std::vector<Label> out;
    out.reserve(x.n());
    for (std::size_t i = 0; i < x.n(); ++i) out.emplace_back(static_cast<std::uint32_t>(argmax(p.row(i))));
    return LabelVector(std::move(out), k());
  }

  /// FNV-1a over the bytes of (W, b); identifies the frozen part.
  std::uint64_t frozen_hash() const {
    std::uint64_t h = 1469598103934665603ULL;
    auto feed = [&h](std::span<const double> v) {
      for (double x : v) {
        unsigned char bytes[sizeof(double)];
        std::memcpy(bytes, &x, sizeof(double));
        for (unsigned char c : bytes) {
          h ^= c;
          h *= 1099511628211ULL;
        }
      }
    };
    feed(w_.values());
    feed(b_);
    return h;
  }

  static void softmax_inplace(std::span<double> z) {
    double mx = z[0];
    for (double v : z) mx = std::max(mx, v);
    double sum = 0.0;
    for (double& v : z) {
      v = std::exp(v - mx);
      sum += v;
    }
    for (double& v : z) v /= sum;
  }

  void require_dim(const FeatureMatrix& x) const {
    if (x.d() != d())
      throw Error(ErrorCode::DimensionMismatch, "model expects d=" + std::to_string(d()) +
                                                    ", features have d=" + std::to_string(x.d()));
  }

  friend bool operator==(const AdapterModel&, const AdapterModel&) = default;

 private:
  void check_shapes() const {
    if (w_.rows() == 0 || w_.cols() == 0)
      throw Error(ErrorCode::EmptyMatrix, "classifier weights must be non-empty");
    if (b_.size() != w_.rows() || gamma_.size() != w_.cols() || beta_.size() != w_.cols())
      throw Error(ErrorCode::ShapeMismatch, "adapter model parameter shapes disagree");
  }

  Matrix w_;
  std::vector<double> b_;
  std::vector<double> gamma_;
  std::vector<double> beta_;
};

}  // namespace logo
