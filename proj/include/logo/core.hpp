#pragma once

// Shared containers for the pseudo-label engine: dense row-major
// matrices with validated invariants, labels with an IGNORE state, class
// priors, and the seeded random source every stage draws from.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace logo {

enum class ErrorCode {
  RowNotNormalized,
  EntryOutOfRange,
  NonFinite,
  EmptyMatrix,
  ZeroRow,
  ShapeMismatch,
  EmptyViewList,
  DimensionMismatch,
  ZeroMeanVector,
  NoActiveClass,
  AllCountsZero,
  NumericalDivergence,
  LengthMismatch,
  FrozenMismatch,
  AllSamplesIgnored,
  NoDefinedClass,
  EmptyEvaluation,
  InvalidConfig,
  InvalidArgument,
  BadMagic,
  TruncatedPayload,
  TrailingBytes,
  DimensionOverflow,
  ValueExceedsK,
  IoFailure,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::RowNotNormalized: return "RowNotNormalized";
    case ErrorCode::EntryOutOfRange: return "EntryOutOfRange";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::EmptyMatrix: return "EmptyMatrix";
    case ErrorCode::ZeroRow: return "ZeroRow";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::EmptyViewList: return "EmptyViewList";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ZeroMeanVector: return "ZeroMeanVector";
    case ErrorCode::NoActiveClass: return "NoActiveClass";
    case ErrorCode::AllCountsZero: return "AllCountsZero";
    case ErrorCode::NumericalDivergence: return "NumericalDivergence";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::FrozenMismatch: return "FrozenMismatch";
    case ErrorCode::AllSamplesIgnored: return "AllSamplesIgnored";
    case ErrorCode::NoDefinedClass: return "NoDefinedClass";
    case ErrorCode::EmptyEvaluation: return "EmptyEvaluation";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::TruncatedPayload: return "TruncatedPayload";
    case ErrorCode::TrailingBytes: return "TrailingBytes";
    case ErrorCode::DimensionOverflow: return "DimensionOverflow";
    case ErrorCode::ValueExceedsK: return "ValueExceedsK";
    case ErrorCode::IoFailure: return "IoFailure";
  }
  return "Unknown";
}

/// Every failure in the library surfaces as this exception. `code()` is the
/// machine-readable kind; `index()` carries the offending row/class/epoch
/// when the kind has one, and `value()` a related quantity (e.g. a row sum).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what,
        std::size_t index = npos, double value = 0.0)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code), index_(index), value_(value) {}

  ErrorCode code() const noexcept { return code_; }
  std::size_t index() const noexcept { return index_; }
  double value() const noexcept { return value_; }

  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

 private:
  ErrorCode code_;
  std::size_t index_;
  double value_;
};

// ---------------------------------------------------------------------------
// Matrix

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_)
      throw Error(ErrorCode::ShapeMismatch, "matrix payload does not match shape");
  }

  /// Builds from nested rows; all rows must share one width.
  static Matrix from_rows(const std::vector<std::vector<double>>& rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r ? rows.front().size() : 0;
    std::vector<double> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
      if (row.size() != c) throw Error(ErrorCode::ShapeMismatch, "ragged rows");
      data.insert(data.end(), row.begin(), row.end());
    }
    return Matrix(r, c, std::move(data));
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += a[j] * b[j];
  return s;
}

inline double l2_norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

/// Index of the largest entry; ties go to the lowest index.
inline std::size_t argmax(std::span<const double> a) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < a.size(); ++j)
    if (a[j] > a[best]) best = j;
  return best;
}

// ---------------------------------------------------------------------------
// FeatureMatrix / ProbMatrix

/// N x D embedding matrix; all entries finite, N >= 1, D >= 1.
class FeatureMatrix {
 public:
  explicit FeatureMatrix(Matrix m) : m_(std::move(m)) {
    if (m_.rows() == 0 || m_.cols() == 0)
      throw Error(ErrorCode::EmptyMatrix, "feature matrix needs n >= 1 and d >= 1");
    const auto v = m_.values();
    for (std::size_t idx = 0; idx < v.size(); ++idx)
      if (!std::isfinite(v[idx]))
        throw Error(ErrorCode::NonFinite, "non-finite feature entry", idx / m_.cols());
  }

  std::size_t n() const noexcept { return m_.rows(); }
  std::size_t d() const noexcept { return m_.cols(); }
  std::span<const double> row(std::size_t i) const { return m_.row(i); }
  double operator()(std::size_t i, std::size_t j) const { return m_(i, j); }
  const Matrix& matrix() const noexcept { return m_; }

  friend bool operator==(const FeatureMatrix&, const FeatureMatrix&) = default;

 private:
  Matrix m_;
};

inline constexpr double kProbRowTolerance = 1e-5;

/// Checks the row-stochastic invariant; throws EntryOutOfRange or
/// RowNotNormalized(row, sum).
inline void validate_prob_matrix(const Matrix& p) {
  for (std::size_t i = 0; i < p.rows(); ++i) {
    for (double x : p.row(i))
      if (!(x >= 0.0 && x <= 1.0))
        throw Error(ErrorCode::EntryOutOfRange, "probability outside [0,1] in row " +
                                                    std::to_string(i), i, x);
  }
  for (std::size_t i = 0; i < p.rows(); ++i) {
    double sum = 0.0;
    for (double x : p.row(i)) sum += x;
    if (std::abs(sum - 1.0) > kProbRowTolerance)
      throw Error(ErrorCode::RowNotNormalized,
                  "row " + std::to_string(i) + " sums to " + std::to_string(sum), i, sum);
  }
}

/// N x K row-stochastic class probabilities.
class ProbMatrix {
 public:
  explicit ProbMatrix(Matrix m) : m_(std::move(m)) {
    if (m_.rows() == 0 || m_.cols() == 0)
      throw Error(ErrorCode::EmptyMatrix, "probability matrix needs n >= 1 and k >= 1");
    validate_prob_matrix(m_);
  }

  std::size_t n() const noexcept { return m_.rows(); }
  std::size_t k() const noexcept { return m_.cols(); }
  std::span<const double> row(std::size_t i) const { return m_.row(i); }
  double operator()(std::size_t i, std::size_t j) const { return m_(i, j); }
  const Matrix& matrix() const noexcept { return m_; }

  friend bool operator==(const ProbMatrix&, const ProbMatrix&) = default;

 private:
  Matrix m_;
};

inline constexpr double kUnitNormTolerance = 1e-7;

/// Scales every row to unit L2 norm. Throws ZeroRow(i) on an all-zero row.
inline FeatureMatrix row_normalize(const FeatureMatrix& features) {
  Matrix out = features.matrix();
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.row(i);
    const double norm = l2_norm(r);
    if (norm == 0.0) throw Error(ErrorCode::ZeroRow, "row " + std::to_string(i) + " is zero", i);
    for (double& x : r) x /= norm;
  }
  return FeatureMatrix(std::move(out));
}

// ---------------------------------------------------------------------------
// Labels

/// A class index or the IGNORE state.
class Label {
 public:
  constexpr Label() = default;
  constexpr explicit Label(std::uint32_t cls) : value_(cls), ignored_(false) {}

  static constexpr Label ignore() { return Label(); }

  constexpr bool is_ignore() const noexcept { return ignored_; }
  constexpr std::uint32_t index() const noexcept { return value_; }

  friend constexpr bool operator==(const Label&, const Label&) = default;

 private:
  std::uint32_t value_ = 0;
  bool ignored_ = true;
};

class LabelVector {
 public:
  LabelVector() = default;
  LabelVector(std::vector<Label> labels, std::size_t k) : labels_(std::move(labels)), k_(k) {
    for (std::size_t i = 0; i < labels_.size(); ++i)
      if (!labels_[i].is_ignore() && labels_[i].index() >= k_)
        throw Error(ErrorCode::ValueExceedsK,
                    "label " + std::to_string(labels_[i].index()) + " at " + std::to_string(i) +
                        " exceeds k=" + std::to_string(k_), i, labels_[i].index());
  }

  /// Builds from plain class indices (no IGNORE).
  static LabelVector from_indices(std::span<const std::uint32_t> idx, std::size_t k) {
    std::vector<Label> labels;
    labels.reserve(idx.size());
    for (auto v : idx) labels.emplace_back(v);
    return LabelVector(std::move(labels), k);
  }
  static LabelVector from_indices(std::initializer_list<std::uint32_t> idx, std::size_t k) {
    return from_indices(std::span<const std::uint32_t>(idx.begin(), idx.size()), k);
  }

  std::size_t size() const noexcept { return labels_.size(); }
  std::size_t k() const noexcept { return k_; }
  const Label& operator[](std::size_t i) const { return labels_[i]; }
  std::span<const Label> labels() const noexcept { return labels_; }
  auto begin() const { return labels_.begin(); }
  auto end() const { return labels_.end(); }

  bool has_ignore() const {
    return std::any_of(labels_.begin(), labels_.end(), [](Label l) { return l.is_ignore(); });
  }

  friend bool operator==(const LabelVector&, const LabelVector&) = default;

 private:
  std::vector<Label> labels_;
  std::size_t k_ = 0;
};

// ---------------------------------------------------------------------------
// ClassPrior

inline constexpr double kPriorSumTolerance = 1e-8;

class ClassPrior {
 public:
  ClassPrior(std::vector<double> weights, std::vector<bool> active)
      : c_(std::move(weights)), active_(std::move(active)) {
    if (c_.size() != active_.size())
      throw Error(ErrorCode::ShapeMismatch, "prior weights and active mask differ in length");
    double sum = 0.0;
    for (std::size_t k = 0; k < c_.size(); ++k) {
      if (!(c_[k] >= 0.0) || !std::isfinite(c_[k]))
        throw Error(ErrorCode::EntryOutOfRange, "prior weight must be finite and >= 0", k, c_[k]);
      if (!active_[k] && c_[k] != 0.0)
        throw Error(ErrorCode::InvalidArgument, "inactive class carries nonzero prior", k, c_[k]);
      sum += c_[k];
    }
    if (std::abs(sum - 1.0) > kPriorSumTolerance)
      throw Error(ErrorCode::RowNotNormalized, "prior sums to " + std::to_string(sum), 0, sum);
  }

  /// Active iff weight > 0.
  static ClassPrior from_weights(std::vector<double> weights) {
    std::vector<bool> active(weights.size());
    for (std::size_t k = 0; k < weights.size(); ++k) active[k] = weights[k] > 0.0;
    return ClassPrior(std::move(weights), std::move(active));
  }

  std::size_t k() const noexcept { return c_.size(); }
  double weight(std::size_t k) const { return c_[k]; }
  bool active(std::size_t k) const { return active_[k]; }
  std::span<const double> weights() const noexcept { return c_; }
  std::size_t active_count() const {
    return static_cast<std::size_t>(std::count(active_.begin(), active_.end(), true));
  }

 private:
  std::vector<double> c_;
  std::vector<bool> active_;
};

// ---------------------------------------------------------------------------
// Randomness

struct RngSeed {
  std::uint64_t value = 0;
  friend bool operator==(const RngSeed&, const RngSeed&) = default;
};

/// SplitMix64 finalizer; derives independent sub-seeds.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr RngSeed split(RngSeed seed, std::uint64_t stream) {
  return RngSeed{mix64(mix64(seed.value) ^ mix64(stream + 0x632BE59BD9B4E019ULL))};
}

/// Seeded generator. Engine is mt19937_64 (bit-exact by the standard); the
/// variate transforms are written out here because the std distributions
/// are implementation-defined.
class Rng {
 public:
  explicit Rng(RngSeed seed) : engine_(seed.value) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller; caches the second variate.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  /// Uniform integer in [0, bound) by rejection (no modulo bias).
  std::uint64_t below(std::uint64_t bound) {
    if (bound <= 1) return 0;
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t x;
    do { x = engine_(); } while (x >= limit);
    return x % bound;
  }

  /// Index drawn from unnormalized nonnegative weights.
  std::size_t categorical(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    double u = uniform() * total;
    for (std::size_t k = 0; k < weights.size(); ++k) {
      if (u < weights[k]) return k;
      u -= weights[k];
    }
    for (std::size_t k = weights.size(); k-- > 0;)
      if (weights[k] > 0.0) return k;
    return 0;
  }

  /// Fisher-Yates.
  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace logo
