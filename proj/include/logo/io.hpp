#pragma once

// File formats.
//
// Matrix file (.lgf), little-endian:
//   bytes 0..3   magic "LGF1"
//   bytes 4..7   rows  (u32)
//   bytes 8..11  cols  (u32)
//   then rows*cols IEEE-754 binary32 values, row-major, nothing after.
//
// Label file (.lgl), little-endian:
//   bytes 0..3   magic "LGL1"
//   bytes 4..7   n (u32)
//   bytes 8..11  k (u32)
//   then n u32 values; 0xFFFFFFFF is IGNORE, anything else must be < k.
//
// Model file: a matrix file of shape (K + 2) x (D + 1). Row c < K holds
// [W_c, b_c]; row K holds [gamma, 0]; row K + 1 holds [beta, 0].

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>
#include <vector>

#include "logo/core.hpp"
#include "logo/model.hpp"

namespace logo::io {

inline constexpr char kMatrixMagic[4] = {'L', 'G', 'F', '1'};
inline constexpr char kLabelMagic[4] = {'L', 'G', 'L', '1'};
inline constexpr std::size_t kHeaderBytes = 12;
inline constexpr std::uint32_t kIgnoreValue = 0xFFFFFFFFu;

namespace detail {

inline void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int s = 0; s < 32; s += 8) out.push_back(static_cast<unsigned char>((v >> s) & 0xFFu));
}

inline std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::uint32_t checked_u32(std::size_t v, const char* what) {
  if (v > std::numeric_limits<std::uint32_t>::max())
    throw Error(ErrorCode::DimensionOverflow, std::string(what) + " does not fit in 32 bits");
  return static_cast<std::uint32_t>(v);
}

inline std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open '" + path.string() + "' for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoFailure, "short write to '" + path.string() + "'");
}

// Validates magic and payload length; returns (dim0, dim1).
inline std::pair<std::uint32_t, std::uint32_t> parse_header(const std::vector<unsigned char>& bytes,
                                                            const char (&magic)[4], std::size_t elem_per_item,
                                                            bool second_dim_in_payload) {
  if (bytes.size() < kHeaderBytes)
    throw Error(ErrorCode::TruncatedPayload, "file shorter than the 12-byte header", Error::npos,
                static_cast<double>(bytes.size()));
  if (std::memcmp(bytes.data(), magic, 4) != 0)
    throw Error(ErrorCode::BadMagic, "expected magic '" + std::string(magic, 4) + "'");
  const std::uint32_t a = get_u32(bytes.data() + 4);
  const std::uint32_t b = get_u32(bytes.data() + 8);
  const std::uint64_t items = second_dim_in_payload ? static_cast<std::uint64_t>(a) * b : a;
  if (items > std::numeric_limits<std::uint64_t>::max() / elem_per_item ||
      items * elem_per_item > std::numeric_limits<std::size_t>::max() - kHeaderBytes)
    throw Error(ErrorCode::DimensionOverflow, "declared payload size overflows");
  const std::uint64_t expected = items * elem_per_item;
  const std::uint64_t actual = bytes.size() - kHeaderBytes;
  if (actual < expected)
    throw Error(ErrorCode::TruncatedPayload,
                "payload has " + std::to_string(actual) + " bytes, expected " + std::to_string(expected),
                Error::npos, static_cast<double>(expected));
  if (actual > expected)
    throw Error(ErrorCode::TrailingBytes,
                "payload has " + std::to_string(actual) + " bytes, expected " + std::to_string(expected),
                Error::npos, static_cast<double>(expected));
  return {a, b};
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Matrices

/// Serializes to the matrix format. Values are rounded to binary32 with
/// round-to-nearest-even; a finite value that overflows binary32 is rejected.
inline std::vector<unsigned char> encode_matrix(const Matrix& m) {
  std::vector<unsigned char> out;
  out.reserve(kHeaderBytes + m.rows() * m.cols() * 4);
  out.insert(out.end(), std::begin(kMatrixMagic), std::end(kMatrixMagic));
  detail::put_u32(out, detail::checked_u32(m.rows(), "row count"));
  detail::put_u32(out, detail::checked_u32(m.cols(), "column count"));
  for (double v : m.values()) {
    const float f = static_cast<float>(v);
    if (std::isfinite(v) && !std::isfinite(f))
      throw Error(ErrorCode::EntryOutOfRange, "value exceeds binary32 range", Error::npos, v);
    detail::put_u32(out, std::bit_cast<std::uint32_t>(f));
  }
  return out;
}

inline Matrix decode_matrix(const std::vector<unsigned char>& bytes) {
  const auto [rows, cols] = detail::parse_header(bytes, kMatrixMagic, 4, true);
  Matrix m(rows, cols);
  const unsigned char* p = bytes.data() + kHeaderBytes;
  for (double& v : m.values()) {
    v = static_cast<double>(std::bit_cast<float>(detail::get_u32(p)));
    p += 4;
  }
  return m;
}

inline void write_matrix(const std::filesystem::path& path, const Matrix& m) {
  detail::write_file(path, encode_matrix(m));
}

inline Matrix read_matrix(const std::filesystem::path& path) { return decode_matrix(detail::read_file(path)); }

inline FeatureMatrix read_features(const std::filesystem::path& path) { return FeatureMatrix(read_matrix(path)); }
inline ProbMatrix read_probabilities(const std::filesystem::path& path) { return ProbMatrix(read_matrix(path)); }

// ---------------------------------------------------------------------------
// Labels

inline std::vector<unsigned char> encode_labels(const LabelVector& labels) {
  std::vector<unsigned char> out;
  out.reserve(kHeaderBytes + labels.size() * 4);
  out.insert(out.end(), std::begin(kLabelMagic), std::end(kLabelMagic));
  detail::put_u32(out, detail::checked_u32(labels.size(), "label count"));
  detail::put_u32(out, detail::checked_u32(labels.k(), "class count"));
  for (const Label l : labels) detail::put_u32(out, l.is_ignore() ? kIgnoreValue : l.index());
  return out;
}

inline LabelVector decode_labels(const std::vector<unsigned char>& bytes) {
  const auto [n, k] = detail::parse_header(bytes, kLabelMagic, 4, false);
  std::vector<Label> labels;
  labels.reserve(n);
  const unsigned char* p = bytes.data() + kHeaderBytes;
  for (std::uint32_t i = 0; i < n; ++i, p += 4) {
    const std::uint32_t v = detail::get_u32(p);
    if (v == kIgnoreValue) {
      labels.push_back(Label::ignore());
    } else {
      if (v >= k)
        throw Error(ErrorCode::ValueExceedsK,
                    "label " + std::to_string(v) + " at " + std::to_string(i) + " exceeds k=" + std::to_string(k), i, v);
      labels.emplace_back(v);
    }
  }
  return LabelVector(std::move(labels), k);
}

inline void write_labels(const std::filesystem::path& path, const LabelVector& labels) {
  detail::write_file(path, encode_labels(labels));
}

inline LabelVector read_labels(const std::filesystem::path& path) { return decode_labels(detail::read_file(path)); }

// ---------------------------------------------------------------------------
// Models

inline Matrix model_to_matrix(const AdapterModel& model) {
  const std::size_t k = model.k(), d = model.d();
  Matrix m(k + 2, d + 1);
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t j = 0; j < d; ++j) m(c, j) = model.weights()(c, j);
    m(c, d) = model.bias()[c];
  }
  for (std::size_t j = 0; j < d; ++j) {
    m(k, j) = model.gamma()[j];
    m(k + 1, j) = model.beta()[j];
  }
  return m;
}

inline AdapterModel model_from_matrix(const Matrix& m) {
  if (m.rows() < 3 || m.cols() < 2) throw Error(ErrorCode::ShapeMismatch, "model matrix too small");
  const std::size_t k = m.rows() - 2, d = m.cols() - 1;
  Matrix w(k, d);
  std::vector<double> b(k), gamma(d), beta(d);
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t j = 0; j < d; ++j) w(c, j) = m(c, j);
    b[c] = m(c, d);
  }
  for (std::size_t j = 0; j < d; ++j) {
    gamma[j] = m(k, j);
    beta[j] = m(k + 1, j);
  }
  return AdapterModel(std::move(w), std::move(b), std::move(gamma), std::move(beta));
}

inline void write_model(const std::filesystem::path& path, const AdapterModel& model) {
  write_matrix(path, model_to_matrix(model));
}

inline AdapterModel read_model(const std::filesystem::path& path) { return model_from_matrix(read_matrix(path)); }

}  // namespace logo::io
