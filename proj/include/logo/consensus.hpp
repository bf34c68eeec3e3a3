#pragma once

// Dual-consensus filtering: a sample keeps its label only when the local
// ensemble prediction and the global transport assignment agree.

#include <vector>

#include "logo/core.hpp"

namespace logo {

struct ConsensusResult {
  LabelVector y_final;
  std::size_t kept_count = 0;
  std::vector<std::size_t> per_class_kept;
  double consensus_rate = 0.0;
};

inline ConsensusResult dual_consensus_filter(const LabelVector& y_raw, const LabelVector& y_sink) {
  if (y_raw.size() != y_sink.size())
    throw Error(ErrorCode::LengthMismatch, "raw and transport label vectors differ in length");
  if (y_raw.k() != y_sink.k())
    throw Error(ErrorCode::ShapeMismatch, "raw and transport label vectors differ in class count");
  if (y_raw.has_ignore() || y_sink.has_ignore())
    throw Error(ErrorCode::InvalidArgument, "consensus inputs must not contain IGNORE");

  ConsensusResult out;
  out.per_class_kept.assign(y_raw.k(), 0);
  std::vector<Label> final_labels;
  final_labels.reserve(y_raw.size());
  for (std::size_t i = 0; i < y_raw.size(); ++i) {
    if (y_raw[i] == y_sink[i]) {
      final_labels.push_back(y_raw[i]);
      ++out.kept_count;
      ++out.per_class_kept[y_raw[i].index()];
    } else {
      final_labels.push_back(Label::ignore());
    }
  }
  out.consensus_rate = y_raw.size() ? static_cast<double>(out.kept_count) / static_cast<double>(y_raw.size()) : 0.0;
  out.y_final = LabelVector(std::move(final_labels), y_raw.k());
  return out;
}

}  // namespace logo
