#include "madtwinnet/tensor.hpp"

#include <stdexcept>

namespace madt {

FrameSeq to_time_major(const std::vector<Matrix>& windows) {
  if (windows.empty()) return {};
  const auto steps = windows.front().rows();
  const auto width = windows.front().cols();
  const auto batch = static_cast<Eigen::Index>(windows.size());
  FrameSeq seq(static_cast<std::size_t>(steps), Matrix(batch, width));
  for (Eigen::Index b = 0; b < batch; ++b) {
    const Matrix& w = windows[static_cast<std::size_t>(b)];
    if (w.rows() != steps || w.cols() != width) {
      throw std::invalid_argument("to_time_major: windows differ in shape");
    }
    for (Eigen::Index t = 0; t < steps; ++t) seq[static_cast<std::size_t>(t)].row(b) = w.row(t);
  }
  return seq;
}

std::vector<Matrix> to_batch_major(const FrameSeq& seq) {
  if (seq.empty()) return {};
  const auto batch = seq.front().rows();
  const auto width = seq.front().cols();
  const auto steps = static_cast<Eigen::Index>(seq.size());
  std::vector<Matrix> windows(static_cast<std::size_t>(batch), Matrix(steps, width));
  for (Eigen::Index t = 0; t < steps; ++t) {
    for (Eigen::Index b = 0; b < batch; ++b) {
      windows[static_cast<std::size_t>(b)].row(t) = seq[static_cast<std::size_t>(t)].row(b);
    }
  }
  return windows;
}

Matrix stack_rows(const FrameSeq& seq) {
  if (seq.empty()) return {};
  const auto batch = seq.front().rows();
  Matrix out(batch * static_cast<Eigen::Index>(seq.size()), seq.front().cols());
  for (std::size_t t = 0; t < seq.size(); ++t) {
    out.middleRows(static_cast<Eigen::Index>(t) * batch, batch) = seq[t];
  }
  return out;
}

FrameSeq unstack_rows(const Matrix& stacked, std::size_t steps) {
  if (steps == 0) return {};
  if (stacked.rows() % static_cast<Eigen::Index>(steps) != 0) {
    throw std::invalid_argument("unstack_rows: row count not divisible by steps");
  }
  const auto batch = stacked.rows() / static_cast<Eigen::Index>(steps);
  FrameSeq seq(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    seq[t] = stacked.middleRows(static_cast<Eigen::Index>(t) * batch, batch);
  }
  return seq;
}

FrameSeq reversed(const FrameSeq& seq) { return FrameSeq(seq.rbegin(), seq.rend()); }

FrameSeq zeros_like(const FrameSeq& seq) {
  FrameSeq out;
  out.reserve(seq.size());
  for (const auto& m : seq) out.push_back(Matrix::Zero(m.rows(), m.cols()));
  return out;
}

bool all_finite(const Matrix& m) { return m.allFinite(); }

bool all_finite(const FrameSeq& seq) {
  for (const auto& m : seq) {
    if (!m.allFinite()) return false;
  }
  return true;
}

}  // namespace madt
