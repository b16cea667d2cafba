#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstddef>
#include <vector>

namespace madt {

// Row-major so that one row is one time frame, matching the T x N layout
// used throughout the pipeline.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;
using ComplexMatrix =
    Eigen::Matrix<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Time-major batch: element t holds frame t of every batch item (B x D).
using FrameSeq = std::vector<Matrix>;

/// Splits B windows (each T x D) into T matrices of shape B x D.
FrameSeq to_time_major(const std::vector<Matrix>& windows);

/// Inverse of to_time_major.
std::vector<Matrix> to_batch_major(const FrameSeq& seq);

/// Stacks a sequence into a single (T*B) x D matrix, time-major row order.
Matrix stack_rows(const FrameSeq& seq);

/// Splits a (T*B) x D matrix produced by stack_rows back into T blocks of B rows.
FrameSeq unstack_rows(const Matrix& stacked, std::size_t steps);

FrameSeq reversed(const FrameSeq& seq);

FrameSeq zeros_like(const FrameSeq& seq);

bool all_finite(const Matrix& m);
bool all_finite(const FrameSeq& seq);

}  // namespace madt
