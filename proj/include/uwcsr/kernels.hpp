#pragma once

// 3x3 same-padded convolution kernels.
//
// reference:: is a direct nested-loop implementation kept as the test oracle.
// fast:: lowers to im2col + GEMM and is what the network uses. Both take
// channel-major (C x R x K) buffers and row-major (out x in x 3 x 3) weights.
// Backward accumulates into grad_w / grad_b and overwrites grad_in; grad_in
// may be null when the input gradient is not needed.

#include <cstddef>
#include <vector>

namespace uwcsr::kernels {

inline constexpr std::size_t kKernel = 3;
inline constexpr std::size_t kTaps = kKernel * kKernel;

struct ConvShape {
  std::size_t in_ch = 0;
  std::size_t out_ch = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::size_t in_size() const { return in_ch * rows * cols; }
  std::size_t out_size() const { return out_ch * rows * cols; }
  std::size_t weight_size() const { return out_ch * in_ch * kTaps; }
};

namespace reference {

void conv3x3_forward(const double* in, const double* weights, const double* bias, double* out,
                     const ConvShape& shape);

void conv3x3_backward(const double* in, const double* weights, const double* grad_out,
                      double* grad_in, double* grad_w, double* grad_b, const ConvShape& shape);

}  // namespace reference

namespace fast {

// Scratch buffers reused across calls; one per thread.
struct Workspace {
  std::vector<double> columns;
  std::vector<double> grad_columns;
};

void conv3x3_forward(const double* in, const double* weights, const double* bias, double* out,
                     const ConvShape& shape, Workspace& ws);

void conv3x3_backward(const double* in, const double* weights, const double* grad_out,
                      double* grad_in, double* grad_w, double* grad_b, const ConvShape& shape,
                      Workspace& ws);

}  // namespace fast

}  // namespace uwcsr::kernels
