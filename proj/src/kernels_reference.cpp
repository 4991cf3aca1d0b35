#include "uwcsr/kernels.hpp"

namespace uwcsr::kernels::reference {

namespace {

// Input index for output (r, k) and tap (dr, dk), or -1 inside the zero pad.
inline long tap_index(const ConvShape& s, std::size_t c, std::size_t r, std::size_t k,
                      std::size_t dr, std::size_t dk) {
  const long rr = static_cast<long>(r) + static_cast<long>(dr) - 1;
  const long kk = static_cast<long>(k) + static_cast<long>(dk) - 1;
  if (rr < 0 || kk < 0 || rr >= static_cast<long>(s.rows) || kk >= static_cast<long>(s.cols))
    return -1;
  return (static_cast<long>(c) * static_cast<long>(s.rows) + rr) * static_cast<long>(s.cols) + kk;
}

}  // namespace

void conv3x3_forward(const double* in, const double* weights, const double* bias, double* out,
                     const ConvShape& s) {
  for (std::size_t o = 0; o < s.out_ch; ++o) {
    for (std::size_t r = 0; r < s.rows; ++r) {
      for (std::size_t k = 0; k < s.cols; ++k) {
        double acc = bias[o];
        for (std::size_t c = 0; c < s.in_ch; ++c) {
          for (std::size_t dr = 0; dr < kKernel; ++dr) {
            for (std::size_t dk = 0; dk < kKernel; ++dk) {
              const long idx = tap_index(s, c, r, k, dr, dk);
              if (idx < 0) continue;
              acc += weights[((o * s.in_ch + c) * kKernel + dr) * kKernel + dk] * in[idx];
            }
          }
        }
        out[(o * s.rows + r) * s.cols + k] = acc;
      }
    }
  }
}

void conv3x3_backward(const double* in, const double* weights, const double* grad_out,
                      double* grad_in, double* grad_w, double* grad_b, const ConvShape& s) {
  if (grad_in != nullptr)
    for (std::size_t i = 0; i < s.in_size(); ++i) grad_in[i] = 0.0;

  for (std::size_t o = 0; o < s.out_ch; ++o) {
    for (std::size_t r = 0; r < s.rows; ++r) {
      for (std::size_t k = 0; k < s.cols; ++k) {
        const double g = grad_out[(o * s.rows + r) * s.cols + k];
        grad_b[o] += g;
        for (std::size_t c = 0; c < s.in_ch; ++c) {
          for (std::size_t dr = 0; dr < kKernel; ++dr) {
            for (std::size_t dk = 0; dk < kKernel; ++dk) {
              const long idx = tap_index(s, c, r, k, dr, dk);
              if (idx < 0) continue;
              const std::size_t w = ((o * s.in_ch + c) * kKernel + dr) * kKernel + dk;
              grad_w[w] += g * in[idx];
              if (grad_in != nullptr) grad_in[idx] += g * weights[w];
            }
          }
        }
      }
    }
  }
}

}  // namespace uwcsr::kernels::reference
