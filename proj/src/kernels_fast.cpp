#include <Eigen/Core>

#include "uwcsr/kernels.hpp"

namespace uwcsr::kernels::fast {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;
using VecMap = Eigen::Map<Eigen::VectorXd>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

// columns[(c*9 + dr*3 + dk), r*K + k] = in[c, r+dr-1, k+dk-1] (zero outside)
void im2col(const double* in, const ConvShape& s, double* columns) {
  const std::size_t plane = s.rows * s.cols;
  for (std::size_t c = 0; c < s.in_ch; ++c) {
    const double* src = in + c * plane;
    for (std::size_t dr = 0; dr < kKernel; ++dr) {
      for (std::size_t dk = 0; dk < kKernel; ++dk) {
        double* dst = columns + ((c * kKernel + dr) * kKernel + dk) * plane;
        for (std::size_t r = 0; r < s.rows; ++r) {
          const long rr = static_cast<long>(r + dr) - 1;
          double* drow = dst + r * s.cols;
          if (rr < 0 || rr >= static_cast<long>(s.rows)) {
            for (std::size_t k = 0; k < s.cols; ++k) drow[k] = 0.0;
            continue;
          }
          const double* srow = src + static_cast<std::size_t>(rr) * s.cols;
          // shifted copy, dk in {0,1,2} maps to offsets {-1,0,+1}
          if (dk == 1) {
            for (std::size_t k = 0; k < s.cols; ++k) drow[k] = srow[k];
          } else if (dk == 0) {
            drow[0] = 0.0;
            for (std::size_t k = 1; k < s.cols; ++k) drow[k] = srow[k - 1];
          } else {
            for (std::size_t k = 0; k + 1 < s.cols; ++k) drow[k] = srow[k + 1];
            drow[s.cols - 1] = 0.0;
          }
        }
      }
    }
  }
}

void col2im(const double* columns, const ConvShape& s, double* out) {
  const std::size_t plane = s.rows * s.cols;
  for (std::size_t i = 0; i < s.in_size(); ++i) out[i] = 0.0;
  for (std::size_t c = 0; c < s.in_ch; ++c) {
    double* dst = out + c * plane;
    for (std::size_t dr = 0; dr < kKernel; ++dr) {
      for (std::size_t dk = 0; dk < kKernel; ++dk) {
        const double* src = columns + ((c * kKernel + dr) * kKernel + dk) * plane;
        for (std::size_t r = 0; r < s.rows; ++r) {
          const long rr = static_cast<long>(r + dr) - 1;
          if (rr < 0 || rr >= static_cast<long>(s.rows)) continue;
          const double* srow = src + r * s.cols;
          double* drow = dst + static_cast<std::size_t>(rr) * s.cols;
          if (dk == 1) {
            for (std::size_t k = 0; k < s.cols; ++k) drow[k] += srow[k];
          } else if (dk == 0) {
            for (std::size_t k = 1; k < s.cols; ++k) drow[k - 1] += srow[k];
          } else {
            for (std::size_t k = 0; k + 1 < s.cols; ++k) drow[k + 1] += srow[k];
          }
        }
      }
    }
  }
}

}  // namespace

void conv3x3_forward(const double* in, const double* weights, const double* bias, double* out,
                     const ConvShape& s, Workspace& ws) {
  const auto plane = static_cast<Eigen::Index>(s.rows * s.cols);
  const auto taps = static_cast<Eigen::Index>(s.in_ch * kTaps);
  const auto outs = static_cast<Eigen::Index>(s.out_ch);
  ws.columns.resize(static_cast<std::size_t>(taps * plane));
  im2col(in, s, ws.columns.data());

  ConstMatMap w(weights, outs, taps);
  ConstMatMap col(ws.columns.data(), taps, plane);
  MatMap y(out, outs, plane);
  y.noalias() = w * col;
  y.colwise() += ConstVecMap(bias, outs);
}

void conv3x3_backward(const double* in, const double* weights, const double* grad_out,
                      double* grad_in, double* grad_w, double* grad_b, const ConvShape& s,
                      Workspace& ws) {
  const auto plane = static_cast<Eigen::Index>(s.rows * s.cols);
  const auto taps = static_cast<Eigen::Index>(s.in_ch * kTaps);
  const auto outs = static_cast<Eigen::Index>(s.out_ch);
  ws.columns.resize(static_cast<std::size_t>(taps * plane));
  im2col(in, s, ws.columns.data());

  ConstMatMap col(ws.columns.data(), taps, plane);
  ConstMatMap gy(grad_out, outs, plane);
  MatMap gw(grad_w, outs, taps);
  gw.noalias() += gy * col.transpose();
  VecMap(grad_b, outs) += gy.rowwise().sum();

  if (grad_in != nullptr) {
    ws.grad_columns.resize(static_cast<std::size_t>(taps * plane));
    ConstMatMap w(weights, outs, taps);
    MatMap gcol(ws.grad_columns.data(), taps, plane);
    gcol.noalias() = w.transpose() * gy;
    col2im(ws.grad_columns.data(), s, grad_in);
  }
}

}  // namespace uwcsr::kernels::fast
