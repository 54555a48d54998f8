#include "dixon/nn/conv.hpp"

#include <Eigen/Core>

namespace dixon::nn {

namespace {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMatrix = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMapMatrix = Eigen::Map<const RowMatrix<T>>;

using Extent = std::array<int, 3>;

std::size_t volume_of(const Extent& e) {
  return static_cast<std::size_t>(e[0]) * static_cast<std::size_t>(e[1]) * static_cast<std::size_t>(e[2]);
}

// Range of output positions o with 0 <= o*s - p + k < n.
void valid_range(int n, int out, int s, int p, int k, int& lo, int& hi) {
  lo = 0;
  while (lo < out && lo * s - p + k < 0) ++lo;
  hi = out;
  while (hi > lo && (hi - 1) * s - p + k >= n) --hi;
}

// Unfolds every 4x4x4 patch of a (C, X, Y, Z) block into the columns of a
// (C * 64, OX * OY * OZ) row-major matrix.
template <typename T>
void vol2col(const T* src, int channels, const Extent& in, const Extent& out, int s, int p, T* cols) {
  const std::size_t in_block = volume_of(in);
  const std::size_t out_size = volume_of(out);
  for (int c = 0; c < channels; ++c) {
    const T* plane = src + static_cast<std::size_t>(c) * in_block;
    for (int kz = 0; kz < kKernel; ++kz) {
      for (int ky = 0; ky < kKernel; ++ky) {
        for (int kx = 0; kx < kKernel; ++kx) {
          T* row = cols + (((static_cast<std::size_t>(c) * kKernel + kz) * kKernel + ky) * kKernel + kx) * out_size;
          int xlo = 0;
          int xhi = 0;
          valid_range(in[0], out[0], s, p, kx, xlo, xhi);
          for (int oz = 0; oz < out[2]; ++oz) {
            const int iz = oz * s - p + kz;
            for (int oy = 0; oy < out[1]; ++oy) {
              const int iy = oy * s - p + ky;
              T* dst = row + (static_cast<std::size_t>(oz) * out[1] + oy) * out[0];
              if (iz < 0 || iz >= in[2] || iy < 0 || iy >= in[1]) {
                std::fill_n(dst, out[0], T(0));
                continue;
              }
              const T* line = plane + (static_cast<std::size_t>(iz) * in[1] + iy) * in[0];
              std::fill_n(dst, xlo, T(0));
              if (s == 1) {
                std::copy_n(line + (xlo - p + kx), xhi - xlo, dst + xlo);
              } else {
                for (int ox = xlo; ox < xhi; ++ox) dst[ox] = line[ox * s - p + kx];
              }
              std::fill(dst + xhi, dst + out[0], T(0));
            }
          }
        }
      }
    }
  }
}

// Adjoint of vol2col: scatter-adds columns back into a (C, X, Y, Z) block.
template <typename T>
void col2vol(const T* cols, int channels, const Extent& in, const Extent& out, int s, int p, T* dst) {
  const std::size_t in_block = volume_of(in);
  const std::size_t out_size = volume_of(out);
  for (int c = 0; c < channels; ++c) {
    T* plane = dst + static_cast<std::size_t>(c) * in_block;
    for (int kz = 0; kz < kKernel; ++kz) {
      for (int ky = 0; ky < kKernel; ++ky) {
        for (int kx = 0; kx < kKernel; ++kx) {
          const T* row =
              cols + (((static_cast<std::size_t>(c) * kKernel + kz) * kKernel + ky) * kKernel + kx) * out_size;
          int xlo = 0;
          int xhi = 0;
          valid_range(in[0], out[0], s, p, kx, xlo, xhi);
          for (int oz = 0; oz < out[2]; ++oz) {
            const int iz = oz * s - p + kz;
            if (iz < 0 || iz >= in[2]) continue;
            for (int oy = 0; oy < out[1]; ++oy) {
              const int iy = oy * s - p + ky;
              if (iy < 0 || iy >= in[1]) continue;
              const T* src = row + (static_cast<std::size_t>(oz) * out[1] + oy) * out[0];
              T* line = plane + (static_cast<std::size_t>(iz) * in[1] + iy) * in[0];
              for (int ox = xlo; ox < xhi; ++ox) line[ox * s - p + kx] += src[ox];
            }
          }
        }
      }
    }
  }
}

template <typename T>
void check_params(const ConvParams<T>& p, const char* what) {
  const Tensor<T>& w = p.weight.value();
  if (w.rank() != 5 || w.dim(2) != kKernel || w.dim(3) != kKernel || w.dim(4) != kKernel) {
    fail(ErrorCode::kShape, std::string(what) + ": weight must be (a, b, 4, 4, 4), got " + w.shape_string());
  }
  if (p.stride != 1 && p.stride != 2) {
    fail(ErrorCode::kConfig, std::string(what) + ": stride must be 1 or 2, got " + std::to_string(p.stride));
  }
  if (p.padding < 0) fail(ErrorCode::kConfig, std::string(what) + ": negative padding");
}

}  // namespace

int conv_output_extent(int n, int stride, int padding) {
  if (n + 2 * padding < kKernel) {
    fail(ErrorCode::kShape, "extent " + std::to_string(n) + " with padding " + std::to_string(padding) +
                                " is smaller than the kernel");
  }
  return (n + 2 * padding - kKernel) / stride + 1;
}

int conv_transpose_output_extent(int n, int stride, int padding) {
  const int out = (n - 1) * stride - 2 * padding + kKernel;
  if (out <= 0) fail(ErrorCode::kShape, "transpose convolution output would be empty");
  return out;
}

template <typename T>
Var<T> conv3d(const Var<T>& input, const ConvParams<T>& p) {
  check_params(p, "conv3d");
  const Tensor<T>& x = input.value();
  require_rank5(x, "conv3d");
  const Tensor<T>& w = p.weight.value();
  const int out_ch = w.dim(0);
  const int in_ch = w.dim(1);
  if (x.channels() != in_ch) {
    fail(ErrorCode::kShape, "conv3d: input has " + std::to_string(x.channels()) + " channels, weight expects " +
                                std::to_string(in_ch));
  }
  if (p.bias.value().size() != static_cast<std::size_t>(out_ch)) {
    fail(ErrorCode::kShape, "conv3d: bias length must be " + std::to_string(out_ch));
  }
  const Extent in = x.spatial();
  const Extent out = {conv_output_extent(in[0], p.stride, p.padding), conv_output_extent(in[1], p.stride, p.padding),
                      conv_output_extent(in[2], p.stride, p.padding)};
  const int batch = x.batch();
  const std::size_t in_block = volume_of(in) * static_cast<std::size_t>(in_ch);
  const std::size_t positions = volume_of(out);
  const Eigen::Index rows = static_cast<Eigen::Index>(in_ch) * kKernel * kKernel * kKernel;

  Tensor<T> y({batch, out_ch, out[0], out[1], out[2]});
  const bool keep_cols = grad_mode_enabled() && p.weight.requires_grad();
  std::vector<AlignedVector<T>> saved(keep_cols ? static_cast<std::size_t>(batch) : 0);
  AlignedVector<T> cols(static_cast<std::size_t>(rows) * positions);
  ConstMapMatrix<T> wm(w.data(), out_ch, rows);
  const T* bias = p.bias.value().data();
  for (int b = 0; b < batch; ++b) {
    vol2col(x.data() + static_cast<std::size_t>(b) * in_block, in_ch, in, out, p.stride, p.padding, cols.data());
    MapMatrix<T> ym(y.data() + static_cast<std::size_t>(b) * out_ch * positions, out_ch,
                    static_cast<Eigen::Index>(positions));
    ConstMapMatrix<T> cm(cols.data(), rows, static_cast<Eigen::Index>(positions));
    ym.noalias() = wm * cm;
    for (int o = 0; o < out_ch; ++o) ym.row(o).array() += bias[o];
    if (keep_cols) saved[static_cast<std::size_t>(b)] = cols;
  }

  const int stride = p.stride;
  const int padding = p.padding;
  return make_op<T>(
      std::move(y), {input, p.weight, p.bias},
      [saved = std::move(saved), in, out, stride, padding, in_ch, out_ch, rows, positions, in_block](Node<T>& self) {
        Node<T>& px = *self.parents[0];
        Node<T>& pw = *self.parents[1];
        Node<T>& pb = *self.parents[2];
        const int batch = self.value.batch();
        ConstMapMatrix<T> wm(pw.value.data(), out_ch, rows);
        AlignedVector<T> dcols;
        if (px.requires_grad) dcols.resize(static_cast<std::size_t>(rows) * positions);
        for (int b = 0; b < batch; ++b) {
          ConstMapMatrix<T> dy(self.grad.data() + static_cast<std::size_t>(b) * out_ch * positions, out_ch,
                               static_cast<Eigen::Index>(positions));
          if (pb.requires_grad) {
            T* gb = pb.grad_buffer().data();
            for (int o = 0; o < out_ch; ++o) gb[o] += dy.row(o).sum();
          }
          if (pw.requires_grad && !saved.empty()) {
            MapMatrix<T> gw(pw.grad_buffer().data(), out_ch, rows);
            ConstMapMatrix<T> cm(saved[static_cast<std::size_t>(b)].data(), rows,
                                 static_cast<Eigen::Index>(positions));
            gw.noalias() += dy * cm.transpose();
          }
          if (px.requires_grad) {
            MapMatrix<T> dc(dcols.data(), rows, static_cast<Eigen::Index>(positions));
            dc.noalias() = wm.transpose() * dy;
            col2vol(dcols.data(), in_ch, in, out, stride, padding,
                    px.grad_buffer().data() + static_cast<std::size_t>(b) * in_block);
          }
        }
      });
}

template <typename T>
Var<T> conv_transpose3d(const Var<T>& input, const ConvParams<T>& p) {
  check_params(p, "conv_transpose3d");
  const Tensor<T>& x = input.value();
  require_rank5(x, "conv_transpose3d");
  const Tensor<T>& w = p.weight.value();
  const int in_ch = w.dim(0);
  const int out_ch = w.dim(1);
  if (x.channels() != in_ch) {
    fail(ErrorCode::kShape, "conv_transpose3d: input has " + std::to_string(x.channels()) +
                                " channels, weight expects " + std::to_string(in_ch));
  }
  if (p.bias.value().size() != static_cast<std::size_t>(out_ch)) {
    fail(ErrorCode::kShape, "conv_transpose3d: bias length must be " + std::to_string(out_ch));
  }
  // `grid` is the input lattice; `full` the upsampled output lattice.
  const Extent grid = x.spatial();
  const Extent full = {conv_transpose_output_extent(grid[0], p.stride, p.padding),
                       conv_transpose_output_extent(grid[1], p.stride, p.padding),
                       conv_transpose_output_extent(grid[2], p.stride, p.padding)};
  const int batch = x.batch();
  const std::size_t positions = volume_of(grid);
  const std::size_t out_block = volume_of(full) * static_cast<std::size_t>(out_ch);
  const Eigen::Index rows = static_cast<Eigen::Index>(out_ch) * kKernel * kKernel * kKernel;

  Tensor<T> y({batch, out_ch, full[0], full[1], full[2]});
  AlignedVector<T> cols(static_cast<std::size_t>(rows) * positions);
  ConstMapMatrix<T> wm(w.data(), in_ch, rows);
  for (int b = 0; b < batch; ++b) {
    ConstMapMatrix<T> xm(x.data() + static_cast<std::size_t>(b) * in_ch * positions, in_ch,
                         static_cast<Eigen::Index>(positions));
    MapMatrix<T> cm(cols.data(), rows, static_cast<Eigen::Index>(positions));
    cm.noalias() = wm.transpose() * xm;
    T* dst = y.data() + static_cast<std::size_t>(b) * out_block;
    col2vol(cols.data(), out_ch, full, grid, p.stride, p.padding, dst);
    const std::size_t block = volume_of(full);
    for (int o = 0; o < out_ch; ++o) {
      const T bo = p.bias.value()[static_cast<std::size_t>(o)];
      T* plane = dst + static_cast<std::size_t>(o) * block;
      for (std::size_t n = 0; n < block; ++n) plane[n] += bo;
    }
  }

  const int stride = p.stride;
  const int padding = p.padding;
  return make_op<T>(
      std::move(y), {input, p.weight, p.bias},
      [grid, full, stride, padding, in_ch, out_ch, rows, positions, out_block](Node<T>& self) {
        Node<T>& px = *self.parents[0];
        Node<T>& pw = *self.parents[1];
        Node<T>& pb = *self.parents[2];
        const int batch = self.value.batch();
        const std::size_t block = volume_of(full);
        ConstMapMatrix<T> wm(pw.value.data(), in_ch, rows);
        AlignedVector<T> dcols(static_cast<std::size_t>(rows) * positions);
        for (int b = 0; b < batch; ++b) {
          const T* dy = self.grad.data() + static_cast<std::size_t>(b) * out_block;
          if (pb.requires_grad) {
            T* gb = pb.grad_buffer().data();
            for (int o = 0; o < out_ch; ++o) {
              double s = 0.0;
              const T* plane = dy + static_cast<std::size_t>(o) * block;
              for (std::size_t n = 0; n < block; ++n) s += plane[n];
              gb[o] += static_cast<T>(s);
            }
          }
          if (!pw.requires_grad && !px.requires_grad) continue;
          vol2col(dy, out_ch, full, grid, stride, padding, dcols.data());
          ConstMapMatrix<T> dc(dcols.data(), rows, static_cast<Eigen::Index>(positions));
          if (pw.requires_grad) {
            ConstMapMatrix<T> xm(px.value.data() + static_cast<std::size_t>(b) * in_ch * positions, in_ch,
                                 static_cast<Eigen::Index>(positions));
            MapMatrix<T> gw(pw.grad_buffer().data(), in_ch, rows);
            gw.noalias() += xm * dc.transpose();
          }
          if (px.requires_grad) {
            MapMatrix<T> gx(px.grad_buffer().data() + static_cast<std::size_t>(b) * in_ch * positions, in_ch,
                            static_cast<Eigen::Index>(positions));
            gx.noalias() += wm * dc;
          }
        }
      });
}

template Var<float> conv3d<float>(const Var<float>&, const ConvParams<float>&);
template Var<double> conv3d<double>(const Var<double>&, const ConvParams<double>&);
template Var<float> conv_transpose3d<float>(const Var<float>&, const ConvParams<float>&);
template Var<double> conv_transpose3d<double>(const Var<double>&, const ConvParams<double>&);

}  // namespace dixon::nn
