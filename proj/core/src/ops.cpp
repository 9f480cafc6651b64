#include "spnet/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gemm.hpp"
#include "spnet/error.hpp"

namespace spnet::ops {

namespace {

template <typename T>
void require_same_shape(const BasicTensor<T>& a, const BasicTensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw InvalidShapeError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) +
                            " vs " + shape_to_string(b.shape()));
  }
}

// col[(c*k + dy)*k + dx][y*W + x] = input[c][y + dy - pad][x + dx - pad]
template <typename T>
void im2col(const T* input, std::size_t channels, std::size_t h, std::size_t w, std::size_t k,
            T* col) {
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(k / 2);
  const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(h);
  const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(w);
  for (std::size_t c = 0; c < channels; ++c) {
    const T* plane = input + c * h * w;
    for (std::size_t dy = 0; dy < k; ++dy) {
      for (std::size_t dx = 0; dx < k; ++dx) {
        T* row = col + ((c * k + dy) * k + dx) * h * w;
        const std::ptrdiff_t oy = static_cast<std::ptrdiff_t>(dy) - pad;
        const std::ptrdiff_t ox = static_cast<std::ptrdiff_t>(dx) - pad;
        for (std::ptrdiff_t y = 0; y < ih; ++y) {
          T* dst = row + y * iw;
          const std::ptrdiff_t sy = y + oy;
          if (sy < 0 || sy >= ih) {
            std::fill(dst, dst + iw, T(0));
            continue;
          }
          const T* src = plane + sy * iw;
          const std::ptrdiff_t x0 = std::max<std::ptrdiff_t>(0, -ox);
          const std::ptrdiff_t x1 = std::min<std::ptrdiff_t>(iw, iw - ox);
          std::fill(dst, dst + x0, T(0));
          for (std::ptrdiff_t x = x0; x < x1; ++x) dst[x] = src[x + ox];
          std::fill(dst + x1, dst + iw, T(0));
        }
      }
    }
  }
}

// Adjoint of im2col.
template <typename T>
void col2im(const T* col, std::size_t channels, std::size_t h, std::size_t w, std::size_t k,
            T* output) {
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(k / 2);
  const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(h);
  const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(w);
  std::fill(output, output + channels * h * w, T(0));
  for (std::size_t c = 0; c < channels; ++c) {
    T* plane = output + c * h * w;
    for (std::size_t dy = 0; dy < k; ++dy) {
      for (std::size_t dx = 0; dx < k; ++dx) {
        const T* row = col + ((c * k + dy) * k + dx) * h * w;
        const std::ptrdiff_t oy = static_cast<std::ptrdiff_t>(dy) - pad;
        const std::ptrdiff_t ox = static_cast<std::ptrdiff_t>(dx) - pad;
        for (std::ptrdiff_t y = 0; y < ih; ++y) {
          const std::ptrdiff_t sy = y + oy;
          if (sy < 0 || sy >= ih) continue;
          const T* src = row + y * iw;
          T* dst = plane + sy * iw;
          const std::ptrdiff_t x0 = std::max<std::ptrdiff_t>(0, -ox);
          const std::ptrdiff_t x1 = std::min<std::ptrdiff_t>(iw, iw - ox);
          for (std::ptrdiff_t x = x0; x < x1; ++x) dst[x + ox] += src[x];
        }
      }
    }
  }
}

struct ConvDims {
  std::size_t n, ci, h, w, co, k;
};

template <typename T>
ConvDims check_conv(const BasicTensor<T>& input, const BasicTensor<T>& weights) {
  require_rank4(input, "conv2d input");
  require_rank4(weights, "conv2d weights");
  const std::size_t k = weights.dim(2);
  if (weights.dim(3) != k || k % 2 == 0) {
    throw InvalidShapeError("conv2d: kernel must be square and odd, got " +
                            shape_to_string(weights.shape()));
  }
  if (weights.dim(1) != input.dim(1)) {
    throw InvalidShapeError("conv2d: input has " + std::to_string(input.dim(1)) +
                            " channels but weights expect " + std::to_string(weights.dim(1)));
  }
  return {input.dim(0), input.dim(1), input.dim(2), input.dim(3), weights.dim(0), k};
}

template <typename T>
void check_bias(const BasicTensor<T>& bias, std::size_t channels, const char* op) {
  if (bias.rank() != 1 || bias.dim(0) != channels) {
    throw InvalidShapeError(std::string(op) + ": bias shape " + shape_to_string(bias.shape()) +
                            " does not match " + std::to_string(channels) + " output channels");
  }
}

// The 3x3 transposed convolution maps input (y, x) through tap (dy, dx) to
// output (2y + dy - 1, 2x + dx - 1).
template <typename T>
void scatter_stride2(const T* col, std::size_t channels, std::size_t h, std::size_t w, T* out) {
  const std::size_t oh = 2 * h;
  const std::size_t ow = 2 * w;
  for (std::size_t o = 0; o < channels; ++o) {
    T* plane = out + o * oh * ow;
    for (std::size_t dy = 0; dy < 3; ++dy) {
      for (std::size_t dx = 0; dx < 3; ++dx) {
        const T* row = col + ((o * 3 + dy) * 3 + dx) * h * w;
        for (std::size_t y = 0; y < h; ++y) {
          const std::ptrdiff_t ty = static_cast<std::ptrdiff_t>(2 * y + dy) - 1;
          if (ty < 0 || ty >= static_cast<std::ptrdiff_t>(oh)) continue;
          for (std::size_t x = 0; x < w; ++x) {
            const std::ptrdiff_t tx = static_cast<std::ptrdiff_t>(2 * x + dx) - 1;
            if (tx < 0 || tx >= static_cast<std::ptrdiff_t>(ow)) continue;
            plane[ty * static_cast<std::ptrdiff_t>(ow) + tx] += row[y * w + x];
          }
        }
      }
    }
  }
}

// Adjoint of scatter_stride2.
template <typename T>
void gather_stride2(const T* grad_out, std::size_t channels, std::size_t h, std::size_t w,
                    T* col) {
  const std::size_t oh = 2 * h;
  const std::size_t ow = 2 * w;
  for (std::size_t o = 0; o < channels; ++o) {
    const T* plane = grad_out + o * oh * ow;
    for (std::size_t dy = 0; dy < 3; ++dy) {
      for (std::size_t dx = 0; dx < 3; ++dx) {
        T* row = col + ((o * 3 + dy) * 3 + dx) * h * w;
        for (std::size_t y = 0; y < h; ++y) {
          const std::ptrdiff_t ty = static_cast<std::ptrdiff_t>(2 * y + dy) - 1;
          for (std::size_t x = 0; x < w; ++x) {
            const std::ptrdiff_t tx = static_cast<std::ptrdiff_t>(2 * x + dx) - 1;
            const bool inside = ty >= 0 && ty < static_cast<std::ptrdiff_t>(oh) && tx >= 0 &&
                                tx < static_cast<std::ptrdiff_t>(ow);
            row[y * w + x] = inside ? plane[ty * static_cast<std::ptrdiff_t>(ow) + tx] : T(0);
          }
        }
      }
    }
  }
}

template <typename T>
void add_bias(BasicTensor<T>& out, const BasicTensor<T>& bias) {
  const std::size_t n = out.dim(0), c = out.dim(1), plane = out.dim(2) * out.dim(3);
  T* p = out.ptr();
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t o = 0; o < c; ++o) {
      T* dst = p + (b * c + o) * plane;
      for (std::size_t i = 0; i < plane; ++i) dst[i] += bias[o];
    }
  }
}

template <typename T>
BasicTensor<T> bias_grad(const BasicTensor<T>& grad_out) {
  const std::size_t n = grad_out.dim(0), c = grad_out.dim(1);
  const std::size_t plane = grad_out.dim(2) * grad_out.dim(3);
  BasicTensor<T> db({c});
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t o = 0; o < c; ++o) {
      const T* src = grad_out.ptr() + (b * c + o) * plane;
      T s = T(0);
      for (std::size_t i = 0; i < plane; ++i) s += src[i];
      db[o] += s;
    }
  }
  return db;
}

}  // namespace

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                      const BasicTensor<T>& bias) {
  const ConvDims d = check_conv(input, weights);
  check_bias(bias, d.co, "conv2d");
  const std::size_t plane = d.h * d.w;
  const std::size_t kdim = d.ci * d.k * d.k;
  BasicTensor<T> out({d.n, d.co, d.h, d.w});
  std::vector<T> col(d.k == 1 ? 0 : kdim * plane);
  for (std::size_t b = 0; b < d.n; ++b) {
    const T* in = input.ptr() + b * d.ci * plane;
    const T* rhs = in;
    if (d.k != 1) {
      im2col(in, d.ci, d.h, d.w, d.k, col.data());
      rhs = col.data();
    }
    detail::gemm(d.co, plane, kdim, weights.ptr(), kdim, rhs, plane,
                 out.ptr() + b * d.co * plane, plane, false);
  }
  add_bias(out, bias);
  return out;
}

template <typename T>
ConvGrads<T> conv2d_backward(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                             const BasicTensor<T>& grad_out) {
  const ConvDims d = check_conv(input, weights);
  require_rank4(grad_out, "conv2d grad");
  if (grad_out.shape() != Shape{d.n, d.co, d.h, d.w}) {
    throw InvalidShapeError("conv2d_backward: unexpected gradient shape " +
                            shape_to_string(grad_out.shape()));
  }
  const std::size_t plane = d.h * d.w;
  const std::size_t kdim = d.ci * d.k * d.k;
  ConvGrads<T> g{BasicTensor<T>(input.shape()), BasicTensor<T>(weights.shape()),
                 bias_grad(grad_out)};

  std::vector<T> col(kdim * plane);
  std::vector<T> col_t(plane * kdim);
  std::vector<T> w_t(kdim * d.co);
  detail::transpose(d.co, kdim, weights.ptr(), w_t.data());

  for (std::size_t b = 0; b < d.n; ++b) {
    const T* in = input.ptr() + b * d.ci * plane;
    const T* dout = grad_out.ptr() + b * d.co * plane;
    // dW += dOut * col^T
    if (d.k == 1) {
      detail::transpose(kdim, plane, in, col_t.data());
    } else {
      im2col(in, d.ci, d.h, d.w, d.k, col.data());
      detail::transpose(kdim, plane, col.data(), col_t.data());
    }
    detail::gemm(d.co, kdim, plane, dout, plane, col_t.data(), kdim, g.weight.ptr(), kdim, true);
    // dCol = W^T * dOut
    T* din = g.input.ptr() + b * d.ci * plane;
    if (d.k == 1) {
      detail::gemm(kdim, plane, d.co, w_t.data(), d.co, dout, plane, din, plane, false);
    } else {
      detail::gemm(kdim, plane, d.co, w_t.data(), d.co, dout, plane, col.data(), plane, false);
      col2im(col.data(), d.ci, d.h, d.w, d.k, din);
    }
  }
  return g;
}

template <typename T>
BasicTensor<T> transposed_conv2d(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                                 const BasicTensor<T>& bias) {
  require_rank4(input, "transposed_conv2d input");
  require_rank4(weights, "transposed_conv2d weights");
  if (weights.dim(2) != 3 || weights.dim(3) != 3) {
    throw InvalidShapeError("transposed_conv2d: kernel must be 3x3, got " +
                            shape_to_string(weights.shape()));
  }
  if (weights.dim(0) != input.dim(1)) {
    throw InvalidShapeError("transposed_conv2d: input has " + std::to_string(input.dim(1)) +
                            " channels but weights expect " + std::to_string(weights.dim(0)));
  }
  const std::size_t n = input.dim(0), ci = input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::size_t co = weights.dim(1);
  check_bias(bias, co, "transposed_conv2d");
  const std::size_t plane = h * w;
  const std::size_t kdim = co * 9;

  std::vector<T> w_t(kdim * ci);
  detail::transpose(ci, kdim, weights.ptr(), w_t.data());
  std::vector<T> col(kdim * plane);
  BasicTensor<T> out({n, co, 2 * h, 2 * w});
  for (std::size_t b = 0; b < n; ++b) {
    detail::gemm(kdim, plane, ci, w_t.data(), ci, input.ptr() + b * ci * plane, plane, col.data(),
                 plane, false);
    scatter_stride2(col.data(), co, h, w, out.ptr() + b * co * 4 * plane);
  }
  add_bias(out, bias);
  return out;
}

template <typename T>
ConvGrads<T> transposed_conv2d_backward(const BasicTensor<T>& input,
                                        const BasicTensor<T>& weights,
                                        const BasicTensor<T>& grad_out) {
  require_rank4(input, "transposed_conv2d input");
  require_rank4(grad_out, "transposed_conv2d grad");
  const std::size_t n = input.dim(0), ci = input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::size_t co = weights.dim(1);
  if (weights.dim(0) != ci || grad_out.shape() != Shape{n, co, 2 * h, 2 * w}) {
    throw InvalidShapeError("transposed_conv2d_backward: inconsistent shapes");
  }
  const std::size_t plane = h * w;
  const std::size_t kdim = co * 9;
  ConvGrads<T> g{BasicTensor<T>(input.shape()), BasicTensor<T>(weights.shape()),
                 bias_grad(grad_out)};
  std::vector<T> col(kdim * plane);
  std::vector<T> col_t(plane * kdim);
  for (std::size_t b = 0; b < n; ++b) {
    gather_stride2(grad_out.ptr() + b * co * 4 * plane, co, h, w, col.data());
    const T* in = input.ptr() + b * ci * plane;
    detail::gemm(ci, plane, kdim, weights.ptr(), kdim, col.data(), plane,
                 g.input.ptr() + b * ci * plane, plane, false);
    detail::transpose(kdim, plane, col.data(), col_t.data());
    detail::gemm(ci, kdim, plane, in, plane, col_t.data(), kdim, g.weight.ptr(), kdim, true);
  }
  return g;
}

template <typename T>
PoolResult<T> maxpool2d(const BasicTensor<T>& input) {
  require_rank4(input, "maxpool2d");
  const std::size_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  if (h % 2 != 0 || w % 2 != 0) {
    throw InvalidShapeError("maxpool2d: spatial size must be even, got " +
                            shape_to_string(input.shape()));
  }
  const std::size_t oh = h / 2, ow = w / 2;
  PoolResult<T> r{BasicTensor<T>({n, c, oh, ow}), std::vector<std::uint32_t>(n * c * oh * ow)};
  std::size_t o = 0;
  for (std::size_t p = 0; p < n * c; ++p) {
    const std::size_t base = p * h * w;
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x, ++o) {
        const std::size_t cand[4] = {base + 2 * y * w + 2 * x, base + 2 * y * w + 2 * x + 1,
                                     base + (2 * y + 1) * w + 2 * x,
                                     base + (2 * y + 1) * w + 2 * x + 1};
        std::size_t best = cand[0];
        for (int i = 1; i < 4; ++i) {
          if (input[cand[i]] > input[best]) best = cand[i];
        }
        r.output[o] = input[best];
        r.argmax[o] = static_cast<std::uint32_t>(best);
      }
    }
  }
  return r;
}

template <typename T>
BasicTensor<T> maxpool2d_backward(const Shape& input_shape, const std::vector<std::uint32_t>& argmax,
                                  const BasicTensor<T>& grad_out) {
  if (argmax.size() != grad_out.size()) {
    throw InvalidShapeError("maxpool2d_backward: index map does not match gradient");
  }
  BasicTensor<T> g(input_shape);
  for (std::size_t i = 0; i < argmax.size(); ++i) g[argmax[i]] += grad_out[i];
  return g;
}

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& input) {
  BasicTensor<T> out(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) out[i] = input[i] > T(0) ? input[i] : T(0);
  return out;
}

template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& input, const BasicTensor<T>& grad_out) {
  require_same_shape(input, grad_out, "relu_backward");
  BasicTensor<T> g(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) g[i] = input[i] > T(0) ? grad_out[i] : T(0);
  return g;
}

template <typename T>
BasicTensor<T> sigmoid(const BasicTensor<T>& input) {
  BasicTensor<T> out(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) {
    const T x = input[i];
    if (x >= T(0)) {
      out[i] = T(1) / (T(1) + std::exp(-x));
    } else {
      const T e = std::exp(x);
      out[i] = e / (T(1) + e);
    }
  }
  return out;
}

template <typename T>
BasicTensor<T> sigmoid_backward(const BasicTensor<T>& output, const BasicTensor<T>& grad_out) {
  require_same_shape(output, grad_out, "sigmoid_backward");
  BasicTensor<T> g(output.shape());
  for (std::size_t i = 0; i < output.size(); ++i) {
    g[i] = grad_out[i] * output[i] * (T(1) - output[i]);
  }
  return g;
}

template <typename T>
BasicTensor<T> dense(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                     const BasicTensor<T>& bias) {
  if (input.rank() != 2 || weights.rank() != 2 || weights.dim(0) != input.dim(1)) {
    throw InvalidShapeError("dense: cannot apply weights " + shape_to_string(weights.shape()) +
                            " to input " + shape_to_string(input.shape()));
  }
  const std::size_t n = input.dim(0), f = input.dim(1), g = weights.dim(1);
  check_bias(bias, g, "dense");
  BasicTensor<T> out({n, g});
  detail::gemm(n, g, f, input.ptr(), f, weights.ptr(), g, out.ptr(), g, false);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < g; ++j) out[r * g + j] += bias[j];
  }
  return out;
}

template <typename T>
ConvGrads<T> dense_backward(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                            const BasicTensor<T>& grad_out) {
  const std::size_t n = input.dim(0), f = input.dim(1), g = weights.dim(1);
  if (grad_out.shape() != Shape{n, g} || weights.dim(0) != f) {
    throw InvalidShapeError("dense_backward: inconsistent shapes");
  }
  ConvGrads<T> r{BasicTensor<T>(input.shape()), BasicTensor<T>(weights.shape()),
                 BasicTensor<T>({g})};
  // dW = in^T * dOut
  std::vector<T> in_t(f * n);
  detail::transpose(n, f, input.ptr(), in_t.data());
  detail::gemm(f, g, n, in_t.data(), n, grad_out.ptr(), g, r.weight.ptr(), g, false);
  // dIn = dOut * W^T
  std::vector<T> w_t(g * f);
  detail::transpose(f, g, weights.ptr(), w_t.data());
  detail::gemm(n, f, g, grad_out.ptr(), g, w_t.data(), f, r.input.ptr(), f, false);
  for (std::size_t row = 0; row < n; ++row) {
    for (std::size_t j = 0; j < g; ++j) r.bias[j] += grad_out[row * g + j];
  }
  return r;
}

template <typename T>
BasicTensor<T> concat_channels(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_rank4(a, "concat_channels");
  require_rank4(b, "concat_channels");
  if (a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3)) {
    throw InvalidShapeError("concat_channels: cannot join " + shape_to_string(a.shape()) +
                            " and " + shape_to_string(b.shape()));
  }
  const std::size_t n = a.dim(0), ca = a.dim(1), cb = b.dim(1), plane = a.dim(2) * a.dim(3);
  BasicTensor<T> out({n, ca + cb, a.dim(2), a.dim(3)});
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(a.ptr() + i * ca * plane, ca * plane, out.ptr() + i * (ca + cb) * plane);
    std::copy_n(b.ptr() + i * cb * plane, cb * plane,
                out.ptr() + (i * (ca + cb) + ca) * plane);
  }
  return out;
}

template <typename T>
std::pair<BasicTensor<T>, BasicTensor<T>> split_channels(const BasicTensor<T>& grad,
                                                         std::size_t channels_a) {
  require_rank4(grad, "split_channels");
  const std::size_t n = grad.dim(0), c = grad.dim(1), plane = grad.dim(2) * grad.dim(3);
  if (channels_a == 0 || channels_a >= c) {
    throw InvalidShapeError("split_channels: invalid split point " + std::to_string(channels_a));
  }
  const std::size_t cb = c - channels_a;
  BasicTensor<T> a({n, channels_a, grad.dim(2), grad.dim(3)});
  BasicTensor<T> b({n, cb, grad.dim(2), grad.dim(3)});
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(grad.ptr() + i * c * plane, channels_a * plane, a.ptr() + i * channels_a * plane);
    std::copy_n(grad.ptr() + (i * c + channels_a) * plane, cb * plane, b.ptr() + i * cb * plane);
  }
  return {std::move(a), std::move(b)};
}

template <typename T>
BasicTensor<T> upsample_nearest2x(const BasicTensor<T>& input) {
  require_rank4(input, "upsample_nearest2x");
  const std::size_t planes = input.dim(0) * input.dim(1), h = input.dim(2), w = input.dim(3);
  BasicTensor<T> out({input.dim(0), input.dim(1), 2 * h, 2 * w});
  for (std::size_t p = 0; p < planes; ++p) {
    const T* src = input.ptr() + p * h * w;
    T* dst = out.ptr() + p * 4 * h * w;
    for (std::size_t y = 0; y < 2 * h; ++y) {
      for (std::size_t x = 0; x < 2 * w; ++x) dst[y * 2 * w + x] = src[(y / 2) * w + x / 2];
    }
  }
  return out;
}

template <typename T>
BasicTensor<T> upsample_nearest2x_backward(const BasicTensor<T>& grad_out) {
  require_rank4(grad_out, "upsample_nearest2x_backward");
  const std::size_t oh = grad_out.dim(2), ow = grad_out.dim(3);
  if (oh % 2 != 0 || ow % 2 != 0) {
    throw InvalidShapeError("upsample_nearest2x_backward: odd gradient size");
  }
  const std::size_t planes = grad_out.dim(0) * grad_out.dim(1), h = oh / 2, w = ow / 2;
  BasicTensor<T> g({grad_out.dim(0), grad_out.dim(1), h, w});
  for (std::size_t p = 0; p < planes; ++p) {
    const T* src = grad_out.ptr() + p * oh * ow;
    T* dst = g.ptr() + p * h * w;
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        const T* s = src + 2 * y * ow + 2 * x;
        dst[y * w + x] = (s[0] + s[1]) + (s[ow] + s[ow + 1]);
      }
    }
  }
  return g;
}

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_same_shape(a, b, "add");
  BasicTensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

template <typename T>
LossValue<T> bce_loss(const BasicTensor<T>& pred, const BasicTensor<T>& gt) {
  require_same_shape(pred, gt, "bce_loss");
  const T eps = static_cast<T>(kBceEpsilon);
  const T count = static_cast<T>(pred.size());
  LossValue<T> r{T(0), BasicTensor<T>(pred.shape())};
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const T p = std::clamp(pred[i], eps, T(1) - eps);
    const T y = gt[i];
    sum += static_cast<double>(y) * std::log(static_cast<double>(p)) +
           (1.0 - static_cast<double>(y)) * std::log1p(-static_cast<double>(p));
    r.grad[i] = -(y / p - (T(1) - y) / (T(1) - p)) / count;
  }
  // Clamping keeps every log finite; max(0, .) removes a -0.0 for perfect predictions.
  r.value = static_cast<T>(std::max(0.0, -sum / static_cast<double>(pred.size())));
  return r;
}

template <typename T>
BasicTensor<T> bce_logit_grad(const BasicTensor<T>& probabilities, const BasicTensor<T>& gt) {
  require_same_shape(probabilities, gt, "bce_logit_grad");
  const T count = static_cast<T>(probabilities.size());
  BasicTensor<T> g(probabilities.shape());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = (probabilities[i] - gt[i]) / count;
  return g;
}

template <typename T>
LossValue<T> mse_loss(const BasicTensor<T>& pred, const BasicTensor<T>& gt) {
  require_same_shape(pred, gt, "mse_loss");
  if (pred.rank() != 2 || pred.dim(1) != 2) {
    throw InvalidShapeError("mse_loss: expected [n, 2] coordinates, got " +
                            shape_to_string(pred.shape()));
  }
  const std::size_t n = pred.dim(0);
  LossValue<T> r{T(0), BasicTensor<T>(pred.shape())};
  T sum = T(0);
  for (std::size_t i = 0; i < n; ++i) {
    const T dx = pred[2 * i] - gt[2 * i];
    const T dy = pred[2 * i + 1] - gt[2 * i + 1];
    sum += dx * dx + dy * dy;
    r.grad[2 * i] = T(2) * dx / static_cast<T>(n);
    r.grad[2 * i + 1] = T(2) * dy / static_cast<T>(n);
  }
  r.value = sum / static_cast<T>(n);
  return r;
}

#define SPNET_INSTANTIATE_OPS(T)                                                                 \
  template BasicTensor<T> conv2d(const BasicTensor<T>&, const BasicTensor<T>&,                   \
                                 const BasicTensor<T>&);                                         \
  template ConvGrads<T> conv2d_backward(const BasicTensor<T>&, const BasicTensor<T>&,            \
                                        const BasicTensor<T>&);                                  \
  template BasicTensor<T> transposed_conv2d(const BasicTensor<T>&, const BasicTensor<T>&,        \
                                            const BasicTensor<T>&);                              \
  template ConvGrads<T> transposed_conv2d_backward(const BasicTensor<T>&, const BasicTensor<T>&, \
                                                   const BasicTensor<T>&);                       \
  template PoolResult<T> maxpool2d(const BasicTensor<T>&);                                       \
  template BasicTensor<T> maxpool2d_backward(const Shape&, const std::vector<std::uint32_t>&,    \
                                             const BasicTensor<T>&);                             \
  template BasicTensor<T> relu(const BasicTensor<T>&);                                           \
  template BasicTensor<T> relu_backward(const BasicTensor<T>&, const BasicTensor<T>&);           \
  template BasicTensor<T> sigmoid(const BasicTensor<T>&);                                        \
  template BasicTensor<T> sigmoid_backward(const BasicTensor<T>&, const BasicTensor<T>&);        \
  template BasicTensor<T> dense(const BasicTensor<T>&, const BasicTensor<T>&,                    \
                                const BasicTensor<T>&);                                          \
  template ConvGrads<T> dense_backward(const BasicTensor<T>&, const BasicTensor<T>&,             \
                                       const BasicTensor<T>&);                                   \
  template BasicTensor<T> concat_channels(const BasicTensor<T>&, const BasicTensor<T>&);         \
  template std::pair<BasicTensor<T>, BasicTensor<T>> split_channels(const BasicTensor<T>&,       \
                                                                    std::size_t);                \
  template BasicTensor<T> upsample_nearest2x(const BasicTensor<T>&);                             \
  template BasicTensor<T> upsample_nearest2x_backward(const BasicTensor<T>&);                    \
  template BasicTensor<T> add(const BasicTensor<T>&, const BasicTensor<T>&);                     \
  template LossValue<T> bce_loss(const BasicTensor<T>&, const BasicTensor<T>&);                  \
  template BasicTensor<T> bce_logit_grad(const BasicTensor<T>&, const BasicTensor<T>&);          \
  template LossValue<T> mse_loss(const BasicTensor<T>&, const BasicTensor<T>&);

SPNET_INSTANTIATE_OPS(float)
SPNET_INSTANTIATE_OPS(double)

#undef SPNET_INSTANTIATE_OPS

}  // namespace spnet::ops
