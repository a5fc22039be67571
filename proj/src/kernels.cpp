#include "sslab/kernels.hpp"

#include <algorithm>
#include <cstddef>

namespace sslab::kernels {
namespace {

using Index = std::ptrdiff_t;

// Output positions o in [lo, hi) whose input coordinate o*stride + k - pad
// falls inside [0, in_len).
struct ValidRange {
  Index lo;
  Index hi;
};

ValidRange valid_outputs(Index out_len, Index in_len, Index k, Index stride, Index pad) {
  Index lo = 0;
  if (pad > k) lo = (pad - k + stride - 1) / stride;
  Index hi = 0;
  const Index last = in_len - 1 + pad - k;
  if (last >= 0) hi = last / stride + 1;
  hi = std::min(hi, out_len);
  lo = std::min(lo, hi);
  return {lo, hi};
}

}  // namespace

void conv2d_forward(const ConvGeometry& g, std::span<const double> input, std::span<const double> weight,
                    std::span<const double> bias, std::span<double> output) {
  const Index N = static_cast<Index>(g.batch), C = static_cast<Index>(g.in_channels);
  const Index H = static_cast<Index>(g.in_h), W = static_cast<Index>(g.in_w);
  const Index O = static_cast<Index>(g.out_channels), KH = static_cast<Index>(g.kernel_h),
              KW = static_cast<Index>(g.kernel_w);
  const Index S = static_cast<Index>(g.stride), P = static_cast<Index>(g.pad);
  const Index OH = static_cast<Index>(g.out_h()), OW = static_cast<Index>(g.out_w());
  const double* x = input.data();
  const double* w = weight.data();
  double* y = output.data();
  const bool has_bias = !bias.empty();

#pragma omp parallel for collapse(2) schedule(static)
  for (Index n = 0; n < N; ++n) {
    for (Index o = 0; o < O; ++o) {
      double* out = y + (n * O + o) * OH * OW;
      const double b = has_bias ? bias[static_cast<std::size_t>(o)] : 0.0;
      std::fill(out, out + OH * OW, b);
      for (Index c = 0; c < C; ++c) {
        const double* in = x + (n * C + c) * H * W;
        const double* ker = w + (o * C + c) * KH * KW;
        for (Index ky = 0; ky < KH; ++ky) {
          const ValidRange ry = valid_outputs(OH, H, ky, S, P);
          for (Index kx = 0; kx < KW; ++kx) {
            const ValidRange rx = valid_outputs(OW, W, kx, S, P);
            const double wv = ker[ky * KW + kx];
            for (Index oy = ry.lo; oy < ry.hi; ++oy) {
              const double* in_row = in + (oy * S + ky - P) * W + (kx - P);
              double* out_row = out + oy * OW;
              if (S == 1) {
                for (Index ox = rx.lo; ox < rx.hi; ++ox) out_row[ox] += wv * in_row[ox];
              } else {
                for (Index ox = rx.lo; ox < rx.hi; ++ox) out_row[ox] += wv * in_row[ox * S];
              }
            }
          }
        }
      }
    }
  }
}

void conv2d_forward_reference(const ConvGeometry& g, std::span<const double> input,
                              std::span<const double> weight, std::span<const double> bias,
                              std::span<double> output) {
  const std::size_t OH = g.out_h(), OW = g.out_w();
  for (std::size_t n = 0; n < g.batch; ++n)
    for (std::size_t o = 0; o < g.out_channels; ++o)
      for (std::size_t oy = 0; oy < OH; ++oy)
        for (std::size_t ox = 0; ox < OW; ++ox) {
          double acc = bias.empty() ? 0.0 : bias[o];
          for (std::size_t c = 0; c < g.in_channels; ++c)
            for (std::size_t ky = 0; ky < g.kernel_h; ++ky)
              for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
                const Index iy = static_cast<Index>(oy * g.stride + ky) - static_cast<Index>(g.pad);
                const Index ix = static_cast<Index>(ox * g.stride + kx) - static_cast<Index>(g.pad);
                if (iy < 0 || ix < 0 || iy >= static_cast<Index>(g.in_h) || ix >= static_cast<Index>(g.in_w))
                  continue;
                acc += weight[((o * g.in_channels + c) * g.kernel_h + ky) * g.kernel_w + kx] *
                       input[((n * g.in_channels + c) * g.in_h + static_cast<std::size_t>(iy)) * g.in_w +
                             static_cast<std::size_t>(ix)];
              }
          output[((n * g.out_channels + o) * OH + oy) * OW + ox] = acc;
        }
}

void conv2d_backward(const ConvGeometry& g, std::span<const double> input, std::span<const double> weight,
                     std::span<const double> grad_output, std::span<double> grad_input,
                     std::span<double> grad_weight, std::span<double> grad_bias) {
  const Index N = static_cast<Index>(g.batch), C = static_cast<Index>(g.in_channels);
  const Index H = static_cast<Index>(g.in_h), W = static_cast<Index>(g.in_w);
  const Index O = static_cast<Index>(g.out_channels), KH = static_cast<Index>(g.kernel_h),
              KW = static_cast<Index>(g.kernel_w);
  const Index S = static_cast<Index>(g.stride), P = static_cast<Index>(g.pad);
  const Index OH = static_cast<Index>(g.out_h()), OW = static_cast<Index>(g.out_w());
  const double* x = input.data();
  const double* w = weight.data();
  const double* go = grad_output.data();

  if (!grad_input.empty()) {
    double* gx = grad_input.data();
#pragma omp parallel for collapse(2) schedule(static)
    for (Index n = 0; n < N; ++n) {
      for (Index c = 0; c < C; ++c) {
        double* gin = gx + (n * C + c) * H * W;
        std::fill(gin, gin + H * W, 0.0);
        for (Index o = 0; o < O; ++o) {
          const double* gout = go + (n * O + o) * OH * OW;
          const double* ker = w + (o * C + c) * KH * KW;
          for (Index ky = 0; ky < KH; ++ky) {
            const ValidRange ry = valid_outputs(OH, H, ky, S, P);
            for (Index kx = 0; kx < KW; ++kx) {
              const ValidRange rx = valid_outputs(OW, W, kx, S, P);
              const double wv = ker[ky * KW + kx];
              for (Index oy = ry.lo; oy < ry.hi; ++oy) {
                double* gin_row = gin + (oy * S + ky - P) * W + (kx - P);
                const double* gout_row = gout + oy * OW;
                for (Index ox = rx.lo; ox < rx.hi; ++ox) gin_row[ox * S] += wv * gout_row[ox];
              }
            }
          }
        }
      }
    }
  }

  if (!grad_weight.empty()) {
    double* gw = grad_weight.data();
#pragma omp parallel for collapse(2) schedule(static)
    for (Index o = 0; o < O; ++o) {
      for (Index c = 0; c < C; ++c) {
        double* gker = gw + (o * C + c) * KH * KW;
        for (Index ky = 0; ky < KH; ++ky) {
          const ValidRange ry = valid_outputs(OH, H, ky, S, P);
          for (Index kx = 0; kx < KW; ++kx) {
            const ValidRange rx = valid_outputs(OW, W, kx, S, P);
            double acc = 0.0;
            for (Index n = 0; n < N; ++n) {
              const double* in = x + (n * C + c) * H * W;
              const double* gout = go + (n * O + o) * OH * OW;
              for (Index oy = ry.lo; oy < ry.hi; ++oy) {
                const double* in_row = in + (oy * S + ky - P) * W + (kx - P);
                const double* gout_row = gout + oy * OW;
                for (Index ox = rx.lo; ox < rx.hi; ++ox) acc += gout_row[ox] * in_row[ox * S];
              }
            }
            gker[ky * KW + kx] = acc;
          }
        }
      }
    }
  }

  if (!grad_bias.empty()) {
#pragma omp parallel for schedule(static)
    for (Index o = 0; o < O; ++o) {
      double acc = 0.0;
      for (Index n = 0; n < N; ++n) {
        const double* gout = go + (n * O + o) * OH * OW;
        for (Index i = 0; i < OH * OW; ++i) acc += gout[i];
      }
      grad_bias[static_cast<std::size_t>(o)] = acc;
    }
  }
}

void conv2d_backward_reference(const ConvGeometry& g, std::span<const double> input,
                               std::span<const double> weight, std::span<const double> grad_output,
                               std::span<double> grad_input, std::span<double> grad_weight,
                               std::span<double> grad_bias) {
  std::fill(grad_input.begin(), grad_input.end(), 0.0);
  std::fill(grad_weight.begin(), grad_weight.end(), 0.0);
  std::fill(grad_bias.begin(), grad_bias.end(), 0.0);
  const std::size_t OH = g.out_h(), OW = g.out_w();
  for (std::size_t n = 0; n < g.batch; ++n)
    for (std::size_t o = 0; o < g.out_channels; ++o)
      for (std::size_t oy = 0; oy < OH; ++oy)
        for (std::size_t ox = 0; ox < OW; ++ox) {
          const double gout = grad_output[((n * g.out_channels + o) * OH + oy) * OW + ox];
          if (!grad_bias.empty()) grad_bias[o] += gout;
          for (std::size_t c = 0; c < g.in_channels; ++c)
            for (std::size_t ky = 0; ky < g.kernel_h; ++ky)
              for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
                const Index iy = static_cast<Index>(oy * g.stride + ky) - static_cast<Index>(g.pad);
                const Index ix = static_cast<Index>(ox * g.stride + kx) - static_cast<Index>(g.pad);
                if (iy < 0 || ix < 0 || iy >= static_cast<Index>(g.in_h) || ix >= static_cast<Index>(g.in_w))
                  continue;
                const std::size_t wi = ((o * g.in_channels + c) * g.kernel_h + ky) * g.kernel_w + kx;
                const std::size_t xi = ((n * g.in_channels + c) * g.in_h + static_cast<std::size_t>(iy)) * g.in_w +
                                       static_cast<std::size_t>(ix);
                if (!grad_weight.empty()) grad_weight[wi] += gout * input[xi];
                if (!grad_input.empty()) grad_input[xi] += gout * weight[wi];
              }
        }
}

void linear_forward(const LinearGeometry& g, std::span<const double> input, std::span<const double> weight,
                    std::span<const double> bias, std::span<double> output) {
  const Index N = static_cast<Index>(g.batch), I = static_cast<Index>(g.in_features),
              O = static_cast<Index>(g.out_features);
  const double* x = input.data();
  const double* w = weight.data();
  double* y = output.data();
  const bool has_bias = !bias.empty();
#pragma omp parallel for collapse(2) schedule(static)
  for (Index n = 0; n < N; ++n) {
    for (Index o = 0; o < O; ++o) {
      const double* xr = x + n * I;
      const double* wr = w + o * I;
      double acc = 0.0;
      for (Index i = 0; i < I; ++i) acc += wr[i] * xr[i];
      y[n * O + o] = acc + (has_bias ? bias[static_cast<std::size_t>(o)] : 0.0);
    }
  }
}

void linear_forward_reference(const LinearGeometry& g, std::span<const double> input,
                              std::span<const double> weight, std::span<const double> bias,
                              std::span<double> output) {
  for (std::size_t n = 0; n < g.batch; ++n)
    for (std::size_t o = 0; o < g.out_features; ++o) {
      double acc = bias.empty() ? 0.0 : bias[o];
      for (std::size_t i = 0; i < g.in_features; ++i)
        acc += weight[o * g.in_features + i] * input[n * g.in_features + i];
      output[n * g.out_features + o] = acc;
    }
}

void linear_backward(const LinearGeometry& g, std::span<const double> input, std::span<const double> weight,
                     std::span<const double> grad_output, std::span<double> grad_input,
                     std::span<double> grad_weight, std::span<double> grad_bias) {
  const Index N = static_cast<Index>(g.batch), I = static_cast<Index>(g.in_features),
              O = static_cast<Index>(g.out_features);
  const double* x = input.data();
  const double* w = weight.data();
  const double* go = grad_output.data();
  if (!grad_input.empty()) {
    double* gx = grad_input.data();
#pragma omp parallel for schedule(static)
    for (Index n = 0; n < N; ++n) {
      double* gxr = gx + n * I;
      std::fill(gxr, gxr + I, 0.0);
      for (Index o = 0; o < O; ++o) {
        const double gv = go[n * O + o];
        const double* wr = w + o * I;
        for (Index i = 0; i < I; ++i) gxr[i] += gv * wr[i];
      }
    }
  }
  if (!grad_weight.empty()) {
    double* gw = grad_weight.data();
#pragma omp parallel for schedule(static)
    for (Index o = 0; o < O; ++o) {
      double* gwr = gw + o * I;
      std::fill(gwr, gwr + I, 0.0);
      for (Index n = 0; n < N; ++n) {
        const double gv = go[n * O + o];
        const double* xr = x + n * I;
        for (Index i = 0; i < I; ++i) gwr[i] += gv * xr[i];
      }
    }
  }
  if (!grad_bias.empty()) {
    for (Index o = 0; o < O; ++o) {
      double acc = 0.0;
      for (Index n = 0; n < N; ++n) acc += go[n * O + o];
      grad_bias[static_cast<std::size_t>(o)] = acc;
    }
  }
}

void linear_backward_reference(const LinearGeometry& g, std::span<const double> input,
                               std::span<const double> weight, std::span<const double> grad_output,
                               std::span<double> grad_input, std::span<double> grad_weight,
                               std::span<double> grad_bias) {
  std::fill(grad_input.begin(), grad_input.end(), 0.0);
  std::fill(grad_weight.begin(), grad_weight.end(), 0.0);
  std::fill(grad_bias.begin(), grad_bias.end(), 0.0);
  for (std::size_t n = 0; n < g.batch; ++n)
    for (std::size_t o = 0; o < g.out_features; ++o) {
      const double gv = grad_output[n * g.out_features + o];
      if (!grad_bias.empty()) grad_bias[o] += gv;
      for (std::size_t i = 0; i < g.in_features; ++i) {
        if (!grad_input.empty()) grad_input[n * g.in_features + i] += gv * weight[o * g.in_features + i];
        if (!grad_weight.empty()) grad_weight[o * g.in_features + i] += gv * input[n * g.in_features + i];
      }
    }
}

void global_avg_pool_forward(std::size_t batch, std::size_t channels, std::size_t spatial,
                             std::span<const double> input, std::span<double> output) {
  const double inv = 1.0 / static_cast<double>(spatial);
  for (std::size_t nc = 0; nc < batch * channels; ++nc) {
    double acc = 0.0;
    for (std::size_t i = 0; i < spatial; ++i) acc += input[nc * spatial + i];
    output[nc] = acc * inv;
  }
}

void global_avg_pool_backward(std::size_t batch, std::size_t channels, std::size_t spatial,
                              std::span<const double> grad_output, std::span<double> grad_input) {
  const double inv = 1.0 / static_cast<double>(spatial);
  for (std::size_t nc = 0; nc < batch * channels; ++nc) {
    const double g = grad_output[nc] * inv;
    for (std::size_t i = 0; i < spatial; ++i) grad_input[nc * spatial + i] = g;
  }
}

}  // namespace sslab::kernels
