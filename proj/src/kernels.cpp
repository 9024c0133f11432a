#include "voxgan/kernels.hpp"

#include <algorithm>
#include <array>
#include <cstring>
#include <vector>

#include "voxgan/error.hpp"

namespace voxgan::kernels {
namespace {

constexpr int kLanes = 8;
// Output channels computed together; each weight broadcast is reused across
// kVectors * kLanes voxels and each input load across kOutBlock channels.
constexpr int kOutBlock = 4;
constexpr int kVectors = 2;

using Vec = float __attribute__((vector_size(kLanes * sizeof(float))));

inline Vec load(const float* p) {
  Vec v;
  std::memcpy(&v, p, sizeof v);
  return v;
}

inline void store(float* p, const Vec& v) { std::memcpy(p, &v, sizeof v); }

inline double lane_sum(const Vec& v) {
  double s = 0.0;
  for (int l = 0; l < kLanes; ++l) s += v[l];
  return s;
}

std::int64_t round_up(std::int64_t n, std::int64_t m) {
  return (n + m - 1) / m * m;
}

void check_size(std::size_t got, std::int64_t want, const char* what) {
  if (static_cast<std::int64_t>(got) != want) {
    throw ShapeError(std::string("conv3d kernel: ") + what + " has " +
                     std::to_string(got) + " elements, expected " +
                     std::to_string(want));
  }
}

void check_geometry(const ConvGeometry& g) {
  if (g.kernel < 1 || g.pad < 0) {
    throw ValueError("conv3d kernel: invalid kernel/pad");
  }
}

// Zero-padded copy of `channels` volumes: padded index i holds source index
// i - pad along d and h (and w), so tap k of output p reads index p + k. The
// row length is rounded up so whole vectors can be loaded past the last
// output column.
struct Padded {
  std::int64_t depth = 0;
  std::int64_t height = 0;
  std::int64_t width = 0;
  std::vector<float> data;

  Padded(const float* src, std::int64_t channels, const ConvGeometry& g,
         std::int64_t row_tile) {
    const int K = g.kernel;
    depth = g.depth + K - 1;
    height = g.height + K - 1;
    width = round_up(g.width, row_tile) + K - 1;
    data.assign(static_cast<std::size_t>(channels * depth * height * width),
                0.0f);
    const std::int64_t V = g.volume();
    const std::int64_t w_lo = std::max<std::int64_t>(0, g.pad);
    const std::int64_t w_hi = std::min<std::int64_t>(width, g.width + g.pad);
#pragma omp parallel for schedule(static)
    for (std::int64_t c = 0; c < channels; ++c) {
      for (std::int64_t d = 0; d < depth; ++d) {
        const std::int64_t sd = d - g.pad;
        if (sd < 0 || sd >= g.depth) continue;
        for (std::int64_t h = 0; h < height; ++h) {
          const std::int64_t sh = h - g.pad;
          if (sh < 0 || sh >= g.height) continue;
          const float* srow = src + c * V + (sd * g.height + sh) * g.width;
          float* drow = row(c, d, h);
          for (std::int64_t w = w_lo; w < w_hi; ++w) drow[w] = srow[w - g.pad];
        }
      }
    }
  }

  float* row(std::int64_t c, std::int64_t d, std::int64_t h) {
    return data.data() + ((c * depth + d) * height + h) * width;
  }
  const float* row(std::int64_t c, std::int64_t d, std::int64_t h) const {
    return data.data() + ((c * depth + d) * height + h) * width;
  }
};

// Weights regrouped as [block][c][tap][kOutBlock] so the kOutBlock
// broadcasts of one tap are adjacent; missing channels of a tail block are 0.
std::vector<float> pack_weights(const float* weight, std::int64_t out_ch,
                                std::int64_t in_ch, std::int64_t taps) {
  const std::int64_t blocks = (out_ch + kOutBlock - 1) / kOutBlock;
  std::vector<float> packed(
      static_cast<std::size_t>(blocks * in_ch * taps * kOutBlock), 0.0f);
  for (std::int64_t o = 0; o < out_ch; ++o) {
    const std::int64_t blk = o / kOutBlock, j = o % kOutBlock;
    for (std::int64_t c = 0; c < in_ch; ++c) {
      for (std::int64_t t = 0; t < taps; ++t) {
        packed[static_cast<std::size_t>(((blk * in_ch + c) * taps + t) *
                                            kOutBlock + j)] =
            weight[(o * in_ch + c) * taps + t];
      }
    }
  }
  return packed;
}

// kOutBlock channels x NV vectors of one output row, summed over (c, kd, kh,
// kw) in that order.
template <int NV>
void conv_tile(const Padded& x, const float* wblock, std::int64_t C, int K,
               std::int64_t d, std::int64_t h, std::int64_t w,
               std::array<std::array<Vec, NV>, kOutBlock>& acc) {
  for (auto& a : acc) a.fill(Vec{});
  const std::int64_t K3 = static_cast<std::int64_t>(K) * K * K;
  for (std::int64_t c = 0; c < C; ++c) {
    const float* wc = wblock + c * K3 * kOutBlock;
    for (int kd = 0; kd < K; ++kd) {
      for (int kh = 0; kh < K; ++kh) {
        const float* xrow = x.row(c, d + kd, h + kh) + w;
        const float* wt = wc + (kd * K + kh) * K * kOutBlock;
        for (int kw = 0; kw < K; ++kw) {
          std::array<Vec, NV> xv;
          for (int v = 0; v < NV; ++v) xv[v] = load(xrow + kw + v * kLanes);
          for (int j = 0; j < kOutBlock; ++j) {
            const float wv = wt[kw * kOutBlock + j];
            for (int v = 0; v < NV; ++v) acc[j][v] += wv * xv[v];
          }
        }
      }
    }
  }
}

template <int NV>
void conv_forward_impl(const float* in, const float* weight, float* out,
                       const ConvGeometry& g) {
  const std::int64_t C = g.in_channels, O = g.out_channels;
  const std::int64_t D = g.depth, H = g.height, W = g.width;
  const std::int64_t V = g.volume();
  const std::int64_t K3 = g.taps();
  constexpr std::int64_t tile = NV * kLanes;
  const std::vector<float> packed = pack_weights(weight, O, C, K3);
  const std::int64_t blocks = (O + kOutBlock - 1) / kOutBlock;

  for (std::int64_t b = 0; b < g.batch; ++b) {
    const Padded x(in + b * C * V, C, g, tile);
    float* dst = out + b * O * V;
#pragma omp parallel for collapse(2) schedule(static)
    for (std::int64_t blk = 0; blk < blocks; ++blk) {
      for (std::int64_t d = 0; d < D; ++d) {
        const float* wblock = packed.data() + blk * C * K3 * kOutBlock;
        const std::int64_t count =
            std::min<std::int64_t>(kOutBlock, O - blk * kOutBlock);
        std::array<std::array<Vec, NV>, kOutBlock> acc;
        for (std::int64_t h = 0; h < H; ++h) {
          for (std::int64_t w = 0; w < W; w += tile) {
            conv_tile<NV>(x, wblock, C, g.kernel, d, h, w, acc);
            const std::int64_t n = std::min<std::int64_t>(tile, W - w);
            for (std::int64_t j = 0; j < count; ++j) {
              float* orow =
                  dst + (blk * kOutBlock + j) * V + (d * H + h) * W + w;
              if (n == tile) {
                for (int v = 0; v < NV; ++v) store(orow + v * kLanes, acc[j][v]);
              } else {
                std::array<float, tile> buf;
                std::memcpy(buf.data(), acc[j].data(), sizeof buf);
                std::copy(buf.begin(), buf.begin() + n, orow);
              }
            }
          }
        }
      }
    }
  }
}

}  // namespace

void conv3d_forward(std::span<const float> in, std::span<const float> weight,
                    std::span<float> out, const ConvGeometry& g) {
  check_geometry(g);
  const std::int64_t V = g.volume();
  check_size(in.size(), g.batch * g.in_channels * V, "input");
  check_size(weight.size(), g.out_channels * g.in_channels * g.taps(),
             "weight");
  check_size(out.size(), g.batch * g.out_channels * V, "output");
  if (g.width <= kLanes) {
    conv_forward_impl<1>(in.data(), weight.data(), out.data(), g);
  } else {
    conv_forward_impl<kVectors>(in.data(), weight.data(), out.data(), g);
  }
}

void conv3d_backward_data(std::span<const float> grad_out,
                          std::span<const float> weight,
                          std::span<float> grad_in, const ConvGeometry& g) {
  check_geometry(g);
  const std::int64_t O = g.out_channels, C = g.in_channels;
  const std::int64_t K3 = g.taps();
  check_size(weight.size(), O * C * K3, "weight");

  // Transposed, spatially flipped kernel: wt[c,o,t] = w[o,c,K3-1-t].
  std::vector<float> flipped(weight.size());
  for (std::int64_t o = 0; o < O; ++o) {
    for (std::int64_t c = 0; c < C; ++c) {
      const float* src = weight.data() + (o * C + c) * K3;
      float* dst = flipped.data() + (c * O + o) * K3;
      for (std::int64_t t = 0; t < K3; ++t) dst[t] = src[K3 - 1 - t];
    }
  }
  ConvGeometry t = g;
  t.in_channels = O;
  t.out_channels = C;
  t.pad = g.kernel - 1 - g.pad;
  if (t.pad < 0) {
    throw ValueError("conv3d kernel: pad exceeds kernel - 1");
  }
  conv3d_forward(grad_out, flipped, grad_in, t);
}

void conv3d_backward_weight(std::span<const float> in,
                            std::span<const float> grad_out,
                            std::span<float> grad_weight,
                            const ConvGeometry& g) {
  check_geometry(g);
  const std::int64_t B = g.batch, C = g.in_channels, O = g.out_channels;
  const std::int64_t D = g.depth, H = g.height, W = g.width;
  const std::int64_t V = g.volume();
  const int K = g.kernel;
  const std::int64_t K3 = g.taps();
  check_size(in.size(), B * C * V, "input");
  check_size(grad_out.size(), B * O * V, "grad_out");
  check_size(grad_weight.size(), O * C * K3, "grad_weight");

  // grad_out rows widened to whole vectors with zeros, so the padding of x
  // past the last column never contributes.
  const std::int64_t Wr = round_up(W, kLanes);
  std::vector<float> gy(static_cast<std::size_t>(B * O * D * H * Wr), 0.0f);
  for (std::int64_t r = 0; r < B * O * D * H; ++r) {
    std::copy(grad_out.data() + r * W, grad_out.data() + (r + 1) * W,
              gy.data() + r * Wr);
  }
  std::vector<Padded> xs;
  xs.reserve(static_cast<std::size_t>(B));
  for (std::int64_t b = 0; b < B; ++b) xs.emplace_back(in.data() + b * C * V, C, g, kLanes);

  const std::int64_t blocks = (O + kOutBlock - 1) / kOutBlock;
#pragma omp parallel for collapse(2) schedule(static)
  for (std::int64_t blk = 0; blk < blocks; ++blk) {
    for (std::int64_t c = 0; c < C; ++c) {
      const std::int64_t o0 = blk * kOutBlock;
      const std::int64_t count = std::min<std::int64_t>(kOutBlock, O - o0);
      for (int kd = 0; kd < K; ++kd) {
        for (int kh = 0; kh < K; ++kh) {
          for (int kw = 0; kw < K; ++kw) {
            std::array<double, kOutBlock> total{};
            for (std::int64_t b = 0; b < B; ++b) {
              const Padded& x = xs[static_cast<std::size_t>(b)];
              std::array<const float*, kOutBlock> gplane;
              for (std::int64_t j = 0; j < kOutBlock; ++j) {
                gplane[j] = gy.data() +
                            (b * O + o0 + std::min(j, count - 1)) * D * H * Wr;
              }
              // Float lanes are flushed to double once per depth slice.
              for (std::int64_t d = 0; d < D; ++d) {
                std::array<Vec, kOutBlock> acc{};
                for (std::int64_t h = 0; h < H; ++h) {
                  const float* xrow = x.row(c, d + kd, h + kh) + kw;
                  const std::int64_t grow = (d * H + h) * Wr;
                  for (std::int64_t w = 0; w < Wr; w += kLanes) {
                    const Vec xv = load(xrow + w);
                    for (int j = 0; j < kOutBlock; ++j) {
                      acc[j] += load(gplane[j] + grow + w) * xv;
                    }
                  }
                }
                for (int j = 0; j < kOutBlock; ++j) total[j] += lane_sum(acc[j]);
              }
            }
            for (std::int64_t j = 0; j < count; ++j) {
              grad_weight[static_cast<std::size_t>(((o0 + j) * C + c) * K3 +
                                                   (kd * K + kh) * K + kw)] =
                  static_cast<float>(total[j]);
            }
          }
        }
      }
    }
  }
}

void downsample_avg_2x(std::span<const float> in, std::span<float> out,
                       std::int64_t planes, std::int64_t depth,
                       std::int64_t height, std::int64_t width) {
  const std::int64_t od = depth / 2, oh = height / 2, ow = width / 2;
  const std::int64_t in_vol = depth * height * width;
  const std::int64_t out_vol = od * oh * ow;
  check_size(in.size(), planes * in_vol, "downsample input");
  check_size(out.size(), planes * out_vol, "downsample output");
  for (std::int64_t p = 0; p < planes; ++p) {
    const float* src = in.data() + p * in_vol;
    float* dst = out.data() + p * out_vol;
    for (std::int64_t d = 0; d < od; ++d) {
      for (std::int64_t h = 0; h < oh; ++h) {
        for (std::int64_t w = 0; w < ow; ++w) {
          float s = 0.0f;
          for (int i = 0; i < 2; ++i) {
            for (int j = 0; j < 2; ++j) {
              const float* row =
                  src + ((2 * d + i) * height + (2 * h + j)) * width + 2 * w;
              s += row[0];
              s += row[1];
            }
          }
          dst[(d * oh + h) * ow + w] = s / 8.0f;
        }
      }
    }
  }
}

void upsample_nearest_2x(std::span<const float> in, std::span<float> out,
                         std::int64_t planes, std::int64_t depth,
                         std::int64_t height, std::int64_t width) {
  const std::int64_t in_vol = depth * height * width;
  const std::int64_t oh = 2 * height, ow = 2 * width;
  const std::int64_t out_vol = 8 * in_vol;
  check_size(in.size(), planes * in_vol, "upsample input");
  check_size(out.size(), planes * out_vol, "upsample output");
  for (std::int64_t p = 0; p < planes; ++p) {
    const float* src = in.data() + p * in_vol;
    float* dst = out.data() + p * out_vol;
    for (std::int64_t d = 0; d < 2 * depth; ++d) {
      for (std::int64_t h = 0; h < oh; ++h) {
        const float* srow = src + ((d / 2) * height + h / 2) * width;
        float* drow = dst + (d * oh + h) * ow;
        for (std::int64_t w = 0; w < ow; ++w) drow[w] = srow[w / 2];
      }
    }
  }
}

}  // namespace voxgan::kernels
