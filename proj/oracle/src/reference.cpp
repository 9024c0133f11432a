#include "voxgan_oracle/reference.hpp"

#include <cmath>
#include <stdexcept>

namespace voxgan::oracle {
namespace {

std::size_t at5(const Shape& s, std::int64_t a, std::int64_t b,
                std::int64_t c, std::int64_t d, std::int64_t e) {
  return static_cast<std::size_t>(
      (((a * s[1] + b) * s[2] + c) * s[3] + d) * s[4] + e);
}

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

}  // namespace

Array Array::zeros(const Shape& shape) {
  return {shape, std::vector<double>(static_cast<std::size_t>(voxgan::numel(shape)))};
}

Array Array::from(const Tensor& t) {
  const auto v = t.to_vector();
  return {t.shape(), std::vector<double>(v.begin(), v.end())};
}

Tensor Array::to_tensor() const {
  return Tensor::from_vector(shape,
                             std::vector<float>(data.begin(), data.end()));
}

Array conv3d(const Array& x, const Array& w, int pad) {
  require(x.shape.size() == 5 && w.shape.size() == 5 && x.dim(1) == w.dim(1),
          "oracle::conv3d shapes");
  const auto k = w.dim(2);
  const Shape ys{x.dim(0), w.dim(0), x.dim(2) + 2 * pad - k + 1,
                 x.dim(3) + 2 * pad - k + 1, x.dim(4) + 2 * pad - k + 1};
  Array y = Array::zeros(ys);
  for (std::int64_t b = 0; b < ys[0]; ++b)
    for (std::int64_t o = 0; o < ys[1]; ++o)
      for (std::int64_t d = 0; d < ys[2]; ++d)
        for (std::int64_t h = 0; h < ys[3]; ++h)
          for (std::int64_t ww = 0; ww < ys[4]; ++ww) {
            double s = 0.0;
            for (std::int64_t c = 0; c < x.dim(1); ++c)
              for (std::int64_t kd = 0; kd < k; ++kd)
                for (std::int64_t kh = 0; kh < k; ++kh)
                  for (std::int64_t kw = 0; kw < k; ++kw) {
                    const auto zd = d + kd - pad, zh = h + kh - pad,
                               zw = ww + kw - pad;
                    if (zd < 0 || zh < 0 || zw < 0 || zd >= x.dim(2) ||
                        zh >= x.dim(3) || zw >= x.dim(4))
                      continue;
                    s += x.data[at5(x.shape, b, c, zd, zh, zw)] *
                         w.data[at5(w.shape, o, c, kd, kh, kw)];
                  }
            y.data[at5(ys, b, o, d, h, ww)] = s;
          }
  return y;
}

Array conv3d_input_vjp(const Array& gy, const Array& w, const Shape& x_shape,
                       int pad) {
  Array gx = Array::zeros(x_shape);
  const auto k = w.dim(2);
  for (std::int64_t b = 0; b < gy.dim(0); ++b)
    for (std::int64_t o = 0; o < gy.dim(1); ++o)
      for (std::int64_t d = 0; d < gy.dim(2); ++d)
        for (std::int64_t h = 0; h < gy.dim(3); ++h)
          for (std::int64_t ww = 0; ww < gy.dim(4); ++ww) {
            const double g = gy.data[at5(gy.shape, b, o, d, h, ww)];
            for (std::int64_t c = 0; c < x_shape[1]; ++c)
              for (std::int64_t kd = 0; kd < k; ++kd)
                for (std::int64_t kh = 0; kh < k; ++kh)
                  for (std::int64_t kw = 0; kw < k; ++kw) {
                    const auto zd = d + kd - pad, zh = h + kh - pad,
                               zw = ww + kw - pad;
                    if (zd < 0 || zh < 0 || zw < 0 || zd >= x_shape[2] ||
                        zh >= x_shape[3] || zw >= x_shape[4])
                      continue;
                    gx.data[at5(x_shape, b, c, zd, zh, zw)] +=
                        g * w.data[at5(w.shape, o, c, kd, kh, kw)];
                  }
          }
  return gx;
}

Array conv3d_weight_vjp(const Array& x, const Array& gy, int k, int pad) {
  const Shape ws{gy.dim(1), x.dim(1), k, k, k};
  Array gw = Array::zeros(ws);
  for (std::int64_t b = 0; b < gy.dim(0); ++b)
    for (std::int64_t o = 0; o < gy.dim(1); ++o)
      for (std::int64_t d = 0; d < gy.dim(2); ++d)
        for (std::int64_t h = 0; h < gy.dim(3); ++h)
          for (std::int64_t ww = 0; ww < gy.dim(4); ++ww) {
            const double g = gy.data[at5(gy.shape, b, o, d, h, ww)];
            for (std::int64_t c = 0; c < x.dim(1); ++c)
              for (std::int64_t kd = 0; kd < k; ++kd)
                for (std::int64_t kh = 0; kh < k; ++kh)
                  for (std::int64_t kw = 0; kw < k; ++kw) {
                    const auto zd = d + kd - pad, zh = h + kh - pad,
                               zw = ww + kw - pad;
                    if (zd < 0 || zh < 0 || zw < 0 || zd >= x.dim(2) ||
                        zh >= x.dim(3) || zw >= x.dim(4))
                      continue;
                    gw.data[at5(ws, o, c, kd, kh, kw)] +=
                        g * x.data[at5(x.shape, b, c, zd, zh, zw)];
                  }
          }
  return gw;
}

Array add_channel_bias(const Array& x, const Array& bias) {
  require(x.shape.size() >= 2 && bias.numel() == x.dim(1),
          "oracle::add_channel_bias shapes");
  Array y = x;
  std::int64_t inner = 1;
  for (std::size_t i = 2; i < x.shape.size(); ++i) inner *= x.shape[i];
  for (std::int64_t i = 0; i < y.numel(); ++i) {
    y.data[static_cast<std::size_t>(i)] +=
        bias.data[static_cast<std::size_t>((i / inner) % x.dim(1))];
  }
  return y;
}

Array scale(const Array& x, double c) {
  Array y = x;
  for (auto& v : y.data) v *= c;
  return y;
}

Array add(const Array& a, const Array& b) {
  require(a.shape == b.shape, "oracle::add shapes");
  Array y = a;
  for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] += b.data[i];
  return y;
}

Array leaky_relu(const Array& x, double slope, Branches* branches) {
  Array y = x;
  for (auto& v : y.data) {
    const bool pos = v > 0.0;
    if (branches) branches->push_back(pos ? 1 : 0);
    if (!pos) v *= slope;
  }
  return y;
}

Array leaky_relu_vjp(const Array& gy, const Array& x, double slope) {
  Array gx = gy;
  for (std::size_t i = 0; i < gx.data.size(); ++i) {
    if (!(x.data[i] > 0.0)) gx.data[i] *= slope;
  }
  return gx;
}

Array pixelwise_norm(const Array& x, double epsilon) {
  const auto c = x.dim(1);
  std::int64_t inner = 1;
  for (std::size_t i = 2; i < x.shape.size(); ++i) inner *= x.shape[i];
  Array y = x;
  for (std::int64_t b = 0; b < x.dim(0); ++b) {
    for (std::int64_t p = 0; p < inner; ++p) {
      double ms = 0.0;
      for (std::int64_t ch = 0; ch < c; ++ch) {
        const double v = x.data[static_cast<std::size_t>((b * c + ch) * inner + p)];
        ms += v * v;
      }
      const double r = std::sqrt(ms / static_cast<double>(c) + epsilon);
      for (std::int64_t ch = 0; ch < c; ++ch) {
        y.data[static_cast<std::size_t>((b * c + ch) * inner + p)] /= r;
      }
    }
  }
  return y;
}

namespace {

// Per-position population mean and stddev across the batch.
void batch_moments(const Array& x, std::vector<double>& mu,
                   std::vector<double>& sd) {
  const auto bsz = x.dim(0);
  const auto n = static_cast<std::size_t>(x.numel() / bsz);
  mu.assign(n, 0.0);
  sd.assign(n, 0.0);
  for (std::int64_t b = 0; b < bsz; ++b)
    for (std::size_t j = 0; j < n; ++j) mu[j] += x.data[b * n + j];
  for (auto& m : mu) m /= static_cast<double>(bsz);
  for (std::int64_t b = 0; b < bsz; ++b)
    for (std::size_t j = 0; j < n; ++j) {
      const double t = x.data[b * n + j] - mu[j];
      sd[j] += t * t;
    }
  for (auto& s : sd) s = std::sqrt(s / static_cast<double>(bsz));
}

}  // namespace

Array minibatch_stddev(const Array& x) {
  require(x.shape.size() == 5, "oracle::minibatch_stddev rank");
  std::vector<double> mu, sd;
  batch_moments(x, mu, sd);
  double feature = 0.0;
  for (double s : sd) feature += s;
  feature /= static_cast<double>(sd.size());
  const auto c = x.dim(1);
  const std::int64_t inner = x.dim(2) * x.dim(3) * x.dim(4);
  Array y = Array::zeros({x.dim(0), c + 1, x.dim(2), x.dim(3), x.dim(4)});
  for (std::int64_t b = 0; b < x.dim(0); ++b) {
    for (std::int64_t i = 0; i < c * inner; ++i) {
      y.data[static_cast<std::size_t>(b * (c + 1) * inner + i)] =
          x.data[static_cast<std::size_t>(b * c * inner + i)];
    }
    for (std::int64_t p = 0; p < inner; ++p) {
      y.data[static_cast<std::size_t>((b * (c + 1) + c) * inner + p)] = feature;
    }
  }
  return y;
}

Array minibatch_stddev_vjp(const Array& gy, const Array& x) {
  std::vector<double> mu, sd;
  batch_moments(x, mu, sd);
  const auto bsz = x.dim(0), c = x.dim(1);
  const std::int64_t inner = x.dim(2) * x.dim(3) * x.dim(4);
  const auto n = static_cast<std::size_t>(c * inner);
  double g_feature = 0.0;
  Array gx = Array::zeros(x.shape);
  for (std::int64_t b = 0; b < bsz; ++b) {
    for (std::size_t i = 0; i < n; ++i) {
      gx.data[b * n + i] = gy.data[static_cast<std::size_t>(b * (c + 1) * inner) + i];
    }
    for (std::int64_t p = 0; p < inner; ++p) {
      g_feature += gy.data[static_cast<std::size_t>((b * (c + 1) + c) * inner + p)];
    }
  }
  for (std::int64_t b = 0; b < bsz; ++b) {
    for (std::size_t j = 0; j < n; ++j) {
      if (sd[j] == 0.0) continue;
      gx.data[b * n + j] += g_feature / static_cast<double>(n) *
                            (x.data[b * n + j] - mu[j]) /
                            (static_cast<double>(bsz) * sd[j]);
    }
  }
  return gx;
}

Array upsample_nearest_2x(const Array& x) {
  const auto d = x.dim(2), h = x.dim(3), w = x.dim(4);
  Array y = Array::zeros({x.dim(0), x.dim(1), 2 * d, 2 * h, 2 * w});
  for (std::int64_t p = 0; p < x.dim(0) * x.dim(1); ++p)
    for (std::int64_t i = 0; i < 2 * d; ++i)
      for (std::int64_t j = 0; j < 2 * h; ++j)
        for (std::int64_t k = 0; k < 2 * w; ++k)
          y.data[static_cast<std::size_t>(((p * 2 * d + i) * 2 * h + j) * 2 * w + k)] =
              x.data[static_cast<std::size_t>(((p * d + i / 2) * h + j / 2) * w + k / 2)];
  return y;
}

Array downsample_avg_2x(const Array& x) {
  const auto d = x.dim(2) / 2, h = x.dim(3) / 2, w = x.dim(4) / 2;
  Array y = Array::zeros({x.dim(0), x.dim(1), d, h, w});
  for (std::int64_t p = 0; p < x.dim(0) * x.dim(1); ++p)
    for (std::int64_t i = 0; i < 2 * d; ++i)
      for (std::int64_t j = 0; j < 2 * h; ++j)
        for (std::int64_t k = 0; k < 2 * w; ++k)
          y.data[static_cast<std::size_t>(((p * d + i / 2) * h + j / 2) * w + k / 2)] +=
              x.data[static_cast<std::size_t>(((p * 2 * d + i) * 2 * h + j) * 2 * w + k)] / 8.0;
  return y;
}

Array dense(const Array& x, const Array& w, const Array& bias) {
  const auto bsz = x.dim(0), n = x.dim(1), m = w.dim(0);
  require(w.dim(1) == n && bias.numel() == m, "oracle::dense shapes");
  Array y = Array::zeros({bsz, m});
  for (std::int64_t b = 0; b < bsz; ++b)
    for (std::int64_t o = 0; o < m; ++o) {
      double s = bias.data[static_cast<std::size_t>(o)];
      for (std::int64_t i = 0; i < n; ++i)
        s += x.data[static_cast<std::size_t>(b * n + i)] *
             w.data[static_cast<std::size_t>(o * n + i)];
      y.data[static_cast<std::size_t>(b * m + o)] = s;
    }
  return y;
}

Array dense_input_vjp(const Array& gy, const Array& w) {
  const auto bsz = gy.dim(0), m = w.dim(0), n = w.dim(1);
  Array gx = Array::zeros({bsz, n});
  for (std::int64_t b = 0; b < bsz; ++b)
    for (std::int64_t o = 0; o < m; ++o)
      for (std::int64_t i = 0; i < n; ++i)
        gx.data[static_cast<std::size_t>(b * n + i)] +=
            gy.data[static_cast<std::size_t>(b * m + o)] *
            w.data[static_cast<std::size_t>(o * n + i)];
  return gx;
}

double sum(const Array& x) {
  double s = 0.0;
  for (double v : x.data) s += v;
  return s;
}

double equalized_scale(std::int64_t fan_in) {
  return std::sqrt(2.0 / static_cast<double>(fan_in));
}

}  // namespace voxgan::oracle
