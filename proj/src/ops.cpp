#include "voxgan/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "voxgan/error.hpp"
#include "voxgan/kernels.hpp"
#include "voxgan/tape.hpp"

namespace voxgan {
namespace {

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " +
                     to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
}

void require_rank(const char* op, const Tensor& a, int rank) {
  if (a.ndim() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " +
                     std::to_string(rank) + ", got " + to_string(a.shape()));
  }
}

int normalize_axis(const char* op, int axis, int rank) {
  if (axis < 0) axis += rank;
  if (axis < 0 || axis >= rank) {
    throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) +
                     " out of range for rank " + std::to_string(rank));
  }
  return axis;
}

template <class F>
Tensor map_unary(const Tensor& a, F f) {
  const Tensor ac = a.contiguous();
  auto in = ac.data();
  std::vector<float> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
  return Tensor::from_vector(a.shape(), std::move(out));
}

template <class F>
Tensor map_binary(const char* op, const Tensor& a, const Tensor& b, F f) {
  require_same_shape(op, a, b);
  const Tensor ac = a.contiguous();
  const Tensor bc = b.contiguous();
  auto x = ac.data();
  auto y = bc.data();
  std::vector<float> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i], y[i]);
  return Tensor::from_vector(a.shape(), std::move(out));
}

std::vector<int> normalize_axes(const char* op, std::vector<int> axes,
                                int rank) {
  if (axes.empty()) {
    axes.resize(static_cast<std::size_t>(rank));
    std::iota(axes.begin(), axes.end(), 0);
  }
  for (auto& a : axes) a = normalize_axis(op, a, rank);
  std::sort(axes.begin(), axes.end());
  axes.erase(std::unique(axes.begin(), axes.end()), axes.end());
  return axes;
}

struct Reduction {
  Shape kept_shape;  // reduced axes set to 1
  Shape out_shape;   // reduced axes removed unless keepdim
  std::int64_t count = 1;
};

Reduction plan_reduction(const char* op, const Tensor& a,
                         const std::vector<int>& axes, bool keepdim) {
  Reduction r;
  r.kept_shape = a.shape();
  for (int ax : axes) {
    if (a.shape()[static_cast<std::size_t>(ax)] == 0) {
      throw ShapeError(std::string(op) + ": cannot reduce zero-extent axis " +
                       std::to_string(ax) + " of " + to_string(a.shape()));
    }
    r.count *= a.shape()[static_cast<std::size_t>(ax)];
    r.kept_shape[static_cast<std::size_t>(ax)] = 1;
  }
  for (int i = 0; i < a.ndim(); ++i) {
    const bool reduced = std::find(axes.begin(), axes.end(), i) != axes.end();
    if (!reduced || keepdim) {
      r.out_shape.push_back(r.kept_shape[static_cast<std::size_t>(i)]);
    }
  }
  return r;
}

// Sums `a` into kept_shape, accumulating each output in double in row-major
// input order.
std::vector<float> reduce_sum(const Tensor& a, const Shape& kept_shape,
                              double factor) {
  const Tensor ac = a.contiguous();
  auto in = ac.data();
  const auto& shape = a.shape();
  const std::size_t rank = shape.size();
  const Shape kept_strides = contiguous_strides(kept_shape);
  Shape out_strides(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    out_strides[i] = kept_shape[i] == 1 ? 0 : kept_strides[i];
  }
  std::vector<double> acc(static_cast<std::size_t>(numel(kept_shape)), 0.0);
  std::vector<std::int64_t> idx(rank, 0);
  std::int64_t out_off = 0;
  for (std::size_t flat = 0; flat < in.size(); ++flat) {
    acc[static_cast<std::size_t>(out_off)] += in[flat];
    for (std::size_t ax = rank; ax-- > 0;) {
      ++idx[ax];
      out_off += out_strides[ax];
      if (idx[ax] < shape[ax]) break;
      out_off -= out_strides[ax] * idx[ax];
      idx[ax] = 0;
    }
  }
  std::vector<float> out(acc.size());
  for (std::size_t i = 0; i < acc.size(); ++i) {
    out[i] = static_cast<float>(acc[i] * factor);
  }
  return out;
}

kernels::ConvGeometry conv_geometry(const char* op, const Shape& x,
                                    const Shape& w) {
  if (x.size() != 5 || w.size() != 5) {
    throw ShapeError(std::string(op) + ": expected input [B,C,D,H,W] and "
                     "weight [O,C,k,k,k], got " + to_string(x) + " and " +
                     to_string(w));
  }
  if (w[2] != w[3] || w[2] != w[4] || w[2] % 2 == 0) {
    throw ShapeError(std::string(op) + ": kernel must be cubic and odd, got " +
                     to_string(w));
  }
  if (x[1] != w[1]) {
    throw ShapeError(std::string(op) + ": input has " + std::to_string(x[1]) +
                     " channels but weight expects " + std::to_string(w[1]) +
                     " (input " + to_string(x) + ", weight " + to_string(w) +
                     ")");
  }
  kernels::ConvGeometry g;
  g.batch = x[0];
  g.in_channels = x[1];
  g.out_channels = w[0];
  g.depth = x[2];
  g.height = x[3];
  g.width = x[4];
  g.kernel = static_cast<int>(w[2]);
  g.pad = (g.kernel - 1) / 2;
  return g;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  Tensor out = map_binary("add", a, b, [](float x, float y) { return x + y; });
  return record_op("add", out, {a, b}, [](const Tensor& g, const Needs&) {
    return std::vector<Tensor>{g, g};
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  Tensor out = map_binary("sub", a, b, [](float x, float y) { return x - y; });
  return record_op("sub", out, {a, b}, [](const Tensor& g, const Needs&) {
    return std::vector<Tensor>{g, neg(g)};
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  Tensor out = map_binary("mul", a, b, [](float x, float y) { return x * y; });
  return record_op("mul", out, {a, b}, [a, b](const Tensor& g, const Needs& need) {
    return std::vector<Tensor>{need[0] ? mul(g, b) : Tensor(),
                               need[1] ? mul(g, a) : Tensor()};
  });
}

Tensor div(const Tensor& a, const Tensor& b) {
  Tensor out = map_binary("div", a, b, [](float x, float y) {
    return y == 0.0f ? 0.0f : x / y;
  });
  return record_op("div", out, {a, b}, [b, out](const Tensor& g, const Needs& need) {
    return std::vector<Tensor>{
        need[0] ? div(g, b) : Tensor(),
        need[1] ? neg(div(mul(g, out), b)) : Tensor()};
  });
}

Tensor scale(const Tensor& a, float s) {
  Tensor out = map_unary(a, [s](float x) { return x * s; });
  return record_op("scale", out, {a}, [s](const Tensor& g, const Needs&) {
    return std::vector<Tensor>{scale(g, s)};
  });
}

Tensor add_scalar(const Tensor& a, float s) {
  Tensor out = map_unary(a, [s](float x) { return x + s; });
  return record_op("add_scalar", out, {a},
                   [](const Tensor& g, const Needs&) { return std::vector<Tensor>{g}; });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0f); }

Tensor square(const Tensor& a) { return mul(a, a); }

Tensor sqrt(const Tensor& a) {
  Tensor out = map_unary(a, [](float x) {
    if (x < 0.0f) throw NumericError("sqrt of negative value");
    return std::sqrt(x);
  });
  return record_op("sqrt", out, {a}, [out](const Tensor& g, const Needs&) {
    return std::vector<Tensor>{div(scale(g, 0.5f), out)};
  });
}

Tensor leaky_relu(const Tensor& x, float slope) {
  Tensor out =
      map_unary(x, [slope](float v) { return v >= 0.0f ? v : slope * v; });
  return record_op("leaky_relu", out, {x}, [x, slope](const Tensor& g, const Needs&) {
    return std::vector<Tensor>{leaky_relu_backward(g, x, slope)};
  });
}

Tensor leaky_relu_backward(const Tensor& grad, const Tensor& x, float slope) {
  Tensor out = map_binary("leaky_relu_backward", grad, x,
                          [slope](float g, float v) {
                            return v > 0.0f ? g : slope * g;
                          });
  return record_op("leaky_relu_backward", out, {grad, x},
                   [x, slope](const Tensor& gg, const Needs&) {
                     return std::vector<Tensor>{
                         leaky_relu_backward(gg, x, slope), Tensor()};
                   });
}

Tensor sum(const Tensor& a, std::vector<int> axes, bool keepdim) {
  axes = normalize_axes("sum", std::move(axes), a.ndim());
  const Reduction r = plan_reduction("sum", a, axes, keepdim);
  Tensor out = Tensor::from_vector(r.out_shape,
                                   reduce_sum(a, r.kept_shape, 1.0));
  const Shape in_shape = a.shape();
  const Shape kept = r.kept_shape;
  return record_op("sum", out, {a}, [in_shape, kept](const Tensor& g, const Needs&) {
    return std::vector<Tensor>{expand(reshape(g, kept), in_shape)};
  });
}

Tensor mean(const Tensor& a, std::vector<int> axes, bool keepdim) {
  axes = normalize_axes("mean", std::move(axes), a.ndim());
  const Reduction r = plan_reduction("mean", a, axes, keepdim);
  const double inv = 1.0 / static_cast<double>(r.count);
  Tensor out = Tensor::from_vector(r.out_shape,
                                   reduce_sum(a, r.kept_shape, inv));
  const Shape in_shape = a.shape();
  const Shape kept = r.kept_shape;
  const float finv = static_cast<float>(inv);
  return record_op("mean", out, {a}, [in_shape, kept, finv](const Tensor& g, const Needs&) {
    return std::vector<Tensor>{
        scale(expand(reshape(g, kept), in_shape), finv)};
  });
}

Tensor expand(const Tensor& a, const Shape& shape) {
  if (static_cast<int>(shape.size()) != a.ndim()) {
    throw ShapeError("expand: rank mismatch " + to_string(a.shape()) + " -> " +
                     to_string(shape));
  }
  std::vector<int> expanded;
  for (int i = 0; i < a.ndim(); ++i) {
    const auto from = a.shape()[static_cast<std::size_t>(i)];
    const auto to = shape[static_cast<std::size_t>(i)];
    if (from == to) continue;
    if (from != 1) {
      throw ShapeError("expand: cannot expand " + to_string(a.shape()) +
                       " to " + to_string(shape));
    }
    expanded.push_back(i);
  }
  if (expanded.empty()) return a;

  const Tensor ac = a.contiguous();
  auto in = ac.data();
  const std::size_t rank = shape.size();
  const Shape in_strides = contiguous_strides(a.shape());
  Shape src_strides(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    src_strides[i] = a.shape()[i] == 1 ? 0 : in_strides[i];
  }
  std::vector<float> out(static_cast<std::size_t>(numel(shape)));
  std::vector<std::int64_t> idx(rank, 0);
  std::int64_t src = 0;
  for (std::size_t flat = 0; flat < out.size(); ++flat) {
    out[flat] = in[static_cast<std::size_t>(src)];
    for (std::size_t ax = rank; ax-- > 0;) {
      ++idx[ax];
      src += src_strides[ax];
      if (idx[ax] < shape[ax]) break;
      src -= src_strides[ax] * idx[ax];
      idx[ax] = 0;
    }
  }
  Tensor result = Tensor::from_vector(shape, std::move(out));
  return record_op("expand", result, {a}, [expanded](const Tensor& g, const Needs&) {
    return std::vector<Tensor>{sum(g, expanded, true)};
  });
}

Tensor reshape(const Tensor& a, const Shape& shape) {
  if (numel(shape) != a.numel()) {
    throw ShapeError("reshape: " + to_string(a.shape()) + " has " +
                     std::to_string(a.numel()) + " elements, target " +
                     to_string(shape) + " has " +
                     std::to_string(numel(shape)));
  }
  const Tensor base = a.contiguous();
  Tensor out = base.alias(shape, contiguous_strides(shape), base.offset());
  const Shape in_shape = a.shape();
  return record_op("reshape", out, {a}, [in_shape](const Tensor& g, const Needs&) {
    return std::vector<Tensor>{reshape(g, in_shape)};
  });
}

Tensor narrow(const Tensor& a, int axis, std::int64_t start,
              std::int64_t length) {
  axis = normalize_axis("narrow", axis, a.ndim());
  const auto extent = a.shape()[static_cast<std::size_t>(axis)];
  if (start < 0 || length < 0 || start + length > extent) {
    throw ShapeError("narrow: range [" + std::to_string(start) + ", " +
                     std::to_string(start + length) + ") outside axis " +
                     std::to_string(axis) + " of " + to_string(a.shape()));
  }
  Shape shape = a.shape();
  shape[static_cast<std::size_t>(axis)] = length;
  Tensor out = a.alias(
      shape, a.strides(),
      a.offset() + start * a.strides()[static_cast<std::size_t>(axis)]);
  const Shape in_shape = a.shape();
  return record_op("narrow", out, {a},
                   [in_shape, axis, start](const Tensor& g, const Needs&) {
                     return std::vector<Tensor>{
                         embed(g, in_shape, axis, start)};
                   });
}

Tensor embed(const Tensor& a, const Shape& shape, int axis,
             std::int64_t start) {
  axis = normalize_axis("embed", axis, a.ndim());
  const auto ax = static_cast<std::size_t>(axis);
  if (static_cast<int>(shape.size()) != a.ndim()) {
    throw ShapeError("embed: rank mismatch");
  }
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i != ax && shape[i] != a.shape()[i]) {
      throw ShapeError("embed: " + to_string(a.shape()) + " does not fit " +
                       to_string(shape));
    }
  }
  const std::int64_t length = a.shape()[ax];
  if (start < 0 || start + length > shape[ax]) {
    throw ShapeError("embed: range outside target axis");
  }
  const Tensor ac = a.contiguous();
  auto in = ac.data();
  std::int64_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < ax; ++i) outer *= shape[i];
  for (std::size_t i = ax + 1; i < shape.size(); ++i) inner *= shape[i];
  std::vector<float> out(static_cast<std::size_t>(numel(shape)), 0.0f);
  for (std::int64_t o = 0; o < outer; ++o) {
    const float* src = in.data() + o * length * inner;
    float* dst = out.data() + (o * shape[ax] + start) * inner;
    std::copy(src, src + length * inner, dst);
  }
  Tensor result = Tensor::from_vector(shape, std::move(out));
  return record_op("embed", result, {a},
                   [axis, start, length](const Tensor& g, const Needs&) {
                     return std::vector<Tensor>{
                         narrow(g, axis, start, length)};
                   });
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  axis = normalize_axis("concat", axis, parts[0].ndim());
  const auto ax = static_cast<std::size_t>(axis);
  Shape shape = parts[0].shape();
  shape[ax] = 0;
  for (const auto& p : parts) {
    if (p.ndim() != parts[0].ndim()) throw ShapeError("concat: rank mismatch");
    for (std::size_t i = 0; i < shape.size(); ++i) {
      if (i != ax && p.shape()[i] != parts[0].shape()[i]) {
        throw ShapeError("concat: incompatible shapes " +
                         to_string(parts[0].shape()) + " and " +
                         to_string(p.shape()));
      }
    }
    shape[ax] += p.shape()[ax];
  }
  std::int64_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < ax; ++i) outer *= shape[i];
  for (std::size_t i = ax + 1; i < shape.size(); ++i) inner *= shape[i];
  std::vector<float> out(static_cast<std::size_t>(numel(shape)));
  std::int64_t start = 0;
  std::vector<std::int64_t> starts;
  for (const auto& p : parts) {
    starts.push_back(start);
    const Tensor pc = p.contiguous();
    auto in = pc.data();
    const std::int64_t len = p.shape()[ax];
    for (std::int64_t o = 0; o < outer; ++o) {
      std::copy(in.data() + o * len * inner, in.data() + (o + 1) * len * inner,
                out.data() + (o * shape[ax] + start) * inner);
    }
    start += len;
  }
  Tensor result = Tensor::from_vector(shape, std::move(out));
  std::vector<std::int64_t> lengths;
  for (const auto& p : parts) lengths.push_back(p.shape()[ax]);
  return record_op("concat", result, parts,
                   [axis, starts, lengths](const Tensor& g, const Needs&) {
                     std::vector<Tensor> grads;
                     for (std::size_t i = 0; i < starts.size(); ++i) {
                       grads.push_back(narrow(g, axis, starts[i], lengths[i]));
                     }
                     return grads;
                   });
}

Tensor matmul(const Tensor& a, const Tensor& b, bool transpose_a,
              bool transpose_b) {
  require_rank("matmul", a, 2);
  require_rank("matmul", b, 2);
  const std::int64_t m = transpose_a ? a.dim(1) : a.dim(0);
  const std::int64_t k = transpose_a ? a.dim(0) : a.dim(1);
  const std::int64_t kb = transpose_b ? b.dim(1) : b.dim(0);
  const std::int64_t n = transpose_b ? b.dim(0) : b.dim(1);
  if (k != kb) {
    throw ShapeError("matmul: inner dimensions differ for " +
                     to_string(a.shape()) + (transpose_a ? "^T" : "") +
                     " and " + to_string(b.shape()) +
                     (transpose_b ? "^T" : ""));
  }
  const Tensor ac = a.contiguous();
  const Tensor bc = b.contiguous();
  auto x = ac.data();
  auto y = bc.data();
  const std::int64_t lda = a.dim(1), ldb = b.dim(1);
  std::vector<float> out(static_cast<std::size_t>(m * n));
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < m; ++i) {
    for (std::int64_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::int64_t p = 0; p < k; ++p) {
        const float av = transpose_a ? x[p * lda + i] : x[i * lda + p];
        const float bv = transpose_b ? y[j * ldb + p] : y[p * ldb + j];
        acc += static_cast<double>(av) * bv;
      }
      out[static_cast<std::size_t>(i * n + j)] = static_cast<float>(acc);
    }
  }
  Tensor result = Tensor::from_vector({m, n}, std::move(out));
  return record_op(
      "matmul", result, {a, b},
      [a, b, transpose_a, transpose_b](const Tensor& g, const Needs& need) {
        Tensor ga, gb;
        if (need[0]) {
          ga = transpose_a ? matmul(b, g, transpose_b, true)
                           : matmul(g, b, false, !transpose_b);
        }
        if (need[1]) {
          gb = transpose_b ? matmul(g, a, true, transpose_a)
                           : matmul(a, g, !transpose_a, false);
        }
        return std::vector<Tensor>{ga, gb};
      });
}

Tensor add_channel_bias(const Tensor& x, const Tensor& bias) {
  if (x.ndim() < 2 || bias.ndim() != 1 || bias.dim(0) != x.dim(1)) {
    throw ShapeError("add_channel_bias: bias " + to_string(bias.shape()) +
                     " does not match channels of " + to_string(x.shape()));
  }
  const Tensor xc = x.contiguous();
  const Tensor bc = bias.contiguous();
  auto in = xc.data();
  auto bv = bc.data();
  const std::int64_t channels = x.dim(1);
  const std::int64_t inner = x.numel() / (x.dim(0) * channels);
  std::vector<float> out(in.begin(), in.end());
  for (std::int64_t b = 0; b < x.dim(0); ++b) {
    for (std::int64_t c = 0; c < channels; ++c) {
      float* row = out.data() + (b * channels + c) * inner;
      for (std::int64_t i = 0; i < inner; ++i) row[i] += bv[c];
    }
  }
  Tensor result = Tensor::from_vector(x.shape(), std::move(out));
  std::vector<int> axes;
  for (int i = 0; i < x.ndim(); ++i) {
    if (i != 1) axes.push_back(i);
  }
  return record_op("add_channel_bias", result, {x, bias},
                   [axes](const Tensor& g, const Needs& need) {
                     return std::vector<Tensor>{
                         g, need[1] ? sum(g, axes, false) : Tensor()};
                   });
}

Tensor conv3d(const Tensor& x, const Tensor& weight) {
  const auto g = conv_geometry("conv3d", x.shape(), weight.shape());
  const Tensor xc = x.contiguous();
  const Tensor wc = weight.contiguous();
  Tensor out = Tensor::zeros({g.batch, g.out_channels, g.depth, g.height,
                              g.width});
  kernels::conv3d_forward(xc.data(), wc.data(), out.mutable_data(), g);
  const int k = g.kernel;
  return record_op("conv3d", out, {x, weight}, [x, weight, k](const Tensor& go, const Needs& need) {
    return std::vector<Tensor>{
        need[0] ? conv3d_backward_data(go, weight) : Tensor(),
        need[1] ? conv3d_backward_weight(x, go, k) : Tensor()};
  });
}

Tensor conv3d_backward_data(const Tensor& grad_out, const Tensor& weight) {
  if (grad_out.ndim() != 5 || weight.ndim() != 5 ||
      grad_out.dim(1) != weight.dim(0)) {
    throw ShapeError("conv3d_backward_data: grad " +
                     to_string(grad_out.shape()) + " vs weight " +
                     to_string(weight.shape()));
  }
  Shape in_shape = grad_out.shape();
  in_shape[1] = weight.dim(1);
  const auto g = conv_geometry("conv3d_backward_data", in_shape,
                               weight.shape());
  const Tensor gc = grad_out.contiguous();
  const Tensor wc = weight.contiguous();
  Tensor out = Tensor::zeros(in_shape);
  kernels::conv3d_backward_data(gc.data(), wc.data(), out.mutable_data(), g);
  const int k = g.kernel;
  return record_op("conv3d_backward_data", out, {grad_out, weight},
                   [grad_out, weight, k](const Tensor& gg, const Needs& need) {
                     return std::vector<Tensor>{
                         need[0] ? conv3d(gg, weight) : Tensor(),
                         need[1] ? conv3d_backward_weight(gg, grad_out, k)
                                 : Tensor()};
                   });
}

Tensor conv3d_backward_weight(const Tensor& x, const Tensor& grad_out, int k) {
  if (x.ndim() != 5 || grad_out.ndim() != 5 || x.dim(0) != grad_out.dim(0) ||
      x.dim(2) != grad_out.dim(2) || x.dim(3) != grad_out.dim(3) ||
      x.dim(4) != grad_out.dim(4)) {
    throw ShapeError("conv3d_backward_weight: input " + to_string(x.shape()) +
                     " vs grad " + to_string(grad_out.shape()));
  }
  const Shape w_shape{grad_out.dim(1), x.dim(1), k, k, k};
  const auto g = conv_geometry("conv3d_backward_weight", x.shape(), w_shape);
  const Tensor xc = x.contiguous();
  const Tensor gc = grad_out.contiguous();
  Tensor out = Tensor::zeros(w_shape);
  kernels::conv3d_backward_weight(xc.data(), gc.data(), out.mutable_data(), g);
  return record_op("conv3d_backward_weight", out, {x, grad_out},
                   [x, grad_out](const Tensor& gg, const Needs& need) {
                     return std::vector<Tensor>{
                         need[0] ? conv3d_backward_data(grad_out, gg)
                                 : Tensor(),
                         need[1] ? conv3d(x, gg) : Tensor()};
                   });
}

Tensor upsample_nearest_2x(const Tensor& a) {
  require_rank("upsample_nearest_2x", a, 5);
  const auto& s = a.shape();
  const Tensor ac = a.contiguous();
  Tensor out = Tensor::zeros({s[0], s[1], 2 * s[2], 2 * s[3], 2 * s[4]});
  kernels::upsample_nearest_2x(ac.data(), out.mutable_data(), s[0] * s[1],
                               s[2], s[3], s[4]);
  return record_op("upsample_nearest_2x", out, {a}, [](const Tensor& g, const Needs&) {
    return std::vector<Tensor>{scale(downsample_avg_2x(g), 8.0f)};
  });
}

Tensor downsample_avg_2x(const Tensor& a) {
  require_rank("downsample_avg_2x", a, 5);
  const auto& s = a.shape();
  if (s[2] % 2 || s[3] % 2 || s[4] % 2) {
    throw ShapeError("downsample_avg_2x: spatial extents must be even, got " +
                     to_string(s));
  }
  const Tensor ac = a.contiguous();
  Tensor out = Tensor::zeros({s[0], s[1], s[2] / 2, s[3] / 2, s[4] / 2});
  kernels::downsample_avg_2x(ac.data(), out.mutable_data(), s[0] * s[1], s[2],
                             s[3], s[4]);
  return record_op("downsample_avg_2x", out, {a}, [](const Tensor& g, const Needs&) {
    return std::vector<Tensor>{scale(upsample_nearest_2x(g), 0.125f)};
  });
}

bool all_finite(const Tensor& a) {
  const Tensor ac = a.contiguous();
  for (float v : ac.data()) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace voxgan
