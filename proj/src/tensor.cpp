#include "voxgan/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <sstream>

#include "voxgan/error.hpp"

namespace voxgan {
namespace {

std::uint64_t next_id() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

std::shared_ptr<TensorImpl> make_impl(const Shape& shape,
                                      std::vector<float> values) {
  for (auto extent : shape) {
    if (extent < 0) {
      throw ShapeError("negative extent in shape " + to_string(shape));
    }
  }
  if (static_cast<std::int64_t>(values.size()) != numel(shape)) {
    throw ShapeError("shape " + to_string(shape) + " needs " +
                     std::to_string(numel(shape)) + " values, got " +
                     std::to_string(values.size()));
  }
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = shape;
  impl->strides = contiguous_strides(shape);
  impl->storage = std::make_shared<std::vector<float>>(std::move(values));
  impl->id = next_id();
  return impl;
}

}  // namespace

std::int64_t numel(const Shape& shape) {
  std::int64_t n = 1;
  for (auto extent : shape) n *= extent;
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Shape contiguous_strides(const Shape& shape) {
  Shape strides(shape.size());
  std::int64_t s = 1;
  for (std::size_t i = shape.size(); i-- > 0;) {
    strides[i] = s;
    s *= shape[i];
  }
  return strides;
}

Tensor Tensor::zeros(const Shape& shape) { return full(shape, 0.0f); }
Tensor Tensor::ones(const Shape& shape) { return full(shape, 1.0f); }

Tensor Tensor::full(const Shape& shape, float value) {
  for (auto extent : shape) {
    if (extent < 0) {
      throw ShapeError("negative extent in shape " + to_string(shape));
    }
  }
  return Tensor(make_impl(
      shape, std::vector<float>(static_cast<std::size_t>(voxgan::numel(shape)),
                                value)));
}

Tensor Tensor::from_vector(const Shape& shape, std::vector<float> values) {
  return Tensor(make_impl(shape, std::move(values)));
}

Tensor Tensor::scalar(float value) { return from_vector({}, {value}); }

std::uint64_t Tensor::id() const { return impl_ ? impl_->id : 0; }

const Shape& Tensor::shape() const { return impl_->shape; }
const Shape& Tensor::strides() const { return impl_->strides; }
std::int64_t Tensor::offset() const { return impl_->offset; }

std::int64_t Tensor::dim(int axis) const {
  const int n = ndim();
  if (axis < 0) axis += n;
  if (axis < 0 || axis >= n) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " +
                     to_string(shape()));
  }
  return impl_->shape[static_cast<std::size_t>(axis)];
}

int Tensor::ndim() const { return static_cast<int>(impl_->shape.size()); }
std::int64_t Tensor::numel() const { return voxgan::numel(impl_->shape); }

bool Tensor::is_contiguous() const {
  return impl_->strides == contiguous_strides(impl_->shape);
}

std::span<const float> Tensor::data() const {
  if (!is_contiguous()) {
    throw ShapeError("data() on a non-contiguous view; call contiguous()");
  }
  return {impl_->storage->data() + impl_->offset,
          static_cast<std::size_t>(numel())};
}

std::span<float> Tensor::mutable_data() {
  if (!is_contiguous()) {
    throw ShapeError("mutable_data() on a non-contiguous view");
  }
  return {impl_->storage->data() + impl_->offset,
          static_cast<std::size_t>(numel())};
}

std::vector<float> Tensor::to_vector() const {
  if (is_contiguous()) {
    auto d = data();
    return {d.begin(), d.end()};
  }
  const auto& shp = shape();
  const auto& str = strides();
  std::vector<float> out(static_cast<std::size_t>(numel()));
  std::vector<std::int64_t> idx(shp.size(), 0);
  const float* base = impl_->storage->data() + impl_->offset;
  for (std::size_t flat = 0; flat < out.size(); ++flat) {
    std::int64_t off = 0;
    for (std::size_t a = 0; a < shp.size(); ++a) off += idx[a] * str[a];
    out[flat] = base[off];
    for (std::size_t a = shp.size(); a-- > 0;) {
      if (++idx[a] < shp[a]) break;
      idx[a] = 0;
    }
  }
  return out;
}

float Tensor::item() const {
  if (numel() != 1) {
    throw ShapeError("item() needs a single-element tensor, got " +
                     to_string(shape()));
  }
  return (*impl_->storage)[static_cast<std::size_t>(impl_->offset)];
}

std::int64_t Tensor::flat_index(
    std::initializer_list<std::int64_t> index) const {
  if (static_cast<int>(index.size()) != ndim()) {
    throw ShapeError("index rank mismatch for " + to_string(shape()));
  }
  std::int64_t off = impl_->offset;
  std::size_t a = 0;
  for (auto i : index) {
    if (i < 0 || i >= impl_->shape[a]) {
      throw ShapeError("index out of range for " + to_string(shape()));
    }
    off += i * impl_->strides[a];
    ++a;
  }
  return off;
}

float Tensor::at(std::initializer_list<std::int64_t> index) const {
  return (*impl_->storage)[static_cast<std::size_t>(flat_index(index))];
}

void Tensor::set(std::initializer_list<std::int64_t> index, float value) {
  (*impl_->storage)[static_cast<std::size_t>(flat_index(index))] = value;
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool flag) {
  impl_->requires_grad = flag;
  return *this;
}

bool Tensor::is_leaf() const { return impl_->is_leaf; }

Tensor Tensor::grad() const {
  return impl_->grad ? Tensor(impl_->grad) : Tensor();
}

void Tensor::zero_grad() { impl_->grad.reset(); }

void Tensor::accumulate_grad(const Tensor& g) {
  if (g.shape() != shape()) {
    throw ShapeError("gradient shape " + to_string(g.shape()) +
                     " does not match " + to_string(shape()));
  }
  auto values = g.to_vector();
  if (!impl_->grad) {
    impl_->grad = Tensor::from_vector(shape(), std::move(values)).impl();
    return;
  }
  auto& acc = *impl_->grad->storage;
  for (std::size_t i = 0; i < values.size(); ++i) acc[i] += values[i];
}

Tensor Tensor::detach() const {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = impl_->shape;
  impl->strides = impl_->strides;
  impl->offset = impl_->offset;
  impl->storage = impl_->storage;
  impl->id = next_id();
  return Tensor(impl);
}

Tensor Tensor::clone() const { return from_vector(shape(), to_vector()); }

Tensor Tensor::contiguous() const {
  if (is_contiguous()) return *this;
  return clone();
}

bool Tensor::same_storage(const Tensor& other) const {
  return impl_ && other.impl_ && impl_->storage == other.impl_->storage;
}

Tensor Tensor::alias(const Shape& shape, const Shape& strides,
                     std::int64_t offset) const {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = shape;
  impl->strides = strides;
  impl->offset = offset;
  impl->storage = impl_->storage;
  impl->id = next_id();
  return Tensor(impl);
}

}  // namespace voxgan
