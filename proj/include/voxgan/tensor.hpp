#pragma once

#include <cstdint>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace voxgan {

using Shape = std::vector<std::int64_t>;

std::int64_t numel(const Shape& shape);
std::string to_string(const Shape& shape);
Shape contiguous_strides(const Shape& shape);

struct TensorImpl;

// Dense float32 N-d array with shared storage. Copies of a Tensor alias the
// same data; use clone() for a deep copy. Views (reshape, narrow) share the
// base storage with their own shape/strides/offset.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(const Shape& shape);
  static Tensor ones(const Shape& shape);
  static Tensor full(const Shape& shape, float value);
  static Tensor from_vector(const Shape& shape, std::vector<float> values);
  static Tensor scalar(float value);

  bool defined() const { return impl_ != nullptr; }
  std::uint64_t id() const;

  const Shape& shape() const;
  const Shape& strides() const;
  std::int64_t offset() const;
  std::int64_t dim(int axis) const;
  int ndim() const;
  std::int64_t numel() const;
  bool is_contiguous() const;

  // Contiguous element access; throws when the tensor is a strided view.
  std::span<const float> data() const;
  std::span<float> mutable_data();

  // Row-major element values regardless of layout.
  std::vector<float> to_vector() const;
  float item() const;
  float at(std::initializer_list<std::int64_t> index) const;
  void set(std::initializer_list<std::int64_t> index, float value);

  bool requires_grad() const;
  Tensor& set_requires_grad(bool flag);
  bool is_leaf() const;

  // Accumulated gradient of a leaf after backward(); undefined if none.
  Tensor grad() const;
  void zero_grad();
  void accumulate_grad(const Tensor& g);

  Tensor detach() const;
  Tensor clone() const;
  // Same tensor when already contiguous, otherwise an untracked copy.
  Tensor contiguous() const;

  bool same_storage(const Tensor& other) const;

  const std::shared_ptr<TensorImpl>& impl() const { return impl_; }
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

  // Aliasing view over this tensor's storage. Not recorded on any tape; the
  // differentiable views live in ops.hpp.
  Tensor alias(const Shape& shape, const Shape& strides,
               std::int64_t offset) const;

 private:
  std::int64_t flat_index(std::initializer_list<std::int64_t> index) const;

  std::shared_ptr<TensorImpl> impl_;
};

struct TensorImpl {
  Shape shape;
  Shape strides;
  std::int64_t offset = 0;
  std::shared_ptr<std::vector<float>> storage;
  bool requires_grad = false;
  bool is_leaf = true;
  std::shared_ptr<TensorImpl> grad;
  std::uint64_t id = 0;
};

}  // namespace voxgan
