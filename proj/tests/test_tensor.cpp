#include <gtest/gtest.h>

#include "voxgan/error.hpp"
#include "voxgan/ops.hpp"
#include "voxgan/tensor.hpp"

using namespace voxgan;

TEST(Tensor, FactoriesFillValues) {
  EXPECT_EQ(Tensor::zeros({2, 3}).to_vector(), std::vector<float>(6, 0.0f));
  EXPECT_EQ(Tensor::ones({4}).to_vector(), std::vector<float>(4, 1.0f));
  EXPECT_EQ(Tensor::full({2}, 2.5f).to_vector(), (std::vector<float>{2.5f, 2.5f}));
  const Tensor s = Tensor::scalar(3.0f);
  EXPECT_EQ(s.ndim(), 0);
  EXPECT_EQ(s.numel(), 1);
  EXPECT_FLOAT_EQ(s.item(), 3.0f);
}

TEST(Tensor, FromVectorRejectsWrongLength) {
  EXPECT_THROW(Tensor::from_vector({2, 2}, {1, 2, 3}), ShapeError);
}

TEST(Tensor, ContiguousStridesAreRowMajor) {
  EXPECT_EQ(contiguous_strides({2, 3, 4}), (Shape{12, 4, 1}));
  EXPECT_EQ(numel({2, 3, 4}), 24);
  EXPECT_EQ(numel({}), 1);
}

TEST(Tensor, CopiesAliasAndCloneDoesNot) {
  Tensor a = Tensor::zeros({3});
  Tensor b = a;
  b.set({1}, 5.0f);
  EXPECT_FLOAT_EQ(a.at({1}), 5.0f);
  Tensor c = a.clone();
  c.set({1}, 7.0f);
  EXPECT_FLOAT_EQ(a.at({1}), 5.0f);
  EXPECT_FALSE(a.same_storage(c));
}

TEST(Tensor, NegativeAxisCountsFromTheEnd) {
  const Tensor a = Tensor::zeros({2, 3, 5});
  EXPECT_EQ(a.dim(-1), 5);
  EXPECT_EQ(a.dim(-3), 2);
  EXPECT_THROW(a.dim(3), ShapeError);
}

TEST(Tensor, ViewsShareStorage) {
  Tensor a = Tensor::from_vector({2, 3}, {0, 1, 2, 3, 4, 5});
  Tensor r = reshape(a, {3, 2});
  EXPECT_TRUE(r.same_storage(a));
  Tensor n = narrow(a, 1, 1, 2);
  EXPECT_TRUE(n.same_storage(a));
  EXPECT_FALSE(n.is_contiguous());
  EXPECT_EQ(n.to_vector(), (std::vector<float>{1, 2, 4, 5}));
  EXPECT_THROW(n.data(), Error);
  const Tensor c = n.contiguous();
  EXPECT_TRUE(c.is_contiguous());
  EXPECT_EQ(c.to_vector(), n.to_vector());
}

TEST(Tensor, ItemRequiresSingleElement) {
  EXPECT_THROW(Tensor::zeros({2}).item(), ShapeError);
}

TEST(Tensor, ZeroExtentTensorsExist) {
  const Tensor a = Tensor::zeros({0, 3});
  EXPECT_EQ(a.numel(), 0);
  EXPECT_TRUE(a.to_vector().empty());
}

TEST(Tensor, DetachDropsGradTracking) {
  Tensor a = Tensor::ones({2});
  a.set_requires_grad(true);
  const Tensor d = a.detach();
  EXPECT_FALSE(d.requires_grad());
  EXPECT_TRUE(d.same_storage(a));
}
