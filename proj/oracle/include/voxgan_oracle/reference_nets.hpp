#pragma once

#include <map>
#include <string>
#include <vector>

#include "voxgan/nets.hpp"
#include "voxgan_oracle/reference.hpp"

namespace voxgan::oracle {

using RefWeights = std::map<std::string, Array>;

RefWeights to_reference(const NetworkWeights& weights);

// Float64 re-implementations of the two networks, structured after the
// architecture description rather than the production code.
Array generator(const RefWeights& w, const Array& z, int stage, double alpha,
                Branches* branches = nullptr);
Array discriminator(const RefWeights& w, const Array& x, int stage,
                    double alpha, Branches* branches = nullptr);

// Gradient of sum_b D(x)_b with respect to x, by a hand-written reverse pass.
Array discriminator_input_grad(const RefWeights& w, const Array& x, int stage,
                               double alpha, Branches* branches = nullptr);

// x_hat_b = u_b * real_b + (1 - u_b) * fake_b, evaluated in float32 like the
// production code so both sides see the same interpolates.
Array interpolate(const Tensor& real, const Tensor& fake,
                  const std::vector<float>& u);

// mean_b (||grad_x D(x_hat)_b|| - 1)^2
double gradient_penalty(const RefWeights& w, const Array& x_hat, int stage,
                        double alpha, Branches* branches = nullptr);

}  // namespace voxgan::oracle
