#pragma once

#include <string>

#include "slogan/param_store.hpp"
#include "slogan/rng.hpp"
#include "slogan/tensor.hpp"

namespace slogan {

// Affine map x W + b with W (in x out) and bias row (1 x out).
struct Linear {
  Tensor weight;
  Tensor bias;

  static Linear glorot(std::size_t in, std::size_t out, Rng& rng);
  static Linear zeros(std::size_t in, std::size_t out);

  std::size_t in_dim() const { return weight.rows(); }
  std::size_t out_dim() const { return weight.cols(); }

  Tensor forward(const Tensor& x) const;
  void register_in(ParamStore& store, const std::string& prefix);
  Linear detached() const { return {weight.detach(), bias.detach()}; }
};

}  // namespace slogan
