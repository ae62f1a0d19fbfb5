#include "slogan/linear.hpp"

#include "slogan/error.hpp"

namespace slogan {

Linear Linear::glorot(std::size_t in, std::size_t out, Rng& rng) {
  return {glorot_uniform(in, out, rng), Tensor::zeros({1, out})};
}

Linear Linear::zeros(std::size_t in, std::size_t out) { return {Tensor::zeros({in, out}), Tensor::zeros({1, out})}; }

Tensor Linear::forward(const Tensor& x) const {
  if (x.rank() != 2 || x.cols() != in_dim())
    throw ShapeError("linear: input " + shape_str(x.shape()) + " does not match weight " + shape_str(weight.shape()));
  return add(matmul(x, weight), bias);
}

void Linear::register_in(ParamStore& store, const std::string& prefix) {
  weight = store.add(prefix + ".weight", weight);
  bias = store.add(prefix + ".bias", bias);
}

}  // namespace slogan
