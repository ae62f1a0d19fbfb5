#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "slogan/rng.hpp"
#include "slogan/tensor.hpp"

namespace slogan {

struct AdamConfig {
  real beta1 = 0.9;
  real beta2 = 0.999;
  real eps = 1e-8;
};

/// Named trainable parameters plus their Adam state.
class ParamStore {
 public:
  explicit ParamStore(AdamConfig adam = {}) : adam_(adam) {}

  // Registers `init` (marked requires_grad) and returns the shared handle.
  Tensor add(const std::string& name, Tensor init);

  Tensor get(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) > 0; }
  std::size_t size() const { return entries_.size(); }
  std::vector<std::string> names() const;
  std::vector<Tensor> tensors() const;
  std::int64_t step_count() const { return step_; }

  // Bias-corrected Adam update of every parameter, then grads are cleared.
  // Throws naming the first parameter with no populated gradient.
  void adam_step(real lr);
  void zero_grad();
  bool all_have_grad() const;

  // Independent copy of parameters and optimizer state.
  ParamStore deep_copy() const;

  // Snapshot of all parameter values in registration order.
  std::vector<real> flat_values() const;

 private:
  struct Entry {
    std::string name;
    Tensor param;
    std::vector<real> m;
    std::vector<real> v;
  };
  AdamConfig adam_;
  std::vector<Entry> entries_;
  std::map<std::string, std::size_t> index_;
  std::int64_t step_ = 0;
};

Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng);

}  // namespace slogan
