#include "slogan/param_store.hpp"

#include <cmath>

#include "slogan/error.hpp"

namespace slogan {

Tensor ParamStore::add(const std::string& name, Tensor init) {
  if (!init.defined()) throw Error("ParamStore::add: parameter '" + name + "' is undefined");
  if (index_.count(name)) throw Error("ParamStore::add: duplicate parameter name '" + name + "'");
  init.set_requires_grad(true);
  index_.emplace(name, entries_.size());
  const std::size_t n = init.numel();
  entries_.push_back({name, init, std::vector<real>(n, 0), std::vector<real>(n, 0)});
  return init;
}

Tensor ParamStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw Error("ParamStore::get: unknown parameter '" + name + "'");
  return entries_[it->second].param;
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  for (const auto& e : entries_) out.push_back(e.name);
  return out;
}

std::vector<Tensor> ParamStore::tensors() const {
  std::vector<Tensor> out;
  for (const auto& e : entries_) out.push_back(e.param);
  return out;
}

bool ParamStore::all_have_grad() const {
  for (const auto& e : entries_) {
    if (!e.param.has_grad()) return false;
  }
  return true;
}

void ParamStore::adam_step(real lr) {
  for (const auto& e : entries_) {
    if (!e.param.has_grad()) throw Error("adam_step: parameter '" + e.name + "' has no gradient");
  }
  ++step_;
  const real t = static_cast<real>(step_);
  const real bc1 = 1 - std::pow(adam_.beta1, t);
  const real bc2 = 1 - std::pow(adam_.beta2, t);
  for (auto& e : entries_) {
    auto w = e.param.mutable_values();
    auto g = e.param.grad();
    for (std::size_t i = 0; i < w.size(); ++i) {
      e.m[i] = adam_.beta1 * e.m[i] + (1 - adam_.beta1) * g[i];
      e.v[i] = adam_.beta2 * e.v[i] + (1 - adam_.beta2) * g[i] * g[i];
      const real mhat = e.m[i] / bc1;
      const real vhat = e.v[i] / bc2;
      w[i] -= lr * mhat / (std::sqrt(vhat) + adam_.eps);
    }
    e.param.clear_grad();
  }
}

void ParamStore::zero_grad() {
  for (auto& e : entries_) e.param.clear_grad();
}

ParamStore ParamStore::deep_copy() const {
  ParamStore out(adam_);
  out.entries_ = entries_;
  for (auto& e : out.entries_) {
    e.param = e.param.clone();
    e.param.clear_grad();
  }
  out.index_ = index_;
  out.step_ = step_;
  return out;
}

std::vector<real> ParamStore::flat_values() const {
  std::vector<real> out;
  for (const auto& e : entries_) out.insert(out.end(), e.param.values().begin(), e.param.values().end());
  return out;
}

Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::vector<real> w(fan_in * fan_out);
  for (auto& v : w) v = static_cast<real>(rng.uniform(-limit, limit));
  return Tensor::from({fan_in, fan_out}, std::move(w));
}

}  // namespace slogan
