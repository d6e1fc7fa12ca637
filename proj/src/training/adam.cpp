#include "mdiff/training/adam.hpp"

#include <cmath>

#include "mdiff/errors.hpp"

namespace mdiff::training {

void adam_step(std::map<std::string, num::DenseArray>& params, const num::Gradients& grads, AdamState& state,
               const AdamConfig& cfg) {
  if (grads.size() != params.size()) {
    throw ContractError("optimizer got " + std::to_string(grads.size()) + " gradients for " +
                        std::to_string(params.size()) + " parameters");
  }
  for (const auto& [name, value] : params) {
    const auto it = grads.find(name);
    if (it == grads.end()) throw ContractError("no gradient for parameter '" + name + "'");
    if (it->second.shape() != value.shape()) throw ContractError("gradient shape mismatch for '" + name + "'");
    if (!it->second.all_finite()) throw NumericError("non-finite gradient for parameter '" + name + "'");
  }

  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (auto& [name, value] : params) {
    const num::DenseArray& g = grads.at(name);
    auto [mi, m_new] = state.m.try_emplace(name, value.shape(), 0.0);
    auto [vi, v_new] = state.v.try_emplace(name, value.shape(), 0.0);
    num::DenseArray& m = mi->second;
    num::DenseArray& v = vi->second;
    for (std::size_t i = 0; i < value.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      value[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
    }
  }
}

double clip_global_norm(num::Gradients& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& [name, g] : grads) {
    for (double x : g.values()) sq += x * x;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double f = max_norm / norm;
    for (auto& [name, g] : grads) {
      for (double& x : g.values()) x *= f;
    }
  }
  return norm;
}

}  // namespace mdiff::training
