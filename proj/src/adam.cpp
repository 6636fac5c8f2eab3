#include "dconad/adam.hpp"

#include <cmath>

namespace dconad {

void adam_apply(std::vector<Tensor>& params, const std::vector<Array>& grads, AdamState& state) {
  if (grads.size() != params.size()) {
    throw DimensionError("adam_apply: " + std::to_string(params.size()) + " params vs " +
                         std::to_string(grads.size()) + " grads");
  }
  if (state.m.empty()) {
    state.m.resize(params.size());
    state.v.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.m[i] = Array::Zero(params[i].size());
      state.v[i] = Array::Zero(params[i].size());
    }
  }
  if (state.m.size() != params.size()) {
    throw DimensionError("adam_apply: state holds " + std::to_string(state.m.size()) +
                         " buffers for " + std::to_string(params.size()) + " params");
  }
  state.step_count += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = params[i];
    const Array& g = grads[i];
    if (g.size() != p.size() || state.m[i].size() != p.size()) {
      throw DimensionError("adam_apply: buffer size mismatch on parameter " + std::to_string(i) +
                           " of shape " + shape_str(p.shape()));
    }
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g.square();
    Array m_hat = state.m[i] / bc1;
    Array v_hat = state.v[i] / bc2;
    p.array() -= state.lr * m_hat / (v_hat.sqrt() + state.eps);
  }
}

void adam_apply(std::vector<Tensor>& params, AdamState& state) {
  std::vector<Array> grads;
  grads.reserve(params.size());
  for (Tensor& p : params) {
    const Array* g = p.grad_if();
    grads.push_back(g ? *g : Array::Zero(p.size()));
  }
  adam_apply(params, grads, state);
}

}  // namespace dconad
