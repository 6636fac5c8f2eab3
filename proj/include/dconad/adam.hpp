#pragma once

#include <vector>

#include "dconad/tensor.hpp"

namespace dconad {

// Adam with bias correction. One state drives a fixed list of parameters;
// moment buffers are allocated lazily on the first apply.
struct AdamState {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step_count = 0;
  std::vector<Array> m;
  std::vector<Array> v;
};

// In-place update of params from explicit gradients. grads[i] must match
// params[i] in size. step_count advances by one per call.
void adam_apply(std::vector<Tensor>& params, const std::vector<Array>& grads, AdamState& state);

// Convenience: pulls each parameter's accumulated .grad (absent buffers are
// treated as zero).
void adam_apply(std::vector<Tensor>& params, AdamState& state);

}  // namespace dconad
