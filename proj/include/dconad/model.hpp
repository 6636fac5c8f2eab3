#pragma once

#include <cstdint>
#include <utility>

#include "dconad/encoder.hpp"
#include "dconad/views.hpp"

namespace dconad {

// The full dual-stream model: one encoder over the original windows, one
// over the differenced windows (separate parameters; the relation block
// shapes differ between streams), and the contrastive view heads.
struct Model {
  EncoderConfig cfg;
  EncoderStreamParams orig;  // window tokens
  EncoderStreamParams diff;  // window - 1 tokens
  ViewParams views;

  static Model init(const EncoderConfig& cfg, std::uint64_t seed);

  // Fixed-order named parameter list (checkpoints, optimizer, gradcheck).
  std::vector<NamedTensor> parameters() const;
  std::vector<Tensor> parameter_tensors() const;
  void zero_grads() const;

  struct Encoded {
    Tensor h_t;  // (L, d_model)
    Tensor h_d;  // (L-1, d_model)
  };
  // window: (L, d); diff_window: (L-1, d)
  Encoded encode_window(const Tensor& window, const Tensor& diff_window) const;

  struct ViewPair {
    Tensor v1;
    Tensor v2;
  };
  ViewPair window_views(const Tensor& window, const Tensor& diff_window) const;

  LossBreakdown window_loss(const Tensor& window, const Tensor& diff_window, LossMode mode,
                            LossCombine combine = LossCombine::kDifference) const;

  // Per-timestamp scores for one window, length L.
  Eigen::VectorXd window_scores(const Matrix& window, const Matrix& diff_window) const;
};

}  // namespace dconad
