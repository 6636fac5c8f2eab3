#pragma once

#include <random>
#include <string>
#include <vector>

#include "dconad/encoder.hpp"
#include "dconad/ops.hpp"

namespace dconad {

// Heads that turn the two stream encodings into the contrastive views.
// View 1 goes through a bilinear pairing of the streams, view 2 through a
// linear layer on their concatenation; both end in a sigmoid, so every view
// entry lies in (0, 1).
struct ViewParams {
  Tensor bilinear_w;  // (d_model, d_model, d_model)
  Tensor bilinear_b;  // (d_model)
  Tensor v1_w, v1_b;  // post-bilinear linear, d_model -> d_model
  Tensor v2_in_w, v2_in_b;  // concat linear, 2*d_model -> d_model
  Tensor v2_w, v2_b;  // output linear, d_model -> d_model
  double leaky_slope = 0.01;
};

ViewParams init_view_params(Index d_model, double leaky_slope, std::mt19937_64& rng);
void collect_parameters(const ViewParams& views, std::vector<NamedTensor>& out);

// Both views drop the final row of h_t so rows align with the differenced
// stream: the difference at t is paired with the timestamp t it starts from.
Tensor make_view1(const Tensor& h_d, const Tensor& h_t, const ViewParams& p);
Tensor make_view2(const Tensor& h_d, const Tensor& h_t, const ViewParams& p);

enum class LossMode { kSymmetricKl, kAsymmetricKl, kJs };
enum class LossCombine { kDifference, kSum };

LossMode loss_mode_from_string(const std::string& s);
std::string to_string(LossMode m);
LossCombine loss_combine_from_string(const std::string& s);
std::string to_string(LossCombine c);

struct LossBreakdown {
  Tensor total;  // scalar; participates in the tape
  double l_v1 = 0.0;
  double l_v2 = 0.0;
  LossMode mode = LossMode::kSymmetricKl;
};

// Stop-gradient KL consistency between the row-normalized views. In the
// default mode each side pairs a live view with the detached other view and
// the total is (l_v1 - l_v2) / rows; kSum averages them instead (diagnostic
// only, non-default).
LossBreakdown consistency_loss(const Tensor& v1, const Tensor& v2, LossMode mode,
                               LossCombine combine = LossCombine::kDifference);

// Per-timestamp anomaly score of one window: symmetric KL between the
// row-normalized views, with the unaligned final timestamp replicating its
// neighbor. Length == rows(v1) + 1 == window length. Inference-only.
Eigen::VectorXd anomaly_score(const Tensor& v1, const Tensor& v2);

// Row-wise KL helper shared by score and tests (same clamping as kl_rows).
Eigen::VectorXd kl_per_row(const Matrix& p, const Matrix& q);

}  // namespace dconad
