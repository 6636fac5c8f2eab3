#include "dconad/model.hpp"

namespace dconad {

Model Model::init(const EncoderConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  Model m;
  m.cfg = cfg;
  m.orig = init_encoder_stream(cfg, cfg.window, rng);
  m.diff = init_encoder_stream(cfg, cfg.window - 1, rng);
  m.views = init_view_params(cfg.d_model, cfg.leaky_slope, rng);
  return m;
}

std::vector<NamedTensor> Model::parameters() const {
  std::vector<NamedTensor> out;
  collect_parameters(orig, "orig", cfg, out);
  collect_parameters(diff, "diff", cfg, out);
  collect_parameters(views, out);
  return out;
}

std::vector<Tensor> Model::parameter_tensors() const {
  std::vector<Tensor> out;
  for (auto& nt : parameters()) out.push_back(nt.tensor);
  return out;
}

void Model::zero_grads() const {
  for (auto& nt : parameters()) nt.tensor.zero_grad();
}

Model::Encoded Model::encode_window(const Tensor& window, const Tensor& diff_window) const {
  return {encode_stream(window, orig, cfg), encode_stream(diff_window, diff, cfg)};
}

Model::ViewPair Model::window_views(const Tensor& window, const Tensor& diff_window) const {
  Encoded enc = encode_window(window, diff_window);
  return {make_view1(enc.h_d, enc.h_t, views), make_view2(enc.h_d, enc.h_t, views)};
}

LossBreakdown Model::window_loss(const Tensor& window, const Tensor& diff_window, LossMode mode,
                                 LossCombine combine) const {
  ViewPair v = window_views(window, diff_window);
  return consistency_loss(v.v1, v.v2, mode, combine);
}

Eigen::VectorXd Model::window_scores(const Matrix& window, const Matrix& diff_window) const {
  // no tape: pure inference
  ViewPair v = window_views(Tensor::from_matrix(window), Tensor::from_matrix(diff_window));
  return anomaly_score(v.v1, v.v2);
}

}  // namespace dconad
