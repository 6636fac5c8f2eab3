#include "dconad/views.hpp"

#include <cmath>

namespace dconad {

namespace {

Tensor xavier_uniform(Index rows, Index cols, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor t({rows, cols}, true);
  for (Index i = 0; i < t.size(); ++i) t.array()[i] = dist(rng);
  return t;
}

}  // namespace

ViewParams init_view_params(Index d_model, double leaky_slope, std::mt19937_64& rng) {
  ViewParams p;
  p.leaky_slope = leaky_slope;
  const double bound = std::sqrt(6.0 / static_cast<double>(2 * d_model));
  std::uniform_real_distribution<double> dist(-bound, bound);
  p.bilinear_w = Tensor({d_model, d_model, d_model}, true);
  for (Index i = 0; i < p.bilinear_w.size(); ++i) p.bilinear_w.array()[i] = dist(rng);
  p.bilinear_b = Tensor({d_model}, true);
  p.v1_w = xavier_uniform(d_model, d_model, rng);
  p.v1_b = Tensor({d_model}, true);
  p.v2_in_w = xavier_uniform(2 * d_model, d_model, rng);
  p.v2_in_b = Tensor({d_model}, true);
  p.v2_w = xavier_uniform(d_model, d_model, rng);
  p.v2_b = Tensor({d_model}, true);
  return p;
}

void collect_parameters(const ViewParams& views, std::vector<NamedTensor>& out) {
  out.push_back({"views.bilinear.w", views.bilinear_w});
  out.push_back({"views.bilinear.b", views.bilinear_b});
  out.push_back({"views.v1.w", views.v1_w});
  out.push_back({"views.v1.b", views.v1_b});
  out.push_back({"views.v2_in.w", views.v2_in_w});
  out.push_back({"views.v2_in.b", views.v2_in_b});
  out.push_back({"views.v2.w", views.v2_w});
  out.push_back({"views.v2.b", views.v2_b});
}

namespace {

Tensor align_rows(const Tensor& h_d, const Tensor& h_t) {
  if (h_t.rows() != h_d.rows() + 1) {
    throw ContractError("view alignment: h_t with " + std::to_string(h_t.rows()) +
                        " rows cannot pair with h_d of " + std::to_string(h_d.rows()) + " rows");
  }
  return take_rows(h_t, 0, h_d.rows());
}

}  // namespace

Tensor make_view1(const Tensor& h_d, const Tensor& h_t, const ViewParams& p) {
  Tensor aligned = align_rows(h_d, h_t);
  Tensor mid = leaky_relu(bilinear(h_d, aligned, p.bilinear_w, p.bilinear_b), p.leaky_slope);
  return sigmoid(linear(mid, p.v1_w, p.v1_b));
}

Tensor make_view2(const Tensor& h_d, const Tensor& h_t, const ViewParams& p) {
  Tensor aligned = align_rows(h_d, h_t);
  Tensor mid = leaky_relu(linear(concat_cols(h_d, aligned), p.v2_in_w, p.v2_in_b), p.leaky_slope);
  return sigmoid(linear(mid, p.v2_w, p.v2_b));
}

LossMode loss_mode_from_string(const std::string& s) {
  if (s == "symmetric-kl") return LossMode::kSymmetricKl;
  if (s == "asymmetric-kl") return LossMode::kAsymmetricKl;
  if (s == "js") return LossMode::kJs;
  throw ConfigError("unknown loss mode: " + s + " (expected symmetric-kl, asymmetric-kl or js)");
}

std::string to_string(LossMode m) {
  switch (m) {
    case LossMode::kSymmetricKl: return "symmetric-kl";
    case LossMode::kAsymmetricKl: return "asymmetric-kl";
    case LossMode::kJs: return "js";
  }
  return "symmetric-kl";
}

LossCombine loss_combine_from_string(const std::string& s) {
  if (s == "difference") return LossCombine::kDifference;
  if (s == "sum") return LossCombine::kSum;
  throw ConfigError("unknown loss combine rule: " + s + " (expected difference or sum)");
}

std::string to_string(LossCombine c) {
  return c == LossCombine::kDifference ? "difference" : "sum";
}

namespace {

// Jensen-Shannon divergence of two row-normalized tensors (live + detached
// mixture handling is the caller's concern; this is pure composition).
Tensor js_rows(const Tensor& p, const Tensor& q) {
  Tensor m = scale(add(p, q), 0.5);
  return scale(add(kl_rows(p, m), kl_rows(q, m)), 0.5);
}

}  // namespace

LossBreakdown consistency_loss(const Tensor& v1, const Tensor& v2, LossMode mode,
                               LossCombine combine) {
  if (v1.shape() != v2.shape()) {
    throw DimensionError("consistency_loss: view shapes disagree, " + shape_str(v1.shape()) +
                         " vs " + shape_str(v2.shape()));
  }
  Tensor p1 = row_normalize(v1);
  Tensor p2 = row_normalize(v2);
  Tensor p1_stop = stop_gradient(p1);
  Tensor p2_stop = stop_gradient(p2);

  Tensor l_v1, l_v2;
  switch (mode) {
    case LossMode::kSymmetricKl:
      l_v1 = add(kl_rows(p1, p2_stop), kl_rows(p2_stop, p1));
      l_v2 = add(kl_rows(p2, p1_stop), kl_rows(p1_stop, p2));
      break;
    case LossMode::kAsymmetricKl:
      l_v1 = kl_rows(p1, p2_stop);
      l_v2 = kl_rows(p2, p1_stop);
      break;
    case LossMode::kJs:
      l_v1 = js_rows(p1, p2_stop);
      l_v2 = js_rows(p2, p1_stop);
      break;
  }

  LossBreakdown out;
  out.mode = mode;
  out.l_v1 = l_v1.item();
  out.l_v2 = l_v2.item();
  const double inv_rows = 1.0 / static_cast<double>(v1.rows());
  out.total = combine == LossCombine::kDifference ? scale(sub(l_v1, l_v2), inv_rows)
                                                  : scale(add(l_v1, l_v2), inv_rows);
  return out;
}

Eigen::VectorXd kl_per_row(const Matrix& p, const Matrix& q) {
  const double eps = consts::kLogClampEps;
  Eigen::VectorXd out(p.rows());
  for (Index i = 0; i < p.rows(); ++i) {
    double acc = 0.0;
    for (Index j = 0; j < p.cols(); ++j) {
      const double pc = std::max(p(i, j), eps);
      const double qc = std::max(q(i, j), eps);
      acc += p(i, j) * (std::log(pc) - std::log(qc));
    }
    out[i] = acc;
  }
  return out;
}

Eigen::VectorXd anomaly_score(const Tensor& v1, const Tensor& v2) {
  if (v1.shape() != v2.shape()) {
    throw DimensionError("anomaly_score: view shapes disagree, " + shape_str(v1.shape()) + " vs " +
                         shape_str(v2.shape()));
  }
  const Index aligned = v1.rows();
  Matrix p1(aligned, v1.cols()), p2(aligned, v1.cols());
  {
    ConstMatrixMap m1 = v1.mat(), m2 = v2.mat();
    for (Index i = 0; i < aligned; ++i) {
      p1.row(i) = m1.row(i) / std::max(m1.row(i).sum(), consts::kRowSumEps);
      p2.row(i) = m2.row(i) / std::max(m2.row(i).sum(), consts::kRowSumEps);
    }
  }
  Eigen::VectorXd scores(aligned + 1);
  scores.head(aligned) = kl_per_row(p1, p2) + kl_per_row(p2, p1);
  scores[aligned] = scores[aligned - 1];  // terminal timestamp has no difference row
  return scores;
}

}  // namespace dconad
