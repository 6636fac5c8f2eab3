#include "dconad/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace dconad {

double resolve_threshold(const Eigen::VectorXd& scores, const ThresholdSpec& spec) {
  if (spec.mode == ThresholdSpec::Mode::kFixed) {
    if (!std::isfinite(spec.value)) throw ConfigError("fixed threshold must be finite");
    return spec.value;
  }
  if (!(spec.ratio > 0.0 && spec.ratio < 1.0)) {
    throw ConfigError("quantile threshold ratio must lie in (0, 1), got " +
                      std::to_string(spec.ratio));
  }
  if (scores.size() == 0) throw ContractError("cannot take a quantile of zero scores");
  std::vector<double> sorted(scores.data(), scores.data() + scores.size());
  std::sort(sorted.begin(), sorted.end());
  const auto n = static_cast<double>(sorted.size());
  const auto idx = static_cast<std::size_t>(std::ceil((1.0 - spec.ratio) * n));
  if (idx >= sorted.size()) {
    // fewer than one expected anomaly: cut just above the maximum
    return std::nextafter(sorted.back(), std::numeric_limits<double>::infinity());
  }
  return sorted[idx];
}

std::vector<std::uint8_t> threshold_labels(const Eigen::VectorXd& scores, double cutoff) {
  std::vector<std::uint8_t> out(scores.size());
  for (Index i = 0; i < scores.size(); ++i) out[i] = scores[i] >= cutoff ? 1 : 0;
  return out;
}

std::vector<std::uint8_t> point_adjust(const std::vector<std::uint8_t>& pred,
                                       const std::vector<std::uint8_t>& truth) {
  if (pred.size() != truth.size()) {
    throw ContractError("point_adjust: " + std::to_string(pred.size()) + " predictions vs " +
                        std::to_string(truth.size()) + " labels");
  }
  std::vector<std::uint8_t> out = pred;
  const std::size_t n = truth.size();
  std::size_t i = 0;
  while (i < n) {
    if (!truth[i]) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < n && truth[j]) ++j;  // truth run [i, j)
    bool hit = false;
    for (std::size_t k = i; k < j && !hit; ++k) hit = pred[k] != 0;
    if (hit) {
      for (std::size_t k = i; k < j; ++k) out[k] = 1;
    }
    i = j;
  }
  return out;
}

EvalReport prf1(const std::vector<std::uint8_t>& pred, const std::vector<std::uint8_t>& truth) {
  if (pred.size() != truth.size()) {
    throw ContractError("prf1: " + std::to_string(pred.size()) + " predictions vs " +
                        std::to_string(truth.size()) + " labels");
  }
  EvalReport r;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] > 1 || truth[i] > 1) {
      throw ContractError("prf1: non-binary entry at index " + std::to_string(i));
    }
    if (pred[i] && truth[i]) ++r.tp;
    else if (pred[i] && !truth[i]) ++r.fp;
    else if (!pred[i] && truth[i]) ++r.fn;
    else ++r.tn;
  }
  r.precision = (r.tp + r.fp) > 0 ? static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fp) : 0.0;
  r.recall = (r.tp + r.fn) > 0 ? static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fn) : 0.0;
  r.f1 = (r.precision + r.recall) > 0.0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
                                        : 0.0;
  return r;
}

EvalReport evaluate_scores(const Eigen::VectorXd& scores, const std::vector<std::uint8_t>& truth,
                           const ThresholdSpec& spec, bool adjusted) {
  if (static_cast<std::size_t>(scores.size()) != truth.size()) {
    throw ContractError("evaluate_scores: " + std::to_string(scores.size()) + " scores vs " +
                        std::to_string(truth.size()) + " labels");
  }
  const double cutoff = resolve_threshold(scores, spec);
  std::vector<std::uint8_t> pred = threshold_labels(scores, cutoff);
  if (adjusted) pred = point_adjust(pred, truth);
  EvalReport r = prf1(pred, truth);
  r.adjusted = adjusted;
  r.threshold_used = cutoff;
  return r;
}

std::string format_report(const EvalReport& r) {
  char buf[64];
  std::ostringstream os;
  auto put = [&](const char* key, double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    os << key << " = " << buf << "\n";
  };
  put("precision", r.precision);
  put("recall", r.recall);
  put("f1", r.f1);
  put("threshold", r.threshold_used);
  os << "adjusted = " << (r.adjusted ? "true" : "false") << "\n";
  os << "tp = " << r.tp << "\n";
  os << "fp = " << r.fp << "\n";
  os << "fn = " << r.fn << "\n";
  os << "tn = " << r.tn << "\n";
  return os.str();
}

}  // namespace dconad
