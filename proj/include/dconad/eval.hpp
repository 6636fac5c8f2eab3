#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dconad/tensor.hpp"

namespace dconad {

// Score-to-label thresholding. Fixed mode uses the given cutoff; quantile
// mode derives the cutoff from the empirical (1 - ratio) quantile of the
// scores being thresholded.
struct ThresholdSpec {
  enum class Mode { kFixed, kQuantile } mode = Mode::kFixed;
  double value = 1.0;   // fixed cutoff
  double ratio = 0.01;  // quantile mode: expected anomaly fraction, in (0, 1)
};

// Resolves the cutoff for a score vector (identity in fixed mode).
double resolve_threshold(const Eigen::VectorXd& scores, const ThresholdSpec& spec);

// label 1 iff score >= cutoff.
std::vector<std::uint8_t> threshold_labels(const Eigen::VectorXd& scores, double cutoff);

// For each maximal contiguous run of 1s in truth: if any prediction inside
// the run is 1, the whole run becomes 1. Predictions outside truth runs are
// untouched.
std::vector<std::uint8_t> point_adjust(const std::vector<std::uint8_t>& pred,
                                       const std::vector<std::uint8_t>& truth);

struct EvalReport {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool adjusted = false;
  double threshold_used = 0.0;
  long tp = 0, fp = 0, fn = 0, tn = 0;
};

EvalReport prf1(const std::vector<std::uint8_t>& pred, const std::vector<std::uint8_t>& truth);

// threshold -> (optional) point adjustment -> precision/recall/F1.
EvalReport evaluate_scores(const Eigen::VectorXd& scores, const std::vector<std::uint8_t>& truth,
                           const ThresholdSpec& spec, bool adjusted);

// key = value lines matching the fields above.
std::string format_report(const EvalReport& r);

}  // namespace dconad
