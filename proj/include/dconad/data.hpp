#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dconad/tensor.hpp"

namespace dconad {

// Raw multivariate series, variables x timestamps, plus optional per-point
// binary anomaly labels. Immutable after load.
struct TimeSeriesDataset {
  Matrix values;                     // (d, T)
  std::vector<std::uint8_t> labels;  // empty or length T, entries 0/1
  std::string split;                 // "train" | "test"
  std::string name;

  Index dims() const { return values.rows(); }
  Index length() const { return values.cols(); }
};

struct DatasetPair {
  TimeSeriesDataset train;
  TimeSeriesDataset test;
};

// A batch of length-L windows with their in-window differenced counterparts
// and source positions. windows[b] is (L, d); diff_windows[b] is (L-1, d).
struct WindowBatch {
  std::vector<Matrix> windows;
  std::vector<Matrix> diff_windows;
  std::vector<Index> start_indices;

  std::size_t count() const { return windows.size(); }
};

// out[:,t] = x[:,t+1] - x[:,t]. Requires T >= 2.
Matrix difference(const Matrix& x);

// Per-variable standardization. Mean and variance (population) are taken
// from `stats_source`; pass the same matrix to fit-and-apply, or the train
// matrix to apply train statistics to test data. Variance is clamped below
// at 1e-5 so constant series map to zero.
struct NormStats {
  Eigen::VectorXd mean;
  Eigen::VectorXd var;
};
NormStats fit_normalization(const Matrix& x);
Matrix apply_normalization(const Matrix& x, const NormStats& stats);
Eigen::VectorXd normalize(const Eigen::VectorXd& v);  // single series convenience

inline constexpr double kNormVarEps = 1e-5;

// Sliding windows over x (d, T) at the given stride. Each window also
// carries its in-window differences. When `right_aligned_tail` is set and
// the last strided window does not reach T, one extra window at start T-L
// is appended so every timestamp is covered.
WindowBatch make_windows(const Matrix& x, Index window, Index stride,
                         bool right_aligned_tail = false);

// Paired variant for the difference-before-normalization order: windows of
// `x` plus rows [start, start+L-1) of the externally differenced stream.
WindowBatch make_windows_paired(const Matrix& x, const Matrix& x_diff, Index window, Index stride,
                                bool right_aligned_tail = false);

// Directory format: train.csv / test.csv (header row of variable names,
// rows are timestamps) and test_labels.csv (one 0/1 per test row).
DatasetPair load_csv_dataset(const std::filesystem::path& dir);
void save_csv_dataset(const DatasetPair& data, const std::filesystem::path& dir);

enum class AnomalyKind { kSpike, kLevelShift, kCollectiveNoise };

struct SynthSpec {
  Index dims = 5;
  Index train_length = 2000;
  Index test_length = 2000;
  double anomaly_rate = 0.01;
  std::vector<AnomalyKind> kinds = {AnomalyKind::kSpike};
};

// Multi-frequency sinusoids plus small noise; the train split is clean, the
// test split carries ceil(rate * T_test) injected anomalous timestamps with
// exact labels. Deterministic in (spec, seed).
DatasetPair generate_synthetic(const SynthSpec& spec, std::uint64_t seed);

AnomalyKind anomaly_kind_from_string(const std::string& s);
std::string to_string(AnomalyKind k);

}  // namespace dconad
