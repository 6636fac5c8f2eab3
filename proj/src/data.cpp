#include "dconad/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

namespace dconad {

Matrix difference(const Matrix& x) {
  if (x.cols() < 2) {
    throw DataError("difference: series length " + std::to_string(x.cols()) +
                    " is too short (need at least 2 points)");
  }
  return x.rightCols(x.cols() - 1) - x.leftCols(x.cols() - 1);
}

NormStats fit_normalization(const Matrix& x) {
  NormStats s;
  s.mean = x.rowwise().mean();
  Matrix centered = x.colwise() - s.mean;
  s.var = centered.array().square().rowwise().mean();
  return s;
}

Matrix apply_normalization(const Matrix& x, const NormStats& stats) {
  if (x.rows() != stats.mean.size()) {
    throw DimensionError("apply_normalization: " + std::to_string(x.rows()) +
                         " variables vs stats for " + std::to_string(stats.mean.size()));
  }
  Matrix out = x.colwise() - stats.mean;
  for (Index i = 0; i < out.rows(); ++i) {
    out.row(i) /= std::sqrt(std::max(stats.var[i], kNormVarEps));
  }
  return out;
}

Eigen::VectorXd normalize(const Eigen::VectorXd& v) {
  Matrix m = v.transpose();
  return apply_normalization(m, fit_normalization(m)).row(0).transpose();
}

namespace {

std::vector<Index> window_starts(Index total, Index window, Index stride, bool tail) {
  if (window < 1 || window > total) {
    throw DataError("window length " + std::to_string(window) + " does not fit series of length " +
                    std::to_string(total));
  }
  if (stride < 1) throw DataError("window stride must be >= 1");
  std::vector<Index> starts;
  for (Index s = 0; s + window <= total; s += stride) starts.push_back(s);
  if (tail && starts.back() + window < total) starts.push_back(total - window);
  return starts;
}

}  // namespace

WindowBatch make_windows(const Matrix& x, Index window, Index stride, bool right_aligned_tail) {
  WindowBatch batch;
  batch.start_indices = window_starts(x.cols(), window, stride, right_aligned_tail);
  batch.windows.reserve(batch.start_indices.size());
  batch.diff_windows.reserve(batch.start_indices.size());
  for (Index s : batch.start_indices) {
    Matrix w = x.middleCols(s, window).transpose();  // (L, d)
    batch.diff_windows.push_back(w.bottomRows(window - 1) - w.topRows(window - 1));
    batch.windows.push_back(std::move(w));
  }
  return batch;
}

WindowBatch make_windows_paired(const Matrix& x, const Matrix& x_diff, Index window, Index stride,
                                bool right_aligned_tail) {
  if (x_diff.cols() != x.cols() - 1 || x_diff.rows() != x.rows()) {
    throw DimensionError("make_windows_paired: differenced stream of shape (" +
                         std::to_string(x_diff.rows()) + ", " + std::to_string(x_diff.cols()) +
                         ") does not align with series of length " + std::to_string(x.cols()));
  }
  WindowBatch batch;
  batch.start_indices = window_starts(x.cols(), window, stride, right_aligned_tail);
  for (Index s : batch.start_indices) {
    batch.windows.push_back(x.middleCols(s, window).transpose());
    batch.diff_windows.push_back(x_diff.middleCols(s, window - 1).transpose());
  }
  return batch;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.push_back("");
  return cells;
}

double parse_cell(const std::string& cell, const std::string& file, std::size_t row,
                  std::size_t col) {
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  while (begin != end && (*begin == ' ' || *begin == '\t')) ++begin;
  while (end != begin && (*(end - 1) == ' ' || *(end - 1) == '\t' || *(end - 1) == '\r')) --end;
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    throw DataError(file + ": non-numeric cell at row " + std::to_string(row) + ", column " +
                    std::to_string(col));
  }
  return value;
}

Matrix read_csv_matrix(const std::filesystem::path& path, std::vector<std::string>* header_out) {
  std::ifstream in(path);
  if (!in) throw DataError("missing file: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": empty file");
  std::vector<std::string> header = split_csv_line(line);
  if (header_out) *header_out = header;
  const std::size_t d = header.size();
  std::vector<double> buffer;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() != d) {
      throw DataError(path.string() + ": ragged row " + std::to_string(rows + 2) + " has " +
                      std::to_string(cells.size()) + " cells, expected " + std::to_string(d));
    }
    for (std::size_t j = 0; j < d; ++j) buffer.push_back(parse_cell(cells[j], path.string(), rows + 2, j + 1));
    ++rows;
  }
  if (rows == 0) throw DataError(path.string() + ": no data rows");
  // rows are timestamps in the file; store variables x timestamps
  Matrix m(static_cast<Index>(d), static_cast<Index>(rows));
  for (std::size_t t = 0; t < rows; ++t)
    for (std::size_t j = 0; j < d; ++j) m(static_cast<Index>(j), static_cast<Index>(t)) = buffer[t * d + j];
  return m;
}

std::vector<std::uint8_t> read_label_column(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("missing file: " + path.string());
  std::vector<std::uint8_t> labels;
  std::string line;
  bool first = true;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    std::string cell = line;
    if (!cell.empty() && cell.back() == '\r') cell.pop_back();
    if (first) {
      first = false;
      // tolerate an optional non-numeric header line
      double probe;
      auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), probe);
      if (ec != std::errc() || ptr != cell.data() + cell.size()) continue;
    }
    const double v = parse_cell(cell, path.string(), row, 1);
    if (v != 0.0 && v != 1.0) {
      throw DataError(path.string() + ": label at row " + std::to_string(row) +
                      " must be 0 or 1, got " + cell);
    }
    labels.push_back(static_cast<std::uint8_t>(v));
  }
  if (labels.empty()) throw DataError(path.string() + ": no labels");
  return labels;
}

void write_csv_matrix(const Matrix& values, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (Index j = 0; j < values.rows(); ++j) {
    if (j) out << ",";
    out << "var" << j;
  }
  out << "\n";
  char buf[40];
  for (Index t = 0; t < values.cols(); ++t) {
    for (Index j = 0; j < values.rows(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", values(j, t));
      if (j) out << ",";
      out << buf;
    }
    out << "\n";
  }
}

}  // namespace

DatasetPair load_csv_dataset(const std::filesystem::path& dir) {
  DatasetPair pair;
  pair.train.values = read_csv_matrix(dir / "train.csv", nullptr);
  pair.train.split = "train";
  pair.train.name = dir.filename().string();
  pair.test.values = read_csv_matrix(dir / "test.csv", nullptr);
  pair.test.split = "test";
  pair.test.name = pair.train.name;
  if (pair.train.values.rows() != pair.test.values.rows()) {
    throw DataError("train has " + std::to_string(pair.train.values.rows()) +
                    " variables but test has " + std::to_string(pair.test.values.rows()));
  }
  pair.test.labels = read_label_column(dir / "test_labels.csv");
  if (static_cast<Index>(pair.test.labels.size()) != pair.test.values.cols()) {
    throw DataError("test_labels.csv has " + std::to_string(pair.test.labels.size()) +
                    " labels for " + std::to_string(pair.test.values.cols()) + " test rows");
  }
  if (pair.train.values.cols() < 2 || pair.test.values.cols() < 2) {
    throw DataError("series too short for differencing (need at least 2 timestamps)");
  }
  return pair;
}

void save_csv_dataset(const DatasetPair& data, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_csv_matrix(data.train.values, dir / "train.csv");
  write_csv_matrix(data.test.values, dir / "test.csv");
  std::ofstream labels(dir / "test_labels.csv");
  if (!labels) throw IoError("cannot write " + (dir / "test_labels.csv").string());
  for (std::uint8_t v : data.test.labels) labels << int(v) << "\n";
}

namespace {

double median_of(std::vector<double> v) {
  const std::size_t n = v.size();
  std::nth_element(v.begin(), v.begin() + n / 2, v.end());
  double hi = v[n / 2];
  if (n % 2 == 1) return hi;
  std::nth_element(v.begin(), v.begin() + n / 2 - 1, v.end());
  return 0.5 * (hi + v[n / 2 - 1]);
}

// median absolute deviation of a window of the series around index t
std::pair<double, double> local_median_mad(const Matrix& x, Index var, Index t, Index radius) {
  const Index lo = std::max<Index>(0, t - radius);
  const Index hi = std::min<Index>(x.cols() - 1, t + radius);
  std::vector<double> vals;
  vals.reserve(hi - lo + 1);
  for (Index i = lo; i <= hi; ++i) vals.push_back(x(var, i));
  const double med = median_of(vals);
  for (double& v : vals) v = std::abs(v - med);
  return {med, median_of(vals)};
}

}  // namespace

DatasetPair generate_synthetic(const SynthSpec& spec, std::uint64_t seed) {
  if (!(spec.anomaly_rate > 0.0 && spec.anomaly_rate < 1.0)) {
    throw ConfigError("synthetic anomaly rate must lie in (0, 1), got " +
                      std::to_string(spec.anomaly_rate));
  }
  if (spec.dims < 1 || spec.train_length < 2 || spec.test_length < 2) {
    throw ConfigError("synthetic spec needs dims >= 1 and lengths >= 2");
  }
  if (spec.kinds.empty()) throw ConfigError("synthetic spec needs at least one anomaly kind");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  // per-variable signal: three sinusoids with variable-specific frequencies
  const int kWaves = 3;
  std::vector<std::array<double, 3>> freq(spec.dims), amp(spec.dims), phase(spec.dims);
  for (Index v = 0; v < spec.dims; ++v) {
    for (int k = 0; k < kWaves; ++k) {
      freq[v][k] = 1.0 / (20.0 + 180.0 * unit(rng));
      amp[v][k] = 0.5 + unit(rng);
      phase[v][k] = 2.0 * M_PI * unit(rng);
    }
  }
  std::normal_distribution<double> noise(0.0, 0.05);
  auto sample = [&](Index v, Index t) {
    double s = 0.0;
    for (int k = 0; k < kWaves; ++k) {
      s += amp[v][k] * std::sin(2.0 * M_PI * freq[v][k] * static_cast<double>(t) + phase[v][k]);
    }
    return s;
  };

  DatasetPair pair;
  pair.train.values.resize(spec.dims, spec.train_length);
  pair.test.values.resize(spec.dims, spec.test_length);
  pair.train.split = "train";
  pair.test.split = "test";
  pair.train.name = pair.test.name = "synthetic";
  for (Index v = 0; v < spec.dims; ++v) {
    for (Index t = 0; t < spec.train_length; ++t) pair.train.values(v, t) = sample(v, t) + noise(rng);
    for (Index t = 0; t < spec.test_length; ++t) {
      pair.test.values(v, t) = sample(v, t + spec.train_length) + noise(rng);
    }
  }

  // anomaly budget: exactly ceil(rate * T_test) labeled timestamps
  const Index budget = static_cast<Index>(
      std::ceil(spec.anomaly_rate * static_cast<double>(spec.test_length)));
  pair.test.labels.assign(spec.test_length, 0);

  const Index edge = std::min<Index>(10, spec.test_length / 4);
  const Index max_seg = 12;
  if (spec.test_length - edge - max_seg <= edge) {
    throw ConfigError("test split of length " + std::to_string(spec.test_length) +
                      " is too short for anomaly injection");
  }
  std::uniform_int_distribution<Index> pick_kind(0, static_cast<Index>(spec.kinds.size()) - 1);
  std::uniform_int_distribution<Index> seg_len(5, max_seg);
  std::uniform_int_distribution<Index> pos(edge, spec.test_length - max_seg - 1);
  std::normal_distribution<double> shift_mag(0.0, 1.0);
  const NormStats train_stats = fit_normalization(pair.train.values);

  // variables hit per event: a random half, at least one
  auto pick_vars = [&]() {
    std::vector<Index> vars;
    for (Index v = 0; v < spec.dims; ++v)
      if (unit(rng) < 0.5) vars.push_back(v);
    if (vars.empty()) vars.push_back(std::uniform_int_distribution<Index>(0, spec.dims - 1)(rng));
    return vars;
  };

  Index remaining = budget;
  int attempts = 0;
  while (remaining > 0 && attempts < 100000) {
    ++attempts;
    const AnomalyKind kind = spec.kinds[pick_kind(rng)];
    Index len = (kind == AnomalyKind::kSpike) ? 1 : std::min(seg_len(rng), remaining);
    const Index at = pos(rng);
    if (at + len > spec.test_length) continue;
    bool overlap = false;
    // keep one clean point of separation between events
    for (Index t = std::max<Index>(0, at - 1); t < std::min(spec.test_length, at + len + 1); ++t) {
      if (pair.test.labels[t]) overlap = true;
    }
    if (overlap) continue;

    const std::vector<Index> vars = pick_vars();
    switch (kind) {
      case AnomalyKind::kSpike:
        for (Index v : vars) {
          auto [med, mad] = local_median_mad(pair.test.values, v, at, 10);
          const double delta = 10.0 * std::max(mad, 0.05);
          pair.test.values(v, at) = med + (unit(rng) < 0.5 ? -delta : delta);
        }
        break;
      case AnomalyKind::kLevelShift:
        for (Index v : vars) {
          const double sd = std::sqrt(train_stats.var[v]);
          const double delta = (3.0 + std::abs(shift_mag(rng))) * std::max(sd, 0.1);
          const double sign = unit(rng) < 0.5 ? -1.0 : 1.0;
          for (Index t = at; t < at + len; ++t) pair.test.values(v, t) += sign * delta;
        }
        break;
      case AnomalyKind::kCollectiveNoise:
        for (Index v : vars) {
          const double sd = std::sqrt(train_stats.var[v]);
          std::normal_distribution<double> heavy(0.0, 4.0 * std::max(sd, 0.1));
          for (Index t = at; t < at + len; ++t) pair.test.values(v, t) += heavy(rng);
        }
        break;
    }
    for (Index t = at; t < at + len; ++t) pair.test.labels[t] = 1;
    remaining -= len;
  }
  if (remaining > 0) {
    throw DataError("synthetic injector could not place the full anomaly budget");
  }
  return pair;
}

AnomalyKind anomaly_kind_from_string(const std::string& s) {
  if (s == "spike") return AnomalyKind::kSpike;
  if (s == "level_shift") return AnomalyKind::kLevelShift;
  if (s == "collective_noise") return AnomalyKind::kCollectiveNoise;
  throw ConfigError("unknown anomaly kind: " + s);
}

std::string to_string(AnomalyKind k) {
  switch (k) {
    case AnomalyKind::kSpike: return "spike";
    case AnomalyKind::kLevelShift: return "level_shift";
    case AnomalyKind::kCollectiveNoise: return "collective_noise";
  }
  return "spike";
}

}  // namespace dconad
