#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dconad/data.hpp"
#include "dconad/encoder.hpp"
#include "dconad/eval.hpp"
#include "dconad/views.hpp"

namespace dconad {

// One flat key=value run configuration ('#' starts a comment). The same
// struct drives training, scoring and evaluation; serialize() emits every
// key in a fixed order so the echo written into run outputs is byte-stable.
struct RunConfig {
  // data
  std::string data = "synth";  // "synth" | "csv"
  std::string data_dir;        // csv mode
  Index synth_d = 5;
  Index synth_train_t = 2000;
  Index synth_test_t = 2000;
  double synth_anomaly_rate = 0.01;
  std::vector<AnomalyKind> synth_kinds = {AnomalyKind::kSpike};

  // model
  Index window = 32;
  Index train_stride = 1;
  Index d_model = 16;
  Index n_heads = 1;
  Index n_layers = 1;
  Index ff_inner = 0;  // 0 -> d_model
  double leaky_slope = 0.01;
  bool enable_time_block = true;
  bool enable_rel_block = true;
  bool diff_after_norm = true;  // false: difference raw series, then normalize both streams

  // training
  double lr = 1e-4;
  Index epochs = 3;
  Index batch_size = 32;
  std::uint64_t seed = 7;
  LossMode loss_mode = LossMode::kSymmetricKl;
  LossCombine loss_combine = LossCombine::kDifference;

  // eval
  std::string threshold_mode = "quantile";  // "fixed" | "quantile"
  double threshold = 1.0;
  double threshold_ratio = 0.01;
  bool adjusted = true;

  // output
  std::string out_dir = "runs/out";

  void validate() const;
  std::string serialize() const;

  EncoderConfig encoder_config(Index d_input) const;
  SynthSpec synth_spec() const;
  ThresholdSpec threshold_spec() const;

  static RunConfig parse(const std::string& text);
  static RunConfig load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
};

}  // namespace dconad
