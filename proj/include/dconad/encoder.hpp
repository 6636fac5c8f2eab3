#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "dconad/ops.hpp"
#include "dconad/tensor.hpp"

namespace dconad {

// Encoder hyperparameters. One config drives both streams; the differenced
// stream derives its token count (window - 1) from `window`.
struct EncoderConfig {
  Index d_input = 1;    // variables per timestamp
  Index d_model = 256;
  Index n_heads = 1;
  Index n_layers = 1;
  Index window = 90;    // L
  bool enable_time_block = true;
  bool enable_rel_block = true;
  Index ff_inner = 0;   // 0 -> d_model
  double leaky_slope = 0.01;

  Index ff_width() const { return ff_inner > 0 ? ff_inner : d_model; }
  void validate() const;
};

struct AttentionParams {
  Tensor wq, wk, wv, wo;  // (dim, dim)
};

struct FeedForwardParams {
  Tensor w1, b1, w2, b2;
};

struct LayerNormParams {
  Tensor gain, bias;
};

// One stacked encoder layer: a self-attention block over timestamps, a
// self-attention block over the transposed representation (embedding
// channels attending to one another), and a fusion step that maps the
// concatenated branches back to d_model.
struct SdlLayerParams {
  AttentionParams time_attn;     // d_model x d_model, when time block enabled
  FeedForwardParams time_ff;
  LayerNormParams time_ln1, time_ln2;

  AttentionParams rel_attn;      // tokens x tokens, when relation block enabled
  LayerNormParams rel_ln1;       // over length-L rows of the transposed matrix
  FeedForwardParams rel_ff;
  LayerNormParams rel_ln2;

  LayerNormParams fuse_ln1;      // width 2*d_model (both branches) or d_model
  FeedForwardParams fuse_ff;
  LayerNormParams fuse_ln2;
};

// All learnable state of one stream plus its fixed positional table.
struct EncoderStreamParams {
  Tensor embed_weight;  // (d_input, d_model)
  Tensor positional;    // (tokens, d_model), fixed sinusoidal, not learned
  std::vector<SdlLayerParams> layers;
  Index tokens = 0;
};

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

// Fixed sinusoidal positional table.
Matrix sinusoidal_positional(Index tokens, Index d_model);

EncoderStreamParams init_encoder_stream(const EncoderConfig& cfg, Index tokens,
                                        std::mt19937_64& rng);

void collect_parameters(const EncoderStreamParams& stream, const std::string& prefix,
                        const EncoderConfig& cfg, std::vector<NamedTensor>& out);

// value projection plus positional encoding; the first layer input.
Tensor embed(const Tensor& window, const EncoderStreamParams& stream);

Tensor time_block(const Tensor& h, const SdlLayerParams& layer, const EncoderConfig& cfg);
Tensor rel_block(const Tensor& h, const SdlLayerParams& layer);
Tensor fuse(const Tensor& h_time, const Tensor& h_rel, const SdlLayerParams& layer);
Tensor fuse_single(const Tensor& h_branch, const SdlLayerParams& layer);

// Runs embedding plus n_layers stacked layers over one window of this
// stream. `window` is (tokens, d_input).
Tensor encode_stream(const Tensor& window, const EncoderStreamParams& stream,
                     const EncoderConfig& cfg);

}  // namespace dconad
