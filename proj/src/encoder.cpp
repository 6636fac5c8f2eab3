#include "dconad/encoder.hpp"

#include <cmath>

namespace dconad {

void EncoderConfig::validate() const {
  if (!enable_time_block && !enable_rel_block) {
    throw ConfigError("at least one of the time and relation blocks must be enabled");
  }
  if (d_model < 1 || n_layers < 1 || window < 2 || d_input < 1) {
    throw ConfigError("encoder config requires d_model >= 1, n_layers >= 1, window >= 2");
  }
  if (n_heads < 1 || d_model % n_heads != 0) {
    throw ConfigError("d_model (" + std::to_string(d_model) + ") must be divisible by n_heads (" +
                      std::to_string(n_heads) + ")");
  }
}

Matrix sinusoidal_positional(Index tokens, Index d_model) {
  Matrix pe(tokens, d_model);
  for (Index pos = 0; pos < tokens; ++pos) {
    for (Index i = 0; i < d_model; ++i) {
      const double exponent = static_cast<double>(2 * (i / 2)) / static_cast<double>(d_model);
      const double angle = static_cast<double>(pos) / std::pow(10000.0, exponent);
      pe(pos, i) = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  }
  return pe;
}

namespace {

Tensor xavier_uniform(Index rows, Index cols, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor t({rows, cols}, true);
  for (Index i = 0; i < t.size(); ++i) t.array()[i] = dist(rng);
  return t;
}

AttentionParams init_attention(Index dim, std::mt19937_64& rng) {
  return {xavier_uniform(dim, dim, rng), xavier_uniform(dim, dim, rng),
          xavier_uniform(dim, dim, rng), xavier_uniform(dim, dim, rng)};
}

FeedForwardParams init_ff(Index d_in, Index d_hidden, Index d_out, std::mt19937_64& rng) {
  FeedForwardParams ff;
  ff.w1 = xavier_uniform(d_in, d_hidden, rng);
  ff.b1 = Tensor({d_hidden}, true);
  ff.w2 = xavier_uniform(d_hidden, d_out, rng);
  ff.b2 = Tensor({d_out}, true);
  return ff;
}

LayerNormParams init_ln(Index n) {
  return {Tensor::filled({n}, 1.0, true), Tensor({n}, true)};
}

}  // namespace

EncoderStreamParams init_encoder_stream(const EncoderConfig& cfg, Index tokens,
                                        std::mt19937_64& rng) {
  cfg.validate();
  EncoderStreamParams s;
  s.tokens = tokens;
  s.embed_weight = xavier_uniform(cfg.d_input, cfg.d_model, rng);
  s.positional = Tensor::from_matrix(sinusoidal_positional(tokens, cfg.d_model));
  const Index ff = cfg.ff_width();
  const Index fuse_in = (cfg.enable_time_block && cfg.enable_rel_block) ? 2 * cfg.d_model : cfg.d_model;
  s.layers.resize(cfg.n_layers);
  for (auto& layer : s.layers) {
    if (cfg.enable_time_block) {
      layer.time_attn = init_attention(cfg.d_model, rng);
      layer.time_ff = init_ff(cfg.d_model, ff, cfg.d_model, rng);
      layer.time_ln1 = init_ln(cfg.d_model);
      layer.time_ln2 = init_ln(cfg.d_model);
    }
    if (cfg.enable_rel_block) {
      layer.rel_attn = init_attention(tokens, rng);
      layer.rel_ln1 = init_ln(tokens);
      layer.rel_ff = init_ff(cfg.d_model, ff, cfg.d_model, rng);
      layer.rel_ln2 = init_ln(cfg.d_model);
    }
    layer.fuse_ln1 = init_ln(fuse_in);
    layer.fuse_ff = init_ff(fuse_in, ff, cfg.d_model, rng);
    layer.fuse_ln2 = init_ln(cfg.d_model);
  }
  return s;
}

namespace {

void collect_attention(const AttentionParams& a, const std::string& p, std::vector<NamedTensor>& out) {
  out.push_back({p + ".wq", a.wq});
  out.push_back({p + ".wk", a.wk});
  out.push_back({p + ".wv", a.wv});
  out.push_back({p + ".wo", a.wo});
}

void collect_ff(const FeedForwardParams& f, const std::string& p, std::vector<NamedTensor>& out) {
  out.push_back({p + ".w1", f.w1});
  out.push_back({p + ".b1", f.b1});
  out.push_back({p + ".w2", f.w2});
  out.push_back({p + ".b2", f.b2});
}

void collect_ln(const LayerNormParams& l, const std::string& p, std::vector<NamedTensor>& out) {
  out.push_back({p + ".gain", l.gain});
  out.push_back({p + ".bias", l.bias});
}

}  // namespace

void collect_parameters(const EncoderStreamParams& stream, const std::string& prefix,
                        const EncoderConfig& cfg, std::vector<NamedTensor>& out) {
  out.push_back({prefix + ".embed_w", stream.embed_weight});
  for (std::size_t i = 0; i < stream.layers.size(); ++i) {
    const std::string lp = prefix + ".l" + std::to_string(i);
    const auto& layer = stream.layers[i];
    if (cfg.enable_time_block) {
      collect_attention(layer.time_attn, lp + ".time.attn", out);
      collect_ff(layer.time_ff, lp + ".time.ff", out);
      collect_ln(layer.time_ln1, lp + ".time.ln1", out);
      collect_ln(layer.time_ln2, lp + ".time.ln2", out);
    }
    if (cfg.enable_rel_block) {
      collect_attention(layer.rel_attn, lp + ".rel.attn", out);
      collect_ln(layer.rel_ln1, lp + ".rel.ln1", out);
      collect_ff(layer.rel_ff, lp + ".rel.ff", out);
      collect_ln(layer.rel_ln2, lp + ".rel.ln2", out);
    }
    collect_ln(layer.fuse_ln1, lp + ".fuse.ln1", out);
    collect_ff(layer.fuse_ff, lp + ".fuse.ff", out);
    collect_ln(layer.fuse_ln2, lp + ".fuse.ln2", out);
  }
}

Tensor embed(const Tensor& window, const EncoderStreamParams& stream) {
  if (window.ndim() != 2 || window.cols() != stream.embed_weight.rows()) {
    throw DimensionError("embed: window " + shape_str(window.shape()) +
                         " does not match projection " + shape_str(stream.embed_weight.shape()));
  }
  if (window.rows() != stream.tokens) {
    throw DimensionError("embed: window has " + std::to_string(window.rows()) +
                         " timestamps, stream expects " + std::to_string(stream.tokens));
  }
  return add(matmul(window, stream.embed_weight), stream.positional);
}

namespace {

// softmax(Q K' / sqrt(d_k)) V with a final output projection; one head on
// the given token axis.
Tensor attention_single(const Tensor& h, const AttentionParams& p) {
  Tensor q = matmul(h, p.wq);
  Tensor k = matmul(h, p.wk);
  Tensor v = matmul(h, p.wv);
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(k.cols()));
  Tensor attn = softmax_rows(scale(matmul(q, transpose(k)), inv_sqrt));
  return matmul(matmul(attn, v), p.wo);
}

Tensor attention_multihead(const Tensor& h, const AttentionParams& p, Index n_heads) {
  if (n_heads <= 1) return attention_single(h, p);
  Tensor q = matmul(h, p.wq);
  Tensor k = matmul(h, p.wk);
  Tensor v = matmul(h, p.wv);
  const Index dh = q.cols() / n_heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  Tensor merged;
  for (Index head = 0; head < n_heads; ++head) {
    Tensor qh = take_cols(q, head * dh, dh);
    Tensor kh = take_cols(k, head * dh, dh);
    Tensor vh = take_cols(v, head * dh, dh);
    Tensor attn = softmax_rows(scale(matmul(qh, transpose(kh)), inv_sqrt));
    Tensor oh = matmul(attn, vh);
    merged = head == 0 ? oh : concat_cols(merged, oh);
  }
  return matmul(merged, p.wo);
}

}  // namespace

Tensor time_block(const Tensor& h, const SdlLayerParams& layer, const EncoderConfig& cfg) {
  Tensor attended = attention_multihead(h, layer.time_attn, cfg.n_heads);
  Tensor mid = layer_norm(add(h, attended), layer.time_ln1.gain, layer.time_ln1.bias);
  Tensor ff = pointwise_feedforward(mid, layer.time_ff.w1, layer.time_ff.b1, layer.time_ff.w2,
                                    layer.time_ff.b2);
  return layer_norm(add(mid, ff), layer.time_ln2.gain, layer.time_ln2.bias);
}

Tensor rel_block(const Tensor& h, const SdlLayerParams& layer) {
  // attention over the transposed matrix: d_model tokens of length L
  Tensor ht = transpose(h);
  Tensor attended = attention_single(ht, layer.rel_attn);
  Tensor mid = layer_norm(add(ht, attended), layer.rel_ln1.gain, layer.rel_ln1.bias);
  Tensor back = transpose(mid);  // (L, d_model) again
  Tensor ff = pointwise_feedforward(back, layer.rel_ff.w1, layer.rel_ff.b1, layer.rel_ff.w2,
                                    layer.rel_ff.b2);
  return layer_norm(add(back, ff), layer.rel_ln2.gain, layer.rel_ln2.bias);
}

Tensor fuse(const Tensor& h_time, const Tensor& h_rel, const SdlLayerParams& layer) {
  if (h_time.shape() != h_rel.shape()) {
    throw DimensionError("fuse: branch shapes disagree, " + shape_str(h_time.shape()) + " vs " +
                         shape_str(h_rel.shape()));
  }
  Tensor cat = concat_cols(h_time, h_rel);  // (L, 2*d_model)
  Tensor mid = layer_norm(cat, layer.fuse_ln1.gain, layer.fuse_ln1.bias);
  Tensor ff = pointwise_feedforward(mid, layer.fuse_ff.w1, layer.fuse_ff.b1, layer.fuse_ff.w2,
                                    layer.fuse_ff.b2);
  return layer_norm(ff, layer.fuse_ln2.gain, layer.fuse_ln2.bias);
}

Tensor fuse_single(const Tensor& h_branch, const SdlLayerParams& layer) {
  Tensor mid = layer_norm(h_branch, layer.fuse_ln1.gain, layer.fuse_ln1.bias);
  Tensor ff = pointwise_feedforward(mid, layer.fuse_ff.w1, layer.fuse_ff.b1, layer.fuse_ff.w2,
                                    layer.fuse_ff.b2);
  return layer_norm(ff, layer.fuse_ln2.gain, layer.fuse_ln2.bias);
}

Tensor encode_stream(const Tensor& window, const EncoderStreamParams& stream,
                     const EncoderConfig& cfg) {
  cfg.validate();
  Tensor h = embed(window, stream);
  for (const auto& layer : stream.layers) {
    if (cfg.enable_time_block && cfg.enable_rel_block) {
      h = fuse(time_block(h, layer, cfg), rel_block(h, layer), layer);
    } else if (cfg.enable_time_block) {
      h = fuse_single(time_block(h, layer, cfg), layer);
    } else {
      h = fuse_single(rel_block(h, layer), layer);
    }
  }
  return h;
}

}  // namespace dconad
