#include "rezero/nn.hpp"

#include <cmath>
#include <unordered_set>

namespace rezero {

std::vector<Parameter*> Module::parameters() {
  std::vector<Parameter*> all;
  collect(all);
  std::vector<Parameter*> out;
  std::unordered_set<Parameter*> seen;
  for (Parameter* p : all) {
    if (seen.insert(p).second) out.push_back(p);
  }
  return out;
}

InitScheme parse_init_scheme(std::string_view name) {
  if (name == "he") return InitScheme::He;
  if (name == "he_residual") return InitScheme::HeResidual;
  if (name == "xavier_uniform") return InitScheme::XavierUniform;
  throw ConfigError("unknown init scheme '" + std::string(name) + "'");
}

std::string_view to_string(InitScheme scheme) {
  switch (scheme) {
    case InitScheme::He:
      return "he";
    case InitScheme::HeResidual:
      return "he_residual";
    case InitScheme::XavierUniform:
      return "xavier_uniform";
  }
  return "?";
}

double init_scale(InitScheme scheme, Index fan_in, Index fan_out) {
  switch (scheme) {
    case InitScheme::He:
      return std::sqrt(2.0 / static_cast<double>(fan_in));
    case InitScheme::HeResidual:
      return std::sqrt(0.25 / static_cast<double>(fan_in));
    case InitScheme::XavierUniform:
      return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  }
  throw ConfigError("unknown init scheme");
}

namespace {

Tensor draw_weight(InitScheme scheme, Index fan_in, Index fan_out, SeededRng& rng) {
  const double s = init_scale(scheme, fan_in, fan_out);
  if (scheme == InitScheme::XavierUniform) {
    return Tensor::create({fan_in, fan_out}, init::Uniform{-s, s, &rng});
  }
  return Tensor::create({fan_in, fan_out}, init::Normal{0.0, s, &rng});
}

}  // namespace

Linear::Linear(std::string name, Index in, Index out, bool bias)
    : in_(in), out_(out), weight_(name + ".weight", Tensor::zeros({in, out})) {
  if (bias) bias_.emplace(name + ".bias", Tensor::zeros({out}));
}

Tensor Linear::forward(const Tensor& x) {
  if (x.rank() != 2 || x.dim(1) != in_) {
    throw ShapeError("linear expects [n," + std::to_string(in_) + "], got " +
                     shape_string(x.shape()));
  }
  Tensor y = matmul(x, bind(weight_, x.graph()));
  if (bias_) y = add_row(y, bind(*bias_, x.graph()));
  return y;
}

void Linear::collect(std::vector<Parameter*>& out) {
  out.push_back(&weight_);
  if (bias_) out.push_back(&*bias_);
}

LayerNorm::LayerNorm(std::string name, Index width, double eps)
    : width_(width), eps_(eps), gamma_(name + ".gamma", Tensor::ones({width})),
      beta_(name + ".beta", Tensor::zeros({width})) {
  if (!(eps > 0.0)) throw ConfigError("LayerNorm eps must be positive");
  if (width < 2) throw ConfigError("LayerNorm needs width >= 2");
}

Tensor LayerNorm::forward(const Tensor& x) {
  if (x.rank() != 2 || x.dim(1) != width_) {
    throw ShapeError("layer norm expects [n," + std::to_string(width_) + "], got " +
                     shape_string(x.shape()));
  }
  Tensor y = normalize_rows(x, eps_);
  y = mul_row(y, bind(gamma_, x.graph()));
  return add_row(y, bind(beta_, x.graph()));
}

void LayerNorm::collect(std::vector<Parameter*>& out) {
  out.push_back(&gamma_);
  out.push_back(&beta_);
}

Tensor scaled_dot_product(const Tensor& q, const Tensor& k, const Tensor& v, bool causal) {
  Tensor scores = scale(matmul(q, transpose(k)), 1.0 / std::sqrt(static_cast<double>(q.dim(1))));
  if (causal) scores = causal_mask(scores);
  return matmul(softmax(scores, 1), v);
}

Tensor attention_forward(const Tensor& wq, const Tensor& wk, const Tensor& wv, const Tensor& x,
                         bool causal) {
  if (x.rank() != 2 || wq.rank() != 2 || wq.dim(0) != x.dim(1) || wk.shape() != wq.shape() ||
      wv.dim(0) != x.dim(1)) {
    throw ShapeError("attention projections do not match input " + shape_string(x.shape()));
  }
  return scaled_dot_product(matmul(x, wq), matmul(x, wk), matmul(x, wv), causal);
}

MultiHeadAttention::MultiHeadAttention(std::string name, Index width, Index heads, bool causal)
    : width_(width), heads_(heads), causal_(causal),
      wq_(name + ".wq", Tensor::zeros({width, width})),
      wk_(name + ".wk", Tensor::zeros({width, width})),
      wv_(name + ".wv", Tensor::zeros({width, width})),
      wo_(name + ".wo", Tensor::zeros({width, width})) {
  if (heads < 1 || width % heads != 0) {
    throw ConfigError("attention width " + std::to_string(width) + " is not divisible by " +
                      std::to_string(heads) + " heads");
  }
}

Tensor MultiHeadAttention::forward(const Tensor& x) {
  if (x.rank() != 2 || x.dim(1) != width_) {
    throw ShapeError("attention expects [n," + std::to_string(width_) + "], got " +
                     shape_string(x.shape()));
  }
  Graph* g = x.graph();
  Tensor q = matmul(x, bind(wq_, g));
  Tensor k = matmul(x, bind(wk_, g));
  Tensor v = matmul(x, bind(wv_, g));
  Tensor mixed;
  if (heads_ == 1) {
    mixed = scaled_dot_product(q, k, v, causal_);
  } else {
    const Index dh = width_ / heads_;
    std::vector<Tensor> outs;
    outs.reserve(static_cast<std::size_t>(heads_));
    for (Index h = 0; h < heads_; ++h) {
      const Index b = h * dh;
      outs.push_back(scaled_dot_product(slice_cols(q, b, b + dh), slice_cols(k, b, b + dh),
                                        slice_cols(v, b, b + dh), causal_));
    }
    mixed = concat_cols(outs);
  }
  return matmul(mixed, bind(wo_, g));
}

void MultiHeadAttention::collect(std::vector<Parameter*>& out) {
  out.insert(out.end(), {&wq_, &wk_, &wv_, &wo_});
}

FeedForward::FeedForward(std::string name, Index width, Index hidden)
    : up_(name + ".up", width, hidden), down_(name + ".down", hidden, width) {}

Tensor FeedForward::forward(const Tensor& x) { return down_.forward(gelu(up_.forward(x))); }

void FeedForward::collect(std::vector<Parameter*>& out) {
  up_.collect(out);
  down_.collect(out);
}

EmbeddingTable::EmbeddingTable(std::string name, Index vocab, Index context, Index width)
    : vocab_(vocab), context_(context), tokens_(name + ".tokens", Tensor::zeros({vocab, width})),
      positions_(name + ".positions", Tensor::zeros({context, width})) {}

Tensor EmbeddingTable::forward(std::span<const int> tokens, Graph* g) {
  if (static_cast<Index>(tokens.size()) > context_) {
    throw ShapeError("sequence of " + std::to_string(tokens.size()) + " exceeds context " +
                     std::to_string(context_));
  }
  std::vector<int> pos(tokens.size());
  for (std::size_t i = 0; i < pos.size(); ++i) pos[i] = static_cast<int>(i);
  return add(gather_rows(bind(tokens_, g), tokens), gather_rows(bind(positions_, g), pos));
}

void EmbeddingTable::collect(std::vector<Parameter*>& out) {
  out.push_back(&tokens_);
  out.push_back(&positions_);
}

Dropout::Dropout(double rate, SeededRng* rng) : rate_(rate), rng_(rng) {
  if (rate < 0.0 || rate >= 1.0) throw ConfigError("dropout rate must lie in [0, 1)");
}

Tensor Dropout::forward(const Tensor& x) {
  if (!training_ || rate_ == 0.0) return x;
  if (!rng_) throw ContractError("dropout in training mode needs a random source");
  const double keep = 1.0 - rate_;
  Vector mask(x.size());
  for (Index i = 0; i < mask.size(); ++i) mask[i] = rng_->bernoulli(keep) ? 1.0 / keep : 0.0;
  return mul(x, Tensor(x.shape(), std::move(mask)));
}

Sequential& Sequential::push(std::unique_ptr<Module> layer) {
  layers_.push_back(std::move(layer));
  return *this;
}

Tensor Sequential::forward(const Tensor& x) {
  Tensor y = x;
  for (auto& layer : layers_) y = layer->forward(y);
  return y;
}

void Sequential::collect(std::vector<Parameter*>& out) {
  for (auto& layer : layers_) layer->collect(out);
}

void Sequential::set_training(bool training) {
  for (auto& layer : layers_) layer->set_training(training);
}

void init_weights(Linear& layer, InitScheme scheme, SeededRng& rng) {
  layer.weight().set_value(draw_weight(scheme, layer.in_features(), layer.out_features(), rng));
  if (Parameter* b = layer.bias()) b->set_value(Tensor::zeros(b->shape()));
}

void init_weights(MultiHeadAttention& layer, InitScheme scheme, SeededRng& rng) {
  const Index d = layer.width();
  for (Parameter* p : {&layer.wq(), &layer.wk(), &layer.wv(), &layer.wo()}) {
    p->set_value(draw_weight(scheme, d, d, rng));
  }
}

void init_weights(FeedForward& layer, InitScheme scheme, SeededRng& rng) {
  init_weights(layer.up(), scheme, rng);
  init_weights(layer.down(), scheme, rng);
}

void init_weights(LayerNorm& layer) {
  layer.gamma().set_value(Tensor::ones({layer.width()}));
  layer.beta().set_value(Tensor::zeros({layer.width()}));
}

void init_weights(EmbeddingTable& table, SeededRng& rng) {
  table.tokens().set_value(Tensor::create(table.tokens().shape(), init::Normal{0.0, 1.0, &rng}));
  table.positions().set_value(
      Tensor::create(table.positions().shape(), init::Normal{0.0, 1.0, &rng}));
}

}  // namespace rezero
