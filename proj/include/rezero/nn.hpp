#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rezero/ops.hpp"
#include "rezero/tensor.hpp"

namespace rezero {

/// Anything with a forward pass and trainable parameters. Parameters are
/// bound onto the graph of the input tensor, so a forward on a graph-free
/// input is a plain evaluation.
class Module {
 public:
  virtual ~Module() = default;

  virtual Tensor forward(const Tensor& x) = 0;
  virtual void collect(std::vector<Parameter*>& out) = 0;
  virtual void set_training(bool /*training*/) {}

  /// Parameters in first-seen order with shared ones listed once.
  std::vector<Parameter*> parameters();
};

enum class InitScheme { He, HeResidual, XavierUniform };

InitScheme parse_init_scheme(std::string_view name);
std::string_view to_string(InitScheme scheme);

/// Standard deviation (normal schemes) or half-width (uniform) for a weight.
double init_scale(InitScheme scheme, Index fan_in, Index fan_out);

class Linear : public Module {
 public:
  Linear(std::string name, Index in, Index out, bool bias = true);

  Tensor forward(const Tensor& x) override;
  void collect(std::vector<Parameter*>& out) override;

  Index in_features() const { return in_; }
  Index out_features() const { return out_; }
  Parameter& weight() { return weight_; }
  Parameter* bias() { return bias_ ? &*bias_ : nullptr; }

 private:
  Index in_;
  Index out_;
  Parameter weight_;
  std::optional<Parameter> bias_;
};

inline constexpr double kLayerNormEps = 1e-5;

class LayerNorm : public Module {
 public:
  LayerNorm(std::string name, Index width, double eps = kLayerNormEps);

  Tensor forward(const Tensor& x) override;
  void collect(std::vector<Parameter*>& out) override;

  Index width() const { return width_; }
  double eps() const { return eps_; }
  Parameter& gamma() { return gamma_; }
  Parameter& beta() { return beta_; }

 private:
  Index width_;
  double eps_;
  Parameter gamma_;
  Parameter beta_;
};

/// softmax(Q K^T / sqrt(cols(Q))) V, optionally with a causal mask.
Tensor scaled_dot_product(const Tensor& q, const Tensor& k, const Tensor& v, bool causal);

/// Single-head self attention of x [n, d] with d x d projections.
Tensor attention_forward(const Tensor& wq, const Tensor& wk, const Tensor& wv, const Tensor& x,
                         bool causal = false);

class MultiHeadAttention : public Module {
 public:
  MultiHeadAttention(std::string name, Index width, Index heads, bool causal = false);

  Tensor forward(const Tensor& x) override;
  void collect(std::vector<Parameter*>& out) override;

  Index width() const { return width_; }
  Index heads() const { return heads_; }
  bool causal() const { return causal_; }
  Parameter& wq() { return wq_; }
  Parameter& wk() { return wk_; }
  Parameter& wv() { return wv_; }
  Parameter& wo() { return wo_; }

 private:
  Index width_;
  Index heads_;
  bool causal_;
  Parameter wq_, wk_, wv_, wo_;
};

/// Position-wise linear -> GELU -> linear.
class FeedForward : public Module {
 public:
  FeedForward(std::string name, Index width, Index hidden);

  Tensor forward(const Tensor& x) override;
  void collect(std::vector<Parameter*>& out) override;

  Linear& up() { return up_; }
  Linear& down() { return down_; }

 private:
  Linear up_;
  Linear down_;
};

/// Token table plus learned positional table.
class EmbeddingTable {
 public:
  EmbeddingTable(std::string name, Index vocab, Index context, Index width);

  /// Embeds tokens[i] at position i; g may be null.
  Tensor forward(std::span<const int> tokens, Graph* g);
  void collect(std::vector<Parameter*>& out);

  Index vocab() const { return vocab_; }
  Index context() const { return context_; }
  Parameter& tokens() { return tokens_; }
  Parameter& positions() { return positions_; }

 private:
  Index vocab_;
  Index context_;
  Parameter tokens_;
  Parameter positions_;
};

/// Inverted dropout: in training mode each element survives with
/// probability 1-p and is scaled by 1/(1-p); in eval mode it is the identity.
class Dropout : public Module {
 public:
  Dropout(double rate, SeededRng* rng);

  Tensor forward(const Tensor& x) override;
  void collect(std::vector<Parameter*>&) override {}
  void set_training(bool training) override { training_ = training; }

  double rate() const { return rate_; }
  bool training() const { return training_; }

 private:
  double rate_;
  SeededRng* rng_;
  bool training_ = false;
};

/// Runs its children in order.
class Sequential : public Module {
 public:
  Sequential() = default;
  explicit Sequential(std::vector<std::unique_ptr<Module>> layers) : layers_(std::move(layers)) {}

  Sequential& push(std::unique_ptr<Module> layer);
  Tensor forward(const Tensor& x) override;
  void collect(std::vector<Parameter*>& out) override;
  void set_training(bool training) override;

  std::size_t size() const { return layers_.size(); }
  Module& at(std::size_t i) { return *layers_.at(i); }

 private:
  std::vector<std::unique_ptr<Module>> layers_;
};

/// Parameter-free module around an arbitrary tensor function.
class Lambda : public Module {
 public:
  explicit Lambda(std::function<Tensor(const Tensor&)> fn) : fn_(std::move(fn)) {}

  Tensor forward(const Tensor& x) override { return fn_(x); }
  void collect(std::vector<Parameter*>&) override {}

 private:
  std::function<Tensor(const Tensor&)> fn_;
};

// Weight initialization. Biases are zeroed; LayerNorm gets gamma=1, beta=0.
void init_weights(Linear& layer, InitScheme scheme, SeededRng& rng);
void init_weights(MultiHeadAttention& layer, InitScheme scheme, SeededRng& rng);
void init_weights(FeedForward& layer, InitScheme scheme, SeededRng& rng);
void init_weights(LayerNorm& layer);
void init_weights(EmbeddingTable& table, SeededRng& rng);

}  // namespace rezero
