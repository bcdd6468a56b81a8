#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "rezero/nn.hpp"
#include "rezero/residual.hpp"

namespace rezero {

enum class ModelKind { Fc, Transformer };

ModelKind parse_model_kind(std::string_view name);
std::string_view to_string(ModelKind kind);

struct ModelConfig {
  ModelKind kind = ModelKind::Fc;
  int depth = 4;  // residual blocks (FC) or layers of attention + FFN (transformer)
  Index width = 64;
  Variant variant;
  /// Empty means the per-variant default: he_residual for the vanilla
  /// residual FC net, he for the other FC nets, xavier_uniform for transformers.
  std::optional<InitScheme> init;

  // fully connected
  int branch_layers = 1;
  Activation activation = Activation::Relu;
  Index input_dim = 2;
  int classes = 2;

  // transformer
  Index vocab = 0;
  Index context = 64;
  Index heads = 2;
  Index ffn_hidden = 0;  // 0 means 4 * width
  double dropout = 0.0;
  bool causal = true;
  AlphaSharing sharing = AlphaSharing::PerLayerPair;
};

InitScheme effective_init(const ModelConfig& config);

/// `depth` wrapped dense blocks of width `width`, initialized for the variant.
std::unique_ptr<BlockStack> make_fc_stack(const ModelConfig& config, SeededRng& rng);

/// input linear -> stack of wrapped dense blocks -> readout linear.
class FcNet : public Module {
 public:
  FcNet(const ModelConfig& config, SeededRng& rng);

  Tensor forward(const Tensor& x) override;
  void collect(std::vector<Parameter*>& out) override;

  /// Output of the block stack, before the readout.
  Tensor features(const Tensor& x);

  Linear& input() { return input_; }
  BlockStack& stack() { return *stack_; }
  Linear& readout() { return readout_; }
  const ModelConfig& config() const { return config_; }

 private:
  ModelConfig config_;
  Linear input_;
  std::unique_ptr<BlockStack> stack_;
  Linear readout_;
};

/// 2 * depth wrapped sublayers alternating attention and feed-forward, each
/// followed by dropout inside the branch. Under PerLayerPair sharing the two
/// sublayers of one layer use a single gate scalar.
std::unique_ptr<BlockStack> make_transformer_stack(const ModelConfig& config, SeededRng& rng,
                                                   SeededRng* dropout_rng);

/// Token + position embedding, transformer stack, optional final LayerNorm
/// (PreNorm and GPT2Norm), readout to the vocabulary.
class TransformerLM {
 public:
  TransformerLM(const ModelConfig& config, SeededRng& rng, SeededRng* dropout_rng);

  /// Logits [tokens, vocab].
  Tensor forward(std::span<const int> tokens, Graph* g);
  std::vector<Parameter*> parameters();
  void set_training(bool training) { stack_->set_training(training); }

  EmbeddingTable& embedding() { return embedding_; }
  BlockStack& stack() { return *stack_; }
  LayerNorm* final_norm() { return final_norm_ ? &*final_norm_ : nullptr; }
  Linear& readout() { return readout_; }
  const ModelConfig& config() const { return config_; }

 private:
  ModelConfig config_;
  EmbeddingTable embedding_;
  std::unique_ptr<BlockStack> stack_;
  std::optional<LayerNorm> final_norm_;
  Linear readout_;
};

}  // namespace rezero
