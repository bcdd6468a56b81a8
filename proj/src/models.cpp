#include "rezero/models.hpp"

#include <string>

#include "rezero/error.hpp"

namespace rezero {

ModelKind parse_model_kind(std::string_view name) {
  if (name == "fc") return ModelKind::Fc;
  if (name == "transformer" || name == "transformer-decoder") return ModelKind::Transformer;
  throw ConfigError("unknown model '" + std::string(name) + "'");
}

std::string_view to_string(ModelKind kind) { return kind == ModelKind::Fc ? "fc" : "transformer"; }

InitScheme effective_init(const ModelConfig& config) {
  if (config.init) return *config.init;
  if (config.kind == ModelKind::Transformer) return InitScheme::XavierUniform;
  return config.variant.kind == VariantKind::Residual ? InitScheme::HeResidual : InitScheme::He;
}

namespace {

void check_common(const ModelConfig& c) {
  if (c.depth < 1) throw ConfigError("depth must be >= 1");
  if (c.width < 2) throw ConfigError("width must be >= 2");
}

StackConfig stack_config(const ModelConfig& c, int depth, int branch_layers) {
  StackConfig s;
  s.depth = depth;
  s.branch_layers = branch_layers;
  s.width = c.width;
  s.variant = c.variant;
  s.sharing = c.sharing;
  return s;
}

}  // namespace

std::unique_ptr<BlockStack> make_fc_stack(const ModelConfig& config, SeededRng& rng) {
  check_common(config);
  const VariantKind kind = config.variant.kind;
  const InitScheme scheme = effective_init(config);
  const int layers = kind == VariantKind::FixUp ? config.variant.fixup_m : config.branch_layers;
  if (kind == VariantKind::FixUp && layers < 2) throw ConfigError("FixUp needs fixup_m >= 2");

  DenseBranchConfig bc;
  bc.width = config.width;
  bc.layers = layers;
  bc.activation = config.activation;
  bc.activate_output = kind != VariantKind::PreActivation && kind != VariantKind::FixUp;
  bc.preactivate = kind == VariantKind::PreActivation;

  auto stack = std::make_unique<BlockStack>();
  for (int i = 0; i < config.depth; ++i) {
    const std::string name = "block" + std::to_string(i);
    auto branch = std::make_unique<DenseBranch>(name + ".branch", bc);
    for (Linear* l : branch->linears()) init_weights(*l, scheme, rng);
    stack->push(make_block(name, std::move(branch), config.variant, config.width));
  }
  init_stack(stack->blocks(), stack_config(config, config.depth, layers), rng);
  return stack;
}

FcNet::FcNet(const ModelConfig& config, SeededRng& rng)
    : config_(config), input_("input", config.input_dim, config.width),
      readout_("readout", config.width, config.classes) {
  check_common(config_);
  if (config_.kind != ModelKind::Fc) throw ConfigError("FcNet needs model = fc");
  if (config_.input_dim < 1 || config_.classes < 2) {
    throw ConfigError("fc net needs input_dim >= 1 and classes >= 2");
  }
  init_weights(input_, InitScheme::He, rng);
  stack_ = make_fc_stack(config_, rng);
  if (config_.variant.kind == VariantKind::FixUp) {
    readout_.weight().set_value(Tensor::zeros(readout_.weight().shape()));
  } else {
    init_weights(readout_, InitScheme::He, rng);
  }
}

Tensor FcNet::features(const Tensor& x) { return stack_->forward(input_.forward(x)); }

Tensor FcNet::forward(const Tensor& x) { return readout_.forward(features(x)); }

void FcNet::collect(std::vector<Parameter*>& out) {
  input_.collect(out);
  stack_->collect(out);
  readout_.collect(out);
}

std::unique_ptr<BlockStack> make_transformer_stack(const ModelConfig& config, SeededRng& rng,
                                                   SeededRng* dropout_rng) {
  check_common(config);
  const VariantKind kind = config.variant.kind;
  if (kind == VariantKind::FixUp) {
    throw ConfigError("FixUp is only supported on fully connected models");
  }
  const InitScheme scheme = effective_init(config);
  const Index hidden = config.ffn_hidden > 0 ? config.ffn_hidden : 4 * config.width;
  auto stack = std::make_unique<BlockStack>();
  for (int i = 0; i < config.depth; ++i) {
    const std::string name = "layer" + std::to_string(i);

    auto attn = std::make_unique<MultiHeadAttention>(name + ".attn", config.width, config.heads,
                                                     config.causal);
    init_weights(*attn, scheme, rng);
    auto attn_branch = std::make_unique<Sequential>();
    attn_branch->push(std::move(attn));
    attn_branch->push(std::make_unique<Dropout>(config.dropout, dropout_rng));
    auto first = make_block(name + ".attn_block", std::move(attn_branch), config.variant,
                            config.width);

    auto ffn = std::make_unique<FeedForward>(name + ".ffn", config.width, hidden);
    init_weights(*ffn, scheme, rng);
    auto ffn_branch = std::make_unique<Sequential>();
    ffn_branch->push(std::move(ffn));
    ffn_branch->push(std::make_unique<Dropout>(config.dropout, dropout_rng));
    std::shared_ptr<Parameter> shared;
    if (config.sharing == AlphaSharing::PerLayerPair && has_residual_weight(kind)) {
      shared = first->gate_scalar_handle();
    }
    auto second = make_block(name + ".ffn_block", std::move(ffn_branch), config.variant,
                             config.width, shared);

    stack->push(std::move(first));
    stack->push(std::move(second));
  }
  init_stack(stack->blocks(), stack_config(config, 2 * config.depth, 1), rng);
  return stack;
}

TransformerLM::TransformerLM(const ModelConfig& config, SeededRng& rng, SeededRng* dropout_rng)
    : config_(config), embedding_("embed", config.vocab, config.context, config.width),
      readout_("readout", config.width, config.vocab) {
  if (config_.kind != ModelKind::Transformer) throw ConfigError("language model needs a transformer");
  if (config_.vocab < 2) throw ConfigError("vocabulary must have at least two symbols");
  if (config_.context < 1) throw ConfigError("context must be >= 1");
  init_weights(embedding_, rng);
  stack_ = make_transformer_stack(config_, rng, dropout_rng);
  const VariantKind kind = config_.variant.kind;
  if (kind == VariantKind::PreNorm || kind == VariantKind::GPT2Norm) {
    final_norm_.emplace("final_norm", config_.width);
  }
  init_weights(readout_, effective_init(config_), rng);
}

Tensor TransformerLM::forward(std::span<const int> tokens, Graph* g) {
  Tensor h = stack_->forward(embedding_.forward(tokens, g));
  if (final_norm_) h = final_norm_->forward(h);
  return readout_.forward(h);
}

std::vector<Parameter*> TransformerLM::parameters() {
  std::vector<Parameter*> out;
  embedding_.collect(out);
  for (Parameter* p : stack_->parameters()) out.push_back(p);
  if (final_norm_) final_norm_->collect(out);
  readout_.collect(out);
  return out;
}

}  // namespace rezero
