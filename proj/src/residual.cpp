#include "rezero/residual.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <unordered_set>
#include <utility>

namespace rezero {

namespace {

constexpr std::array<std::pair<VariantKind, std::string_view>, 13> kVariantNames{{
    {VariantKind::Plain, "Plain"},
    {VariantKind::Residual, "Residual"},
    {VariantKind::NormOnly, "NormOnly"},
    {VariantKind::PreNorm, "PreNorm"},
    {VariantKind::PostNorm, "PostNorm"},
    {VariantKind::GPT2Norm, "GPT2Norm"},
    {VariantKind::ReZero, "ReZero"},
    {VariantKind::GatedResNet, "GatedResNet"},
    {VariantKind::Highway, "Highway"},
    {VariantKind::ZeroGamma, "ZeroGamma"},
    {VariantKind::FixUp, "FixUp"},
    {VariantKind::SkipInit, "SkipInit"},
    {VariantKind::PreActivation, "PreActivation"},
}};

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) ==
                  std::tolower(static_cast<unsigned char>(y));
         });
}

bool needs_norm(VariantKind kind) {
  switch (kind) {
    case VariantKind::NormOnly:
    case VariantKind::PreNorm:
    case VariantKind::PostNorm:
    case VariantKind::GPT2Norm:
    case VariantKind::ZeroGamma:
      return true;
    default:
      return false;
  }
}

Tensor one_minus(const Tensor& t) { return add_scalar(scale(t, -1.0), 1.0); }

}  // namespace

std::string_view to_string(VariantKind kind) {
  for (const auto& [k, name] : kVariantNames) {
    if (k == kind) return name;
  }
  return "?";
}

VariantKind parse_variant(std::string_view name) {
  for (const auto& [k, n] : kVariantNames) {
    if (iequals(n, name)) return k;
  }
  throw ConfigError("unknown variant '" + std::string(name) + "'");
}

std::vector<VariantKind> all_variants() {
  std::vector<VariantKind> out;
  for (const auto& entry : kVariantNames) out.push_back(entry.first);
  return out;
}

bool has_residual_weight(VariantKind kind) {
  return kind == VariantKind::ReZero || kind == VariantKind::GatedResNet ||
         kind == VariantKind::SkipInit;
}

DenseBranch::DenseBranch(std::string name, DenseBranchConfig config)
    : name_(std::move(name)), config_(config) {
  if (config_.layers < 1) throw ConfigError("dense branch needs at least one layer");
  if (config_.width < 1) throw ConfigError("dense branch needs a positive width");
  for (int i = 0; i < config_.layers; ++i) {
    layers_.push_back(std::make_unique<Linear>(name_ + ".fc" + std::to_string(i), config_.width,
                                               config_.width));
  }
}

Tensor DenseBranch::activate(const Tensor& x) const {
  return config_.activation == Activation::Relu ? relu(x) : gelu(x);
}

Tensor DenseBranch::fixup_bias(const Tensor& x, std::size_t slot) {
  if (fixup_biases_.empty()) return x;
  return add(x, bind(*fixup_biases_.at(slot), x.graph()));
}

Tensor DenseBranch::forward(const Tensor& x) {
  std::size_t slot = 0;
  Tensor y = x;
  if (config_.preactivate) y = activate(fixup_bias(y, slot++));
  for (int i = 0; i < config_.layers; ++i) {
    y = layers_[static_cast<std::size_t>(i)]->forward(fixup_bias(y, slot++));
    if (i + 1 < config_.layers || config_.activate_output) y = activate(fixup_bias(y, slot++));
  }
  return y;
}

void DenseBranch::collect(std::vector<Parameter*>& out) {
  for (auto& layer : layers_) layer->collect(out);
  for (auto& b : fixup_biases_) out.push_back(b.get());
}

std::vector<Linear*> DenseBranch::linears() {
  std::vector<Linear*> out;
  for (auto& layer : layers_) out.push_back(layer.get());
  return out;
}

void DenseBranch::enable_fixup_biases() {
  std::size_t slots = static_cast<std::size_t>(config_.layers) + (config_.preactivate ? 1 : 0) +
                      static_cast<std::size_t>(config_.layers - 1) +
                      (config_.activate_output ? 1 : 0);
  fixup_biases_.clear();
  for (std::size_t i = 0; i < slots; ++i) {
    fixup_biases_.push_back(
        std::make_unique<Parameter>(name_ + ".fixup_bias" + std::to_string(i), Tensor::zeros({1})));
  }
}

WrappedBlock::WrappedBlock(std::string name, std::unique_ptr<Module> branch, Variant variant,
                           Index width, std::shared_ptr<Parameter> shared_gate)
    : name_(std::move(name)), branch_(std::move(branch)), variant_(variant), width_(width) {
  if (!branch_) throw ConfigError("wrapped block needs a branch");
  if (width < 1) throw ConfigError("wrapped block needs a positive width");
  const VariantKind kind = variant_.kind;
  if (has_residual_weight(kind)) {
    if (shared_gate) {
      if (shared_gate->shape() != Shape{1}) throw ConfigError("shared gate must be a scalar");
      gate_scalar_ = std::move(shared_gate);
    } else {
      const bool skip = kind == VariantKind::SkipInit;
      gate_scalar_ = std::make_shared<Parameter>(
          name_ + (skip ? ".skip" : ".alpha"),
          Tensor::scalar(skip ? variant_.skipinit_s0 : variant_.alpha0), ParamGroup::ResidualWeight);
    }
  } else if (shared_gate) {
    throw ConfigError(std::string("variant ") + std::string(to_string(kind)) +
                      " has no scalar gate to share");
  }
  if (needs_norm(kind)) {
    norm_.emplace(name_ + ".norm", width);
    if (kind == VariantKind::ZeroGamma) norm_->gamma().set_value(Tensor::zeros({width}));
  }
  if (kind == VariantKind::Highway) {
    highway_.emplace(name_ + ".gate", width, width);
    highway_->bias()->set_value(Tensor::constant({width}, variant_.highway_bias0));
  }
  if (kind == VariantKind::FixUp) {
    auto* dense = dynamic_cast<DenseBranch*>(branch_.get());
    if (!dense) throw ConfigError("FixUp is only supported on dense branches");
    if (variant_.fixup_m < 2) throw ConfigError("FixUp needs m >= 2 branch layers");
    if (!dense->has_fixup_biases()) dense->enable_fixup_biases();
    fixup_multiplier_.emplace(name_ + ".fixup_scale", Tensor::scalar(1.0));
  }
}

Tensor WrappedBlock::forward(const Tensor& x) {
  if (x.rank() != 2 || x.dim(1) != width_) {
    throw ShapeError("block " + name_ + " expects width " + std::to_string(width_) + ", got " +
                     shape_string(x.shape()));
  }
  Graph* g = x.graph();
  switch (variant_.kind) {
    case VariantKind::Plain:
      return branch_->forward(x);
    case VariantKind::Residual:
    case VariantKind::PreActivation:
      return add(x, branch_->forward(x));
    case VariantKind::NormOnly:
      return norm_->forward(branch_->forward(x));
    case VariantKind::PreNorm:
      return add(x, branch_->forward(norm_->forward(x)));
    case VariantKind::PostNorm:
      return norm_->forward(add(x, branch_->forward(x)));
    case VariantKind::GPT2Norm:
    case VariantKind::ZeroGamma:
      return add(x, norm_->forward(branch_->forward(x)));
    case VariantKind::ReZero:
    case VariantKind::SkipInit:
      return add(x, mul(branch_->forward(x), bind(*gate_scalar_, g)));
    case VariantKind::FixUp:
      return add(x, mul(branch_->forward(x), bind(*fixup_multiplier_, g)));
    case VariantKind::GatedResNet: {
      Tensor t = sigmoid(bind(*gate_scalar_, g));
      return add(mul(x, one_minus(t)), mul(branch_->forward(x), t));
    }
    case VariantKind::Highway: {
      Tensor t = sigmoid(highway_->forward(x));
      return add(mul(one_minus(t), x), mul(t, branch_->forward(x)));
    }
  }
  throw ContractError("unhandled variant");
}

void WrappedBlock::collect(std::vector<Parameter*>& out) {
  branch_->collect(out);
  if (gate_scalar_) out.push_back(gate_scalar_.get());
  if (norm_) norm_->collect(out);
  if (highway_) highway_->collect(out);
  if (fixup_multiplier_) out.push_back(&*fixup_multiplier_);
}

std::unique_ptr<WrappedBlock> make_block(std::string name, std::unique_ptr<Module> branch,
                                         const Variant& variant, Index width,
                                         std::shared_ptr<Parameter> shared_gate) {
  return std::make_unique<WrappedBlock>(std::move(name), std::move(branch), variant, width,
                                        std::move(shared_gate));
}

double fixup_scale(int depth, int branch_layers) {
  if (branch_layers < 2) throw ConfigError("FixUp needs m >= 2 branch layers");
  if (depth < 1) throw ConfigError("FixUp needs depth >= 1");
  return std::pow(static_cast<double>(depth), -1.0 / (2.0 * branch_layers - 2.0));
}

void init_stack(const std::vector<WrappedBlock*>& blocks, const StackConfig& config,
                SeededRng& rng) {
  if (config.depth < 1) throw ConfigError("stack depth must be >= 1");
  std::unordered_set<Parameter*> gates_done;
  for (WrappedBlock* block : blocks) {
    const Variant& v = block->variant();
    switch (v.kind) {
      case VariantKind::FixUp: {
        auto* dense = dynamic_cast<DenseBranch*>(&block->branch());
        if (!dense) throw ConfigError("FixUp is only supported on dense branches");
        const int m = config.branch_layers;
        const double s = fixup_scale(config.depth, m);
        auto layers = dense->linears();
        if (static_cast<int>(layers.size()) != m) {
          throw ConfigError("FixUp branch has " + std::to_string(layers.size()) +
                            " layers but m = " + std::to_string(m));
        }
        for (std::size_t i = 0; i < layers.size(); ++i) {
          Linear& layer = *layers[i];
          if (i + 1 == layers.size()) {
            layer.weight().set_value(Tensor::zeros(layer.weight().shape()));
            if (Parameter* b = layer.bias()) b->set_value(Tensor::zeros(b->shape()));
          } else {
            init_weights(layer, InitScheme::He, rng);
            layer.weight().set_value(Vector(layer.weight().value().data() * s));
          }
        }
        dense->enable_fixup_biases();
        block->fixup_multiplier()->set_value(Tensor::scalar(1.0));
        break;
      }
      case VariantKind::ZeroGamma:
        block->norm()->gamma().set_value(Tensor::zeros({block->width()}));
        block->norm()->beta().set_value(Tensor::zeros({block->width()}));
        break;
      case VariantKind::ReZero:
      case VariantKind::GatedResNet:
      case VariantKind::SkipInit: {
        Parameter* gate = block->gate_scalar();
        if (gates_done.insert(gate).second) {
          gate->set_value(Tensor::scalar(v.kind == VariantKind::SkipInit ? v.skipinit_s0 : v.alpha0));
        }
        break;
      }
      case VariantKind::Highway: {
        Linear& gate = *block->highway_gate();
        init_weights(gate, InitScheme::XavierUniform, rng);
        gate.bias()->set_value(Tensor::constant({block->width()}, v.highway_bias0));
        break;
      }
      default:
        break;
    }
  }
}

std::vector<double> residual_weights(const std::vector<WrappedBlock*>& blocks) {
  std::vector<double> out;
  std::unordered_set<Parameter*> seen;
  for (WrappedBlock* block : blocks) {
    Parameter* gate = block->gate_scalar();
    if (!gate) {
      throw ContractError(std::string("variant ") + std::string(to_string(block->variant().kind)) +
                          " has no residual weight");
    }
    if (seen.insert(gate).second) out.push_back(std::abs(gate->value().item()));
  }
  return out;
}

BlockStack& BlockStack::push(std::unique_ptr<WrappedBlock> block) {
  blocks_.push_back(std::move(block));
  return *this;
}

Tensor BlockStack::forward(const Tensor& x) {
  Tensor y = x;
  for (auto& block : blocks_) y = block->forward(y);
  return y;
}

void BlockStack::collect(std::vector<Parameter*>& out) {
  for (auto& block : blocks_) block->collect(out);
}

void BlockStack::set_training(bool training) {
  for (auto& block : blocks_) block->set_training(training);
}

std::vector<WrappedBlock*> BlockStack::blocks() {
  std::vector<WrappedBlock*> out;
  for (auto& block : blocks_) out.push_back(block.get());
  return out;
}

}  // namespace rezero
