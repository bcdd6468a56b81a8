#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "rezero/nn.hpp"

namespace rezero {

// Signal-propagation mechanisms a block F can be wrapped in:
//
//   Plain          F(x)
//   Residual       x + F(x)
//   NormOnly       Norm(F(x))
//   PreNorm        x + F(Norm(x))
//   PostNorm       Norm(x + F(x))
//   GPT2Norm       x + Norm(F(x))
//   ReZero         x + a F(x)                 a = alpha0 (default 0)
//   GatedResNet    (1 - T) x + T F(x)         T = sigmoid(a), a = alpha0
//   Highway        (1 - T) x + T F(x)         T = sigmoid(x W_T + b_T)
//   ZeroGamma      x + Norm_g(F(x))           g initialized to 0
//   FixUp          x + s F(x)                 s = 1, scalar biases inside F
//   SkipInit       x + s F(x)                 s = skipinit_s0 (default 0)
//   PreActivation  x + F(x)                   activation leads inside F
//
// Norm is always LayerNorm.
enum class VariantKind {
  Plain,
  Residual,
  NormOnly,
  PreNorm,
  PostNorm,
  GPT2Norm,
  ReZero,
  GatedResNet,
  Highway,
  ZeroGamma,
  FixUp,
  SkipInit,
  PreActivation,
};

std::string_view to_string(VariantKind kind);
/// Case-insensitive; accepts the enumerator names.
VariantKind parse_variant(std::string_view name);
std::vector<VariantKind> all_variants();
bool has_residual_weight(VariantKind kind);

struct Variant {
  VariantKind kind = VariantKind::ReZero;
  double alpha0 = 0.0;
  double skipinit_s0 = 0.0;
  double highway_bias0 = -2.0;
  int fixup_m = 2;
};

enum class Activation { Relu, Gelu };

struct DenseBranchConfig {
  Index width = 0;
  int layers = 1;
  Activation activation = Activation::Relu;
  bool activate_output = true;
  bool preactivate = false;
};

/// Fully connected residual branch: `layers` width-preserving linear maps
/// with activations between them (and after the last one when
/// activate_output is set). FixUp's scalar biases can be switched on; they
/// sit before every linear layer and every activation.
class DenseBranch : public Module {
 public:
  DenseBranch(std::string name, DenseBranchConfig config);

  Tensor forward(const Tensor& x) override;
  void collect(std::vector<Parameter*>& out) override;

  const DenseBranchConfig& config() const { return config_; }
  std::vector<Linear*> linears();
  void enable_fixup_biases();
  bool has_fixup_biases() const { return !fixup_biases_.empty(); }

 private:
  Tensor activate(const Tensor& x) const;
  Tensor fixup_bias(const Tensor& x, std::size_t slot);

  std::string name_;
  DenseBranchConfig config_;
  std::vector<std::unique_ptr<Linear>> layers_;
  std::vector<std::unique_ptr<Parameter>> fixup_biases_;
};

/// A branch F wrapped by one variant rule, with the gate parameters that the
/// rule needs.
class WrappedBlock : public Module {
 public:
  WrappedBlock(std::string name, std::unique_ptr<Module> branch, Variant variant, Index width,
               std::shared_ptr<Parameter> shared_gate = nullptr);

  Tensor forward(const Tensor& x) override;
  void collect(std::vector<Parameter*>& out) override;
  void set_training(bool training) override { branch_->set_training(training); }

  const Variant& variant() const { return variant_; }
  Index width() const { return width_; }
  Module& branch() { return *branch_; }
  /// Scalar gate: alpha for ReZero / GatedResNet, s for SkipInit.
  Parameter* gate_scalar() { return gate_scalar_.get(); }
  std::shared_ptr<Parameter> gate_scalar_handle() { return gate_scalar_; }
  LayerNorm* norm() { return norm_ ? &*norm_ : nullptr; }
  Linear* highway_gate() { return highway_ ? &*highway_ : nullptr; }
  Parameter* fixup_multiplier() { return fixup_multiplier_ ? &*fixup_multiplier_ : nullptr; }

 private:
  std::string name_;
  std::unique_ptr<Module> branch_;
  Variant variant_;
  Index width_;
  std::shared_ptr<Parameter> gate_scalar_;
  std::optional<LayerNorm> norm_;
  std::optional<Linear> highway_;
  std::optional<Parameter> fixup_multiplier_;
};

std::unique_ptr<WrappedBlock> make_block(std::string name, std::unique_ptr<Module> branch,
                                         const Variant& variant, Index width,
                                         std::shared_ptr<Parameter> shared_gate = nullptr);

inline Tensor block_forward(WrappedBlock& block, const Tensor& x) { return block.forward(x); }

enum class AlphaSharing { PerBlock, PerLayerPair };

struct StackConfig {
  int depth = 1;
  int branch_layers = 1;
  Index width = 0;
  Variant variant;
  AlphaSharing sharing = AlphaSharing::PerBlock;
};

/// L^(-1/(2m-2)), the FixUp branch weight scale.
double fixup_scale(int depth, int branch_layers);

/// Stack-level initialization that depends on the variant: FixUp rescaling
/// and zeroing, zero gamma, and gate starting values. `depth` counts residual
/// branches.
void init_stack(const std::vector<WrappedBlock*>& blocks, const StackConfig& config,
                SeededRng& rng);

/// |gate| per distinct gate parameter, in block order. A pair of blocks that
/// share one gate contributes a single entry.
std::vector<double> residual_weights(const std::vector<WrappedBlock*>& blocks);

/// Sequential container of wrapped blocks.
class BlockStack : public Module {
 public:
  BlockStack& push(std::unique_ptr<WrappedBlock> block);

  Tensor forward(const Tensor& x) override;
  void collect(std::vector<Parameter*>& out) override;
  void set_training(bool training) override;

  std::size_t size() const { return blocks_.size(); }
  WrappedBlock& at(std::size_t i) { return *blocks_.at(i); }
  std::vector<WrappedBlock*> blocks();

 private:
  std::vector<std::unique_ptr<WrappedBlock>> blocks_;
};

}  // namespace rezero
