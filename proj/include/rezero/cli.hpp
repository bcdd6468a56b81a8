#pragma once

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "rezero/config.hpp"
#include "rezero/isometry.hpp"
#include "rezero/residual.hpp"
#include "rezero/train.hpp"

namespace rezero {

enum ExitCode { kExitOk = 0, kExitUsage = 1, kExitNumeric = 2, kExitIo = 3 };

/// Entry point of the rezero_lab tool; args excludes the program name.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Default configurations of the training subcommands.
TrainConfig fc_compare_defaults();
TrainConfig deep_fc_defaults();
TrainConfig lm_defaults();

/// Variants compared by fc-compare: Plain, Residual, NormOnly, ReZero.
std::vector<VariantKind> fc_compare_variants();

struct VariantRuns {
  VariantKind variant;
  std::vector<RunLog> runs;  // one per seed
  /// Mean iterations to the config threshold; a run that never gets there
  /// counts as the full iteration budget.
  double mean_iterations = 0.0;
};

/// Trains each variant once per seed (seeds base.seed, base.seed + 1, ...).
std::vector<VariantRuns> compare_variants(const TrainConfig& base,
                                          const std::vector<VariantKind>& variants, int seeds);

/// Whether the loss fell below 90% of its initial value (both taken as
/// trailing means) without diverging.
bool trained(const RunLog& log);

/// Block stack for Jacobian analysis, named "<variant>-tx" (transformer
/// encoder layers, non-causal) or "<variant>-fc" (dense blocks).
struct AnalysisStack {
  std::unique_ptr<BlockStack> stack;
  Index rows = 0;
  Index width = 0;
};

AnalysisStack build_analysis_stack(const std::string& model, int depth, double alpha0,
                                   Index tokens, Index width, Index heads, SeededRng& rng);

/// Unit Gaussian input of shape [tokens, width] and the spectrum of the
/// stack's Jacobian there.
SpectrumResult stack_spectrum(AnalysisStack& s, SeededRng& rng, double tau = kVanishingThreshold);

}  // namespace rezero
