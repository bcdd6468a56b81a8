#include "rezero/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "rezero/error.hpp"
#include "rezero/export.hpp"
#include "rezero/tensor_io.hpp"
#include "rezero/toy.hpp"

namespace rezero {

TrainConfig fc_compare_defaults() {
  TrainConfig c;
  c.model.kind = ModelKind::Fc;
  c.model.depth = 32;
  c.model.width = 64;
  c.model.classes = 4;
  c.data.kind = DatasetKind::Blobs;
  c.data.classes = 4;
  c.data.samples = 512;
  c.data.separation = 3.0;
  c.data.noise = 0.7;
  c.batch = 64;
  c.optimizer.kind = OptimizerKind::Adagrad;
  c.lr = 0.01;
  c.iterations = 150;
  c.threshold = 0.3;
  return c;
}

TrainConfig deep_fc_defaults() {
  TrainConfig c = fc_compare_defaults();
  c.model.depth = 128;
  c.model.width = 16;
  c.model.classes = 2;
  c.data.classes = 2;
  c.data.noise = 0.5;
  c.lr = 0.003;
  c.iterations = 100;
  c.threshold = 0.1;
  return c;
}

TrainConfig lm_defaults() {
  TrainConfig c;
  c.model.kind = ModelKind::Transformer;
  c.model.depth = 4;
  c.model.width = 64;
  c.model.context = 64;
  c.model.heads = 2;
  c.model.variant.kind = VariantKind::ReZero;
  c.batch = 4;
  c.optimizer.kind = OptimizerKind::Adagrad;
  c.lr = 0.01;
  c.iterations = 300;
  c.epoch_iterations = 25;
  c.threshold = 2.5;
  return c;
}

std::vector<VariantKind> fc_compare_variants() {
  return {VariantKind::Plain, VariantKind::Residual, VariantKind::NormOnly, VariantKind::ReZero};
}

std::vector<VariantRuns> compare_variants(const TrainConfig& base,
                                          const std::vector<VariantKind>& variants, int seeds) {
  if (seeds < 1) throw ConfigError("need at least one seed");
  std::vector<VariantRuns> out;
  for (VariantKind v : variants) {
    VariantRuns r{v, {}, 0.0};
    for (int s = 0; s < seeds; ++s) {
      TrainConfig c = base;
      c.model.variant.kind = v;
      c.seed = base.seed + static_cast<std::uint64_t>(s);
      r.runs.push_back(train(c));
      const auto hit = iterations_to_threshold(r.runs.back(), c.threshold);
      r.mean_iterations += hit ? static_cast<double>(*hit) : static_cast<double>(c.iterations);
    }
    r.mean_iterations /= seeds;
    out.push_back(std::move(r));
  }
  return out;
}

bool trained(const RunLog& log) {
  if (log.diverged || log.loss.size() < 2) return false;
  const std::size_t k = std::min<std::size_t>(kThresholdWindow, log.loss.size());
  double head = 0.0, tail = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    head += log.loss[i];
    tail += log.loss[log.loss.size() - 1 - i];
  }
  return tail < 0.9 * head;
}

AnalysisStack build_analysis_stack(const std::string& model, int depth, double alpha0,
                                   Index tokens, Index width, Index heads, SeededRng& rng) {
  const auto dash = model.rfind('-');
  if (dash == std::string::npos) {
    throw ConfigError("model must look like <variant>-tx or <variant>-fc, got '" + model + "'");
  }
  const std::string suffix = model.substr(dash + 1);
  ModelConfig m;
  m.depth = depth;
  m.width = width;
  m.variant.kind = parse_variant(model.substr(0, dash));
  m.variant.alpha0 = alpha0;
  AnalysisStack s;
  s.rows = tokens;
  s.width = width;
  if (suffix == "tx") {
    m.kind = ModelKind::Transformer;
    m.heads = heads;
    m.causal = false;
    s.stack = make_transformer_stack(m, rng, nullptr);
  } else if (suffix == "fc") {
    m.kind = ModelKind::Fc;
    s.stack = make_fc_stack(m, rng);
  } else {
    throw ConfigError("unknown model family '" + suffix + "' (expected tx or fc)");
  }
  return s;
}

SpectrumResult stack_spectrum(AnalysisStack& s, SeededRng& rng, double tau) {
  Tensor x = Tensor::create({s.rows, s.width}, init::Normal{0.0, 1.0, &rng});
  return analyze(jacobian(*s.stack, x), tau);
}

namespace {

// Flags shared by the training subcommands.
struct TrainFlags {
  std::string config_file;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
};

void add_train_flags(CLI::App* sub, TrainFlags& f) {
  sub->add_option("--config", f.config_file, "key = value config file");
  sub->add_option("--set", f.overrides, "config override KEY=VALUE (repeatable)");
  sub->add_option("--seed", f.seed, "random seed");
}

// defaults < config file < flags < $REZERO_LAB_SEED
TrainConfig resolve(TrainConfig c, const TrainFlags& f) {
  if (!f.config_file.empty()) apply_settings(c, read_key_values(f.config_file));
  for (const auto& kv : f.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects KEY=VALUE, got '" + kv + "'");
    apply_settings(c, parse_key_values(kv));
  }
  if (f.seed) c.seed = *f.seed;
  apply_seed_env(c);
  return c;
}

std::uint64_t seed_or_env(std::uint64_t seed) { return seed_from_env().value_or(seed); }

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(6) << v;
  return s.str();
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return out;
}

std::string iterations_text(const RunLog& log, double threshold) {
  const auto hit = iterations_to_threshold(log, threshold);
  return hit ? std::to_string(*hit) : std::string("not-reached");
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"ReZero residual-gate experiments", "rezero_lab"};
  app.require_subcommand(1);

  // toy-contour
  int tc_depth = 5;
  double tc_target = 50.0;
  double tc_w_lo = -3.0, tc_w_hi = 3.0, tc_a_lo = -1.0, tc_a_hi = 2.0;
  int tc_samples = 121;
  std::string tc_out = "toy_contour.json";
  auto* tc = app.add_subcommand("toy-contour", "log gradient-norm grid of the scalar toy model");
  tc->add_option("--depth", tc_depth, "depth L")->capture_default_str();
  tc->add_option("--target", tc_target, "target factor t")->capture_default_str();
  tc->add_option("--w-min", tc_w_lo)->capture_default_str();
  tc->add_option("--w-max", tc_w_hi)->capture_default_str();
  tc->add_option("--alpha-min", tc_a_lo)->capture_default_str();
  tc->add_option("--alpha-max", tc_a_hi)->capture_default_str();
  tc->add_option("--samples", tc_samples, "grid points per axis")->capture_default_str();
  tc->add_option("--out", tc_out)->capture_default_str();

  // toy-train
  toy::Config<double> tt;
  double tt_w0 = 1.0, tt_alpha0 = 0.0;
  std::string tt_out = "toy_trajectory.csv";
  auto* ttc = app.add_subcommand("toy-train", "gradient descent on the scalar toy model");
  ttc->add_option("--depth", tt.depth)->capture_default_str();
  ttc->add_option("--target", tt.target)->capture_default_str();
  ttc->add_option("--lr", tt.lr)->capture_default_str();
  ttc->add_option("--steps", tt.steps)->capture_default_str();
  ttc->add_option("--w0", tt_w0)->capture_default_str();
  ttc->add_option("--alpha0", tt_alpha0)->capture_default_str();
  ttc->add_flag("--freeze-alpha", tt.freeze_alpha, "keep alpha at its initial value");
  ttc->add_option("--out", tt_out)->capture_default_str();

  // fc-compare
  TrainFlags fcf;
  int fc_seeds = 5;
  std::string fc_out = "fc_compare";
  auto* fcc = app.add_subcommand("fc-compare", "FC, FC+Res, FC+Norm and ReZero on one task");
  add_train_flags(fcc, fcf);
  fcc->add_option("--seeds", fc_seeds, "number of seeds")->capture_default_str();
  fcc->add_option("--out", fc_out, "output directory")->capture_default_str();

  // deep-fc
  TrainFlags dff;
  std::optional<int> df_depth;
  std::string df_out = "deep_fc";
  auto* dfc = app.add_subcommand("deep-fc", "trainability of a deep Plain vs ReZero FC net");
  add_train_flags(dfc, dff);
  dfc->add_option("--depth", df_depth, "number of blocks");
  dfc->add_option("--out", df_out, "output directory")->capture_default_str();

  // jacobian-spectrum
  std::string js_model = "rezero-tx";
  int js_depth = 4;
  double js_alpha0 = 0.0;
  Index js_tokens = 8, js_width = 16, js_heads = 2;
  std::uint64_t js_seed = 0;
  double js_tau = kVanishingThreshold;
  std::string js_out = "spectrum.json";
  auto* jsc = app.add_subcommand("jacobian-spectrum", "singular values of a stack's Jacobian");
  jsc->add_option("--model", js_model, "<variant>-tx or <variant>-fc")->capture_default_str();
  jsc->add_option("--depth", js_depth)->capture_default_str();
  jsc->add_option("--alpha0", js_alpha0)->capture_default_str();
  jsc->add_option("--tokens", js_tokens, "input rows")->capture_default_str();
  jsc->add_option("--width", js_width)->capture_default_str();
  jsc->add_option("--heads", js_heads)->capture_default_str();
  jsc->add_option("--seed", js_seed)->capture_default_str();
  jsc->add_option("--threshold", js_tau, "vanishing threshold")->capture_default_str();
  jsc->add_option("--out", js_out)->capture_default_str();

  // train-lm
  TrainFlags lmf;
  std::optional<std::string> lm_variant;
  std::optional<double> lm_alpha0;
  std::optional<long> lm_warmup;
  std::string lm_out = "lm_run.csv";
  auto* lmc = app.add_subcommand("train-lm", "tiny character-level transformer language model");
  add_train_flags(lmc, lmf);
  lmc->add_option("--variant", lm_variant, "postnorm, prenorm, gpt2norm or rezero");
  lmc->add_option("--alpha0", lm_alpha0, "initial residual weight");
  lmc->add_option("--warmup", lm_warmup, "linear warm-up iterations");
  lmc->add_option("--out", lm_out, "runlog path")->capture_default_str();

  // alpha-heatmap
  std::string ah_runlog;
  std::string ah_out = "alpha_heatmap.csv";
  auto* ahc = app.add_subcommand("alpha-heatmap", "epoch x layer |alpha| matrix of a run");
  ahc->add_option("--runlog", ah_runlog, "runlog written by train-lm")->required();
  ahc->add_option("--out", ah_out)->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << "run with --help for usage\n";
    return kExitUsage;
  }

  try {
    if (*tc) {
      toy::Config<double> c;
      c.depth = tc_depth;
      c.target = tc_target;
      c.validate();
      const auto grid = toy::grad_norm_grid({tc_w_lo, tc_w_hi}, {tc_a_lo, tc_a_hi}, tc_samples, c);
      write_grid(tc_out, grid);
      out << "wrote " << tc_samples << "x" << tc_samples << " grid to " << tc_out << " (floored "
          << grid.floored << ", overflowed " << grid.overflowed << ")\n";
    } else if (*ttc) {
      tt.init = {tt_w0, tt_alpha0};
      const auto traj = toy::gd(tt);
      write_trajectory(tt_out, traj);
      if (traj.steps.empty()) {
        out << "diverged at the initial state\n";
      } else {
        const auto& last = traj.steps.back();
        out << "steps " << last.step << "  w " << fmt(last.w) << "  alpha " << fmt(last.alpha)
            << "  alpha*w " << fmt(last.w * last.alpha) << "  loss " << fmt(last.loss)
            << (traj.diverged ? "  DIVERGED" : "") << "\n";
      }
    } else if (*fcc) {
      const TrainConfig base = resolve(fc_compare_defaults(), fcf);
      ensure_dir(fc_out);
      const auto results = compare_variants(base, fc_compare_variants(), fc_seeds);
      out << "variant       mean_iterations_to_" << fmt(base.threshold) << "  per-seed\n";
      for (const auto& r : results) {
        out << std::left << std::setw(14) << to_string(r.variant) << std::setw(24)
            << fmt(r.mean_iterations);
        for (std::size_t s = 0; s < r.runs.size(); ++s) {
          write_runlog(fc_out + "/" + lower(to_string(r.variant)) + "_seed" +
                           std::to_string(base.seed + s) + ".csv",
                       r.runs[s]);
          out << ' ' << iterations_text(r.runs[s], base.threshold);
        }
        out << "\n";
      }
    } else if (*dfc) {
      TrainConfig base = deep_fc_defaults();
      if (df_depth) base.model.depth = *df_depth;
      base = resolve(base, dff);
      if (df_depth) base.model.depth = *df_depth;
      ensure_dir(df_out);
      for (VariantKind v : {VariantKind::Plain, VariantKind::ReZero}) {
        TrainConfig c = base;
        c.model.variant.kind = v;
        const RunLog log = train(c);
        write_runlog(df_out + "/" + lower(to_string(v)) + ".csv", log);
        out << std::left << std::setw(8) << to_string(v) << " depth " << c.model.depth
            << "  initial " << fmt(log.loss.empty() ? NAN : log.loss.front()) << "  final "
            << fmt(*log.metric("final_loss")) << "  "
            << (log.diverged ? "diverged" : trained(log) ? "trained" : "stuck") << "\n";
      }
    } else if (*jsc) {
      SeededRng rng(seed_or_env(js_seed));
      AnalysisStack s = build_analysis_stack(js_model, js_depth, js_alpha0, js_tokens, js_width,
                                             js_heads, rng);
      const SpectrumResult r = stack_spectrum(s, rng, js_tau);
      write_spectrum(js_out, r,
                     {{"model", js_model},
                      {"depth", std::to_string(js_depth)},
                      {"alpha0", format_double(js_alpha0)},
                      {"tokens", std::to_string(js_tokens)},
                      {"width", std::to_string(js_width)},
                      {"seed", std::to_string(seed_or_env(js_seed))}});
      out << js_model << " depth " << js_depth << ": chi " << format_double(r.chi)
          << "  vanishing " << r.vanishing_count << "/" << r.singular_values.size()
          << "  sigma_max " << fmt(r.singular_values[0]) << "  sigma_min "
          << fmt(r.singular_values[r.singular_values.size() - 1]) << "\n";
    } else if (*lmc) {
      TrainConfig c = lm_defaults();
      c = resolve(c, lmf);
      if (lm_variant) c.model.variant.kind = parse_variant(*lm_variant);
      if (lm_alpha0) c.model.variant.alpha0 = *lm_alpha0;
      if (lm_warmup) c.warmup = *lm_warmup;
      const RunLog log = train(c);
      write_runlog(lm_out, log);
      out << to_string(c.model.variant.kind) << " alpha0 " << fmt(c.model.variant.alpha0)
          << " warmup " << c.warmup << ": iterations " << log.loss.size() << "  final loss "
          << fmt(*log.metric("final_loss")) << " nats/char (" << fmt(*log.metric("bits_per_char"))
          << " bits/char)  to threshold " << iterations_text(log, c.threshold)
          << (log.diverged ? "  DIVERGED" : "") << "\n";
    } else if (*ahc) {
      const auto alpha = read_alpha_matrix(ah_runlog + ".alpha.csv");
      if (alpha.empty() || alpha.front().empty()) {
        throw ConfigError("run " + ah_runlog + " has no residual weights");
      }
      write_alpha_matrix(ah_out, alpha);
      out << "wrote " << alpha.size() << " epochs x " << alpha.front().size() << " gates to "
          << ah_out << "\n";
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const DomainError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumeric;
  }
  return kExitOk;
}

}  // namespace rezero
