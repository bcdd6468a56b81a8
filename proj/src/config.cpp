#include "rezero/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "rezero/error.hpp"
#include "rezero/tensor_io.hpp"

namespace rezero {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double to_double(std::string_view key, std::string_view v) {
  const std::string s(v);
  try {
    std::size_t used = 0;
    const double d = std::stod(s, &used);
    if (used == s.size()) return d;
  } catch (const std::logic_error&) {
  }
  throw ConfigError("key '" + std::string(key) + "' expects a number, got '" + s + "'");
}

long long to_integer(std::string_view key, std::string_view v) {
  const std::string s(v);
  try {
    std::size_t used = 0;
    const long long n = std::stoll(s, &used);
    if (used == s.size()) return n;
  } catch (const std::logic_error&) {
  }
  throw ConfigError("key '" + std::string(key) + "' expects an integer, got '" + s + "'");
}

std::uint64_t to_seed(std::string_view key, std::string_view v) {
  const std::string s(v);
  try {
    std::size_t used = 0;
    const unsigned long long n = std::stoull(s, &used);
    if (used == s.size() && !s.empty() && s[0] != '-') return n;
  } catch (const std::logic_error&) {
  }
  throw ConfigError("key '" + std::string(key) + "' expects an unsigned integer, got '" + s + "'");
}

bool to_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("key '" + std::string(key) + "' expects true or false");
}

std::string num(double v) { return format_double(v); }

}  // namespace

Schedule effective_schedule(const TrainConfig& c) {
  if (c.schedule) return *c.schedule;
  if (c.warmup > 0) return sched::LinearWarmup{c.warmup, c.lr};
  return sched::Constant{c.lr};
}

long effective_epoch_iterations(const TrainConfig& c) {
  if (c.epoch_iterations > 0) return c.epoch_iterations;
  if (c.model.kind == ModelKind::Transformer) return 50;
  return std::max<long>(1, static_cast<long>(c.data.samples / std::max<Index>(1, c.batch)));
}

KeyValues parse_key_values(std::string_view text) {
  KeyValues out;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    }
    std::string key = trim(std::string_view(t).substr(0, eq));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    out.emplace_back(std::move(key), trim(std::string_view(t).substr(eq + 1)));
  }
  return out;
}

KeyValues read_key_values(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_key_values(buf.str());
}

void apply_setting(TrainConfig& c, std::string_view key, std::string_view value) {
  ModelConfig& m = c.model;
  if (key == "model") {
    m.kind = parse_model_kind(value);
  } else if (key == "depth") {
    m.depth = static_cast<int>(to_integer(key, value));
  } else if (key == "width") {
    m.width = to_integer(key, value);
  } else if (key == "variant") {
    m.variant.kind = parse_variant(value);
  } else if (key == "alpha0") {
    m.variant.alpha0 = to_double(key, value);
  } else if (key == "skipinit_s0") {
    m.variant.skipinit_s0 = to_double(key, value);
  } else if (key == "highway_bias0") {
    m.variant.highway_bias0 = to_double(key, value);
  } else if (key == "fixup_m") {
    m.variant.fixup_m = static_cast<int>(to_integer(key, value));
  } else if (key == "init") {
    if (value == "auto") {
      m.init.reset();
    } else {
      m.init = parse_init_scheme(value);
    }
  } else if (key == "branch_layers") {
    m.branch_layers = static_cast<int>(to_integer(key, value));
  } else if (key == "activation") {
    if (value == "relu") {
      m.activation = Activation::Relu;
    } else if (value == "gelu") {
      m.activation = Activation::Gelu;
    } else {
      throw ConfigError("activation must be relu or gelu");
    }
  } else if (key == "heads") {
    m.heads = to_integer(key, value);
  } else if (key == "context") {
    m.context = to_integer(key, value);
  } else if (key == "ffn_hidden") {
    m.ffn_hidden = to_integer(key, value);
  } else if (key == "dropout") {
    m.dropout = to_double(key, value);
  } else if (key == "causal") {
    m.causal = to_bool(key, value);
  } else if (key == "sharing") {
    if (value == "per_block") {
      m.sharing = AlphaSharing::PerBlock;
    } else if (value == "per_layer_pair") {
      m.sharing = AlphaSharing::PerLayerPair;
    } else {
      throw ConfigError("sharing must be per_block or per_layer_pair");
    }
  } else if (key == "dataset") {
    c.data.kind = parse_dataset(value);
  } else if (key == "samples") {
    c.data.samples = to_integer(key, value);
  } else if (key == "classes") {
    c.data.classes = static_cast<int>(to_integer(key, value));
    c.model.classes = c.data.classes;
  } else if (key == "noise") {
    c.data.noise = to_double(key, value);
  } else if (key == "separation") {
    c.data.separation = to_double(key, value);
  } else if (key == "turns") {
    c.data.turns = to_double(key, value);
  } else if (key == "corpus") {
    c.data.corpus = std::string(value);
  } else if (key == "batch") {
    c.batch = to_integer(key, value);
  } else if (key == "optimizer") {
    c.optimizer.kind = parse_optimizer(value);
  } else if (key == "momentum") {
    c.optimizer.momentum = to_double(key, value);
  } else if (key == "weight_decay") {
    c.optimizer.weight_decay = to_double(key, value);
  } else if (key == "eps") {
    c.optimizer.eps = to_double(key, value);
  } else if (key == "residual_lr") {
    if (value == "off") {
      c.optimizer.residual_lr.reset();
    } else {
      c.optimizer.residual_lr = to_double(key, value);
    }
  } else if (key == "lr") {
    c.lr = to_double(key, value);
  } else if (key == "warmup") {
    c.warmup = static_cast<long>(to_integer(key, value));
  } else if (key == "schedule") {
    if (value == "auto") {
      c.schedule.reset();
    } else {
      c.schedule = parse_schedule(value);
    }
  } else if (key == "iterations") {
    c.iterations = static_cast<long>(to_integer(key, value));
  } else if (key == "epoch_iterations") {
    c.epoch_iterations = static_cast<long>(to_integer(key, value));
  } else if (key == "seed") {
    c.seed = to_seed(key, value);
  } else if (key == "threshold") {
    c.threshold = to_double(key, value);
  } else {
    throw ConfigError("unknown config key '" + std::string(key) + "'");
  }
}

void apply_settings(TrainConfig& c, const KeyValues& kv) {
  for (const auto& [k, v] : kv) apply_setting(c, k, v);
}

KeyValues to_key_values(const TrainConfig& c) {
  const ModelConfig& m = c.model;
  return {
      {"model", std::string(to_string(m.kind))},
      {"depth", std::to_string(m.depth)},
      {"width", std::to_string(m.width)},
      {"variant", std::string(to_string(m.variant.kind))},
      {"alpha0", num(m.variant.alpha0)},
      {"skipinit_s0", num(m.variant.skipinit_s0)},
      {"highway_bias0", num(m.variant.highway_bias0)},
      {"fixup_m", std::to_string(m.variant.fixup_m)},
      {"init", m.init ? std::string(to_string(*m.init)) : "auto"},
      {"branch_layers", std::to_string(m.branch_layers)},
      {"activation", m.activation == Activation::Relu ? "relu" : "gelu"},
      {"heads", std::to_string(m.heads)},
      {"context", std::to_string(m.context)},
      {"ffn_hidden", std::to_string(m.ffn_hidden)},
      {"dropout", num(m.dropout)},
      {"causal", m.causal ? "true" : "false"},
      {"sharing", m.sharing == AlphaSharing::PerBlock ? "per_block" : "per_layer_pair"},
      {"dataset", std::string(to_string(c.data.kind))},
      {"samples", std::to_string(c.data.samples)},
      {"classes", std::to_string(c.data.classes)},
      {"noise", num(c.data.noise)},
      {"separation", num(c.data.separation)},
      {"turns", num(c.data.turns)},
      {"corpus", c.data.corpus},
      {"batch", std::to_string(c.batch)},
      {"optimizer", std::string(to_string(c.optimizer.kind))},
      {"momentum", num(c.optimizer.momentum)},
      {"weight_decay", num(c.optimizer.weight_decay)},
      {"eps", num(c.optimizer.eps)},
      {"residual_lr", c.optimizer.residual_lr ? num(*c.optimizer.residual_lr) : "off"},
      {"lr", num(c.lr)},
      {"warmup", std::to_string(c.warmup)},
      {"schedule", c.schedule ? to_string(*c.schedule) : "auto"},
      {"iterations", std::to_string(c.iterations)},
      {"epoch_iterations", std::to_string(c.epoch_iterations)},
      {"seed", std::to_string(c.seed)},
      {"threshold", num(c.threshold)},
  };
}

std::optional<std::uint64_t> seed_from_env() {
  const char* v = std::getenv(kSeedEnv);
  if (!v || !*v) return std::nullopt;
  return to_seed(kSeedEnv, v);
}

void apply_seed_env(TrainConfig& c) {
  if (auto s = seed_from_env()) c.seed = *s;
}

}  // namespace rezero
