#include "rezero/train.hpp"

#include <cmath>
#include <numbers>

#include "rezero/error.hpp"
#include "rezero/ops.hpp"

namespace rezero {

std::optional<double> RunLog::metric(const std::string& name) const {
  for (const auto& [k, v] : metrics) {
    if (k == name) return v;
  }
  return std::nullopt;
}

std::optional<long> iterations_to_threshold(const std::vector<double>& loss, double threshold,
                                            int window) {
  if (window < 1) throw ContractError("threshold window must be >= 1");
  double sum = 0.0;
  for (std::size_t i = 0; i < loss.size(); ++i) {
    sum += loss[i];
    if (i >= static_cast<std::size_t>(window)) sum -= loss[i - static_cast<std::size_t>(window)];
    const auto n = std::min<std::size_t>(i + 1, static_cast<std::size_t>(window));
    if (sum / static_cast<double>(n) <= threshold) return static_cast<long>(i);
  }
  return std::nullopt;
}

std::optional<long> iterations_to_threshold(const RunLog& log, double threshold, int window) {
  return iterations_to_threshold(log.loss, threshold, window);
}

namespace {

// One training step's model-specific part: build the loss on `g`.
class Task {
 public:
  virtual ~Task() = default;
  virtual Tensor loss(Graph& g, SeededRng& batch_rng) = 0;
  virtual std::vector<Parameter*> parameters() = 0;
  virtual std::vector<WrappedBlock*> blocks() = 0;
  virtual void set_training(bool training) = 0;
  virtual std::uint64_t data_hash() const = 0;
};

class ClassificationTask : public Task {
 public:
  ClassificationTask(const TrainConfig& c, SeededRng& init_rng, SeededRng& data_rng)
      : batch_(c.batch) {
    const DataConfig& d = c.data;
    data_ = d.kind == DatasetKind::Blobs
                ? make_blobs(d.samples, d.classes, d.separation, d.noise, data_rng)
                : make_spirals(d.samples, d.classes, d.turns, d.noise, data_rng);
    if (c.model.input_dim != data_.inputs.cols()) {
      throw ConfigError("model input_dim " + std::to_string(c.model.input_dim) +
                        " does not match dataset features " + std::to_string(data_.inputs.cols()));
    }
    if (c.model.classes != data_.classes) {
      throw ConfigError("model classes do not match dataset classes");
    }
    if (batch_ < 1) throw ConfigError("batch must be >= 1");
    net_ = std::make_unique<FcNet>(c.model, init_rng);
  }

  Tensor loss(Graph& g, SeededRng& batch_rng) override {
    std::vector<Index> rows(static_cast<std::size_t>(batch_));
    for (auto& r : rows) r = static_cast<Index>(batch_rng.uniform_index(data_.labels.size()));
    const Dataset b = select_rows(data_, rows);
    Tensor x = g.constant(Tensor::from_matrix(b.inputs));
    return cross_entropy(net_->forward(x), b.labels);
  }
  std::vector<Parameter*> parameters() override { return net_->parameters(); }
  std::vector<WrappedBlock*> blocks() override { return net_->stack().blocks(); }
  void set_training(bool training) override { net_->set_training(training); }
  std::uint64_t data_hash() const override { return dataset_hash(data_); }

 private:
  Index batch_;
  Dataset data_;
  std::unique_ptr<FcNet> net_;
};

class LanguageTask : public Task {
 public:
  LanguageTask(const TrainConfig& c, SeededRng& init_rng, SeededRng& dropout_rng)
      : batch_(c.batch),
        corpus_(Corpus::load(c.data.corpus.empty() ? default_corpus_path() : c.data.corpus)) {
    if (batch_ < 1) throw ConfigError("batch must be >= 1");
    ModelConfig m = c.model;
    m.vocab = corpus_.vocab_size();
    lm_ = std::make_unique<TransformerLM>(m, init_rng, &dropout_rng);
  }

  Tensor loss(Graph& g, SeededRng& batch_rng) override {
    std::vector<int> in, out;
    Tensor total;
    for (Index b = 0; b < batch_; ++b) {
      corpus_.sample(lm_->config().context, batch_rng, in, out);
      Tensor l = cross_entropy(lm_->forward(in, &g), out);
      total = b == 0 ? l : add(total, l);
    }
    return scale(total, 1.0 / static_cast<double>(batch_));
  }
  std::vector<Parameter*> parameters() override { return lm_->parameters(); }
  std::vector<WrappedBlock*> blocks() override { return lm_->stack().blocks(); }
  void set_training(bool training) override { lm_->set_training(training); }
  std::uint64_t data_hash() const override { return corpus_.hash(); }

 private:
  Index batch_;
  Corpus corpus_;
  std::unique_ptr<TransformerLM> lm_;
};

std::vector<double> alpha_row(const std::vector<WrappedBlock*>& blocks) {
  if (blocks.empty() || !has_residual_weight(blocks.front()->variant().kind)) return {};
  return residual_weights(blocks);
}

}  // namespace

RunLog train(const TrainConfig& config) {
  if (config.iterations < 0) throw ConfigError("iterations must be >= 0");
  const Schedule schedule = effective_schedule(config);
  validate(schedule);
  const long epoch_len = effective_epoch_iterations(config);

  SeededRng root(config.seed);
  SeededRng init_rng = root.split();
  SeededRng data_rng = root.split();
  SeededRng batch_rng = root.split();
  SeededRng dropout_rng = root.split();

  std::unique_ptr<Task> task;
  if (config.model.kind == ModelKind::Fc) {
    task = std::make_unique<ClassificationTask>(config, init_rng, data_rng);
  } else {
    task = std::make_unique<LanguageTask>(config, init_rng, dropout_rng);
  }
  task->set_training(true);
  std::vector<Parameter*> params = task->parameters();
  Optimizer opt(config.optimizer, params);

  RunLog log;
  log.config = to_key_values(config);
  log.alpha.push_back(alpha_row(task->blocks()));

  const bool by_epoch = std::holds_alternative<sched::StepDown>(schedule);
  const double total = by_epoch ? static_cast<double>(config.iterations / epoch_len)
                                : static_cast<double>(config.iterations);
  for (long it = 0; it < config.iterations; ++it) {
    const double t = by_epoch ? static_cast<double>(it / epoch_len) : static_cast<double>(it + 1);
    const ScheduleValue sv = lr_schedule(schedule, std::min(t, total), total);

    Graph g;
    opt.zero_grad();
    Tensor loss = task->loss(g, batch_rng);
    const double value = loss.item();
    log.loss.push_back(value);
    log.lr.push_back(sv.lr);
    if (!std::isfinite(value) || value > kDivergedLoss) {
      log.diverged = true;
      break;
    }
    g.backward(loss);
    if (!opt.step(sv.lr, sv.momentum)) {
      log.diverged = true;
      break;
    }
    if ((it + 1) % epoch_len == 0) log.alpha.push_back(alpha_row(task->blocks()));
  }

  const std::size_t n = log.loss.size();
  double tail = 0.0;
  const std::size_t k = std::min<std::size_t>(n, kThresholdWindow);
  for (std::size_t i = n - k; i < n; ++i) tail += log.loss[i];
  const double final_loss = k ? tail / static_cast<double>(k) : std::nan("");
  const auto hit = n ? iterations_to_threshold(log, config.threshold) : std::nullopt;
  log.metrics = {
      {"final_loss", final_loss},
      {"iterations_to_threshold", hit ? static_cast<double>(*hit) : -1.0},
      {"iterations_run", static_cast<double>(n)},
      {"data_hash", static_cast<double>(task->data_hash() >> 11)},
  };
  if (config.model.kind == ModelKind::Transformer) {
    log.metrics.emplace_back("bits_per_char", final_loss / std::numbers::ln2);
  }
  return log;
}

}  // namespace rezero
