#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>

#include "rezero/config.hpp"
#include "rezero/data.hpp"
#include "rezero/error.hpp"

using namespace rezero;
namespace fs = std::filesystem;

TEST_CASE("blobs") {
  SeededRng rng(80);
  const Dataset d = make_blobs(400, 4, 3.0, 0.1, rng);
  REQUIRE(d.inputs.rows() == 400);
  REQUIRE(d.inputs.cols() == 2);
  CHECK(d.classes == 4);
  std::vector<int> count(4, 0);
  for (int y : d.labels) {
    REQUIRE(y >= 0);
    REQUIRE(y < 4);
    ++count[static_cast<std::size_t>(y)];
  }
  CHECK(*std::min_element(count.begin(), count.end()) == 100);
  // with little noise every point sits near radius 3
  const Eigen::VectorXd r = d.inputs.rowwise().norm();
  CHECK(r.minCoeff() > 2.4);
  CHECK(r.maxCoeff() < 3.6);
}

TEST_CASE("spirals") {
  SeededRng rng(81);
  const Dataset d = make_spirals(300, 3, 1.5, 0.0, rng);
  REQUIRE(d.inputs.rows() == 300);
  CHECK(std::set<int>(d.labels.begin(), d.labels.end()).size() == 3);
  CHECK(d.inputs.allFinite());
}

TEST_CASE("datasets are deterministic and hashed") {
  SeededRng a(5), b(5), c(6);
  const Dataset x = make_blobs(64, 2, 3.0, 0.5, a);
  const Dataset y = make_blobs(64, 2, 3.0, 0.5, b);
  const Dataset z = make_blobs(64, 2, 3.0, 0.5, c);
  CHECK(x.inputs == y.inputs);
  CHECK(dataset_hash(x) == dataset_hash(y));
  CHECK(dataset_hash(x) != dataset_hash(z));

  const Dataset sub = select_rows(x, {3, 0, 3});
  CHECK(sub.inputs.rows() == 3);
  CHECK(sub.inputs.row(1) == x.inputs.row(0));
  CHECK(sub.labels[2] == x.labels[3]);
  CHECK(parse_dataset("spirals") == DatasetKind::Spirals);
  CHECK(to_string(DatasetKind::Blobs) == "blobs");
  CHECK_THROWS_AS(parse_dataset("cifar10"), ConfigError);
  SeededRng r(1);
  CHECK_THROWS_AS(make_blobs(10, 1, 3.0, 0.1, r), ConfigError);
}

TEST_CASE("corpus") {
  Corpus c("abcab\n");
  CHECK(c.vocab_size() == 4);
  CHECK(c.encode('\n') == 0);
  CHECK(c.encode('a') == 1);
  CHECK(c.decode(3) == 'c');
  CHECK(c.tokens() == std::vector<int>{1, 2, 3, 1, 2, 0});
  CHECK_THROWS_AS(c.encode('z'), DomainError);

  SeededRng rng(82);
  std::vector<int> in, tgt;
  c.sample(3, rng, in, tgt);
  REQUIRE(in.size() == 3);
  REQUIRE(tgt.size() == 3);
  CHECK(std::equal(in.begin() + 1, in.end(), tgt.begin()));

  const Corpus bundled = Corpus::load(default_corpus_path());
  CHECK(bundled.text().size() > 50000);
  CHECK(bundled.vocab_size() < 128);
  CHECK(bundled.hash() == Corpus::load(default_corpus_path()).hash());
  CHECK_THROWS_AS(Corpus::load("/nonexistent/corpus.txt"), IoError);
}

TEST_CASE("key value parsing") {
  const KeyValues kv = parse_key_values("# comment\n depth = 12\n\nvariant=ReZero  \nlr = 0.5\n");
  REQUIRE(kv.size() == 3);
  CHECK(kv[0] == std::pair<std::string, std::string>{"depth", "12"});
  CHECK(kv[1].second == "ReZero");
  CHECK_THROWS_AS(parse_key_values("depth 12\n"), ConfigError);

  TrainConfig c;
  apply_settings(c, kv);
  CHECK(c.model.depth == 12);
  CHECK(c.model.variant.kind == VariantKind::ReZero);
  CHECK(c.lr == 0.5);
  CHECK_THROWS_AS(apply_setting(c, "colour", "blue"), ConfigError);
  CHECK_THROWS_AS(apply_setting(c, "depth", "twelve"), ConfigError);
  CHECK_THROWS_AS(apply_setting(c, "depth", "12x"), ConfigError);
  CHECK_THROWS_AS(apply_setting(c, "causal", "maybe"), ConfigError);

  apply_setting(c, "classes", "5");
  CHECK(c.data.classes == 5);
  CHECK(c.model.classes == 5);
  apply_setting(c, "schedule", "one_cycle");
  CHECK(std::holds_alternative<sched::OneCycle>(effective_schedule(c)));
  apply_setting(c, "schedule", "auto");
  apply_setting(c, "warmup", "100");
  CHECK(std::holds_alternative<sched::LinearWarmup>(effective_schedule(c)));
  apply_setting(c, "residual_lr", "0.1");
  CHECK(*c.optimizer.residual_lr == 0.1);
  apply_setting(c, "residual_lr", "off");
  CHECK_FALSE(c.optimizer.residual_lr.has_value());
}

TEST_CASE("to_key_values reproduces the config") {
  TrainConfig c;
  apply_settings(c, parse_key_values(
                        "model = transformer\ndepth = 3\nwidth = 32\nvariant = PostNorm\n"
                        "alpha0 = 0.25\ninit = xavier_uniform\nsharing = per_block\n"
                        "dataset = blobs\nnoise = 0.3\ncorpus = /tmp/x.txt\noptimizer = sgd\n"
                        "momentum = 0.9\nresidual_lr = 0.1\nschedule = step_down:0.1:10,20:10\n"
                        "iterations = 77\nseed = 123456789012\nthreshold = 0.05\n"));
  TrainConfig back;
  apply_settings(back, to_key_values(c));
  CHECK(to_key_values(back) == to_key_values(c));
  CHECK(back.seed == 123456789012ULL);
  CHECK(back.model.kind == ModelKind::Transformer);
  CHECK(back.model.init == InitScheme::XavierUniform);

  TrainConfig plain;
  TrainConfig plain_back;
  apply_settings(plain_back, to_key_values(plain));
  CHECK(to_key_values(plain_back) == to_key_values(plain));
}

TEST_CASE("config files and seed precedence") {
  const fs::path dir = fs::temp_directory_path() / "rezero_test_cfg";
  fs::create_directories(dir);
  const std::string path = (dir / "run.cfg").string();
  std::ofstream(path) << "seed = 7\ndepth = 9\n";
  TrainConfig c;
  apply_settings(c, read_key_values(path));
  CHECK(c.seed == 7);
  apply_setting(c, "seed", "8");  // flags come after the file
  CHECK(c.seed == 8);

  ::unsetenv(kSeedEnv);
  CHECK_FALSE(seed_from_env().has_value());
  apply_seed_env(c);
  CHECK(c.seed == 8);
  ::setenv(kSeedEnv, "99", 1);
  apply_seed_env(c);
  CHECK(c.seed == 99);
  ::setenv(kSeedEnv, "nope", 1);
  CHECK_THROWS_AS(apply_seed_env(c), ConfigError);
  ::unsetenv(kSeedEnv);

  CHECK_THROWS_AS(read_key_values((dir / "missing.cfg").string()), IoError);
  fs::remove_all(dir);
}

TEST_CASE("epoch length") {
  TrainConfig c;
  c.data.samples = 512;
  c.batch = 64;
  CHECK(effective_epoch_iterations(c) == 8);
  c.epoch_iterations = 3;
  CHECK(effective_epoch_iterations(c) == 3);
  c.epoch_iterations = 0;
  c.model.kind = ModelKind::Transformer;
  CHECK(effective_epoch_iterations(c) == 50);
}
