#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "helpers.hpp"
#include "rezero/error.hpp"
#include "rezero/nn.hpp"
#include "rezero/tensor_io.hpp"

using namespace rezero;
using testing::randn;

namespace fs = std::filesystem;

TEST_CASE("dump layout") {
  std::ostringstream os;
  RowMatrix m(2, 2);
  m << 1, 2.5, -3, 0.1;
  write_tensor(os, Tensor::from_matrix(m));
  std::istringstream is(os.str());
  std::string header;
  std::getline(is, header);
  CHECK(header == "shape: 2 2");
  double v;
  std::vector<double> vals;
  while (is >> v) vals.push_back(v);
  CHECK(vals == std::vector<double>{1, 2.5, -3, 0.1});
}

TEST_CASE("dump round trips bit for bit") {
  SeededRng rng(3);
  for (const Shape& s : {Shape{1}, Shape{7}, Shape{3, 5}, Shape{2, 3, 4}}) {
    Tensor t = randn(s, rng, 1e3);
    std::stringstream ss;
    write_tensor(ss, t);
    Tensor back = read_tensor(ss);
    CHECK(back.shape() == t.shape());
    CHECK(back.data() == t.data());
  }
  const double awkward[] = {0.1, 1.0 / 3.0, 1e-300, -5e-324, 1.7976931348623157e308};
  for (double v : awkward) {
    std::stringstream ss;
    write_tensor(ss, Tensor::scalar(v));
    CHECK(read_tensor(ss).item() == v);
  }
}

TEST_CASE("malformed dumps raise IoError") {
  std::istringstream no_header("1 2 3\n");
  CHECK_THROWS_AS(read_tensor(no_header), IoError);
  std::istringstream truncated("shape: 3\n1 2\n");
  CHECK_THROWS_AS(read_tensor(truncated), IoError);
  std::istringstream junk("shape: 2\n1 x\n");
  CHECK_THROWS_AS(read_tensor(junk), IoError);
}

TEST_CASE("checkpoint round trip by parameter name") {
  const fs::path dir = fs::temp_directory_path() / "rezero_test_ckpt";
  fs::create_directories(dir);
  const std::string path = (dir / "model.ckpt").string();

  SeededRng rng(9);
  Linear a("a", 3, 4);
  LayerNorm n("n", 4);
  init_weights(a, InitScheme::He, rng);
  n.gamma().set_value(randn({4}, rng));
  std::vector<Parameter*> src;
  a.collect(src);
  n.collect(src);
  write_checkpoint(path, src);

  Linear a2("a", 3, 4);
  LayerNorm n2("n", 4);
  std::vector<Parameter*> dst;
  n2.collect(dst);
  a2.collect(dst);
  read_checkpoint(path, dst);
  CHECK(a2.weight().value().data() == a.weight().value().data());
  CHECK(n2.gamma().value().data() == n.gamma().value().data());

  Linear other("missing", 3, 4);
  std::vector<Parameter*> absent;
  other.collect(absent);
  CHECK_THROWS_AS(read_checkpoint(path, absent), IoError);
  CHECK_THROWS_AS(read_checkpoint((dir / "nope.ckpt").string(), dst), IoError);

  std::ofstream((dir / "bad.ckpt").string()) << "garbage\n";
  CHECK_THROWS_AS(read_checkpoint((dir / "bad.ckpt").string(), dst), IoError);
  fs::remove_all(dir);
}
