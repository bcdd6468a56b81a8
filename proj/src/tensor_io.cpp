#include "rezero/tensor_io.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace rezero {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_tensor(std::ostream& os, const Tensor& t) {
  os << "shape:";
  for (Index e : t.shape()) os << ' ' << e;
  os << '\n';
  const Index row = t.rank() >= 2 ? t.shape().back() : t.size();
  for (Index i = 0; i < t.size(); ++i) {
    os << format_double(t[i]) << ((i + 1) % row == 0 ? '\n' : ' ');
  }
}

Tensor read_tensor(std::istream& is) {
  std::string line;
  while (std::getline(is, line) && line.find_first_not_of(" \t\r") == std::string::npos) {
  }
  if (line.rfind("shape:", 0) != 0) throw IoError("tensor dump must start with 'shape:'");
  std::istringstream header(line.substr(6));
  Shape shape;
  Index e;
  while (header >> e) shape.push_back(e);
  check_shape(shape);
  Vector v(shape_size(shape));
  for (Index i = 0; i < v.size(); ++i) {
    std::string tok;
    if (!(is >> tok)) throw IoError("tensor dump truncated");
    // strtod rather than stod: subnormals set ERANGE but parse exactly
    char* end = nullptr;
    v[i] = std::strtod(tok.c_str(), &end);
    if (end != tok.c_str() + tok.size()) throw IoError("bad value in tensor dump: " + tok);
  }
  is.ignore(std::numeric_limits<std::streamsize>::max(), '\n');
  return Tensor(std::move(shape), std::move(v));
}

void write_checkpoint(const std::string& path, const std::vector<Parameter*>& params) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path + " for writing");
  for (const Parameter* p : params) {
    os << "[param " << p->name() << "]\n";
    write_tensor(os, p->value());
  }
  if (!os) throw IoError("failed writing " + path);
}

void read_checkpoint(const std::string& path, const std::vector<Parameter*>& params) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path);
  std::map<std::string, Tensor> sections;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line.rfind("[param ", 0) != 0 || line.back() != ']') {
      throw IoError("expected '[param <name>]' header, got: " + line);
    }
    sections[line.substr(7, line.size() - 8)] = read_tensor(is);
  }
  for (Parameter* p : params) {
    auto it = sections.find(p->name());
    if (it == sections.end()) throw IoError("checkpoint has no section for " + p->name());
    p->set_value(it->second);
  }
}

}  // namespace rezero
