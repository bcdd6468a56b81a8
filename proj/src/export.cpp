#include "rezero/export.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "rezero/error.hpp"
#include "rezero/tensor_io.hpp"

namespace rezero {

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  return in;
}

void finish(std::ofstream& out, const std::string& path) {
  out.flush();
  if (!out) throw IoError("write failed for " + path);
}

std::string json_number(double v) { return std::isfinite(v) ? format_double(v) : "null"; }

template <typename Range>
std::string json_array(const Range& values) {
  std::string s = "[";
  bool first = true;
  for (const auto& v : values) {
    if (!first) s += ", ";
    first = false;
    if constexpr (std::is_floating_point_v<std::decay_t<decltype(v)>>) {
      s += json_number(v);
    } else {
      s += std::to_string(v);
    }
  }
  return s + "]";
}

std::string json_string(const std::string& s) { return nlohmann::json(s).dump(); }

double json_double(const nlohmann::json& j) {
  return j.is_null() ? std::nan("") : j.get<double>();
}

nlohmann::json parse_json(const std::string& path) {
  std::ifstream in = open_in(path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed document " + path + ": " + e.what());
  }
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(line);
  while (std::getline(in, cur, ',')) out.push_back(cur);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& s, const std::string& path) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::logic_error&) {
  }
  throw IoError("bad number '" + s + "' in " + path);
}

// Data rows of a CSV file with the expected header.
std::vector<std::vector<double>> read_csv(const std::string& path, const std::string& header_prefix) {
  std::ifstream in = open_in(path);
  std::string line;
  if (!std::getline(in, line) || line.rfind(header_prefix, 0) != 0) {
    throw IoError("missing '" + header_prefix + "' header in " + path);
  }
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    for (const auto& cell : split_csv(line)) row.push_back(parse_number(cell, path));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

void write_runlog(const std::string& path, const RunLog& log) {
  {
    std::ofstream out = open_out(path);
    out << "iteration,loss,lr\n";
    for (std::size_t i = 0; i < log.loss.size(); ++i) {
      out << i << ',' << format_double(log.loss[i]) << ',' << format_double(log.lr.at(i)) << '\n';
    }
    finish(out, path);
  }
  write_alpha_matrix(path + ".alpha.csv", log.alpha);
  const std::string meta = path + ".meta";
  std::ofstream out = open_out(meta);
  for (const auto& [k, v] : log.config) out << k << " = " << v << '\n';
  for (const auto& [k, v] : log.metrics) out << "metric." << k << " = " << format_double(v) << '\n';
  out << "diverged = " << (log.diverged ? "true" : "false") << '\n';
  finish(out, meta);
}

RunLog read_runlog(const std::string& path) {
  RunLog log;
  for (const auto& row : read_csv(path, "iteration,loss,lr")) {
    if (row.size() != 3) throw IoError("runlog row needs 3 fields in " + path);
    log.loss.push_back(row[1]);
    log.lr.push_back(row[2]);
  }
  log.alpha = read_alpha_matrix(path + ".alpha.csv");
  for (const auto& [k, v] : read_key_values(path + ".meta")) {
    if (k.rfind("metric.", 0) == 0) {
      log.metrics.emplace_back(k.substr(7), parse_number(v, path + ".meta"));
    } else if (k == "diverged") {
      log.diverged = v == "true";
    } else {
      log.config.emplace_back(k, v);
    }
  }
  return log;
}

void write_alpha_matrix(const std::string& path, const std::vector<std::vector<double>>& alpha) {
  std::ofstream out = open_out(path);
  const std::size_t cols = alpha.empty() ? 0 : alpha.front().size();
  out << "epoch";
  for (std::size_t j = 0; j < cols; ++j) out << ",alpha_" << j;
  out << '\n';
  for (std::size_t e = 0; e < alpha.size(); ++e) {
    out << e;
    for (double v : alpha[e]) out << ',' << format_double(v);
    out << '\n';
  }
  finish(out, path);
}

std::vector<std::vector<double>> read_alpha_matrix(const std::string& path) {
  std::vector<std::vector<double>> out;
  for (auto& row : read_csv(path, "epoch")) {
    row.erase(row.begin());
    out.push_back(std::move(row));
  }
  return out;
}

void write_spectrum(const std::string& path, const SpectrumResult& s, const KeyValues& meta) {
  std::ofstream out = open_out(path);
  out << "{\n";
  if (!meta.empty()) {
    out << "  \"meta\": {";
    for (std::size_t i = 0; i < meta.size(); ++i) {
      out << (i ? ", " : "") << json_string(meta[i].first) << ": " << json_string(meta[i].second);
    }
    out << "},\n";
  }
  std::vector<double> sv(s.singular_values.data(), s.singular_values.data() + s.singular_values.size());
  out << "  \"singular_values\": " << json_array(sv) << ",\n";
  out << "  \"chi\": " << json_number(s.chi) << ",\n";
  out << "  \"vanishing_count\": " << s.vanishing_count << ",\n";
  out << "  \"threshold\": " << json_number(s.threshold) << ",\n";
  out << "  \"histogram\": {\n";
  out << "    \"edges\": " << json_array(s.histogram.edges) << ",\n";
  out << "    \"counts\": " << json_array(s.histogram.counts) << ",\n";
  out << "    \"underflow\": " << s.histogram.underflow << "\n";
  out << "  }\n}\n";
  finish(out, path);
}

SpectrumResult read_spectrum(const std::string& path) {
  const nlohmann::json j = parse_json(path);
  try {
    SpectrumResult s;
    const auto& sv = j.at("singular_values");
    s.singular_values.resize(static_cast<Index>(sv.size()));
    for (std::size_t i = 0; i < sv.size(); ++i) s.singular_values[static_cast<Index>(i)] = json_double(sv[i]);
    s.chi = json_double(j.at("chi"));
    s.vanishing_count = j.at("vanishing_count").get<long>();
    s.threshold = json_double(j.at("threshold"));
    s.log10_values = s.singular_values.array().max(kLogFloor).log10().matrix();
    const auto& h = j.at("histogram");
    for (const auto& e : h.at("edges")) s.histogram.edges.push_back(json_double(e));
    s.histogram.counts = h.at("counts").get<std::vector<long>>();
    s.histogram.underflow = h.at("underflow").get<long>();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed spectrum " + path + ": " + e.what());
  }
}

void write_grid(const std::string& path, const toy::ContourGrid<double>& grid) {
  std::ofstream out = open_out(path);
  const auto& m = grid.log_grad_norm;
  std::vector<double> values(m.data(), m.data() + m.size());
  out << "{\n";
  out << "  \"w_axis\": " << json_array(grid.w_axis) << ",\n";
  out << "  \"alpha_axis\": " << json_array(grid.alpha_axis) << ",\n";
  out << "  \"rows\": " << m.rows() << ",\n";
  out << "  \"cols\": " << m.cols() << ",\n";
  out << "  \"log_grad_norm\": " << json_array(values) << ",\n";
  out << "  \"floored\": " << grid.floored << ",\n";
  out << "  \"overflowed\": " << grid.overflowed << "\n";
  out << "}\n";
  finish(out, path);
}

toy::ContourGrid<double> read_grid(const std::string& path) {
  const nlohmann::json j = parse_json(path);
  try {
    toy::ContourGrid<double> g;
    for (const auto& v : j.at("w_axis")) g.w_axis.push_back(json_double(v));
    for (const auto& v : j.at("alpha_axis")) g.alpha_axis.push_back(json_double(v));
    const auto rows = j.at("rows").get<Index>();
    const auto cols = j.at("cols").get<Index>();
    const auto& vals = j.at("log_grad_norm");
    if (static_cast<Index>(vals.size()) != rows * cols) throw IoError("grid size mismatch in " + path);
    g.log_grad_norm.resize(rows, cols);
    for (Index i = 0; i < rows * cols; ++i) {
      g.log_grad_norm.data()[i] = json_double(vals[static_cast<std::size_t>(i)]);
    }
    g.floored = j.at("floored").get<long>();
    g.overflowed = j.at("overflowed").get<long>();
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed grid " + path + ": " + e.what());
  }
}

void write_trajectory(const std::string& path, const toy::Trajectory<double>& t) {
  std::ofstream out = open_out(path);
  out << "step,w,alpha,loss\n";
  for (const auto& s : t.steps) {
    out << s.step << ',' << format_double(s.w) << ',' << format_double(s.alpha) << ','
        << format_double(s.loss) << '\n';
  }
  finish(out, path);
}

toy::Trajectory<double> read_trajectory(const std::string& path) {
  toy::Trajectory<double> t;
  for (const auto& row : read_csv(path, "step,w,alpha,loss")) {
    if (row.size() != 4) throw IoError("trajectory row needs 4 fields in " + path);
    t.steps.push_back({static_cast<long>(row[0]), row[1], row[2], row[3]});
  }
  return t;
}

}  // namespace rezero
