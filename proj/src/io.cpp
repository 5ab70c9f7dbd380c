#include "sinkcpd/io.hpp"

#include "sinkcpd/error.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <system_error>

namespace sinkcpd::io {

using nlohmann::json;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

bool parse_double(const std::string& field, double& out) {
  const std::string t = trim(field);
  if (t.empty()) return false;
  if (t == "inf" || t == "+inf" || t == "Infinity") {
    out = std::numeric_limits<double>::infinity();
    return true;
  }
  if (t == "-inf" || t == "-Infinity") {
    out = -std::numeric_limits<double>::infinity();
    return true;
  }
  const char* first = t.data();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, t.data() + t.size(), out);
  return ec == std::errc() && ptr == t.data() + t.size();
}

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

json vec_to_json(const Vector& v) {
  json a = json::array();
  for (Index k = 0; k < v.size(); ++k) a.push_back(v(k));
  return a;
}

Vector json_to_vec(const json& a, Index expected, const char* name) {
  if (!a.is_array() || static_cast<Index>(a.size()) != expected)
    throw InputError(std::string("model file: '") + name + "' must be an array of " +
                     std::to_string(expected) + " numbers");
  Vector v(expected);
  for (Index k = 0; k < expected; ++k) v(k) = a.at(static_cast<std::size_t>(k)).get<double>();
  return v;
}

}  // namespace

std::string format_double(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  if (ec != std::errc()) throw InputError("format_double: conversion failed");
  return std::string(buf, ptr);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write '" + tmp.string() + "'");
    out << contents;
    out.flush();
    if (!out) throw InputError("short write to '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

Matrix parse_sequence_csv(const std::string& text, const std::string& source) {
  std::vector<std::vector<double>> rows;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto fields = split_commas(t);
    std::vector<double> row(fields.size());
    for (std::size_t c = 0; c < fields.size(); ++c) {
      if (!parse_double(fields[c], row[c]) || !std::isfinite(row[c]))
        throw InputError(source + ": line " + std::to_string(line_no) + ", column " +
                         std::to_string(c + 1) + ": not a finite number: '" +
                         trim(fields[c]) + "'");
    }
    if (rows.empty()) {
      width = row.size();
    } else if (row.size() != width) {
      throw InputError(source + ": line " + std::to_string(line_no) + " has " +
                       std::to_string(row.size()) + " columns, expected " +
                       std::to_string(width));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw InputError(source + ": no data rows");
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(width));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < width; ++j)
      m(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
  return m;
}

Matrix read_sequence_csv(const std::filesystem::path& path) {
  return parse_sequence_csv(read_file(path), path.string());
}

std::string format_sequence_csv(const Matrix& data) {
  std::string out;
  out.reserve(static_cast<std::size_t>(data.size()) * 20);
  for (Index i = 0; i < data.rows(); ++i) {
    for (Index j = 0; j < data.cols(); ++j) {
      if (j > 0) out.push_back(',');
      out += format_double(data(i, j));
    }
    out.push_back('\n');
  }
  return out;
}

void write_sequence_csv(const std::filesystem::path& path, const Matrix& data) {
  write_file_atomic(path, format_sequence_csv(data));
}

std::vector<Index> parse_labels(const std::string& text, Index sequence_length,
                                const std::string& source) {
  std::vector<Index> labels;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size() || v < 0)
      throw InputError(source + ": line " + std::to_string(line_no) +
                       ": expected a nonnegative integer, got '" + t + "'");
    if (!labels.empty() && v <= labels.back())
      throw InputError(source + ": line " + std::to_string(line_no) +
                       ": labels must be strictly increasing");
    if (sequence_length >= 0 && v >= sequence_length)
      throw InputError(source + ": line " + std::to_string(line_no) + ": label " +
                       std::to_string(v) + " outside sequence of length " +
                       std::to_string(sequence_length));
    labels.push_back(static_cast<Index>(v));
  }
  return labels;
}

std::vector<Index> read_labels(const std::filesystem::path& path, Index sequence_length) {
  return parse_labels(read_file(path), sequence_length, path.string());
}

std::string format_labels(const std::vector<Index>& labels) {
  std::string out;
  for (Index v : labels) out += std::to_string(v) + "\n";
  return out;
}

void write_labels(const std::filesystem::path& path, const std::vector<Index>& labels) {
  write_file_atomic(path, format_labels(labels));
}

std::string format_scores_csv(const ChangeScoreSeries& scores) {
  std::string out = "index,score,valid\n";
  for (Index n = 0; n < scores.length(); ++n) {
    const auto k = static_cast<std::size_t>(n);
    out += std::to_string(n) + "," + format_double(scores.scores[k]) + "," +
           (scores.valid[k] ? "1" : "0") + "\n";
  }
  return out;
}

void write_scores_csv(const std::filesystem::path& path, const ChangeScoreSeries& scores) {
  write_file_atomic(path, format_scores_csv(scores));
}

ChangeScoreSeries parse_scores_csv(const std::string& text, const std::string& source) {
  ChangeScoreSeries s;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  s.first = -1;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t.rfind("index", 0) == 0) continue;
    const auto fields = split_commas(t);
    double idx = 0, score = 0, valid = 0;
    if (fields.size() != 3 || !parse_double(fields[0], idx) || !parse_double(fields[1], score) ||
        !parse_double(fields[2], valid))
      throw InputError(source + ": line " + std::to_string(line_no) +
                       ": expected 'index,score,valid'");
    if (static_cast<Index>(idx) != s.length())
      throw InputError(source + ": line " + std::to_string(line_no) + ": indices must be 0,1,2,...");
    const bool ok = valid != 0.0;
    if (ok && !std::isfinite(score))
      throw InputError(source + ": line " + std::to_string(line_no) + ": non-finite valid score");
    s.scores.push_back(score);
    s.valid.push_back(ok);
    s.interpolated.push_back(false);
    if (ok) {
      if (s.first < 0) s.first = s.length() - 1;
      s.last = s.length() - 1;
    }
  }
  if (s.first < 0) s.first = 0;
  return s;
}

ChangeScoreSeries read_scores_csv(const std::filesystem::path& path) {
  return parse_scores_csv(read_file(path), path.string());
}

std::string model_to_json(const TrainedModel& model) {
  const Matrix& L = model.metric.L;
  json j;
  j["format_version"] = kModelFormatVersion;
  j["r"] = L.rows();
  j["d"] = L.cols();
  j["gamma"] = model.metric.gamma;
  json flat = json::array();
  for (Index r = 0; r < L.rows(); ++r)
    for (Index c = 0; c < L.cols(); ++c) flat.push_back(L(r, c));
  j["L"] = flat;
  j["feature_mean"] = vec_to_json(model.standardizer.mean);
  j["feature_scale"] = vec_to_json(model.standardizer.scale);
  const TrainConfig& c = model.config;
  j["config"] = {
      {"projection_dim", c.projection_dim},
      {"gamma", c.gamma},
      {"learn_rate", c.learn_rate},
      {"margin", c.margin},
      {"l1_weight", c.l1_weight},
      {"iterations", c.iterations},
      {"window", c.window},
      {"buffer", c.buffer},
      {"validation_fraction", c.validation_fraction},
      {"seed", c.seed},
      {"grad_mode", to_string(c.grad_mode)},
      {"loss_reduction", to_string(c.loss_reduction)},
      {"init", to_string(c.init)},
      {"standardize", c.standardize},
      {"solver_tol", c.solver.tol},
      {"solver_max_iter", c.solver.max_iter},
  };
  j["best_iteration"] = model.best_iteration;
  j["train_loss_history"] = model.train_loss_history;
  j["val_loss_history"] = model.val_loss_history;
  j["train_change_points"] = model.train_change_points;
  j["val_change_points"] = model.val_change_points;
  return j.dump(2) + "\n";
}

TrainedModel model_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw InputError(std::string("model file: invalid JSON: ") + e.what());
  }
  try {
    if (j.at("format_version").get<int>() != kModelFormatVersion)
      throw InputError("model file: unsupported format_version " +
                       std::to_string(j.at("format_version").get<int>()));
    const Index r = j.at("r").get<Index>();
    const Index d = j.at("d").get<Index>();
    if (r < 1 || d < 1) throw InputError("model file: r and d must be >= 1");
    TrainedModel m;
    m.metric.gamma = j.at("gamma").get<double>();
    const Vector flat = json_to_vec(j.at("L"), r * d, "L");
    m.metric.L.resize(r, d);
    for (Index a = 0; a < r; ++a)
      for (Index b = 0; b < d; ++b) m.metric.L(a, b) = flat(a * d + b);
    m.metric.validate();
    m.standardizer.mean = json_to_vec(j.at("feature_mean"), d, "feature_mean");
    m.standardizer.scale = json_to_vec(j.at("feature_scale"), d, "feature_scale");
    if ((m.standardizer.scale.array() <= 0.0).any())
      throw InputError("model file: feature_scale entries must be positive");
    if (j.contains("config")) {
      const json& c = j.at("config");
      TrainConfig& cfg = m.config;
      cfg.projection_dim = c.value("projection_dim", r);
      cfg.gamma = c.value("gamma", m.metric.gamma);
      cfg.learn_rate = c.value("learn_rate", cfg.learn_rate);
      cfg.margin = c.value("margin", cfg.margin);
      cfg.l1_weight = c.value("l1_weight", cfg.l1_weight);
      cfg.iterations = c.value("iterations", cfg.iterations);
      cfg.window = c.value("window", cfg.window);
      cfg.buffer = c.value("buffer", cfg.buffer);
      cfg.validation_fraction = c.value("validation_fraction", cfg.validation_fraction);
      cfg.seed = c.value("seed", cfg.seed);
      cfg.grad_mode = grad_mode_from_string(c.value("grad_mode", std::string("paper_cross_only")));
      cfg.init = init_scheme_from_string(c.value("init", std::string("auto")));
      cfg.loss_reduction =
          loss_reduction_from_string(c.value("loss_reduction", std::string("mean")));
      cfg.standardize = c.value("standardize", cfg.standardize);
      cfg.solver.tol = c.value("solver_tol", cfg.solver.tol);
      cfg.solver.max_iter = c.value("solver_max_iter", cfg.solver.max_iter);
    }
    m.best_iteration = j.value("best_iteration", 0);
    m.train_loss_history = j.value("train_loss_history", std::vector<double>{});
    m.val_loss_history = j.value("val_loss_history", std::vector<double>{});
    m.train_change_points = j.value("train_change_points", std::vector<Index>{});
    m.val_change_points = j.value("val_change_points", std::vector<Index>{});
    return m;
  } catch (const json::exception& e) {
    throw InputError(std::string("model file: ") + e.what());
  }
}

void write_model(const std::filesystem::path& path, const TrainedModel& model) {
  write_file_atomic(path, model_to_json(model));
}

TrainedModel read_model(const std::filesystem::path& path) {
  return model_from_json(read_file(path));
}

}  // namespace sinkcpd::io
