#include "refl/config.hpp"

#include <charconv>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace refl {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  std::size_t e = s.find_last_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, e - b + 1);
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || ptr != value.data() + value.size())
    throw std::invalid_argument("invalid value for " + key + ": '" + value + "'");
  return v;
}

double parse_f64(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("invalid value for " + key + ": '" + value + "'");
  }
}

std::string format_f64(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void RunConfig::validate() const {
  model.validate();
  if (mode != "basic" && mode != "semi")
    throw std::invalid_argument("invalid value for mode: must be basic or semi");
  if (metric != "csls" && metric != "cosine")
    throw std::invalid_argument("invalid value for metric: must be csls or cosine");
  if (!(train_ratio > 0.0 && train_ratio < 1.0))
    throw std::invalid_argument("invalid value for train-ratio: must be in (0, 1)");
  if (ss_m < 2) throw std::invalid_argument("invalid value for ss-m: must be >= 2");
}

std::string RunConfig::to_text() const {
  std::ostringstream out;
  out << "data = " << data_dir << '\n';
  out << "out = " << out_dir << '\n';
  out << "checkpoint = " << checkpoint_path << '\n';
  out << "dim = " << model.dim << '\n';
  out << "layers = " << model.layers << '\n';
  out << "margin = " << format_f64(model.margin) << '\n';
  out << "dropout = " << format_f64(model.dropout) << '\n';
  out << "lr = " << format_f64(model.learning_rate) << '\n';
  out << "epochs = " << model.epochs << '\n';
  out << "neg-k = " << model.neg_k << '\n';
  out << "neg-refresh = " << model.neg_refresh_epochs << '\n';
  out << "mode = " << mode << '\n';
  out << "metric = " << metric << '\n';
  out << "seed = " << model.rng_seed << '\n';
  out << "train-ratio = " << format_f64(train_ratio) << '\n';
  out << "ss-m = " << ss_m << '\n';
  out << "apart-epochs = " << apart_epochs << '\n';
  return out.str();
}

void RunConfig::set_key(const std::string& key, const std::string& value) {
  if (key == "data") data_dir = value;
  else if (key == "out") out_dir = value;
  else if (key == "checkpoint") checkpoint_path = value;
  else if (key == "dim") model.dim = parse_u64(key, value);
  else if (key == "layers") model.layers = parse_u64(key, value);
  else if (key == "margin") model.margin = parse_f64(key, value);
  else if (key == "dropout") model.dropout = parse_f64(key, value);
  else if (key == "lr") model.learning_rate = parse_f64(key, value);
  else if (key == "epochs") model.epochs = parse_u64(key, value);
  else if (key == "neg-k") model.neg_k = parse_u64(key, value);
  else if (key == "neg-refresh") model.neg_refresh_epochs = parse_u64(key, value);
  else if (key == "mode") mode = value;
  else if (key == "metric") metric = value;
  else if (key == "seed") model.rng_seed = parse_u64(key, value);
  else if (key == "train-ratio") train_ratio = parse_f64(key, value);
  else if (key == "ss-m") ss_m = parse_u64(key, value);
  else if (key == "apart-epochs") apart_epochs = parse_u64(key, value);
  else throw std::invalid_argument("unknown config key '" + key + "'");
}

RunConfig RunConfig::from_text(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const std::size_t eq = stripped.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": expected 'key = value'");
    cfg.set_key(trim(stripped.substr(0, eq)), trim(stripped.substr(eq + 1)));
  }
  return cfg;
}

}  // namespace refl
