#ifndef QLOCP_CONFIG_HPP
#define QLOCP_CONFIG_HPP

#include <cctype>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "qlocp/coeff.hpp"
#include "qlocp/harness.hpp"

namespace qlocp {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Flat key/value configuration, TOML-compatible for the grammar subset we
/// use: numbers, strings, arrays of numbers, and one-level inline tables.
class Config {
 public:
  struct Value {
    std::variant<double, std::string, std::vector<double>,
                 std::map<std::string, std::variant<double, std::string, std::vector<double>>>>
        v;
  };

  static Config parse_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("config: cannot open '" + path + "'");
    std::stringstream ss;
    ss << is.rdbuf();
    return parse(ss.str());
  }

  static Config parse(const std::string& text) {
    Config cfg;
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const std::string trimmed = trim(line);
      if (trimmed.empty()) continue;
      const auto eq = trimmed.find('=');
      if (eq == std::string::npos)
        throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
      const std::string key = trim(trimmed.substr(0, eq));
      const std::string val = trim(trimmed.substr(eq + 1));
      cfg.values_[key] = parse_value(val, lineno);
    }
    return cfg;
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  double number(const std::string& key) const {
    return std::get<double>(find(key).v);
  }
  double number_or(const std::string& key, double fallback) const {
    return has(key) ? number(key) : fallback;
  }
  std::string string(const std::string& key) const {
    return std::get<std::string>(find(key).v);
  }
  std::string string_or(const std::string& key, const std::string& fallback) const {
    return has(key) ? string(key) : fallback;
  }
  std::vector<double> array(const std::string& key) const {
    return std::get<std::vector<double>>(find(key).v);
  }
  std::map<std::string, std::variant<double, std::string, std::vector<double>>> table(
      const std::string& key) const {
    return std::get<3>(find(key).v);
  }

 private:
  const Value& find(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("config: missing key '" + key + "'");
    return it->second;
  }

  static std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
  }

  static std::variant<double, std::string, std::vector<double>> parse_scalar(
      const std::string& s, int lineno) {
    if (!s.empty() && s.front() == '"') {
      if (s.size() < 2 || s.back() != '"')
        throw ConfigError("config line " + std::to_string(lineno) + ": unterminated string");
      return s.substr(1, s.size() - 2);
    }
    if (!s.empty() && s.front() == '[') {
      if (s.back() != ']')
        throw ConfigError("config line " + std::to_string(lineno) + ": unterminated array");
      std::vector<double> arr;
      std::stringstream es(s.substr(1, s.size() - 2));
      std::string item;
      while (std::getline(es, item, ',')) {
        const std::string it = trim(item);
        if (it.empty()) continue;
        arr.push_back(std::stod(it));
      }
      return arr;
    }
    try {
      std::size_t pos = 0;
      const double d = std::stod(s, &pos);
      if (pos != s.size()) throw std::invalid_argument("");
      return d;
    } catch (...) {
      throw ConfigError("config line " + std::to_string(lineno) + ": bad value '" + s + "'");
    }
  }

  static Value parse_value(const std::string& s, int lineno) {
    if (!s.empty() && s.front() == '{') {
      if (s.back() != '}')
        throw ConfigError("config line " + std::to_string(lineno) + ": unterminated table");
      std::map<std::string, std::variant<double, std::string, std::vector<double>>> tbl;
      // Split on commas not inside brackets or quotes.
      const std::string inner = s.substr(1, s.size() - 2);
      std::vector<std::string> parts;
      int depth = 0;
      bool quoted = false;
      std::string cur;
      for (char c : inner) {
        if (c == '"') quoted = !quoted;
        if (!quoted && (c == '[' || c == '{')) ++depth;
        if (!quoted && (c == ']' || c == '}')) --depth;
        if (c == ',' && depth == 0 && !quoted) {
          parts.push_back(cur);
          cur.clear();
        } else {
          cur.push_back(c);
        }
      }
      if (!trim(cur).empty()) parts.push_back(cur);
      for (const auto& p : parts) {
        const auto eq = p.find('=');
        if (eq == std::string::npos)
          throw ConfigError("config line " + std::to_string(lineno) + ": bad table entry");
        tbl[trim(p.substr(0, eq))] = parse_scalar(trim(p.substr(eq + 1)), lineno);
      }
      return Value{tbl};
    }
    Value v;
    std::visit([&v](auto&& x) { v.v = std::move(x); }, parse_scalar(s, lineno));
    return v;
  }

  std::map<std::string, Value> values_;
};

/// Builds a PC1 coefficient from its config table:
///   a = { kind = "max", shift = 1.0 }
///   a = { kind = "pc1", lo = <poly coeffs>, hi = <poly coeffs>, kink = t }
inline PC1Coeff coeff_from_config(
    const std::map<std::string, std::variant<double, std::string, std::vector<double>>>& tbl) {
  const auto kind_it = tbl.find("kind");
  if (kind_it == tbl.end()) throw ConfigError("coefficient table: missing 'kind'");
  const std::string kind = std::get<std::string>(kind_it->second);
  if (kind == "max") {
    const double shift = std::get<double>(tbl.at("shift"));
    return PC1Coeff::max_type(shift);
  }
  if (kind == "pc1") {
    const auto lo = std::get<std::vector<double>>(tbl.at("lo"));
    const auto hi = std::get<std::vector<double>>(tbl.at("hi"));
    const double kink = std::get<double>(tbl.at("kink"));
    return PC1Coeff(CoeffBranch::poly(lo), CoeffBranch::poly(hi), kink);
  }
  throw ConfigError("coefficient table: unknown kind '" + kind + "'");
}

inline StudyConfig study_config_from(const Config& cfg) {
  StudyConfig sc;
  sc.problem = cfg.string_or("problem", "example1");
  if (cfg.has("m")) {
    for (double m : cfg.array("m")) sc.ms.push_back(static_cast<int>(m));
  } else if (cfg.has("n")) {
    for (double n : cfg.array("n")) sc.ms.push_back(100 * static_cast<int>(n));
  } else {
    sc.ms = {100, 200, 300, 400, 500};
  }
  sc.rtol = cfg.number_or("rtol", 1e-10);
  sc.max_iter = static_cast<int>(cfg.number_or("max_iter", 30));
  sc.parallelism = static_cast<int>(cfg.number_or("parallelism", 1));
  sc.iterative_solver = cfg.number_or("iterative_solver", 0.0) != 0.0;
  sc.out_csv = cfg.string_or("out", "");
  return sc;
}

}  // namespace qlocp

#endif
