#include "fracmc/config.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

namespace fracmc {
namespace toml {
namespace {

[[noreturn]] void fail(int line, const std::string& what) {
  throw InputError("config line " + std::to_string(line) + ": " + what);
}

class ValueParser {
 public:
  ValueParser(const std::string& s, int line) : s_(s), line_(line) {}

  Value parse_all() {
    Value v = parse_value();
    skip_ws();
    if (pos_ != s_.size()) fail(line_, "unexpected trailing text '" + s_.substr(pos_) + "'");
    return v;
  }

 private:
  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  Value parse_value() {
    skip_ws();
    if (pos_ >= s_.size()) fail(line_, "missing value");
    const char c = s_[pos_];
    if (c == '"') return {parse_string(), line_};
    if (c == '[') return parse_array();
    if (s_.compare(pos_, 4, "true") == 0) {
      pos_ += 4;
      return {true, line_};
    }
    if (s_.compare(pos_, 5, "false") == 0) {
      pos_ += 5;
      return {false, line_};
    }
    return parse_number();
  }

  std::string parse_string() {
    ++pos_;
    std::string out;
    while (pos_ < s_.size() && s_[pos_] != '"') {
      char c = s_[pos_++];
      if (c == '\\') {
        if (pos_ >= s_.size()) break;
        const char e = s_[pos_++];
        switch (e) {
          case 'n': c = '\n'; break;
          case 't': c = '\t'; break;
          case '"': c = '"'; break;
          case '\\': c = '\\'; break;
          default: fail(line_, std::string("unsupported escape \\") + e);
        }
      }
      out += c;
    }
    if (pos_ >= s_.size()) fail(line_, "unterminated string");
    ++pos_;
    return out;
  }

  Value parse_array() {
    ++pos_;
    Array items;
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == ']') {
      ++pos_;
      return {items, line_};
    }
    for (;;) {
      items.push_back(parse_value());
      skip_ws();
      if (pos_ >= s_.size()) fail(line_, "unterminated array");
      if (s_[pos_] == ',') {
        ++pos_;
        skip_ws();
        if (pos_ < s_.size() && s_[pos_] == ']') {
          ++pos_;
          break;
        }
        continue;
      }
      if (s_[pos_] == ']') {
        ++pos_;
        break;
      }
      fail(line_, "expected ',' or ']' in array");
    }
    return {items, line_};
  }

  Value parse_number() {
    std::size_t end = pos_;
    while (end < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[end])) || s_[end] == '.' ||
                               s_[end] == '-' || s_[end] == '+' || s_[end] == '_'))
      ++end;
    std::string tok = s_.substr(pos_, end - pos_);
    if (tok.empty()) fail(line_, "cannot parse value '" + s_.substr(pos_) + "'");
    std::string digits;
    for (char c : tok)
      if (c != '_') digits += c;
    const bool is_float = digits.find_first_of(".eE") != std::string::npos || digits == "inf" || digits == "nan";
    try {
      std::size_t used = 0;
      Value v;
      v.line = line_;
      if (is_float) v.data = std::stod(digits, &used);
      else v.data = static_cast<std::int64_t>(std::stoll(digits, &used));
      if (used != digits.size()) throw std::invalid_argument("");
      pos_ = end;
      return v;
    } catch (const std::exception&) {
      fail(line_, "cannot parse value '" + tok + "'");
    }
  }

  const std::string& s_;
  int line_;
  std::size_t pos_ = 0;
};

std::string strip_comment(const std::string& line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) in_string = !in_string;
    if (line[i] == '#' && !in_string) return line.substr(0, i);
  }
  return line;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool valid_key(const std::string& k) {
  if (k.empty()) return false;
  for (char c : k)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-') return false;
  return true;
}

}  // namespace

Document parse(const std::string& text) {
  Document doc;
  std::istringstream is(text);
  std::string raw;
  std::string section;
  doc[section];
  int line = 0;
  while (std::getline(is, raw)) {
    ++line;
    const std::string s = trim(strip_comment(raw));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') fail(line, "malformed section header");
      section = trim(s.substr(1, s.size() - 2));
      if (!valid_key(section)) fail(line, "invalid section name '" + section + "'");
      if (doc.count(section) && section.size()) fail(line, "duplicate section [" + section + "]");
      doc[section];
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) fail(line, "expected key = value");
    const std::string key = trim(s.substr(0, eq));
    if (!valid_key(key)) fail(line, "invalid key '" + key + "'");
    auto& table = doc[section];
    if (table.count(key)) fail(line, "duplicate key '" + key + "'");
    table[key] = ValueParser(trim(s.substr(eq + 1)), line).parse_all();
  }
  return doc;
}

}  // namespace toml

namespace {

using toml::Value;

std::string where(const std::string& section, const std::string& key) { return "[" + section + "] " + key; }

class SectionReader {
 public:
  SectionReader(const toml::Table& table, std::string name) : table_(table), name_(std::move(name)) {}

  const Value* find(const std::string& key) {
    used_.insert(key);
    const auto it = table_.find(key);
    return it == table_.end() ? nullptr : &it->second;
  }

  void read(const std::string& key, double& out) {
    if (const Value* v = find(key)) {
      if (const auto* d = std::get_if<double>(&v->data)) out = *d;
      else if (const auto* i = std::get_if<std::int64_t>(&v->data)) out = static_cast<double>(*i);
      else throw InputError(where(name_, key) + ": expected a number");
    }
  }

  void read(const std::string& key, Index& out) {
    if (const Value* v = find(key)) {
      if (const auto* i = std::get_if<std::int64_t>(&v->data)) out = static_cast<Index>(*i);
      else throw InputError(where(name_, key) + ": expected an integer");
    }
  }

  void read(const std::string& key, int& out) {
    Index tmp = out;
    read(key, tmp);
    out = static_cast<int>(tmp);
  }

  void read(const std::string& key, std::uint64_t& out) {
    Index tmp = static_cast<Index>(out);
    read(key, tmp);
    if (tmp < 0) throw InputError(where(name_, key) + ": expected a non-negative integer");
    out = static_cast<std::uint64_t>(tmp);
  }

  void read(const std::string& key, bool& out) {
    if (const Value* v = find(key)) {
      if (const auto* b = std::get_if<bool>(&v->data)) out = *b;
      else throw InputError(where(name_, key) + ": expected true or false");
    }
  }

  void read(const std::string& key, std::string& out) {
    if (const Value* v = find(key)) {
      if (const auto* s = std::get_if<std::string>(&v->data)) out = *s;
      else throw InputError(where(name_, key) + ": expected a string");
    }
  }

  void read(const std::string& key, std::filesystem::path& out) {
    std::string s = out.generic_string();
    read(key, s);
    out = s;
  }

  void read_numbers(const std::string& key, std::vector<double>& out) {
    if (const Value* v = find(key)) {
      if (const auto* d = std::get_if<double>(&v->data)) {
        out = {*d};
        return;
      }
      if (const auto* i = std::get_if<std::int64_t>(&v->data)) {
        out = {static_cast<double>(*i)};
        return;
      }
      const auto* arr = std::get_if<toml::Array>(&v->data);
      if (!arr) throw InputError(where(name_, key) + ": expected a number or an array of numbers");
      out.clear();
      for (const auto& item : *arr) {
        if (const auto* d = std::get_if<double>(&item.data)) out.push_back(*d);
        else if (const auto* i = std::get_if<std::int64_t>(&item.data)) out.push_back(static_cast<double>(*i));
        else throw InputError(where(name_, key) + ": array entries must be numbers");
      }
    }
  }

  void read_strings(const std::string& key, std::vector<std::string>& out) {
    if (const Value* v = find(key)) {
      const auto* arr = std::get_if<toml::Array>(&v->data);
      if (!arr) throw InputError(where(name_, key) + ": expected an array of strings");
      out.clear();
      for (const auto& item : *arr) {
        const auto* s = std::get_if<std::string>(&item.data);
        if (!s) throw InputError(where(name_, key) + ": array entries must be strings");
        out.push_back(*s);
      }
    }
  }

  void reject_unknown() const {
    for (const auto& [key, value] : table_)
      if (!used_.count(key))
        throw InputError("config line " + std::to_string(value.line) + ": unknown key " + where(name_, key));
  }

 private:
  const toml::Table& table_;
  std::string name_;
  std::set<std::string> used_;
};

const toml::Table kEmpty;

}  // namespace

Index ExperimentConfig::eps_inv() const { return static_cast<Index>(std::llround(1.0 / medium.eps)); }

void ExperimentConfig::validate() const {
  if (medium.kind != "periodic-bars" && medium.kind != "nonperiodic-demo" && medium.kind != "file")
    throw InputError("[medium] kind must be periodic-bars, nonperiodic-demo or file, got '" + medium.kind + "'");
  if (!(medium.eps > 0.0 && medium.eps < 1.0)) throw InputError("[medium] eps must lie in (0, 1)");
  if (medium.kind == "file" && medium.path.empty()) throw InputError("[medium] kind = file needs a path");
  if (n < 1) throw InputError("[grid] n must be >= 1");
  if (hinv < 1 || n % hinv != 0)
    throw InputError("[grid] hinv = " + std::to_string(hinv) + " must divide n = " + std::to_string(n));
  if (oversampling < 0) throw InputError("[grid] oversampling must be >= 0");
  if (medium.kind == "periodic-bars") {
    const Index p = eps_inv();
    if (std::abs(1.0 / static_cast<double>(p) - medium.eps) > 1e-12 * medium.eps)
      throw InputError("[medium] eps must be the reciprocal of an integer for periodic-bars");
    if (n % p != 0)
      throw InputError("[medium] 1/eps = " + std::to_string(p) + " must divide n = " + std::to_string(n));
  }
  if (medium.kind == "nonperiodic-demo" && n % 5 != 0) throw InputError("[medium] nonperiodic-demo needs n divisible by 5");
  if (alphas.empty()) throw InputError("[time] alpha must not be empty");
  for (double a : alphas)
    if (!(a > 0.0 && a <= 1.0)) throw InputError("[time] alpha values must lie in (0, 1]");
  if (!(T > 0.0) || !std::isfinite(T)) throw InputError("[time] T must be positive");
  if (N < 1) throw InputError("[time] N must be >= 1");
  if (reference_factor < 1) throw InputError("[time] reference_factor must be >= 1");
  if (source.kind != "zero" && source.kind != "linear" && source.kind != "semilinear")
    throw InputError("[source] kind must be zero, linear or semilinear, got '" + source.kind + "'");
  if (!(source.width >= 0.0)) throw InputError("[source] width must be >= 0");
  if (initial.kind != "zero" && initial.kind != "sine" && initial.kind != "bubble")
    throw InputError("[initial] kind must be zero, sine or bubble, got '" + initial.kind + "'");
  if (methods.empty()) throw InputError("[run] methods must not be empty");
  std::set<std::string> seen;
  for (const auto& m : methods) {
    if (m != "ei" && m != "l1-implicit" && m != "l1-explicit")
      throw InputError("[run] unknown method '" + m + "' (expected ei, l1-implicit, l1-explicit)");
    if (!seen.insert(m).second) throw InputError("[run] method '" + m + "' listed twice");
  }
  if (!(tolerances.spd_residual > 0.0) || !(tolerances.constraint_residual > 0.0))
    throw InputError("[solver] tolerances must be positive");
  if (!(picard.tol > 0.0) || picard.max_iterations < 1) throw InputError("[solver] Picard settings invalid");
}

ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  const toml::Document doc = toml::parse(text);
  static const std::set<std::string> sections{"", "medium", "grid", "time", "source", "initial", "run", "solver"};
  for (const auto& [name, table] : doc) {
    if (!sections.count(name)) {
      const int line = table.empty() ? 0 : table.begin()->second.line;
      throw InputError("config: unknown section [" + name + "]" + (line ? " near line " + std::to_string(line) : ""));
    }
  }
  auto table = [&](const std::string& name) -> const toml::Table& {
    const auto it = doc.find(name);
    return it == doc.end() ? kEmpty : it->second;
  };

  ExperimentConfig c;
  SectionReader top(table(""), "");
  top.reject_unknown();

  SectionReader medium(table("medium"), "medium");
  medium.read("kind", c.medium.kind);
  medium.read("path", c.medium.path);
  medium.read("eps", c.medium.eps);
  medium.reject_unknown();
  if (!c.medium.path.empty() && c.medium.path.is_relative() && !base_dir.empty())
    c.medium.path = base_dir / c.medium.path;

  SectionReader grid(table("grid"), "grid");
  grid.read("n", c.n);
  grid.read("hinv", c.hinv);
  grid.read("oversampling", c.oversampling);
  grid.reject_unknown();

  SectionReader time(table("time"), "time");
  time.read_numbers("alpha", c.alphas);
  time.read("T", c.T);
  time.read("N", c.N);
  time.read("reference_factor", c.reference_factor);
  time.reject_unknown();

  SectionReader source(table("source"), "source");
  source.read("kind", c.source.kind);
  std::vector<double> center{c.source.center_x, c.source.center_y};
  source.read_numbers("center", center);
  if (center.size() != 2) throw InputError("[source] center must have two entries");
  c.source.center_x = center[0];
  c.source.center_y = center[1];
  source.read("width", c.source.width);
  source.read("amplitude", c.source.amplitude);
  source.reject_unknown();

  SectionReader initial(table("initial"), "initial");
  initial.read("kind", c.initial.kind);
  initial.read("amplitude", c.initial.amplitude);
  initial.reject_unknown();

  SectionReader run(table("run"), "run");
  run.read_strings("methods", c.methods);
  run.read("output", c.output);
  run.read("snapshots", c.snapshots);
  run.read("seed", c.seed);
  run.reject_unknown();

  SectionReader solver(table("solver"), "solver");
  solver.read("spd_tol", c.tolerances.spd_residual);
  solver.read("constraint_tol", c.tolerances.constraint_residual);
  solver.read("eigen_tol", c.tolerances.eigen_residual);
  solver.read("picard_tol", c.picard.tol);
  solver.read("picard_max_iterations", c.picard.max_iterations);
  solver.reject_unknown();

  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot open config file " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

namespace {

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  std::string s = buf;
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

std::string quoted(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string to_toml(const ExperimentConfig& c) {
  std::ostringstream os;
  os << "[medium]\nkind = " << quoted(c.medium.kind) << '\n';
  if (!c.medium.path.empty()) os << "path = " << quoted(c.medium.path.generic_string()) << '\n';
  os << "eps = " << num(c.medium.eps) << "\n\n";
  os << "[grid]\nn = " << c.n << "\nhinv = " << c.hinv << "\noversampling = " << c.oversampling << "\n\n";
  os << "[time]\nalpha = [";
  for (std::size_t i = 0; i < c.alphas.size(); ++i) os << (i ? ", " : "") << num(c.alphas[i]);
  os << "]\nT = " << num(c.T) << "\nN = " << c.N << "\nreference_factor = " << c.reference_factor << "\n\n";
  os << "[source]\nkind = " << quoted(c.source.kind) << "\ncenter = [" << num(c.source.center_x) << ", "
     << num(c.source.center_y) << "]\nwidth = " << num(c.source.width) << "\namplitude = " << num(c.source.amplitude)
     << "\n\n";
  os << "[initial]\nkind = " << quoted(c.initial.kind) << "\namplitude = " << num(c.initial.amplitude) << "\n\n";
  os << "[run]\nmethods = [";
  for (std::size_t i = 0; i < c.methods.size(); ++i) os << (i ? ", " : "") << quoted(c.methods[i]);
  os << "]\noutput = " << quoted(c.output.generic_string()) << "\nsnapshots = " << (c.snapshots ? "true" : "false")
     << "\nseed = " << c.seed << "\n\n";
  os << "[solver]\nspd_tol = " << num(c.tolerances.spd_residual)
     << "\nconstraint_tol = " << num(c.tolerances.constraint_residual)
     << "\neigen_tol = " << num(c.tolerances.eigen_residual) << "\npicard_tol = " << num(c.picard.tol)
     << "\npicard_max_iterations = " << c.picard.max_iterations << '\n';
  return os.str();
}

double source_value(const SourceSpec& s, double x, double y) {
  if (s.kind == "zero") return 0.0;
  const double dx = x - s.center_x;
  const double dy = y - s.center_y;
  return s.amplitude * std::exp(-s.width * (dx * dx + dy * dy));
}

double initial_value(const InitialSpec& s, double x, double y) {
  constexpr double pi = std::numbers::pi;
  if (s.kind == "sine") return s.amplitude * std::sin(2.0 * pi * x) * std::sin(pi * y);
  if (s.kind == "bubble") return -s.amplitude * x * (1.0 - x) * y * (1.0 - y);
  return 0.0;
}

}  // namespace fracmc
