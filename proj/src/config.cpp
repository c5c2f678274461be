#include "partgait/cliutil/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "partgait/errors.hpp"

namespace partgait::cli {
namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

bool valid_name(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_') return false;
  return true;
}

int64_t parse_int(const std::string& key, const std::string& value) {
  int64_t out = 0;
  const char* begin = value.data();
  const char* end = begin + value.size();
  const auto [ptr, ec] = std::from_chars(begin, end, out);
  if (ec != std::errc{} || ptr != end)
    throw bad_config_error("key " + key + ": '" + value +
                           "' is not an integer");
  return out;
}

double parse_real(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double out = std::stod(value, &pos);
    if (pos != value.size() || !std::isfinite(out))
      throw std::invalid_argument(value);
    return out;
  } catch (const std::exception&) {
    throw bad_config_error("key " + key + ": '" + value + "' is not a number");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw bad_config_error("key " + key + ": '" + value + "' is not a boolean");
}

std::vector<int> parse_int_list(const std::string& key,
                                const std::string& value) {
  std::vector<int> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty())
      throw bad_config_error("key " + key + ": empty list element");
    out.push_back(static_cast<int>(parse_int(key, item)));
  }
  if (out.empty())
    throw bad_config_error("key " + key + ": empty list");
  return out;
}

void validate_value(const std::string& key, const field_spec& spec,
                    const std::string& value) {
  switch (spec.type) {
    case field_spec::kind::integer: {
      const int64_t v = parse_int(key, value);
      if (spec.has_range && (static_cast<double>(v) < spec.min_value ||
                             static_cast<double>(v) > spec.max_value))
        throw bad_config_error("key " + key + ": " + value + " outside [" +
                               std::to_string(spec.min_value) + ", " +
                               std::to_string(spec.max_value) + "]");
      break;
    }
    case field_spec::kind::real: {
      const double v = parse_real(key, value);
      if (spec.has_range && (v < spec.min_value || v > spec.max_value))
        throw bad_config_error("key " + key + ": " + value + " outside [" +
                               std::to_string(spec.min_value) + ", " +
                               std::to_string(spec.max_value) + "]");
      break;
    }
    case field_spec::kind::boolean:
      parse_bool(key, value);
      break;
    case field_spec::kind::int_list:
      parse_int_list(key, value);
      break;
    case field_spec::kind::text:
      break;
  }
}

}  // namespace

config_map parse_config_text(const std::string& text) {
  config_map out;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']')
        throw bad_config_error("line " + std::to_string(lineno) +
                               ": unterminated section header");
      section = trim(t.substr(1, t.size() - 2));
      if (!valid_name(section))
        throw bad_config_error("line " + std::to_string(lineno) +
                               ": bad section name '" + section + "'");
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw bad_config_error("line " + std::to_string(lineno) +
                             ": expected key = value");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (!valid_name(key))
      throw bad_config_error("line " + std::to_string(lineno) +
                             ": bad key name '" + key + "'");
    if (section.empty())
      throw bad_config_error("line " + std::to_string(lineno) +
                             ": key outside any [section]");
    const std::string full = section + "." + key;
    if (out.count(full))
      throw bad_config_error("line " + std::to_string(lineno) +
                             ": duplicate key " + full);
    out[full] = value;
  }
  return out;
}

config_map read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot read config file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

void apply_override(config_map& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos)
    throw bad_config_error("override '" + assignment +
                           "' must look like section.key=value");
  const std::string key = trim(assignment.substr(0, eq));
  const auto dot = key.find('.');
  if (dot == std::string::npos || !valid_name(key.substr(0, dot)) ||
      !valid_name(key.substr(dot + 1)))
    throw bad_config_error("override key '" + key +
                           "' must look like section.key");
  config[key] = trim(assignment.substr(eq + 1));
}

std::string render_config(const config_map& config) {
  std::ostringstream out;
  std::string section;
  for (const auto& [key, value] : config) {
    const auto dot = key.find('.');
    const std::string sec = key.substr(0, dot);
    if (sec != section) {
      if (!section.empty()) out << '\n';
      out << '[' << sec << "]\n";
      section = sec;
    }
    out << key.substr(dot + 1) << " = " << value << '\n';
  }
  return out.str();
}

config_schema& config_schema::add_int(const std::string& key, int64_t def) {
  fields_[key] = {field_spec::kind::integer, std::to_string(def), false, 0, 0};
  return *this;
}

config_schema& config_schema::add_int(const std::string& key, int64_t def,
                                      int64_t lo, int64_t hi) {
  fields_[key] = {field_spec::kind::integer, std::to_string(def), true,
                  static_cast<double>(lo), static_cast<double>(hi)};
  return *this;
}

config_schema& config_schema::add_real(const std::string& key, double def) {
  std::ostringstream os;
  os.precision(17);
  os << def;
  fields_[key] = {field_spec::kind::real, os.str(), false, 0, 0};
  return *this;
}

config_schema& config_schema::add_real(const std::string& key, double def,
                                       double lo, double hi) {
  std::ostringstream os;
  os.precision(17);
  os << def;
  fields_[key] = {field_spec::kind::real, os.str(), true, lo, hi};
  return *this;
}

config_schema& config_schema::add_bool(const std::string& key, bool def) {
  fields_[key] = {field_spec::kind::boolean, def ? "true" : "false", false, 0,
                  0};
  return *this;
}

config_schema& config_schema::add_text(const std::string& key,
                                       const std::string& def) {
  fields_[key] = {field_spec::kind::text, def, false, 0, 0};
  return *this;
}

config_schema& config_schema::add_int_list(const std::string& key,
                                           const std::string& def) {
  fields_[key] = {field_spec::kind::int_list, def, false, 0, 0};
  return *this;
}

config_map config_schema::resolve(
    const config_map& file_values,
    const std::vector<std::string>& overrides) const {
  config_map merged;
  for (const auto& [key, spec] : fields_) merged[key] = spec.default_value;
  for (const auto& [key, value] : file_values) {
    if (!fields_.count(key))
      throw bad_config_error("unknown config key: " + key);
    merged[key] = value;
  }
  for (const auto& assignment : overrides) {
    config_map one;
    apply_override(one, assignment);
    for (const auto& [key, value] : one) {
      if (!fields_.count(key))
        throw bad_config_error("unknown config key: " + key);
      merged[key] = value;
    }
  }
  for (const auto& [key, value] : merged)
    validate_value(key, fields_.at(key), value);
  return merged;
}

int64_t get_int(const config_map& config, const std::string& key) {
  return parse_int(key, config.at(key));
}

double get_real(const config_map& config, const std::string& key) {
  return parse_real(key, config.at(key));
}

bool get_bool(const config_map& config, const std::string& key) {
  return parse_bool(key, config.at(key));
}

const std::string& get_text(const config_map& config, const std::string& key) {
  return config.at(key);
}

std::vector<int> get_int_list(const config_map& config,
                              const std::string& key) {
  return parse_int_list(key, config.at(key));
}

}  // namespace partgait::cli
