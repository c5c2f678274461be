#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace partgait::cli {

// Flat "section.key" -> raw string value view of a sectioned key-value
// config document.
using config_map = std::map<std::string, std::string>;

config_map parse_config_text(const std::string& text);  // bad_config_error
config_map read_config_file(const std::string& path);   // io_error
// "section.key=value" command-line override.
void apply_override(config_map& config, const std::string& assignment);
// Sectioned text form, keys sorted; parse(render(m)) == m.
std::string render_config(const config_map& config);

struct field_spec {
  enum class kind { integer, real, boolean, text, int_list };
  kind type = kind::text;
  std::string default_value;
  bool has_range = false;
  double min_value = 0, max_value = 0;
};

// Declarative key schema: every known key has a type, a default, and an
// optional numeric range. Resolution merges defaults <- file <-
// overrides, rejects unknown keys, and validates every value.
class config_schema {
 public:
  config_schema& add_int(const std::string& key, int64_t def);
  config_schema& add_int(const std::string& key, int64_t def, int64_t lo,
                         int64_t hi);
  config_schema& add_real(const std::string& key, double def);
  config_schema& add_real(const std::string& key, double def, double lo,
                          double hi);
  config_schema& add_bool(const std::string& key, bool def);
  config_schema& add_text(const std::string& key, const std::string& def);
  config_schema& add_int_list(const std::string& key, const std::string& def);

  config_map resolve(const config_map& file_values,
                     const std::vector<std::string>& overrides) const;

 private:
  std::map<std::string, field_spec> fields_;
};

int64_t get_int(const config_map& config, const std::string& key);
double get_real(const config_map& config, const std::string& key);
bool get_bool(const config_map& config, const std::string& key);
const std::string& get_text(const config_map& config, const std::string& key);
std::vector<int> get_int_list(const config_map& config, const std::string& key);

}  // namespace partgait::cli
