#include "asgl/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "asgl/error.hpp"

namespace asgl {

namespace {

std::string trim(const std::string& s) {
  const char* ws = " \t\r";
  const auto a = s.find_first_not_of(ws);
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(ws);
  return s.substr(a, b - a + 1);
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  std::uint64_t out = 0;
  const char* begin = value.data();
  const char* end = begin + value.size();
  const auto res = std::from_chars(begin, end, out);
  if (res.ec != std::errc() || res.ptr != end || value.empty()) {
    raise(ErrorCode::config, "config key \"" + key +
                                 "\" needs a non-negative integer, got \"" +
                                 value + "\"");
  }
  return out;
}

double parse_double(const std::string& key, const std::string& value) {
  double out = 0.0;
  const char* begin = value.data();
  const char* end = begin + value.size();
  const auto res = std::from_chars(begin, end, out);
  if (res.ec != std::errc() || res.ptr != end || value.empty()) {
    raise(ErrorCode::config, "config key \"" + key +
                                 "\" needs a number, got \"" + value + "\"");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true") return true;
  if (value == "false") return false;
  raise(ErrorCode::config, "config key \"" + key +
                               "\" needs true or false, got \"" + value +
                               "\"");
}

std::vector<std::size_t> parse_dims(const std::string& key,
                                    const std::string& value) {
  std::vector<std::size_t> out;
  std::string token;
  std::istringstream stream(value);
  while (std::getline(stream, token, ',')) {
    const std::uint64_t v = parse_u64(key, trim(token));
    if (v == 0) {
      raise(ErrorCode::config,
            "config key \"" + key + "\" needs positive layer widths");
    }
    out.push_back(static_cast<std::size_t>(v));
  }
  if (out.empty()) {
    raise(ErrorCode::config, "config key \"" + key +
                                 "\" needs a comma-separated width list");
  }
  return out;
}

// Shortest representation that parses back to the same double.
std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string format_dims(const std::vector<std::size_t>& dims) {
  std::string out;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i > 0) out += ",";
    out += std::to_string(dims[i]);
  }
  return out;
}

struct KeyDef {
  std::string name;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

KeyDef u64_key(const std::string& name, std::uint64_t RunConfig::* member) {
  return {name,
          [name, member](RunConfig& c, const std::string& v) {
            c.*member = parse_u64(name, v);
          },
          [member](const RunConfig& c) { return std::to_string(c.*member); }};
}

KeyDef size_key(const std::string& name, std::size_t RunConfig::* member) {
  return {name,
          [name, member](RunConfig& c, const std::string& v) {
            c.*member = static_cast<std::size_t>(parse_u64(name, v));
          },
          [member](const RunConfig& c) { return std::to_string(c.*member); }};
}

KeyDef double_key(const std::string& name, double RunConfig::* member) {
  return {name,
          [name, member](RunConfig& c, const std::string& v) {
            c.*member = parse_double(name, v);
          },
          [member](const RunConfig& c) { return format_double(c.*member); }};
}

KeyDef bool_key(const std::string& name, bool RunConfig::* member) {
  return {name,
          [name, member](RunConfig& c, const std::string& v) {
            c.*member = parse_bool(name, v);
          },
          [member](const RunConfig& c) {
            return c.*member ? "true" : "false";
          }};
}

KeyDef dims_key(const std::string& name,
                std::vector<std::size_t> RunConfig::* member) {
  return {name,
          [name, member](RunConfig& c, const std::string& v) {
            c.*member = parse_dims(name, v);
          },
          [member](const RunConfig& c) { return format_dims(c.*member); }};
}

KeyDef choice_key(const std::string& name, std::string RunConfig::* member,
                  std::vector<std::string> allowed) {
  return {name,
          [name, member, allowed](RunConfig& c, const std::string& v) {
            for (const auto& a : allowed) {
              if (v == a) {
                c.*member = v;
                return;
              }
            }
            std::string options;
            for (std::size_t i = 0; i < allowed.size(); ++i) {
              if (i > 0) options += ", ";
              options += allowed[i];
            }
            raise(ErrorCode::config, "config key \"" + name + "\" must be "
                                     "one of " + options + ", got \"" + v +
                                     "\"");
          },
          [member](const RunConfig& c) { return c.*member; }};
}

const std::vector<KeyDef>& registry() {
  static const std::vector<KeyDef> keys = {
      choice_key("mode", &RunConfig::mode, {"f32", "f64"}),
      u64_key("seed", &RunConfig::seed),
      size_key("epochs", &RunConfig::epochs),
      size_key("batch_p", &RunConfig::batch_p),
      size_key("batch_k", &RunConfig::batch_k),
      double_key("lr", &RunConfig::lr),
      size_key("lr_step_epochs", &RunConfig::lr_step_epochs),
      double_key("lr_decay", &RunConfig::lr_decay),
      double_key("lambda1", &RunConfig::lambda1),
      double_key("lambda2", &RunConfig::lambda2),
      double_key("margin", &RunConfig::margin),
      size_key("max_iterations", &RunConfig::max_iterations),
      size_key("clip_len", &RunConfig::clip_len),
      size_key("stride", &RunConfig::stride),
      dims_key("refine_dims", &RunConfig::refine_dims),
      dims_key("gat_dims", &RunConfig::gat_dims),
      dims_key("sta_channels", &RunConfig::sta_channels),
      size_key("heads", &RunConfig::heads),
      size_key("partition_hops", &RunConfig::partition_hops),
      size_key("fused_dim", &RunConfig::fused_dim),
      size_key("appearance_dim", &RunConfig::appearance_dim),
      double_key("score_slope", &RunConfig::score_slope),
      double_key("activation_slope", &RunConfig::activation_slope),
      bool_key("circular_time", &RunConfig::circular_time),
      bool_key("use_appearance", &RunConfig::use_appearance),
      bool_key("use_shape", &RunConfig::use_shape),
      bool_key("use_gait", &RunConfig::use_gait),
      choice_key("protocol", &RunConfig::protocol,
                 {"cc", "standard", "sc", "all"}),
      choice_key("embed_split", &RunConfig::embed_split,
                 {"train", "query", "gallery", "all"}),
      size_key("synth_identities", &RunConfig::synth_identities),
      size_key("synth_tracklets", &RunConfig::synth_tracklets),
      size_key("synth_frames", &RunConfig::synth_frames),
      size_key("synth_clothing", &RunConfig::synth_clothing),
      size_key("synth_appearance_dim", &RunConfig::synth_appearance_dim),
      double_key("synth_appearance_noise",
                 &RunConfig::synth_appearance_noise),
  };
  return keys;
}

}  // namespace

std::vector<std::string> config_keys() {
  std::vector<std::string> names;
  names.reserve(registry().size());
  for (const auto& key : registry()) names.push_back(key.name);
  return names;
}

void apply_config_value(RunConfig& config, const std::string& key,
                        const std::string& value) {
  for (const auto& def : registry()) {
    if (def.name == key) {
      def.set(config, value);
      return;
    }
  }
  raise(ErrorCode::config, "unknown config key \"" + key + "\"");
}

void apply_config_file(RunConfig& config, const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    raise(ErrorCode::file, "cannot open config file " + path);
  }
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      raise(ErrorCode::config, path + ":" + std::to_string(line_no) +
                                   ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      apply_config_value(config, key, value);
    } catch (const Error& e) {
      raise(e.code(),
            path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

std::string resolved_config_text(const RunConfig& config) {
  std::string out;
  for (const auto& def : registry()) {
    out += def.name;
    out += " = ";
    out += def.get(config);
    out += "\n";
  }
  return out;
}

void write_resolved_config(const RunConfig& config, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  out << resolved_config_text(config);
  if (!out) {
    raise(ErrorCode::file, "cannot write resolved config to " + path);
  }
}

}  // namespace asgl
