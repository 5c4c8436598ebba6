#include "tiger/model/config.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <fstream>
#include <sstream>

#include "tiger/common/error.hpp"

namespace tiger::model {

std::vector<std::string> preset_names() { return {"small", "large", "tiny", "dnr"}; }

TigerConfig TigerConfig::from_preset(std::string_view name) {
  TigerConfig c;
  c.preset = std::string(name);
  if (name == "small") {
  } else if (name == "large") {
    c.separator.B = 8;
  } else if (name == "tiny") {
    c.separator.N = 24;
    c.separator.H = 64;
  } else if (name == "dnr") {
    c.sample_rate = 44100.0;
    c.sources = 3;
    c.stft = {2048, 512};
    c.separator.N = 132;
    c.separator.B = 8;
  } else {
    throw InvalidArgument("unknown preset '" + std::string(name) + "' (small, large, tiny, dnr)");
  }
  const char* scheme = name == "dnr" ? "DnR44k" : "LowFreqNarrowSplit";
  c.scheme = bands::make_scheme(scheme, c.stft.bins(), c.bin_hz());
  return c;
}

void TigerConfig::validate() const {
  if (!(sample_rate > 0)) throw InvalidArgument("config: sample_rate must be positive");
  if (sources == 0) throw InvalidArgument("config: sources must be at least 1");
  stft.validate();
  scheme.validate(stft.bins());
  separator.validate();
}

namespace {

YAML::Node to_node(const TigerConfig& c) {
  YAML::Node n;
  n["preset"] = c.preset;
  n["sample_rate"] = c.sample_rate;
  n["sources"] = c.sources;
  n["stft"]["window_size"] = c.stft.window_size;
  n["stft"]["hop"] = c.stft.hop;
  n["scheme"]["name"] = c.scheme.name;
  YAML::Node widths(YAML::NodeType::Sequence);
  for (std::size_t w : c.scheme.widths) widths.push_back(w);
  widths.SetStyle(YAML::EmitterStyle::Flow);
  n["scheme"]["widths"] = widths;
  const auto& s = c.separator;
  n["separator"]["N"] = s.N;
  n["separator"]["H"] = s.H;
  n["separator"]["D"] = s.D;
  n["separator"]["B"] = s.B;
  n["separator"]["A"] = s.A;
  n["separator"]["E"] = s.E;
  n["separator"]["path_order"] = separator::to_string(s.order);
  return n;
}

bool is_tabulated(const std::string& name) {
  const auto names = bands::scheme_names();
  return std::find(names.begin(), names.end(), name) != names.end();
}

template <typename V>
void read(const YAML::Node& node, const char* key, V& out) {
  if (const YAML::Node v = node[key]) {
    try {
      out = v.as<V>();
    } catch (const YAML::Exception& e) {
      throw InvalidArgument(std::string("config: bad value for '") + key + "': " + e.what());
    }
  }
}

TigerConfig from_node(const YAML::Node& root) {
  if (!root.IsMap()) throw InvalidArgument("config: expected a mapping at the top level");
  static const char* kSections[] = {"preset", "sample_rate", "sources", "stft", "scheme",
                                    "separator"};
  for (const auto& kv : root) {
    const auto key = kv.first.as<std::string>();
    if (std::find(std::begin(kSections), std::end(kSections), key) == std::end(kSections)) {
      throw InvalidArgument("config: unknown key '" + key + "'");
    }
  }
  std::string preset = "small";
  read(root, "preset", preset);
  TigerConfig c = TigerConfig::from_preset(preset);
  read(root, "sample_rate", c.sample_rate);
  read(root, "sources", c.sources);
  if (const YAML::Node s = root["stft"]) {
    read(s, "window_size", c.stft.window_size);
    read(s, "hop", c.stft.hop);
  }
  bool widths_given = false;
  if (const YAML::Node s = root["scheme"]) {
    read(s, "name", c.scheme.name);
    if (s["widths"]) {
      read(s, "widths", c.scheme.widths);
      widths_given = true;
    }
  }
  if (!widths_given) {
    if (!is_tabulated(c.scheme.name)) {
      throw InvalidArgument("config: custom scheme '" + c.scheme.name + "' needs explicit widths");
    }
    c.stft.validate();
    c.scheme = bands::make_scheme(c.scheme.name, c.stft.bins(), c.bin_hz());
  }
  if (const YAML::Node s = root["separator"]) {
    auto& sep = c.separator;
    read(s, "N", sep.N);
    read(s, "H", sep.H);
    read(s, "D", sep.D);
    read(s, "B", sep.B);
    read(s, "A", sep.A);
    read(s, "E", sep.E);
    std::string order = separator::to_string(sep.order);
    read(s, "path_order", order);
    sep.order = separator::parse_path_order(order);
  }
  c.validate();
  return c;
}

}  // namespace

std::string TigerConfig::to_yaml() const {
  YAML::Emitter out;
  out << to_node(*this);
  return std::string(out.c_str()) + "\n";
}

TigerConfig TigerConfig::from_yaml(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw InvalidArgument(std::string("config: YAML parse error: ") + e.what());
  }
  return from_node(root);
}

TigerConfig TigerConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("config: cannot open '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return from_yaml(ss.str());
}

void TigerConfig::set(const std::string& key, const std::string& value) {
  YAML::Node root = to_node(*this);
  const auto dot = key.find('.');
  const std::string head = key.substr(0, dot);
  YAML::Node target;
  if (dot == std::string::npos) {
    if (!root[head] || root[head].IsMap()) throw InvalidArgument("config: unknown key '" + key + "'");
  } else {
    const std::string tail = key.substr(dot + 1);
    if (!root[head] || !root[head].IsMap() || !root[head][tail]) {
      throw InvalidArgument("config: unknown key '" + key + "'");
    }
  }
  YAML::Node parsed;
  try {
    parsed = YAML::Load(value);
  } catch (const YAML::Exception& e) {
    throw InvalidArgument("config: cannot parse value for '" + key + "': " + e.what());
  }
  if (dot == std::string::npos) {
    root[head] = parsed;
    if (head == "preset") {
      // A new preset replaces the whole configuration.
      *this = from_preset(parsed.as<std::string>());
      return;
    }
    if (head == "sample_rate" && is_tabulated(scheme.name)) root["scheme"].remove("widths");
  } else {
    const std::string tail = key.substr(dot + 1);
    root[head][tail] = parsed;
    const bool regenerates = head == "stft" || (head == "scheme" && tail == "name");
    const std::string name = root["scheme"]["name"].as<std::string>();
    if (regenerates && is_tabulated(name)) root["scheme"].remove("widths");
  }
  *this = from_node(root);
}

}  // namespace tiger::model
