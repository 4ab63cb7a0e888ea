#include "fedgeo/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "fedgeo/errors.hpp"

namespace fedgeo {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    parts.push_back(trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

[[noreturn]] void bad_value(std::string_view key, const std::string& value, std::string_view why) {
  throw ConfigError("config key '" + std::string(key) + "': invalid value '" + value + "' (" +
                    std::string(why) + ")");
}

std::uint64_t parse_u64(std::string_view key, const std::string& raw) {
  const std::string v = trim(raw);
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) {
    bad_value(key, raw, "expected a non-negative integer");
  }
  return out;
}

double parse_f64(std::string_view key, const std::string& raw) {
  const std::string v = trim(raw);
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) {
    bad_value(key, raw, "expected a number");
  }
  if (!std::isfinite(out)) bad_value(key, raw, "expected a finite number");
  return out;
}

std::string fmt_f64(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct KeyHandler {
  std::string key;
  bool scalar;
  std::function<void(SimConfig&, const std::string&)> set;
  std::function<std::string(const SimConfig&)> get;
};

#define FG_SIZE(KEY, FIELD)                                                             \
  KeyHandler {                                                                          \
    KEY, true, [](SimConfig& c, const std::string& v) { c.FIELD = parse_u64(KEY, v); }, \
        [](const SimConfig& c) { return std::to_string(c.FIELD); }                      \
  }
#define FG_F64(KEY, FIELD)                                                              \
  KeyHandler {                                                                          \
    KEY, true, [](SimConfig& c, const std::string& v) { c.FIELD = parse_f64(KEY, v); }, \
        [](const SimConfig& c) { return fmt_f64(c.FIELD); }                             \
  }
#define FG_STR(KEY, FIELD)                                                         \
  KeyHandler {                                                                     \
    KEY, true, [](SimConfig& c, const std::string& v) { c.FIELD = trim(v); },      \
        [](const SimConfig& c) { return std::string(c.FIELD); }                    \
  }
#define FG_PATH(KEY, FIELD)                                                        \
  KeyHandler {                                                                     \
    KEY, true, [](SimConfig& c, const std::string& v) { c.FIELD = trim(v); },      \
        [](const SimConfig& c) { return c.FIELD.string(); }                        \
  }

const std::vector<KeyHandler>& handlers() {
  static const std::vector<KeyHandler> table = {
      FG_SIZE("run.master_seed", master_seed),
      FG_STR("data.source", data.source),
      FG_PATH("data.images", data.images),
      FG_PATH("data.labels", data.labels),
      FG_PATH("data.test_images", data.test_images),
      FG_PATH("data.test_labels", data.test_labels),
      FG_SIZE("data.max_train", data.max_train),
      FG_SIZE("data.n_train", data.n_train),
      FG_SIZE("data.n_test", data.n_test),
      FG_SIZE("data.dim", data.dim),
      FG_SIZE("data.classes", data.classes),
      KeyHandler{"model.hidden", false,
                 [](SimConfig& c, const std::string& v) {
                   c.model.hidden.clear();
                   for (const auto& part : split(v, ',')) {
                     c.model.hidden.push_back(parse_u64("model.hidden", part));
                   }
                 },
                 [](const SimConfig& c) {
                   std::string s;
                   for (std::size_t i = 0; i < c.model.hidden.size(); ++i) {
                     if (i) s += ",";
                     s += std::to_string(c.model.hidden[i]);
                   }
                   return s;
                 }},
      FG_F64("partition.alpha", partition.alpha),
      FG_SIZE("partition.n_clients", partition.n_clients),
      FG_SIZE("probe.size", probe.size),
      FG_SIZE("fed.rounds", fed.n_rounds),
      FG_SIZE("fed.local_epochs", fed.local_epochs),
      FG_SIZE("fed.batch_size", fed.batch_size),
      FG_F64("fed.learning_rate", fed.learning_rate),
      FG_F64("fed.momentum", fed.momentum),
      FG_F64("fed.client_fraction", fed.client_fraction),
      FG_F64("divergence.beta", divergence.beta),
      FG_F64("anomaly.epsilon", anomaly.epsilon),
      FG_F64("anomaly.threshold", anomaly.threshold),
      KeyHandler{"shifted.client", true,
                 [](SimConfig& c, const std::string& raw) {
                   const std::string v = trim(raw);
                   c.shifted.pick_random = false;
                   c.shifted.client.reset();
                   if (v == "none") return;
                   if (v == "random") {
                     c.shifted.pick_random = true;
                     return;
                   }
                   c.shifted.client = parse_u64("shifted.client", v);
                 },
                 [](const SimConfig& c) -> std::string {
                   if (c.shifted.pick_random) return "random";
                   if (c.shifted.client) return std::to_string(*c.shifted.client);
                   return "none";
                 }},
      KeyHandler{"shifted.perturbations", false,
                 [](SimConfig& c, const std::string& raw) {
                   c.shifted.perturbations.clear();
                   if (trim(raw).empty()) return;
                   for (const auto& item : split(raw, ',')) {
                     const auto fields = split(item, ':');
                     if (fields.size() != 2) {
                       bad_value("shifted.perturbations", raw, "expected kind:magnitude items");
                     }
                     PerturbationSpec spec;
                     try {
                       spec.kind = parse_perturbation_kind(fields[0]);
                     } catch (const std::invalid_argument& e) {
                       bad_value("shifted.perturbations", raw, e.what());
                     }
                     spec.magnitude = parse_f64("shifted.perturbations", fields[1]);
                     c.shifted.perturbations.push_back(spec);
                   }
                 },
                 [](const SimConfig& c) {
                   std::string s;
                   for (std::size_t i = 0; i < c.shifted.perturbations.size(); ++i) {
                     if (i) s += ",";
                     s += std::string(to_string(c.shifted.perturbations[i].kind)) + ":" +
                          fmt_f64(c.shifted.perturbations[i].magnitude);
                   }
                   return s;
                 }},
      FG_PATH("output.dir", output.dir),
      FG_STR("output.csv", output.csv),
      FG_STR("output.summary", output.summary),
  };
  return table;
}

#undef FG_SIZE
#undef FG_F64
#undef FG_STR
#undef FG_PATH

const KeyHandler& find_handler(std::string_view key) {
  for (const auto& h : handlers()) {
    if (h.key == key) return h;
  }
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& h : handlers()) k.push_back(h.key);
    return k;
  }();
  return keys;
}

bool is_scalar_key(std::string_view key) { return find_handler(key).scalar; }

void set_config_value(SimConfig& cfg, std::string_view key, const std::string& value) {
  find_handler(key).set(cfg, value);
}

std::string get_config_value(const SimConfig& cfg, std::string_view key) {
  return find_handler(key).get(cfg);
}

SimConfig parse_config(const std::string& text) {
  boost::property_tree::ptree tree;
  std::istringstream in(text);
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("config syntax error: ") + e.what());
  }
  SimConfig cfg;
  for (const auto& [section, body] : tree) {
    if (body.empty()) {
      if (!body.data().empty()) {
        throw ConfigError("config key '" + section + "' must live inside a [section]");
      }
      continue;
    }
    for (const auto& [key, value] : body) {
      set_config_value(cfg, section + "." + key, value.get_value<std::string>());
    }
  }
  return cfg;
}

SimConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

void validate_config(const SimConfig& cfg) {
  auto fail = [](std::string_view key, const std::string& why) {
    throw ConfigError("config key '" + std::string(key) + "': " + why);
  };
  const auto& d = cfg.data;
  if (d.source != "synth" && d.source != "idx") fail("data.source", "must be 'synth' or 'idx'");
  if (d.source == "idx") {
    if (d.images.empty()) fail("data.images", "required when data.source = idx");
    if (d.labels.empty()) fail("data.labels", "required when data.source = idx");
    if (d.test_images.empty() != d.test_labels.empty()) {
      fail("data.test_images", "data.test_images and data.test_labels must be set together");
    }
  } else {
    if (d.dim == 0) fail("data.dim", "must be >= 1");
    if (d.classes < 2) fail("data.classes", "must be >= 2");
    if (d.n_train < d.classes) fail("data.n_train", "must be >= data.classes");
  }
  if (d.n_test == 0) fail("data.n_test", "must be >= 1");
  if (cfg.model.hidden.empty()) fail("model.hidden", "needs at least one hidden layer");
  for (std::size_t h : cfg.model.hidden) {
    if (h == 0) fail("model.hidden", "layer widths must be >= 1");
  }
  if (!(cfg.partition.alpha > 0.0)) fail("partition.alpha", "must be > 0");
  if (cfg.partition.n_clients < 2) fail("partition.n_clients", "must be >= 2");
  if (cfg.probe.size == 0) fail("probe.size", "must be >= 1");
  const auto& f = cfg.fed;
  if (f.n_rounds == 0) fail("fed.rounds", "must be >= 1");
  if (f.local_epochs == 0) fail("fed.local_epochs", "must be >= 1");
  if (f.batch_size == 0) fail("fed.batch_size", "must be >= 1");
  if (!(f.learning_rate >= 0.0)) fail("fed.learning_rate", "must be >= 0");
  if (!(f.momentum >= 0.0 && f.momentum < 1.0)) fail("fed.momentum", "must be in [0, 1)");
  if (!(f.client_fraction > 0.0 && f.client_fraction <= 1.0)) {
    fail("fed.client_fraction", "must be in (0, 1]");
  }
  const auto participants = static_cast<std::size_t>(
      std::llround(f.client_fraction * static_cast<double>(cfg.partition.n_clients)));
  if (participants < 2) fail("fed.client_fraction", "fewer than 2 clients would participate");
  if (!(cfg.divergence.beta > 0.0)) fail("divergence.beta", "must be > 0");
  if (!(cfg.anomaly.epsilon > 0.0)) fail("anomaly.epsilon", "must be > 0");
  if (!(cfg.anomaly.threshold > 0.0)) fail("anomaly.threshold", "must be > 0");
  if (cfg.shifted.client && *cfg.shifted.client >= cfg.partition.n_clients) {
    fail("shifted.client", "index out of range for partition.n_clients");
  }
  for (const auto& p : cfg.shifted.perturbations) {
    if (!(p.magnitude > 0.0)) fail("shifted.perturbations", "magnitudes must be > 0");
  }
  if (cfg.output.csv.empty()) fail("output.csv", "must not be empty");
  if (cfg.output.summary.empty()) fail("output.summary", "must not be empty");
}

std::string config_to_text(const SimConfig& cfg) {
  std::string out;
  std::string current;
  for (const auto& h : handlers()) {
    const auto dot = h.key.find('.');
    const std::string section = h.key.substr(0, dot);
    if (section != current) {
      if (!current.empty()) out += "\n";
      out += "[" + section + "]\n";
      current = section;
    }
    out += h.key.substr(dot + 1) + " = " + h.get(cfg) + "\n";
  }
  return out;
}

}  // namespace fedgeo
