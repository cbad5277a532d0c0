#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "hdnet/error.hpp"
#include "hdnet/trainer.hpp"

namespace hdnet {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double to_real(const std::string& v, int line) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (const std::logic_error&) {
  }
  throw ConfigError("expected a number, got '" + v + "'", line);
}

std::uint64_t to_uint(const std::string& v, int line) {
  try {
    std::size_t used = 0;
    if (!v.empty() && v[0] != '-') {
      const auto u = std::stoull(v, &used);
      if (used == v.size()) return u;
    }
  } catch (const std::logic_error&) {
  }
  throw ConfigError("expected a non-negative integer, got '" + v + "'", line);
}

std::string resolve(const std::string& base_dir, const std::string& path) {
  std::filesystem::path p(path);
  if (p.is_absolute()) return path;
  return (std::filesystem::path(base_dir) / p).lexically_normal().string();
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::string& base_dir) {
  ExperimentConfig cfg;
  using Setter = std::function<void(const std::string&, int)>;
  const std::map<std::string, Setter> setters = {
      {"learning_rate", [&](const std::string& v, int l) { cfg.trainer.learning_rate = to_real(v, l); }},
      {"beta1", [&](const std::string& v, int l) { cfg.trainer.beta1 = to_real(v, l); }},
      {"beta2", [&](const std::string& v, int l) { cfg.trainer.beta2 = to_real(v, l); }},
      {"epsilon", [&](const std::string& v, int l) { cfg.trainer.epsilon = to_real(v, l); }},
      {"epochs", [&](const std::string& v, int l) { cfg.trainer.epochs = to_uint(v, l); }},
      {"decay_factor", [&](const std::string& v, int l) { cfg.trainer.decay_factor = to_real(v, l); }},
      {"batch_size", [&](const std::string& v, int l) { cfg.trainer.batch_size = to_uint(v, l); }},
      {"seed",
       [&](const std::string& v, int l) {
         cfg.trainer.seed = to_uint(v, l);
         cfg.model.init_seed = cfg.trainer.seed;
       }},
      {"decay_epochs",
       [&](const std::string& v, int l) {
         std::string spaced = v;
         for (char& ch : spaced)
           if (ch == ',') ch = ' ';
         std::istringstream in(spaced);
         std::string a, b, extra;
         if (!(in >> a >> b) || (in >> extra)) throw ConfigError("decay_epochs needs two integers", l);
         cfg.trainer.decay_epochs = {to_uint(a, l), to_uint(b, l)};
       }},
      {"variant",
       [&](const std::string& v, int l) {
         try {
           cfg.model.variant = parse_variant(v);
         } catch (const ConfigError& e) {
           throw ConfigError(e.detail(), l);
         }
         cfg.trainer.variant = cfg.model.variant;
       }},
      {"base_channels", [&](const std::string& v, int l) { cfg.model.base_channels = to_uint(v, l); }},
      {"k_neighbors", [&](const std::string& v, int l) { cfg.model.k_neighbors = to_uint(v, l); }},
      {"a_min", [&](const std::string& v, int l) { cfg.a_min = to_real(v, l); }},
      {"manifest", [&](const std::string& v, int) { cfg.manifest = resolve(base_dir, v); }},
      {"eval_manifest", [&](const std::string& v, int) { cfg.eval_manifest = resolve(base_dir, v); }},
  };

  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    const std::string content = trim(raw);
    if (content.empty()) continue;
    const auto eq = content.find('=');
    if (eq == std::string::npos) throw ConfigError("expected 'key = value'", line);
    const std::string key = trim(content.substr(0, eq));
    const std::string value = trim(content.substr(eq + 1));
    auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError("unknown key '" + key + "'", line);
    if (value.empty()) throw ConfigError("missing value for '" + key + "'", line);
    it->second(value, line);
  }
  try {
    cfg.trainer.validate();
  } catch (const ContractError& e) {
    throw ConfigError(e.what(), 0);
  }
  if (cfg.model.base_channels == 0) throw ConfigError("base_channels must be positive", 0);
  if (cfg.model.k_neighbors == 0) throw ConfigError("k_neighbors must be at least 1", 0);
  if (cfg.a_min && *cfg.a_min < 1.0) throw ConfigError("a_min must be at least 1", 0);
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  const auto dir = std::filesystem::path(path).parent_path().string();
  return parse_config(buf.str(), dir.empty() ? "." : dir);
}

}  // namespace hdnet
