#include <fstream>
#include <sstream>

#include "hdnet/data.hpp"
#include "hdnet/error.hpp"

namespace hdnet {

std::vector<ManifestEntry> parse_manifest(std::string_view text) {
  std::vector<ManifestEntry> entries;
  std::istringstream in{std::string(text)};
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::string seed_tok, size_tok, band_tok, extra;
    if (!(fields >> seed_tok)) continue;
    if (!(fields >> size_tok >> band_tok) || (fields >> extra)) {
      throw ConfigError("manifest entries must be 'seed size band'", number);
    }
    ManifestEntry e;
    try {
      std::size_t used = 0;
      e.seed = std::stoull(seed_tok, &used);
      if (used != seed_tok.size()) throw std::invalid_argument(seed_tok);
      e.size = std::stoul(size_tok, &used);
      if (used != size_tok.size()) throw std::invalid_argument(size_tok);
    } catch (const std::logic_error&) {
      throw ConfigError("malformed seed or size", number);
    }
    try {
      e.band = parse_band(band_tok);
    } catch (const ConfigError& err) {
      throw ConfigError(err.detail(), number);
    }
    entries.push_back(e);
  }
  return entries;
}

std::vector<ManifestEntry> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_manifest(buf.str());
  } catch (const ConfigError& err) {
    throw ConfigError(path + ": " + err.detail(), err.line());
  }
}

void write_manifest(const std::string& path, const std::vector<ManifestEntry>& entries) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest '" + path + "'");
  out << "# seed size band\n";
  for (const auto& e : entries) out << e.seed << ' ' << e.size << ' ' << band_name(e.band) << '\n';
  if (!out) throw IoError("failed writing manifest '" + path + "'");
}

std::vector<ManifestEntry> make_manifest(std::uint64_t first_seed, std::size_t count,
                                         std::size_t size) {
  static constexpr FgBand kCycle[] = {FgBand::Low, FgBand::Mid, FgBand::High};
  std::vector<ManifestEntry> entries;
  for (std::size_t i = 0; i < count; ++i) entries.push_back({first_seed + i, size, kCycle[i % 3]});
  return entries;
}

}  // namespace hdnet
