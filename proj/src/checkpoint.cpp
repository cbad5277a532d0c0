#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "hdnet/error.hpp"
#include "hdnet/trainer.hpp"

namespace hdnet {

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

constexpr std::uint32_t kMaxNameLength = 1u << 16;
constexpr std::uint32_t kMaxRank = 8;

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof value);
}

template <typename T>
T get(std::istream& in, const std::string& path) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof value)) {
    throw IoError("truncated tensor file '" + path + "'");
  }
  return value;
}

std::string meta_path(const std::string& checkpoint) { return checkpoint + ".meta"; }

}  // namespace

void write_tensor_file(const std::string& path, const char magic[4], const NamedTensors& tensors) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path + "'");
  out.write(magic, 4);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) put<std::uint64_t>(out, d);
    out.write(reinterpret_cast<const char*>(t.data().data()),
              static_cast<std::streamsize>(t.numel() * sizeof(double)));
  }
  if (!out) throw IoError("failed writing '" + path + "'");
}

NamedTensors read_tensor_file(const std::string& path, const char magic[4]) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  char got[4];
  if (!in.read(got, 4) || std::memcmp(got, magic, 4) != 0) {
    throw VersionError("'" + path + "' does not start with magic " + std::string(magic, 4));
  }
  const auto version = get<std::uint32_t>(in, path);
  if (version != kCheckpointVersion) {
    throw VersionError("'" + path + "' has version " + std::to_string(version) + ", expected " +
                       std::to_string(kCheckpointVersion));
  }
  const auto count = get<std::uint32_t>(in, path);
  NamedTensors tensors;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = get<std::uint32_t>(in, path);
    if (len > kMaxNameLength) throw IoError("malformed tensor name in '" + path + "'");
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) throw IoError("truncated tensor file '" + path + "'");
    const auto rank = get<std::uint32_t>(in, path);
    if (rank > kMaxRank) throw IoError("malformed rank for '" + name + "' in '" + path + "'");
    Shape shape(rank);
    for (auto& d : shape) d = get<std::uint64_t>(in, path);
    std::vector<double> values(shape_numel(shape));
    if (!in.read(reinterpret_cast<char*>(values.data()),
                 static_cast<std::streamsize>(values.size() * sizeof(double)))) {
      throw IoError("truncated data for '" + name + "' in '" + path + "'");
    }
    tensors.emplace_back(std::move(name), Tensor(std::move(shape), std::move(values)));
  }
  return tensors;
}

void save_checkpoint(const std::string& path, const GeneratorParams& params) {
  write_tensor_file(path, "HDNC", params.entries());
  std::ofstream meta(meta_path(path), std::ios::trunc);
  if (!meta) throw IoError("cannot write '" + meta_path(path) + "'");
  meta << "k_neighbors = " << params.config().k_neighbors << '\n';
}

GeneratorParams load_checkpoint(const std::string& path) {
  NamedTensors tensors = read_tensor_file(path, "HDNC");
  std::size_t k = 1;
  if (std::ifstream meta(meta_path(path)); meta) {
    std::string line;
    while (std::getline(meta, line)) {
      std::istringstream fields(line);
      std::string key, eq;
      std::size_t value = 0;
      if (fields >> key >> eq >> value && key == "k_neighbors" && eq == "=") k = value;
    }
  }
  GeneratorParams params;
  params.config() = infer_generator_config(tensors, k);
  for (auto& [name, t] : tensors) params.add(name, t);
  return params;
}

void save_adam_state(const std::string& path, const AdamState& state) {
  NamedTensors tensors;
  tensors.emplace_back("adam.step", Tensor::scalar(static_cast<double>(state.step)));
  for (std::size_t i = 0; i < state.first_moment.size(); ++i) {
    const auto& [name, m] = state.first_moment[i];
    tensors.emplace_back(name + ".m", Tensor({m.size()}, m));
    tensors.emplace_back(name + ".v", Tensor({m.size()}, state.second_moment[i].second));
  }
  write_tensor_file(path, "HDNA", tensors);
}

AdamState load_adam_state(const std::string& path) {
  NamedTensors tensors = read_tensor_file(path, "HDNA");
  if (tensors.empty() || tensors[0].first != "adam.step" || (tensors.size() - 1) % 2 != 0) {
    throw VersionError("'" + path + "' is not an optimizer state file");
  }
  AdamState state;
  state.step = static_cast<std::uint64_t>(tensors[0].second.item());
  for (std::size_t i = 1; i < tensors.size(); i += 2) {
    const std::string& m_name = tensors[i].first;
    const std::string& v_name = tensors[i + 1].first;
    if (m_name.size() < 2 || m_name.substr(m_name.size() - 2) != ".m" ||
        v_name != m_name.substr(0, m_name.size() - 2) + ".v") {
      throw VersionError("unexpected optimizer tensor pair in '" + path + "'");
    }
    const std::string base = m_name.substr(0, m_name.size() - 2);
    state.first_moment.emplace_back(base, tensors[i].second.values());
    state.second_moment.emplace_back(base, tensors[i + 1].second.values());
  }
  return state;
}

}  // namespace hdnet
