#include "knitpat/model/weights_registry.hpp"

#include <array>
#include <fstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "binary_io.hpp"

namespace knitpat {

namespace fs = std::filesystem;
using nlohmann::json;

namespace detail {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw ModelError("cannot write " + path.string());
  }
  fs::rename(tmp, path);
}

}  // namespace detail

namespace {

constexpr std::string_view kBackboneMagic = "KPBB";
constexpr std::uint32_t kBackboneVersion = 1;

json layers_to_json(const ConvBackbone& backbone) {
  json layers = json::array();
  for (const auto& l : backbone.layers()) {
    layers.push_back({{"in", l.in_channels},
                      {"out", l.out_channels},
                      {"kernel", l.kernel},
                      {"stride", l.stride},
                      {"relu", l.relu},
                      {"block", l.block}});
  }
  return layers;
}

}  // namespace

std::string sha256_hex(std::string_view bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw ModelError("SHA-256 computation failed");
  }
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

std::string sha256_file(const fs::path& file) { return sha256_hex(detail::read_file(file)); }

void write_backbone_file(const ConvBackbone& backbone, const fs::path& path) {
  const json header = {{"name", backbone.name()},
                       {"input_size", backbone.input_size()},
                       {"layers", layers_to_json(backbone)}};
  const std::string text = header.dump();
  detail::ByteWriter w;
  w.raw(kBackboneMagic);
  w.u32(kBackboneVersion);
  w.u64(text.size());
  w.raw(text);
  for (const auto& l : backbone.layers()) {
    w.doubles({l.weight.data(), static_cast<std::size_t>(l.weight.size())});
    w.doubles({l.bias.data(), static_cast<std::size_t>(l.bias.size())});
  }
  detail::write_file(path, w.bytes());
}

ConvBackbone read_backbone_file(const fs::path& path) {
  const std::string bytes = detail::read_file(path);
  detail::ByteReader r(bytes, path.string());
  if (r.raw(4) != kBackboneMagic) throw ModelError(path.string() + ": not a backbone file");
  const auto version = r.u32();
  if (version != kBackboneVersion) {
    throw ModelError(path.string() + ": unsupported backbone file version " +
                     std::to_string(version));
  }
  json header;
  try {
    header = json::parse(r.raw(r.u64()));
    std::vector<ConvLayer> layers;
    for (const auto& jl : header.at("layers")) {
      ConvLayer l;
      l.in_channels = jl.at("in").get<std::size_t>();
      l.out_channels = jl.at("out").get<std::size_t>();
      l.kernel = jl.at("kernel").get<std::size_t>();
      l.stride = jl.at("stride").get<std::size_t>();
      l.relu = jl.at("relu").get<bool>();
      l.block = jl.at("block").get<std::size_t>();
      l.weight.resize(static_cast<Eigen::Index>(l.out_channels),
                      static_cast<Eigen::Index>(l.kernel * l.kernel * l.in_channels));
      l.bias.resize(static_cast<Eigen::Index>(l.out_channels));
      r.doubles({l.weight.data(), static_cast<std::size_t>(l.weight.size())});
      r.doubles({l.bias.data(), static_cast<std::size_t>(l.bias.size())});
      layers.push_back(std::move(l));
    }
    if (r.remaining() != 0) throw ModelError(path.string() + ": trailing bytes");
    return ConvBackbone(header.at("name").get<std::string>(),
                        header.at("input_size").get<std::size_t>(), std::move(layers));
  } catch (const json::exception& e) {
    throw ModelError(path.string() + ": malformed backbone header: " + e.what());
  }
}

WeightsRegistry::WeightsRegistry(fs::path directory, std::map<BackboneName, WeightsEntry> entries)
    : directory_(std::move(directory)), entries_(std::move(entries)) {}

WeightsRegistry WeightsRegistry::load(const fs::path& directory) {
  const fs::path lock = directory / kWeightsLockName;
  if (!fs::exists(lock)) throw ModelError("weights registry lock file not found: " + lock.string());
  std::map<BackboneName, WeightsEntry> entries;
  try {
    const json doc = json::parse(detail::read_file(lock));
    if (doc.at("version").get<int>() != 1) {
      throw ModelError(lock.string() + ": unsupported weights.lock version");
    }
    for (const auto& [key, value] : doc.at("backbones").items()) {
      const auto name = parse_backbone_name(key);
      if (!name) throw ModelError(lock.string() + ": unknown backbone '" + key + "'");
      entries[*name] = {value.at("path").get<std::string>(), value.at("sha256").get<std::string>()};
    }
  } catch (const json::exception& e) {
    throw ModelError(lock.string() + ": malformed weights.lock: " + e.what());
  }
  return WeightsRegistry(directory, std::move(entries));
}

std::optional<WeightsEntry> WeightsRegistry::entry(BackboneName name) const {
  const auto it = entries_.find(name);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void WeightsRegistry::verify(BackboneName name) const {
  const std::string id(backbone_info(name).id);
  const auto e = entry(name);
  if (!e) {
    throw ModelError("backbone " + id + ": no entry in " +
                     (directory_ / kWeightsLockName).string());
  }
  const fs::path file = directory_ / e->file;
  if (!fs::exists(file)) {
    throw ModelError("backbone " + id + ": weights file " + file.string() +
                     " is missing (expected sha256 " + e->sha256 + ")");
  }
  const std::string actual = sha256_file(file);
  if (actual != e->sha256) {
    throw ModelError("backbone " + id + ": weights file " + file.string() +
                     " is corrupt (expected sha256 " + e->sha256 + ", found " + actual + ")");
  }
}

ConvBackbone WeightsRegistry::resolve(BackboneName name) const {
  verify(name);
  const auto e = *entry(name);
  ConvBackbone backbone = read_backbone_file(directory_ / e.file);
  const auto& info = backbone_info(name);
  if (backbone.feature_dim() != info.feature_dim) {
    throw ModelError("backbone " + std::string(info.id) + ": weights report feature_dim " +
                     std::to_string(backbone.feature_dim()) + ", registry expects " +
                     std::to_string(info.feature_dim) + " (sha256 " + e.sha256 + ")");
  }
  return backbone;
}

void write_weights_lock(const fs::path& directory,
                        const std::map<BackboneName, fs::path>& files) {
  nlohmann::ordered_json doc;
  doc["version"] = 1;
  doc["backbones"] = nlohmann::ordered_json::object();
  for (const auto& [name, rel] : files) {
    doc["backbones"][std::string(backbone_info(name).id)] = {
        {"path", rel.generic_string()}, {"sha256", sha256_file(directory / rel)}};
  }
  detail::write_file(directory / kWeightsLockName, doc.dump(2) + "\n");
}

}  // namespace knitpat
