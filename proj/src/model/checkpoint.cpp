#include "knitpat/model/checkpoint.hpp"

#include <nlohmann/json.hpp>

#include "binary_io.hpp"
#include "knitpat/model/weights_registry.hpp"

namespace knitpat {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::string_view kMagic = "KPCK";
constexpr std::size_t kDigestChars = 64;

json spec_json(const ClassifierSpec& spec) {
  return {{"backbone",
           {{"name", backbone_info(spec.backbone.name).id},
            {"weights_source", spec.backbone.weights_source},
            {"feature_dim", spec.backbone.feature_dim}}},
          {"head",
           {{"widths", spec.head.widths},
            {"dropout_rate", spec.head.dropout_rate},
            {"use_batch_norm", spec.head.use_batch_norm},
            {"num_classes", spec.head.num_classes}}},
          {"freeze", to_string(spec.freeze)}};
}

ClassifierSpec spec_from(const json& j) {
  ClassifierSpec spec;
  const auto& b = j.at("backbone");
  const auto name = parse_backbone_name(b.at("name").get<std::string>());
  if (!name) throw ModelError("unknown backbone '" + b.at("name").get<std::string>() + "'");
  spec.backbone = {*name, b.at("weights_source").get<std::string>(),
                   b.at("feature_dim").get<std::size_t>()};
  const auto& h = j.at("head");
  spec.head.widths = h.at("widths").get<std::vector<std::size_t>>();
  spec.head.dropout_rate = h.at("dropout_rate").get<double>();
  spec.head.use_batch_norm = h.at("use_batch_norm").get<bool>();
  spec.head.num_classes = h.at("num_classes").get<std::size_t>();
  const auto freeze = parse_freeze_policy(j.at("freeze").get<std::string>());
  if (!freeze) throw ModelError("unknown freeze policy '" + j.at("freeze").get<std::string>() + "'");
  spec.freeze = *freeze;
  return spec;
}

template <typename Derived>
void put(detail::ByteWriter& w, const Eigen::PlainObjectBase<Derived>& m) {
  w.doubles({m.data(), static_cast<std::size_t>(m.size())});
}

template <typename Derived>
void get(detail::ByteReader& r, Eigen::PlainObjectBase<Derived>& m) {
  r.doubles({m.data(), static_cast<std::size_t>(m.size())});
}

}  // namespace

std::string spec_to_json(const ClassifierSpec& spec) { return spec_json(spec).dump(); }

ClassifierSpec spec_from_json(const std::string& text) {
  try {
    return spec_from(json::parse(text));
  } catch (const json::exception& e) {
    throw ModelError(std::string("malformed classifier spec: ") + e.what());
  }
}

void save_checkpoint(const ClassifierModel& model, const fs::path& path) {
  json layers = json::array();
  for (const auto& l : model.backbone().layers()) {
    layers.push_back({{"in", l.in_channels},
                      {"out", l.out_channels},
                      {"kernel", l.kernel},
                      {"stride", l.stride},
                      {"relu", l.relu},
                      {"block", l.block}});
  }
  const json header = {{"format", "knitpat-checkpoint"},
                       {"spec", spec_json(model.spec())},
                       {"backbone",
                        {{"name", model.backbone().name()},
                         {"input_size", model.backbone().input_size()},
                         {"layers", layers}}}};
  const std::string text = header.dump();

  detail::ByteWriter w;
  w.raw(kMagic);
  w.u32(kCheckpointVersion);
  w.u64(text.size());
  w.raw(text);
  for (const auto& l : model.backbone().layers()) {
    put(w, l.weight);
    put(w, l.bias);
  }
  for (const auto& block : model.head().blocks()) {
    put(w, block.dense.weight);
    put(w, block.dense.bias);
    if (block.norm) {
      put(w, block.norm->gamma);
      put(w, block.norm->beta);
      put(w, block.norm->moving_mean);
      put(w, block.norm->moving_variance);
    }
  }
  put(w, model.head().output().weight);
  put(w, model.head().output().bias);
  w.raw(sha256_hex(std::string_view(w.bytes())));
  detail::write_file(path, w.bytes());
}

ClassifierModel load_checkpoint(const fs::path& path) {
  if (!fs::exists(path)) throw ModelError("checkpoint not found: " + path.string());
  const std::string bytes = detail::read_file(path);
  if (bytes.size() < kDigestChars + 16) throw ModelError(path.string() + ": file is truncated");
  const std::string_view body(bytes.data(), bytes.size() - kDigestChars);
  const std::string_view digest(bytes.data() + body.size(), kDigestChars);
  detail::ByteReader r(body, path.string());
  if (r.raw(4) != kMagic) throw ModelError(path.string() + ": not a checkpoint archive");
  const auto version = r.u32();
  if (version != kCheckpointVersion) {
    throw ModelError(path.string() + ": checkpoint version " + std::to_string(version) +
                     " is not readable by this build (expects " +
                     std::to_string(kCheckpointVersion) + ")");
  }
  if (sha256_hex(body) != digest) throw ModelError(path.string() + ": checksum mismatch");

  try {
    const json header = json::parse(r.raw(r.u64()));
    const ClassifierSpec spec = spec_from(header.at("spec"));
    std::vector<ConvLayer> layers;
    for (const auto& jl : header.at("backbone").at("layers")) {
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
      get(r, l.weight);
      get(r, l.bias);
      layers.push_back(std::move(l));
    }
    ConvBackbone backbone(header.at("backbone").at("name").get<std::string>(),
                          header.at("backbone").at("input_size").get<std::size_t>(),
                          std::move(layers));
    RandomStream unused(0);
    Head head(spec.head, backbone.feature_dim(), unused);
    for (auto& block : head.blocks()) {
      get(r, block.dense.weight);
      get(r, block.dense.bias);
      if (block.norm) {
        get(r, block.norm->gamma);
        get(r, block.norm->beta);
        get(r, block.norm->moving_mean);
        get(r, block.norm->moving_variance);
      }
    }
    get(r, head.output().weight);
    get(r, head.output().bias);
    if (r.remaining() != 0) throw ModelError(path.string() + ": trailing bytes in checkpoint");
    return ClassifierModel(spec, std::move(backbone), std::move(head));
  } catch (const json::exception& e) {
    throw ModelError(path.string() + ": malformed checkpoint header: " + e.what());
  }
}

}  // namespace knitpat
