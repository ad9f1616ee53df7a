#include "vecsac/grad/serialize.hpp"

#include <filesystem>
#include <fstream>

#include "vecsac/binary_io.hpp"
#include "vecsac/key_value.hpp"

namespace vecsac {

namespace {

std::filesystem::path with_suffix(const std::filesystem::path& stem, const char* suffix) {
  return std::filesystem::path(stem.string() + suffix);
}

constexpr const char* kFormat = "vecsac-params/1";

}  // namespace

std::string encode_layers(const std::vector<LayerSpec>& layers) {
  std::string out;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (i) out += ';';
    out += std::string(to_string(layers[i].kind)) + ":" + std::to_string(layers[i].in_dim) + ":" +
           std::to_string(layers[i].out_dim);
  }
  return out;
}

std::vector<LayerSpec> decode_layers(const std::string& text) {
  std::vector<LayerSpec> layers;
  for (const auto& item : split(text, ';')) {
    auto parts = split(item, ':');
    if (parts.size() != 3) throw ConfigError("malformed layer spec '" + item + "'");
    layers.push_back({layer_kind_from_string(parts[0]), std::stol(parts[1]), std::stol(parts[2])});
  }
  return layers;
}

const Network<double>& ParamArchive::network(const std::string& name) const {
  for (const auto& [n, net] : networks)
    if (n == name) return net;
  throw ConfigError("archive has no network '" + name + "'");
}

Network<double>& ParamArchive::network(const std::string& name) {
  return const_cast<Network<double>&>(std::as_const(*this).network(name));
}

bool ParamArchive::has_network(const std::string& name) const {
  for (const auto& [n, net] : networks)
    if (n == name) return true;
  return false;
}

double ParamArchive::scalar(const std::string& name) const {
  for (const auto& [n, v] : scalars)
    if (n == name) return v;
  throw ConfigError("archive has no scalar '" + name + "'");
}

std::string ParamArchive::meta_value(const std::string& name) const {
  for (const auto& [n, v] : meta)
    if (n == name) return v;
  throw ConfigError("archive has no metadata '" + name + "'");
}

void save_archive(const std::filesystem::path& stem, const ParamArchive& archive) {
  if (stem.has_parent_path()) std::filesystem::create_directories(stem.parent_path());
  KeyValueFile kv;
  kv.set("format", kFormat);
  kv.set("blob", with_suffix(stem, ".bin").filename().string());

  std::string scalar_names;
  for (std::size_t i = 0; i < archive.scalars.size(); ++i)
    scalar_names += (i ? "," : "") + archive.scalars[i].first;
  kv.set("scalars", scalar_names);

  kv.set("network.count", std::to_string(archive.networks.size()));
  for (std::size_t i = 0; i < archive.networks.size(); ++i) {
    const auto& [name, net] = archive.networks[i];
    const std::string p = "network." + std::to_string(i) + ".";
    kv.set(p + "name", name);
    kv.set(p + "layers", encode_layers(net.layers()));
    std::string steps;
    for (std::size_t b = 0; b < net.block_count(); ++b)
      steps += (b ? "," : "") + std::to_string(net.block(b).step_count);
    kv.set(p + "adam_steps", steps);
  }
  for (const auto& [k, v] : archive.meta) kv.set("meta." + k, v);
  kv.write(with_suffix(stem, ".manifest"));

  std::ofstream blob(with_suffix(stem, ".bin"), std::ios::binary);
  if (!blob) throw ConfigError("cannot write " + with_suffix(stem, ".bin").string());
  for (const auto& [name, v] : archive.scalars) write_le_f64(blob, v);
  for (const auto& [name, net] : archive.networks) {
    for (const auto& b : net.blocks()) {
      write_le_block(blob, b.weights);
      write_le_block(blob, b.bias);
      write_le_block(blob, b.adam_m_w);
      write_le_block(blob, b.adam_v_w);
      write_le_block(blob, b.adam_m_b);
      write_le_block(blob, b.adam_v_b);
    }
  }
  if (!blob) throw ConfigError("write failed for " + with_suffix(stem, ".bin").string());
}

ParamArchive load_archive(const std::filesystem::path& stem) {
  const auto manifest_path = with_suffix(stem, ".manifest");
  if (!std::filesystem::exists(manifest_path))
    throw ConfigError("missing parameter manifest: expected " + manifest_path.string());
  auto kv = KeyValueFile::read(manifest_path);
  if (kv.get("format") != kFormat) throw ConfigError("unsupported parameter format '" + kv.get("format") + "'");

  ParamArchive archive;
  const auto blob_path = stem.parent_path() / kv.get("blob");
  std::ifstream blob(blob_path, std::ios::binary);
  if (!blob) throw ConfigError("missing parameter blob: expected " + blob_path.string());

  const auto scalar_text = kv.get("scalars");
  if (!scalar_text.empty())
    for (const auto& name : split(scalar_text, ',')) archive.scalars.emplace_back(name, read_le_f64(blob));

  const auto count = std::stoul(kv.get("network.count"));
  for (std::size_t i = 0; i < count; ++i) {
    const std::string p = "network." + std::to_string(i) + ".";
    Network<double> net(decode_layers(kv.get(p + "layers")));
    auto steps = split(kv.get(p + "adam_steps"), ',');
    if (net.block_count() > 0 && steps.size() != net.block_count())
      throw ConfigError("adam step list does not match block count for " + kv.get(p + "name"));
    for (std::size_t b = 0; b < net.block_count(); ++b) {
      auto& blk = net.block_mut(b);
      read_le_block(blob, blk.weights);
      read_le_block(blob, blk.bias);
      read_le_block(blob, blk.adam_m_w);
      read_le_block(blob, blk.adam_v_w);
      read_le_block(blob, blk.adam_m_b);
      read_le_block(blob, blk.adam_v_b);
      blk.step_count = std::stoull(steps[b]);
    }
    archive.networks.emplace_back(kv.get(p + "name"), std::move(net));
  }
  if (blob.peek() != std::char_traits<char>::eof()) throw ConfigError("trailing bytes in " + blob_path.string());

  for (const auto& [k, v] : kv.entries())
    if (k.rfind("meta.", 0) == 0) archive.meta.emplace_back(k.substr(5), v);
  return archive;
}

}  // namespace vecsac
