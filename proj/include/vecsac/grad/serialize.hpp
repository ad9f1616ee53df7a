#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "vecsac/grad/network.hpp"

namespace vecsac {

/// A set of named networks and scalar parameters plus free-form metadata.
///
/// On disk: `<stem>.manifest` lists layer specs, shapes, Adam step counts,
/// scalar names and metadata as `key = value` text; `<stem>.bin` holds every
/// real value as little-endian float64, in declaration order:
/// scalars, then per network and block: weights, bias, adam_m_w, adam_v_w,
/// adam_m_b, adam_v_b. Gradients are not stored.
struct ParamArchive {
  std::vector<std::pair<std::string, Network<double>>> networks;
  std::vector<std::pair<std::string, double>> scalars;
  std::vector<std::pair<std::string, std::string>> meta;

  const Network<double>& network(const std::string& name) const;
  Network<double>& network(const std::string& name);
  bool has_network(const std::string& name) const;
  double scalar(const std::string& name) const;
  std::string meta_value(const std::string& name) const;
};

void save_archive(const std::filesystem::path& stem, const ParamArchive& archive);
ParamArchive load_archive(const std::filesystem::path& stem);

std::string encode_layers(const std::vector<LayerSpec>& layers);
std::vector<LayerSpec> decode_layers(const std::string& text);

}  // namespace vecsac
