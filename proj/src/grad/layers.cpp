#include <string>
#include <vector>

#include "vecsac/grad/builders.hpp"
#include "vecsac/grad/network.hpp"

namespace vecsac {

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::linear: return "linear";
    case LayerKind::layer_norm: return "layer_norm";
    case LayerKind::elu: return "elu";
    case LayerKind::relu: return "relu";
    case LayerKind::residual_begin: return "residual_begin";
    case LayerKind::residual_end: return "residual_end";
  }
  return "?";
}

LayerKind layer_kind_from_string(std::string_view name) {
  for (auto k : {LayerKind::linear, LayerKind::layer_norm, LayerKind::elu, LayerKind::relu,
                 LayerKind::residual_begin, LayerKind::residual_end})
    if (to_string(k) == name) return k;
  throw ConfigError("unknown layer kind '" + std::string(name) + "'");
}

void validate_layers(std::span<const LayerSpec> layers) {
  std::vector<Index> open;  // widths at each open residual span
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    const std::string where = "layer " + std::to_string(i) + " (" + std::string(to_string(l.kind)) + ")";
    if (l.in_dim <= 0 || l.out_dim <= 0) throw ConfigError(where + ": dimensions must be positive");
    if (l.kind != LayerKind::linear && l.in_dim != l.out_dim)
      throw ConfigError(where + ": in_dim must equal out_dim");
    if (i > 0 && layers[i - 1].out_dim != l.in_dim)
      throw ConfigError(where + ": in_dim " + std::to_string(l.in_dim) +
                        " does not match previous out_dim " + std::to_string(layers[i - 1].out_dim));
    if (l.kind == LayerKind::residual_begin) open.push_back(l.in_dim);
    if (l.kind == LayerKind::residual_end) {
      if (open.empty()) throw ConfigError(where + ": residual_end without residual_begin");
      if (open.back() != l.in_dim) throw ConfigError(where + ": residual span changes width");
      open.pop_back();
    }
  }
  if (!open.empty()) throw ConfigError("unterminated residual span");
}

std::vector<LayerSpec> residual_mlp(Index in_dim, Index hidden, Index out_dim, Activation act) {
  const LayerKind a = act == Activation::elu ? LayerKind::elu : LayerKind::relu;
  std::vector<LayerSpec> l;
  l.push_back({LayerKind::linear, in_dim, hidden});
  l.push_back({LayerKind::layer_norm, hidden, hidden});
  l.push_back({a, hidden, hidden});
  for (int block = 0; block < 2; ++block) {
    l.push_back({LayerKind::residual_begin, hidden, hidden});
    l.push_back({LayerKind::linear, hidden, hidden});
    l.push_back({LayerKind::layer_norm, hidden, hidden});
    l.push_back({a, hidden, hidden});
    l.push_back({LayerKind::residual_end, hidden, hidden});
  }
  l.push_back({LayerKind::linear, hidden, out_dim});
  return l;
}

}  // namespace vecsac
