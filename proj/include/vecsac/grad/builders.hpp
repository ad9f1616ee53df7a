#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "vecsac/grad/network.hpp"

namespace vecsac {

enum class Activation { elu, relu };

/// Four linear layers with layer norm before each hidden activation; the two
/// inner hidden blocks are wrapped in residual spans.
///
///   linear(in,h) ln act | [linear(h,h) ln act] | [linear(h,h) ln act] | linear(h,out)
std::vector<LayerSpec> residual_mlp(Index in_dim, Index hidden, Index out_dim, Activation act);

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for linear layers, unit gain and
/// zero shift for layer norm. The final linear layer is drawn from
/// Uniform(-last_scale, last_scale) when last_scale > 0.
template <typename Scalar>
void init_params(Network<Scalar>& net, Rng& rng, Scalar last_scale = Scalar(0)) {
  std::size_t last_linear = 0;
  for (std::size_t i = 0; i < net.layers().size(); ++i)
    if (net.layers()[i].kind == LayerKind::linear) last_linear = i;

  for (std::size_t i = 0; i < net.layers().size(); ++i) {
    const auto& spec = net.layers()[i];
    if (spec.kind == LayerKind::linear) {
      Scalar bound = Scalar(1) / std::sqrt(Scalar(spec.in_dim));
      if (i == last_linear && last_scale > 0) bound = last_scale;
      std::uniform_real_distribution<Scalar> u(-bound, bound);
      auto& b = net.block_mut(net.block_of_layer(i));
      for (Index k = 0; k < b.weights.size(); ++k) b.weights.data()[k] = u(rng);
      for (Index k = 0; k < b.bias.size(); ++k) b.bias[k] = u(rng);
    } else if (spec.kind == LayerKind::layer_norm) {
      auto& b = net.block_mut(net.block_of_layer(i));
      b.weights.setOnes();
      b.bias.setZero();
    }
  }
}

/// Index of the last linear layer's block (the output projection).
template <typename Scalar>
std::size_t output_block(const Network<Scalar>& net) {
  for (std::size_t i = net.layers().size(); i-- > 0;)
    if (net.layers()[i].kind == LayerKind::linear) return net.block_of_layer(i);
  throw ConfigError("network has no linear layer");
}

}  // namespace vecsac
