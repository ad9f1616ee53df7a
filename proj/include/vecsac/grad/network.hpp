#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vecsac/errors.hpp"
#include "vecsac/grad/tensor.hpp"

namespace vecsac {

enum class LayerKind { linear, layer_norm, elu, relu, residual_begin, residual_end };

std::string_view to_string(LayerKind kind);
LayerKind layer_kind_from_string(std::string_view name);

struct LayerSpec {
  LayerKind kind;
  Index in_dim;
  Index out_dim;

  bool has_params() const { return kind == LayerKind::linear || kind == LayerKind::layer_norm; }
  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// Parameters of one linear or layer-norm layer, their gradients and Adam
/// moments. For layer norm, `weights` is the 1 x dim gain and `bias` the shift.
template <typename Scalar>
struct ParamBlock {
  Matrix<Scalar> weights;
  Vector<Scalar> bias;
  Matrix<Scalar> weight_grad;
  Vector<Scalar> bias_grad;
  Matrix<Scalar> adam_m_w, adam_v_w;
  Vector<Scalar> adam_m_b, adam_v_b;
  std::uint64_t step_count = 0;

  ParamBlock() = default;
  ParamBlock(Index rows, Index cols, Index bias_size)
      : weights(Matrix<Scalar>::Zero(rows, cols)),
        bias(Vector<Scalar>::Zero(bias_size)),
        weight_grad(Matrix<Scalar>::Zero(rows, cols)),
        bias_grad(Vector<Scalar>::Zero(bias_size)),
        adam_m_w(Matrix<Scalar>::Zero(rows, cols)),
        adam_v_w(Matrix<Scalar>::Zero(rows, cols)),
        adam_m_b(Vector<Scalar>::Zero(bias_size)),
        adam_v_b(Vector<Scalar>::Zero(bias_size)) {}

  Index size() const { return weights.size() + bias.size(); }

  void zero_grad() {
    weight_grad.setZero();
    bias_grad.setZero();
  }

  /// Parameter `k` in flat (weights then bias) order.
  Scalar& param(Index k) {
    return k < weights.size() ? weights.data()[k] : bias.data()[k - weights.size()];
  }
  Scalar grad(Index k) const {
    return k < weights.size() ? weight_grad.data()[k] : bias_grad.data()[k - weights.size()];
  }
};

inline constexpr double kLayerNormEpsilon = 1e-5;
inline constexpr Index kNarrowLinear = 16;

/// Activation record of one forward pass.
template <typename Scalar>
struct Tape {
  std::vector<Matrix<Scalar>> inputs;      // inputs[i] feeds layer i
  std::vector<Matrix<Scalar>> normalized;  // layer-norm x-hat, empty elsewhere
  std::vector<Vector<Scalar>> inv_std;     // layer-norm 1/sqrt(var + eps)
  std::uint64_t network_id = 0;
  std::uint64_t version = 0;
};

namespace detail {
inline std::uint64_t next_network_id() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}
}  // namespace detail

/// Any NaN or Inf entry makes the sum non-finite; finite entries large
/// enough to overflow the sum are reported as well.
template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& x) {
  return std::isfinite(x.sum());
}

/// Checks nesting and dimension consistency; throws ConfigError.
void validate_layers(std::span<const LayerSpec> layers);

/// Feed-forward stack of the six supported layer kinds with exact
/// reverse-mode gradients.
template <typename Scalar>
class Network {
 public:
  Network() = default;

  explicit Network(std::vector<LayerSpec> layers) : layers_(std::move(layers)) {
    validate_layers(layers_);
    block_of_layer_.assign(layers_.size(), -1);
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const auto& l = layers_[i];
      if (l.kind == LayerKind::linear) {
        block_of_layer_[i] = static_cast<int>(blocks_.size());
        blocks_.emplace_back(l.out_dim, l.in_dim, l.out_dim);
      } else if (l.kind == LayerKind::layer_norm) {
        block_of_layer_[i] = static_cast<int>(blocks_.size());
        ParamBlock<Scalar> b(1, l.in_dim, l.in_dim);
        b.weights.setOnes();
        blocks_.push_back(std::move(b));
      }
    }
  }

  Network(const Network& other)
      : layers_(other.layers_),
        blocks_(other.blocks_),
        block_of_layer_(other.block_of_layer_),
        id_(detail::next_network_id()),
        version_(other.version_) {}

  Network& operator=(const Network& other) {
    if (this != &other) {
      layers_ = other.layers_;
      blocks_ = other.blocks_;
      block_of_layer_ = other.block_of_layer_;
      id_ = detail::next_network_id();
      ++version_;
    }
    return *this;
  }

  Network(Network&&) noexcept = default;
  Network& operator=(Network&&) noexcept = default;

  const std::vector<LayerSpec>& layers() const { return layers_; }
  std::span<const ParamBlock<Scalar>> blocks() const { return blocks_; }
  std::size_t block_count() const { return blocks_.size(); }
  const ParamBlock<Scalar>& block(std::size_t i) const { return blocks_[i]; }

  /// Mutable access invalidates outstanding tapes.
  ParamBlock<Scalar>& block_mut(std::size_t i) {
    ++version_;
    return blocks_[i];
  }

  /// Block index of layer `i`, or -1 when the layer has no parameters.
  int block_of_layer(std::size_t i) const { return block_of_layer_[i]; }

  Index input_dim() const { return layers_.empty() ? 0 : layers_.front().in_dim; }
  Index output_dim() const { return layers_.empty() ? 0 : layers_.back().out_dim; }
  std::uint64_t version() const { return version_; }

  Index parameter_count() const {
    Index n = 0;
    for (const auto& b : blocks_) n += b.size();
    return n;
  }

  void zero_grad() {
    for (auto& b : blocks_) b.zero_grad();
  }

  /// Runs the stack on a batch (one sample per row). When `tape` is given it
  /// records what backward() needs.
  Matrix<Scalar> forward(const Matrix<Scalar>& input, Tape<Scalar>* tape = nullptr) const;

  /// Accumulates parameter gradients into the blocks and returns dL/dinput.
  Matrix<Scalar> backward(const Tape<Scalar>& tape, const Matrix<Scalar>& output_grad) {
    return backward_impl(tape, output_grad, true);
  }

  /// dL/dinput only; parameter gradients are left untouched.
  Matrix<Scalar> input_gradient(const Tape<Scalar>& tape, const Matrix<Scalar>& output_grad) const {
    return const_cast<Network*>(this)->backward_impl(tape, output_grad, false);
  }

  /// target <- (1 - tau) target + tau online, for every parameter.
  void soft_update_from(const Network& online, Scalar tau);

  bool same_architecture(const Network& other) const { return layers_ == other.layers_; }

 private:
  Matrix<Scalar> backward_impl(const Tape<Scalar>& tape, const Matrix<Scalar>& output_grad,
                               bool accumulate);

  std::vector<LayerSpec> layers_;
  std::vector<ParamBlock<Scalar>> blocks_;
  std::vector<int> block_of_layer_;
  std::uint64_t id_ = detail::next_network_id();
  std::uint64_t version_ = 0;
};

template <typename Scalar>
Matrix<Scalar> Network<Scalar>::forward(const Matrix<Scalar>& input, Tape<Scalar>* tape) const {
  if (layers_.empty()) throw ConfigError("forward on an empty network");
  if (input.cols() != input_dim())
    throw ConfigError("input has " + std::to_string(input.cols()) + " columns, network expects " +
                      std::to_string(input_dim()));
  if (tape) {
    tape->inputs.assign(layers_.size(), Matrix<Scalar>());
    tape->normalized.assign(layers_.size(), Matrix<Scalar>());
    tape->inv_std.assign(layers_.size(), Vector<Scalar>());
    tape->network_id = id_;
    tape->version = version_;
  }

  Matrix<Scalar> x = input;
  std::vector<Matrix<Scalar>> skips;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& spec = layers_[i];
    if (tape) tape->inputs[i] = x;
    switch (spec.kind) {
      case LayerKind::linear: {
        const auto& b = blocks_[block_of_layer_[i]];
        Matrix<Scalar> y(x.rows(), b.weights.rows());
        if (b.weights.rows() <= kNarrowLinear) {
          // Output heads: each column is its own product, so a column's value
          // does not depend on how many heads the layer has.
          for (Index j = 0; j < y.cols(); ++j) y.col(j).noalias() = x * b.weights.row(j).transpose();
        } else {
          y.noalias() = x * b.weights.transpose();
        }
        y.rowwise() += b.bias.transpose();
        x = std::move(y);
        break;
      }
      case LayerKind::layer_norm: {
        const auto& b = blocks_[block_of_layer_[i]];
        const Index n = x.cols();
        Vector<Scalar> mean = x.rowwise().mean();
        Matrix<Scalar> centered = x.colwise() - mean;
        Vector<Scalar> var = centered.array().square().rowwise().sum() / Scalar(n);
        Vector<Scalar> inv = (var.array() + Scalar(kLayerNormEpsilon)).rsqrt();
        Matrix<Scalar> xhat = centered.array().colwise() * inv.array();
        Matrix<Scalar> y = xhat.array().rowwise() * b.weights.row(0).array();
        y.rowwise() += b.bias.transpose();
        if (tape) {
          tape->normalized[i] = std::move(xhat);
          tape->inv_std[i] = std::move(inv);
        }
        x = std::move(y);
        break;
      }
      case LayerKind::elu:
        x = (x.array() > Scalar(0)).select(x, x.array().exp() - Scalar(1));
        break;
      case LayerKind::relu:
        x = x.cwiseMax(Scalar(0));
        break;
      case LayerKind::residual_begin:
        skips.push_back(x);
        break;
      case LayerKind::residual_end:
        x += skips.back();
        skips.pop_back();
        break;
    }
    if (!all_finite(x)) throw NumericFault("non-finite forward output", i);
  }
  return x;
}

template <typename Scalar>
Matrix<Scalar> Network<Scalar>::backward_impl(const Tape<Scalar>& tape,
                                              const Matrix<Scalar>& output_grad, bool accumulate) {
  if (tape.network_id != id_ || tape.version != version_ || tape.inputs.size() != layers_.size())
    throw ContractViolation("stale tape: parameters changed since forward");
  if (output_grad.rows() != tape.inputs.front().rows() || output_grad.cols() != output_dim())
    throw ConfigError("output gradient shape does not match forward output");

  Matrix<Scalar> g = output_grad;
  std::vector<Matrix<Scalar>> skip_grads;
  for (std::size_t ii = layers_.size(); ii-- > 0;) {
    const auto& spec = layers_[ii];
    const Matrix<Scalar>& x = tape.inputs[ii];
    switch (spec.kind) {
      case LayerKind::linear: {
        auto& b = blocks_[block_of_layer_[ii]];
        if (accumulate) {
          b.weight_grad.noalias() += g.transpose() * x;
          b.bias_grad += g.colwise().sum().transpose();
        }
        g = g * b.weights;
        break;
      }
      case LayerKind::layer_norm: {
        auto& b = blocks_[block_of_layer_[ii]];
        const Matrix<Scalar>& xhat = tape.normalized[ii];
        const Vector<Scalar>& inv = tape.inv_std[ii];
        if (accumulate) {
          b.weight_grad.row(0) += (g.array() * xhat.array()).colwise().sum().matrix();
          b.bias_grad += g.colwise().sum().transpose();
        }
        const Scalar n = Scalar(x.cols());
        Matrix<Scalar> dxhat = g.array().rowwise() * b.weights.row(0).array();
        Vector<Scalar> sum_d = dxhat.rowwise().sum();
        Vector<Scalar> sum_dx = (dxhat.array() * xhat.array()).rowwise().sum();
        Matrix<Scalar> dx = (n * dxhat.array()).colwise() - sum_d.array();
        dx.array() -= xhat.array().colwise() * sum_dx.array();
        dx.array().colwise() *= inv.array() / n;
        g = std::move(dx);
        break;
      }
      case LayerKind::elu:
        g.array() *= x.array().min(Scalar(0)).exp();
        break;
      case LayerKind::relu:
        g.array() *= (x.array() > Scalar(0)).template cast<Scalar>();
        break;
      case LayerKind::residual_end:
        skip_grads.push_back(g);
        break;
      case LayerKind::residual_begin:
        g += skip_grads.back();
        skip_grads.pop_back();
        break;
    }
  }
  return g;
}

template <typename Scalar>
void Network<Scalar>::soft_update_from(const Network& online, Scalar tau) {
  if (!same_architecture(online)) throw ConfigError("soft update between different architectures");
  ++version_;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    auto& t = blocks_[i];
    const auto& o = online.blocks_[i];
    t.weights = (Scalar(1) - tau) * t.weights + tau * o.weights;
    t.bias = (Scalar(1) - tau) * t.bias + tau * o.bias;
  }
}

/// Smallest |pre-activation| seen by any ReLU layer in a tape; used to keep
/// finite-difference checks away from kinks.
template <typename Scalar>
Scalar min_relu_margin(const Network<Scalar>& net, const Tape<Scalar>& tape) {
  Scalar m = std::numeric_limits<Scalar>::infinity();
  for (std::size_t i = 0; i < net.layers().size(); ++i)
    if (net.layers()[i].kind == LayerKind::relu)
      m = std::min(m, tape.inputs[i].cwiseAbs().minCoeff());
  return m;
}

}  // namespace vecsac
