#pragma once

#include <cmath>

#include "vecsac/errors.hpp"
#include "vecsac/grad/network.hpp"

namespace vecsac {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename Scalar>
bool grads_finite(const ParamBlock<Scalar>& b) {
  return b.weight_grad.allFinite() && b.bias_grad.allFinite();
}

namespace detail {
template <typename P, typename G, typename M>
void adam_update(P& param, G& grad, M& m, M& v, const AdamOptions& o, double c1, double c2) {
  using Scalar = typename P::Scalar;
  m = Scalar(o.beta1) * m + Scalar(1 - o.beta1) * grad;
  v = Scalar(o.beta2) * v + Scalar(1 - o.beta2) * grad.cwiseAbs2();
  param.array() -= Scalar(o.lr) * (m.array() / Scalar(c1)) /
                   ((v.array() / Scalar(c2)).sqrt() + Scalar(o.eps));
  grad.setZero();
}
}  // namespace detail

/// Bias-corrected Adam update of one block; zeroes its gradients afterwards.
/// Throws NumericFault without touching anything when a gradient is non-finite.
template <typename Scalar>
void adam_step(ParamBlock<Scalar>& b, const AdamOptions& o) {
  if (!grads_finite(b)) throw NumericFault("non-finite gradient in Adam step");
  ++b.step_count;
  const double t = static_cast<double>(b.step_count);
  const double c1 = 1.0 - std::pow(o.beta1, t);
  const double c2 = 1.0 - std::pow(o.beta2, t);
  detail::adam_update(b.weights, b.weight_grad, b.adam_m_w, b.adam_v_w, o, c1, c2);
  detail::adam_update(b.bias, b.bias_grad, b.adam_m_b, b.adam_v_b, o, c1, c2);
}

/// Steps every block of `net`. The whole step is rejected if any block holds
/// a non-finite gradient.
template <typename Scalar>
void adam_step(Network<Scalar>& net, const AdamOptions& o) {
  for (std::size_t i = 0; i < net.block_count(); ++i)
    if (!grads_finite(net.block(i)))
      throw NumericFault("non-finite gradient in Adam step, block " + std::to_string(i));
  for (std::size_t i = 0; i < net.block_count(); ++i) adam_step(net.block_mut(i), o);
}

}  // namespace vecsac
