#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "vecsac/errors.hpp"
#include "vecsac/grad/tensor.hpp"

namespace vecsac {

inline constexpr double kLogSigmaMin = -20.0;
inline constexpr double kLogSigmaMax = 2.0;

/// Diagonal Gaussian over pre-squash actions; actions are tanh of a draw.
template <typename Scalar>
struct GaussianHead {
  Vector<Scalar> mu;
  Vector<Scalar> log_sigma;

  Index dim() const { return mu.size(); }
};

template <typename Scalar>
struct ActionSample {
  Vector<Scalar> action;
  Vector<Scalar> pre_squash;
  Scalar log_prob;
};

template <typename Scalar>
Scalar clamp_log_sigma(Scalar ls) {
  return std::clamp(ls, Scalar(kLogSigmaMin), Scalar(kLogSigmaMax));
}

/// log(1 - tanh(u)^2), stable for large |u|.
template <typename Scalar>
Scalar log_one_minus_tanh2(Scalar u) {
  const Scalar x = Scalar(-2) * u;
  const Scalar softplus = std::max(x, Scalar(0)) + std::log1p(std::exp(-std::abs(x)));
  return Scalar(2) * (Scalar(std::numbers::ln2) - u - softplus);
}

/// Reparameterized draw: pre_squash = mu + sigma * noise, action = tanh(pre_squash).
/// log_prob is the density of the squashed action (nats).
template <typename Scalar>
ActionSample<Scalar> sample(const GaussianHead<Scalar>& head, const Vector<Scalar>& noise) {
  if (noise.size() != head.dim()) throw ConfigError("noise dimension does not match action dimension");
  ActionSample<Scalar> s;
  s.pre_squash.resize(head.dim());
  s.action.resize(head.dim());
  s.log_prob = 0;
  const Scalar half_log_2pi = Scalar(0.5 * std::log(2 * std::numbers::pi));
  for (Index k = 0; k < head.dim(); ++k) {
    const Scalar ls = clamp_log_sigma(head.log_sigma[k]);
    const Scalar u = head.mu[k] + std::exp(ls) * noise[k];
    s.pre_squash[k] = u;
    s.action[k] = std::tanh(u);
    s.log_prob += -Scalar(0.5) * noise[k] * noise[k] - ls - half_log_2pi - log_one_minus_tanh2(u);
  }
  return s;
}

template <typename Scalar>
Vector<Scalar> deterministic_action(const GaussianHead<Scalar>& head) {
  return head.mu.array().tanh().matrix();
}

/// Closed-form KL(p || q) between the pre-squash diagonal Gaussians.
template <typename Scalar>
Scalar kl_diag_gaussian(const GaussianHead<Scalar>& p, const GaussianHead<Scalar>& q) {
  if (p.dim() != q.dim()) throw ConfigError("KL between heads of different dimension");
  Scalar kl = 0;
  for (Index k = 0; k < p.dim(); ++k) {
    const Scalar lp = clamp_log_sigma(p.log_sigma[k]);
    const Scalar lq = clamp_log_sigma(q.log_sigma[k]);
    const Scalar d = p.mu[k] - q.mu[k];
    kl += lq - lp + (std::exp(2 * lp) + d * d) / (2 * std::exp(2 * lq)) - Scalar(0.5);
  }
  return std::max(kl, Scalar(0));
}

/// Single-sample entropy estimate scaled by the temperature.
template <typename Scalar>
Scalar entropy_bonus(const GaussianHead<Scalar>&, Scalar alpha, const ActionSample<Scalar>& sampled) {
  return -alpha * sampled.log_prob;
}

// ---------------------------------------------------------------------------
// Batched forms used by the learner. A policy network emits 2*A columns:
// [mu | raw log_sigma]; rows are samples.

template <typename Scalar>
struct BatchSample {
  Matrix<Scalar> action;      // P x A
  Matrix<Scalar> pre_squash;  // P x A
  Vector<Scalar> log_prob;    // P
  Matrix<Scalar> sigma;       // P x A, after clamping
  Matrix<Scalar> noise;       // P x A
  Matrix<Scalar> clamp_pass;  // 1 where raw log_sigma was inside the clamp range
};

template <typename Scalar>
BatchSample<Scalar> sample_batch(const Matrix<Scalar>& head_out, const Matrix<Scalar>& noise) {
  const Index a = head_out.cols() / 2;
  if (head_out.cols() != 2 * a || noise.cols() != a || noise.rows() != head_out.rows())
    throw ConfigError("policy output / noise shape mismatch");
  BatchSample<Scalar> s;
  const auto mu = head_out.leftCols(a);
  const auto raw = head_out.rightCols(a);
  Matrix<Scalar> ls = raw.cwiseMax(Scalar(kLogSigmaMin)).cwiseMin(Scalar(kLogSigmaMax));
  s.clamp_pass = ((raw.array() >= Scalar(kLogSigmaMin)) && (raw.array() <= Scalar(kLogSigmaMax)))
                     .template cast<Scalar>();
  s.sigma = ls.array().exp();
  s.noise = noise;
  s.pre_squash = mu + (s.sigma.array() * noise.array()).matrix();
  s.action = s.pre_squash.array().tanh();
  const Scalar half_log_2pi = Scalar(0.5 * std::log(2 * std::numbers::pi));
  s.log_prob.resize(head_out.rows());
  for (Index i = 0; i < head_out.rows(); ++i) {
    Scalar lp = 0;
    for (Index k = 0; k < a; ++k)
      lp += -Scalar(0.5) * noise(i, k) * noise(i, k) - ls(i, k) - half_log_2pi -
            log_one_minus_tanh2(s.pre_squash(i, k));
    s.log_prob[i] = lp;
  }
  return s;
}

/// Chain rule from (dL/daction, dL/dlog_prob) back to the raw policy output
/// [dL/dmu | dL/draw_log_sigma] through the reparameterized draw.
template <typename Scalar>
Matrix<Scalar> sample_batch_backward(const BatchSample<Scalar>& s, const Matrix<Scalar>& d_action,
                                     const Vector<Scalar>& d_log_prob) {
  const Index a = s.action.cols();
  Matrix<Scalar> g(s.action.rows(), 2 * a);
  // du: through tanh for the action path, 2 tanh(u) for the -log(1 - tanh^2) term.
  Matrix<Scalar> du = d_action.array() * (Scalar(1) - s.action.array().square());
  du.array() += (Scalar(2) * s.action.array()).colwise() * d_log_prob.array();
  g.leftCols(a) = du;
  // d log_sigma: u depends on sigma * noise; log_prob has an explicit -log_sigma.
  Matrix<Scalar> dls = du.array() * s.sigma.array() * s.noise.array();
  dls.array() -= (Matrix<Scalar>::Ones(s.action.rows(), a).array().colwise() * d_log_prob.array());
  g.rightCols(a) = (dls.array() * s.clamp_pass.array()).matrix();
  return g;
}

/// Per-row KL between two batches of heads (fixed teacher `q`), and its
/// gradient with respect to the raw outputs of `p`.
template <typename Scalar>
Vector<Scalar> kl_batch(const Matrix<Scalar>& p_out, const Matrix<Scalar>& q_out,
                        Matrix<Scalar>* d_p_out = nullptr) {
  const Index a = p_out.cols() / 2;
  Vector<Scalar> kl(p_out.rows());
  if (d_p_out) d_p_out->setZero(p_out.rows(), p_out.cols());
  for (Index i = 0; i < p_out.rows(); ++i) {
    Scalar total = 0;
    for (Index k = 0; k < a; ++k) {
      const Scalar raw = p_out(i, a + k);
      const Scalar lp = clamp_log_sigma(raw);
      const Scalar lq = clamp_log_sigma(q_out(i, a + k));
      const Scalar d = p_out(i, k) - q_out(i, k);
      const Scalar vq = std::exp(2 * lq);
      total += lq - lp + (std::exp(2 * lp) + d * d) / (2 * vq) - Scalar(0.5);
      if (d_p_out) {
        (*d_p_out)(i, k) = d / vq;
        const bool pass = raw >= Scalar(kLogSigmaMin) && raw <= Scalar(kLogSigmaMax);
        (*d_p_out)(i, a + k) = pass ? (std::exp(2 * lp) / vq - Scalar(1)) : Scalar(0);
      }
    }
    kl[i] = total;
  }
  return kl;
}

}  // namespace vecsac
