#pragma once

// Independent reference computations for the check suites. Nothing here
// calls the library routine it is used to verify.

#include <chrono>
#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include "checks/checks.hpp"
#include "vecsac/replay/segment.hpp"

namespace vecsac::checks {

inline double h_direct(double x, double eps) {
  const double s = x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0);
  return s * (std::sqrt(std::abs(x) + 1) - 1) + eps * x;
}

/// Inverse of h_direct by bisection; h is strictly increasing.
inline double h_inverse_bisect(double y, double eps) {
  double lo = -1, hi = 1;
  while (h_direct(lo, eps) > y) lo *= 2;
  while (h_direct(hi, eps) < y) hi *= 2;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    (h_direct(mid, eps) < y ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// Literal n-step unroll: sum_k gamma^k r_{t+k} stopping after a terminal,
/// plus gamma^n bootstrap when no terminal was met, each through h.
inline double brute_force_target(const std::vector<double>& rewards, const std::vector<bool>& dones, std::size_t t,
                                 std::size_t n, double gamma, double q_boot, bool identity, double eps) {
  double sum = 0;
  bool cut = false;
  for (std::size_t k = 0; k < n; ++k) {
    sum += std::pow(gamma, double(k)) * rewards[t + k];
    if (dones[t + k]) {
      cut = true;
      break;
    }
  }
  if (!cut) sum += std::pow(gamma, double(n)) * (identity ? q_boot : h_inverse_bisect(q_boot, eps));
  return identity ? sum : h_direct(sum, eps);
}

/// Regularized upper incomplete gamma Q(a, x).
inline double gamma_q(double a, double x) {
  if (x <= 0) return 1.0;
  const double gln = std::lgamma(a);
  if (x < a + 1) {
    double ap = a, sum = 1.0 / a, del = sum;
    for (int n = 0; n < 10000; ++n) {
      ap += 1;
      del *= x / ap;
      sum += del;
      if (std::abs(del) < std::abs(sum) * 1e-15) break;
    }
    return 1.0 - sum * std::exp(-x + a * std::log(x) - gln);
  }
  double b = x + 1 - a, c = 1e300, d = 1 / b, h = d;
  for (int i = 1; i < 10000; ++i) {
    const double an = -i * (i - a);
    b += 2;
    d = an * d + b;
    if (std::abs(d) < 1e-300) d = 1e-300;
    c = b + an / c;
    if (std::abs(c) < 1e-300) c = 1e-300;
    d = 1 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1) < 1e-15) break;
  }
  return std::exp(-x + a * std::log(x) - gln) * h;
}

/// Upper tail of the chi-square distribution.
inline double chi_square_p_value(double stat, double dof) { return gamma_q(0.5 * dof, 0.5 * stat); }

inline double normal_log_density(double x, double mu, double sigma) {
  const double z = (x - mu) / sigma;
  return -0.5 * z * z - std::log(sigma) - 0.5 * std::log(2 * std::numbers::pi);
}

/// Composite Simpson rule with `n` (even) intervals.
inline double simpson(const std::function<double(double)>& f, double a, double b, int n) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4 : 2);
  return s * h / 3;
}

/// Times a check body and fills in the bookkeeping fields.
inline CheckResult timed(int criterion, std::string name, const std::function<bool(std::ostringstream&)>& body) {
  CheckResult r;
  r.criterion = criterion;
  r.name = std::move(name);
  std::ostringstream detail;
  detail.precision(6);
  const auto t0 = std::chrono::steady_clock::now();
  try {
    r.passed = body(detail);
  } catch (const std::exception& e) {
    detail << " exception: " << e.what();
    r.passed = false;
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  r.detail = detail.str();
  return r;
}

/// Entries drawn from Uniform(-scale, scale).
inline VectorXd uniform_vector(Rng& rng, Index n, double scale = 1) {
  std::uniform_real_distribution<double> u(-scale, scale);
  VectorXd v(n);
  for (Index i = 0; i < n; ++i) v[i] = u(rng);
  return v;
}

/// A well-formed segment with random contents. With `terminal`, the
/// episode ends inside the n-step tail or at the last trainable step.
inline Segment random_segment(Rng& rng, Index length, Index n, Index obs_dim, Index act_dim, Index terms,
                              bool terminal) {
  Segment s;
  s.length = length;
  Index span = length + n - 1;
  if (terminal) span = std::uniform_int_distribution<Index>(length, length + n - 1)(rng);
  std::normal_distribution<double> z(0, 1);
  s.obs.resize(span + 1, obs_dim);
  s.actions.resize(length, act_dim);
  s.rewards.resize(span, terms);
  for (Index i = 0; i < s.obs.size(); ++i) s.obs.data()[i] = z(rng);
  for (Index i = 0; i < s.actions.size(); ++i) s.actions.data()[i] = std::tanh(z(rng));
  for (Index i = 0; i < s.rewards.size(); ++i) s.rewards.data()[i] = 3 * z(rng);
  s.dones.assign(static_cast<std::size_t>(span), 0);
  if (terminal) s.dones.back() = 1;
  return s;
}

}  // namespace vecsac::checks
