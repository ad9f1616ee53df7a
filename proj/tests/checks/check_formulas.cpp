#include <algorithm>
#include <cmath>

#include "checks/oracles.hpp"
#include "vecsac/replay/prioritized_store.hpp"
#include "vecsac/reward/reward_terms.hpp"
#include "vecsac/sac/sac.hpp"

namespace vecsac::checks {

namespace {

CheckResult rescale_round_trip(const CheckOptions& opt) {
  return timed(1, "h / h_inv round trip", [&](std::ostringstream& d) {
    constexpr double eps = 1e-3;
    Rng rng(opt.seed);
    std::uniform_real_distribution<double> u(-1e4, 1e4);
    double worst = 0, worst_inv = 0, worst_oracle = 0;
    bool monotone = true;
    const int n = opt.quick ? 20000 : 200000;
    std::vector<double> xs;
    for (int i = 0; i < n; ++i) xs.push_back(i < 2001 ? -1e4 + 10.0 * i : u(rng));
    for (double x : {0.0, 1e-12, -1e-12, 1.0, -1.0}) xs.push_back(x);
    for (double x : xs) {
      const double y = value_rescale(x, eps);
      worst = std::max(worst, std::abs(value_rescale_inverse(y, eps) - x));
      worst_inv = std::max(worst_inv, std::abs(value_rescale(value_rescale_inverse(x / 100, eps), eps) - x / 100));
      worst_oracle = std::max(worst_oracle, std::abs(y - h_direct(x, eps)) / std::max(1.0, std::abs(y)));
    }
    std::sort(xs.begin(), xs.end());
    for (std::size_t i = 1; i < xs.size(); ++i)
      if (xs[i] > xs[i - 1] && !(value_rescale(xs[i], eps) > value_rescale(xs[i - 1], eps))) monotone = false;
    const double bisect = std::abs(value_rescale_inverse(57.25, eps) - h_inverse_bisect(57.25, eps));
    const double h3 = value_rescale(3.0, eps);
    d << "max |h_inv(h(x)) - x| " << worst << ", max |h(h_inv(y)) - y| " << worst_inv << ", h(3) = " << h3
      << ", vs direct formula " << worst_oracle << ", vs bisection " << bisect << (monotone ? "" : ", NOT monotone");
    return worst < 1e-9 && worst_inv < 1e-9 && std::abs(h3 - 1.003) < 1e-12 && worst_oracle < 1e-12 &&
           bisect < 1e-9 && monotone;
  });
}

CheckResult priority_mix() {
  return timed(1, "segment priority mix", [&](std::ostringstream& d) {
    const std::vector<double> td = {1, 2, 3};
    const double p = segment_priority(td, 0.9);
    const double p0 = segment_priority(td, 0.0);
    const double p1 = segment_priority(td, 1.0);
    d << "eta 0.9 -> " << p << ", eta 0 -> " << p0 << ", eta 1 -> " << p1;
    return std::abs(p - 2.9) < 1e-12 && p0 == 2.0 && p1 == 3.0;
  });
}

double bonus_table(double v) {
  if (v > 0.7) return 0.0;
  if (v > 0.5) return 0.1;
  return 1.0 - 3.5 * v * v;
}

CheckResult bonus_piecewise(const CheckOptions& opt) {
  return timed(1, "target achieve bonus table", [&](std::ostringstream& d) {
    Rng rng(opt.seed + 1);
    std::uniform_real_distribution<double> mag(0, 1.5), ang(0, 2 * std::numbers::pi);
    int mismatches = 0;
    std::vector<double> vs;
    for (int i = 0; i < 1000; ++i) vs.push_back(mag(rng));
    for (double b : {0.5, 0.7}) vs.insert(vs.end(), {b, std::nextafter(b, 0.0), std::nextafter(b, 1.0)});
    for (double v : vs) {
      if (target_achieve_bonus(v) != bonus_table(v)) ++mismatches;
      const double a = ang(rng);
      const Vec2 vec(v * std::cos(a), v * std::sin(a));
      if (target_achieve_bonus(vec) != bonus_table(vec.norm())) ++mismatches;
    }
    const double b08 = target_achieve_bonus(0.8), b06 = target_achieve_bonus(0.6), b0 = target_achieve_bonus(0.0);
    d << vs.size() << " magnitudes, " << mismatches << " mismatches; 0.8 -> " << b08 << ", 0.6 -> " << b06
      << ", 0 -> " << b0;
    return mismatches == 0 && b08 == 0.0 && b06 == 0.1 && b0 == 1.0;
  });
}

CheckResult n_step_unroll(const CheckOptions& opt) {
  return timed(1, "n-step target vs brute-force unroll", [&](std::ostringstream& d) {
    Rng rng(opt.seed + 2);
    const int cases = opt.quick ? 100 : 1000;
    const Index terms = kNumRewardTerms;
    double worst = 0;
    long positions = 0;
    for (int c = 0; c < cases; ++c) {
      const Index n = 1 + c % 5;
      const Index length = std::uniform_int_distribution<Index>(1, 10)(rng);
      const bool terminal = std::uniform_int_distribution<int>(0, 2)(rng) == 0;
      const Segment seg = random_segment(rng, length, n, 2, 1, terms, terminal);
      const double gamma = std::uniform_real_distribution<double>(0.5, 1.0)(rng);
      ValueRescale rescale;
      rescale.identity = c % 4 == 3;
      for (Index t = 0; t < length; ++t) {
        const VectorXd q = uniform_vector(rng, terms, 20);
        const VectorXd y = n_step_target(n_step_return(seg, t, n, gamma), q, rescale);
        std::vector<bool> dones(seg.dones.begin(), seg.dones.end());
        for (Index i = 0; i < terms; ++i) {
          std::vector<double> r(static_cast<std::size_t>(seg.span()));
          for (Index k = 0; k < seg.span(); ++k) r[k] = seg.rewards(k, i);
          const double ref = brute_force_target(r, dones, t, n, gamma, q[i], rescale.identity, rescale.eps);
          worst = std::max(worst, std::abs(y[i] - ref));
        }
        ++positions;
      }
    }
    d << cases << " segments, " << positions << " positions, max abs error " << worst;
    return worst < 1e-6;
  });
}

CheckResult bellman_linearity(const CheckOptions& opt) {
  return timed(1, "per-coordinate Bellman linearity (identity rescale)", [&](std::ostringstream& d) {
    Rng rng(opt.seed + 3);
    const Index terms = kNumRewardTerms;
    double worst = 0, rescaled_gap = 0;
    for (int c = 0; c < 1000; ++c) {
      const Index n = 1 + c % 5;
      const Segment seg = random_segment(rng, 4, n, 2, 1, terms, c % 3 == 0);
      const VectorXd w = uniform_vector(rng, terms, 10);
      const VectorXd q = uniform_vector(rng, terms, 20);
      const Index t = std::uniform_int_distribution<Index>(0, 3)(rng);
      const NStepReturn ret = n_step_return(seg, t, n, 0.99);
      ValueRescale id;
      id.identity = true;
      const double vector_then_scalar = w.dot(n_step_target(ret, q, id));
      // Scalar problem: rewards w . r_k, bootstrap w . q.
      std::vector<double> r(static_cast<std::size_t>(seg.span()));
      for (Index k = 0; k < seg.span(); ++k) r[k] = w.dot(seg.rewards.row(k).transpose());
      const std::vector<bool> dones(seg.dones.begin(), seg.dones.end());
      const double scalar = brute_force_target(r, dones, t, n, 0.99, w.dot(q), true, 0);
      worst = std::max(worst, std::abs(vector_then_scalar - scalar) / std::max(1.0, std::abs(scalar)));
      const ValueRescale h;
      const double with_h = w.dot(n_step_target(ret, q, h));
      const double scalar_h = brute_force_target(r, dones, t, n, 0.99, w.dot(q), false, h.eps);
      rescaled_gap = std::max(rescaled_gap, std::abs(with_h - scalar_h));
    }
    d << "1000 cases, max rel gap " << worst << " (with h active the gap reaches " << rescaled_gap << ")";
    return worst < 1e-9;
  });
}

}  // namespace

std::vector<CheckResult> formula_oracles(const CheckOptions& opt) {
  return {rescale_round_trip(opt), priority_mix(), bonus_piecewise(opt), n_step_unroll(opt), bellman_linearity(opt)};
}

}  // namespace vecsac::checks
