#include <algorithm>
#include <cmath>

#include "checks/oracles.hpp"
#include "vecsac/policy/gaussian.hpp"

namespace vecsac::checks {

namespace {

GaussianHead<double> random_head(Rng& rng, Index dim) {
  std::uniform_real_distribution<double> mu(-1.5, 1.5), ls(-2.0, 0.7);
  GaussianHead<double> h;
  h.mu.resize(dim);
  h.log_sigma.resize(dim);
  for (Index k = 0; k < dim; ++k) {
    h.mu[k] = mu(rng);
    h.log_sigma[k] = ls(rng);
  }
  return h;
}

MatrixXd head_row(const GaussianHead<double>& h) {
  MatrixXd out(1, 2 * h.dim());
  out << h.mu.transpose(), h.log_sigma.transpose();
  return out;
}

CheckResult self_kl(const CheckOptions& opt) {
  return timed(4, "KL(p || p) = 0", [&](std::ostringstream& d) {
    Rng rng(opt.seed + 20);
    double worst = 0;
    for (int i = 0; i < 1000; ++i) {
      const auto h = random_head(rng, 1 + i % 4);
      const MatrixXd row = head_row(h);
      worst = std::max({worst, std::abs(kl_diag_gaussian(h, h)), std::abs(kl_batch<double>(row, row)[0])});
    }
    d << "1000 heads, max |KL| " << worst;
    return worst == 0.0;
  });
}

CheckResult kl_monte_carlo(const CheckOptions& opt) {
  return timed(4, "closed-form KL vs Monte Carlo", [&](std::ostringstream& d) {
    Rng rng(opt.seed + 21);
    std::normal_distribution<double> z(0, 1);
    const int samples = 100000;
    double worst_z = 0;
    for (int pair = 0; pair < 8; ++pair) {
      const Index dim = 1 + pair % 3;
      const auto p = random_head(rng, dim), q = random_head(rng, dim);
      double sum = 0, sum2 = 0;
      for (int s = 0; s < samples; ++s) {
        double lr = 0;
        for (Index k = 0; k < dim; ++k) {
          const double sp = std::exp(p.log_sigma[k]), sq = std::exp(q.log_sigma[k]);
          const double x = p.mu[k] + sp * z(rng);
          lr += normal_log_density(x, p.mu[k], sp) - normal_log_density(x, q.mu[k], sq);
        }
        sum += lr;
        sum2 += lr * lr;
      }
      const double mean = sum / samples;
      const double se = std::sqrt((sum2 / samples - mean * mean) / samples);
      const double closed = kl_diag_gaussian(p, q);
      d << (pair ? ", " : "") << closed << " vs " << mean << " +- " << se;
      worst_z = std::max(worst_z, std::abs(closed - mean) / se);
    }
    d << "; max deviation " << worst_z << " SE";
    return worst_z < 3.0;
  });
}

CheckResult squashed_normalization(const CheckOptions& opt) {
  return timed(4, "squashed log-prob normalization", [&](std::ostringstream& d) {
    Rng rng(opt.seed + 22);
    double worst = 0;
    for (int c = 0; c < (opt.quick ? 2 : 5); ++c) {
      const auto h = random_head(rng, 2);
      const double s0 = std::exp(h.log_sigma[0]), s1 = std::exp(h.log_sigma[1]);
      // Integrate p_a(tanh(u)) |d tanh / du| over pre-squash space; the
      // Jacobian factor is computed here, not taken from the library.
      auto integrand = [&](double u0, double u1) {
        VectorXd noise(2);
        noise << (u0 - h.mu[0]) / s0, (u1 - h.mu[1]) / s1;
        const double lp = sample(h, noise).log_prob;
        const double t0 = std::tanh(u0), t1 = std::tanh(u1);
        return std::exp(lp) * (1 - t0 * t0) * (1 - t1 * t1);
      };
      const double r = 9.0;
      const double total = simpson(
          [&](double u0) {
            return simpson([&](double u1) { return integrand(u0, u1); }, h.mu[1] - r * s1, h.mu[1] + r * s1, 400);
          },
          h.mu[0] - r * s0, h.mu[0] + r * s0, 400);
      d << (c ? ", " : "") << total;
      worst = std::max(worst, std::abs(total - 1));
    }
    d << "; max |integral - 1| " << worst;
    return worst < 1e-4;
  });
}

CheckResult batch_matches_single(const CheckOptions& opt) {
  return timed(4, "batched draw matches single draw", [&](std::ostringstream& d) {
    Rng rng(opt.seed + 23);
    double worst = 0;
    for (int i = 0; i < 200; ++i) {
      const auto h = random_head(rng, 3);
      const MatrixXd noise = standard_normal<double>(1, 3, rng);
      const auto one = sample(h, VectorXd(noise.row(0).transpose()));
      const auto many = sample_batch<double>(head_row(h), noise);
      worst = std::max({worst, std::abs(one.log_prob - many.log_prob[0]),
                        (one.action - many.action.row(0).transpose()).cwiseAbs().maxCoeff()});
    }
    d << "200 heads, max difference " << worst;
    return worst < 1e-12;
  });
}

}  // namespace

std::vector<CheckResult> distribution_suite(const CheckOptions& opt) {
  return {self_kl(opt), kl_monte_carlo(opt), squashed_normalization(opt), batch_matches_single(opt)};
}

}  // namespace vecsac::checks
