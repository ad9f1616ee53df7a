#include <algorithm>
#include <cmath>
#include <cstring>

#include "checks/oracles.hpp"
#include "vecsac/grad/builders.hpp"
#include "vecsac/sac/sac.hpp"

namespace vecsac::checks {

namespace {

constexpr Index kObs = 4, kAct = 2, kHidden = 8;

bool bit_equal(const MatrixXd& a, const MatrixXd& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

CriticEnsemble random_ensemble(Rng& rng, Index terms) {
  auto critic = [&] {
    Network<double> n = make_critic(kObs, kAct, kHidden, terms, rng);
    init_params(n, rng);
    return n;
  };
  Network<double> q1 = critic(), q2 = critic();
  CriticEnsemble e = CriticEnsemble::from_online(std::move(q1), std::move(q2));
  e.q1_target = critic();
  e.q2_target = critic();
  return e;
}

std::vector<MatrixXd> gradients(Network<double>& net) {
  std::vector<MatrixXd> g;
  for (std::size_t b = 0; b < net.block_count(); ++b) {
    g.push_back(net.block(b).weight_grad);
    g.push_back(net.block(b).bias_grad.transpose());
  }
  return g;
}

CheckResult extend_preserves(const CheckOptions& opt) {
  return timed(5, "extend_reward_term keeps existing heads bit-exact", [&](std::ostringstream& d) {
    Rng rng(opt.seed + 30);
    int failures = 0;
    for (int c = 0; c < 20; ++c) {
      const Index terms = 1 + c % 7;
      CriticEnsemble e = random_ensemble(rng, terms);
      const CriticEnsemble before = e;
      const MatrixXd x = standard_normal<double>(16, kObs + kAct, rng);
      extend_reward_term(e, 0.1, rng);
      const Network<double>* nets[] = {&e.q1, &e.q2, &e.q1_target, &e.q2_target};
      const Network<double>* old[] = {&before.q1, &before.q2, &before.q1_target, &before.q2_target};
      for (int k = 0; k < 4; ++k) {
        const MatrixXd y = nets[k]->forward(x);
        if (y.cols() != terms + 1 || !bit_equal(y.leftCols(terms), old[k]->forward(x))) ++failures;
      }
      // New target heads start equal to the new online heads.
      for (auto [online, target] : {std::pair{&e.q1, &e.q1_target}, std::pair{&e.q2, &e.q2_target}}) {
        const auto& bo = online->block(output_block(*online));
        const auto& bt = target->block(output_block(*target));
        if (!bit_equal(bo.weights.row(terms), bt.weights.row(terms)) || bo.bias[terms] != bt.bias[terms]) ++failures;
      }
      const Network<double> single = extend_reward_term(before.q1, 0.1, rng);
      if (!bit_equal(single.forward(x).leftCols(terms), before.q1.forward(x))) ++failures;
    }
    d << "20 ensembles, " << failures << " heads changed";
    return failures == 0;
  });
}

CheckResult delete_equals_zero_weight(const CheckOptions& opt) {
  return timed(5, "deleting head i equals w_i = 0 in the actor loss", [&](std::ostringstream& d) {
    Rng rng(opt.seed + 31);
    double worst_loss = 0, worst_grad = 0;
    for (int c = 0; c < 20; ++c) {
      const Index terms = 2 + c % 6;
      const Index drop = c % terms;
      const CriticEnsemble e = random_ensemble(rng, terms);
      CriticEnsemble reduced = e;
      remove_reward_term(reduced, drop);
      Network<double> actor = make_actor(kObs, kAct, kHidden, rng);
      init_params(actor, rng);
      Network<double> actor2 = actor;
      const MatrixXd obs = standard_normal<double>(12, kObs, rng);
      const MatrixXd noise = standard_normal<double>(12, kAct, rng);
      VectorXd w = uniform_vector(rng, terms, 2.0);
      w[drop] = 0;
      VectorXd w_reduced(terms - 1);
      for (Index i = 0, j = 0; i < terms; ++i)
        if (i != drop) w_reduced[j++] = w[i];
      actor.zero_grad();
      actor2.zero_grad();
      const double a = actor_loss(obs, e, actor, 0.2, w, noise).loss;
      const double b = actor_loss(obs, reduced, actor2, 0.2, w_reduced, noise).loss;
      worst_loss = std::max(worst_loss, std::abs(a - b));
      const auto ga = gradients(actor), gb = gradients(actor2);
      for (std::size_t k = 0; k < ga.size(); ++k)
        worst_grad = std::max(worst_grad, (ga[k] - gb[k]).cwiseAbs().maxCoeff());
    }
    d << "20 cases, max loss difference " << worst_loss << ", max gradient difference " << worst_grad;
    return worst_loss < 1e-12 && worst_grad < 1e-12;
  });
}

CheckResult argmax_scale_invariant(const CheckOptions& opt) {
  return timed(5, "argmax of w . Q invariant under positive scaling", [&](std::ostringstream& d) {
    Rng rng(opt.seed + 32);
    int changed = 0, total = 0;
    for (int c = 0; c < 20; ++c) {
      const Index terms = 1 + c % 7;
      const CriticEnsemble e = random_ensemble(rng, terms);
      const MatrixXd s = standard_normal<double>(1, kObs, rng);
      const Index k = 64;
      MatrixXd x(k, kObs + kAct);
      x.leftCols(kObs) = s.replicate(k, 1);
      x.rightCols(kAct) = standard_normal<double>(k, kAct, rng).array().tanh().matrix();
      const MatrixXd q = e.q1.forward(x).cwiseMin(e.q2.forward(x));
      const VectorXd w = uniform_vector(rng, terms, 3.0);
      Index best = 0;
      (q * w).maxCoeff(&best);
      for (double scale : {1e-3, 0.5, 7.0, 1e4}) {
        Index b = 0;
        (q * (scale * w)).maxCoeff(&b);
        ++total;
        if (b != best) ++changed;
      }
    }
    d << total << " scalings, " << changed << " changed argmax";
    return changed == 0;
  });
}

}  // namespace

std::vector<CheckResult> mvrr_suite(const CheckOptions& opt) {
  return {extend_preserves(opt), delete_equals_zero_weight(opt), argmax_scale_invariant(opt)};
}

}  // namespace vecsac::checks
