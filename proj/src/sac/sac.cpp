#include "vecsac/sac/sac.hpp"

#include <random>
#include <sstream>

#include "vecsac/grad/builders.hpp"

namespace vecsac {

Network<double> make_actor(Index obs_dim, Index act_dim, Index hidden, Rng& rng) {
  Network<double> net(residual_mlp(obs_dim, hidden, 2 * act_dim, Activation::elu));
  init_params(net, rng, 1e-3);
  return net;
}

Network<double> make_critic(Index obs_dim, Index act_dim, Index hidden, Index n_terms, Rng& rng) {
  Network<double> net(residual_mlp(obs_dim + act_dim, hidden, n_terms, Activation::relu));
  init_params(net, rng, 1e-3);
  return net;
}

CriticEnsemble CriticEnsemble::from_online(Network<double> q1, Network<double> q2) {
  if (!q1.same_architecture(q2)) throw ConfigError("twin critics differ in architecture");
  CriticEnsemble e{std::move(q1), std::move(q2), {}, {}};
  e.q1_target = e.q1;
  e.q2_target = e.q2;
  return e;
}

void soft_update(CriticEnsemble& ensemble, double tau) {
  if (!(tau >= 0 && tau <= 1)) throw ConfigError("tau must lie in [0, 1]");
  ensemble.q1_target.soft_update_from(ensemble.q1, tau);
  ensemble.q2_target.soft_update_from(ensemble.q2, tau);
}

namespace {

template <typename Edit>
Network<double> edit_output_rows(const Network<double>& critic, Index new_out, Edit&& edit) {
  std::vector<LayerSpec> layers = critic.layers();
  layers.back().out_dim = new_out;
  if (layers.back().kind != LayerKind::linear) throw ConfigError("critic must end in a linear layer");
  Network<double> out(layers);
  const std::size_t last = output_block(critic);
  for (std::size_t i = 0; i < critic.block_count(); ++i)
    if (i != last) out.block_mut(i) = critic.block(i);
  edit(critic.block(last), out.block_mut(last));
  return out;
}

}  // namespace

Network<double> extend_reward_term(const Network<double>& critic, double init_scale, Rng& rng) {
  const Index n = critic.output_dim();
  return edit_output_rows(critic, n + 1, [&](const ParamBlock<double>& src, ParamBlock<double>& dst) {
    std::uniform_real_distribution<double> u(-init_scale, init_scale);
    dst.weights.topRows(n) = src.weights;
    for (Index c = 0; c < dst.weights.cols(); ++c) dst.weights(n, c) = init_scale > 0 ? u(rng) : 0.0;
    dst.bias.head(n) = src.bias;
    dst.bias[n] = 0;
    dst.adam_m_w.topRows(n) = src.adam_m_w;
    dst.adam_v_w.topRows(n) = src.adam_v_w;
    dst.adam_m_b.head(n) = src.adam_m_b;
    dst.adam_v_b.head(n) = src.adam_v_b;
    dst.step_count = src.step_count;
  });
}

Network<double> remove_reward_term(const Network<double>& critic, Index term) {
  const Index n = critic.output_dim();
  if (term < 0 || term >= n) throw ConfigError("no reward term " + std::to_string(term) + " to remove");
  if (n == 1) throw ConfigError("cannot remove the only reward term");
  return edit_output_rows(critic, n - 1, [&](const ParamBlock<double>& src, ParamBlock<double>& dst) {
    Index r = 0;
    for (Index i = 0; i < n; ++i) {
      if (i == term) continue;
      dst.weights.row(r) = src.weights.row(i);
      dst.bias[r] = src.bias[i];
      dst.adam_m_w.row(r) = src.adam_m_w.row(i);
      dst.adam_v_w.row(r) = src.adam_v_w.row(i);
      dst.adam_m_b[r] = src.adam_m_b[i];
      dst.adam_v_b[r] = src.adam_v_b[i];
      ++r;
    }
    dst.step_count = src.step_count;
  });
}

void extend_reward_term(CriticEnsemble& ensemble, double init_scale, Rng& rng) {
  Network<double> q1 = extend_reward_term(ensemble.q1, init_scale, rng);
  Network<double> q2 = extend_reward_term(ensemble.q2, init_scale, rng);
  Network<double> t1 = extend_reward_term(ensemble.q1_target, 0.0, rng);
  Network<double> t2 = extend_reward_term(ensemble.q2_target, 0.0, rng);
  const std::size_t last = output_block(q1);
  const Index n = q1.output_dim() - 1;
  t1.block_mut(last).weights.row(n) = q1.block(last).weights.row(n);
  t2.block_mut(last).weights.row(n) = q2.block(last).weights.row(n);
  ensemble = {std::move(q1), std::move(q2), std::move(t1), std::move(t2)};
}

void remove_reward_term(CriticEnsemble& ensemble, Index term) {
  ensemble = {remove_reward_term(ensemble.q1, term), remove_reward_term(ensemble.q2, term),
              remove_reward_term(ensemble.q1_target, term), remove_reward_term(ensemble.q2_target, term)};
}

NStepReturn n_step_return(const Segment& seg, Index t, Index n, double gamma) {
  if (t < 0 || t >= seg.length) throw ContractViolation("position outside the trainable part of the segment");
  if (n < 1) throw ConfigError("n_step must be at least 1");
  NStepReturn ret;
  ret.reward_sum = VectorXd::Zero(seg.rewards.cols());
  double g = 1;
  for (Index k = 0; k < n; ++k) {
    const Index row = t + k;
    if (row >= seg.span())
      throw ContractViolation("segment too short for an n-step window at position " + std::to_string(t));
    ret.reward_sum += g * seg.rewards.row(row).transpose();
    g *= gamma;
    if (seg.dones[row]) {
      ret.discount = 0;
      ret.bootstrap_row = -1;
      return ret;
    }
  }
  ret.discount = g;
  ret.bootstrap_row = t + n;
  return ret;
}

VectorXd n_step_target(const NStepReturn& ret, const VectorXd& bootstrap_q, const ValueRescale& rescale) {
  VectorXd y(ret.reward_sum.size());
  for (Index i = 0; i < y.size(); ++i) {
    const double boot = ret.discount > 0 ? ret.discount * rescale.invert(bootstrap_q[i]) : 0.0;
    y[i] = rescale.apply(ret.reward_sum[i] + boot);
  }
  return y;
}

TrainingBatch make_training_batch(const SampledBatch& sampled, Index n_step, double gamma) {
  if (sampled.segments.empty()) throw ConfigError("empty training batch");
  const auto& first = *sampled.segments.front();
  Index p = 0;
  for (const auto& s : sampled.segments) p += s->length;
  TrainingBatch b;
  b.obs.resize(p, first.obs.cols());
  b.actions.resize(p, first.actions.cols());
  b.reward_sums.resize(p, first.rewards.cols());
  b.discounts.resize(p);
  b.importance.resize(p);
  b.segment_of.resize(p);
  std::vector<std::pair<std::size_t, Index>> boot_src;
  Index row = 0;
  for (std::size_t j = 0; j < sampled.segments.size(); ++j) {
    const Segment& seg = *sampled.segments[j];
    for (Index t = 0; t < seg.length; ++t, ++row) {
      const NStepReturn r = n_step_return(seg, t, n_step, gamma);
      b.obs.row(row) = seg.obs.row(t);
      b.actions.row(row) = seg.actions.row(t);
      b.reward_sums.row(row) = r.reward_sum.transpose();
      b.discounts[row] = r.discount;
      b.importance[row] = sampled.importance_weights[j];
      b.segment_of[row] = static_cast<Index>(j);
      if (r.discount > 0) {
        b.bootstrap_positions.push_back(row);
        boot_src.emplace_back(j, r.bootstrap_row);
      }
    }
  }
  b.bootstrap_obs.resize(static_cast<Index>(boot_src.size()), first.obs.cols());
  for (std::size_t k = 0; k < boot_src.size(); ++k)
    b.bootstrap_obs.row(k) = sampled.segments[boot_src[k].first]->obs.row(boot_src[k].second);
  return b;
}

MatrixXd compute_targets(const TrainingBatch& batch, const Network<double>& actor,
                         const CriticEnsemble& ensemble, const SacHyper& hyper,
                         const MatrixXd& target_noise) {
  const Index p = batch.size();
  const Index n = batch.reward_sums.cols();
  const Index nb = batch.bootstrap_obs.rows();
  MatrixXd boot_q = MatrixXd::Zero(p, n);
  if (nb > 0) {
    const BatchSample<double> a = sample_batch<double>(actor.forward(batch.bootstrap_obs), target_noise);
    const MatrixXd x = hstack(batch.bootstrap_obs, a.action);
    const MatrixXd q = ensemble.q1_target.forward(x).cwiseMin(ensemble.q2_target.forward(x));
    for (Index k = 0; k < nb; ++k) boot_q.row(batch.bootstrap_positions[k]) = q.row(k);
  }
  MatrixXd y(p, n);
  for (Index r = 0; r < p; ++r) {
    const double disc = batch.discounts[r];
    for (Index i = 0; i < n; ++i) {
      const double boot = disc > 0 ? disc * hyper.rescale.invert(boot_q(r, i)) : 0.0;
      y(r, i) = hyper.rescale.apply(batch.reward_sums(r, i) + boot);
    }
  }
  return y;
}

CriticLossResult critic_loss_from_targets(const TrainingBatch& batch, const MatrixXd& targets,
                                          CriticEnsemble& ensemble, const SacHyper& hyper) {
  const Index n = ensemble.n_terms();
  if (hyper.weights.size() != n)
    throw ConfigError("reward weights have " + std::to_string(hyper.weights.size()) + " entries, critic has " +
                      std::to_string(n) + " heads");
  if (targets.rows() != batch.size() || targets.cols() != n) throw ConfigError("target shape mismatch");
  const MatrixXd x = hstack(batch.obs, batch.actions);
  CriticLossResult res;
  MatrixXd q_mean = MatrixXd::Zero(batch.size(), n);
  for (Network<double>* q : {&ensemble.q1, &ensemble.q2}) {
    Tape<double> tape;
    const MatrixXd out = q->forward(x, &tape);
    const MatrixXd diff = out - targets;
    res.loss += 0.5 * (diff.array().square().rowwise().sum() * batch.importance.array()).sum();
    const MatrixXd g = diff.array().colwise() * batch.importance.array();
    q->backward(tape, g);
    q_mean += 0.5 * out;
  }
  res.td_magnitude = ((q_mean - targets) * hyper.weights).cwiseAbs();
  if (!std::isfinite(res.loss)) throw NumericFault("non-finite critic loss");
  return res;
}

CriticLossResult critic_loss(const TrainingBatch& batch, CriticEnsemble& ensemble,
                             const Network<double>& actor, const SacHyper& hyper,
                             const MatrixXd& target_noise) {
  const MatrixXd y = compute_targets(batch, actor, ensemble, hyper, target_noise);
  return critic_loss_from_targets(batch, y, ensemble, hyper);
}

namespace {

ActorLossResult finish_actor_loss(Network<double>& actor, const Tape<double>& tape, const BatchSample<double>& s,
                                  const VectorXd& q, const MatrixXd& dq_daction, double alpha) {
  const Index p = q.size();
  ActorLossResult res;
  res.log_prob = s.log_prob;
  res.loss = (alpha * s.log_prob - q).mean();
  if (!std::isfinite(res.loss)) throw NumericFault("non-finite actor loss");
  const MatrixXd d_action = -dq_daction / double(p);
  const VectorXd d_logp = VectorXd::Constant(p, alpha / double(p));
  actor.backward(tape, sample_batch_backward(s, d_action, d_logp));
  return res;
}

}  // namespace

ActorLossResult actor_loss(const MatrixXd& obs, const CriticEnsemble& ensemble, Network<double>& actor,
                           double alpha, const VectorXd& weights, const MatrixXd& noise) {
  const Index n = ensemble.n_terms();
  if (weights.size() != n) throw ConfigError("reward weights do not match critic heads");
  Tape<double> tape;
  const BatchSample<double> s = sample_batch<double>(actor.forward(obs, &tape), noise);
  const MatrixXd x = hstack(obs, s.action);
  Tape<double> t1, t2;
  const MatrixXd q1 = ensemble.q1.forward(x, &t1);
  const MatrixXd q2 = ensemble.q2.forward(x, &t2);
  const Index p = obs.rows();
  MatrixXd g1 = MatrixXd::Zero(p, n), g2 = MatrixXd::Zero(p, n);
  VectorXd q(p);
  for (Index r = 0; r < p; ++r) {
    double total = 0;
    for (Index i = 0; i < n; ++i) {
      if (q1(r, i) <= q2(r, i)) {
        total += weights[i] * q1(r, i);
        g1(r, i) = weights[i];
      } else {
        total += weights[i] * q2(r, i);
        g2(r, i) = weights[i];
      }
    }
    q[r] = total;
  }
  const Index a = s.action.cols();
  const MatrixXd dq = ensemble.q1.input_gradient(t1, g1).rightCols(a) + ensemble.q2.input_gradient(t2, g2).rightCols(a);
  return finish_actor_loss(actor, tape, s, q, dq, alpha);
}

ActorLossResult actor_loss(const MatrixXd& obs, const ScalarCritic& critic, Network<double>& actor,
                           double alpha, const MatrixXd& noise) {
  Tape<double> tape;
  const BatchSample<double> s = sample_batch<double>(actor.forward(obs, &tape), noise);
  MatrixXd dq;
  const VectorXd q = critic.evaluate(obs, s.action, &dq);
  return finish_actor_loss(actor, tape, s, q, dq, alpha);
}

double temperature_loss(const VectorXd& log_prob, ParamBlock<double>& log_alpha, double target_entropy) {
  const double alpha = std::exp(log_alpha.weights(0, 0));
  const double m = (-log_prob.array() - target_entropy).mean();
  log_alpha.weight_grad(0, 0) += alpha * m;
  return alpha * m;
}

SacAgent SacAgent::create(Index obs_dim, Index act_dim, Index hidden, Index n_terms, double init_alpha, Rng& rng) {
  if (!(init_alpha > 0)) throw ConfigError("initial temperature must be positive");
  SacAgent agent;
  agent.actor = make_actor(obs_dim, act_dim, hidden, rng);
  Network<double> q1 = make_critic(obs_dim, act_dim, hidden, n_terms, rng);
  Network<double> q2 = make_critic(obs_dim, act_dim, hidden, n_terms, rng);
  agent.critics = CriticEnsemble::from_online(std::move(q1), std::move(q2));
  agent.log_alpha.weights(0, 0) = std::log(init_alpha);
  return agent;
}

ParamArchive SacAgent::to_archive() const {
  ParamArchive a;
  a.networks = {{"actor", actor},
                {"q1", critics.q1},
                {"q2", critics.q2},
                {"q1_target", critics.q1_target},
                {"q2_target", critics.q2_target}};
  a.scalars = {{"log_alpha", log_alpha.weights(0, 0)},
               {"log_alpha.adam_m", log_alpha.adam_m_w(0, 0)},
               {"log_alpha.adam_v", log_alpha.adam_v_w(0, 0)},
               {"log_alpha.steps", static_cast<double>(log_alpha.step_count)}};
  return a;
}

SacAgent SacAgent::from_archive(const ParamArchive& archive) {
  SacAgent agent;
  agent.actor = archive.network("actor");
  agent.critics.q1 = archive.network("q1");
  agent.critics.q2 = archive.network("q2");
  agent.critics.q1_target = archive.network("q1_target");
  agent.critics.q2_target = archive.network("q2_target");
  agent.log_alpha.weights(0, 0) = archive.scalar("log_alpha");
  agent.log_alpha.adam_m_w(0, 0) = archive.scalar("log_alpha.adam_m");
  agent.log_alpha.adam_v_w(0, 0) = archive.scalar("log_alpha.adam_v");
  agent.log_alpha.step_count = static_cast<std::uint64_t>(archive.scalar("log_alpha.steps"));
  return agent;
}

namespace {

bool network_grads_finite(const Network<double>& net) {
  for (std::size_t i = 0; i < net.block_count(); ++i)
    if (!grads_finite(net.block(i))) return false;
  return true;
}

std::string describe_slots(const SampledBatch& sampled) {
  std::ostringstream os;
  os << "batch slots:";
  for (const auto& s : sampled.slots) os << ' ' << s.index << '/' << s.generation;
  return os.str();
}

}  // namespace

TrainStepStats train_step(SacAgent& agent, const SampledBatch& sampled, const SacHyper& hyper, Rng& rng) {
  const TrainingBatch batch = make_training_batch(sampled, hyper.n_step, hyper.gamma);
  const Index a = agent.actor.output_dim() / 2;
  const MatrixXd target_noise = standard_normal<double>(batch.bootstrap_obs.rows(), a, rng);
  const MatrixXd actor_noise = standard_normal<double>(batch.size(), a, rng);

  agent.actor.zero_grad();
  agent.critics.q1.zero_grad();
  agent.critics.q2.zero_grad();
  agent.log_alpha.zero_grad();

  TrainStepStats stats;
  try {
    const CriticLossResult c = critic_loss(batch, agent.critics, agent.actor, hyper, target_noise);
    const double alpha = agent.alpha();
    const ActorLossResult act = actor_loss(batch.obs, agent.critics, agent.actor, alpha, hyper.weights, actor_noise);
    stats.temperature_loss = temperature_loss(act.log_prob, agent.log_alpha, hyper.target_entropy);
    if (!network_grads_finite(agent.actor) || !network_grads_finite(agent.critics.q1) ||
        !network_grads_finite(agent.critics.q2) || !grads_finite(agent.log_alpha) || !c.td_magnitude.allFinite())
      throw NumericFault("non-finite gradient");
    stats.critic_loss = c.loss;
    stats.actor_loss = act.loss;
    stats.entropy = -act.log_prob.mean();

    std::vector<std::vector<double>> td(sampled.segments.size());
    for (Index r = 0; r < batch.size(); ++r) td[batch.segment_of[r]].push_back(c.td_magnitude[r]);
    for (const auto& t : td) stats.segment_priorities.push_back(segment_priority(t, hyper.eta));
  } catch (const NumericFault& e) {
    agent.actor.zero_grad();
    agent.critics.q1.zero_grad();
    agent.critics.q2.zero_grad();
    agent.log_alpha.zero_grad();
    throw NumericFault(std::string(e.what()) + "; " + describe_slots(sampled));
  }

  adam_step(agent.critics.q1, hyper.critic_opt);
  adam_step(agent.critics.q2, hyper.critic_opt);
  adam_step(agent.actor, hyper.actor_opt);
  adam_step(agent.log_alpha, hyper.alpha_opt);
  soft_update(agent.critics, hyper.tau);
  stats.alpha = agent.alpha();
  return stats;
}

}  // namespace vecsac
