#pragma once

#include <cstdint>
#include <vector>

#include "vecsac/grad/adam.hpp"
#include "vecsac/grad/network.hpp"
#include "vecsac/grad/serialize.hpp"
#include "vecsac/policy/gaussian.hpp"
#include "vecsac/replay/prioritized_store.hpp"
#include "vecsac/sac/rescale.hpp"

namespace vecsac {

struct SacHyper {
  double gamma = 0.99;
  Index n_step = 5;
  ValueRescale rescale;
  double target_entropy = -2.0;  // -(action dim)
  VectorXd weights;              // one per critic head
  double tau = 0.005;
  double eta = 0.9;              // segment priority mix
  AdamOptions actor_opt{3e-5};
  AdamOptions critic_opt{1e-4};
  AdamOptions alpha_opt{3e-4};
};

/// Policy: obs -> [mu | raw log_sigma], ELU activations.
Network<double> make_actor(Index obs_dim, Index act_dim, Index hidden, Rng& rng);
/// Vector critic: [obs | action] -> n_terms Q heads, ReLU activations. The
/// final linear layer is the per-term projection of the trunk features.
Network<double> make_critic(Index obs_dim, Index act_dim, Index hidden, Index n_terms, Rng& rng);

struct CriticEnsemble {
  Network<double> q1, q2, q1_target, q2_target;

  static CriticEnsemble from_online(Network<double> q1, Network<double> q2);
  Index n_terms() const { return q1.output_dim(); }
};

/// target <- (1 - tau) target + tau online on both twins.
void soft_update(CriticEnsemble& ensemble, double tau);

/// Appends one head (new row of the final projection, drawn from
/// Uniform(-init_scale, init_scale), zero bias). Existing rows are bit-identical.
Network<double> extend_reward_term(const Network<double>& critic, double init_scale, Rng& rng);
/// Deletes head `term` from the final projection.
Network<double> remove_reward_term(const Network<double>& critic, Index term);

/// Both twins gain a head; target rows start equal to the online rows.
void extend_reward_term(CriticEnsemble& ensemble, double init_scale, Rng& rng);
void remove_reward_term(CriticEnsemble& ensemble, Index term);

// --- n-step targets -------------------------------------------------------

struct NStepReturn {
  VectorXd reward_sum;    // sum_k gamma^k r_{t+k}, per coordinate
  double discount = 0;    // gamma^n, or 0 when a terminal cuts the window
  Index bootstrap_row = -1;  // obs row of s_{t+n} in the segment
};

/// Discounted n-step reward sum from trainable position `t` of `seg`.
/// Throws ContractViolation when the window is short without a terminal.
NStepReturn n_step_return(const Segment& seg, Index t, Index n, double gamma);

/// y = h(R + discount * h^-1(Q_boot)), independently per coordinate.
VectorXd n_step_target(const NStepReturn& ret, const VectorXd& bootstrap_q, const ValueRescale& rescale);

/// Flattened trainable positions of a sampled batch of segments.
struct TrainingBatch {
  MatrixXd obs;             // P x obs_dim
  MatrixXd actions;         // P x act_dim
  MatrixXd reward_sums;     // P x n_terms
  VectorXd discounts;       // P
  std::vector<Index> bootstrap_positions;  // positions with discount > 0
  MatrixXd bootstrap_obs;   // B x obs_dim, aligned with bootstrap_positions
  VectorXd importance;      // P, importance weight of the owning segment
  std::vector<Index> segment_of;  // P -> segment index within the batch

  Index size() const { return obs.rows(); }
  Index segments() const { return segment_of.empty() ? 0 : segment_of.back() + 1; }
};

TrainingBatch make_training_batch(const SampledBatch& sampled, Index n_step, double gamma);

/// Bootstrap targets: a* ~ pi(s_{t+n}) from `target_noise` (B x act_dim),
/// Q from the target twins, min per coordinate.
MatrixXd compute_targets(const TrainingBatch& batch, const Network<double>& actor,
                         const CriticEnsemble& ensemble, const SacHyper& hyper,
                         const MatrixXd& target_noise);

struct CriticLossResult {
  double loss = 0;
  VectorXd td_magnitude;  // P: |sum_i w_i (mean twin Q_i - y_i)|
};

/// sum_p imp_p sum_twin sum_i 1/2 (Q_i - y_i)^2, gradients accumulated into q1/q2.
CriticLossResult critic_loss_from_targets(const TrainingBatch& batch, const MatrixXd& targets,
                                          CriticEnsemble& ensemble, const SacHyper& hyper);

CriticLossResult critic_loss(const TrainingBatch& batch, CriticEnsemble& ensemble,
                             const Network<double>& actor, const SacHyper& hyper,
                             const MatrixXd& target_noise);

struct ActorLossResult {
  double loss = 0;
  VectorXd log_prob;  // P, detached, for the temperature update
};

/// mean_p [alpha log pi(a|s) - sum_i w_i min(Q1_i, Q2_i)(s, a)] with a
/// reparameterized from `noise`; gradients accumulated into `actor` only.
ActorLossResult actor_loss(const MatrixXd& obs, const CriticEnsemble& ensemble, Network<double>& actor,
                           double alpha, const VectorXd& weights, const MatrixXd& noise);

/// Same objective for an arbitrary differentiable critic closure; used to
/// validate the actor path against synthetic critics.
struct ScalarCritic {
  virtual ~ScalarCritic() = default;
  /// Returns Q per row and writes dQ/daction into `d_action`.
  virtual VectorXd evaluate(const MatrixXd& obs, const MatrixXd& action, MatrixXd* d_action) const = 0;
};
ActorLossResult actor_loss(const MatrixXd& obs, const ScalarCritic& critic, Network<double>& actor,
                           double alpha, const MatrixXd& noise);

/// J(alpha) = mean[-alpha log pi - alpha H_target], alpha = exp(log_alpha).
/// Accumulates dJ/dlog_alpha into `log_alpha.weight_grad`.
double temperature_loss(const VectorXd& log_prob, ParamBlock<double>& log_alpha, double target_entropy);

/// Learner-owned parameters.
struct SacAgent {
  Network<double> actor;
  CriticEnsemble critics;
  ParamBlock<double> log_alpha{1, 1, 0};

  static SacAgent create(Index obs_dim, Index act_dim, Index hidden, Index n_terms, double init_alpha, Rng& rng);
  double alpha() const { return std::exp(log_alpha.weights(0, 0)); }

  ParamArchive to_archive() const;
  static SacAgent from_archive(const ParamArchive& archive);
};

struct TrainStepStats {
  double critic_loss = 0;
  double actor_loss = 0;
  double temperature_loss = 0;
  double alpha = 0;
  double entropy = 0;  // mean -log pi
  std::vector<double> segment_priorities;
};

/// One learner update: critics, actor, temperature, soft update. Agent is
/// left untouched when any loss turns non-finite (NumericFault).
TrainStepStats train_step(SacAgent& agent, const SampledBatch& sampled, const SacHyper& hyper, Rng& rng);

}  // namespace vecsac
