#pragma once

#include <array>
#include <filesystem>
#include <vector>

#include "vecsac/replay/prioritized_store.hpp"
#include "vecsac/sac/sac.hpp"

namespace vecsac {

struct DistillConfig {
  double noise_std = 0.1;  // std of the stand-in field input
  Index batch = 128;
  double lr = 1e-4;
  double lr_final = 0;  // > 0: geometric decay from lr to this over max_steps
  Index student_hidden = 64;
  Index max_steps = 20000;
  double kl_stop = 1e-3;       // stop once the running training KL is below this
  Index kl_window = 200;       // steps in the running KL
  double holdout_fraction = 0.1;
  double kl_threshold = 0.05;  // verification thresholds
  double eps_action = 0.05;
  bool per_coordinate_q = false;  // match every head instead of sum_i w_i Q_i
};

/// Fresh student networks with `field_dim` extra observation inputs: the
/// actor reads [s, v], the critics [s, v, a]. Keeps the teacher's head count.
SacAgent build_student(const SacAgent& teacher, Index field_dim, Index student_hidden, Rng& rng);

/// Student with the teacher's parameters and a field pathway drawn from
/// Uniform(-field_scale, field_scale); field_scale = 0 gives a student that
/// ignores the field and reproduces the teacher exactly.
SacAgent clone_teacher_as_student(const SacAgent& teacher, Index field_dim, double field_scale, Rng& rng);

/// Teacher-observation states from a saved store, split by episode.
struct DistillStates {
  MatrixXd train;    // one unique (episode, step) state per row
  MatrixXd holdout;  // states of held-out episodes
};

DistillStates collect_states(const PrioritizedStore& store, double holdout_fraction, Rng& rng);

/// mean_p KL(pi_s(.|s_p, v_p) || pi_t(.|s_p)); accumulates gradients into `student`.
double distill_kl_loss(Network<double>& student, const Network<double>& teacher, const MatrixXd& states,
                       const MatrixXd& field);

/// mean_p sum_twin (Q^s_k(s, v, a_s) . w - Q^t_k(s, a_t) . w)^2, with
/// a_s = tanh(mu_s + sigma_s eps_s), a_t likewise from the teacher, both
/// treated as constants. Accumulates gradients into the student twins.
double distill_q_loss(CriticEnsemble& student, const CriticEnsemble& teacher, const Network<double>& student_actor,
                      const Network<double>& teacher_actor, const VectorXd& weights, const MatrixXd& states,
                      const MatrixXd& field, const MatrixXd& noise_s, const MatrixXd& noise_t,
                      bool per_coordinate);

struct DistillLosses {
  double kl_loss = 0;
  double q_loss = 0;
};

/// One Adam step on the student actor and both student critics.
DistillLosses distill_step(SacAgent& student, const SacAgent& teacher, const VectorXd& weights,
                           const MatrixXd& train_states, Rng& rng, const DistillConfig& cfg);

struct DistillReport {
  double mean_kl = 0;
  double max_action_deviation = 0;
  Index states = 0;
  bool passed = false;
};

/// Holdout comparison with a zero field input.
DistillReport verify_distillation(const SacAgent& student, const SacAgent& teacher, const MatrixXd& holdout,
                                  double kl_threshold, double eps_action);

struct DistillRun {
  std::vector<std::array<double, 3>> rows;  // step, kl_loss, q_loss
  DistillReport report;
};

/// Repeats distill_step until max_steps or the running KL falls below
/// kl_stop, then copies student online critics into their targets.
DistillRun run_distillation(SacAgent& student, const SacAgent& teacher, const VectorXd& weights,
                            const DistillStates& states, Rng& rng, const DistillConfig& cfg);

void write_distill_csv(const std::filesystem::path& path, const DistillRun& run);

}  // namespace vecsac
