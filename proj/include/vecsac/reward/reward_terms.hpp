#pragma once

#include <Eigen/Core>

#include <array>
#include <span>
#include <string_view>

#include "vecsac/grad/tensor.hpp"

namespace vecsac {

/// Coordinates of the shaped reward vector, in storage order.
enum RewardTerm : int {
  kEnv = 0,
  kCrossingLegs,
  kVelocityDeviation,
  kPelvisVelocity,
  kDenseEffort,
  kTargetAchieve,
  kEntropy,
  kNumRewardTerms
};

inline constexpr std::array<std::string_view, kNumRewardTerms> kRewardTermNames = {
    "r_env", "r_clp", "r_vdp", "r_pvb", "r_dep", "r_tab", "r_entropy"};

using RewardVector = Eigen::Matrix<double, kNumRewardTerms, 1>;

/// One control step's reward vector.
struct VectorReward {
  RewardVector values = RewardVector::Zero();

  double& operator[](RewardTerm t) { return values[t]; }
  double operator[](RewardTerm t) const { return values[t]; }

  /// r_clp, r_vdp, r_dep <= 0; r_tab in [0, 1]; all finite.
  bool satisfies_invariants() const;
};

using RewardWeights = RewardVector;

/// Weights used while pretraining the field-blind agent.
RewardWeights pretrain_weights();
/// Weights used while finetuning the field-aware agent.
RewardWeights finetune_weights();

struct EnvRewardConfig {
  double r_alive = 0.1;
  double w_step = 1.0;
  double w_vel = 1.0;
  double w_eff = 1.0;
  int window = 10;
  double dt = 0.1;
};

struct BodyFrame {
  Vec3 head, pelvis, left, right;
};

/// min(0, (head - pelvis) . ((left - pelvis) x (right - pelvis))).
double crossing_legs_penalty(const BodyFrame& frame);

/// -|v_body - v_tgt|.
double velocity_deviation_penalty(const Vec2& v_body, const Vec2& v_tgt);

/// |v_body|, or cos(theta) |v_body| with theta the angle to v_tgt when
/// `directional`. cos(theta) is taken as 0 when either vector is zero.
double pelvis_velocity_bonus(const Vec2& v_body, const Vec2& v_tgt, bool directional);

/// -|action|.
double dense_effort_penalty(const Eigen::Ref<const VectorXd>& action);

/// 0 above 0.7 m/s, 0.1 on (0.5, 0.7], 1 - 3.5 |v|^2 at or below 0.5.
double target_achieve_bonus(const Vec2& v_tgt_local);
double target_achieve_bonus(double v_tgt_norm);

struct WindowStep {
  Vec2 v_body;
  Vec2 v_tgt;
  VectorXd action;
};

/// Environment reward over one window of control steps:
/// r_alive * window + w_step * r_step - w_vel * c_vel - w_eff * c_eff with
/// r_step the window duration, c_vel = sum |v_body - v_tgt| dt and
/// c_eff = sum |action|^2 dt.
double env_reward(const EnvRewardConfig& cfg, std::span<const WindowStep> window);

double scalarize(const VectorReward& r, const RewardWeights& w);

}  // namespace vecsac
