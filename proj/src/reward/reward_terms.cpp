#include "vecsac/reward/reward_terms.hpp"

#include <Eigen/Geometry>

#include <cmath>

#include "vecsac/errors.hpp"

namespace vecsac {

bool VectorReward::satisfies_invariants() const {
  return values.allFinite() && values[kCrossingLegs] <= 0 && values[kVelocityDeviation] <= 0 &&
         values[kDenseEffort] <= 0 && values[kTargetAchieve] >= 0 && values[kTargetAchieve] <= 1;
}

RewardWeights pretrain_weights() {
  RewardWeights w;
  w << 1, 10, 0, 1, 1, 0, 1;
  return w;
}

RewardWeights finetune_weights() {
  RewardWeights w;
  w << 1, 10, 1, 1, 1, 1, 1;
  return w;
}

double crossing_legs_penalty(const BodyFrame& f) {
  const Vec3 a = f.head - f.pelvis;
  const Vec3 b = f.left - f.pelvis;
  const Vec3 c = f.right - f.pelvis;
  return std::min(0.0, a.dot(b.cross(c)));
}

double velocity_deviation_penalty(const Vec2& v_body, const Vec2& v_tgt) {
  return -(v_body - v_tgt).norm();
}

double pelvis_velocity_bonus(const Vec2& v_body, const Vec2& v_tgt, bool directional) {
  const double speed = v_body.norm();
  if (!directional) return speed;
  const double tn = v_tgt.norm();
  if (speed == 0 || tn == 0) return 0;
  return v_body.dot(v_tgt) / tn;  // cos(theta) * |v_body|
}

double dense_effort_penalty(const Eigen::Ref<const VectorXd>& action) { return -action.norm(); }

double target_achieve_bonus(double n) {
  if (n > 0.7) return 0;
  if (n > 0.5) return 0.1;
  return 1 - 3.5 * n * n;
}

double target_achieve_bonus(const Vec2& v_tgt_local) { return target_achieve_bonus(v_tgt_local.norm()); }

double env_reward(const EnvRewardConfig& cfg, std::span<const WindowStep> window) {
  if (cfg.window < 1) throw ConfigError("env reward window must be >= 1");
  if (static_cast<int>(window.size()) != cfg.window)
    throw ConfigError("env reward window has " + std::to_string(window.size()) + " steps, expected " +
                      std::to_string(cfg.window));
  double c_vel = 0, c_eff = 0;
  for (const auto& s : window) {
    c_vel += (s.v_body - s.v_tgt).norm() * cfg.dt;
    c_eff += s.action.squaredNorm() * cfg.dt;
  }
  const double r_step = cfg.window * cfg.dt;
  return cfg.r_alive * cfg.window + cfg.w_step * r_step - cfg.w_vel * c_vel - cfg.w_eff * c_eff;
}

double scalarize(const VectorReward& r, const RewardWeights& w) { return r.values.dot(w); }

}  // namespace vecsac
