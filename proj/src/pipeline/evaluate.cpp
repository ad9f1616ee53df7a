#include "vecsac/pipeline/evaluate.hpp"

#include <cmath>

#include "vecsac/errors.hpp"

namespace vecsac {

EvalReport evaluate(const Controller& controller, const EnvConfig& env_cfg, int difficulty, Index episodes,
                    std::uint64_t seed) {
  EvalReport r;
  r.episodes = episodes;
  VelocityEnv env(env_cfg);
  double speed_sum = 0;
  Vec2 vel_sum = Vec2::Zero();
  std::int64_t steps = 0;
  Index reached = 0;
  for (Index e = 0; e < episodes; ++e) {
    StepResult s = env.reset(seed + static_cast<std::uint64_t>(e), difficulty);
    RewardVector sums = RewardVector::Zero();
    while (!s.done) {
      s = env.step(controller(s));
      sums += s.reward.values;
      speed_sum += env.state().v.norm();
      vel_sum += env.state().v;
      ++steps;
    }
    r.term_sums += sums;
    r.episode_env_rewards.push_back(sums[kEnv]);
    if (s.info.distance_to_sink <= kSinkReachRadius && !s.info.left_arena) ++reached;
  }
  if (episodes == 0) return r;
  r.term_sums /= static_cast<double>(episodes);
  double mean = 0, sq = 0;
  for (double x : r.episode_env_rewards) mean += x;
  mean /= static_cast<double>(episodes);
  for (double x : r.episode_env_rewards) sq += (x - mean) * (x - mean);
  r.env_reward_mean = mean;
  r.env_reward_std = std::sqrt(sq / static_cast<double>(episodes));
  r.sink_reach_fraction = static_cast<double>(reached) / static_cast<double>(episodes);
  if (steps > 0) {
    r.mean_speed = speed_sum / static_cast<double>(steps);
    r.mean_velocity = vel_sum / static_cast<double>(steps);
  }
  r.direction = std::atan2(r.mean_velocity.y(), r.mean_velocity.x());
  return r;
}

EvalReport evaluate_policy(const Network<double>& actor, const EnvConfig& env, int difficulty, Index episodes,
                           std::uint64_t seed) {
  const Index in = actor.input_dim();
  if (in != kTeacherObsDim && in != kStudentObsDim)
    throw ConfigError("actor input width " + std::to_string(in) + " matches neither observation kind");
  const bool student = in == kStudentObsDim;
  Controller c = [&](const StepResult& s) -> VectorXd {
    const VectorXd& obs = student ? s.obs_student : s.obs_teacher;
    const MatrixXd out = actor.forward(obs.transpose());
    return out.leftCols(kActionDim).row(0).transpose().array().tanh().matrix();
  };
  return evaluate(c, env, difficulty, episodes, seed);
}

}  // namespace vecsac
