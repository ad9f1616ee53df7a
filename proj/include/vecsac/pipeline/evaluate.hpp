#pragma once

#include <functional>
#include <vector>

#include "vecsac/env/velocity_env.hpp"
#include "vecsac/grad/network.hpp"

namespace vecsac {

struct EvalReport {
  Index episodes = 0;
  double env_reward_mean = 0;
  double env_reward_std = 0;
  RewardVector term_sums = RewardVector::Zero();  // per-episode mean of each term's sum
  double sink_reach_fraction = 0;                 // episodes ending within 0.5 m of the sink
  double mean_speed = 0;                          // over all steps
  Vec2 mean_velocity = Vec2::Zero();
  double direction = 0;  // atan2 of mean_velocity, radians
  std::vector<double> episode_env_rewards;
};

inline constexpr double kSinkReachRadius = 0.5;

using Controller = std::function<VectorXd(const StepResult&)>;

/// Episode e uses environment seed `seed + e`.
EvalReport evaluate(const Controller& controller, const EnvConfig& env, int difficulty, Index episodes,
                    std::uint64_t seed);

/// Deterministic actions tanh(mu(s)); the observation kind follows the actor input width.
EvalReport evaluate_policy(const Network<double>& actor, const EnvConfig& env, int difficulty, Index episodes,
                           std::uint64_t seed);

}  // namespace vecsac
