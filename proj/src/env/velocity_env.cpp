#include "vecsac/env/velocity_env.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

#include "vecsac/errors.hpp"
#include "vecsac/key_value.hpp"

namespace vecsac {

Vec2 field_at(const TargetField& field, const Vec2& x) {
  const Vec2 d = field.sink - x;
  const double dist = d.norm();
  if (dist == 0) return Vec2::Zero();
  return d / dist * std::min(field.v_max, field.ramp * dist);
}

VectorXd LocalFieldGrid::flatten() const {
  VectorXd out(kFieldDim);
  Index k = 0;
  for (int c = 0; c < 2; ++c)
    for (int i = 0; i < kGridSize; ++i)
      for (int j = 0; j < kGridSize; ++j) out[k++] = values[c](i, j);
  return out;
}

LocalFieldGrid local_grid(const TargetField& field, const Vec2& p) {
  LocalFieldGrid g;
  for (int i = 0; i < kGridSize; ++i)
    for (int j = 0; j < kGridSize; ++j) {
      const Vec2 off((i - kGridCenter) * kGridSpacing, (j - kGridCenter) * kGridSpacing);
      const Vec2 v = field_at(field, p + off);
      g.values[0](i, j) = v.x();
      g.values[1](i, j) = v.y();
    }
  return g;
}

VelocityEnv::VelocityEnv(EnvConfig cfg) : cfg_(cfg) {
  if (cfg_.reward.window < 1) throw ConfigError("reward window must be >= 1");
  if (cfg_.horizon < 1) throw ConfigError("horizon must be >= 1");
}

void VelocityEnv::place_sink(const Vec2& origin, double distance) {
  std::uniform_real_distribution<double> angle(0, 2 * std::numbers::pi);
  const double a = angle(rng_);
  field_.sink = origin + distance * Vec2(std::cos(a), std::sin(a));
}

StepResult VelocityEnv::reset(std::uint64_t seed, int difficulty) {
  if (difficulty < 0 || difficulty > 3)
    throw ConfigError("unknown difficulty " + std::to_string(difficulty) + " (expected 0..3)");
  rng_.seed(seed);
  difficulty_ = difficulty;
  state_ = EnvState{};
  state_.episode_id = seed;
  hold_steps_ = 0;
  respawns_ = 0;
  window_.clear();

  if (difficulty == 0) {
    field_ = TargetField{Vec2(5.0, 0.0), 1.4, 1.0};
  } else {
    std::uniform_real_distribution<double> vmax(1.0, 1.6), ramp(0.8, 1.2), dist(3.0, 8.0);
    field_.v_max = vmax(rng_);
    field_.ramp = ramp(rng_);
    place_sink(Vec2::Zero(), difficulty == 1 ? 5.0 : dist(rng_));
  }
  return observe();
}

StepResult VelocityEnv::step(const Eigen::Ref<const VectorXd>& action) {
  if (state_.done) throw ContractViolation("step() called on a finished episode");
  if (action.size() != kActionDim) throw ConfigError("action must have 2 components");

  Vec2 a;
  int clamped = 0;
  for (int k = 0; k < 2; ++k) {
    const double c = std::clamp(action[k], -1.0, 1.0);
    if (c != action[k] || !std::isfinite(action[k])) ++clamped;
    a[k] = std::isfinite(action[k]) ? c : 0.0;
  }
  clamped_total_ += clamped;

  state_.v += cfg_.dt * (cfg_.accel_gain * a - cfg_.drag * state_.v);
  state_.p += cfg_.dt * state_.v;
  state_.prev_action = a;
  ++state_.t;

  const Vec2 v_tgt = field_at(field_, state_.p);
  VectorReward r;
  r[kCrossingLegs] = 0;  // no legs on a point mass
  r[kVelocityDeviation] = velocity_deviation_penalty(state_.v, v_tgt);
  r[kPelvisVelocity] = pelvis_velocity_bonus(state_.v, v_tgt, cfg_.directional_pvb);
  r[kDenseEffort] = dense_effort_penalty(a);
  r[kTargetAchieve] = target_achieve_bonus(v_tgt);
  r[kEntropy] = 0;

  const bool left_arena = state_.p.norm() > cfg_.arena_radius;
  const bool hit_horizon = state_.t >= cfg_.horizon;
  state_.done = left_arena || hit_horizon;

  window_.push_back({state_.v, v_tgt, a});
  if (static_cast<int>(window_.size()) == cfg_.reward.window || state_.done) {
    EnvRewardConfig wc = cfg_.reward;
    wc.window = static_cast<int>(window_.size());
    r[kEnv] = env_reward(wc, window_);
    window_.clear();
  }

  if (difficulty_ == 3 && respawns_ == 0 && !state_.done) {
    hold_steps_ = v_tgt.norm() <= 0.5 ? hold_steps_ + 1 : 0;
    if (hold_steps_ >= cfg_.respawn_hold_steps) {
      std::uniform_real_distribution<double> dist(3.0, 8.0);
      // keep the new sink inside the arena
      do {
        place_sink(state_.p, dist(rng_));
      } while (field_.sink.norm() > cfg_.arena_radius - 2.0);
      ++respawns_;
      hold_steps_ = 0;
    }
  }

  StepResult out = observe();
  out.reward = r;
  out.done = state_.done;
  out.info.clamped_components = clamped;
  out.info.left_arena = left_arena;
  out.info.hit_horizon = hit_horizon;
  return out;
}

StepResult VelocityEnv::observe() const {
  StepResult out;
  out.obs_teacher.resize(kTeacherObsDim);
  out.obs_teacher << 0.1 * state_.p, 0.25 * state_.v, state_.prev_action;
  out.obs_student.resize(kStudentObsDim);
  out.obs_student.head(kTeacherObsDim) = out.obs_teacher;
  out.obs_student.tail(kFieldDim) = local_grid(field_, state_.p).flatten();
  out.done = state_.done;
  out.info.v_tgt = field_at(field_, state_.p);
  out.info.distance_to_sink = (field_.sink - state_.p).norm();
  out.info.respawns = respawns_;
  return out;
}

void TrajectoryRecorder::record(const EnvState& s, const VectorXd& action, const VectorReward& reward) {
  std::vector<double> row{static_cast<double>(s.t), s.p.x(), s.p.y(), s.v.x(), s.v.y(),
                          action.size() > 0 ? action[0] : 0.0, action.size() > 1 ? action[1] : 0.0};
  for (int k = 0; k < kNumRewardTerms; ++k) row.push_back(reward.values[k]);
  rows_.push_back(std::move(row));
}

void TrajectoryRecorder::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << "t,px,py,vx,vy,ax,ay";
  for (auto name : kRewardTermNames) out << ',' << name;
  out << '\n';
  for (const auto& row : rows_) {
    for (std::size_t k = 0; k < row.size(); ++k) out << (k ? "," : "") << format_double(row[k]);
    out << '\n';
  }
}

}  // namespace vecsac
