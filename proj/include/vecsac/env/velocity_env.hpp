#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "vecsac/grad/tensor.hpp"
#include "vecsac/reward/reward_terms.hpp"

namespace vecsac {

inline constexpr int kGridSize = 11;
inline constexpr int kGridCenter = 5;
inline constexpr double kGridSpacing = 0.5;
inline constexpr Index kActionDim = 2;
inline constexpr Index kTeacherObsDim = 6;
inline constexpr Index kFieldDim = 2 * kGridSize * kGridSize;
inline constexpr Index kStudentObsDim = kTeacherObsDim + kFieldDim;

/// Single-sink target velocity field: vectors point at the sink with
/// magnitude min(v_max, ramp * distance).
struct TargetField {
  Vec2 sink = Vec2::Zero();
  double v_max = 1.4;
  double ramp = 1.0;
};

Vec2 field_at(const TargetField& field, const Vec2& x);

/// values[c](i, j) = component c of the field at p + ((i - 5) * 0.5, (j - 5) * 0.5).
struct LocalFieldGrid {
  std::array<Eigen::Matrix<double, kGridSize, kGridSize, Eigen::RowMajor>, 2> values;

  /// Component-major, then i, then j.
  VectorXd flatten() const;
};

LocalFieldGrid local_grid(const TargetField& field, const Vec2& p);

struct EnvConfig {
  double dt = 0.1;
  double accel_gain = 2.0;
  double drag = 0.5;
  int horizon = 1000;
  double arena_radius = 20.0;
  int respawn_hold_steps = 30;
  bool directional_pvb = false;
  EnvRewardConfig reward;
};

struct EnvState {
  Vec2 p = Vec2::Zero();
  Vec2 v = Vec2::Zero();
  Vec2 prev_action = Vec2::Zero();
  int t = 0;
  std::uint64_t episode_id = 0;
  bool done = false;
};

struct StepInfo {
  int clamped_components = 0;
  double distance_to_sink = 0;
  Vec2 v_tgt = Vec2::Zero();
  bool left_arena = false;
  bool hit_horizon = false;
  int respawns = 0;
};

struct StepResult {
  VectorXd obs_teacher;  // [0.1 p, 0.25 v, prev_action]
  VectorXd obs_student;  // obs_teacher ++ flattened local grid
  VectorReward reward;
  bool done = false;
  StepInfo info;
};

/// Point mass driven by a bounded 2D acceleration command, observed with a
/// local view of a target velocity field. r_entropy is always emitted as 0;
/// the sampler fills it in.
class VelocityEnv {
 public:
  explicit VelocityEnv(EnvConfig cfg = {});

  /// Difficulty 0: sink 5 m ahead (+x), v_max 1.4, ramp 1.
  /// Difficulty 1: random direction at 5 m, v_max in [1.0, 1.6], ramp in [0.8, 1.2].
  /// Difficulty 2: like 1 with distance in [3, 8] m.
  /// Difficulty 3: like 2; the sink respawns once after the agent holds
  ///               |v_tgt| <= 0.5 for respawn_hold_steps consecutive steps.
  StepResult reset(std::uint64_t seed, int difficulty);
  StepResult step(const Eigen::Ref<const VectorXd>& action);

  const EnvState& state() const { return state_; }
  const TargetField& field() const { return field_; }
  const EnvConfig& config() const { return cfg_; }
  int difficulty() const { return difficulty_; }
  std::uint64_t clamped_total() const { return clamped_total_; }

 private:
  StepResult observe() const;
  void place_sink(const Vec2& origin, double distance);

  EnvConfig cfg_;
  EnvState state_;
  TargetField field_;
  Rng rng_;
  int difficulty_ = 0;
  int hold_steps_ = 0;
  int respawns_ = 0;
  std::uint64_t clamped_total_ = 0;
  std::vector<WindowStep> window_;
};

/// Per-step trajectory rows for offline plotting.
class TrajectoryRecorder {
 public:
  void record(const EnvState& state, const VectorXd& action, const VectorReward& reward);
  /// Columns: t,px,py,vx,vy,ax,ay,r_env,...,r_entropy
  void write_csv(const std::filesystem::path& path) const;
  std::size_t size() const { return rows_.size(); }

 private:
  std::vector<std::vector<double>> rows_;
};

}  // namespace vecsac
