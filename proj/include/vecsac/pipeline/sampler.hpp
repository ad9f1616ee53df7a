#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <vector>

#include "vecsac/env/velocity_env.hpp"
#include "vecsac/grad/network.hpp"
#include "vecsac/replay/segment.hpp"

namespace vecsac {

/// Immutable policy copy handed to samplers.
struct PolicySnapshot {
  Network<double> actor;
  double alpha = 0;
  std::uint64_t version = 0;
};

/// Latest published policy. Readers get either the old or the new snapshot.
class SnapshotHandle {
 public:
  /// Publishes a copy; versions increase by one per call starting at 1.
  void publish(const Network<double>& actor, double alpha);
  std::shared_ptr<const PolicySnapshot> get() const;
  std::uint64_t version() const;

 private:
  mutable std::mutex mu_;
  std::shared_ptr<const PolicySnapshot> current_;
  std::uint64_t version_ = 0;
};

/// Per-sampler seed: master seed plus a fixed offset per index.
std::uint64_t sampler_seed(std::uint64_t master_seed, Index index);

/// One environment copy rolling stochastic episodes and cutting them into
/// segments. r_entropy = -alpha log pi(a|s) under the snapshot in use.
class Sampler {
 public:
  Sampler(Index index, std::uint64_t master_seed, EnvConfig env, int difficulty, SegmentLayout layout,
          bool student_obs);

  /// Advances one environment step with `policy`; returns segments completed by it.
  /// A numeric fault in the policy or environment discards the current
  /// episode and starts a new one.
  std::vector<Segment> step(const PolicySnapshot& policy);

  Index index() const { return index_; }
  std::int64_t env_steps() const { return env_steps_; }
  std::uint64_t episodes() const { return episodes_; }
  std::uint64_t discarded_episodes() const { return discarded_; }
  std::uint64_t emitted() const { return emitted_; }
  std::uint64_t last_version() const { return last_version_; }
  Index obs_dim() const { return student_obs_ ? kStudentObsDim : kTeacherObsDim; }

 private:
  void start_episode();
  const VectorXd& obs() const { return student_obs_ ? current_.obs_student : current_.obs_teacher; }

  Index index_;
  VelocityEnv env_;
  int difficulty_;
  bool student_obs_;
  EpisodeSegmenter segmenter_;
  Rng rng_;
  StepResult current_;
  std::int64_t env_steps_ = 0;
  std::uint64_t episodes_ = 0;
  std::uint64_t discarded_ = 0;
  std::uint64_t emitted_ = 0;
  std::uint64_t last_version_ = 0;
};

}  // namespace vecsac
