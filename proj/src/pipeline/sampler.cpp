#include "vecsac/pipeline/sampler.hpp"

#include "vecsac/errors.hpp"
#include "vecsac/policy/gaussian.hpp"

namespace vecsac {

void SnapshotHandle::publish(const Network<double>& actor, double alpha) {
  auto snap = std::make_shared<PolicySnapshot>();
  snap->actor = actor;
  snap->alpha = alpha;
  std::lock_guard lock(mu_);
  snap->version = ++version_;
  current_ = std::move(snap);
}

std::shared_ptr<const PolicySnapshot> SnapshotHandle::get() const {
  std::lock_guard lock(mu_);
  return current_;
}

std::uint64_t SnapshotHandle::version() const {
  std::lock_guard lock(mu_);
  return version_;
}

std::uint64_t sampler_seed(std::uint64_t master_seed, Index index) {
  return master_seed * 1000003ULL + 7919ULL * static_cast<std::uint64_t>(index + 1);
}

Sampler::Sampler(Index index, std::uint64_t master_seed, EnvConfig env, int difficulty, SegmentLayout layout,
                 bool student_obs)
    : index_(index),
      env_(env),
      difficulty_(difficulty),
      student_obs_(student_obs),
      segmenter_(layout, student_obs ? kStudentObsDim : kTeacherObsDim, kActionDim),
      rng_(sampler_seed(master_seed, index)) {
  if (difficulty < 0 || difficulty > 3) throw ConfigError("unknown difficulty " + std::to_string(difficulty));
  start_episode();
}

void Sampler::start_episode() {
  const std::uint64_t env_seed = rng_();
  current_ = env_.reset(env_seed, difficulty_);
  const std::uint64_t id = (static_cast<std::uint64_t>(index_ + 1) << 40) | episodes_;
  ++episodes_;
  segmenter_.begin(id, obs());
}

std::vector<Segment> Sampler::step(const PolicySnapshot& policy) {
  if (policy.version < last_version_) throw ContractViolation("policy snapshot version went backwards");
  last_version_ = policy.version;
  std::vector<Segment> out;
  try {
    const MatrixXd head = policy.actor.forward(obs().transpose());
    const MatrixXd noise = standard_normal<double>(1, kActionDim, rng_);
    const BatchSample<double> s = sample_batch<double>(head, noise);
    const VectorXd action = s.action.row(0).transpose();
    StepResult next = env_.step(action);
    ++env_steps_;
    next.reward[kEntropy] = -policy.alpha * s.log_prob[0];
    if (!next.reward.values.allFinite() || !next.obs_student.allFinite())
      throw NumericFault("non-finite environment output");
    current_ = std::move(next);
    out = segmenter_.push(action, current_.reward.values, current_.done, obs());
  } catch (const NumericFault&) {
    ++discarded_;
    start_episode();
    return {};
  }
  for (auto& seg : out) seg.sequence = (static_cast<std::uint64_t>(index_ + 1) << 40) | emitted_++;
  if (current_.done) start_episode();
  return out;
}

}  // namespace vecsac
