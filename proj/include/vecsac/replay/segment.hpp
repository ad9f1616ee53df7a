#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vecsac/grad/tensor.hpp"
#include "vecsac/reward/reward_terms.hpp"

namespace vecsac {

/// A run of consecutive transitions from one episode.
///
/// `length` transitions are trainable (at most the segment length L). The
/// stored span extends n - 1 transitions further so that every trainable
/// position has a full n-step window, unless the episode ends first:
///   obs      (span + 1) x obs_dim   s_start .. s_{start+span}
///   actions  length x act_dim
///   rewards  span x n_terms
///   dones    span flags; only the last may be set
struct Segment {
  MatrixXd obs;
  MatrixXd actions;
  MatrixXd rewards;
  std::vector<std::uint8_t> dones;
  std::uint64_t episode_id = 0;
  std::int64_t start_index = 0;
  Index length = 0;
  std::uint64_t sequence = 0;  // emission counter, for audits

  Index span() const { return rewards.rows(); }
  bool terminal() const { return !dones.empty() && dones.back() != 0; }
};

struct SegmentLayout {
  Index segment_length = 10;
  Index n_step = 5;
  Index stride() const { return segment_length / 2; }
};

/// Reason the segment is malformed, or nullopt when it is well formed.
std::optional<std::string> validate_segment(const Segment& seg, const SegmentLayout& layout);

/// Cuts one episode into half-overlapping segments as transitions arrive.
///
/// A segment starting at s is emitted once transitions s .. s + L + n - 2 are
/// available, or when the episode ends. At the end a final partial segment
/// is emitted if it holds at least one transition not covered by an earlier
/// segment and at least L/2 transitions; shorter remainders are dropped.
class EpisodeSegmenter {
 public:
  EpisodeSegmenter(SegmentLayout layout, Index obs_dim, Index act_dim, Index n_terms = kNumRewardTerms);

  void begin(std::uint64_t episode_id, const VectorXd& first_obs);
  /// Records a transition (a_t, r_t, done_t, s_{t+1}); returns segments that became complete.
  std::vector<Segment> push(const VectorXd& action, const VectorXd& reward, bool done,
                            const VectorXd& next_obs);

  std::int64_t steps() const { return static_cast<std::int64_t>(actions_.size()); }
  bool active() const { return active_; }

 private:
  Segment cut(std::int64_t start, Index length, bool terminal) const;

  SegmentLayout layout_;
  Index obs_dim_, act_dim_, n_terms_;
  bool active_ = false;
  std::uint64_t episode_id_ = 0;
  std::int64_t next_start_ = 0;
  std::int64_t covered_ = 0;
  std::vector<VectorXd> obs_, actions_, rewards_;
};

}  // namespace vecsac
