#include "vecsac/replay/segment.hpp"

#include "vecsac/errors.hpp"

namespace vecsac {

std::optional<std::string> validate_segment(const Segment& seg, const SegmentLayout& layout) {
  const Index span = seg.rewards.rows();
  if (seg.length < 1) return "segment has no trainable transitions";
  if (seg.length > layout.segment_length) return "segment longer than the segment length";
  if (seg.actions.rows() != seg.length) return "action rows do not match length";
  if (span < seg.length) return "reward span shorter than length";
  if (seg.obs.rows() != span + 1) return "observation rows must be span + 1";
  if (static_cast<Index>(seg.dones.size()) != span) return "done flags do not match span";
  for (Index k = 0; k + 1 < span; ++k)
    if (seg.dones[k]) return "segment crosses an episode boundary";
  if (!seg.terminal() && span < seg.length + layout.n_step - 1)
    return "non-terminal segment lacks the n-step tail";
  if (span > seg.length + layout.n_step - 1) return "segment tail longer than n - 1";
  if (seg.start_index < 0 || seg.start_index % layout.stride() != 0)
    return "start index is not a multiple of the overlap stride";
  if (!seg.obs.allFinite() || !seg.actions.allFinite() || !seg.rewards.allFinite())
    return "segment holds non-finite values";
  return std::nullopt;
}

EpisodeSegmenter::EpisodeSegmenter(SegmentLayout layout, Index obs_dim, Index act_dim, Index n_terms)
    : layout_(layout), obs_dim_(obs_dim), act_dim_(act_dim), n_terms_(n_terms) {
  if (layout_.segment_length < 2 || layout_.segment_length % 2 != 0)
    throw ConfigError("segment length must be even and >= 2");
  if (layout_.n_step < 1) throw ConfigError("n_step must be >= 1");
}

void EpisodeSegmenter::begin(std::uint64_t episode_id, const VectorXd& first_obs) {
  if (first_obs.size() != obs_dim_) throw ConfigError("observation dimension mismatch");
  episode_id_ = episode_id;
  active_ = true;
  next_start_ = 0;
  covered_ = 0;
  obs_.assign(1, first_obs);
  actions_.clear();
  rewards_.clear();
}

Segment EpisodeSegmenter::cut(std::int64_t start, Index length, bool terminal) const {
  const std::int64_t total = steps();
  const Index span = static_cast<Index>(
      std::min<std::int64_t>(start + length + layout_.n_step - 1, total) - start);
  Segment seg;
  seg.episode_id = episode_id_;
  seg.start_index = start;
  seg.length = length;
  seg.obs.resize(span + 1, obs_dim_);
  seg.actions.resize(length, act_dim_);
  seg.rewards.resize(span, n_terms_);
  seg.dones.assign(span, 0);
  for (Index k = 0; k <= span; ++k) seg.obs.row(k) = obs_[start + k].transpose();
  for (Index k = 0; k < length; ++k) seg.actions.row(k) = actions_[start + k].transpose();
  for (Index k = 0; k < span; ++k) seg.rewards.row(k) = rewards_[start + k].transpose();
  if (terminal && start + span == total) seg.dones[span - 1] = 1;
  return seg;
}

std::vector<Segment> EpisodeSegmenter::push(const VectorXd& action, const VectorXd& reward, bool done,
                                            const VectorXd& next_obs) {
  if (!active_) throw ContractViolation("push() without an active episode");
  if (action.size() != act_dim_ || reward.size() != n_terms_ || next_obs.size() != obs_dim_)
    throw ConfigError("transition dimensions do not match the segmenter");
  actions_.push_back(action);
  rewards_.push_back(reward);
  obs_.push_back(next_obs);

  std::vector<Segment> out;
  const Index L = layout_.segment_length;
  const std::int64_t needed = L + layout_.n_step - 1;
  while (next_start_ + needed <= steps()) {
    out.push_back(cut(next_start_, L, done));
    covered_ = next_start_ + L;
    next_start_ += layout_.stride();
  }
  if (done) {
    // Flush: full-length segments whose tail got truncated, then at most one partial.
    while (next_start_ + L <= steps()) {
      out.push_back(cut(next_start_, L, true));
      covered_ = next_start_ + L;
      next_start_ += layout_.stride();
    }
    const Index rest = static_cast<Index>(steps() - next_start_);
    if (rest >= layout_.stride() && steps() > covered_) out.push_back(cut(next_start_, rest, true));
    active_ = false;
  }
  return out;
}

}  // namespace vecsac
