#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <vector>

#include "vecsac/errors.hpp"
#include "vecsac/replay/segment.hpp"
#include "vecsac/replay/sum_tree.hpp"

namespace vecsac {

/// value(t) = start + (end - start) * min(1, t / steps)
struct AnnealSchedule {
  double start = 0.1;
  double end = 0.9;
  std::int64_t steps = 3000;

  double value(std::int64_t t) const {
    if (steps <= 0) return end;
    const double f = std::min(1.0, static_cast<double>(std::max<std::int64_t>(t, 0)) / steps);
    return start + (end - start) * f;
  }
};

/// eta * max(td) + (1 - eta) * mean(td).
double segment_priority(std::span<const double> td_errors, double eta);

struct SlotId {
  std::size_t index = 0;
  std::uint64_t generation = 0;
  friend bool operator==(const SlotId&, const SlotId&) = default;
};

struct StoreConfig {
  std::size_t capacity = 250000;
  SegmentLayout layout;
  double eta = 0.9;
  double priority_floor = 1e-6;
};

struct SampledBatch {
  std::vector<std::shared_ptr<const Segment>> segments;
  std::vector<SlotId> slots;
  std::vector<double> importance_weights;  // in (0, 1], batch max = 1
};

struct StoreStats {
  std::size_t size = 0;
  std::uint64_t appended = 0;
  std::uint64_t stale_updates = 0;
  std::uint64_t clamped_priorities = 0;
  double total_priority = 0;  // sum of p^alpha
  double max_priority = 0;
  double mean_priority = 0;
};

/// Proportional prioritized replay over segments with FIFO eviction. All
/// public operations are serialized by an internal mutex; segments are
/// immutable once appended.
class PrioritizedStore {
 public:
  explicit PrioritizedStore(StoreConfig cfg);

  /// Stores `seg` with `initial_priority`, or with the current maximum
  /// priority (1 when empty) if none is given. Throws ContractViolation with
  /// the reason when the segment is malformed.
  SlotId append(Segment seg, std::optional<double> initial_priority = std::nullopt);

  /// Draws `batch` slots i.i.d. with P(j) = p_j^alpha / sum p^alpha. Returns
  /// nullopt while fewer than `batch` segments are stored.
  std::optional<SampledBatch> sample(std::size_t batch, Rng& rng) const;

  /// Evicted slots are ignored and counted; priorities below the floor are
  /// clamped to it and counted.
  void update_priorities(std::span<const SlotId> slots, std::span<const double> priorities);

  /// Sets the priority exponent alpha and importance exponent beta.
  void set_exponents(double alpha, double beta);

  std::size_t size() const;
  std::size_t capacity() const { return cfg_.capacity; }
  const StoreConfig& config() const { return cfg_; }
  double alpha() const;
  double beta() const;
  double total_priority() const;  // sum tree root
  /// Raw (un-exponentiated) priority of a live slot.
  std::optional<double> priority(SlotId slot) const;
  StoreStats stats() const;

  /// Snapshot of live segments, oldest first.
  std::vector<std::shared_ptr<const Segment>> segments() const;

  /// `<stem>.manifest` + `<stem>.bin`.
  void save(const std::filesystem::path& stem) const;
  static std::unique_ptr<PrioritizedStore> load(const std::filesystem::path& stem);

 private:
  double clamp_priority(double p);
  void rebuild_tree();

  StoreConfig cfg_;
  mutable std::mutex mu_;
  std::vector<std::shared_ptr<const Segment>> ring_;
  std::vector<std::uint64_t> generation_;
  std::vector<double> raw_;
  SumTree sum_;
  MaxTree max_;
  std::size_t next_ = 0;
  std::size_t size_ = 0;
  double alpha_ = 0.1;
  double beta_ = 0.1;
  std::uint64_t appended_ = 0;
  std::uint64_t stale_ = 0;
  std::uint64_t clamped_ = 0;
};

}  // namespace vecsac
