#include "vecsac/replay/prioritized_store.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "vecsac/binary_io.hpp"
#include "vecsac/key_value.hpp"

namespace vecsac {

double segment_priority(std::span<const double> td, double eta) {
  if (td.empty()) throw ConfigError("segment_priority needs at least one TD error");
  double mx = td[0], sum = 0;
  for (double d : td) {
    mx = std::max(mx, d);
    sum += d;
  }
  return eta * mx + (1 - eta) * (sum / static_cast<double>(td.size()));
}

PrioritizedStore::PrioritizedStore(StoreConfig cfg)
    : cfg_(cfg), sum_(cfg.capacity), max_(cfg.capacity) {
  if (cfg_.capacity == 0) throw ConfigError("replay capacity must be positive");
  if (cfg_.eta < 0 || cfg_.eta > 1) throw ConfigError("eta must lie in [0, 1]");
  ring_.resize(cfg_.capacity);
  generation_.assign(cfg_.capacity, 0);
  raw_.assign(cfg_.capacity, 0.0);
}

double PrioritizedStore::clamp_priority(double p) {
  if (!(p >= cfg_.priority_floor)) {  // also catches NaN
    ++clamped_;
    return cfg_.priority_floor;
  }
  return p;
}

SlotId PrioritizedStore::append(Segment seg, std::optional<double> initial_priority) {
  if (auto why = validate_segment(seg, cfg_.layout)) throw ContractViolation("segment rejected: " + *why);
  auto shared = std::make_shared<const Segment>(std::move(seg));
  std::lock_guard lock(mu_);
  double p = initial_priority ? *initial_priority : (size_ == 0 ? 1.0 : max_.max());
  p = clamp_priority(p);
  const std::size_t slot = next_;
  ring_[slot] = std::move(shared);
  ++generation_[slot];
  raw_[slot] = p;
  sum_.set(slot, std::pow(p, alpha_));
  max_.set(slot, p);
  next_ = (next_ + 1) % cfg_.capacity;
  size_ = std::min(size_ + 1, cfg_.capacity);
  ++appended_;
  return SlotId{slot, generation_[slot]};
}

std::optional<SampledBatch> PrioritizedStore::sample(std::size_t batch, Rng& rng) const {
  std::lock_guard lock(mu_);
  if (batch == 0 || size_ < batch) return std::nullopt;
  SampledBatch out;
  out.segments.reserve(batch);
  out.slots.reserve(batch);
  out.importance_weights.reserve(batch);
  const double total = sum_.total();
  std::uniform_real_distribution<double> u(0.0, total);
  double max_w = 0;
  for (std::size_t b = 0; b < batch; ++b) {
    std::size_t slot = sum_.find_prefix(u(rng));
    if (slot >= cfg_.capacity || !ring_[slot]) slot = (next_ + cfg_.capacity - 1) % cfg_.capacity;
    const double prob = sum_.get(slot) / total;
    const double w = std::pow(static_cast<double>(size_) * prob, -beta_);
    max_w = std::max(max_w, w);
    out.segments.push_back(ring_[slot]);
    out.slots.push_back({slot, generation_[slot]});
    out.importance_weights.push_back(w);
  }
  for (auto& w : out.importance_weights) w /= max_w;
  return out;
}

void PrioritizedStore::update_priorities(std::span<const SlotId> slots, std::span<const double> priorities) {
  if (slots.size() != priorities.size()) throw ConfigError("slot and priority counts differ");
  std::lock_guard lock(mu_);
  for (std::size_t k = 0; k < slots.size(); ++k) {
    const auto& s = slots[k];
    if (s.index >= cfg_.capacity || generation_[s.index] != s.generation || !ring_[s.index]) {
      ++stale_;
      continue;
    }
    const double p = clamp_priority(priorities[k]);
    raw_[s.index] = p;
    sum_.set(s.index, std::pow(p, alpha_));
    max_.set(s.index, p);
  }
}

void PrioritizedStore::rebuild_tree() {
  for (std::size_t i = 0; i < cfg_.capacity; ++i) sum_.set_leaf(i, ring_[i] ? std::pow(raw_[i], alpha_) : 0.0);
  sum_.rebuild();
}

void PrioritizedStore::set_exponents(double alpha, double beta) {
  if (alpha < 0 || beta < 0) throw ConfigError("priority exponents must be nonnegative");
  std::lock_guard lock(mu_);
  beta_ = beta;
  if (alpha != alpha_) {
    alpha_ = alpha;
    rebuild_tree();
  }
}

std::size_t PrioritizedStore::size() const {
  std::lock_guard lock(mu_);
  return size_;
}

double PrioritizedStore::alpha() const {
  std::lock_guard lock(mu_);
  return alpha_;
}

double PrioritizedStore::beta() const {
  std::lock_guard lock(mu_);
  return beta_;
}

double PrioritizedStore::total_priority() const {
  std::lock_guard lock(mu_);
  return sum_.total();
}

std::optional<double> PrioritizedStore::priority(SlotId slot) const {
  std::lock_guard lock(mu_);
  if (slot.index >= cfg_.capacity || generation_[slot.index] != slot.generation || !ring_[slot.index])
    return std::nullopt;
  return raw_[slot.index];
}

StoreStats PrioritizedStore::stats() const {
  std::lock_guard lock(mu_);
  StoreStats s;
  s.size = size_;
  s.appended = appended_;
  s.stale_updates = stale_;
  s.clamped_priorities = clamped_;
  s.total_priority = sum_.total();
  s.max_priority = max_.max();
  double sum = 0;
  for (std::size_t i = 0; i < cfg_.capacity; ++i)
    if (ring_[i]) sum += raw_[i];
  s.mean_priority = size_ ? sum / static_cast<double>(size_) : 0.0;
  return s;
}

std::vector<std::shared_ptr<const Segment>> PrioritizedStore::segments() const {
  std::lock_guard lock(mu_);
  std::vector<std::shared_ptr<const Segment>> out;
  out.reserve(size_);
  const std::size_t first = size_ < cfg_.capacity ? 0 : next_;
  for (std::size_t k = 0; k < size_; ++k) out.push_back(ring_[(first + k) % cfg_.capacity]);
  return out;
}

namespace {
constexpr const char* kStoreFormat = "vecsac-replay/1";
std::filesystem::path suffixed(const std::filesystem::path& stem, const char* s) {
  return std::filesystem::path(stem.string() + s);
}
}  // namespace

void PrioritizedStore::save(const std::filesystem::path& stem) const {
  if (stem.has_parent_path()) std::filesystem::create_directories(stem.parent_path());
  std::lock_guard lock(mu_);
  const std::size_t first = size_ < cfg_.capacity ? 0 : next_;
  Index obs_dim = 0, act_dim = 0, n_terms = 0;
  if (size_ > 0) {
    const auto& s = *ring_[first];
    obs_dim = s.obs.cols();
    act_dim = s.actions.cols();
    n_terms = s.rewards.cols();
  }
  KeyValueFile kv;
  kv.set("format", kStoreFormat);
  kv.set("blob", suffixed(stem, ".bin").filename().string());
  kv.set("capacity", std::to_string(cfg_.capacity));
  kv.set("segment_length", std::to_string(cfg_.layout.segment_length));
  kv.set("n_step", std::to_string(cfg_.layout.n_step));
  kv.set("eta", format_double(cfg_.eta));
  kv.set("priority_floor", format_double(cfg_.priority_floor));
  kv.set("alpha", format_double(alpha_));
  kv.set("beta", format_double(beta_));
  kv.set("count", std::to_string(size_));
  kv.set("obs_dim", std::to_string(obs_dim));
  kv.set("act_dim", std::to_string(act_dim));
  kv.set("n_terms", std::to_string(n_terms));
  kv.write(suffixed(stem, ".manifest"));

  std::ofstream blob(suffixed(stem, ".bin"), std::ios::binary);
  if (!blob) throw ConfigError("cannot write " + suffixed(stem, ".bin").string());
  for (std::size_t k = 0; k < size_; ++k) {
    const std::size_t slot = (first + k) % cfg_.capacity;
    const Segment& s = *ring_[slot];
    write_le_u64(blob, s.episode_id);
    write_le_u64(blob, static_cast<std::uint64_t>(s.start_index));
    write_le_u64(blob, static_cast<std::uint64_t>(s.length));
    write_le_u64(blob, static_cast<std::uint64_t>(s.span()));
    write_le_u64(blob, s.sequence);
    write_le_f64(blob, raw_[slot]);
    write_le_block(blob, s.obs);
    write_le_block(blob, s.actions);
    write_le_block(blob, s.rewards);
    for (auto d : s.dones) write_le_u64(blob, d);
  }
  if (!blob) throw ConfigError("write failed for " + suffixed(stem, ".bin").string());
}

std::unique_ptr<PrioritizedStore> PrioritizedStore::load(const std::filesystem::path& stem) {
  const auto manifest = suffixed(stem, ".manifest");
  if (!std::filesystem::exists(manifest)) throw ConfigError("missing replay manifest: expected " + manifest.string());
  auto kv = KeyValueFile::read(manifest);
  if (kv.get("format") != kStoreFormat) throw ConfigError("unsupported replay format '" + kv.get("format") + "'");
  StoreConfig cfg;
  cfg.capacity = std::stoul(kv.get("capacity"));
  cfg.layout.segment_length = std::stol(kv.get("segment_length"));
  cfg.layout.n_step = std::stol(kv.get("n_step"));
  cfg.eta = std::stod(kv.get("eta"));
  cfg.priority_floor = std::stod(kv.get("priority_floor"));
  auto store = std::make_unique<PrioritizedStore>(cfg);
  store->set_exponents(std::stod(kv.get("alpha")), std::stod(kv.get("beta")));
  const auto count = std::stoul(kv.get("count"));
  const Index obs_dim = std::stol(kv.get("obs_dim"));
  const Index act_dim = std::stol(kv.get("act_dim"));
  const Index n_terms = std::stol(kv.get("n_terms"));

  const auto blob_path = stem.parent_path() / kv.get("blob");
  std::ifstream blob(blob_path, std::ios::binary);
  if (!blob) throw ConfigError("missing replay blob: expected " + blob_path.string());
  for (std::size_t k = 0; k < count; ++k) {
    Segment s;
    s.episode_id = read_le_u64(blob);
    s.start_index = static_cast<std::int64_t>(read_le_u64(blob));
    s.length = static_cast<Index>(read_le_u64(blob));
    const auto span = static_cast<Index>(read_le_u64(blob));
    s.sequence = read_le_u64(blob);
    const double p = read_le_f64(blob);
    s.obs.resize(span + 1, obs_dim);
    s.actions.resize(s.length, act_dim);
    s.rewards.resize(span, n_terms);
    read_le_block(blob, s.obs);
    read_le_block(blob, s.actions);
    read_le_block(blob, s.rewards);
    s.dones.resize(span);
    for (auto& d : s.dones) d = static_cast<std::uint8_t>(read_le_u64(blob));
    store->append(std::move(s), p);
  }
  return store;
}

}  // namespace vecsac
