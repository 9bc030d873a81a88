#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "fsq/rng.hpp"
#include "fsq/types.hpp"

namespace fsq {

/// Binary sum tree over leaf priorities, O(log n) update and prefix lookup.
class SumTree {
 public:
  explicit SumTree(std::size_t capacity) : capacity_(capacity) {
    std::size_t n = 1;
    while (n < capacity_) n <<= 1;
    base_ = n;
    tree_.assign(2 * n, 0.0);
  }

  void set(std::size_t leaf, Scalar value) {
    std::size_t node = base_ + leaf;
    tree_[node] = value;
    for (node >>= 1; node >= 1; node >>= 1)
      tree_[node] = tree_[2 * node] + tree_[2 * node + 1];
  }

  Scalar get(std::size_t leaf) const { return tree_[base_ + leaf]; }
  Scalar total() const { return tree_[1]; }
  std::size_t capacity() const { return capacity_; }

  /// Leaf whose cumulative range contains `prefix` in [0, total()).
  std::size_t find_prefix(Scalar prefix) const {
    std::size_t node = 1;
    while (node < base_) {
      const Scalar left = tree_[2 * node];
      if (prefix < left) {
        node = 2 * node;
      } else {
        prefix -= left;
        node = 2 * node + 1;
      }
    }
    std::size_t leaf = node - base_;
    return leaf < capacity_ ? leaf : capacity_ - 1;
  }

 private:
  std::size_t capacity_;
  std::size_t base_;
  std::vector<Scalar> tree_;
};

/// Companion tree answering max-over-leaves in O(log n).
class MaxTree {
 public:
  explicit MaxTree(std::size_t capacity) {
    std::size_t n = 1;
    while (n < capacity) n <<= 1;
    base_ = n;
    tree_.assign(2 * n, 0.0);
  }

  void set(std::size_t leaf, Scalar value) {
    std::size_t node = base_ + leaf;
    tree_[node] = value;
    for (node >>= 1; node >= 1; node >>= 1)
      tree_[node] = std::max(tree_[2 * node], tree_[2 * node + 1]);
  }

  Scalar max() const { return tree_[1]; }

 private:
  std::size_t base_;
  std::vector<Scalar> tree_;
};

/// Proportional-prioritization knobs; constants follow the usual conventions.
struct PerConfig {
  bool enabled = false;
  Scalar alpha = 0.6;
  Scalar beta_start = 0.4;
  Scalar beta_end = 1.0;
  Scalar epsilon_priority = 1e-3;
  bool importance_weights = true;
};

template <class T>
struct SampledItem {
  std::size_t slot;           // storage slot, for priority refresh
  std::uint64_t sequence;     // guards against refreshing an overwritten slot
  const T* item;
  Scalar importance_weight;   // 1 outside PER mode
};

template <class T>
using SampledBatch = std::vector<SampledItem<T>>;

/// FIFO ring of transitions with uniform or prioritized sampling.
template <class T = Transition>
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity, PerConfig per = {})
      : capacity_(capacity), per_(per), beta_(per.beta_start), tree_(capacity),
        max_tree_(capacity) {
    if (capacity == 0) throw std::invalid_argument("replay capacity must be positive");
    storage_.reserve(capacity);
    raw_priority_.reserve(capacity);
    sequence_.reserve(capacity);
  }

  std::size_t size() const { return storage_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool per_enabled() const { return per_.enabled; }
  const PerConfig& per_config() const { return per_; }

  /// Fraction in [0,1] of the training run elapsed; anneals beta linearly.
  void set_training_progress(Scalar fraction) {
    if (fraction < 0) fraction = 0;
    if (fraction > 1) fraction = 1;
    beta_ = per_.beta_start + (per_.beta_end - per_.beta_start) * fraction;
  }
  Scalar beta() const { return beta_; }

  /// Append, evicting the oldest entry once full. In PER mode new items get
  /// the maximal current raw priority (1 if the buffer is empty).
  void push(T item) {
    std::size_t slot;
    if (storage_.size() < capacity_) {
      slot = storage_.size();
      storage_.push_back(std::move(item));
      raw_priority_.push_back(0.0);
      sequence_.push_back(0);
    } else {
      slot = write_cursor_;
      storage_[slot] = std::move(item);
    }
    sequence_[slot] = next_sequence_++;
    write_cursor_ = (slot + 1) % capacity_;
    set_raw_priority(slot, max_raw_priority());
  }

  std::uint64_t sequence_at(std::size_t slot) const { return sequence_.at(slot); }
  Scalar raw_priority_at(std::size_t slot) const { return raw_priority_.at(slot); }

  /// Largest stored raw priority, or 1 when nothing is stored yet.
  Scalar max_raw_priority() const {
    const Scalar best = max_tree_.max();
    return best > 0.0 ? best : 1.0;
  }

  /// nullopt while fewer than `batch` items are stored.
  std::optional<SampledBatch<T>> sample(std::size_t batch, RngStream& rng) const {
    if (batch == 0) throw std::invalid_argument("sample: batch must be positive");
    if (storage_.size() < batch) return std::nullopt;
    SampledBatch<T> out;
    out.reserve(batch);
    if (!per_.enabled) {
      for (std::size_t i = 0; i < batch; ++i) {
        const std::size_t slot = rng.integer(storage_.size());
        out.push_back({slot, sequence_[slot], &storage_[slot], 1.0});
      }
      return out;
    }

    const Scalar total = tree_.total();
    const Scalar n = static_cast<Scalar>(storage_.size());
    Scalar max_weight = 0.0;
    for (std::size_t i = 0; i < batch; ++i) {
      const std::size_t slot = tree_.find_prefix(rng.uniform() * total);
      const Scalar prob = tree_.get(slot) / total;
      Scalar weight = 1.0;
      if (per_.importance_weights) weight = std::pow(n * prob, -beta_);
      max_weight = std::max(max_weight, weight);
      out.push_back({slot, sequence_[slot], &storage_[slot], weight});
    }
    if (per_.importance_weights && max_weight > 0.0)
      for (auto& s : out) s.importance_weight /= max_weight;
    return out;
  }

  /// Refresh priorities from fresh TD error magnitudes. Entries whose slot
  /// was overwritten since sampling are skipped and counted.
  void update_priorities(const SampledBatch<T>& batch, const Vector& td_errors) {
    if (static_cast<Index>(batch.size()) != td_errors.size())
      throw ShapeError("update_priorities: one TD error per sampled item expected");
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const std::size_t slot = batch[i].slot;
      if (slot >= storage_.size() || sequence_[slot] != batch[i].sequence) {
        ++stale_update_count_;
        continue;
      }
      set_raw_priority(slot, std::abs(td_errors[static_cast<Index>(i)]) +
                                 per_.epsilon_priority);
    }
  }

  /// Direct raw-priority write; sampling weight becomes priority^alpha.
  void set_raw_priority(std::size_t slot, Scalar priority) {
    raw_priority_.at(slot) = priority;
    max_tree_.set(slot, priority);
    if (per_.enabled) tree_.set(slot, std::pow(priority, per_.alpha));
  }

  std::uint64_t stale_update_count() const { return stale_update_count_; }
  const T& at(std::size_t slot) const { return storage_.at(slot); }
  const SumTree& tree() const { return tree_; }

 private:
  std::size_t capacity_;
  PerConfig per_;
  std::vector<T> storage_;
  std::vector<Scalar> raw_priority_;
  std::vector<std::uint64_t> sequence_;
  std::size_t write_cursor_ = 0;
  std::uint64_t next_sequence_ = 1;
  std::uint64_t stale_update_count_ = 0;
  Scalar beta_;
  SumTree tree_;
  MaxTree max_tree_;
};

}  // namespace fsq
