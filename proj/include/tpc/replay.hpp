#pragma once

#include "tpc/scenario.hpp"
#include "tpc/types.hpp"

#include <map>

namespace tpc {

/// Fixed-capacity class-balanced reservoir store, updated once per
/// experience. Per-class quotas split the capacity evenly over the classes
/// seen so far (floor + remainder to the lowest class ids); a class with
/// fewer seen samples than its quota cedes the surplus to other classes.
class ReplayMemory {
 public:
  explicit ReplayMemory(Eigen::Index capacity) : capacity_(capacity) {}

  void update(const Experience& exp, Rng& rng);

  /// n samples drawn via an epoch-shuffled cursor: within one pass every
  /// stored sample appears once; the cursor wraps with a reshuffle when
  /// demand exceeds the stored count.
  LabeledBatch sample_batch(Eigen::Index n, Rng& rng);

  Eigen::Index capacity() const { return capacity_; }
  Eigen::Index stored() const;
  std::map<ClassId, Eigen::Index> stored_per_class() const;
  std::map<ClassId, Eigen::Index> seen_per_class() const;
  bool empty() const { return stored() == 0; }

  /// Flatten the memory contents (audit / phase-III epochs).
  LabeledBatch contents() const;
  void dump_csv(const std::string& path) const;

 private:
  struct ClassStore {
    std::vector<Vector> samples;
    Eigen::Index n_seen = 0;
  };

  void shrink_to(ClassStore& store, Eigen::Index quota, Rng& rng);

  Eigen::Index capacity_;
  std::map<ClassId, ClassStore> stores_;
  std::vector<std::pair<ClassId, Eigen::Index>> cursor_order_;
  std::size_t cursor_ = 0;
  bool cursor_dirty_ = true;
};

struct BatchPlan {
  Eigen::Index n_mbe = 0;
  Eigen::Index n_mbr = 0;
  Eigen::Index total() const { return n_mbe + n_mbr; }
};

/// n_mbe : n_mbr follows n_s : n_replay, with half-away-from-zero rounding.
BatchPlan batch_ratio(Eigen::Index n_s, Eigen::Index n_replay,
                      Eigen::Index total);

/// Visits each experience sample once per epoch (shuffled) and pads every
/// batch with replay samples per the plan. The final short batch keeps
/// n_mbr proportional, rounding down.
class MinibatchComposer {
 public:
  MinibatchComposer(const Experience& exp, ReplayMemory* mem, BatchPlan plan);

  /// Start a fresh pass over the experience.
  void begin_epoch(Rng& rng);

  /// Empty batch signals the end of the epoch.
  LabeledBatch next(Rng& rng);

  Eigen::Index batches_per_epoch() const;

 private:
  const Experience& exp_;
  ReplayMemory* mem_;
  BatchPlan plan_;
  std::vector<Eigen::Index> order_;
  std::size_t pos_ = 0;
};

}  // namespace tpc
