#pragma once

#include "tpc/types.hpp"

#include <string>

namespace tpc {

struct Dataset {
  LabeledBatch train;
  LabeledBatch test;
  ClassId n_classes = 0;
  Eigen::Index dim() const { return train.x.cols(); }
};

struct Experience {
  int index = 0;  // 1-based, matching stream order
  LabeledBatch data;
  ClassSet classes;  // distinct labels present
  ClassSet y_novel;
  ClassSet y_rep;
};

enum class ScenarioKind { class_incremental, nic };

struct ExperienceStream {
  std::vector<Experience> experiences;
  ScenarioKind kind = ScenarioKind::class_incremental;
  std::string descriptor;  // e.g. "6/5-1"
  std::uint64_t seed = 0;
};

/// Gaussian clusters with unit covariance; cluster means have norm equal to
/// `separation`. Produces per_class train samples per class plus a held-out
/// test split sized at 20% of the combined data (per_class/4 per class).
Dataset gen_synthetic(ClassId n_classes, Eigen::Index dim,
                      Eigen::Index per_class, double separation,
                      std::uint64_t seed);

/// A/B-C class-incremental split: experience 1 carries B classes, each of
/// the remaining A-1 experiences carries C fresh classes. Requires
/// B + (A-1)*C == n_classes.
ExperienceStream make_class_incremental(const Dataset& ds, int A, int B,
                                        int C_per, std::uint64_t seed);

/// Class-incremental with repetition: each class's train samples are split
/// into `chunks_per_class` equal chunks; experience 1 carries the first
/// chunk of `first_B` classes, every remaining chunk becomes one experience
/// (novel or repetition), in seeded shuffle order.
ExperienceStream make_nic(const Dataset& ds, int chunks_per_class, int first_B,
                          std::uint64_t seed);

/// Partition the experience's label set against the already-known classes.
std::pair<ClassSet, ClassSet> split_labels(const Experience& exp,
                                           const ClassSet& known);

/// CSV schema: header f0,...,f{d-1},label. All rows land in the train split;
/// use split_train_test to carve out a held-out portion.
Dataset load_csv(const std::string& path);
void save_csv(const LabeledBatch& batch, const std::string& path);

/// Move a seeded per-class fraction of the train split into the test split.
Dataset split_train_test(const Dataset& ds, double test_fraction,
                         std::uint64_t seed);

}  // namespace tpc
