#pragma once

#include "tpc/net.hpp"
#include "tpc/scenario.hpp"

#include <map>

namespace tpc {

enum class TestSetMode { fixed, growing };

struct EvalRecord {
  int experience = 0;
  std::map<ClassId, double> per_class_accuracy;
  double mean_class_accuracy = 0.0;
  double overall_accuracy = 0.0;
  TestSetMode mode = TestSetMode::fixed;
  std::vector<ClassId> empty_classes;  // excluded from the mean
};

struct RunHistory {
  std::vector<EvalRecord> records;
  std::vector<double> wall_clock_s;  // per experience
  std::uint64_t seed = 0;
  std::string strategy;
};

/// Argmax predictions with ties broken by lowest class id. In growing mode
/// both the evaluated samples and the averaging set are restricted to the
/// given class set; fixed mode uses every dataset class.
EvalRecord evaluate(const SplitModel& model, const LabeledBatch& test,
                    const ClassSet& seen, TestSetMode mode);

ClassId predict_row(const Matrix& logits, Eigen::Index row);

/// Average Mean Class Accuracy over the evaluated experiences.
double amca(const RunHistory& history);

/// Mean-class accuracy of the last record.
double final_accuracy(const RunHistory& history);

}  // namespace tpc
