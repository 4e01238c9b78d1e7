#include "tpc/metrics.hpp"

namespace tpc {

ClassId predict_row(const Matrix& logits, Eigen::Index row) {
  ClassId best = 0;
  double best_val = logits(row, 0);
  for (Eigen::Index k = 1; k < logits.cols(); ++k)
    if (logits(row, k) > best_val) {
      best_val = logits(row, k);
      best = static_cast<ClassId>(k);
    }
  return best;
}

EvalRecord evaluate(const SplitModel& model, const LabeledBatch& test,
                    const ClassSet& seen, TestSetMode mode) {
  if (test.size() == 0)
    throw ConfigError("evaluate: empty test split");
  EvalRecord rec;
  rec.mode = mode;

  ClassSet eval_classes;
  if (mode == TestSetMode::growing) {
    eval_classes = seen;
  } else {
    for (ClassId c = 0; c < model.n_classes(); ++c) eval_classes.push_back(c);
  }

  std::map<ClassId, Eigen::Index> correct, total;
  for (ClassId c : eval_classes) {
    correct[c] = 0;
    total[c] = 0;
  }

  const ForwardCache cache = forward(model, test.x);
  Eigen::Index n_used = 0, n_correct = 0;
  for (Eigen::Index r = 0; r < test.size(); ++r) {
    const ClassId y = test.y[static_cast<std::size_t>(r)];
    if (mode == TestSetMode::growing && !class_set_contains(seen, y)) continue;
    ++total[y];
    ++n_used;
    if (predict_row(cache.logits, r) == y) {
      ++correct[y];
      ++n_correct;
    }
  }

  double sum = 0.0;
  int counted = 0;
  for (ClassId c : eval_classes) {
    if (total[c] == 0) {
      rec.empty_classes.push_back(c);
      continue;
    }
    const double acc =
        static_cast<double>(correct[c]) / static_cast<double>(total[c]);
    rec.per_class_accuracy[c] = acc;
    sum += acc;
    ++counted;
  }
  rec.mean_class_accuracy = counted > 0 ? sum / counted : 0.0;
  rec.overall_accuracy =
      n_used > 0 ? static_cast<double>(n_correct) / static_cast<double>(n_used)
                 : 0.0;
  return rec;
}

double amca(const RunHistory& history) {
  if (history.records.empty()) throw ConfigError("amca: empty history");
  double sum = 0.0;
  for (const auto& rec : history.records) sum += rec.mean_class_accuracy;
  return sum / static_cast<double>(history.records.size());
}

double final_accuracy(const RunHistory& history) {
  if (history.records.empty())
    throw ConfigError("final_accuracy: empty history");
  return history.records.back().mean_class_accuracy;
}

}  // namespace tpc
