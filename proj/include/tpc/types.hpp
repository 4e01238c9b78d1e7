#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace tpc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using ClassId = int;
using Rng = std::mt19937_64;

struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct LabelError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using Labels = std::vector<ClassId>;
using ClassSet = std::vector<ClassId>;  // kept sorted, unique

struct LabeledBatch {
  Matrix x;  // n x d
  Labels y;  // n labels

  Eigen::Index size() const { return x.rows(); }
};

/// Sorted-unique insertion helpers for the small class sets used throughout.
void class_set_insert(ClassSet& s, ClassId c);
bool class_set_contains(const ClassSet& s, ClassId c);
ClassSet class_set_union(const ClassSet& a, const ClassSet& b);

}  // namespace tpc
