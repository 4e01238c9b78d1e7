#include "tpc/scenario.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace tpc {

namespace {

LabeledBatch take_rows(const LabeledBatch& src,
                       const std::vector<Eigen::Index>& rows) {
  LabeledBatch out;
  out.x.resize(static_cast<Eigen::Index>(rows.size()), src.x.cols());
  out.y.resize(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.x.row(static_cast<Eigen::Index>(i)) = src.x.row(rows[i]);
    out.y[i] = src.y[static_cast<std::size_t>(rows[i])];
  }
  return out;
}

std::vector<std::vector<Eigen::Index>> rows_by_class(const LabeledBatch& b,
                                                     ClassId n_classes) {
  std::vector<std::vector<Eigen::Index>> per(
      static_cast<std::size_t>(n_classes));
  for (Eigen::Index r = 0; r < b.size(); ++r)
    per[static_cast<std::size_t>(b.y[static_cast<std::size_t>(r)])].push_back(
        r);
  return per;
}

Experience make_experience(int index, const LabeledBatch& data) {
  Experience exp;
  exp.index = index;
  exp.data = data;
  for (ClassId y : data.y) class_set_insert(exp.classes, y);
  return exp;
}

void finalize_roles(ExperienceStream& stream) {
  ClassSet known;
  for (auto& exp : stream.experiences) {
    auto [novel, rep] = split_labels(exp, known);
    exp.y_novel = std::move(novel);
    exp.y_rep = std::move(rep);
    known = class_set_union(known, exp.classes);
  }
}

}  // namespace

Dataset gen_synthetic(ClassId n_classes, Eigen::Index dim,
                      Eigen::Index per_class, double separation,
                      std::uint64_t seed) {
  if (n_classes < 2 || dim < 2)
    throw ConfigError("gen_synthetic: need n_classes >= 2 and dim >= 2");
  Rng rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  // Cluster means: random directions scaled to the requested norm.
  Matrix means = Matrix::Zero(n_classes, dim);
  for (ClassId c = 0; c < n_classes; ++c) {
    Vector dir = Vector::NullaryExpr(dim, [&] { return gauss(rng); });
    const double norm = dir.norm();
    if (separation > 0.0 && norm > 0.0) means.row(c) = separation * dir / norm;
  }

  const Eigen::Index test_per_class = per_class / 4;  // 20% of the total
  Dataset ds;
  ds.n_classes = n_classes;
  auto fill = [&](LabeledBatch& batch, Eigen::Index count_per_class) {
    batch.x.resize(count_per_class * n_classes, dim);
    batch.y.resize(static_cast<std::size_t>(count_per_class * n_classes));
    Eigen::Index r = 0;
    for (ClassId c = 0; c < n_classes; ++c) {
      for (Eigen::Index i = 0; i < count_per_class; ++i, ++r) {
        batch.x.row(r) =
            means.row(c) +
            Vector::NullaryExpr(dim, [&] { return gauss(rng); }).transpose();
        batch.y[static_cast<std::size_t>(r)] = c;
      }
    }
  };
  fill(ds.train, per_class);
  fill(ds.test, test_per_class);
  return ds;
}

ExperienceStream make_class_incremental(const Dataset& ds, int A, int B,
                                        int C_per, std::uint64_t seed) {
  if (B + (A - 1) * C_per != ds.n_classes)
    throw ConfigError("A/B-C scenario: B + (A-1)*C must equal n_classes");
  Rng rng(seed);
  std::vector<ClassId> order(static_cast<std::size_t>(ds.n_classes));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  const auto per_class = rows_by_class(ds.train, ds.n_classes);
  ExperienceStream stream;
  stream.kind = ScenarioKind::class_incremental;
  stream.seed = seed;
  stream.descriptor = std::to_string(A) + "/" + std::to_string(B) + "-" +
                      std::to_string(C_per);

  std::size_t cursor = 0;
  for (int i = 0; i < A; ++i) {
    const int count = (i == 0) ? B : C_per;
    std::vector<Eigen::Index> rows;
    for (int c = 0; c < count; ++c, ++cursor) {
      const auto& cls_rows = per_class[static_cast<std::size_t>(order[cursor])];
      rows.insert(rows.end(), cls_rows.begin(), cls_rows.end());
    }
    stream.experiences.push_back(
        make_experience(i + 1, take_rows(ds.train, rows)));
  }
  finalize_roles(stream);
  return stream;
}

ExperienceStream make_nic(const Dataset& ds, int chunks_per_class, int first_B,
                          std::uint64_t seed) {
  if (chunks_per_class < 1 || first_B < 1 || first_B > ds.n_classes)
    throw ConfigError("make_nic: invalid chunk or first_B configuration");
  Rng rng(seed);
  std::vector<ClassId> order(static_cast<std::size_t>(ds.n_classes));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  // Per-class seeded shuffle, then equal-size contiguous chunks.
  auto per_class = rows_by_class(ds.train, ds.n_classes);
  for (auto& rows : per_class) std::shuffle(rows.begin(), rows.end(), rng);

  std::vector<std::vector<std::vector<Eigen::Index>>> chunks(
      per_class.size());
  for (std::size_t c = 0; c < per_class.size(); ++c) {
    const auto& rows = per_class[c];
    if (static_cast<int>(rows.size()) < chunks_per_class)
      throw ConfigError("make_nic: class has fewer samples than chunks");
    const std::size_t base = rows.size() / static_cast<std::size_t>(
                                               chunks_per_class);
    const std::size_t rem = rows.size() % static_cast<std::size_t>(
                                              chunks_per_class);
    std::size_t at = 0;
    for (int k = 0; k < chunks_per_class; ++k) {
      const std::size_t len = base + (static_cast<std::size_t>(k) < rem);
      chunks[c].emplace_back(rows.begin() + static_cast<std::ptrdiff_t>(at),
                             rows.begin() +
                                 static_cast<std::ptrdiff_t>(at + len));
      at += len;
    }
  }

  ExperienceStream stream;
  stream.kind = ScenarioKind::nic;
  stream.seed = seed;
  stream.descriptor = "nic-" + std::to_string(chunks_per_class) + "x" +
                      std::to_string(first_B);

  // Experience 1: first chunk of the first_B classes (in permuted order).
  std::vector<Eigen::Index> first_rows;
  std::vector<std::pair<ClassId, int>> remaining;  // (class, chunk index)
  for (std::size_t p = 0; p < order.size(); ++p) {
    const ClassId c = order[p];
    int start_chunk = 0;
    if (static_cast<int>(p) < first_B) {
      const auto& chunk = chunks[static_cast<std::size_t>(c)][0];
      first_rows.insert(first_rows.end(), chunk.begin(), chunk.end());
      start_chunk = 1;
    }
    for (int k = start_chunk; k < chunks_per_class; ++k)
      remaining.emplace_back(c, k);
  }
  if (remaining.empty())
    throw ConfigError("make_nic: stream needs at least 2 experiences");
  std::shuffle(remaining.begin(), remaining.end(), rng);

  stream.experiences.push_back(
      make_experience(1, take_rows(ds.train, first_rows)));
  int idx = 2;
  for (const auto& [c, k] : remaining) {
    stream.experiences.push_back(make_experience(
        idx++,
        take_rows(ds.train, chunks[static_cast<std::size_t>(c)]
                                  [static_cast<std::size_t>(k)])));
  }
  finalize_roles(stream);
  return stream;
}

std::pair<ClassSet, ClassSet> split_labels(const Experience& exp,
                                           const ClassSet& known) {
  ClassSet novel, rep;
  for (ClassId c : exp.classes)
    (class_set_contains(known, c) ? rep : novel).push_back(c);
  return {novel, rep};
}

Dataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("load_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("load_csv: empty file");

  // Header: f0,...,f{d-1},label
  std::size_t d = 0;
  {
    std::stringstream ss(line);
    std::string col;
    std::vector<std::string> cols;
    while (std::getline(ss, col, ',')) cols.push_back(col);
    if (cols.empty() || cols.back() != "label")
      throw ParseError("load_csv: header must end with a 'label' column");
    d = cols.size() - 1;
    for (std::size_t i = 0; i < d; ++i)
      if (cols[i] != "f" + std::to_string(i))
        throw ParseError("load_csv: unexpected header column '" + cols[i] +
                         "'");
  }

  std::vector<std::vector<double>> rows;
  std::vector<ClassId> labels;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ParseError("load_csv: malformed value at line " +
                         std::to_string(lineno));
      }
    }
    if (row.size() != d + 1)
      throw ParseError("load_csv: wrong column count at line " +
                       std::to_string(lineno));
    const double lab = row.back();
    row.pop_back();
    if (lab < 0.0 || lab != std::floor(lab))
      throw ParseError("load_csv: label must be a non-negative integer, line " +
                       std::to_string(lineno));
    rows.push_back(std::move(row));
    labels.push_back(static_cast<ClassId>(lab));
  }
  if (rows.empty()) throw ParseError("load_csv: no data rows in " + path);

  Dataset ds;
  ds.train.x.resize(static_cast<Eigen::Index>(rows.size()),
                    static_cast<Eigen::Index>(d));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < d; ++c)
      ds.train.x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          rows[r][c];
  ds.train.y = std::move(labels);
  ds.n_classes = *std::max_element(ds.train.y.begin(), ds.train.y.end()) + 1;
  return ds;
}

void save_csv(const LabeledBatch& batch, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("save_csv: cannot open " + path);
  for (Eigen::Index c = 0; c < batch.x.cols(); ++c) out << "f" << c << ",";
  out << "label\n";
  char buf[32];
  for (Eigen::Index r = 0; r < batch.size(); ++r) {
    for (Eigen::Index c = 0; c < batch.x.cols(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", batch.x(r, c));
      out << buf << ",";
    }
    out << batch.y[static_cast<std::size_t>(r)] << "\n";
  }
}

Dataset split_train_test(const Dataset& ds, double test_fraction,
                         std::uint64_t seed) {
  if (test_fraction < 0.0 || test_fraction >= 1.0)
    throw ConfigError("split_train_test: fraction must be in [0,1)");
  Rng rng(seed);
  auto per_class = rows_by_class(ds.train, ds.n_classes);
  std::vector<Eigen::Index> train_rows, test_rows;
  for (auto& rows : per_class) {
    std::shuffle(rows.begin(), rows.end(), rng);
    const auto n_test = static_cast<std::size_t>(
        std::floor(test_fraction * static_cast<double>(rows.size())));
    for (std::size_t i = 0; i < rows.size(); ++i)
      (i < n_test ? test_rows : train_rows).push_back(rows[i]);
  }
  std::sort(train_rows.begin(), train_rows.end());
  std::sort(test_rows.begin(), test_rows.end());
  Dataset out;
  out.n_classes = ds.n_classes;
  out.train = take_rows(ds.train, train_rows);
  out.test = take_rows(ds.train, test_rows);
  return out;
}

}  // namespace tpc
