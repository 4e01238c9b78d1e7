#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "tpc/scenario.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <map>
#include <set>

using namespace tpc;

namespace {

std::map<ClassId, int> label_counts(const Labels& y) {
  std::map<ClassId, int> counts;
  for (ClassId c : y) ++counts[c];
  return counts;
}

// Every (row, label) of the stream as an order-free multiset keyed on the
// first feature value, which is unique per sample in gen_synthetic output
// with probability 1.
std::multiset<std::pair<double, ClassId>> stream_multiset(
    const ExperienceStream& stream) {
  std::multiset<std::pair<double, ClassId>> out;
  for (const auto& exp : stream.experiences)
    for (Eigen::Index r = 0; r < exp.data.size(); ++r)
      out.insert({exp.data.x(r, 0), exp.data.y[static_cast<std::size_t>(r)]});
  return out;
}

std::multiset<std::pair<double, ClassId>> dataset_multiset(const Dataset& ds) {
  std::multiset<std::pair<double, ClassId>> out;
  for (Eigen::Index r = 0; r < ds.train.size(); ++r)
    out.insert({ds.train.x(r, 0), ds.train.y[static_cast<std::size_t>(r)]});
  return out;
}

}  // namespace

TEST_CASE("gen_synthetic shapes and counts") {
  const Dataset ds = gen_synthetic(4, 6, 40, 3.0, 7);
  CHECK(ds.n_classes == 4);
  CHECK(ds.dim() == 6);
  CHECK(ds.train.size() == 160);
  CHECK(ds.test.size() == 40);
  const auto train_counts = label_counts(ds.train.y);
  const auto test_counts = label_counts(ds.test.y);
  for (ClassId c = 0; c < 4; ++c) {
    CHECK(train_counts.at(c) == 40);
    CHECK(test_counts.at(c) == 10);
  }
}

TEST_CASE("gen_synthetic is deterministic in the seed") {
  const Dataset a = gen_synthetic(3, 5, 20, 4.0, 11);
  const Dataset b = gen_synthetic(3, 5, 20, 4.0, 11);
  const Dataset c = gen_synthetic(3, 5, 20, 4.0, 12);
  CHECK((a.train.x.array() == b.train.x.array()).all());
  CHECK(a.train.y == b.train.y);
  CHECK((a.test.x.array() == b.test.x.array()).all());
  CHECK_FALSE((a.train.x.array() == c.train.x.array()).all());
}

TEST_CASE("gen_synthetic class means sit near their separation shell") {
  const double sep = 8.0;
  const Dataset ds = gen_synthetic(5, 12, 400, sep, 3);
  for (ClassId c = 0; c < 5; ++c) {
    Vector mean = Vector::Zero(12);
    int n = 0;
    for (Eigen::Index r = 0; r < ds.train.size(); ++r)
      if (ds.train.y[static_cast<std::size_t>(r)] == c) {
        mean += ds.train.x.row(r).transpose();
        ++n;
      }
    mean /= n;
    // sample mean of 400 unit-variance points: s.e. 1/20 per coordinate
    CHECK(mean.norm() == doctest::Approx(sep).epsilon(0.05));
  }
}

TEST_CASE("higher separation separates the clusters more") {
  auto min_centroid_gap = [](const Dataset& ds) {
    std::map<ClassId, Vector> centroids;
    std::map<ClassId, int> counts;
    for (Eigen::Index r = 0; r < ds.train.size(); ++r) {
      const ClassId c = ds.train.y[static_cast<std::size_t>(r)];
      if (!centroids.count(c)) centroids[c] = Vector::Zero(ds.dim());
      centroids[c] += ds.train.x.row(r).transpose();
      ++counts[c];
    }
    double gap = 1e300;
    for (auto& [c, v] : centroids) v /= counts[c];
    for (auto& [c1, v1] : centroids)
      for (auto& [c2, v2] : centroids)
        if (c1 < c2) gap = std::min(gap, (v1 - v2).norm());
    return gap;
  };
  const double near = min_centroid_gap(gen_synthetic(6, 8, 100, 1.0, 5));
  const double far = min_centroid_gap(gen_synthetic(6, 8, 100, 10.0, 5));
  CHECK(far > near);
}

TEST_CASE("class-incremental 6/5-1 structure") {
  const Dataset ds = gen_synthetic(10, 4, 24, 3.0, 1);
  const ExperienceStream stream = make_class_incremental(ds, 6, 5, 1, 42);

  CHECK(stream.experiences.size() == 6);
  CHECK(stream.descriptor == "6/5-1");
  CHECK(stream.experiences[0].classes.size() == 5);
  for (std::size_t i = 1; i < 6; ++i)
    CHECK(stream.experiences[i].classes.size() == 1);

  SUBCASE("experience class sets are disjoint and cover the dataset") {
    ClassSet all;
    std::size_t total = 0;
    for (const auto& exp : stream.experiences) {
      total += exp.classes.size();
      all = class_set_union(all, exp.classes);
    }
    CHECK(all.size() == total);  // disjoint
    CHECK(all.size() == 10);
  }

  SUBCASE("stream carries exactly the train split") {
    CHECK(stream_multiset(stream) == dataset_multiset(ds));
  }

  SUBCASE("every experience holds only its own classes") {
    for (const auto& exp : stream.experiences)
      for (ClassId y : exp.data.y) CHECK(class_set_contains(exp.classes, y));
  }

  SUBCASE("class order depends on the scenario seed") {
    const ExperienceStream other = make_class_incremental(ds, 6, 5, 1, 43);
    bool same = true;
    for (std::size_t i = 0; i < 6; ++i)
      same = same && stream.experiences[i].classes ==
                         other.experiences[i].classes;
    CHECK_FALSE(same);
    const ExperienceStream again = make_class_incremental(ds, 6, 5, 1, 42);
    for (std::size_t i = 0; i < 6; ++i)
      CHECK(stream.experiences[i].classes == again.experiences[i].classes);
  }
}

TEST_CASE("class-incremental rejects inconsistent arithmetic") {
  const Dataset ds = gen_synthetic(10, 4, 8, 3.0, 1);
  CHECK_THROWS_AS(make_class_incremental(ds, 6, 5, 2, 0), ConfigError);
  CHECK_THROWS_AS(make_class_incremental(ds, 4, 2, 1, 0), ConfigError);
}

TEST_CASE("nic chunking") {
  const Dataset ds = gen_synthetic(4, 3, 40, 3.0, 9);
  const int chunks = 4, first_B = 2;
  const ExperienceStream stream = make_nic(ds, chunks, first_B, 17);

  CHECK(stream.kind == ScenarioKind::nic);
  // 4 classes * 4 chunks = 16 chunks; experience 1 takes first_B of them.
  CHECK(stream.experiences.size() == 1 + (16 - first_B));

  SUBCASE("experience 1 carries one chunk from each of first_B classes") {
    const Experience& first = stream.experiences[0];
    CHECK(first.classes.size() == 2);
    CHECK(first.data.size() == 20);  // two chunks of 10
  }

  SUBCASE("later experiences are single chunks") {
    for (std::size_t i = 1; i < stream.experiences.size(); ++i) {
      CHECK(stream.experiences[i].classes.size() == 1);
      CHECK(stream.experiences[i].data.size() == 10);
    }
  }

  SUBCASE("chunks cover the train split exactly once") {
    CHECK(stream_multiset(stream) == dataset_multiset(ds));
  }

  SUBCASE("each class appears in chunks_per_class experiences") {
    std::map<ClassId, int> appearances;
    for (const auto& exp : stream.experiences)
      for (ClassId c : exp.classes) ++appearances[c];
    for (ClassId c = 0; c < 4; ++c) CHECK(appearances[c] == chunks);
  }
}

TEST_CASE("nic with one chunk per class degenerates to class-incremental") {
  const Dataset ds = gen_synthetic(5, 3, 12, 3.0, 2);
  const ExperienceStream stream = make_nic(ds, 1, 2, 21);
  CHECK(stream.experiences.size() == 4);
  ClassSet all;
  for (const auto& exp : stream.experiences)
    all = class_set_union(all, exp.classes);
  CHECK(all.size() == 5);
}

TEST_CASE("split_labels partitions against the known set") {
  Experience exp;
  exp.classes = {1, 2, 3, 4};
  const ClassSet known = {1, 2, 3};
  auto [novel, rep] = split_labels(exp, known);
  CHECK(novel == ClassSet{4});
  CHECK(rep == ClassSet{1, 2, 3});

  SUBCASE("worked configuration: labels {1,3}, known {0,1,2}") {
    Experience w;
    w.classes = {1, 3};
    auto [n2, r2] = split_labels(w, {0, 1, 2});
    CHECK(n2 == ClassSet{3});
    CHECK(r2 == ClassSet{1});
  }

  SUBCASE("empty known set: everything is novel") {
    auto [n3, r3] = split_labels(exp, {});
    CHECK(n3 == exp.classes);
    CHECK(r3.empty());
  }
}

TEST_CASE("csv round trip") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "tpc_scenario_test";
  fs::create_directories(dir);
  const std::string path = (dir / "roundtrip.csv").string();

  const Dataset ds = gen_synthetic(3, 5, 8, 2.0, 4);
  save_csv(ds.train, path);
  const Dataset loaded = load_csv(path);

  CHECK(loaded.train.size() == ds.train.size());
  CHECK(loaded.test.size() == 0);
  CHECK(loaded.n_classes == 3);
  CHECK((loaded.train.x - ds.train.x).cwiseAbs().maxCoeff() == 0.0);
  CHECK(loaded.train.y == ds.train.y);
  fs::remove_all(dir);
}

TEST_CASE("csv loader rejects malformed input with line numbers") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "tpc_scenario_bad";
  fs::create_directories(dir);
  auto write = [&](const std::string& name, const std::string& text) {
    const std::string path = (dir / name).string();
    std::FILE* f = std::fopen(path.c_str(), "w");
    std::fputs(text.c_str(), f);
    std::fclose(f);
    return path;
  };

  CHECK_THROWS_AS(load_csv(write("head.csv", "a,b,label\n1,2,0\n")),
                  ParseError);
  CHECK_THROWS_AS(load_csv(write("short.csv", "f0,f1,label\n1,0\n")),
                  ParseError);
  CHECK_THROWS_AS(load_csv(write("text.csv", "f0,f1,label\n1,x,0\n")),
                  ParseError);
  CHECK_THROWS_AS(load_csv(write("neg.csv", "f0,f1,label\n1,2,-3\n")),
                  ParseError);
  CHECK_THROWS_AS(load_csv((dir / "missing.csv").string()), ParseError);

  try {
    load_csv(write("line.csv", "f0,f1,label\n1,2,0\nbroken\n"));
    CHECK(false);
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("3") != std::string::npos);
  }
  fs::remove_all(dir);
}

TEST_CASE("split_train_test carves a per-class fraction") {
  Dataset ds = gen_synthetic(4, 3, 40, 2.0, 6);
  ds.train.x.conservativeResize(ds.train.size() + ds.test.size(), 3);
  // fold test rows back so we control the totals: start from train-only
  ds = gen_synthetic(4, 3, 40, 2.0, 6);
  Dataset flat;
  flat.train = ds.train;
  flat.n_classes = ds.n_classes;

  const Dataset split = split_train_test(flat, 0.25, 31);
  CHECK(split.train.size() + split.test.size() == 160);
  const auto test_counts = label_counts(split.test.y);
  for (ClassId c = 0; c < 4; ++c) CHECK(test_counts.at(c) == 10);

  SUBCASE("deterministic in the seed") {
    const Dataset again = split_train_test(flat, 0.25, 31);
    CHECK((again.test.x.array() == split.test.x.array()).all());
  }

  SUBCASE("train and test rows are disjoint and cover the input") {
    std::multiset<double> keys, want;
    for (Eigen::Index r = 0; r < split.train.size(); ++r)
      keys.insert(split.train.x(r, 0));
    for (Eigen::Index r = 0; r < split.test.size(); ++r)
      keys.insert(split.test.x(r, 0));
    for (Eigen::Index r = 0; r < flat.train.size(); ++r)
      want.insert(flat.train.x(r, 0));
    CHECK(keys == want);
  }
}
