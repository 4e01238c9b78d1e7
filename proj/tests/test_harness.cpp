#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "tpc/experiment.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace tpc;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int count_lines(const std::string& text) {
  int n = 0;
  for (char c : text)
    if (c == '\n') ++n;
  return n;
}

// Small, fast experiment used by every end-to-end case below.
ExperimentConfig small_experiment(const std::string& out_dir) {
  ExperimentConfig cfg;
  cfg.classes = 4;
  cfg.dim = 4;
  cfg.per_class = 24;
  cfg.separation = 5.0;
  cfg.A = 2;
  cfg.B = 2;
  cfg.C = 2;
  cfg.strategies = {"tpc", "naive"};
  cfg.seeds = {1, 2};
  cfg.output_dir = out_dir;
  cfg.hyper.epochs_total = 2;
  cfg.hyper.minibatch = 16;
  cfg.hyper.replay_capacity = 24;
  cfg.hyper.llf_widths = {6};
  cfg.hyper.csf_widths = {6};
  return cfg;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name)
      : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("config defaults when every section is omitted") {
  const ExperimentConfig cfg = parse_config_text("{}");
  CHECK(cfg.synthetic);
  CHECK(cfg.classes == 10);
  CHECK(cfg.dim == 16);
  CHECK(cfg.per_class == 200);
  CHECK(cfg.separation == doctest::Approx(6.0));
  CHECK(cfg.A == 6);
  CHECK(cfg.B == 5);
  CHECK(cfg.C == 1);
  CHECK(cfg.seeds == std::vector<std::uint64_t>{1, 2, 3, 4});
  CHECK(cfg.eval.interval == 1);
  CHECK(cfg.eval.mode == TestSetMode::fixed);
  CHECK(cfg.hyper.epochs_total == 8);
  CHECK(cfg.hyper.bc.w_bc == doctest::Approx(5.0));
  CHECK(cfg.hyper.bc.s == doctest::Approx(0.05));
  CHECK(cfg.hyper.t == doctest::Approx(0.5));
  CHECK(cfg.hyper.phase1_frac == doctest::Approx(0.10));
  CHECK(cfg.hyper.phase3_frac == doctest::Approx(0.10));
  CHECK(cfg.hyper.lr == doctest::Approx(0.005));
  CHECK(cfg.hyper.momentum == doctest::Approx(0.9));
  CHECK(cfg.hyper.replay_capacity == 200);
}

TEST_CASE("config parsing of an explicit document") {
  const char* text = R"({
    "dataset": {"synthetic": {"classes": 6, "dim": 8, "per_class": 30,
                              "separation": 4.5}},
    "scenario": {"type": "class_incremental", "A": 3, "B": 2, "C": 2},
    "strategies": ["tpc", "replay", "cwr_star"],
    "seeds": [10, 11, 12],
    "eval": {"mode": "growing", "interval": 2},
    "output_dir": "results",
    "hyper": {"epochs_total": 6, "w_bc": 2.0, "t": 0.4, "minibatch": 64,
              "llf_widths": [16, 16], "csf_widths": [8]}
  })";
  const ExperimentConfig cfg = parse_config_text(text);
  CHECK(cfg.classes == 6);
  CHECK(cfg.dim == 8);
  CHECK(cfg.A == 3);
  CHECK(cfg.strategies == std::vector<std::string>{"tpc", "replay", "cwr_star"});
  CHECK(cfg.seeds == std::vector<std::uint64_t>{10, 11, 12});
  CHECK(cfg.eval.mode == TestSetMode::growing);
  CHECK(cfg.eval.interval == 2);
  CHECK(cfg.output_dir == "results");
  CHECK(cfg.hyper.bc.w_bc == doctest::Approx(2.0));
  CHECK(cfg.hyper.t == doctest::Approx(0.4));
  CHECK(cfg.hyper.llf_widths == std::vector<Eigen::Index>{16, 16});
  CHECK(cfg.hyper.csf_widths == std::vector<Eigen::Index>{8});
}

TEST_CASE("config rejection cases") {
  CHECK_THROWS_AS(parse_config_text("not json"), ConfigError);
  CHECK_THROWS_AS(parse_config_text(R"({"surprise": 1})"), ConfigError);
  CHECK_THROWS_AS(parse_config_text(R"({"hyper": {"wbc": 1.0}})"),
                  ConfigError);
  // 5 + (6-1)*2 != 10
  CHECK_THROWS_AS(
      parse_config_text(R"({"scenario": {"A": 6, "B": 5, "C": 2}})"),
      ConfigError);
  CHECK_THROWS_AS(
      parse_config_text(R"({"scenario": {"type": "rings"}})"), ConfigError);
  CHECK_THROWS_AS(parse_config_text(R"({"strategies": ["ewc"]})"),
                  ConfigError);
  CHECK_THROWS_AS(parse_config_text(R"({"seeds": []})"), ConfigError);
  CHECK_THROWS_AS(
      parse_config_text(R"({"eval": {"mode": "sliding"}})"), ConfigError);
  CHECK_THROWS_AS(
      parse_config_text(R"({"eval": {"interval": 0}})"), ConfigError);
  CHECK_THROWS_AS(
      parse_config_text(R"({"hyper": {"phase1_frac": 0.6}})"), ConfigError);
  CHECK_THROWS_AS(
      parse_config_text(R"({"hyper": {"epochs_total": 0}})"), ConfigError);
  CHECK_THROWS_AS(
      parse_config_text(
          R"({"dataset": {"synthetic": {"classes": 2}, "csv": "x.csv"}})"),
      ConfigError);
}

TEST_CASE("serialize_config round-trips through the parser") {
  ExperimentConfig cfg;
  cfg.classes = 8;
  cfg.B = 3;
  cfg.A = 6;
  cfg.C = 1;
  cfg.strategies = {"tpc"};
  cfg.seeds = {5};
  cfg.hyper.bc.w_bc = 3.25;
  cfg.hyper.llf_widths = {12};
  const ExperimentConfig back = parse_config_text(serialize_config(cfg));
  CHECK(back.classes == 8);
  CHECK(back.B == 3);
  CHECK(back.strategies == std::vector<std::string>{"tpc"});
  CHECK(back.seeds == std::vector<std::uint64_t>{5});
  CHECK(back.hyper.bc.w_bc == doctest::Approx(3.25));
  CHECK(back.hyper.llf_widths == std::vector<Eigen::Index>{12});
}

TEST_CASE("reporting seeds reserve the first for tuning") {
  ExperimentConfig cfg;
  cfg.seeds = {1, 2, 3, 4};
  CHECK(reporting_seeds(cfg) == std::vector<std::uint64_t>{2, 3, 4});
  cfg.seeds = {9};
  CHECK(reporting_seeds(cfg) == std::vector<std::uint64_t>{9});
}

TEST_CASE("cmd_run writes histories, a summary, and an svg") {
  TempDir dir("tpc_harness_run");
  const ExperimentConfig cfg = small_experiment((dir.path / "out").string());
  REQUIRE(cmd_run(cfg) == 0);

  const fs::path out = dir.path / "out";
  for (const char* name :
       {"tpc_seed1.csv", "tpc_seed2.csv", "naive_seed1.csv",
        "naive_seed2.csv", "summary.csv", "accuracy.svg"})
    CHECK(fs::exists(out / name));

  SUBCASE("summary has one row per strategy-seed pair") {
    const std::string summary = slurp(out / "summary.csv");
    CHECK(count_lines(summary) == 1 + 4);
    CHECK(summary.rfind("strategy,seed,amca,final_accuracy,wall_clock_s\n",
                        0) == 0);
  }

  SUBCASE("history rows recompute to the summary's amca") {
    // 2 experiences, eval at both; fixed mode covers 4 classes each time:
    // header + 2 * (4 class rows + 1 mean row).
    const std::string history = slurp(out / "tpc_seed1.csv");
    CHECK(count_lines(history) == 1 + 2 * 5);

    std::istringstream in(history);
    std::string line;
    std::getline(in, line);  // header
    double mean_sum = 0.0;
    int mean_rows = 0;
    while (std::getline(in, line)) {
      const auto c1 = line.find(','), c2 = line.rfind(',');
      if (line.substr(c1 + 1, c2 - c1 - 1) == "mean_class_accuracy") {
        mean_sum += std::stod(line.substr(c2 + 1));
        ++mean_rows;
      }
    }
    CHECK(mean_rows == 2);

    const std::string summary = slurp(out / "summary.csv");
    std::istringstream sin(summary);
    std::getline(sin, line);  // header
    std::getline(sin, line);  // tpc, seed 1
    std::stringstream row(line);
    std::string strategy, seed, amca_text;
    std::getline(row, strategy, ',');
    std::getline(row, seed, ',');
    std::getline(row, amca_text, ',');
    CHECK(strategy == "tpc");
    CHECK(seed == "1");
    CHECK(std::stod(amca_text) ==
          doctest::Approx(mean_sum / mean_rows).epsilon(1e-9));
  }

  SUBCASE("svg has one polyline per strategy with one point per eval") {
    const std::string svg = slurp(out / "accuracy.svg");
    std::size_t polylines = 0, pos = 0;
    while ((pos = svg.find("<polyline", pos)) != std::string::npos) {
      ++polylines;
      pos += 9;
    }
    CHECK(polylines == 2);
    CHECK(svg.find("stroke-dasharray") != std::string::npos);
    CHECK(svg.find("tpc (AMCA") != std::string::npos);
    CHECK(svg.find("naive (AMCA") != std::string::npos);
  }

  SUBCASE("a rerun reproduces the outputs byte for byte") {
    const std::string summary_a = slurp(out / "summary.csv");
    const std::string history_a = slurp(out / "tpc_seed2.csv");
    const std::string svg_a = slurp(out / "accuracy.svg");
    REQUIRE(cmd_run(cfg) == 0);
    // wall-clock differs between runs, so compare everything but that column
    const std::string summary_b = slurp(out / "summary.csv");
    auto strip_clock = [](const std::string& text) {
      std::istringstream in(text);
      std::string line, acc;
      while (std::getline(in, line))
        acc += line.substr(0, line.rfind(',')) + "\n";
      return acc;
    };
    CHECK(strip_clock(summary_a) == strip_clock(summary_b));
    CHECK(history_a == slurp(out / "tpc_seed2.csv"));
    CHECK(svg_a == slurp(out / "accuracy.svg"));
  }
}

TEST_CASE("cmd_ablate writes the two-row toggle table") {
  TempDir dir("tpc_harness_ablate");
  ExperimentConfig cfg = small_experiment((dir.path / "out").string());
  cfg.strategies = {"tpc"};
  REQUIRE(cmd_ablate(cfg, AblationSpec{}) == 0);

  const std::string table = slurp(dir.path / "out" / "ablation.csv");
  CHECK(count_lines(table) == 3);
  CHECK(table.rfind("scenario,replay_mode,full,no_bias_correction,"
                    "no_gradient_masking,no_phase3\n",
                    0) == 0);
  CHECK(table.find("2/2-2,replay,") != std::string::npos);
  CHECK(table.find("2/2-2,no_replay,") != std::string::npos);
  // The no-replay row has no phase III to remove.
  const std::size_t last = table.rfind(",-");
  CHECK(last != std::string::npos);
  CHECK(table.find(",-", table.find("no_replay")) != std::string::npos);
}

TEST_CASE("build_dataset and build_stream honor the config") {
  ExperimentConfig cfg = small_experiment("unused");
  const Dataset ds = build_dataset(cfg, 3);
  CHECK(ds.n_classes == 4);
  CHECK(ds.train.size() == 96);
  const ExperienceStream stream = build_stream(cfg, ds, 3);
  CHECK(stream.experiences.size() == 2);

  cfg.kind = ScenarioKind::nic;
  cfg.chunks_per_class = 2;
  cfg.first_B = 2;
  const ExperienceStream nic = build_stream(cfg, ds, 3);
  CHECK(nic.kind == ScenarioKind::nic);
  CHECK(nic.experiences.size() == 1 + (4 * 2 - 2));
}
