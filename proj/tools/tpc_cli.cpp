#include "tpc/experiment.hpp"

#include <CLI11.hpp>

#include <cstdio>

namespace {

void apply_overrides(tpc::ExperimentConfig& cfg,
                     const std::vector<std::uint64_t>& seeds,
                     const std::string& out_dir, int eval_interval) {
  if (!seeds.empty()) cfg.seeds = seeds;
  if (!out_dir.empty()) cfg.output_dir = out_dir;
  if (eval_interval > 0) cfg.eval.interval = eval_interval;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Continual-learning lab: three-phase consolidation and "
               "baselines on a dense-net engine"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  std::vector<std::uint64_t> seeds;
  int eval_interval = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("config", config_path, "experiment config (JSON)")
        ->required();
    sub->add_option("--seed-list", seeds, "override the config's seed list");
    sub->add_option("--out-dir", out_dir, "override the output directory");
    sub->add_option("--eval-interval", eval_interval,
                    "override the evaluation interval");
  };

  CLI::App* run = app.add_subcommand("run", "run each strategy x seed");
  add_common(run);

  CLI::App* ablate =
      app.add_subcommand("ablate", "full TPC vs single-toggle variants");
  add_common(ablate);
  std::vector<std::string> toggles;
  ablate->add_option("--toggles", toggles,
                     "subset of {no_bias_correction, no_gradient_masking, "
                     "no_phase3, no_replay}; default all");

  CLI::App* gen = app.add_subcommand("gen-data", "emit a synthetic dataset");
  int g_classes = 10;
  long long g_dim = 16, g_per_class = 200;
  double g_separation = 6.0;
  std::uint64_t g_seed = 1;
  std::string g_out;
  gen->add_option("--classes", g_classes);
  gen->add_option("--dim", g_dim);
  gen->add_option("--per-class", g_per_class);
  gen->add_option("--separation", g_separation);
  gen->add_option("--seed", g_seed);
  gen->add_option("-o,--output", g_out, "output CSV path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      const tpc::Dataset ds = tpc::gen_synthetic(
          g_classes, g_dim, g_per_class, g_separation, g_seed);
      tpc::LabeledBatch all;
      all.x.resize(ds.train.size() + ds.test.size(), ds.dim());
      all.x << ds.train.x, ds.test.x;
      all.y = ds.train.y;
      all.y.insert(all.y.end(), ds.test.y.begin(), ds.test.y.end());
      tpc::save_csv(all, g_out);
      return 0;
    }

    tpc::ExperimentConfig cfg = tpc::parse_config(config_path);
    apply_overrides(cfg, seeds, out_dir, eval_interval);

    if (run->parsed()) return tpc::cmd_run(cfg);

    tpc::AblationSpec spec;
    if (!toggles.empty()) {
      spec = {false, false, false, false};
      for (const auto& t : toggles) {
        if (t == "no_bias_correction")
          spec.no_bias_correction = true;
        else if (t == "no_gradient_masking")
          spec.no_gradient_masking = true;
        else if (t == "no_phase3")
          spec.no_phase3 = true;
        else if (t == "no_replay")
          spec.no_replay = true;
        else
          throw tpc::ConfigError("unknown toggle: " + t);
      }
    }
    return tpc::cmd_ablate(cfg, spec);
  } catch (const tpc::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
