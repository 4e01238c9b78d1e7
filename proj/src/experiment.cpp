#include "tpc/experiment.hpp"

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

namespace tpc {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, const std::vector<std::string>& allowed,
                    const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
      throw ConfigError("config: unknown key '" + it.key() + "' in " + where);
  }
}

template <typename T>
void read_if(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }

  ExperimentConfig cfg;
  reject_unknown(root,
                 {"dataset", "scenario", "strategies", "seeds", "eval",
                  "output_dir", "hyper"},
                 "top level");

  if (root.contains("dataset")) {
    const json& ds = root.at("dataset");
    reject_unknown(ds, {"synthetic", "csv", "test_fraction"}, "dataset");
    if (ds.contains("synthetic") && ds.contains("csv"))
      throw ConfigError("config: dataset must be synthetic or csv, not both");
    if (ds.contains("synthetic")) {
      const json& s = ds.at("synthetic");
      reject_unknown(s, {"classes", "dim", "per_class", "separation"},
                     "dataset.synthetic");
      cfg.synthetic = true;
      read_if(s, "classes", cfg.classes);
      long long dim = cfg.dim, per_class = cfg.per_class;
      read_if(s, "dim", dim);
      read_if(s, "per_class", per_class);
      cfg.dim = dim;
      cfg.per_class = per_class;
      read_if(s, "separation", cfg.separation);
      if (cfg.classes < 2 || cfg.dim < 2)
        throw ConfigError("config: synthetic needs classes >= 2 and dim >= 2");
    } else if (ds.contains("csv")) {
      cfg.synthetic = false;
      cfg.csv_path = ds.at("csv").get<std::string>();
      read_if(ds, "test_fraction", cfg.test_fraction);
    }
  }

  if (root.contains("scenario")) {
    const json& sc = root.at("scenario");
    const std::string type = sc.value("type", "class_incremental");
    if (type == "class_incremental") {
      reject_unknown(sc, {"type", "A", "B", "C"}, "scenario");
      cfg.kind = ScenarioKind::class_incremental;
      read_if(sc, "A", cfg.A);
      read_if(sc, "B", cfg.B);
      read_if(sc, "C", cfg.C);
      if (cfg.A < 1 || cfg.B < 1 || cfg.C < 0)
        throw ConfigError("config: invalid A/B-C values");
      if (cfg.synthetic && cfg.B + (cfg.A - 1) * cfg.C != cfg.classes)
        throw ConfigError(
            "config: A/B-C rule violated: B + (A-1)*C must equal the class "
            "count");
    } else if (type == "nic") {
      reject_unknown(sc, {"type", "chunks_per_class", "first_B"}, "scenario");
      cfg.kind = ScenarioKind::nic;
      read_if(sc, "chunks_per_class", cfg.chunks_per_class);
      read_if(sc, "first_B", cfg.first_B);
    } else {
      throw ConfigError("config: unknown scenario type '" + type + "'");
    }
  }

  if (root.contains("strategies")) {
    cfg.strategies = root.at("strategies").get<std::vector<std::string>>();
    for (const auto& s : cfg.strategies) strategy_from_name(s);  // validate
  }
  if (root.contains("seeds"))
    cfg.seeds = root.at("seeds").get<std::vector<std::uint64_t>>();
  if (cfg.seeds.empty()) throw ConfigError("config: seeds must be non-empty");

  if (root.contains("eval")) {
    const json& ev = root.at("eval");
    reject_unknown(ev, {"mode", "interval"}, "eval");
    const std::string mode = ev.value("mode", "fixed");
    if (mode == "fixed")
      cfg.eval.mode = TestSetMode::fixed;
    else if (mode == "growing")
      cfg.eval.mode = TestSetMode::growing;
    else
      throw ConfigError("config: eval.mode must be fixed or growing");
    read_if(ev, "interval", cfg.eval.interval);
    if (cfg.eval.interval < 1)
      throw ConfigError("config: eval.interval must be >= 1");
  }

  read_if(root, "output_dir", cfg.output_dir);

  if (root.contains("hyper")) {
    const json& h = root.at("hyper");
    reject_unknown(h,
                   {"epochs_total", "phase1_frac", "phase3_frac", "w_bc", "t",
                    "s", "eps", "minibatch", "lr", "momentum",
                    "replay_capacity", "llf_widths", "csf_widths",
                    "use_replay", "phase3_batch", "online_explicit_norm"},
                   "hyper");
    read_if(h, "epochs_total", cfg.hyper.epochs_total);
    read_if(h, "phase1_frac", cfg.hyper.phase1_frac);
    read_if(h, "phase3_frac", cfg.hyper.phase3_frac);
    read_if(h, "w_bc", cfg.hyper.bc.w_bc);
    read_if(h, "t", cfg.hyper.t);
    read_if(h, "s", cfg.hyper.bc.s);
    read_if(h, "eps", cfg.hyper.bc.eps);
    long long mb = cfg.hyper.minibatch, cap = cfg.hyper.replay_capacity,
              p3b = cfg.hyper.phase3_batch;
    read_if(h, "minibatch", mb);
    read_if(h, "replay_capacity", cap);
    read_if(h, "phase3_batch", p3b);
    cfg.hyper.minibatch = mb;
    cfg.hyper.replay_capacity = cap;
    cfg.hyper.phase3_batch = p3b;
    read_if(h, "lr", cfg.hyper.lr);
    read_if(h, "momentum", cfg.hyper.momentum);
    read_if(h, "use_replay", cfg.hyper.use_replay);
    read_if(h, "online_explicit_norm", cfg.hyper.online_explicit_norm);
    if (h.contains("llf_widths")) {
      cfg.hyper.llf_widths.clear();
      for (long long w : h.at("llf_widths").get<std::vector<long long>>())
        cfg.hyper.llf_widths.push_back(w);
    }
    if (h.contains("csf_widths")) {
      cfg.hyper.csf_widths.clear();
      for (long long w : h.at("csf_widths").get<std::vector<long long>>())
        cfg.hyper.csf_widths.push_back(w);
    }
  }

  if (cfg.hyper.phase1_frac < 0.0 || cfg.hyper.phase1_frac > 0.5 ||
      cfg.hyper.phase3_frac < 0.0 || cfg.hyper.phase3_frac > 0.5)
    throw ConfigError("config: phase fractions must lie in [0, 0.5]");
  if (cfg.hyper.epochs_total < 1)
    throw ConfigError("config: epochs_total must be >= 1");
  if (cfg.hyper.minibatch < 1)
    throw ConfigError("config: minibatch must be >= 1");
  if (cfg.hyper.csf_widths.empty())
    throw ConfigError("config: csf_widths must not be empty");
  return cfg;
}

ExperimentConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

std::string serialize_config(const ExperimentConfig& cfg) {
  json root;
  if (cfg.synthetic) {
    root["dataset"]["synthetic"] = {{"classes", cfg.classes},
                                    {"dim", cfg.dim},
                                    {"per_class", cfg.per_class},
                                    {"separation", cfg.separation}};
  } else {
    root["dataset"]["csv"] = cfg.csv_path;
    root["dataset"]["test_fraction"] = cfg.test_fraction;
  }
  if (cfg.kind == ScenarioKind::class_incremental) {
    root["scenario"] = {{"type", "class_incremental"},
                        {"A", cfg.A},
                        {"B", cfg.B},
                        {"C", cfg.C}};
  } else {
    root["scenario"] = {{"type", "nic"},
                        {"chunks_per_class", cfg.chunks_per_class},
                        {"first_B", cfg.first_B}};
  }
  root["strategies"] = cfg.strategies;
  root["seeds"] = cfg.seeds;
  root["eval"] = {
      {"mode", cfg.eval.mode == TestSetMode::fixed ? "fixed" : "growing"},
      {"interval", cfg.eval.interval}};
  root["output_dir"] = cfg.output_dir;
  root["hyper"] = {{"epochs_total", cfg.hyper.epochs_total},
                   {"phase1_frac", cfg.hyper.phase1_frac},
                   {"phase3_frac", cfg.hyper.phase3_frac},
                   {"w_bc", cfg.hyper.bc.w_bc},
                   {"t", cfg.hyper.t},
                   {"s", cfg.hyper.bc.s},
                   {"eps", cfg.hyper.bc.eps},
                   {"minibatch", cfg.hyper.minibatch},
                   {"lr", cfg.hyper.lr},
                   {"momentum", cfg.hyper.momentum},
                   {"replay_capacity", cfg.hyper.replay_capacity},
                   {"llf_widths", cfg.hyper.llf_widths},
                   {"csf_widths", cfg.hyper.csf_widths},
                   {"use_replay", cfg.hyper.use_replay},
                   {"phase3_batch", cfg.hyper.phase3_batch},
                   {"online_explicit_norm", cfg.hyper.online_explicit_norm}};
  return root.dump(2);
}

Dataset build_dataset(const ExperimentConfig& cfg, std::uint64_t seed) {
  if (cfg.synthetic)
    return gen_synthetic(cfg.classes, cfg.dim, cfg.per_class, cfg.separation,
                         seed);
  Dataset raw = load_csv(cfg.csv_path);
  return split_train_test(raw, cfg.test_fraction, seed);
}

ExperienceStream build_stream(const ExperimentConfig& cfg, const Dataset& ds,
                              std::uint64_t seed) {
  if (cfg.kind == ScenarioKind::class_incremental)
    return make_class_incremental(ds, cfg.A, cfg.B, cfg.C, seed);
  return make_nic(ds, cfg.chunks_per_class, cfg.first_B, seed);
}

std::vector<std::uint64_t> reporting_seeds(const ExperimentConfig& cfg) {
  if (cfg.seeds.size() <= 1) return cfg.seeds;
  return {cfg.seeds.begin() + 1, cfg.seeds.end()};
}

void write_history_csv(const RunHistory& history, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open " + path);
  out << "experience,class_id,accuracy\n";
  for (const auto& rec : history.records) {
    for (const auto& [c, acc] : rec.per_class_accuracy)
      out << rec.experience << "," << c << "," << fmt(acc) << "\n";
    out << rec.experience << ",mean_class_accuracy,"
        << fmt(rec.mean_class_accuracy) << "\n";
  }
}

void write_summary_csv(const std::vector<RunSummaryRow>& rows,
                       const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open " + path);
  out << "strategy,seed,amca,final_accuracy,wall_clock_s\n";
  for (const auto& r : rows)
    out << r.strategy << "," << r.seed << "," << fmt(r.amca) << ","
        << fmt(r.final_accuracy) << "," << fmt(r.wall_clock_s) << "\n";
}

namespace {

struct Curve {
  std::string label;
  std::vector<double> x;  // experience indices
  std::vector<double> y;  // seed-averaged mean-class accuracy
  double amca = 0.0;
};

Curve average_curve(const std::vector<RunHistory>& runs) {
  Curve c;
  if (runs.empty()) return c;
  c.label = runs.front().strategy;
  const std::size_t n_pts = runs.front().records.size();
  for (std::size_t p = 0; p < n_pts; ++p) {
    double sum = 0.0;
    for (const auto& run : runs) sum += run.records[p].mean_class_accuracy;
    c.x.push_back(runs.front().records[p].experience);
    c.y.push_back(sum / static_cast<double>(runs.size()));
  }
  double a = 0.0;
  for (const auto& run : runs) a += amca(run);
  c.amca = a / static_cast<double>(runs.size());
  return c;
}

}  // namespace

void emit_svg(const std::vector<std::vector<RunHistory>>& per_strategy,
              double upper_bound, const std::string& path) {
  if (per_strategy.empty()) throw ConfigError("emit_svg: no histories");
  const int width = 640, height = 420;
  const int ml = 60, mr = 180, mt = 20, mb = 45;
  const double plot_w = width - ml - mr, plot_h = height - mt - mb;

  std::vector<Curve> curves;
  double x_max = 1.0;
  for (const auto& runs : per_strategy) {
    curves.push_back(average_curve(runs));
    if (!curves.back().x.empty())
      x_max = std::max(x_max, curves.back().x.back());
  }

  auto sx = [&](double x) { return ml + plot_w * (x - 1.0) / std::max(1.0, x_max - 1.0); };
  auto sy = [&](double y) { return mt + plot_h * (1.0 - y); };

  static const char* palette[] = {"#7b2d8b", "#d62728", "#1f77b4", "#2ca02c",
                                  "#ff7f0e", "#8c564b"};

  std::ofstream out(path);
  if (!out) throw ConfigError("emit_svg: cannot open " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << " "
      << height << "\">\n";
  out << "<rect width=\"" << width << "\" height=\"" << height
      << "\" fill=\"white\"/>\n";

  // axes and gridlines
  for (int i = 0; i <= 10; i += 2) {
    const double y = sy(i / 10.0);
    out << "<line x1=\"" << ml << "\" y1=\"" << fmt(y) << "\" x2=\""
        << (ml + static_cast<int>(plot_w)) << "\" y2=\"" << fmt(y)
        << "\" stroke=\"#dddddd\"/>\n";
    out << "<text x=\"" << (ml - 8) << "\" y=\"" << fmt(y + 4)
        << "\" font-size=\"12\" text-anchor=\"end\">" << fmt(i / 10.0)
        << "</text>\n";
  }
  out << "<line x1=\"" << ml << "\" y1=\"" << fmt(sy(0.0)) << "\" x2=\""
      << (ml + static_cast<int>(plot_w)) << "\" y2=\"" << fmt(sy(0.0))
      << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << ml << "\" y1=\"" << fmt(sy(0.0)) << "\" x2=\"" << ml
      << "\" y2=\"" << fmt(sy(1.0)) << "\" stroke=\"black\"/>\n";
  out << "<text x=\"" << (ml + static_cast<int>(plot_w / 2)) << "\" y=\""
      << (height - 10)
      << "\" font-size=\"13\" text-anchor=\"middle\">experience</text>\n";

  // dashed joint-training upper bound
  out << "<line x1=\"" << ml << "\" y1=\"" << fmt(sy(upper_bound))
      << "\" x2=\"" << (ml + static_cast<int>(plot_w)) << "\" y2=\""
      << fmt(sy(upper_bound))
      << "\" stroke=\"#555555\" stroke-dasharray=\"6,4\"/>\n";

  for (std::size_t s = 0; s < curves.size(); ++s) {
    const Curve& c = curves[s];
    const char* color = palette[s % 6];
    out << "<polyline fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"2\" points=\"";
    for (std::size_t p = 0; p < c.x.size(); ++p)
      out << fmt(sx(c.x[p])) << "," << fmt(sy(c.y[p])) << " ";
    out << "\"/>\n";
    const int ly = mt + 20 + static_cast<int>(s) * 20;
    out << "<line x1=\"" << (width - mr + 10) << "\" y1=\"" << ly
        << "\" x2=\"" << (width - mr + 34) << "\" y2=\"" << ly
        << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << (width - mr + 40) << "\" y=\"" << (ly + 4)
        << "\" font-size=\"12\">" << c.label << " (AMCA " << fmt(c.amca)
        << ")</text>\n";
  }
  out << "<text x=\"" << (width - mr + 10) << "\" y=\""
      << (mt + 20 + static_cast<int>(curves.size()) * 20 + 4)
      << "\" font-size=\"12\">joint bound " << fmt(upper_bound)
      << " (dashed)</text>\n";
  out << "</svg>\n";
}

namespace {

double mean(const std::vector<double>& v) {
  return v.empty() ? 0.0
                   : std::accumulate(v.begin(), v.end(), 0.0) /
                         static_cast<double>(v.size());
}

}  // namespace

int cmd_run(const ExperimentConfig& cfg) {
  namespace fs = std::filesystem;
  try {
    fs::create_directories(cfg.output_dir);
    std::vector<RunSummaryRow> summary;
    std::vector<std::vector<RunHistory>> per_strategy;
    const auto report_seeds = reporting_seeds(cfg);

    for (const auto& name : cfg.strategies) {
      const Strategy strat = strategy_from_name(name);
      std::vector<RunHistory> runs;
      for (std::uint64_t seed : cfg.seeds) {
        const Dataset ds = build_dataset(cfg, seed);
        const ExperienceStream stream = build_stream(cfg, ds, seed);
        RunHistory history =
            run_stream(strat, stream, ds, cfg.hyper, cfg.eval, seed);
        write_history_csv(history, cfg.output_dir + "/" + name + "_seed" +
                                       std::to_string(seed) + ".csv");
        summary.push_back(
            {name, seed, amca(history), final_accuracy(history),
             std::accumulate(history.wall_clock_s.begin(),
                             history.wall_clock_s.end(), 0.0)});
        if (std::find(report_seeds.begin(), report_seeds.end(), seed) !=
            report_seeds.end())
          runs.push_back(std::move(history));
      }
      per_strategy.push_back(std::move(runs));
    }
    write_summary_csv(summary, cfg.output_dir + "/summary.csv");

    // Joint-training upper bound for the plot, averaged over report seeds.
    std::vector<double> bounds;
    for (std::uint64_t seed : report_seeds) {
      const Dataset ds = build_dataset(cfg, seed);
      bounds.push_back(joint_train(ds, cfg.hyper, seed).test_accuracy);
    }
    emit_svg(per_strategy, mean(bounds), cfg.output_dir + "/accuracy.svg");
    return 0;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "run failed: %s\n", e.what());
    return 1;
  }
}

namespace {

double averaged_amca(const ExperimentConfig& cfg, const TpcConfig& hyper) {
  std::vector<double> values;
  for (std::uint64_t seed : reporting_seeds(cfg)) {
    const Dataset ds = build_dataset(cfg, seed);
    const ExperienceStream stream = build_stream(cfg, ds, seed);
    values.push_back(
        amca(run_stream(Strategy::tpc, stream, ds, hyper, cfg.eval, seed)));
  }
  return mean(values);
}

}  // namespace

int cmd_ablate(const ExperimentConfig& cfg, const AblationSpec& spec) {
  namespace fs = std::filesystem;
  try {
    fs::create_directories(cfg.output_dir);
    std::ofstream out(cfg.output_dir + "/ablation.csv");
    if (!out) throw ConfigError("cannot open ablation.csv");
    out << "scenario,replay_mode,full,no_bias_correction,no_gradient_masking,"
           "no_phase3\n";

    const std::string scenario_name =
        cfg.kind == ScenarioKind::class_incremental
            ? std::to_string(cfg.A) + "/" + std::to_string(cfg.B) + "-" +
                  std::to_string(cfg.C)
            : "nic";

    std::vector<std::pair<std::string, bool>> rows;
    rows.emplace_back("replay", true);
    if (spec.no_replay) rows.emplace_back("no_replay", false);

    for (const auto& [mode, with_replay] : rows) {
      TpcConfig base = cfg.hyper;
      base.use_replay = with_replay;

      out << scenario_name << "," << mode;
      out << "," << fmt(averaged_amca(cfg, base));

      if (spec.no_bias_correction) {
        TpcConfig v = base;
        v.use_bias_correction = false;
        out << "," << fmt(averaged_amca(cfg, v));
      } else {
        out << ",-";
      }
      if (spec.no_gradient_masking) {
        TpcConfig v = base;
        v.use_masking = false;
        out << "," << fmt(averaged_amca(cfg, v));
      } else {
        out << ",-";
      }
      if (spec.no_phase3 && with_replay) {
        TpcConfig v = base;
        v.use_phase3 = false;
        out << "," << fmt(averaged_amca(cfg, v));
      } else {
        out << ",-";  // Table-6 style dash for the no-replay row
      }
      out << "\n";
    }
    return 0;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "ablation failed: %s\n", e.what());
    return 1;
  }
}

}  // namespace tpc
