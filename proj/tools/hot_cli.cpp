// hot: compare layered systems with hierarchical optimal transport.
//
//   hot compare   --src a/manifest.json --tgt b/manifest.json --out run/
//   hot baselines run/
//   hot synth     --kind layer_permuted --out data/
//   hot report    run/
//
// Exit codes: 0 success, 1 invalid input, 2 solver failure. Errors are
// reported as a JSON object on stderr.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hot/hot.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunConfig {
  std::string src_manifest;
  std::string tgt_manifest;
  std::string out_dir;
  std::string solver = "exact";
  double epsilon = 0.05;  // relative to mean |cost|
  double tol = 1e-7;
  std::size_t max_iter = 10000;
  bool log_domain = false;
  bool rotation = false;
  std::size_t max_outer = 10;
  double rotation_tol = 1e-5;
  double val_fraction = 0.2;
  std::uint64_t seed = 0;
  std::size_t subsample = 0;  // 0: keep every neuron
  std::size_t perm_seeds = 20;
  std::string directions = "both";
  std::string truth;
  bool export_plans = false;
  bool export_costs = false;
  bool with_baselines = false;
};

json config_to_json(const RunConfig& c) {
  return {{"src", c.src_manifest},
          {"tgt", c.tgt_manifest},
          {"solver", c.solver},
          {"epsilon", c.epsilon},
          {"tol", c.tol},
          {"max_iter", c.max_iter},
          {"log_domain", c.log_domain},
          {"rotation", c.rotation},
          {"max_outer", c.max_outer},
          {"rotation_tol", c.rotation_tol},
          {"val_fraction", c.val_fraction},
          {"seed", c.seed},
          {"subsample", c.subsample},
          {"perm_seeds", c.perm_seeds},
          {"directions", c.directions},
          {"truth", c.truth},
          {"export_plans", c.export_plans},
          {"export_costs", c.export_costs}};
}

RunConfig config_from_json(const json& j) {
  RunConfig c;
  try {
    c.src_manifest = j.at("src").get<std::string>();
    c.tgt_manifest = j.at("tgt").get<std::string>();
    c.solver = j.at("solver").get<std::string>();
    c.epsilon = j.at("epsilon").get<double>();
    c.tol = j.at("tol").get<double>();
    c.max_iter = j.at("max_iter").get<std::size_t>();
    c.log_domain = j.at("log_domain").get<bool>();
    c.rotation = j.at("rotation").get<bool>();
    c.max_outer = j.at("max_outer").get<std::size_t>();
    c.rotation_tol = j.at("rotation_tol").get<double>();
    c.val_fraction = j.at("val_fraction").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.subsample = j.at("subsample").get<std::size_t>();
    c.perm_seeds = j.at("perm_seeds").get<std::size_t>();
    c.directions = j.at("directions").get<std::string>();
    c.truth = j.at("truth").get<std::string>();
    c.export_plans = j.at("export_plans").get<bool>();
    c.export_costs = j.at("export_costs").get<bool>();
  } catch (const json::exception& e) {
    hot::fail_input(std::string("malformed run.json: ") + e.what());
  }
  return c;
}

void validate(const RunConfig& c) {
  if (c.solver != "exact" && c.solver != "sinkhorn") hot::fail_input("--solver must be exact or sinkhorn");
  if (!(c.val_fraction > 0.0 && c.val_fraction < 1.0)) hot::fail_input("--val-frac must lie in (0, 1)");
  if (c.solver == "sinkhorn" && !(c.epsilon > 0.0)) hot::fail_input("--epsilon must be > 0 for sinkhorn");
  if (!(c.tol > 0.0)) hot::fail_input("--tol must be > 0");
  if (c.max_outer < 1) hot::fail_input("--max-outer must be >= 1");
  if (c.directions != "forward" && c.directions != "backward" && c.directions != "both") {
    hot::fail_input("--directions must be forward, backward or both");
  }
}

std::size_t env_threads() {
  const char* raw = std::getenv("HOT_THREADS");
  if (!raw || !*raw) return 0;
  char* end = nullptr;
  const long v = std::strtol(raw, &end, 10);
  if (*end != '\0' || v < 1) hot::fail_input("HOT_THREADS must be a positive integer");
  return static_cast<std::size_t>(v);
}

hot::HotROptions options_for(const RunConfig& c) {
  hot::HotROptions o;
  o.hot.threads = env_threads();
  o.hot.solver.kind = c.solver == "sinkhorn" ? hot::SolverKind::sinkhorn : hot::SolverKind::exact;
  o.hot.solver.sinkhorn.relative_epsilon = c.epsilon;
  o.hot.solver.sinkhorn.tol = c.tol;
  o.hot.solver.sinkhorn.max_iter = c.max_iter;
  o.hot.solver.sinkhorn.log_domain = c.log_domain;
  o.rotation.max_outer = c.max_outer;
  o.rotation.tol = c.rotation_tol;
  return o;
}

hot::NetworkActivations subsampled(const hot::NetworkActivations& net, std::size_t k,
                                   std::uint64_t seed, std::uint64_t side) {
  if (k == 0) return net;
  std::vector<hot::ActivationMatrix> layers;
  for (std::size_t l = 0; l < net.depth(); ++l) {
    const auto& layer = net.layer(l);
    const auto keep = std::min<hot::Index>(static_cast<hot::Index>(k), layer.neurons());
    layers.push_back(hot::subsample_neurons(layer, keep, seed * 1000003u + side * 1009u + l).layer);
  }
  return hot::NetworkActivations(std::move(layers), net.name());
}

/// Loaded, subsampled and standardized inputs for one run.
struct Inputs {
  hot::NetworkActivations src;
  hot::NetworkActivations tgt;
  hot::SplitSpec split;
};

Inputs load_inputs(const RunConfig& c) {
  auto src = hot::load_network(c.src_manifest);
  auto tgt = hot::load_network(c.tgt_manifest);
  hot::require_same_stimuli(src, tgt);
  src = subsampled(src, c.subsample, c.seed, 0);
  tgt = subsampled(tgt, c.subsample, c.seed, 1);
  auto split = hot::make_split(src.stimuli(), c.val_fraction, c.seed);
  auto a = hot::standardize(src, split);
  auto b = hot::standardize(tgt, split);
  return {std::move(a), std::move(b), std::move(split)};
}

std::vector<std::string> directions_of(const RunConfig& c) {
  if (c.directions == "both") return {"forward", "backward"};
  return {c.directions};
}

std::vector<std::string> layer_names(const hot::NetworkActivations& net) {
  std::vector<std::string> out;
  for (const auto& l : net.layers()) out.push_back(l.layer_name());
  return out;
}

std::string pair_file(const char* prefix, std::size_t l, std::size_t m) {
  return std::string(prefix) + "_" + std::to_string(l) + "_" + std::to_string(m);
}

void write_outer(const fs::path& dir, const hot::HotResult& r, const hot::NetworkActivations& src,
                 const hot::NetworkActivations& tgt, const std::string& title) {
  fs::create_directories(dir);
  hot::io::write_csv(dir / "outer_plan.csv", r.outer_plan.values);
  hot::io::write_csv(dir / "layer_costs.csv", r.layer_costs.values);
  hot::io::write_file_atomic(dir / "outer_plan.svg",
                             hot::heatmap_svg(r.outer_plan.values, title, layer_names(src), layer_names(tgt)));
}

struct DirectionRun {
  std::string label;
  const hot::NetworkActivations* src;
  const hot::NetworkActivations* tgt;
  hot::HotResult hot;
  std::optional<hot::HotRResult> hot_r;
};

DirectionRun run_direction(const std::string& label, const Inputs& in, const RunConfig& c) {
  const bool forward = label == "forward";
  DirectionRun d{label, forward ? &in.src : &in.tgt, forward ? &in.tgt : &in.src, {}, std::nullopt};
  const auto options = options_for(c);
  d.hot = hot::run_hot(*d.src, *d.tgt, in.split, options.hot);
  if (c.rotation) d.hot_r = hot::run_hot_r(*d.src, *d.tgt, in.split, options);
  return d;
}

void export_direction(const fs::path& out, const DirectionRun& d, const RunConfig& c) {
  const fs::path dir = out / d.label;
  write_outer(dir, d.hot, *d.src, *d.tgt, "HOT outer plan (" + d.label + ")");
  const std::size_t L = d.src->depth(), M = d.tgt->depth();
  if (c.export_plans) {
    fs::create_directories(dir / "plans");
    for (std::size_t l = 0; l < L; ++l)
      for (std::size_t m = 0; m < M; ++m)
        if (d.hot.layer_costs.has_plan(l, m))
          hot::io::write_csv(dir / "plans" / (pair_file("Q", l, m) + ".csv"), d.hot.layer_costs.plan(l, m).values);
  }
  if (c.export_costs) {
    fs::create_directories(dir / "costs");
    for (std::size_t l = 0; l < L; ++l)
      for (std::size_t m = 0; m < M; ++m)
        hot::io::write_csv(dir / "costs" / (pair_file("C", l, m) + ".csv"),
                           hot::correlation_cost(d.src->layer(l), d.tgt->layer(m), d.hot.split.train_idx).values);
  }
  if (d.hot_r) {
    const fs::path rdir = dir / "hot_r";
    write_outer(rdir, d.hot_r->base, *d.src, *d.tgt, "HOT+R outer plan (" + d.label + ")");
    fs::create_directories(rdir / "rotations");
    std::ostringstream traces;
    traces << "src,tgt,step,cost,converged,monotone,rank_deficient\n";
    traces.precision(17);
    for (std::size_t l = 0; l < L; ++l) {
      for (std::size_t m = 0; m < M; ++m) {
        hot::io::write_npy(rdir / "rotations" / (pair_file("R", l, m) + ".npy"), d.hot_r->rotations.at(l, m));
        const auto& t = d.hot_r->traces[l * M + m];
        for (std::size_t s = 0; s < t.trace.size(); ++s) {
          traces << l << ',' << m << ',' << s + 1 << ',' << t.trace[s] << ',' << t.converged << ','
                 << t.monotone << ',' << t.rank_deficient << '\n';
        }
        if (c.export_plans) {
          fs::create_directories(rdir / "plans");
          hot::io::write_csv(rdir / "plans" / (pair_file("Q", l, m) + ".csv"),
                             d.hot_r->base.layer_costs.plan(l, m).values);
        }
      }
    }
    hot::io::write_file_atomic(rdir / "traces.csv", traces.str());
  }
}

json direction_block(const DirectionRun& d) {
  json block;
  block["source"] = d.src->name();
  block["target"] = d.tgt->name();
  block["src_depth"] = d.src->depth();
  block["tgt_depth"] = d.tgt->depth();
  block["hot"] = hot::hot_block(d.hot);
  if (d.hot_r) block["hot_r"] = hot::hot_r_block(*d.hot_r);
  return block;
}

json baselines_for(const DirectionRun& d, const RunConfig& c) {
  json b;
  const auto perm = hot::perm_p_summary(*d.src, *d.tgt, d.hot, c.perm_seeds, c.seed);
  b["perm_p"] = hot::perm_p_block(perm, c.seed);
  b["single_best"] = hot::baseline_block(hot::single_best(*d.src, *d.tgt, d.hot));
  b["pairwise_best"] = hot::baseline_block(hot::pairwise_best(*d.src, *d.tgt, d.hot));
  if (d.hot_r) b["pairwise_best_rot"] = hot::baseline_block(hot::pairwise_best_rot(*d.src, *d.tgt, *d.hot_r));
  return b;
}

double mean_of(const json& directions, const std::vector<std::string>& path) {
  double sum = 0.0;
  for (const auto& [name, block] : directions.items()) {
    const json* node = &block;
    for (const auto& key : path) node = &node->at(key);
    sum += node->get<double>();
  }
  return sum / static_cast<double>(directions.size());
}

/// Averages of the labeled scores over both directions.
json mean_block(const json& directions) {
  json mean;
  mean["hot_score"] = mean_of(directions, {"hot", "hot_score"});
  const json& first = directions.begin().value();
  if (first.contains("hot_r")) mean["hot_r_score"] = mean_of(directions, {"hot_r", "hot_score"});
  if (first.contains("baselines")) {
    json b;
    b["perm_p"] = mean_of(directions, {"baselines", "perm_p", "mean"});
    for (const char* name : {"single_best", "pairwise_best", "pairwise_best_rot"}) {
      if (first["baselines"].contains(name)) b[name] = mean_of(directions, {"baselines", name, "mean_score"});
    }
    mean["baselines"] = std::move(b);
  }
  return mean;
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) hot::fail_input("missing file: " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    hot::fail_input("malformed JSON in " + path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) { hot::io::write_file_atomic(path, j.dump(2) + "\n"); }

std::vector<DirectionRun> run_all(const Inputs& in, const RunConfig& c) {
  std::vector<DirectionRun> runs;
  for (const auto& label : directions_of(c)) runs.push_back(run_direction(label, in, c));
  return runs;
}

json scores_json(const std::vector<DirectionRun>& runs, const RunConfig& c, bool with_baselines) {
  json scores;
  scores["schema_version"] = hot::kSchemaVersion;
  scores["config"] = config_to_json(c);
  json dirs = json::object();
  for (const auto& d : runs) {
    json block = direction_block(d);
    if (with_baselines) block["baselines"] = baselines_for(d, c);
    dirs[d.label] = std::move(block);
  }
  scores["mean"] = mean_block(dirs);
  scores["directions"] = std::move(dirs);
  return scores;
}

int cmd_compare(RunConfig c) {
  validate(c);
  // Resolve paths once so run.json stays valid from any working directory.
  c.src_manifest = fs::absolute(c.src_manifest).lexically_normal().string();
  c.tgt_manifest = fs::absolute(c.tgt_manifest).lexically_normal().string();
  if (!c.truth.empty()) c.truth = fs::absolute(c.truth).lexically_normal().string();
  const Inputs in = load_inputs(c);
  std::optional<json> truth;
  if (!c.truth.empty()) truth = read_json(c.truth);

  const auto runs = run_all(in, c);
  const fs::path out = c.out_dir;
  fs::create_directories(out);
  for (const auto& d : runs) export_direction(out, d, c);
  if (truth) write_json(out / "truth.json", *truth);
  json run;
  run["schema_version"] = hot::kSchemaVersion;
  run["config"] = config_to_json(c);
  write_json(out / "run.json", run);
  write_json(out / "scores.json", scores_json(runs, c, c.with_baselines));
  std::cout << "wrote " << (out / "scores.json").string() << "\n";
  return 0;
}

int cmd_baselines(const std::string& dir, std::optional<std::size_t> perm_seeds) {
  const fs::path out = dir;
  if (!fs::exists(out / "run.json") || !fs::exists(out / "scores.json")) {
    hot::fail_input("no prior compare results in " + out.string() + " (run.json / scores.json missing)");
  }
  RunConfig c = config_from_json(read_json(out / "run.json").at("config"));
  if (perm_seeds) c.perm_seeds = *perm_seeds;
  validate(c);
  const Inputs in = load_inputs(c);
  const auto runs = run_all(in, c);
  json scores = read_json(out / "scores.json");
  if (!scores.contains("directions")) hot::fail_input("malformed scores.json: no \"directions\"");
  for (const auto& d : runs) scores["directions"][d.label]["baselines"] = baselines_for(d, c);
  scores["config"]["perm_seeds"] = c.perm_seeds;
  scores["mean"] = mean_block(scores["directions"]);
  write_json(out / "scores.json", scores);
  std::cout << "wrote baselines to " << (out / "scores.json").string() << "\n";
  return 0;
}

struct SynthArgs {
  std::string kind = "identical";
  std::string out;
  std::size_t src_depth = 4;
  std::size_t tgt_depth = 0;
  std::vector<hot::Index> widths = {16};
  hot::Index stimuli = 200;
  double noise = 0.0;
  double hub_noise = 0.6;
  std::uint64_t seed = 0;
};

int cmd_synth(const SynthArgs& a) {
  hot::SynthSpec spec;
  spec.kind = hot::parse_synth_kind(a.kind);
  spec.src_depth = a.src_depth;
  spec.tgt_depth = a.tgt_depth;
  spec.widths = a.widths;
  spec.stimuli = a.stimuli;
  spec.noise_sigma = a.noise;
  spec.hub_noise_sigma = a.hub_noise;
  spec.seed = a.seed;
  const auto pair = hot::generate(spec);
  const fs::path out = a.out;
  hot::save_network(pair.src, out / "src");
  hot::save_network(pair.tgt, out / "tgt");
  write_json(out / "truth.json", hot::truth_to_json(pair.truth, spec.kind));
  std::cout << "wrote " << (out / "src/manifest.json").string() << ", " << (out / "tgt/manifest.json").string()
            << ", " << (out / "truth.json").string() << "\n";
  return 0;
}

std::string fixed(double v, int digits = 4) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(digits);
  s << v;
  return s.str();
}

void plan_stats(std::ostringstream& md, const fs::path& plan_csv, const std::optional<hot::GroundTruth>& truth,
                const std::string& heading) {
  if (!fs::exists(plan_csv)) return;
  const Eigen::MatrixXd plan = hot::io::read_csv(plan_csv);
  const Eigen::VectorXd h = hot::row_entropy(plan);
  md << "\n### " << heading << "\n\n";
  md << "| source layer | argmax target | max mass | row entropy (nats) |\n|---|---|---|---|\n";
  for (hot::Index r = 0; r < plan.rows(); ++r) {
    hot::Index arg = 0;
    for (hot::Index c = 1; c < plan.cols(); ++c)
      if (plan(r, c) > plan(r, arg)) arg = c;
    md << "| " << r << " | " << arg << " | " << fixed(plan(r, arg), 4) << " | " << fixed(h(r), 4) << " |\n";
  }
  if (truth && truth->layer_map.rows() == plan.rows() && truth->layer_map.cols() == plan.cols()) {
    const auto m = hot::plan_recovery_metrics(plan, *truth);
    md << "\nmass_on_truth: " << fixed(m.mass_on_truth) << ", top1_accuracy: " << fixed(m.top1_accuracy) << "\n";
  }
}

std::vector<std::string> ordered_labels(const json& directions) {
  std::vector<std::string> out;
  for (const char* label : {"forward", "backward"})
    if (directions.contains(label)) out.push_back(label);
  return out;
}

int cmd_report(const std::string& dir) {
  const fs::path out = dir;
  if (!fs::is_directory(out)) hot::fail_input("results directory " + out.string() + " does not exist");
  if (fs::is_empty(out)) hot::fail_input("results directory " + out.string() + " is empty");
  if (!fs::exists(out / "scores.json")) hot::fail_input("no scores.json in " + out.string());
  const json scores = read_json(out / "scores.json");
  if (!scores.contains("schema_version") || !scores.contains("directions") || !scores["directions"].is_object() ||
      scores["directions"].empty()) {
    hot::fail_input("malformed scores.json in " + out.string());
  }
  std::optional<hot::GroundTruth> truth;
  if (fs::exists(out / "truth.json")) truth = hot::truth_from_json(read_json(out / "truth.json"));

  std::ostringstream md;
  md << "# HOT comparison report\n\n";
  try {
    const auto& cfg = scores.at("config");
    md << "- source: " << cfg.at("src").get<std::string>() << "\n";
    md << "- target: " << cfg.at("tgt").get<std::string>() << "\n";
    md << "- solver: " << cfg.at("solver").get<std::string>() << ", seed " << cfg.at("seed").get<std::uint64_t>()
       << ", validation fraction " << cfg.at("val_fraction").get<double>() << "\n";

    md << "\n## Scores\n\n| direction | method | score |\n|---|---|---|\n";
    auto rows = [&md](const std::string& label, const json& block, bool mean_row) {
      md << "| " << label << " | HOT | " << fixed(mean_row ? block.at("hot_score").get<double>()
                                                         : block.at("hot").at("hot_score").get<double>())
         << " |\n";
      if (mean_row ? block.contains("hot_r_score") : block.contains("hot_r")) {
        md << "| " << label << " | HOT+R | "
           << fixed(mean_row ? block.at("hot_r_score").get<double>() : block.at("hot_r").at("hot_score").get<double>())
           << " |\n";
      }
      if (!block.contains("baselines")) return;
      const auto& b = block.at("baselines");
      if (b.contains("perm_p")) {
        if (mean_row) {
          md << "| " << label << " | perm_p (mean over seeds) | " << fixed(b.at("perm_p").get<double>()) << " |\n";
        } else {
          const auto& p = b.at("perm_p");
          md << "| " << label << " | perm_p (mean ± std, " << p.at("seeds").get<std::size_t>() << " seeds) | "
             << fixed(p.at("mean").get<double>()) << " ± " << fixed(p.at("std").get<double>()) << " |\n";
        }
      }
      for (const char* name : {"single_best", "pairwise_best", "pairwise_best_rot"}) {
        if (!b.contains(name)) continue;
        const double v = mean_row ? b.at(name).get<double>() : b.at(name).at("mean_score").get<double>();
        md << "| " << label << " | " << name << " | " << fixed(v) << " |\n";
      }
    };
    const auto labels = ordered_labels(scores["directions"]);
    for (const auto& label : labels) rows(label, scores["directions"][label], false);
    if (scores["directions"].size() > 1 && scores.contains("mean")) rows("mean", scores["mean"], true);

    md << "\n## Outer plan statistics\n";
    for (const auto& label : labels) {
      std::optional<hot::GroundTruth> t;
      if (truth) t = label == "backward" ? hot::transposed_truth(*truth) : *truth;
      plan_stats(md, out / label / "outer_plan.csv", t, label + ", HOT");
      plan_stats(md, out / label / "hot_r" / "outer_plan.csv", t, label + ", HOT+R");
    }
  } catch (const json::exception& e) {
    hot::fail_input("malformed scores.json: " + std::string(e.what()));
  }
  hot::io::write_file_atomic(out / "report.md", md.str());
  std::cout << md.str();
  return 0;
}

int emit_error(hot::ErrorKind kind, const std::string& message) {
  const int code = kind == hot::ErrorKind::solver_failure ? 2 : 1;
  json err = {{"error", {{"kind", kind == hot::ErrorKind::solver_failure ? "solver_failure" : "invalid_input"},
                         {"message", message}}},
              {"exit_code", code}};
  std::cerr << err.dump() << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical optimal transport comparison of layered systems"};
  app.require_subcommand(1);

  RunConfig cfg;
  auto* compare = app.add_subcommand("compare", "Align two networks and score held-out reconstructions");
  compare->add_option("--src", cfg.src_manifest, "Source manifest (JSON)")->required();
  compare->add_option("--tgt", cfg.tgt_manifest, "Target manifest (JSON)")->required();
  compare->add_option("--out", cfg.out_dir, "Output directory")->required();
  compare->add_option("--solver", cfg.solver, "Inner solver: exact or sinkhorn")->capture_default_str();
  compare->add_option("--epsilon", cfg.epsilon, "Sinkhorn regularization, relative to mean |cost|")
      ->capture_default_str();
  compare->add_option("--tol", cfg.tol, "Sinkhorn marginal tolerance")->capture_default_str();
  compare->add_option("--max-iter", cfg.max_iter, "Sinkhorn iteration cap")->capture_default_str();
  compare->add_flag("--log-domain", cfg.log_domain, "Run Sinkhorn in the log domain");
  compare->add_flag("--rotation", cfg.rotation, "Also run the rotation-invariant variant (HOT+R)");
  compare->add_option("--max-outer", cfg.max_outer, "HOT+R alternation cap")->capture_default_str();
  compare->add_option("--rotation-tol", cfg.rotation_tol, "HOT+R relative stopping tolerance")
      ->capture_default_str();
  compare->add_option("--val-frac", cfg.val_fraction, "Held-out stimulus fraction")->capture_default_str();
  compare->add_option("--seed", cfg.seed, "Seed for the split, subsampling and perm_p")->capture_default_str();
  compare->add_option("--subsample", cfg.subsample, "Neurons kept per layer (0 keeps all)")->capture_default_str();
  compare->add_option("--perm-seeds", cfg.perm_seeds, "perm_p draws")->capture_default_str();
  compare->add_option("--directions", cfg.directions, "forward, backward or both")->capture_default_str();
  compare->add_option("--truth", cfg.truth, "Ground-truth JSON from `hot synth`, used by report");
  compare->add_flag("--export-plans", cfg.export_plans, "Write every inner plan as CSV");
  compare->add_flag("--export-costs", cfg.export_costs, "Write every inner cost matrix as CSV");
  compare->add_flag("--baselines", cfg.with_baselines, "Compute baselines in the same run");

  std::string baselines_dir;
  std::optional<std::size_t> perm_seeds;
  auto* baselines = app.add_subcommand("baselines", "Add baseline scores to a compare result");
  baselines->add_option("dir", baselines_dir, "Directory written by compare")->required();
  baselines->add_option("--perm-seeds", perm_seeds, "Override the perm_p draw count");

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic pair with ground truth");
  synth->add_option("--kind", synth_args.kind,
                    "identical, neuron_permuted, layer_permuted, rotated, depth_duplicated, hub_layer, "
                    "independent_noise")
      ->required();
  synth->add_option("--out", synth_args.out, "Output directory")->required();
  synth->add_option("--src-depth", synth_args.src_depth, "Source layers")->capture_default_str();
  synth->add_option("--tgt-depth", synth_args.tgt_depth, "Target layers (0: natural for the kind)")
      ->capture_default_str();
  synth->add_option("--widths", synth_args.widths, "One width or one per source layer")->capture_default_str();
  synth->add_option("--stimuli", synth_args.stimuli, "Stimuli (rows)")->capture_default_str();
  synth->add_option("--noise", synth_args.noise, "Noise relative to column std")->capture_default_str();
  synth->add_option("--hub-noise", synth_args.hub_noise, "Noise on hub copies (hub_layer)")->capture_default_str();
  synth->add_option("--seed", synth_args.seed, "Generator seed")->capture_default_str();

  std::string report_dir;
  auto* report = app.add_subcommand("report", "Summarize a results directory as markdown");
  report->add_option("dir", report_dir, "Results directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    return emit_error(hot::ErrorKind::invalid_input, e.what());
  }

  try {
    if (*compare) return cmd_compare(cfg);
    if (*baselines) return cmd_baselines(baselines_dir, perm_seeds);
    if (*synth) return cmd_synth(synth_args);
    if (*report) return cmd_report(report_dir);
  } catch (const hot::Error& e) {
    return emit_error(e.kind(), e.what());
  } catch (const fs::filesystem_error& e) {
    return emit_error(hot::ErrorKind::invalid_input, e.what());
  } catch (const std::exception& e) {
    return emit_error(hot::ErrorKind::invalid_input, e.what());
  }
  return 1;
}
