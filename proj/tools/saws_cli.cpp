// Experiment command line: run experiments from a JSON config, sweep parameter
// grids, and expose the segmentation / closeness toolkit on CSV inputs.
#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "saws/saws.hpp"

namespace fs = std::filesystem;
using namespace saws;

namespace {

json load_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file '" + path + "'");
  json j;
  try {
    f >> j;
  } catch (const std::exception& e) {
    throw ConfigError("config is not valid JSON: " + std::string(e.what()));
  }
  return j;
}

// CSV with a header line; returns the numeric cells of every data row.
std::vector<Vec> load_csv_rows(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open '" + path + "'");
  std::vector<Vec> rows;
  std::string line;
  bool first = true;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    if (first) {
      first = false;
      continue;
    }
    Vec row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::strtod(cell.c_str(), nullptr));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ConfigError("'" + path + "' has no data rows");
  return rows;
}

// grid-function CSV: columns theta1[,theta2],value
GridFunction load_grid_function(const std::string& path,
                                std::shared_ptr<const GridDomain>& shared) {
  const std::vector<Vec> rows = load_csv_rows(path);
  std::vector<Vec> points;
  std::vector<double> values;
  for (const Vec& row : rows) {
    if (row.size() < 2) throw ConfigError("'" + path + "': need coordinates and a value");
    points.emplace_back(row.begin(), row.end() - 1);
    values.push_back(row.back());
  }
  auto domain = std::make_shared<GridDomain>(std::move(points));
  if (!shared) shared = domain;
  return GridFunction(shared, std::move(values));
}

void write_run_outputs(const ExperimentResult& result, const std::string& out_dir) {
  if (out_dir.empty()) {
    std::cout << summarize(result).dump(2) << "\n";
    return;
  }
  fs::create_directories(out_dir);
  write_outputs(result, out_dir);
  std::cout << summarize(result).dump(2) << "\n";
}

int cmd_run(const std::string& config_path, std::optional<std::uint64_t> seed,
            std::optional<std::size_t> reps, std::string out_dir, bool parallel) {
  json j = load_json(config_path);
  if (seed) j["seed"] = *seed;
  if (reps) j["replications"] = *reps;
  if (out_dir.empty() && j.contains("out_dir")) out_dir = j["out_dir"].get<std::string>();
  const ExperimentConfig cfg = parse_config(j);
  const ExperimentResult result = run_experiment(cfg, j, parallel);
  write_run_outputs(result, out_dir);
  return 0;
}

int cmd_sweep(const std::string& config_path, std::optional<std::uint64_t> seed,
              std::optional<std::size_t> reps, std::string out_dir, bool parallel) {
  json base = load_json(config_path);
  if (seed) base["seed"] = *seed;
  if (reps) base["replications"] = *reps;
  if (out_dir.empty() && base.contains("out_dir"))
    out_dir = base["out_dir"].get<std::string>();
  if (!base.contains("sweep") || !base["sweep"].is_object())
    throw ConfigError("sweep: config needs a 'sweep' object with parameter lists");
  const json sweep = base["sweep"];
  for (auto it = sweep.begin(); it != sweep.end(); ++it)
    if (it.key() != "c_tau" && it.key() != "V" && it.key() != "u")
      throw ConfigError("sweep: unknown parameter '" + it.key() + "'");
  base.erase("sweep");

  auto values_of = [&](const char* key) -> std::vector<json> {
    if (!sweep.contains(key)) return {json()};  // single "absent" slot
    std::vector<json> out;
    for (const json& v : sweep[key]) out.push_back(v);
    return out;
  };

  std::ostringstream table;
  table << "c_tau,V,u,learner,median_final_regret,mean_final_regret\n";
  for (const json& ct : values_of("c_tau"))
    for (const json& V : values_of("V"))
      for (const json& u : values_of("u")) {
        json j = base;
        if (!ct.is_null()) j["schedule"]["c_tau"] = ct;
        if (!V.is_null()) j["path"]["V"] = V;
        if (!u.is_null()) j["path"]["u"] = u;
        const ExperimentConfig cfg = parse_config(j);
        const ExperimentResult result = run_experiment(cfg, j, parallel);
        const json s = summarize(result);
        for (const auto& [learner, stats] : s["learners"].items()) {
          table << (ct.is_null() ? "" : ct.dump()) << ','
                << (V.is_null() ? "" : V.dump()) << ','
                << (u.is_null() ? "" : u.dump()) << ',' << learner << ','
                << format_double(stats["final_regret"]["median"].get<double>()) << ','
                << format_double(stats["final_regret"]["mean"].get<double>()) << '\n';
        }
      }
  if (out_dir.empty()) {
    std::cout << table.str();
  } else {
    fs::create_directories(out_dir);
    std::ofstream f(out_dir + "/sweep_summary.csv", std::ios::binary);
    f << table.str();
    std::cout << table.str();
  }
  return 0;
}

int cmd_segment(const std::string& csv_path, const std::string& regime, double rho,
                double sigma, double M, double r, std::size_t d, std::size_t B) {
  const std::vector<Vec> rows = load_csv_rows(csv_path);
  Segmentation seg;
  if (regime == "strongly-convex") {
    std::vector<Vec> path;
    for (const Vec& row : rows) {
      if (row.size() < 2) throw ConfigError("path csv: need an index and coordinates");
      path.emplace_back(row.begin() + 1, row.end());
    }
    SegmentationConstants c{rho, sigma, M, r, d, B};
    seg = segment_greedy_strongly_convex(path, c);
  } else if (regime == "lipschitz") {
    // each row: the function values of one period on a shared grid
    std::vector<Vec> pts;
    for (std::size_t i = 0; i < rows[0].size(); ++i)
      pts.push_back({static_cast<double>(i)});
    auto domain = std::make_shared<GridDomain>(std::move(pts));
    std::vector<GridFunction> fns;
    for (const Vec& row : rows) {
      if (row.size() != rows[0].size())
        throw ConfigError("function csv: ragged rows");
      fns.emplace_back(domain, std::vector<double>(row));
    }
    seg = segment_greedy_lipschitz(supnorm_distances(fns), sigma, d, B);
  } else {
    throw ConfigError("segment: regime must be strongly-convex or lipschitz");
  }
  json out{{"J", seg.segments()},
           {"boundaries", seg.boundaries},
           {"certificates", seg.certificates},
           {"thresholds", seg.thresholds}};
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_closeness(const std::string& f_path, const std::string& g_path, double eps,
                  std::optional<double> delta) {
  std::shared_ptr<const GridDomain> shared;
  const GridFunction f = load_grid_function(f_path, shared);
  std::shared_ptr<const GridDomain> other;
  const GridFunction g = load_grid_function(g_path, other);
  if (other->size() != shared->size())
    throw ConfigError("'" + f_path + "' and '" + g_path + "' have different grid sizes");
  for (std::size_t i = 0; i < shared->size(); ++i)
    if (distance2(shared->point(i), other->point(i)) > 1e-9)
      throw ConfigError("'" + f_path + "' and '" + g_path + "' use different grids");
  const double dstar = min_delta(f, g, eps);
  json out{{"eps", eps}, {"delta_star", dstar}};
  if (delta) out["close"] = is_close(f, g, eps, *delta);
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_bounds(const std::string& config_path) {
  const json j = load_json(config_path);
  const ExperimentConfig cfg = parse_config(j);
  auto model = make_model(cfg.family);
  const FeasibleSet domain = cfg.family.domain_override
                                 ? *cfg.family.domain_override
                                 : model->default_domain();
  const ParameterPath path = build_path(cfg, domain);
  const double V = ParameterPath::realized_tv(path.values);
  const Regime regime = cfg.schedule.regime;

  json out{{"horizon", cfg.horizon},
           {"total_variation", V},
           {"tv_regret_reference",
            tv_regret_reference(regime, V, cfg.horizon, cfg.family.d, cfg.batch_size)},
           {"tv_lower_bound",
            lower_bound_reference_tv(regime, V, cfg.horizon, cfg.family.d,
                                     cfg.batch_size)}};
  SegmentationConstants c;
  c.d = cfg.family.d;
  c.B = cfg.batch_size;
  const RegularityConstants& rc = model->constants();
  c.sigma = std::max(rc.sigma, 1e-12);
  c.M = std::max(rc.M, 1e-12);
  if (regime == Regime::strongly_convex) {
    c.rho = std::max(rc.rho, 1e-12);
    c.r = std::max(rc.r, 1e-12);
  }
  out["tv_to_j_bound"] = tv_to_j_bound(regime, V, cfg.horizon, c);
  if (path.segment_hint) {
    std::vector<std::size_t> lengths;
    std::vector<double> jumps;
    const auto& b = *path.segment_hint;
    for (std::size_t jx = 1; jx < b.size(); ++jx) {
      lengths.push_back(b[jx] - b[jx - 1]);
      const std::size_t end = b[jx];  // jump from period end to end + 1
      jumps.push_back(end < path.values.size()
                          ? distance2(path.values[end - 1], path.values[end])
                          : 0.0);
    }
    out["segment_lower_bound"] =
        regime == Regime::strongly_convex
            ? lower_bound_reference_sc(lengths, jumps, cfg.family.d, cfg.batch_size)
            : lower_bound_reference_lip(lengths, jumps, cfg.family.d, cfg.batch_size);
  }
  std::cout << out.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stability-based adaptive window selection experiments"};
  app.require_subcommand(1);

  std::string config_path, out_dir, csv_a, csv_b;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> reps;
  bool parallel = false;

  auto* run = app.add_subcommand("run", "run an experiment from a JSON config");
  run->add_option("config", config_path, "config file")->required();
  run->add_option("--seed", seed, "override the config seed");
  run->add_option("--reps", reps, "override the replication count");
  run->add_option("--out-dir", out_dir, "directory for trace/summary files");
  run->add_flag("--parallel", parallel, "run replications concurrently");

  auto* sweep = app.add_subcommand("sweep", "grid sweep over V, u and C_tau");
  sweep->add_option("config", config_path, "config file with a 'sweep' object")
      ->required();
  sweep->add_option("--seed", seed, "override the config seed");
  sweep->add_option("--reps", reps, "override the replication count");
  sweep->add_option("--out-dir", out_dir, "directory for the sweep summary");
  sweep->add_flag("--parallel", parallel, "run replications concurrently");

  std::string regime = "strongly-convex";
  double rho = 1.0, sigma = 1.0, M = 1.0, rr = 1.0;
  std::size_t d = 1, B = 1;
  auto* segment = app.add_subcommand("segment", "greedy segmentation of a CSV path");
  segment->add_option("path", csv_a, "CSV path or per-period function values")
      ->required();
  segment->add_option("--regime", regime, "strongly-convex | lipschitz");
  segment->add_option("--rho", rho);
  segment->add_option("--sigma", sigma);
  segment->add_option("--M", M);
  segment->add_option("--r", rr);
  segment->add_option("--d", d);
  segment->add_option("--B", B);

  double eps = 0.0;
  std::optional<double> delta;
  auto* closeness = app.add_subcommand("closeness", "closeness of two grid functions");
  closeness->add_option("f", csv_a, "CSV of the first grid function")->required();
  closeness->add_option("g", csv_b, "CSV of the second grid function")->required();
  closeness->add_option("--eps", eps, "leeway parameter")->required();
  closeness->add_option("--delta", delta, "also report whether (eps,delta)-close");

  auto* bounds = app.add_subcommand("bounds", "reference curves for a config");
  bounds->add_option("config", config_path, "config file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config_path, seed, reps, out_dir, parallel);
    if (sweep->parsed()) return cmd_sweep(config_path, seed, reps, out_dir, parallel);
    if (segment->parsed())
      return cmd_segment(csv_a, regime, rho, sigma, M, rr, d, B);
    if (closeness->parsed()) return cmd_closeness(csv_a, csv_b, eps, delta);
    if (bounds->parsed()) return cmd_bounds(config_path);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
