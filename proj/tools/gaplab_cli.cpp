// Experiment runner: seeded sweeps over (model, eta, T, beta) with CSV/JSON
// reports, SVG charts and a JSON run manifest per invocation.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gaplab/gap.hpp"
#include "gaplab/io.hpp"
#include "gaplab/rlhf.hpp"
#include "gaplab/samplers.hpp"
#include "gaplab/svg.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace gaplab;

namespace {

constexpr const char* kArtifactVersion = "1.0.0";

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  std::string kind = "ve_gap";
  std::string model = "ve";
  std::vector<double> etas{1.0};
  std::vector<double> horizons{10.0};
  double beta = 2.0;
  std::size_t n_samples = 100000;
  std::size_t n_steps = 400;
  std::uint64_t seed = 1;
  std::string out_dir = "out";
  std::string format = "csv";
  // training knobs (config-file only)
  std::size_t iterations = 120;
  std::size_t batch_size = 256;
  std::size_t group_size = 16;
  std::size_t groups_per_iter = 16;
  double learning_rate = 0.2;
  double clip_eps = 0.2;
  double theta_init = -2.0;

  void validate() const {
    static const std::vector<std::string> kinds = {
        "marginal_check", "ve_gap",     "vp_gap",     "mixture_gap",
        "w2_bound",       "ddpo_train", "grpo_train", "gddim_check"};
    if (std::find(kinds.begin(), kinds.end(), kind) == kinds.end())
      throw ConfigError("unknown experiment kind: " + kind);
    if (model != "ve" && model != "vp")
      throw ConfigError("model must be ve or vp, got: " + model);
    if (etas.empty()) throw ConfigError("eta list must be non-empty");
    if (horizons.empty()) throw ConfigError("T list must be non-empty");
    for (double t : horizons)
      if (!(t > 0.0)) throw ConfigError("T values must be positive");
    for (double e : etas)
      if (!(e >= 0.0)) throw ConfigError("eta values must be >= 0");
    if (n_samples < 100) throw ConfigError("n_samples must be >= 100");
    if (n_steps == 0) throw ConfigError("n_steps must be >= 1");
    if (!(beta >= 0.0)) throw ConfigError("beta must be >= 0");
    if (format != "csv" && format != "json")
      throw ConfigError("format must be csv or json");
  }

  std::string canonical() const {
    std::string s = "kind=" + kind + ";model=" + model + ";eta=";
    for (double e : etas) s += format_double(e) + ",";
    s += ";T=";
    for (double t : horizons) s += format_double(t) + ",";
    s += ";beta=" + format_double(beta);
    s += ";n_samples=" + std::to_string(n_samples);
    s += ";n_steps=" + std::to_string(n_steps);
    s += ";seed=" + std::to_string(seed);
    s += ";iterations=" + std::to_string(iterations);
    s += ";batch=" + std::to_string(batch_size);
    s += ";group=" + std::to_string(group_size);
    s += ";lr=" + format_double(learning_rate);
    s += ";theta_init=" + format_double(theta_init);
    return s;
  }
};

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::vector<double> parse_list(const std::string& raw) {
  std::vector<double> out;
  std::stringstream ss(raw);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(std::stod(item));
  return out;
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

// key = value lines with optional [section] headers; keys are global.
void load_config_file(const std::string& path, ExperimentConfig& cfg) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file: " + path);
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty() || line.front() == '[') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("malformed config line: " + line);
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    try {
      if (key == "kind" || key == "experiment") cfg.kind = val;
      else if (key == "model") cfg.model = val;
      else if (key == "eta") cfg.etas = parse_list(val);
      else if (key == "T") cfg.horizons = parse_list(val);
      else if (key == "beta") cfg.beta = std::stod(val);
      else if (key == "n_samples") cfg.n_samples = std::stoull(val);
      else if (key == "n_steps") cfg.n_steps = std::stoull(val);
      else if (key == "seed") cfg.seed = std::stoull(val);
      else if (key == "out") cfg.out_dir = val;
      else if (key == "format") cfg.format = val;
      else if (key == "iterations") cfg.iterations = std::stoull(val);
      else if (key == "batch_size") cfg.batch_size = std::stoull(val);
      else if (key == "group_size") cfg.group_size = std::stoull(val);
      else if (key == "groups_per_iter") cfg.groups_per_iter = std::stoull(val);
      else if (key == "learning_rate") cfg.learning_rate = std::stod(val);
      else if (key == "clip_eps") cfg.clip_eps = std::stod(val);
      else if (key == "theta_init") cfg.theta_init = std::stod(val);
      else throw ConfigError("unknown config key: " + key);
    } catch (const std::invalid_argument&) {
      throw ConfigError("bad value for " + key + ": " + val);
    }
  }
}

struct CellCheck {
  std::string cell;
  bool pass = false;
};

struct RunOutput {
  std::vector<std::string> header_and_rows;  // CSV lines, header first
  std::vector<CellCheck> checks;
  std::vector<SvgSeries> chart;
  std::string chart_title, chart_x, chart_y;
  json rows_json = json::array();
};

ScoreModel tuned_score(const std::string& model, double theta, double T) {
  return model == "ve"
             ? ScoreModel::exact_ve(T).with_constant_shift({theta})
             : ScoreModel::exact_vp().with_decayed_shift({theta});
}

std::string csv_bool(bool b) { return b ? "1" : "0"; }

RunOutput run_marginal(const ExperimentConfig& cfg, bool gddim) {
  RunOutput out;
  out.header_and_rows.push_back("eta,n,mean,se_mean,var,var_target,pass");
  const double T = cfg.horizons.front();
  const TimeGrid grid(T, cfg.n_steps);
  const DiffusionModel model =
      cfg.model == "ve" ? DiffusionModel::ve(T) : DiffusionModel::vp(T);
  for (double eta : cfg.etas) {
    TrajectoryBatch batch;
    double var_target;
    if (gddim) {
      const AlphaSchedule sched =
          build_alpha_schedule(ScheduleKind::VpQuadratic, grid);
      batch = gddim_sample(sched, ScoreModel::exact_vp(), eta, cfg.n_samples,
                           cfg.seed);
      var_target = 1.0;
    } else {
      const ScoreModel score = cfg.model == "ve" ? ScoreModel::exact_ve(T)
                                                 : ScoreModel::exact_vp();
      batch = integrate_sde(model, score, eta, grid, cfg.n_samples, cfg.seed);
      var_target = cfg.model == "ve" ? terminal_law_ve(0.0, eta, T).var() : 1.0;
    }
    double mean, var;
    batch.terminal_moments(0, mean, var);
    const double n = static_cast<double>(cfg.n_samples);
    const double se_mean = std::sqrt(var / n);
    const bool pass = std::abs(mean) <= 3.0 * std::sqrt(var_target / n) &&
                      std::abs(var - var_target) <=
                          3.0 * var_target * std::sqrt(2.0 / n);
    out.header_and_rows.push_back(
        format_double(eta) + ',' + std::to_string(cfg.n_samples) + ',' +
        format_double(mean) + ',' + format_double(se_mean) + ',' +
        format_double(var) + ',' + format_double(var_target) + ',' +
        csv_bool(pass));
    out.checks.push_back({"eta=" + format_double(eta), pass});
    out.rows_json.push_back({{"eta", eta},
                             {"n", cfg.n_samples},
                             {"mean", mean},
                             {"se_mean", se_mean},
                             {"var", var},
                             {"var_target", var_target},
                             {"pass", pass}});
  }
  return out;
}

RunOutput run_gap(const ExperimentConfig& cfg) {
  RunOutput out;
  out.header_and_rows.push_back(
      "model,eta,T,beta,theta_star,j_ref,j_sde,j_ode,delta_analytic,delta_mc,"
      "se_delta,improvement,bound,pass");
  const bool mixture = cfg.kind == "mixture_gap";
  const ModelKind kind =
      cfg.kind == "vp_gap" ? ModelKind::VP : ModelKind::VE;
  const std::string model_name = mixture ? "mixture" : cfg.kind.substr(0, 2);

  std::map<double, SvgSeries> per_eta;
  for (double T : cfg.horizons) {
    const TimeGrid grid(T, cfg.n_steps);
    for (double eta : cfg.etas) {
      FinetuneSpec spec;
      spec.model = kind;
      spec.eta = eta;
      spec.beta = cfg.beta;
      spec.T = T;
      spec.target = 1.0;
      const double theta_star = optimal_theta(spec);
      const GapReport analytic = analytic_gap(spec);

      GapReport mc;
      if (mixture) {
        MixtureLaw prior;
        prior.weights = {0.5, 0.5};
        prior.means = {{1.0, 0.0}, {-1.0, 0.0}};
        prior.covariances = {{1.0, 1.0}, {1.0, 1.0}};
        mc = mixture_gap_experiment(prior, {0.0, 1.0}, eta, T, cfg.n_samples,
                                    cfg.seed, cfg.beta, cfg.n_steps);
      } else {
        const DiffusionModel model = kind == ModelKind::VE
                                         ? DiffusionModel::ve(T)
                                         : DiffusionModel::vp(T);
        const std::string mname = kind == ModelKind::VE ? "ve" : "vp";
        const ScoreModel ref_score = tuned_score(mname, 0.0, T);
        const ScoreModel score = tuned_score(mname, theta_star, T);
        const TrajectoryBatch ref =
            integrate_sde(model, ref_score, eta, grid, cfg.n_samples, cfg.seed);
        const TrajectoryBatch sde =
            integrate_sde(model, score, eta, grid, cfg.n_samples, cfg.seed + 1);
        const TrajectoryBatch ode =
            integrate_ode(model, score, grid, cfg.n_samples, cfg.seed + 2);
        mc = mc_gap(ref, sde, ode, {1.0});
      }
      const bool consistent =
          mixture ? mc.delta <= analytic.bound_value + 3.0 * mc.se_delta
                  : std::abs(mc.delta - analytic.delta) <= 3.0 * mc.se_delta;
      const bool pass = analytic.bound_satisfied && consistent;
      out.header_and_rows.push_back(
          model_name + ',' + format_double(eta) + ',' + format_double(T) + ',' +
          format_double(cfg.beta) + ',' + format_double(theta_star) + ',' +
          format_double(analytic.j_ref) + ',' + format_double(analytic.j_sde) +
          ',' + format_double(analytic.j_ode) + ',' +
          format_double(analytic.delta) + ',' + format_double(mc.delta) + ',' +
          format_double(mc.se_delta) + ',' + format_double(analytic.improvement) +
          ',' + format_double(analytic.bound_value) + ',' + csv_bool(pass));
      out.checks.push_back({"eta=" + format_double(eta) + ",T=" + format_double(T),
                            pass});
      json params = {{"model", model_name}, {"eta", eta}, {"T", T},
                     {"beta", cfg.beta},    {"theta_star", theta_star}};
      json row = gap_report_json(mc, params);
      row["delta_analytic"] = analytic.delta;
      row["pass"] = pass;
      out.rows_json.push_back(row);
      SvgSeries& s = per_eta[eta];
      s.label = "eta=" + format_double(eta);
      s.x.push_back(T);
      s.y.push_back(analytic.delta);
    }
  }
  for (auto& [eta, s] : per_eta) out.chart.push_back(std::move(s));
  out.chart_title = "reward gap vs horizon";
  out.chart_x = "T";
  out.chart_y = "delta";
  return out;
}

RunOutput run_w2(const ExperimentConfig& cfg) {
  RunOutput out;
  out.header_and_rows.push_back("eta,T,n,coupled_l2,w2_bound,pass");
  const double m = 2.0, L = 0.5;
  std::map<double, SvgSeries> per_eta;
  for (double T : cfg.horizons) {
    const TimeGrid grid(T, cfg.n_steps);
    DiffusionModel model = DiffusionModel::generic_linear(
        [m](double) { return m; }, [](double) { return 1.0; }, T);
    const ScoreModel score = ScoreModel::linear(-L);
    for (double eta : cfg.etas) {
      const TrajectoryBatch sde = integrate_sde(model, score, eta, grid,
                                                cfg.n_samples, cfg.seed, true);
      const TrajectoryBatch ode =
          integrate_ode(model, score, grid, cfg.n_samples, cfg.seed, false,
                        OdeScheme::Euler);
      const double dist = coupled_l2(sde, ode);
      W2Assumptions assume;
      assume.m = m;
      assume.L = L;
      assume.g_inf = 1.0;
      assume.eta = eta;
      double a_hat = 0.0;
      for (std::size_t k = 0; k <= grid.n_steps; ++k) {
        double s = 0.0;
        for (std::size_t i = 0; i < sde.n; ++i) {
          const double v = sde.path_at(i, k);
          s += v * v;
        }
        a_hat = std::max(a_hat, s / static_cast<double>(sde.n));
      }
      assume.A = a_hat;
      const double bound = w2_bound(assume, T);
      const bool pass = dist <= bound;
      out.header_and_rows.push_back(
          format_double(eta) + ',' + format_double(T) + ',' +
          std::to_string(cfg.n_samples) + ',' + format_double(dist) + ',' +
          format_double(bound) + ',' + csv_bool(pass));
      out.checks.push_back(
          {"eta=" + format_double(eta) + ",T=" + format_double(T), pass});
      out.rows_json.push_back({{"eta", eta},
                               {"T", T},
                               {"n", cfg.n_samples},
                               {"coupled_l2", dist},
                               {"w2_bound", bound},
                               {"pass", pass}});
      SvgSeries& s = per_eta[eta];
      s.label = "eta=" + format_double(eta);
      s.x.push_back(T);
      s.y.push_back(dist);
    }
  }
  for (auto& [eta, s] : per_eta) out.chart.push_back(std::move(s));
  out.chart_title = "coupled displacement vs horizon";
  out.chart_x = "T";
  out.chart_y = "coupled_l2";
  return out;
}

RunOutput run_training(const ExperimentConfig& cfg) {
  RunOutput out;
  out.header_and_rows.push_back(training_csv_header());
  const double T = cfg.horizons.front();
  const double eta = cfg.etas.front();

  PolicySpec policy;
  policy.model = cfg.model == "ve" ? DiffusionModel::ve(T) : DiffusionModel::vp(T);
  policy.control_form = cfg.model == "ve" ? ControlForm::ConstantShift
                                          : ControlForm::DecayedShift;
  policy.theta = {cfg.theta_init};
  policy.eta_train = eta;
  policy.grid = TimeGrid(T, cfg.n_steps);

  TrainConfig tc;
  tc.iterations = cfg.iterations;
  tc.batch_size = cfg.batch_size;
  tc.group_size = cfg.group_size;
  tc.groups_per_iter = cfg.groups_per_iter;
  tc.learning_rate = cfg.learning_rate;
  tc.clip_eps = cfg.clip_eps;
  tc.beta = cfg.kind == "ddpo_train" ? cfg.beta : 0.0;
  tc.seed = cfg.seed;

  const RewardFn reward = [](const std::vector<double>& x) {
    return quadratic_reward(x, std::vector<double>{1.0});
  };
  const TrainResult result = cfg.kind == "ddpo_train"
                                 ? ddpo_train(policy, tc, reward)
                                 : grpo_train(policy, tc, reward);

  const double theta_ref =
      cfg.model == "ve" ? optimal_theta_ve(eta, tc.beta > 0 ? tc.beta : 1e-12, T)
                        : optimal_theta_vp(eta, tc.beta > 0 ? tc.beta : 1e-12, T);
  const double tol = cfg.kind == "ddpo_train" ? 0.05 : 0.1;
  const bool converged = std::abs(result.theta[0] - theta_ref) <= tol;

  SvgSeries gap_curve;
  gap_curve.label = "gap";
  for (const IterRecord& rec : result.log) {
    out.header_and_rows.push_back(training_csv_row(rec, true));
    out.rows_json.push_back({{"iter", rec.iter},
                             {"theta", rec.theta},
                             {"j_sde", rec.j_sde},
                             {"j_ode", rec.j_ode},
                             {"gap", rec.gap},
                             {"grad_norm", rec.grad_norm}});
    gap_curve.x.push_back(static_cast<double>(rec.iter));
    gap_curve.y.push_back(rec.gap);
  }
  out.checks.push_back({"theta_converged", converged});
  out.chart.push_back(std::move(gap_curve));
  out.chart_title = "reward gap vs iteration";
  out.chart_x = "iteration";
  out.chart_y = "gap";
  return out;
}

json write_outputs(const ExperimentConfig& cfg, const RunOutput& result,
                   double seconds) {
  fs::create_directories(cfg.out_dir);
  std::vector<std::string> outputs;

  const std::string csv_path = cfg.out_dir + "/" + cfg.kind + ".csv";
  {
    std::ofstream csv(csv_path, std::ios::binary);
    for (const std::string& line : result.header_and_rows) csv << line << '\n';
  }
  outputs.push_back(csv_path);

  if (cfg.format == "json") {
    const std::string json_path = cfg.out_dir + "/" + cfg.kind + ".json";
    std::ofstream jf(json_path, std::ios::binary);
    jf << result.rows_json.dump(2) << '\n';
    outputs.push_back(json_path);
  }

  if (!result.chart.empty()) {
    const std::string svg_path = cfg.out_dir + "/" + cfg.kind + ".svg";
    write_svg_chart(svg_path, result.chart_title, result.chart_x, result.chart_y,
                    result.chart);
    outputs.push_back(svg_path);
  }

  bool all_pass = true;
  json checks = json::array();
  for (const CellCheck& c : result.checks) {
    checks.push_back({{"cell", c.cell}, {"pass", c.pass}});
    all_pass = all_pass && c.pass;
  }

  json manifest;
  manifest["artifact_version"] = kArtifactVersion;
  manifest["config_hash"] = fnv1a(cfg.canonical());
  manifest["kind"] = cfg.kind;
  manifest["outputs"] = outputs;
  manifest["duration_seconds"] = seconds;
  manifest["checks"] = checks;
  manifest["all_pass"] = all_pass;
  const std::string manifest_path = cfg.out_dir + "/manifest.json";
  std::ofstream mf(manifest_path, std::ios::binary);
  mf << manifest.dump(2) << '\n';
  return manifest;
}

int run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto started = std::chrono::steady_clock::now();
  RunOutput result;
  if (cfg.kind == "marginal_check") result = run_marginal(cfg, false);
  else if (cfg.kind == "gddim_check") result = run_marginal(cfg, true);
  else if (cfg.kind == "ve_gap" || cfg.kind == "vp_gap" ||
           cfg.kind == "mixture_gap") result = run_gap(cfg);
  else if (cfg.kind == "w2_bound") result = run_w2(cfg);
  else result = run_training(cfg);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
          .count();
  const json manifest = write_outputs(cfg, result, seconds);
  if (!manifest["all_pass"].get<bool>()) {
    for (const auto& c : manifest["checks"])
      if (!c["pass"].get<bool>())
        std::cerr << "bound check failed: " << c["cell"].get<std::string>()
                  << '\n';
    return 1;
  }
  return 0;
}

// Pivot a gap/w2 CSV (rows: T, columns: eta) or a training CSV (identity on
// iterations) and summarize bound satisfaction.
int report(const std::vector<std::string>& manifest_paths,
           const std::string& out_dir) {
  if (manifest_paths.empty()) {
    std::cerr << "report: no manifests given\n";
    return 2;
  }
  std::string kind;
  std::map<double, std::map<double, double>> pivot;  // T -> eta -> delta
  std::vector<std::string> summary;
  bool all_pass = true;
  bool training = false;
  std::vector<std::pair<double, double>> gap_by_iter;

  for (const std::string& mp : manifest_paths) {
    std::ifstream in(mp);
    if (!in) {
      std::cerr << "report: cannot read " << mp << '\n';
      return 2;
    }
    json manifest;
    in >> manifest;
    const std::string k = manifest["kind"].get<std::string>();
    if (kind.empty()) kind = k;
    else if (kind != k) {
      std::cerr << "report: mixed experiment kinds (" << kind << " vs " << k
                << ")\n";
      return 2;
    }
    all_pass = all_pass && manifest["all_pass"].get<bool>();
    for (const auto& c : manifest["checks"])
      summary.push_back(c["cell"].get<std::string>() + ": " +
                        (c["pass"].get<bool>() ? "pass" : "FAIL"));

    const std::string csv_path = manifest["outputs"][0].get<std::string>();
    std::ifstream csv(csv_path);
    if (!csv) {
      std::cerr << "report: missing output " << csv_path << '\n';
      return 2;
    }
    std::string line;
    std::getline(csv, line);  // header
    std::vector<std::string> cols;
    {
      std::stringstream hs(line);
      std::string c;
      while (std::getline(hs, c, ',')) cols.push_back(c);
    }
    auto col = [&](const std::string& name) {
      for (std::size_t i = 0; i < cols.size(); ++i)
        if (cols[i] == name) return static_cast<long>(i);
      return -1L;
    };
    const long ci_eta = col("eta"), ci_T = col("T"),
               ci_delta = std::max(col("delta_analytic"), col("coupled_l2")),
               ci_iter = col("iter"), ci_gap = col("gap");
    training = ci_iter >= 0;
    while (std::getline(csv, line)) {
      std::vector<std::string> f;
      std::stringstream ls(line);
      std::string c;
      while (std::getline(ls, c, ',')) f.push_back(c);
      if (training) {
        gap_by_iter.emplace_back(std::stod(f[ci_iter]), std::stod(f[ci_gap]));
      } else if (ci_eta >= 0 && ci_T >= 0 && ci_delta >= 0) {
        pivot[std::stod(f[ci_T])][std::stod(f[ci_eta])] = std::stod(f[ci_delta]);
      }
    }
  }

  fs::create_directories(out_dir);
  const std::string pivot_path = out_dir + "/report_" + kind + ".csv";
  std::ofstream out(pivot_path, std::ios::binary);
  if (training) {
    out << "iter,gap\n";
    bool monotone = true;
    for (std::size_t i = 0; i < gap_by_iter.size(); ++i) {
      out << format_double(gap_by_iter[i].first) << ','
          << format_double(gap_by_iter[i].second) << '\n';
      if (i > 0 && gap_by_iter[i].second > gap_by_iter[i - 1].second)
        monotone = false;
    }
    summary.push_back(std::string("gap monotone decreasing: ") +
                      (monotone ? "yes" : "no"));
  } else {
    std::vector<double> etas;
    for (const auto& [T, row] : pivot)
      for (const auto& [eta, v] : row)
        if (std::find(etas.begin(), etas.end(), eta) == etas.end())
          etas.push_back(eta);
    std::sort(etas.begin(), etas.end());
    out << "T";
    for (double e : etas) out << ",eta=" << format_double(e);
    out << '\n';
    for (const auto& [T, row] : pivot) {
      out << format_double(T);
      for (double e : etas) {
        out << ',';
        const auto it = row.find(e);
        if (it != row.end()) out << format_double(it->second);
      }
      out << '\n';
    }
  }
  std::ofstream txt(out_dir + "/report_" + kind + ".txt", std::ios::binary);
  for (const std::string& s : summary) txt << s << '\n';
  txt << (all_pass ? "ALL BOUND CHECKS PASS" : "BOUND CHECK FAILURES PRESENT")
      << '\n';
  std::cout << pivot_path << '\n';
  return all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SDE/ODE reward-gap experiment runner"};
  app.require_subcommand(1);

  ExperimentConfig cfg;
  std::string config_path;
  std::string eta_list, t_list;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "config file (key = value)");
    sub->add_option("--experiment", cfg.kind, "experiment kind");
    sub->add_option("--model", cfg.model, "ve or vp");
    sub->add_option("--eta", eta_list, "comma-separated eta values");
    sub->add_option("--T", t_list, "comma-separated horizons");
    sub->add_option("--beta", cfg.beta, "KL weight");
    sub->add_option("--n-samples", cfg.n_samples, "Monte Carlo sample count");
    sub->add_option("--n-steps", cfg.n_steps, "integrator steps");
    sub->add_option("--seed", cfg.seed, "RNG seed");
    sub->add_option("--out", cfg.out_dir, "output directory");
    sub->add_option("--format", cfg.format, "csv or json");
  };

  CLI::App* run_cmd = app.add_subcommand("run", "run one experiment");
  add_common(run_cmd);
  CLI::App* sweep_cmd =
      app.add_subcommand("sweep", "run the full (eta, T) cross product");
  add_common(sweep_cmd);

  CLI::App* report_cmd =
      app.add_subcommand("report", "aggregate manifests into a pivot table");
  std::vector<std::string> manifests;
  std::string report_out = "out";
  report_cmd->add_option("manifests", manifests, "manifest.json paths");
  report_cmd->add_option("--out", report_out, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (report_cmd->parsed()) return report(manifests, report_out);
    // config file first, then flag overrides (flags win)
    ExperimentConfig file_cfg;
    if (!config_path.empty()) load_config_file(config_path, file_cfg);
    ExperimentConfig merged = file_cfg;
    CLI::App* sub = run_cmd->parsed() ? run_cmd : sweep_cmd;
    if (sub->count("--experiment")) merged.kind = cfg.kind;
    if (sub->count("--model")) merged.model = cfg.model;
    if (sub->count("--eta")) merged.etas = parse_list(eta_list);
    if (sub->count("--T")) merged.horizons = parse_list(t_list);
    if (sub->count("--beta")) merged.beta = cfg.beta;
    if (sub->count("--n-samples")) merged.n_samples = cfg.n_samples;
    if (sub->count("--n-steps")) merged.n_steps = cfg.n_steps;
    if (sub->count("--seed")) merged.seed = cfg.seed;
    if (sub->count("--out")) merged.out_dir = cfg.out_dir;
    if (sub->count("--format")) merged.format = cfg.format;
    if (config_path.empty() && !sub->count("--experiment"))
      merged.kind = cfg.kind;
    return run_experiment(merged);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << '\n';
    return 3;
  }
}
