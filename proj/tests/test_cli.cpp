#include <gtest/gtest.h>

#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "gaplab/io.hpp"
#include "gaplab/samplers.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace gaplab;

namespace {

std::string cli() { return std::string(GAPLAB_CLI_PATH); }

int run_cmd(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string first_line(const fs::path& path) {
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  return line;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() /
                       ("gaplab_cli_" + std::to_string(getpid())) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

json read_manifest(const fs::path& dir) {
  json m;
  std::ifstream in(dir / "manifest.json");
  in >> m;
  return m;
}

}  // namespace

TEST(Io, FormatDoubleRoundTrips) {
  EXPECT_EQ(format_double(0.5), "0.5");
  EXPECT_EQ(format_double(-2.0), "-2");
  EXPECT_EQ(format_double(0.0), "0");
  for (double v : {1.0 / 3.0, 0.1, 1e-17, -123456.789}) {
    EXPECT_EQ(std::stod(format_double(v)), v);
  }
}

TEST(Io, TrainingCsvRowLayout) {
  IterRecord rec;
  rec.iter = 7;
  rec.theta = {1.5, -2.0};
  rec.j_sde = -1.25;
  rec.j_ode = -1.5;
  rec.gap = 0.25;
  rec.grad_norm = 0.125;
  rec.seconds = 3.25;
  EXPECT_EQ(training_csv_header(), "iter,theta,j_sde,j_ode,gap,grad_norm,seconds");
  EXPECT_EQ(training_csv_row(rec), "7,1.5;-2,-1.25,-1.5,0.25,0.125,3.25");
  EXPECT_EQ(training_csv_row(rec, /*deterministic_seconds=*/true),
            "7,1.5;-2,-1.25,-1.5,0.25,0.125,0");
}

TEST(Io, GapReportJsonFields) {
  GapReport r;
  r.j_sde = -1.25;
  r.method = GapMethod::MonteCarlo;
  const json j = gap_report_json(r, {{"eta", 1.0}});
  for (const char* key :
       {"j_ref", "j_sde", "j_ode", "delta", "signed_gap", "improvement", "bound",
        "bound_satisfied", "se_ref", "se_sde", "se_ode", "se_delta", "method",
        "params"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  EXPECT_EQ(j["method"], "monte_carlo");
  EXPECT_EQ(j["params"]["eta"], 1.0);
}

TEST(Io, BatchCsvAndBinary) {
  const fs::path dir = scratch("batch_io");
  const DiffusionModel model = DiffusionModel::ve(2.0);
  const TimeGrid grid(2.0, 20);
  const TrajectoryBatch b =
      integrate_sde(model, ScoreModel::exact_ve(2.0), 1.0, grid, 10, 5);

  const fs::path csv = dir / "batch.csv";
  write_batch_csv(b, csv.string());
  EXPECT_EQ(first_line(csv), "trajectory,dimension,value");

  const fs::path bin = dir / "batch.bin";
  write_batch_binary(b, bin.string());
  EXPECT_EQ(fs::file_size(bin), b.n * sizeof(double));
  json side;
  std::ifstream sidecar(bin.string() + ".json");
  sidecar >> side;
  EXPECT_EQ(side["n"], 10);
  EXPECT_EQ(side["grid"]["T"], 2.0);
  EXPECT_EQ(side["seed"], 5);
}

TEST(Cli, MarginalCheckPasses) {
  const fs::path dir = scratch("marginal");
  const int rc = run_cmd(cli() +
                         " run --experiment marginal_check --model ve"
                         " --eta 0,1 --T 5 --n-samples 10000 --n-steps 300"
                         " --seed 7 --out " +
                         dir.string());
  EXPECT_EQ(rc, 0);
  EXPECT_EQ(first_line(dir / "marginal_check.csv"),
            "eta,n,mean,se_mean,var,var_target,pass");
  const json manifest = read_manifest(dir);
  EXPECT_TRUE(manifest["all_pass"].get<bool>());
  EXPECT_EQ(manifest["kind"], "marginal_check");
  EXPECT_EQ(manifest["artifact_version"], "1.0.0");
}

TEST(Cli, VeGapSchemaAndBound) {
  const fs::path dir = scratch("ve_gap");
  const int rc = run_cmd(cli() +
                         " run --experiment ve_gap --eta 1 --T 10 --beta 2"
                         " --n-samples 4000 --n-steps 400 --seed 3 --out " +
                         dir.string());
  EXPECT_EQ(rc, 0);
  EXPECT_EQ(first_line(dir / "ve_gap.csv"),
            "model,eta,T,beta,theta_star,j_ref,j_sde,j_ode,delta_analytic,"
            "delta_mc,se_delta,improvement,bound,pass");
  const std::string body = slurp(dir / "ve_gap.csv");
  EXPECT_NE(body.find("ve,1,10,2,-0.505,"), std::string::npos);
  EXPECT_NE(body.find(",0.05,1"), std::string::npos);  // bound column + pass
  EXPECT_TRUE(fs::exists(dir / "ve_gap.svg"));
}

TEST(Cli, ByteIdenticalAcrossRunsAndWorkerCounts) {
  const fs::path d1 = scratch("det1"), d2 = scratch("det2"), d3 = scratch("det3");
  const std::string args =
      " run --experiment ve_gap --eta 0.5,1 --T 5 --n-samples 2000"
      " --n-steps 200 --seed 11 --out ";
  EXPECT_EQ(run_cmd("GAPLAB_THREADS=1 " + cli() + args + d1.string()), 0);
  EXPECT_EQ(run_cmd("GAPLAB_THREADS=1 " + cli() + args + d2.string()), 0);
  EXPECT_EQ(run_cmd("GAPLAB_THREADS=5 " + cli() + args + d3.string()), 0);
  const std::string base = slurp(d1 / "ve_gap.csv");
  EXPECT_FALSE(base.empty());
  EXPECT_EQ(base, slurp(d2 / "ve_gap.csv"));
  EXPECT_EQ(base, slurp(d3 / "ve_gap.csv"));
}

TEST(Cli, InvalidConfigExitsTwo) {
  const fs::path dir = scratch("invalid");
  EXPECT_EQ(run_cmd(cli() + " run --experiment no_such_kind --out " +
                    dir.string() + " 2>/dev/null"),
            2);
  EXPECT_EQ(run_cmd(cli() + " run --config /nonexistent.conf --out " +
                    dir.string() + " 2>/dev/null"),
            2);
  EXPECT_EQ(run_cmd(cli() + " run --experiment ve_gap --n-samples 10 --out " +
                    dir.string() + " 2>/dev/null"),
            2);
}

TEST(Cli, VpGapReportsHonestBoundViolation) {
  // The advertised VP rate is tighter than the true gap at T=3; the runner
  // must exit nonzero instead of massaging the check.
  const fs::path dir = scratch("vp_gap");
  const int rc = run_cmd(cli() +
                         " run --experiment vp_gap --model vp --eta 1 --T 3"
                         " --n-samples 2000 --n-steps 300 --seed 5 --out " +
                         dir.string() + " 2>/dev/null");
  EXPECT_EQ(rc, 1);
  const json manifest = read_manifest(dir);
  EXPECT_FALSE(manifest["all_pass"].get<bool>());
}

TEST(Cli, ReportBuildsPivot) {
  const fs::path run_dir = scratch("report_run");
  const fs::path rep_dir = scratch("report_out");
  ASSERT_EQ(run_cmd(cli() +
                    " sweep --experiment ve_gap --eta 0.5,1 --T 5,10"
                    " --n-samples 1000 --n-steps 200 --seed 13 --out " +
                    run_dir.string()),
            0);
  ASSERT_EQ(run_cmd(cli() + " report " + (run_dir / "manifest.json").string() +
                    " --out " + rep_dir.string()),
            0);
  const fs::path pivot = rep_dir / "report_ve_gap.csv";
  EXPECT_EQ(first_line(pivot), "T,eta=0.5,eta=1");
  const std::string body = slurp(pivot);
  EXPECT_NE(body.find("\n5,"), std::string::npos);
  EXPECT_NE(body.find("\n10,"), std::string::npos);
  EXPECT_NE(slurp(rep_dir / "report_ve_gap.txt").find("ALL BOUND CHECKS PASS"),
            std::string::npos);
}

TEST(Cli, ReportRejectsMixedKinds) {
  const fs::path d1 = scratch("mixed1"), d2 = scratch("mixed2");
  const fs::path rep = scratch("mixed_rep");
  ASSERT_EQ(run_cmd(cli() +
                    " run --experiment ve_gap --eta 1 --T 5 --n-samples 500"
                    " --n-steps 100 --seed 2 --out " +
                    d1.string()),
            0);
  ASSERT_EQ(run_cmd(cli() +
                    " run --experiment marginal_check --eta 1 --T 5"
                    " --n-samples 5000 --n-steps 200 --seed 2 --out " +
                    d2.string()),
            0);
  EXPECT_EQ(run_cmd(cli() + " report " + (d1 / "manifest.json").string() + " " +
                    (d2 / "manifest.json").string() + " --out " + rep.string() +
                    " 2>/dev/null"),
            2);
}

TEST(Cli, ConfigFileWithFlagOverride) {
  const fs::path dir = scratch("config");
  const fs::path cfg_path = dir / "exp.conf";
  {
    std::ofstream cfg(cfg_path);
    cfg << "# experiment settings\n"
        << "[experiment]\n"
        << "kind = marginal_check\n"
        << "model = ve\n"
        << "eta = 1\n"
        << "T = 5\n"
        << "n_samples = 5000\n"
        << "n_steps = 200\n"
        << "seed = 3\n";
  }
  const fs::path d1 = dir / "from_file";
  ASSERT_EQ(run_cmd(cli() + " run --config " + cfg_path.string() + " --out " +
                    d1.string()),
            0);
  EXPECT_EQ(read_manifest(d1)["kind"], "marginal_check");

  // Flags win over the config file.
  const fs::path d2 = dir / "overridden";
  ASSERT_EQ(run_cmd(cli() + " run --config " + cfg_path.string() +
                    " --experiment ve_gap --n-samples 500 --n-steps 100"
                    " --out " +
                    d2.string()),
            0);
  EXPECT_EQ(read_manifest(d2)["kind"], "ve_gap");

  // Unknown keys are configuration errors.
  const fs::path bad_path = dir / "bad.conf";
  {
    std::ofstream bad(bad_path);
    bad << "frobnicate = 7\n";
  }
  EXPECT_EQ(run_cmd(cli() + " run --config " + bad_path.string() +
                    " --out " + dir.string() + " 2>/dev/null"),
            2);
}

TEST(Cli, JsonFormatEmitsRows) {
  const fs::path dir = scratch("json_rows");
  ASSERT_EQ(run_cmd(cli() +
                    " run --experiment ve_gap --eta 1 --T 10 --n-samples 500"
                    " --n-steps 100 --seed 4 --format json --out " +
                    dir.string()),
            0);
  json rows;
  std::ifstream in(dir / "ve_gap.json");
  in >> rows;
  ASSERT_TRUE(rows.is_array());
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_TRUE(rows[0].contains("delta_analytic"));
  EXPECT_TRUE(rows[0].contains("signed_gap"));
  EXPECT_EQ(rows[0]["params"]["model"], "ve");
}

