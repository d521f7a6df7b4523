// End-to-end checks of the command-line tool: each test shells out to the
// built binary and inspects the artifacts it writes.

#include "crtb/crtb.hpp"
#include "crtb/io.hpp"

#include <doctest.h>
#include <json.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

using namespace crtb;
namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args) {
  const std::string cmd =
      std::string(CRTB_CLI_PATH) + " " + args + " > /dev/null 2> /dev/null";
  const int status = std::system(cmd.c_str());
  if (status == -1) return -1;
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

int run_cli_capture(const std::string& args, const fs::path& stderr_path) {
  const std::string cmd = std::string(CRTB_CLI_PATH) + " " + args +
                          " > /dev/null 2> " + stderr_path.string();
  const int status = std::system(cmd.c_str());
  if (status == -1) return -1;
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string data_file(const char* name) {
  return (fs::path(CRTB_TEST_DATA_DIR) / name).string();
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

// Fresh output directory per test, removed on destruction.
struct OutDir {
  fs::path path;

  explicit OutDir(const char* tag)
      : path(fs::temp_directory_path() /
             (std::string("crtb_cli_") + tag + "_" +
              std::to_string(::getpid()))) {
    fs::remove_all(path);
    fs::create_directories(path);
  }

  ~OutDir() { fs::remove_all(path); }

  std::string str() const { return path.string(); }
  fs::path operator/(const char* name) const { return path / name; }
};

}  // namespace

TEST_CASE("fit writes a loadable model and a report") {
  OutDir out("fit");
  const int rc = run_cli("fit --x " + data_file("toy_x.csv") + " --y " +
                         data_file("toy_y.csv") + " --out-dir " + out.str());
  REQUIRE(rc == 0);
  REQUIRE(fs::exists(out / "model.json"));
  REQUIRE(fs::exists(out / "fit_report.txt"));

  const LoadedFit loaded = load_fit((out / "model.json").string());
  CHECK(loaded.fit.B.rows() == 5);
  CHECK(loaded.fit.B.cols() == 2);
  CHECK(loaded.x_names.size() == 5);

  const std::string report = read_file(out / "fit_report.txt");
  CHECK(report.find("rows: 20") != std::string::npos);
  CHECK(report.find("predictors: 5") != std::string::npos);
  CHECK(report.find("converged:") != std::string::npos);
}

TEST_CASE("fit --write-flags emits indicator tables of the data shape") {
  OutDir out("flags");
  const int rc = run_cli("fit --x " + data_file("toy_x.csv") + " --y " +
                         data_file("toy_y.csv") + " --write-flags --out-dir " +
                         out.str());
  REQUIRE(rc == 0);
  const Table fx = read_table((out / "flags_x.csv").string());
  const Table fy = read_table((out / "flags_y.csv").string());
  CHECK(fx.values.rows() == 20);
  CHECK(fx.values.cols() == 5);
  CHECK(fy.values.cols() == 2);
  CHECK(((fx.values.array() == 0.0) || (fx.values.array() == 1.0)).all());
}

TEST_CASE("predict reproduces the in-process predictions bit for bit") {
  OutDir out("predict");
  REQUIRE(run_cli("fit --x " + data_file("toy_x.csv") + " --y " +
                  data_file("toy_y.csv") + " --out-dir " + out.str()) == 0);
  REQUIRE(run_cli("predict --model " + (out / "model.json").string() +
                  " --x " + data_file("toy_x.csv") + " --out-dir " +
                  out.str()) == 0);

  const Table x = read_table(data_file("toy_x.csv"));
  const Table y = read_table(data_file("toy_y.csv"));
  const CrtbFit fit = fit_crtb(x.values, y.values, CrtbConfig{});
  const Matrix expected = predict(fit, x.values);

  const Table got = read_table((out / "predictions.csv").string());
  REQUIRE(got.values.rows() == expected.rows());
  REQUIRE(got.values.cols() == expected.cols());
  CHECK((got.values.array() == expected.array()).all());
  CHECK(got.names == y.names);
}

TEST_CASE("tb and tb-sparse at eta zero write byte-identical artifacts") {
  OutDir a("tb_dense");
  OutDir b("tb_sparse0");
  REQUIRE(run_cli("fit --method tb --x " + data_file("toy_x.csv") + " --y " +
                  data_file("toy_y.csv") + " --out-dir " + a.str()) == 0);
  REQUIRE(run_cli("fit --method tb-sparse --eta-x 0 --eta-y 0 --x " +
                  data_file("toy_x.csv") + " --y " + data_file("toy_y.csv") +
                  " --out-dir " + b.str()) == 0);
  CHECK(read_file(a / "model.json") == read_file(b / "model.json"));
  CHECK(read_file(a / "fit_report.txt") == read_file(b / "fit_report.txt"));
}

TEST_CASE("flag emits the same masks as the library prefilter") {
  OutDir out("flag");
  REQUIRE(run_cli("flag --x " + data_file("toy_x.csv") + " --y " +
                  data_file("toy_y.csv") + " --out-dir " + out.str()) == 0);

  const Table x = read_table(data_file("toy_x.csv"));
  const ScalingModel scaler =
      fit_scaler(x.values, LocationKind::median, RobustScaleKind::mad);
  const CellMask expected = prefilter(transform(x.values, scaler), 0.99);

  const Table got = read_table((out / "x_cellmask.csv").string());
  REQUIRE(got.values.rows() == expected.rows());
  for (Index i = 0; i < expected.rows(); ++i)
    for (Index j = 0; j < expected.cols(); ++j)
      CHECK(got.values(i, j) == (expected.clean(i, j) ? 1.0 : 0.0));
  CHECK(fs::exists(out / "y_cellmask.csv"));
}

TEST_CASE("cv writes the score table and the selected cell") {
  OutDir out("cv");
  REQUIRE(run_cli("cv --method crtb-sparse --etas 0.3,0.5 --kx-grid 1 "
                  "--ky-grid 1 --folds 3 --x " +
                  data_file("toy_x.csv") + " --y " + data_file("toy_y.csv") +
                  " --out-dir " + out.str()) == 0);

  const Table table = read_table((out / "cv_table.csv").string());
  REQUIRE(table.names.size() == 6);
  CHECK(table.names[0] == "eta");
  CHECK(table.names[3] == "mean");
  CHECK(table.values.rows() == 2);  // two etas, one (kx, ky) cell

  nlohmann::json best;
  std::ifstream in(out / "cv_best.json");
  REQUIRE(in.good());
  in >> best;
  const double eta = best.at("eta").get<double>();
  CHECK((eta == 0.3 || eta == 0.5));
  CHECK(best.at("kx").get<long>() == 1);
  CHECK(best.at("ky").get<long>() == 1);
}

TEST_CASE("simulate runs a scenario file over its grid deterministically") {
  OutDir out("sim");
  const fs::path scenario = out / "scenario.json";
  {
    std::ofstream s(scenario);
    s << R"({
      "dgp": {"n": 30, "k": 1, "q": 2, "p_signal": 5, "p_noise": 2},
      "contamination": {"regime": "cellwise"},
      "methods": ["tb", "crtb"],
      "replicates": 2,
      "pcts": [0.0, 0.1]
    })";
  }

  const fs::path run1 = out / "run1";
  const fs::path run2 = out / "run2";
  REQUIRE(run_cli("simulate --scenario " + scenario.string() +
                  " --seed 11 --out-dir " + run1.string()) == 0);
  REQUIRE(run_cli("simulate --scenario " + scenario.string() +
                  " --seed 11 --out-dir " + run2.string()) == 0);

  for (const char* name : {"records_00.csv", "records_10.csv",
                           "summary_00.csv", "summary_10.csv",
                           "sweep_summary.csv"}) {
    REQUIRE(fs::exists(run1 / name));
    CHECK(read_file(run1 / name) == read_file(run2 / name));
  }

  // Two replicates x two methods per grid point, plus the header line.
  std::istringstream records(read_file(run1 / "records_10.csv"));
  std::string line;
  int lines = 0;
  while (std::getline(records, line))
    if (!line.empty()) ++lines;
  CHECK(lines == 5);
  const std::string header = read_file(run1 / "records_10.csv");
  CHECK(header.rfind("replicate,method,cell_pct,mse_b,", 0) == 0);

  const std::string sweep = read_file(run1 / "sweep_summary.csv");
  CHECK(sweep.rfind("method,pct,mse_mean,", 0) == 0);
}

TEST_CASE("fit fails cleanly on a missing input file") {
  OutDir out("missing");
  const int rc = run_cli("fit --x " + (out / "absent.csv").string() +
                         " --y " + data_file("toy_y.csv") + " --out-dir " +
                         out.str());
  CHECK(rc == 1);
  CHECK_FALSE(fs::exists(out / "model.json"));
  CHECK_FALSE(fs::exists(out / "fit_report.txt"));
}

TEST_CASE("fit reports a row count mismatch naming both sides") {
  OutDir out("mismatch");
  const Table y = read_table(data_file("toy_y.csv"));
  write_table((out / "y_short.csv").string(), y.names,
              y.values.topRows(19));

  const fs::path errfile = out / "stderr.txt";
  const int rc = run_cli_capture(
      "fit --x " + data_file("toy_x.csv") + " --y " +
          (out / "y_short.csv").string() + " --out-dir " + out.str(),
      errfile);
  CHECK(rc == 1);
  const std::string err = read_file(errfile);
  CHECK(err.find("20 rows") != std::string::npos);
  CHECK(err.find("19 rows") != std::string::npos);
}

TEST_CASE("simulate rejects ambiguous or unknown plans") {
  OutDir out("badplan");
  CHECK(run_cli("simulate --out-dir " + out.str()) == 1);
  CHECK(run_cli("simulate --preset nope --out-dir " + out.str()) == 1);
  const int rc = run_cli("fit --method pls --x " + data_file("toy_x.csv") +
                         " --y " + data_file("toy_y.csv"));
  CHECK(rc != 0);
}
