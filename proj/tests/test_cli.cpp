#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "evmirror/config_io.hpp"
#include "test_helpers.hpp"

namespace fs = std::filesystem;
using namespace evmirror;

namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + EVMIRROR_CLI_PATH + "\" " + args +
                          " >/dev/null 2>/dev/null";
  const int rc = std::system(cmd.c_str());
  REQUIRE(rc != -1);
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Value of a "key = value" line in a small text report.
double report_value(const std::string& text, const std::string& key) {
  const std::string needle = key + " = ";
  const auto pos = text.find(needle);
  REQUIRE(pos != std::string::npos);
  return std::stod(text.substr(pos + needle.size()));
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) : path(fs::temp_directory_path() / tag) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str(const std::string& sub = "") const { return (path / sub).string(); }
};

std::string reference_config_path() {
  return (fs::path(EVMIRROR_CONFIG_DIR) / "fig3_59ms.conf").string();
}

// The reference run shrunk to a quick smoke-test size.
std::string write_small_config(const TempDir& dir) {
  SimulationConfig cfg = testutil::make_reference_config();
  cfg.ensemble.n_atoms = 2000;
  const std::string path = dir.str("small.conf");
  save_config(cfg, path);
  return path;
}

}  // namespace

TEST_CASE("validate subcommand", "[cli]") {
  CHECK(run_cli("validate --config " + reference_config_path()) == 0);
  CHECK(run_cli("validate --config /nonexistent/nowhere.conf") == 3);

  TempDir dir("evm_cli_validate");
  std::ofstream bad(dir.str("bad.conf"));
  bad << "eta = not_a_number\n";
  bad.close();
  CHECK(run_cli("validate --config " + dir.str("bad.conf")) == 3);
}

TEST_CASE("usage errors exit with code 2", "[cli]") {
  CHECK(run_cli("") == 2);
  CHECK(run_cli("frobnicate") == 2);
  CHECK(run_cli("simulate") == 2);  // --config is required
  TempDir dir("evm_cli_usage");
  const std::string cfg = write_small_config(dir);
  CHECK(run_cli("infer missing.pgm --config " + cfg + " --candidates 19.5") == 2);
}

TEST_CASE("simulate writes images, profiles and a manifest", "[cli]") {
  TempDir dir("evm_cli_sim");
  const std::string cfg = write_small_config(dir);
  const std::string out = dir.str("out");
  REQUIRE(run_cli("simulate --config " + cfg + " --tof 29 --dump-ensemble --out-dir " + out) ==
          0);

  const std::string manifest = slurp(fs::path(out) / "manifest.txt");
  for (const char* name : {"sim_tof29ms.pgm", "sim_tof29ms.txt", "profile_tof29ms.csv",
                           "ensemble_tof29ms.csv"}) {
    CHECK(fs::exists(fs::path(out) / name));
    CHECK(manifest.find(name) != std::string::npos);
  }
  CHECK(fs::file_size(fs::path(out) / "sim_tof29ms.pgm") > 512u * 512u * 2u);
  CHECK(slurp(fs::path(out) / "profile_tof29ms.csv").rfind("z_m,value\n", 0) == 0);
  CHECK(slurp(fs::path(out) / "ensemble_tof29ms.csv").rfind("x,y,z,vx,vy,vz,is_condensed\n", 0) ==
        0);
  CHECK(manifest.find("subcommand = simulate") != std::string::npos);
  // the manifest snapshot must itself be a loadable config
  CHECK(manifest.find("lambda_L_m = ") != std::string::npos);

  SECTION("a composite image can be superimposed over several flight times") {
    const std::string out2 = dir.str("out2");
    REQUIRE(run_cli("simulate --config " + cfg + " --tof 29,34 --superimpose --out-dir " + out2) ==
            0);
    CHECK(fs::exists(fs::path(out2) / "sim_tof29ms.pgm"));
    CHECK(fs::exists(fs::path(out2) / "sim_tof34ms.pgm"));
    CHECK(fs::exists(fs::path(out2) / "sim_composite.pgm"));
  }
}

TEST_CASE("simulate output is independent of the thread count", "[cli]") {
  TempDir dir("evm_cli_threads");
  const std::string cfg = write_small_config(dir);
  REQUIRE(run_cli("simulate --config " + cfg + " --tof 29 --threads 1 --out-dir " +
                  dir.str("t1")) == 0);
  REQUIRE(run_cli("simulate --config " + cfg + " --tof 29 --threads 3 --out-dir " +
                  dir.str("t3")) == 0);
  CHECK(slurp(dir.path / "t1" / "sim_tof29ms.pgm") == slurp(dir.path / "t3" / "sim_tof29ms.pgm"));
  CHECK(slurp(dir.path / "t1" / "profile_tof29ms.csv") ==
        slurp(dir.path / "t3" / "profile_tof29ms.csv"));
}

TEST_CASE("theory subcommand tabulates chi", "[cli]") {
  TempDir dir("evm_cli_theory");

  SECTION("benchmark point with the bound chain") {
    REQUIRE(run_cli("theory --benchmark-point --out-dir " + dir.str("bench")) == 0);
    const std::string csv = slurp(dir.path / "bench" / "theory_chi.csv");
    REQUIRE(csv.rfind("alpha,eta,chi,status\n", 0) == 0);
    // single data row: alpha,eta,chi,ok
    const auto line_end = csv.find('\n', csv.find('\n') + 1);
    const std::string row = csv.substr(csv.find('\n') + 1, line_end - csv.find('\n') - 1);
    CHECK(row.find(",ok") != std::string::npos);
    const auto c1 = row.find(',');
    const auto c2 = row.find(',', c1 + 1);
    const double chi = std::stod(row.substr(c2 + 1));
    CHECK(chi == Catch::Approx(2.1239585683341375).epsilon(1e-9));

    const std::string bounds = slurp(dir.path / "bench" / "theory_bounds.txt");
    CHECK(report_value(bounds, "lambda_dB_nm") == Catch::Approx(17.2759).epsilon(1e-4));
    CHECK(report_value(bounds, "sigma_vx_bound_over_v_rec") ==
          Catch::Approx(8.036).epsilon(1e-2));
  }

  SECTION("a grid row that cannot be computed is reported in place") {
    REQUIRE(run_cli("theory --alpha-grid 4 --eta-grid 0.5,1 --out-dir " + dir.str("grid")) == 0);
    const std::string csv = slurp(dir.path / "grid" / "theory_chi.csv");
    CHECK(csv.find(",ok") != std::string::npos);
    CHECK(csv.find(",error:") != std::string::npos);
  }

  SECTION("malformed grids are usage errors") {
    CHECK(run_cli("theory --alpha-grid 5:-1:2 --eta-grid 1.66 --out-dir " + dir.str("bad")) == 2);
    CHECK(run_cli("theory --out-dir " + dir.str("empty")) == 2);
  }
}

TEST_CASE("infer recovers sigma_vy from a simulated reference image", "[cli]") {
  TempDir dir("evm_cli_infer");
  const std::string cfg = write_small_config(dir);
  const std::string out = dir.str("ref");
  REQUIRE(run_cli("simulate --config " + cfg + " --tof 29 --out-dir " + out) == 0);
  const std::string ref = (fs::path(out) / "sim_tof29ms.pgm").string();

  // Same seed as the reference run: the true candidate reproduces it exactly.
  REQUIRE(run_cli("infer " + ref + " --config " + cfg +
                  " --candidates 0,19.5,39 --out-dir " + dir.str("scan")) == 0);
  const std::string summary = slurp(dir.path / "scan" / "infer_summary.txt");
  CHECK(report_value(summary, "best_sigma_vy_m_s") == Catch::Approx(19.5e-3).epsilon(1e-12));
  CHECK(report_value(summary, "chi") == Catch::Approx(2.0).epsilon(1e-12));
  CHECK(report_value(summary, "bracket_band_factor") == Catch::Approx(1.5));
  const std::string csv = slurp(dir.path / "scan" / "infer_report.csv");
  CHECK(csv.rfind("sigma_vy_m_s,residual\n", 0) == 0);

  SECTION("a corrupted reference image is an I/O error") {
    std::ofstream garbage(dir.str("garbage.pgm"), std::ios::binary);
    garbage << "not a pgm";
    garbage.close();
    CHECK(run_cli("infer " + dir.str("garbage.pgm") + " --config " + cfg +
                  " --candidates 0,19.5 --out-dir " + dir.str("g")) == 4);
  }
}
