#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"

namespace {

namespace fs = std::filesystem;

struct CliResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

CliResult run_cli(const std::string& args) {
  const fs::path base = fs::temp_directory_path() / "zoomctl_cli_test";
  fs::create_directories(base);
  const fs::path out_path = base / "stdout.txt";
  const fs::path err_path = base / "stderr.txt";
  const std::string cmd = std::string(ZOOMCTL_CLI_PATH) + " " + args + " > " +
                          out_path.string() + " 2> " + err_path.string();
  const int status = std::system(cmd.c_str());
  CliResult result;
  result.exit_code = WEXITSTATUS(status);
  const auto slurp = [](const fs::path& p) {
    std::ifstream f(p);
    std::ostringstream buf;
    buf << f.rdbuf();
    return buf.str();
  };
  result.out = slurp(out_path);
  result.err = slurp(err_path);
  return result;
}

fs::path write_scenario(const std::string& name, const std::string& body) {
  const fs::path base = fs::temp_directory_path() / "zoomctl_cli_test";
  fs::create_directories(base);
  const fs::path path = base / name;
  std::ofstream f(path);
  f << body;
  return path;
}

}  // namespace

TEST_CASE("CLI exit codes") {
  SUBCASE("missing required field exits 2 with the JSON pointer") {
    const fs::path sc = write_scenario("missing_b.json", R"json({
      "system": {"A": [[2.0]], "sensors": [{"C": [[1.0]]}]}
    })json");
    const CliResult r = run_cli("check --scenario " + sc.string());
    CHECK(r.exit_code == 2);
    CHECK(r.err.find("/system/B") != std::string::npos);
    CHECK(r.err.find("\"error\"") != std::string::npos);
  }

  SUBCASE("structural failures exit 3") {
    const fs::path sc = write_scenario("unobservable.json", R"json({
      "system": {
        "A": [[2.0, 0.0], [0.0, 2.0]],
        "B": [[1.0, 0.0], [0.0, 1.0]],
        "sensors": [{"C": [[1.0, 0.0]]}]
      },
      "run": {"horizon": 10, "trials": 1, "seed": 1}
    })json");
    const CliResult r = run_cli("simulate --scenario " + sc.string());
    CHECK(r.exit_code == 3);
    CHECK(r.err.find("structural") != std::string::npos);
  }

  SUBCASE("mixed spectra exit 3") {
    const fs::path sc = write_scenario("mixed.json", R"json({
      "system": {
        "A": [[2.0, 0.0], [0.0, 0.5]],
        "B": [[1.0, 0.0], [0.0, 1.0]],
        "sensors": [{"C": [[1.0, 0.0], [0.0, 1.0]]}]
      },
      "run": {"horizon": 10, "trials": 1, "seed": 1}
    })json");
    const CliResult r = run_cli("simulate --scenario " + sc.string());
    CHECK(r.exit_code == 3);
  }

  SUBCASE("unwritable output path exits 4") {
    const fs::path sc = write_scenario("ok.json", R"json({
      "system": {"A": [[2.0]], "B": [[1.0]], "sensors": [{"C": [[1.0]]}]},
      "run": {"horizon": 5, "trials": 1, "seed": 1}
    })json");
    const CliResult r = run_cli("simulate --scenario " + sc.string() +
                                " --out /proc/definitely/not/writable");
    CHECK(r.exit_code == 4);
  }

  SUBCASE("well-formed run exits 0") {
    const fs::path sc = write_scenario("ok2.json", R"json({
      "system": {"A": [[2.0]], "B": [[1.0]], "sensors": [{"C": [[1.0]]}]},
      "run": {"horizon": 5, "trials": 2, "seed": 9}
    })json");
    const CliResult r = run_cli("simulate --scenario " + sc.string());
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("\"aborted_trials\": 0") != std::string::npos);
  }
}

TEST_CASE("CLI lattice scenario runs end to end") {
  // Zoom parameters chosen so the log2 lattice snap is feasible for the
  // sampled magnitude 4: grow -> 2^3, shrink -> 2^-1.
  const fs::path sc = write_scenario("lattice.json", R"json({
    "system": {"A": [[2.0]], "B": [[1.0]], "sensors": [{"C": [[1.0]]}]},
    "zoom": {"rho": 1.95, "epsilon": 4.2, "eta": 0.2},
    "lattice": {"enabled": true, "ell": 1.0},
    "run": {"horizon": 50, "trials": 2, "seed": 4}
  })json");
  const CliResult r = run_cli("simulate --scenario " + sc.string());
  CHECK(r.exit_code == 0);
}
