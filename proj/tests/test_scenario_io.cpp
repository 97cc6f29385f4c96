#include <string>
#include <span>

#include "doctest.h"
#include "zoomctl/closed_loop.hpp"
#include "zoomctl/report_io.hpp"
#include "zoomctl/scenario.hpp"

using namespace zoomctl;

namespace {

const char* kScalarScenario = R"json({
  "name": "scalar",
  "system": {
    "A": [[2.0]],
    "B": [[1.0]],
    "sensors": [{"C": [[1.0]], "sigma_v": [[1.0]]}],
    "sigma_w": [[1.0]],
    "x0": {"mean": [0.0], "sigma": [[1.0]]}
  },
  "zoom": {"rho": 1.5, "epsilon": 0.5, "eta": 0.25, "delta": 0.5, "c": 1.0},
  "run": {"horizon": 50, "trials": 4, "seed": 7, "mode": "single"}
})json";

}  // namespace

TEST_CASE("scenario parsing") {
  SUBCASE("well-formed document") {
    const Scenario sc = Scenario::from_json_text(kScalarScenario);
    CHECK(sc.name == "scalar");
    CHECK(sc.system.n() == 1);
    CHECK(sc.loop.horizon == 50);
    CHECK(sc.trials == 4);
    CHECK(sc.seed == 7);
    CHECK_FALSE(sc.loop.multi_sensor);
    CHECK(sc.loop.zoom.rho == 1.5);
  }

  SUBCASE("missing required field names its JSON pointer") {
    const std::string broken = R"json({
      "system": {"A": [[2.0]], "sensors": [{"C": [[1.0]]}]}
    })json";
    try {
      Scenario::from_json_text(broken);
      FAIL("expected a validation error");
    } catch (const ConfigError& err) {
      CHECK(std::string(err.what()).find("/system/B") != std::string::npos);
    }
  }

  SUBCASE("dimension inconsistencies are validation errors") {
    const std::string bad = R"json({
      "system": {
        "A": [[2.0, 0.0], [0.0, 3.0]],
        "B": [[1.0]],
        "sensors": [{"C": [[1.0, 0.0]]}]
      }
    })json";
    CHECK_THROWS_AS(Scenario::from_json_text(bad), ConfigError);
  }

  SUBCASE("64-bit seeds survive both spellings") {
    const std::string doc = R"json({
      "system": {"A": [[2.0]], "B": [[1.0]], "sensors": [{"C": [[1.0]]}]},
      "run": {"seed": 18446744073709551615}
    })json";
    CHECK(Scenario::from_json_text(doc).seed == 18446744073709551615ull);
    const std::string doc_str = R"json({
      "system": {"A": [[2.0]], "B": [[1.0]], "sensors": [{"C": [[1.0]]}]},
      "run": {"seed": "18446744073709551615"}
    })json";
    CHECK(Scenario::from_json_text(doc_str).seed == 18446744073709551615ull);
  }

  SUBCASE("bad enum values are rejected") {
    const std::string doc = R"json({
      "system": {"A": [[2.0]], "B": [[1.0]], "sensors": [{"C": [[1.0]]}]},
      "run": {"mode": "duplex"}
    })json";
    CHECK_THROWS_AS(Scenario::from_json_text(doc), ConfigError);
  }

  SUBCASE("resolved parameters round-trip") {
    const Scenario sc = Scenario::from_json_text(kScalarScenario);
    const Scenario back = Scenario::from_json_text(sc.resolved_json());
    CHECK(back.seed == sc.seed);
    CHECK(back.trials == sc.trials);
    CHECK(back.loop.horizon == sc.loop.horizon);
    CHECK(back.loop.zoom.epsilon == sc.loop.zoom.epsilon);
    CHECK((back.system.A - sc.system.A).norm() == 0.0);
    CHECK(back.resolved_json() == sc.resolved_json());
  }
}

TEST_CASE("run record emission") {
  const Scenario sc = Scenario::from_json_text(kScalarScenario);
  LoopConfig cfg = sc.loop;
  cfg.horizon = 3;

  SUBCASE("three-step run gives three JSONL records with the full schema") {
    const RunReport rep = run_trial(sc.system, cfg, sc.seed);
    const std::string jsonl = run_records_jsonl(std::span<const RunReport>(&rep, 1));
    int lines = 0;
    for (char ch : jsonl) {
      if (ch == '\n') ++lines;
    }
    CHECK(lines == 3);
    CHECK(jsonl.find("\"s\":0") != std::string::npos);
    CHECK(jsonl.find("\"x\"") != std::string::npos);
    CHECK(jsonl.find("\"delta\"") != std::string::npos);
    CHECK(jsonl.find("\"q\"") != std::string::npos);
    CHECK(jsonl.find("\"b\"") != std::string::npos);
    CHECK(jsonl.find("\"zoomed\"") != std::string::npos);
  }

  SUBCASE("empty report list gives a header-only CSV") {
    const std::string csv = run_records_csv({});
    CHECK(csv == "trial,s,q,b,zoomed\n");
  }

  SUBCASE("CSV rows match the step count") {
    const RunReport rep = run_trial(sc.system, cfg, sc.seed);
    const std::string csv = run_records_csv(std::span<const RunReport>(&rep, 1));
    int lines = 0;
    for (char ch : csv) {
      if (ch == '\n') ++lines;
    }
    CHECK(lines == 4);  // header + 3 steps
    CHECK(csv.rfind("trial,s,x0,delta0,q,b,zoomed\n", 0) == 0);
  }
}
