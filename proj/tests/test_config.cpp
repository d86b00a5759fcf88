#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "sdnes/config.hpp"

using Catch::Matchers::WithinAbs;
namespace fs = std::filesystem;

namespace {

const fs::path kExamples = SDNES_EXAMPLES_DIR;

sdnes::json base_config() {
  return sdnes::json::parse(R"({
    "game": {
      "n_players": 2,
      "costs": [
        {"A": [[3,1],[1,5]], "b": [4,2], "c": 0},
        {"A": [[7,2],[2,4]], "b": [1,6], "c": 0}
      ],
      "tuning": [
        {"a": 0.1, "k": 0.06, "q": 0.1, "dither": "sat"},
        {"a": 0.12, "k": 0.05, "q": 0.07, "dither": "sin"}
      ]
    },
    "deceivers": [{"player": 2, "targets": [1], "eps": 0.001, "j_ref": -2}],
    "ou": {"theta": 0.0005, "theta_bar": [1.0, 0.8]},
    "dynamics": {"dt": 2e-05, "T": 400.0, "stride": 5000}
  })");
}

}  // namespace

TEST_CASE("shipped example config parses") {
  const auto sc = sdnes::parse_scenario_file(kExamples / "sec5.json");
  CHECK(sc.game.num_players() == 2);
  CHECK(sc.game.cost_params(0).A(1, 1) == 5.0);
  CHECK(sc.game.tuning(0).dither.kind() == sdnes::DitherKind::Saturation);
  CHECK(sc.game.tuning(1).dither.kind() == sdnes::DitherKind::Sine);
  CHECK(sc.game.tuning(1).a == 0.12);
  REQUIRE(sc.ds() != nullptr);
  // file indices are 1-based; internally player 2 is index 1
  CHECK(sc.ds()->deceiver(0).player == 1);
  CHECK(sc.ds()->deceiver(0).targets == std::vector<int>{0});
  CHECK(sc.ds()->deceiver(0).j_ref == -2.0);
  CHECK(sc.ou.theta == 0.0005);
  CHECK_THAT(sc.ou.theta_i(1), WithinAbs(0.0004, 1e-18));
  CHECK(sc.dynamics.dt == 2e-5);
  CHECK(sc.dynamics.horizon == 400.0);
  CHECK(sc.dynamics.stride == 5000);
  REQUIRE(sc.experiment.has_value());
  CHECK(sc.experiment->seeds.size() == 20);
  CHECK(sc.experiment->min_success == 0.8);
}

TEST_CASE("other shipped configs parse") {
  const auto sweep = sdnes::parse_scenario_file(kExamples / "sec5_sweep.json");
  REQUIRE(sweep.experiment.has_value());
  CHECK(sweep.experiment->theta_sweep ==
        std::vector<double>{0.005, 0.0005, 5e-05});
  const auto nominal = sdnes::parse_scenario_file(kExamples / "nominal.json");
  CHECK(nominal.ds() == nullptr);
}

TEST_CASE("unknown fields are rejected at every level") {
  for (const char* patch : {"/bogus", "/game/bogus", "/dynamics/bogus",
                            "/ou/bogus", "/deceivers/0/bogus"}) {
    auto cfg = base_config();
    cfg[sdnes::json::json_pointer(patch)] = 1;
    INFO("field " << patch);
    CHECK_THROWS_AS(sdnes::parse_scenario_json(cfg, "."), sdnes::ParseError);
  }
}

TEST_CASE("missing and malformed fields are rejected") {
  for (const char* key : {"game", "ou", "dynamics"}) {
    auto cfg = base_config();
    cfg.erase(key);
    CHECK_THROWS_AS(sdnes::parse_scenario_json(cfg, "."), sdnes::ParseError);
  }
  auto cfg = base_config();
  cfg["game"]["tuning"][0]["dither"] = "square";
  CHECK_THROWS_AS(sdnes::parse_scenario_json(cfg, "."), sdnes::ParseError);
  cfg = base_config();
  cfg["dynamics"]["dt"] = -1.0;
  CHECK_THROWS_AS(sdnes::parse_scenario_json(cfg, "."), sdnes::ParseError);
  cfg = base_config();
  cfg["dynamics"]["stride"] = 0;
  CHECK_THROWS_AS(sdnes::parse_scenario_json(cfg, "."), sdnes::ParseError);
  cfg = base_config();
  cfg["ou"]["theta_bar"] = {1.0, 0.8, 0.5};
  CHECK_THROWS_AS(sdnes::parse_scenario_json(cfg, "."), sdnes::ParseError);
  cfg = base_config();
  cfg["dynamics"]["u0"] = {0.0};
  CHECK_THROWS_AS(sdnes::parse_scenario_json(cfg, "."), sdnes::ParseError);
  cfg = base_config();
  cfg["deceivers"][0]["targets"] = {2};  // the deceiver itself
  CHECK_THROWS_AS(sdnes::parse_scenario_json(cfg, "."), sdnes::ParseError);
}

TEST_CASE("flat row-major matrices parse like nested rows") {
  auto cfg = base_config();
  cfg["game"]["costs"][0]["A"] = {3, 1, 1, 5};
  const auto sc = sdnes::parse_scenario_json(cfg, ".");
  const auto ref = sdnes::parse_scenario_json(base_config(), ".");
  CHECK(sc.game.cost_params(0).A == ref.game.cost_params(0).A);

  cfg["game"]["costs"][0]["A"] = {3, 1, 1};
  CHECK_THROWS_AS(sdnes::parse_scenario_json(cfg, "."), sdnes::ParseError);
}

TEST_CASE("game may live in a separate file") {
  const fs::path dir = fs::temp_directory_path() / "sdnes_cfg_test";
  fs::create_directories(dir);
  auto cfg = base_config();
  {
    std::ofstream out(dir / "game.json");
    out << cfg["game"].dump();
  }
  cfg["game"] = "game.json";
  {
    std::ofstream out(dir / "scenario.json");
    out << cfg.dump();
  }
  const auto sc = sdnes::parse_scenario_file(dir / "scenario.json");
  CHECK(sc.game.cost_params(1).b(1) == 6.0);

  cfg["game"] = "missing.json";
  {
    std::ofstream out(dir / "scenario.json");
    out << cfg.dump();
  }
  CHECK_THROWS_AS(sdnes::parse_scenario_file(dir / "scenario.json"),
                  sdnes::ParseError);
}

TEST_CASE("initial state overrides flow through") {
  auto cfg = base_config();
  cfg["dynamics"]["u0"] = {0.5, -0.5};
  cfg["dynamics"]["delta0"] = {0.1};
  cfg["dynamics"]["eta0"] = {0.0, 0.0};
  const auto sc = sdnes::parse_scenario_json(cfg, ".");
  REQUIRE(sc.dynamics.u0.has_value());
  CHECK((*sc.dynamics.u0)(1) == -0.5);
  REQUIRE(sc.dynamics.delta0.has_value());
  CHECK((*sc.dynamics.delta0)(0) == 0.1);
  const auto tmpl = sc.initial_state_template();
  CHECK(tmpl.u == *sc.dynamics.u0);
  CHECK(tmpl.delta == *sc.dynamics.delta0);
}

TEST_CASE("canonical serialization round-trips") {
  const auto sc = sdnes::parse_scenario_file(kExamples / "sec5.json");
  const sdnes::json dumped = sc.to_json();
  // 1-based indices on the way out
  CHECK(dumped["deceivers"][0]["player"] == 2);
  CHECK(dumped["deceivers"][0]["targets"][0] == 1);
  const auto re = sdnes::parse_scenario_json(dumped, ".");
  CHECK(re.to_json().dump() == dumped.dump());
  CHECK(re.game.cost_params(0).A == sc.game.cost_params(0).A);
  CHECK(re.dynamics.dt == sc.dynamics.dt);
}

TEST_CASE("invalid json reports a parse error") {
  const fs::path dir = fs::temp_directory_path() / "sdnes_cfg_test";
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "broken.json");
    out << "{ not json";
  }
  CHECK_THROWS_AS(sdnes::parse_scenario_file(dir / "broken.json"),
                  sdnes::ParseError);
  CHECK_THROWS_AS(sdnes::parse_scenario_file(dir / "does_not_exist.json"),
                  sdnes::ParseError);
}
