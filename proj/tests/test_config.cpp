#include <doctest.h>

#include <string>

#include "switchctl/commands.hpp"
#include "switchctl/config.hpp"
#include "switchctl/error.hpp"
#include "switchctl/io.hpp"

using namespace switchctl;

namespace {

std::string line_config(const std::string& extra = "", const std::string& costs = "0.2",
                        const std::string& h2 = "0.5") {
  return R"({
  "schema_version": 1,
  "problem": {
    "domain": {"kind": "interval", "lower": 0, "upper": 1},
    "regimes": [
      {"diffusion": 1, "discount": 1, "running_cost": 1, "control_cost": 0.3},
      {"diffusion": 1, "discount": 1, "running_cost": )" +
         h2 + R"(, "control_cost": 0.3}
    ],
    "switching_costs": )" +
         costs + R"(
  },
  "grid": {"nodes": 41})" +
         extra + "\n}\n";
}

std::string error_of(const std::string& text) {
  try {
    parse_config(text, "test.json");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ConfigError);
    return e.what();
  }
  FAIL("expected ConfigError");
  return {};
}

bool has(const std::string& s, const std::string& part) { return s.find(part) != std::string::npos; }

}  // namespace

TEST_CASE("format_double and dump_json") {
  CHECK(format_double(0.1) == "0.10000000000000001");
  CHECK(format_double(-0.0) == "0");
  CHECK(format_double(2.0) == "2");
  nlohmann::json j = {{"b", 1.5}, {"a", {1.0, 2.0}}, {"c", std::nan("")}};
  CHECK(dump_json(j) == "{\n  \"a\": [1, 2],\n  \"b\": 1.5,\n  \"c\": null\n}\n");
}

TEST_CASE("minimal config fills defaults") {
  auto cfg = parse_config(line_config());
  CHECK(cfg.spec.regimes() == 2);
  CHECK(cfg.spec.costs()(0, 1) == 0.2);
  CHECK(cfg.nodes == std::vector<int>{41});
  CHECK(cfg.solver.epsilon == 0.1);
  CHECK(cfg.continuation.stop_threshold == 1e-4);
  CHECK(cfg.region_tolerance == doctest::Approx(1e-3));
  CHECK(cfg.simulation.paths == 1000);
  CHECK(cfg.regime0 == 0);
  CHECK(cfg.x0.size() == 1);
}

TEST_CASE("simulation block and one-based regimes") {
  auto cfg = parse_config(line_config(R"(,
  "simulation": {"dt": 1e-4, "paths": 50, "seed": 12, "x0": [0.25], "regime0": 2},
  "solver": {"method": "newton", "epsilon": 0.05},
  "output": "somewhere")"));
  CHECK(cfg.regime0 == 1);
  CHECK(cfg.x0(0) == 0.25);
  CHECK(cfg.simulation.seed == 12);
  CHECK(cfg.solver.method == NpdsMethod::Newton);
  CHECK(cfg.solver.epsilon == 0.05);
  CHECK(cfg.output == "somewhere");
}

TEST_CASE("switching cost matrix and diffusion forms") {
  auto cfg = parse_config(line_config("", "[[null, 0.3], [0.1, null]]"));
  CHECK(cfg.spec.costs()(0, 1) == 0.3);
  CHECK(cfg.spec.costs()(1, 0) == 0.1);

  auto disk = parse_config(R"({
  "schema_version": 1,
  "problem": {
    "domain": {"kind": "disk", "center": [0, 0], "radius": 1},
    "regimes": [{"diffusion": {"diagonal": [1, {"kind": "affine", "value": 2, "slope": [0.5, 0]}]},
                 "drift": [0.1, 0], "discount": 1, "running_cost": {"kind": "cosine_bump", "value": 0.2,
                 "amplitude": 1, "center": [0, 0], "width": 0.5}, "control_cost": 1}],
    "switching_costs": 1
  },
  "grid": {"nodes": [21, 21]}
})");
  CHECK(disk.spec.dim() == 2);
  const auto& r = disk.spec.regime(0);
  CHECK(r.diffusion_at(make_point({0.4, 0.0}))(1, 1) == doctest::Approx(2.2));
  CHECK(r.running_cost(make_point({0, 0})) == doctest::Approx(1.2));
}

TEST_CASE("unknown keys name their JSON pointer") {
  auto msg = error_of(line_config(R"(,
  "solver": {"epsilom": 0.1})"));
  CHECK(has(msg, "test.json"));
  CHECK(has(msg, "/solver/epsilom"));
}

TEST_CASE("malformed JSON names the line") {
  auto msg = error_of("{\n  \"schema_version\": 1,\n  \"problem\": ,\n}\n");
  CHECK(has(msg, "line 3"));
}

TEST_CASE("wrong types and bad values") {
  CHECK(has(error_of(line_config(R"(,
  "simulation": {"paths": "many"})")), "/simulation/paths"));
  CHECK(has(error_of(line_config(R"(,
  "solver": {"method": "gauss"})")), "/solver/method"));
  error_of(line_config(R"(,
  "simulation": {"regime0": 3})"));
  error_of(R"({"schema_version": 1})");
}

TEST_CASE("run_command validate on a zero-cost loop") {
  auto cfg = parse_config(line_config("", "0"));
  auto res = run_command("validate", cfg);
  CHECK(res.exit_code == kExitCheckFailed);
  const auto& report = res.artifacts.at("validation.json");
  CHECK(has(report, "ZeroCostLoop"));
  CHECK(has(report, "[1, 2, 1]"));
  CHECK(run_command("solve", cfg).exit_code == kExitCheckFailed);
}

TEST_CASE("run_command solve with zero running cost") {
  auto text = line_config("", "0.2", "0");
  text.replace(text.find("\"running_cost\": 1"), 17, "\"running_cost\": 0");
  auto res = run_command("solve", parse_config(text));
  CHECK(res.exit_code == kExitPass);
  const auto& csv = res.artifacts.at("field.csv");
  size_t rows = 0;
  size_t pos = csv.find('\n') + 1;
  while (pos < csv.size()) {
    const size_t end = csv.find('\n', pos);
    const std::string row = csv.substr(pos, end - pos);
    CHECK(row.substr(row.rfind(',') + 1) == "0");
    ++rows;
    pos = end + 1;
  }
  CHECK(rows == 82);
}

TEST_CASE("artifacts are byte-stable") {
  auto cfg = parse_config(line_config(R"(,
  "simulation": {"dt": 1e-3, "paths": 200, "seed": 5, "x0": [0.5]})"));
  for (const char* sub : {"solve", "limits", "regions"}) {
    auto a = run_command(sub, cfg);
    auto b = run_command(sub, cfg);
    CHECK(a.artifacts == b.artifacts);
    CHECK(a.exit_code == kExitPass);
  }
  auto a = run_command("simulate", cfg);
  auto b = run_command("simulate", cfg);
  CHECK(a.artifacts == b.artifacts);
  cfg.simulation.seed = 6;
  auto c = run_command("simulate", cfg);
  CHECK(a.artifacts.at("estimate.json") != c.artifacts.at("estimate.json"));
  CHECK(has(a.artifacts.at("estimate.json"), "\"schema_version\": 1"));
}

TEST_CASE("unknown subcommand") {
  CHECK_THROWS(run_command("plot", parse_config(line_config())));
}
