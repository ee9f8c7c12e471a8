#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "commands.hpp"
#include "config.hpp"

using namespace stabkit;
using namespace stabkit::app;

namespace {

std::string pointer_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const ConfigError& e) {
    return e.pointer();
  }
  return "<no error>";
}

json lin2d() { return json::parse(R"j({"schema": 1, "dimension": 2, "field": ["-x1", "-x2"]})j"); }

json rot_family() {
  return json::parse(R"j({"schema": 1, "dimension": 2, "parameter": "theta",
    "family": ["cos(theta)*x1 - sin(theta)*x2", "sin(theta)*x1 + cos(theta)*x2"],
    "probe": ["cos(theta)", "sin(theta)"]})j");
}

json with(json j, const std::string& ptr, json value) {
  j[json::json_pointer(ptr)] = std::move(value);
  return j;
}

json without(json j, const std::string& key) {
  j.erase(key);
  return j;
}

}  // namespace

TEST_CASE("system configs parse into fields and potentials") {
  SystemConfig s = parse_system(lin2d());
  CHECK(s.dim == 2);
  CHECK_FALSE(s.is_potential());
  Vec x{1.0, -2.0};
  CHECK(s.flow_field()(x) == Vec{-1.0, 2.0});
  CHECK(norm(s.equilibrium()) == doctest::Approx(0.0));

  SystemConfig p = parse_system(json::parse(
      R"j({"schema": 1, "dimension": 2, "params": {"c": 3}, "potential": "c*(x1-1)^2 + x2^2"})j"));
  CHECK(p.is_potential());
  Vec y = p.flow_field()(Vec{2.0, 1.0});
  CHECK(y[0] == doctest::Approx(-6.0));
  CHECK(y[1] == doctest::Approx(-2.0));
  Vec m = p.equilibrium();
  CHECK(m[0] == doctest::Approx(1.0));
  CHECK(m[1] == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("system config errors carry the JSON pointer of the bad member") {
  CHECK(pointer_of([] { parse_system(without(lin2d(), "schema")); }) == "/schema");
  CHECK(pointer_of([] { parse_system(with(lin2d(), "/schema", 2)); }) == "/schema");
  CHECK(pointer_of([] { parse_system(with(lin2d(), "/colour", "red")); }) == "/colour");
  CHECK(pointer_of([] { parse_system(without(lin2d(), "dimension")); }) == "/dimension");
  CHECK(pointer_of([] { parse_system(with(lin2d(), "/dimension", -1)); }) == "/dimension");
  CHECK(pointer_of([] { parse_system(with(lin2d(), "/dimension", 3)); }) == "/field");
  CHECK(pointer_of([] { parse_system(with(lin2d(), "/field/1", "x2 +")); }) == "/field/1");
  CHECK(pointer_of([] { parse_system(with(lin2d(), "/field/0", "y")); }) == "/field/0");
  CHECK(pointer_of([] { parse_system(with(lin2d(), "/potential", "x1^2")); }) == "");
  CHECK(pointer_of([] { parse_system(without(lin2d(), "field")); }) == "");
  CHECK(pointer_of([] { parse_system(with(lin2d(), "/equilibrium_guess", json::array({0.0}))); }) ==
        "/equilibrium_guess");
  CHECK(pointer_of([] { parse_system(with(lin2d(), "/integrator/rel_tol", "tight")); }) == "/integrator/rel_tol");
  CHECK(pointer_of([] { parse_system(with(lin2d(), "/integrator/order", 5)); }) == "/integrator/order");
  CHECK(pointer_of([] {
          parse_system(with(lin2d(), "/sample_box", json::parse(R"j({"lo": [0, 0], "hi": [1, 0]})j")));
        }) == "/sample_box/hi/1");
  CHECK(pointer_of([] { parse_system(with(lin2d(), "/params/a", "one")); }) == "/params/a");

  // the pointer is prefixed inside a request
  CHECK(pointer_of([] {
          run_command({{"command", "degree"}, {"system", with(lin2d(), "/field/1", 7)}});
        }) == "/system/field/1");
}

TEST_CASE("family configs and their errors") {
  FamilyConfig f = parse_family(rot_family());
  CHECK(f.parameter == "theta");
  Vec g = f.probe_fn()(0.5);
  CHECK(g[0] == doctest::Approx(std::cos(0.5)));
  CHECK(g[1] == doctest::Approx(std::sin(0.5)));
  Vec v = f.member(std::numbers::pi / 2)(Vec{1.0, 0.0});
  CHECK(v[0] == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(v[1] == doctest::Approx(1.0));

  CHECK(pointer_of([] { parse_family(without(rot_family(), "family")); }) == "/family");
  CHECK(pointer_of([] { parse_family(with(rot_family(), "/params/theta", 1)); }) == "/params/theta");
  CHECK(pointer_of([] { parse_family(with(rot_family(), "/parameter", "2t")); }) == "/parameter");
  CHECK(pointer_of([] { parse_family(with(rot_family(), "/probe/1", "sin(")); }) == "/probe/1");
  CHECK(pointer_of([] { parse_family(with(rot_family(), "/parameter_range", json::array({1, 0}))); }) ==
        "/parameter_range");
}

TEST_CASE("request errors name the offending member") {
  CHECK(pointer_of([] { run_command(json::array()); }) == "");
  CHECK(pointer_of([] { run_command({{"system", lin2d()}}); }) == "/command");
  CHECK(pointer_of([] { run_command({{"command", "prove-everything"}}); }) == "/command");
  CHECK(pointer_of([] { run_command({{"command", "degree"}, {"system", lin2d()}, {"extra", 1}}); }) == "/extra");
  CHECK(pointer_of([] { run_command({{"command", "degree"}, {"system", lin2d()}, {"seed", -3}}); }) == "/seed");
  CHECK(pointer_of([] { run_command({{"command", "degree"}, {"system", lin2d()}, {"threads", 0}}); }) ==
        "/threads");
  CHECK(pointer_of([] {
          run_command({{"command", "degree"}, {"system", lin2d()}, {"options", {{"radious", 2}}}});
        }) == "/options/radious");
  CHECK(pointer_of([] {
          run_command({{"command", "degree"}, {"system", lin2d()}, {"options", {{"radius", "big"}}}});
        }) == "/options/radius");
  CHECK(pointer_of([] { run_command({{"command", "degree"}}); }) == "/system");
  CHECK(pointer_of([] { run_command({{"command", "obstruct"}, {"system", lin2d()}}); }) == "/family");
}

TEST_CASE("reports have the documented shape and echo their inputs") {
  CommandOutput out = run_command({{"command", "degree"}, {"seed", 11}, {"system", lin2d()}});
  const json& r = out.report;
  CHECK(r.at("schema") == 1);
  CHECK(r.at("command") == "degree");
  CHECK(r.at("tool_version") == tool_version());
  CHECK(r.at("seed") == 11);
  CHECK(r.at("inputs").at("system") == lin2d());
  CHECK(r.at("inputs").at("options").at("radius") == 1.0);
  CHECK(r.at("results").at("value") == 1);
  CHECK(r.at("verdict") == "pass");
  CHECK_FALSE(r.contains("threads"));
  CHECK(out.verdict == Verdict::Pass);

  // re-running from the echoed inputs reproduces the report
  json again{{"command", r.at("command")}, {"seed", r.at("seed")}, {"options", r.at("inputs").at("options")}};
  again["system"] = r.at("inputs").at("system");
  CHECK(run_command(again).report.dump() == r.dump());
}

TEST_CASE("command verdicts map onto pass, fail and inconclusive") {
  CHECK(run_command({{"command", "obstruct"}, {"family", rot_family()}}).verdict == Verdict::Fail);

  json center = json::parse(R"j({"schema": 1, "dimension": 2, "field": ["x2", "-x1"]})j");
  CommandOutput gas = run_command(
      {{"command", "check-gas"}, {"system", center}, {"options", {{"samples", 10}, {"horizon", 50}}}});
  CHECK(gas.verdict == Verdict::Fail);
  CHECK(gas.report.at("results").at("verdict") == "falsified");

  json cubic = json::parse(R"j({"schema": 1, "dimension": 1, "field": ["-x1^3"]})j");
  CommandOutput slow = run_command({{"command", "check-gas"}, {"system", cubic}, {"options", {{"samples", 10}}}});
  CHECK(slow.verdict == Verdict::Inconclusive);
}

TEST_CASE("CSV tables accompany grid and point evaluations") {
  CommandOutput lyap = run_command({{"command", "lyapunov"},
                                    {"system", lin2d()},
                                    {"options", {{"samples", 50}, {"identity_samples", 10}, {"grid_n", 3}}}});
  std::istringstream in(lyap.csv);
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line)) lines.push_back(line);
  REQUIRE(lines.size() == 10);
  CHECK(lines[0] == "x1,x2,V,dV");

  CommandOutput lin = run_command({{"command", "linearize"},
                                   {"system", lin2d()},
                                   {"points", json::parse("[[0.5, 0.0], [0.0, -2.0]]")}});
  CHECK(lin.csv.rfind("x1,x2,h1,h2", 0) == 0);
  const json& mapped = lin.report.at("results").at("mapped");
  REQUIRE(mapped.size() == 2);
}

TEST_CASE("reports do not depend on the thread count") {
  json remark = json::parse(R"j({"schema": 1, "dimension": 1, "parameter": "t", "family": ["t^4*x1 - x1^3"],
    "equilibria": ["t^2"], "integrator": {"max_time": 1e6}})j");
  std::vector<json> requests{
      {{"command", "check-gas"}, {"seed", 5}, {"system", lin2d()}, {"options", {{"samples", 40}}}},
      {{"command", "family-check"}, {"seed", 5}, {"family", remark}, {"options", {{"samples", 40}}}},
      {{"command", "degree"}, {"system", json::parse(R"j({"schema": 1, "dimension": 3,
         "field": ["-x1", "-x2", "-x3"]})j")}},
  };
  for (json req : requests) {
    CAPTURE(req.at("command"));
    req["threads"] = 1;
    std::string one = run_command(req).report.dump();
    req["threads"] = 8;
    std::string eight = run_command(req).report.dump();
    CHECK(one == eight);
    CHECK(run_command(req).report.dump() == eight);
  }
}

TEST_CASE("every example config in the docs parses") {
  std::size_t systems = 0, families = 0;
  for (const auto& entry : std::filesystem::directory_iterator(STABKIT_DOCS_CONFIGS)) {
    if (entry.path().extension() != ".json") continue;
    CAPTURE(entry.path().string());
    std::ifstream in(entry.path());
    json j = json::parse(in);
    if (j.contains("family")) {
      CHECK_NOTHROW(parse_family(j));
      ++families;
    } else {
      CHECK_NOTHROW(parse_system(j));
      ++systems;
    }
  }
  CHECK(systems >= 5);
  CHECK(families >= 3);
}
