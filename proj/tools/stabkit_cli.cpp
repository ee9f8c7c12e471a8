// Command-line front end. Everything numerical happens behind the C API; this
// file only turns flags and files into a JSON request and writes the report.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "stabkit/stabkit.h"

namespace {

using json = nlohmann::json;

constexpr int kExitError = 1;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

json read_json(const std::string& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw UsageError(path + ": invalid JSON: " + e.what());
  }
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write " + path);
  out << text;
}

std::vector<double> parse_list(const std::string& text, const std::string& flag) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError(flag + ": expected comma-separated numbers, got '" + text + "'");
    }
  }
  return out;
}

// Points file: one point per line, comma separated; a first line that does
// not parse as numbers is taken as a header.
json read_points(const std::string& path) {
  std::istringstream in(read_file(path));
  std::string line;
  json pts = json::array();
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      pts.push_back(parse_list(line, path));
    } catch (const UsageError&) {
      if (!first) throw;
    }
    first = false;
  }
  return pts;
}

// Flags shared by every subcommand plus the request they populate.
struct Invocation {
  std::string command;
  std::optional<std::string> system, family, target, out, csv;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::vector<std::string> sets;
  json options = json::object();
  json points;
};

// Generic escape hatch: --set key=value, value parsed as JSON when possible.
void apply_sets(Invocation& inv) {
  for (const auto& s : inv.sets) {
    auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("--set expects key=value, got '" + s + "'");
    std::string key = s.substr(0, eq), value = s.substr(eq + 1);
    json parsed = json::parse(value, nullptr, false);
    inv.options[key] = parsed.is_discarded() ? json(value) : parsed;
  }
}

template <class T>
void put(json& options, const char* key, const std::optional<T>& v) {
  if (v) options[key] = *v;
}

int run(Invocation& inv) {
  apply_sets(inv);
  json request{{"command", inv.command}, {"seed", inv.seed}, {"threads", inv.threads}, {"options", inv.options}};
  if (inv.system) request["system"] = read_json(*inv.system);
  if (inv.target) request["target"] = read_json(*inv.target);
  if (inv.family) request["family"] = read_json(*inv.family);
  if (!inv.points.is_null()) request["points"] = inv.points;

  sk_report* report = nullptr;
  sk_status st = sk_run_command(request.dump().c_str(), &report);
  if (st != SK_OK) {
    std::cerr << "error: " << sk_status_name(st) << ": " << sk_last_error() << "\n";
    return kExitError;
  }
  std::string text = sk_report_json(report);
  std::string table = sk_report_csv(report);
  int verdict = sk_report_verdict(report);
  sk_report_free(report);

  if (inv.out)
    write_file(*inv.out, text);
  else
    std::cout << text;
  if (inv.csv) {
    if (table.empty()) std::cerr << "warning: this run produced no table for " << *inv.csv << "\n";
    write_file(*inv.csv, table);
  }
  return verdict;
}

CLI::App* add_command(CLI::App& app, Invocation& inv, const std::string& name, const std::string& help) {
  CLI::App* sub = app.add_subcommand(name, help);
  sub->add_option("--out", inv.out, "Write the JSON report here instead of stdout");
  sub->add_option("--seed", inv.seed, "Seed for every sampled quantity")->capture_default_str();
  sub->add_option("--threads", inv.threads, "Worker threads (results do not depend on it)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sub->add_option("--set", inv.sets, "Extra command option as key=value (JSON value)");
  sub->callback([&inv, name] { inv.command = name; });
  return sub;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Numerical evidence for global asymptotic stability of vector fields"};
  app.set_version_flag("--version", std::string(sk_version()));
  app.require_subcommand(1);
  Invocation inv;

  // Flag values land in optionals and are forwarded only when given, so the
  // library defaults stay authoritative.
  std::optional<std::size_t> samples, t_points, trace_points, grid_n, resolution, rays;
  std::optional<double> tol, horizon, box, radius, r_in, r_out, level, phi;
  std::optional<std::string> kind, center, grid_lo, grid_hi, local_t, eval_file, t_set;
  bool certificate = false, verify = false, check = false;

  auto* gas = add_command(app, inv, "check-gas", "Sample trajectories for evidence of global asymptotic stability");
  gas->add_option("--system", inv.system, "System config (JSON)")->required();
  gas->add_option("--samples", samples, "Number of sampled initial conditions");
  gas->add_option("--horizon", horizon, "Integration time per trajectory");
  gas->add_option("--tol", tol, "Convergence tolerance on the final distance");
  gas->add_option("--box", box, "Half-width of the sampling box around the equilibrium");
  gas->add_flag("--certificate", certificate, "Also build and verify a Massera Lyapunov certificate");

  auto* lyap = add_command(app, inv, "lyapunov", "Build a Lyapunov function and verify a sampled certificate");
  lyap->add_option("--system", inv.system, "System config (JSON)")->required();
  lyap->add_option("--samples", samples, "Certificate samples");
  lyap->add_option("--horizon", horizon, "Massera integration horizon");
  lyap->add_option("--r-in", r_in, "Inner radius of the sampled annulus");
  lyap->add_option("--r-out", r_out, "Outer radius of the sampled annulus");
  lyap->add_option("--grid", inv.csv, "Write V and its orbital derivative on a grid to this CSV");
  lyap->add_option("--grid-lo", grid_lo, "Grid lower corner, comma separated");
  lyap->add_option("--grid-hi", grid_hi, "Grid upper corner, comma separated");
  lyap->add_option("--grid-n", grid_n, "Grid points per axis");

  auto* homo = add_command(app, inv, "homotopy", "Construct a homotopy of fields and optionally verify it");
  homo->add_option("--kind", kind, "to-gradient|complete|sontag|alexander|continuation|translate|appendix-morse|"
                                   "appendix-hyp|straight-line");
  homo->add_option("--system,--from", inv.system, "Starting system config (JSON)")->required();
  homo->add_option("--to", inv.target, "Target system config for two-system kinds");
  homo->add_flag("--verify", verify, "Attach admissibility and endpoint checks");
  homo->add_option("--trace", inv.csv, "Write H_t on a (t, x) grid to this CSV");
  homo->add_option("--trace-points", trace_points, "Spatial sample points in the trace");
  homo->add_option("--samples", samples, "Admissibility samples per time");
  homo->add_option("--t-points", t_points, "Number of times in [0, 1]");
  homo->add_option("--tol", tol, "Endpoint tolerance");
  homo->add_option("--phi", phi, "Weight for the complete rescaling");

  CLI::App* lin = add_command(app, inv, "linearize", "Conjugate the flow to x' = -x through a level-set chart");
  CLI::App* morse = add_command(app, inv, "morse", "Map a potential to |y|^2 through a level-set chart");
  for (CLI::App* sub : {lin, morse}) {
    sub->add_option("--system", inv.system, "System config (JSON)")->required();
    sub->add_flag("--check", check, "Attach residual statistics");
    sub->add_option("--eval", eval_file, "CSV of points to map through h");
    sub->add_option("--csv", inv.csv, "Write the mapped points to this CSV");
    sub->add_option("--samples", samples, "Residual samples");
    sub->add_option("--tol", tol, "Residual tolerance for the verdict");
    sub->add_option("--level", level, "Level of the chart");
    sub->add_option("--rays", rays, "Rays in the star-shapedness test");
  }
  lin->add_option("--horizon", horizon, "Massera horizon when no chart function is configured");
  lin->add_option("--t-set", t_set, "Times for the conjugacy residual, comma separated");

  auto* deg = add_command(app, inv, "degree", "Brouwer degree of F/|F| on a sphere (n <= 3)");
  deg->add_option("--system", inv.system, "System config (JSON)")->required();
  deg->add_option("--radius", radius, "Sphere radius");
  deg->add_option("--center", center, "Sphere center, comma separated");
  deg->add_option("--resolution", resolution, "Mesh refinement level");

  auto* obs = add_command(app, inv, "obstruct", "Winding-number obstruction for a circle family of planar fields");
  obs->add_option("--family", inv.family, "Family config (JSON) with a probe curve")->required();
  obs->add_option("--resolution", resolution, "Loop refinement level");

  auto* fam = add_command(app, inv, "family-check", "Search for trajectories that fail to approach a curve of equilibria");
  fam->add_option("--family", inv.family, "Family config (JSON) with the curve of equilibria")->required();
  fam->add_option("--samples", samples, "Sampled starts near the curve");
  fam->add_option("--tol", tol, "Distance to the curve counted as attracted");
  fam->add_option("--box", box, "Largest offset from the curve");
  fam->add_option("--horizon", horizon, "Minimum integration time");
  fam->add_option("--local-t", local_t, "Parameters for frozen local checks, comma separated");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitError;
  }

  try {
    json& o = inv.options;
    put(o, "samples", samples);
    put(o, "t_points", t_points);
    put(o, "trace_points", trace_points);
    put(o, "grid_n", grid_n);
    put(o, "resolution", resolution);
    put(o, "rays", rays);
    put(o, "tol", tol);
    put(o, "horizon", horizon);
    put(o, "box", box);
    put(o, "radius", radius);
    put(o, "r_in", r_in);
    put(o, "r_out", r_out);
    put(o, "level", level);
    put(o, "phi", phi);
    put(o, "kind", kind);
    if (center) o["center"] = parse_list(*center, "--center");
    if (grid_lo) o["grid_lo"] = parse_list(*grid_lo, "--grid-lo");
    if (grid_hi) o["grid_hi"] = parse_list(*grid_hi, "--grid-hi");
    if (local_t) o["local_t"] = parse_list(*local_t, "--local-t");
    if (t_set) o["t_set"] = parse_list(*t_set, "--t-set");
    if (certificate) o["certificate"] = true;
    if (verify) o["verify"] = true;
    if (check) o["check"] = true;
    if (inv.command == "lyapunov" && inv.csv && !grid_n) o["grid_n"] = 21;
    if (inv.command == "homotopy" && inv.csv && !trace_points) o["trace_points"] = 20;
    if (eval_file) inv.points = read_points(*eval_file);
    return run(inv);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
}
