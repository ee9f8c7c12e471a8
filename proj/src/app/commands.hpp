#pragma once

// Command layer behind the C API: a JSON request in, a JSON report (plus an
// optional CSV table) and a verdict out.
//
// Request:  {"command", "seed", "threads", "system" | "family", "target",
//            "options", "points"}
// Report:   {"schema", "command", "tool_version", "seed", "inputs",
//            "results", "verdict"}
//
// The thread count is deliberately absent from reports so that they do not
// depend on it.

#include <json.hpp>
#include <string>
#include <vector>

namespace stabkit::app {

using json = nlohmann::json;

enum class Verdict { Pass, Fail, Inconclusive };

struct CommandOutput {
  json report;
  std::string csv;  // empty when the command produced no table
  Verdict verdict = Verdict::Pass;
};

const char* tool_version();
const std::vector<std::string>& command_names();

// Throws Error (ConfigError for malformed requests) on failure.
CommandOutput run_command(const json& request);

}  // namespace stabkit::app
