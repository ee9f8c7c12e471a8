#include "stabkit/stabkit.h"

#include <exception>
#include <new>
#include <string>
#include <vector>

#include "commands.hpp"
#include "config.hpp"
#include "degree.hpp"
#include "error.hpp"
#include "expr.hpp"
#include "field.hpp"
#include "flow.hpp"

struct sk_field {
  stabkit::Field field;
};

struct sk_report {
  std::string json;
  std::string csv;
  sk_verdict verdict = SK_VERDICT_PASS;
};

namespace {

thread_local std::string g_error;
thread_local std::string g_pointer;

void clear() {
  g_error.clear();
  g_pointer.clear();
}

sk_status fail(sk_status s, const std::string& msg) {
  g_error = msg;
  return s;
}

// Maps exceptions escaping the C++ core onto status codes.
template <class Fn>
sk_status guarded(Fn&& fn) {
  clear();
  try {
    fn();
    return SK_OK;
  } catch (const stabkit::app::ConfigError& e) {
    g_pointer = e.pointer();
    return fail(SK_ERR_CONFIG, e.what());
  } catch (const stabkit::Error& e) {
    return fail(static_cast<sk_status>(e.code()), e.what());
  } catch (const nlohmann::json::exception& e) {
    return fail(SK_ERR_CONFIG, std::string("malformed JSON: ") + e.what());
  } catch (const std::bad_alloc&) {
    return fail(SK_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(SK_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(SK_ERR_INTERNAL, "unknown failure");
  }
}

}  // namespace

extern "C" {

const char* sk_version(void) { return stabkit::app::tool_version(); }

const char* sk_status_name(int status) { return stabkit::error_code_name(static_cast<stabkit::ErrorCode>(status)); }

const char* sk_last_error(void) { return g_error.c_str(); }
const char* sk_last_error_pointer(void) { return g_pointer.c_str(); }

sk_status sk_field_parse(const char* const* components, size_t n, const char* const* param_names,
                         const double* param_values, size_t n_params, sk_field** out) {
  if (!out) return fail(SK_ERR_INVALID_ARGUMENT, "out is NULL");
  *out = nullptr;
  if (!components || n == 0) return fail(SK_ERR_INVALID_ARGUMENT, "need at least one component");
  if (n_params && (!param_names || !param_values)) return fail(SK_ERR_INVALID_ARGUMENT, "parameter arrays are NULL");
  return guarded([&] {
    std::vector<std::string> srcs;
    for (size_t i = 0; i < n; ++i) {
      if (!components[i]) throw stabkit::Error(stabkit::ErrorCode::InvalidArgument, "component is NULL");
      srcs.emplace_back(components[i]);
    }
    std::vector<std::string> names;
    stabkit::ParamMap values;
    for (size_t i = 0; i < n_params; ++i) {
      if (!param_names[i]) throw stabkit::Error(stabkit::ErrorCode::InvalidArgument, "parameter name is NULL");
      names.emplace_back(param_names[i]);
      values[param_names[i]] = param_values[i];
    }
    auto expr = stabkit::VectorExpr::parse(srcs, n, names);
    *out = new sk_field{stabkit::make_field(expr, values)};
  });
}

size_t sk_field_dim(const sk_field* field) { return field ? field->field.dim : 0; }

sk_status sk_field_eval(const sk_field* field, const double* x, double* out) {
  if (!field || !x || !out) return fail(SK_ERR_INVALID_ARGUMENT, "NULL argument");
  return guarded([&] {
    const size_t n = field->field.dim;
    field->field.eval({x, n}, {out, n});
  });
}

sk_status sk_field_jacobian(const sk_field* field, const double* x, double* out) {
  if (!field || !x || !out) return fail(SK_ERR_INVALID_ARGUMENT, "NULL argument");
  return guarded([&] {
    const size_t n = field->field.dim;
    field->field.jacobian({x, n}, {out, n * n});
  });
}

sk_status sk_field_flow(const sk_field* field, const double* x0, double t, double* out) {
  if (!field || !x0 || !out) return fail(SK_ERR_INVALID_ARGUMENT, "NULL argument");
  return guarded([&] {
    const size_t n = field->field.dim;
    stabkit::Vec y = stabkit::flow(field->field, {x0, n}, t, stabkit::IntegratorSpec{});
    std::copy(y.begin(), y.end(), out);
  });
}

sk_status sk_field_degree(const sk_field* field, const double* center, double radius, unsigned resolution,
                          long* value, double* raw) {
  if (!field || !center || !value) return fail(SK_ERR_INVALID_ARGUMENT, "NULL argument");
  return guarded([&] {
    auto d = stabkit::brouwer_degree(field->field, {center, field->field.dim}, radius, resolution);
    *value = d.value;
    if (raw) *raw = d.raw;
  });
}

void sk_field_free(sk_field* field) { delete field; }

sk_status sk_run_command(const char* request_json, sk_report** out) {
  if (!out) return fail(SK_ERR_INVALID_ARGUMENT, "out is NULL");
  *out = nullptr;
  if (!request_json) return fail(SK_ERR_INVALID_ARGUMENT, "request is NULL");
  return guarded([&] {
    auto request = nlohmann::json::parse(request_json);
    auto result = stabkit::app::run_command(request);
    auto* r = new sk_report;
    r->json = result.report.dump(2) + "\n";
    r->csv = std::move(result.csv);
    switch (result.verdict) {
      case stabkit::app::Verdict::Pass: r->verdict = SK_VERDICT_PASS; break;
      case stabkit::app::Verdict::Fail: r->verdict = SK_VERDICT_FAIL; break;
      case stabkit::app::Verdict::Inconclusive: r->verdict = SK_VERDICT_INCONCLUSIVE; break;
    }
    *out = r;
  });
}

const char* sk_report_json(const sk_report* report) { return report ? report->json.c_str() : ""; }
const char* sk_report_csv(const sk_report* report) { return report ? report->csv.c_str() : ""; }
sk_verdict sk_report_verdict(const sk_report* report) { return report ? report->verdict : SK_VERDICT_FAIL; }
void sk_report_free(sk_report* report) { delete report; }

}  // extern "C"
