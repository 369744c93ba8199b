#include "flatlab/app/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "flatlab/error.hpp"

namespace flatlab::app {

Check Check::at_most(std::string name, double value, double tol, std::string note) {
  return {std::move(name), value, tol, Relation::AtMost, value <= tol, std::move(note)};
}

Check Check::at_least(std::string name, double value, double bound, std::string note) {
  return {std::move(name), value, bound, Relation::AtLeast, value >= bound, std::move(note)};
}

Check Check::skipped(std::string name, std::string note) {
  return {std::move(name), 0.0, 0.0, Relation::Equal, true, std::move(note)};
}

std::string_view to_string(Check::Relation r) noexcept {
  switch (r) {
    case Check::Relation::AtMost: return "<=";
    case Check::Relation::AtLeast: return ">=";
    case Check::Relation::Equal: return "==";
  }
  return "?";
}

bool Report::pass() const {
  for (const Check& c : checks)
    if (!c.pass) return false;
  return true;
}

json report_to_json(const Report& r) {
  json checks = json::array();
  for (const Check& c : r.checks) {
    json j{{"name", c.name},
           {"value", c.value},
           {"tolerance", c.tolerance},
           {"relation", std::string(to_string(c.relation))},
           {"pass", c.pass}};
    if (!c.note.empty()) j["note"] = c.note;
    checks.push_back(std::move(j));
  }
  return json{{"command", r.command},
              {"version", r.version},
              {"config_hash", r.config_hash},
              {"config", r.config},
              {"checks", checks},
              {"values", r.values},
              {"pass", r.pass()},
              {"timings", {{"total_seconds", r.seconds}}}};
}

namespace {

std::string number(double v) {
  if (!std::isfinite(v)) return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string report_table(const Report& r) {
  std::string out = "name\tvalue\trelation\ttolerance\tpass\tnote\n";
  for (const Check& c : r.checks) {
    out += c.name + "\t" + number(c.value) + "\t" + std::string(to_string(c.relation)) + "\t" +
           number(c.tolerance) + "\t" + (c.pass ? "true" : "false") + "\t" + c.note + "\n";
  }
  return out;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoFailure, "cannot open '" + path + "' for writing");
  out << text;
  out.flush();
  if (!out) throw Error(ErrorKind::IoFailure, "write to '" + path + "' failed");
}

}  // namespace flatlab::app
