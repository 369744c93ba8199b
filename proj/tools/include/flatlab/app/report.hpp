#pragma once

#include <string>
#include <vector>

#include "json.hpp"

namespace flatlab::app {

using nlohmann::json;

struct Check {
  enum class Relation { AtMost, AtLeast, Equal };

  std::string name;
  double value = 0.0;
  double tolerance = 0.0;
  Relation relation = Relation::AtMost;
  bool pass = false;
  std::string note;

  static Check at_most(std::string name, double value, double tol, std::string note = {});
  static Check at_least(std::string name, double value, double bound, std::string note = {});
  /// Passes trivially; used for rows that do not apply to the field.
  static Check skipped(std::string name, std::string note);
};

std::string_view to_string(Check::Relation r) noexcept;

struct Report {
  std::string command;
  std::string version;
  std::string config_hash;
  json config = json::object();
  std::vector<Check> checks;
  json values = json::object();
  double seconds = 0.0;

  bool pass() const;
};

/// Keys sort alphabetically; everything except "timings" is a function of
/// the config alone.
json report_to_json(const Report& r);
/// Tab-separated, header row then one row per check, values printed with
/// round-trip precision.
std::string report_table(const Report& r);

/// Throws IoFailure.
void write_text_file(const std::string& path, const std::string& text);

}  // namespace flatlab::app
