#pragma once

// Run configuration for the command-line front end. A config is a JSON
// document; parsing normalizes it (defaults filled in, keys sorted) and the
// normalized form is what gets echoed into reports and hashed.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "flatlab/algebra.hpp"
#include "flatlab/fields.hpp"
#include "flatlab/flatness.hpp"
#include "flatlab/variational.hpp"

namespace flatlab::app {

using nlohmann::json;

enum class Command { Curvature, Verify, Flatness, Deviation, Minimize, NormalMetric, Census };

std::string_view to_string(Command c) noexcept;
Command command_from_string(std::string_view s);

struct Tolerances {
  double identity = 1e-8;      // algebraic identities, relative to max(|R|, 1)
  double fd_identity = 1e-5;   // identities that need derivatives of R
  double flat = kFlatTolAnalytic;
  double oracle = 0.05;
  double expect = 1e-6;
  double prescription = 5e-4;
  double gray_ratio = 6.0;
};

struct RunConfig {
  Command command = Command::Curvature;
  std::uint64_t seed = 0;

  std::optional<FieldSpec> field;
  JetMethod jets = JetMethod::Analytic;
  FDConfig fd;
  std::optional<Point> point;

  std::optional<GridQuadrature> quad;
  std::optional<FunctionalId> functional;
  int oracle_bumps = 5;
  double oracle_eps = 1e-3;
  bool oracle_enabled = true;

  std::optional<FamilySpec> family;
  std::vector<double> theta0;
  MinimizeOptions minimize;

  int prescription_n = 2;
  double prescription_scale = 0.1;
  double gray_rho = 0.2;
  ChartBox prescription_box;

  std::vector<FlatnessSystem> census_systems;
  std::vector<int> census_dims;

  Tolerances tol;
  json expect = json::object();

  std::string report_path;
  std::string table_path;

  /// Normalized document: every key the command reads, defaults included.
  json normalized;
};

/// Validates and normalizes a config document. Keys the command does not
/// read are rejected with ConfigInvalid.
RunConfig parse_config(const json& doc);

/// FNV-1a (64-bit, hex) of the normalized config without its output paths.
std::string config_hash(const json& normalized);

/// Reads a JSON config file; IoFailure when unreadable, ConfigInvalid when
/// not valid JSON.
json load_config_file(const std::string& path);

/// Sets doc at the dotted path ("quad.cells") from a command-line value.
/// Values are read as JSON when they parse, as comma-separated lists when
/// they contain commas, and as strings otherwise.
void apply_override(json& doc, std::string_view dotted_path, std::string_view value);

FieldSpec field_from_json(const json& j, std::uint64_t default_seed = 0);
/// Inverse of field_from_json for the deterministic kinds; seeded kinds
/// (polynomial_spd, random_connection) are written as their seed and degree.
json field_to_json(const FieldSpec& spec);

}  // namespace flatlab::app
