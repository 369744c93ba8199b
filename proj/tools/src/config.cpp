#include "flatlab/app/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "flatlab/error.hpp"

namespace flatlab::app {

std::string_view to_string(Command c) noexcept {
  switch (c) {
    case Command::Curvature: return "curvature";
    case Command::Verify: return "verify";
    case Command::Flatness: return "flatness";
    case Command::Deviation: return "deviation";
    case Command::Minimize: return "minimize";
    case Command::NormalMetric: return "normal-metric";
    case Command::Census: return "census";
  }
  return "?";
}

Command command_from_string(std::string_view s) {
  for (auto c : {Command::Curvature, Command::Verify, Command::Flatness, Command::Deviation,
                 Command::Minimize, Command::NormalMetric, Command::Census})
    if (to_string(c) == s) return c;
  throw Error(ErrorKind::ConfigInvalid, "unknown command '" + std::string(s) + "'");
}

namespace {

[[noreturn]] void invalid(const std::string& path, const std::string& what) {
  throw Error(ErrorKind::ConfigInvalid, (path.empty() ? "config" : path) + ": " + what);
}

template <class T>
struct is_vector : std::false_type {};
template <class T>
struct is_vector<std::vector<T>> : std::true_type {};

// Reads one JSON object, copying every key it touches (or the default it
// substitutes) into a normalized output object. finish() rejects the rest.
class Reader {
 public:
  Reader(const json& in, json& out, std::string path) : in_(in), out_(out), path_(std::move(path)) {
    if (!in_.is_object()) invalid(path_, "expected an object");
    out_ = json::object();
  }

  bool has(const std::string& key) const { return in_.contains(key); }

  template <class T>
  T get(const std::string& key, const T& fallback) {
    if (!has(key)) {
      out_[key] = fallback;
      return fallback;
    }
    return require<T>(key);
  }

  template <class T>
  T require(const std::string& key) {
    if (!has(key)) invalid(sub(key), "required");
    used_.insert(key);
    T v;
    try {
      const json& j = in_.at(key);
      // A lone scalar stands for a one-element list ("--census.dims 7").
      if constexpr (is_vector<T>::value)
        v = j.is_array() ? j.get<T>() : T{j.get<typename T::value_type>()};
      else
        v = j.get<T>();
    } catch (const json::exception&) {
      invalid(sub(key), "wrong type");
    }
    out_[key] = v;
    return v;
  }

  /// A number that must be finite and positive.
  double positive(const std::string& key, double fallback) {
    const double v = get<double>(key, fallback);
    if (!(v > 0.0) || !std::isfinite(v)) invalid(sub(key), "must be positive");
    return v;
  }

  const json& raw(const std::string& key) {
    if (!has(key)) invalid(sub(key), "required");
    used_.insert(key);
    out_[key] = in_.at(key);
    return in_.at(key);
  }

  /// Child reader; the normalized child lands under the same key.
  Reader child(const std::string& key) {
    used_.insert(key);
    static const json kEmpty = json::object();
    return Reader(has(key) ? in_.at(key) : kEmpty, out_[key], sub(key));
  }

  void put(const std::string& key, json v) { out_[key] = std::move(v); }

  void finish() const {
    for (const auto& [k, v] : in_.items())
      if (!used_.count(k)) invalid(sub(k), "unknown key");
  }

  std::string sub(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  const std::string& path() const { return path_; }

 private:
  const json& in_;
  json& out_;
  std::string path_;
  std::set<std::string> used_;
};

std::vector<double> numbers(const json& j, const std::string& path) {
  if (!j.is_array()) invalid(path, "expected an array of numbers");
  std::vector<double> v;
  for (const json& e : j) {
    if (!e.is_number()) invalid(path, "expected an array of numbers");
    v.push_back(e.get<double>());
  }
  return v;
}

Matrix2 matrix_from(const json& j, int n, const std::string& path) {
  if (!j.is_array() || static_cast<int>(j.size()) != n)
    invalid(path, "expected " + std::to_string(n) + " rows");
  Matrix2 m(n);
  for (int i = 0; i < n; ++i) {
    const std::vector<double> row = numbers(j[static_cast<std::size_t>(i)], path);
    if (static_cast<int>(row.size()) != n) invalid(path, "row length must be " + std::to_string(n));
    for (int k = 0; k < n; ++k) m(i, k) = row[static_cast<std::size_t>(k)];
  }
  return m;
}

json matrix_to(const Matrix2& m) {
  json rows = json::array();
  for (int i = 0; i < m.dim(); ++i) {
    json row = json::array();
    for (int k = 0; k < m.dim(); ++k) row.push_back(m(i, k));
    rows.push_back(row);
  }
  return rows;
}

template <class TT>
TT flat_from(const json& j, int n, const std::string& path) {
  TT t(n);
  const std::vector<double> v = numbers(j, path);
  if (v.size() != t.size()) invalid(path, "expected " + std::to_string(t.size()) + " entries");
  std::copy(v.begin(), v.end(), t.flat().begin());
  return t;
}

template <class TT>
json flat_to(const TT& t) {
  json a = json::array();
  for (double v : t.flat()) a.push_back(v);
  return a;
}

ChartBox read_box(Reader r, std::optional<int> n_hint) {
  const std::vector<double> lo = numbers(r.raw("lower"), r.sub("lower"));
  const std::vector<double> hi = numbers(r.raw("upper"), r.sub("upper"));
  const int n = static_cast<int>(lo.size());
  if (n < 1 || n > kMaxDim) invalid(r.sub("lower"), "dimension must be 1.." + std::to_string(kMaxDim));
  if (n_hint && *n_hint != n) invalid(r.sub("lower"), "dimension mismatch");
  const std::vector<int> grid = r.get<std::vector<int>>("grid", std::vector<int>(lo.size(), 8));
  ChartBox b;
  try {
    b = ChartBox::make(lo, hi, grid);
  } catch (const Error& e) {
    invalid(r.path(), e.what());
  }
  r.finish();
  return b;
}

json box_to(const ChartBox& b) {
  return json{{"lower", b.lower}, {"upper", b.upper}, {"grid", b.grid}};
}

ScalarProfile read_profile(Reader r, int arg_dim) {
  ScalarProfile p;
  p.kind = ScalarProfile::kind_from_string(r.require<std::string>("kind"));
  p.coeffs = r.require<std::vector<double>>("coeffs");
  r.finish();
  p.validate(arg_dim);
  return p;
}

json profile_to(const ScalarProfile& p) {
  return json{{"kind", std::string(ScalarProfile::to_string(p.kind))}, {"coeffs", p.coeffs}};
}

std::vector<Expression> expressions(const json& j, std::size_t count, int n,
                                    const std::string& path) {
  if (!j.is_array() || j.size() != count)
    invalid(path, "expected " + std::to_string(count) + " expressions");
  std::vector<Expression> out;
  for (const json& e : j) {
    if (!e.is_string()) invalid(path, "expressions must be strings");
    try {
      out.push_back(Expression::parse(e.get<std::string>(), n));
    } catch (const Error& err) {
      invalid(path, err.what());
    }
  }
  return out;
}

FieldSpec read_field(Reader r, std::uint64_t default_seed) {
  const std::string kind = r.require<std::string>("kind");
  const ChartBox box = read_box(r.child("box"), std::nullopt);
  const int n = box.n;
  const auto seed = r.get<std::uint64_t>("seed", default_seed);
  FieldSpec s{box, seed, {}};
  const auto nn = static_cast<std::size_t>(n);

  if (kind == "euclidean") {
    s.params = field::EuclideanConstant{
        r.has("c") ? matrix_from(r.raw("c"), n, r.sub("c")) : Matrix2::identity(n)};
    if (!r.has("c")) r.put("c", matrix_to(Matrix2::identity(n)));
  } else if (kind == "conformal") {
    const Matrix2 c = r.has("c") ? matrix_from(r.raw("c"), n, r.sub("c")) : Matrix2::identity(n);
    if (!r.has("c")) r.put("c", matrix_to(c));
    s.params = field::Conformal{c, read_profile(r.child("profile"), n)};
  } else if (kind == "sphere") {
    s.params = field::RoundSphere{r.positive("radius", 1.0)};
    if (n < 2) invalid(r.sub("box"), "a sphere needs n >= 2");
  } else if (kind == "polynomial_spd") {
    const int degree = r.get<int>("degree", 1);
    try {
      s = random_spd_metric(seed, degree, box);
    } catch (const Error& e) {
      invalid(r.sub("degree"), e.what());
    }
  } else if (kind == "soliton") {
    field::Soliton p;
    p.c = r.has("c") ? matrix_from(r.raw("c"), n, r.sub("c")) : Matrix2::identity(n);
    if (!r.has("c")) r.put("c", matrix_to(p.c));
    p.d = matrix_from(r.raw("d"), n, r.sub("d"));
    p.direction = numbers(r.raw("direction"), r.sub("direction"));
    if (p.direction.size() != nn) invalid(r.sub("direction"), "length must be n");
    p.profile = read_profile(r.child("profile"), 1);
    s.params = std::move(p);
  } else if (kind == "quadratic") {
    field::QuadraticMetric p{matrix_from(r.raw("base"), n, r.sub("base")),
                             flat_from<Array4>(r.raw("q"), n, r.sub("q"))};
    s.params = std::move(p);
  } else if (kind == "tabulated_connection") {
    s.params = field::TabulatedConnection{flat_from<Tensor3>(r.raw("c"), n, r.sub("c"))};
  } else if (kind == "soliton_connection") {
    s.params = field::SolitonConnection{flat_from<Tensor3>(r.raw("c"), n, r.sub("c")),
                                        r.get<double>("shift", 1.0)};
  } else if (kind == "random_connection") {
    const int degree = r.get<int>("degree", 1);
    const double amp = r.get<double>("amplitude", 0.5);
    try {
      s = random_connection(seed, degree, box, amp);
    } catch (const Error& e) {
      invalid(r.sub("degree"), e.what());
    }
  } else if (kind == "custom") {
    field::Custom p;
    p.connection = r.get<bool>("connection", false);
    p.components = expressions(r.raw("components"), p.connection ? nn * nn * nn : nn * nn, n,
                               r.sub("components"));
    s.params = std::move(p);
  } else {
    invalid(r.sub("kind"), "unknown field kind '" + kind + "'");
  }
  r.finish();
  return s;
}

// Sections each command reads; everything else is rejected.
struct Needs {
  bool field = false, jets = false, point = false, quad = false, functional = false,
       oracle = false, family = false, normal = false, census = false;
  std::vector<std::string> tolerances;
  std::vector<std::string> expect;
};

Needs needs_for(Command c) {
  Needs n;
  switch (c) {
    case Command::Curvature:
      n.field = n.jets = n.point = true;
      n.tolerances = {"identity", "expect"};
      n.expect = {"scalar"};
      break;
    case Command::Verify:
      n.field = n.jets = true;
      n.tolerances = {"identity", "fd_identity"};
      break;
    case Command::Flatness:
      n.field = n.jets = true;
      n.tolerances = {"flat", "expect"};
      n.expect = {"connection_flat", "curvature_flat", "ricci_flat", "scalar_flat", "scalar"};
      break;
    case Command::Deviation:
      n.field = n.jets = n.quad = n.functional = n.oracle = true;
      n.tolerances = {"oracle"};
      break;
    case Command::Minimize:
      n.field = n.quad = n.functional = n.family = true;
      n.expect = {"functional_below", "theta_norm_below"};
      break;
    case Command::NormalMetric:
      n.jets = n.normal = true;
      n.tolerances = {"prescription", "gray_ratio"};
      break;
    case Command::Census:
      n.census = true;
      break;
  }
  return n;
}

}  // namespace

FieldSpec field_from_json(const json& j, std::uint64_t default_seed) {
  json out;
  return read_field(Reader(j, out, "field"), default_seed);
}

json field_to_json(const FieldSpec& s) {
  json j{{"box", box_to(s.box)}, {"seed", s.seed}};
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, field::EuclideanConstant>) {
          j["kind"] = "euclidean";
          j["c"] = matrix_to(p.c);
        } else if constexpr (std::is_same_v<T, field::Conformal>) {
          j["kind"] = "conformal";
          j["c"] = matrix_to(p.c);
          j["profile"] = profile_to(p.profile);
        } else if constexpr (std::is_same_v<T, field::RoundSphere>) {
          j["kind"] = "sphere";
          j["radius"] = p.radius;
        } else if constexpr (std::is_same_v<T, field::PolynomialSpd>) {
          j["kind"] = "polynomial_spd";
          j["degree"] = p.degree;
        } else if constexpr (std::is_same_v<T, field::Soliton>) {
          j["kind"] = "soliton";
          j["c"] = matrix_to(p.c);
          j["d"] = matrix_to(p.d);
          j["direction"] = p.direction;
          j["profile"] = profile_to(p.profile);
        } else if constexpr (std::is_same_v<T, field::QuadraticMetric>) {
          j["kind"] = "quadratic";
          j["base"] = matrix_to(p.base);
          j["q"] = flat_to(p.q);
        } else if constexpr (std::is_same_v<T, field::TabulatedConnection>) {
          j["kind"] = "tabulated_connection";
          j["c"] = flat_to(p.c);
        } else if constexpr (std::is_same_v<T, field::SolitonConnection>) {
          j["kind"] = "soliton_connection";
          j["c"] = flat_to(p.c);
          j["shift"] = p.shift;
        } else if constexpr (std::is_same_v<T, field::RandomConnection>) {
          j["kind"] = "random_connection";
          j["degree"] = p.degree;
        } else if constexpr (std::is_same_v<T, field::Custom>) {
          j["kind"] = "custom";
          j["connection"] = p.connection;
          json comps = json::array();
          for (const Expression& e : p.components) comps.push_back(e.source());
          j["components"] = comps;
        }
      },
      s.params);
  return j;
}

RunConfig parse_config(const json& doc) {
  RunConfig cfg;
  Reader top(doc, cfg.normalized, "");
  cfg.command = command_from_string(top.require<std::string>("command"));
  cfg.seed = top.get<std::uint64_t>("seed", 0);
  const Needs need = needs_for(cfg.command);

  {
    Reader out = top.child("output");
    cfg.report_path = out.get<std::string>("report", "");
    cfg.table_path = out.get<std::string>("table", "");
    out.finish();
  }

  if (need.field) cfg.field = read_field(top.child("field"), cfg.seed);

  if (need.jets) {
    const std::string m = top.get<std::string>("jets", "analytic");
    if (m == "analytic")
      cfg.jets = JetMethod::Analytic;
    else if (m == "fd")
      cfg.jets = JetMethod::FiniteDifference;
    else
      invalid("jets", "expected 'analytic' or 'fd'");
    cfg.tol.flat = cfg.jets == JetMethod::Analytic ? kFlatTolAnalytic : kFlatTolFD;
  }

  if (need.normal) {
    Reader r = top.child("normal_metric");
    cfg.prescription_n = r.get<int>("n", 2);
    if (cfg.prescription_n < 2 || cfg.prescription_n > kMaxDim)
      invalid("normal_metric.n", "must be 2.." + std::to_string(kMaxDim));
    cfg.prescription_scale = r.positive("scale", 0.1);
    cfg.gray_rho = r.positive("rho", 0.2);
    if (r.has("box")) {
      cfg.prescription_box = read_box(r.child("box"), cfg.prescription_n);
    } else {
      cfg.prescription_box = ChartBox::cube(cfg.prescription_n, -0.5, 0.5, 8);
      r.put("box", box_to(cfg.prescription_box));
    }
    r.finish();
  }

  const ChartBox* box = cfg.field ? &cfg.field->box
                        : need.normal ? &cfg.prescription_box
                                      : nullptr;
  if (need.jets && box) {
    const FDConfig def = FDConfig::defaults(*box);
    Reader r = top.child("fd");
    cfg.fd = FDConfig{r.positive("h1", def.h1), r.positive("h2", def.h2)};
    r.finish();
    try {
      cfg.fd.validate(*box);
    } catch (const Error& e) {
      invalid("fd", e.what());
    }
  } else if (box) {
    cfg.fd = FDConfig::defaults(*box);
  }

  if (need.point) {
    if (top.has("point")) {
      cfg.point = top.require<std::vector<double>>("point");
      if (static_cast<int>(cfg.point->size()) != cfg.field->dim())
        invalid("point", "length must match the field dimension");
    } else {
      cfg.point = cfg.field->box.center();
      top.put("point", *cfg.point);
    }
  }

  if (need.functional) {
    try {
      cfg.functional = FunctionalId::parse(top.require<std::string>("functional"));
    } catch (const Error& e) {
      invalid("functional", e.what());
    }
  }

  if (need.quad) {
    Reader r = top.child("quad");
    const ChartBox& b = cfg.field->box;
    std::vector<int> cells = b.grid;
    if (r.has("cells")) {
      const json& c = r.raw("cells");
      if (c.is_number_integer())
        cells.assign(static_cast<std::size_t>(b.n), c.get<int>());
      else
        try {
          cells = c.get<std::vector<int>>();
        } catch (const json::exception&) {
          invalid("quad.cells", "expected an integer or one integer per axis");
        }
      r.put("cells", cells);
    } else {
      r.put("cells", cells);
    }
    if (static_cast<int>(cells.size()) != b.n) invalid("quad.cells", "one entry per axis");
    int need_margin = 0;
    for (int a = 0; a < b.n; ++a) {
      if (cells[static_cast<std::size_t>(a)] < 1) invalid("quad.cells", "must be positive");
      need_margin = std::max(
          need_margin,
          static_cast<int>(std::ceil(2.0 * cfg.fd.h2 / (b.extent(a) / cells[static_cast<std::size_t>(a)]))));
    }
    GridQuadrature q{b, cells, r.get<int>("margin", need_margin)};
    r.finish();
    try {
      q.validate();
      q.require_margin(cfg.fd);
    } catch (const Error& e) {
      invalid("quad", e.what());
    }
    cfg.quad = q;
  }

  if (need.oracle) {
    Reader r = top.child("oracle");
    cfg.oracle_enabled = r.get<bool>("enabled", cfg.functional->has_residual());
    cfg.oracle_bumps = r.get<int>("bumps", 5);
    cfg.oracle_eps = r.positive("eps", 1e-3);
    if (cfg.oracle_bumps < 1) invalid("oracle.bumps", "must be positive");
    if (cfg.oracle_enabled && !cfg.functional->has_residual())
      invalid("oracle.enabled", cfg.functional->name() + " has no residual formula");
    r.finish();
  }

  if (need.family) {
    Reader r = top.child("family");
    const auto kind = FamilySpec::kind_from_string(r.get<std::string>("kind", "conformal"));
    try {
      if (kind == FamilySpec::Kind::ConformalScale) {
        cfg.family = FamilySpec::conformal(
            *cfg.field, r.require<std::vector<std::vector<double>>>("basis"));
      } else {
        cfg.family = FamilySpec::polynomial(*cfg.field);
      }
      cfg.family->validate();
    } catch (const Error& e) {
      invalid("family", e.what());
    }
    r.finish();

    const auto k = static_cast<std::size_t>(cfg.family->parameter_count());
    cfg.theta0 = top.get<std::vector<double>>("theta0", std::vector<double>(k, 0.0));
    if (cfg.theta0.size() != k) invalid("theta0", "expected " + std::to_string(k) + " parameters");

    Reader m = top.child("minimize");
    const MinimizeOptions d;
    cfg.minimize.step0 = m.get<double>("step0", d.step0);
    cfg.minimize.backtrack = m.get<double>("backtrack", d.backtrack);
    cfg.minimize.max_iters = m.get<int>("max_iters", d.max_iters);
    cfg.minimize.grad_tol = m.get<double>("grad_tol", d.grad_tol);
    cfg.minimize.fd_step = m.get<double>("fd_step", d.fd_step);
    cfg.minimize.armijo = m.get<double>("armijo", d.armijo);
    cfg.minimize.growth = m.get<double>("growth", d.growth);
    m.finish();
    try {
      cfg.minimize.validate();
    } catch (const Error& e) {
      invalid("minimize", e.what());
    }
  }

  if (need.census) {
    Reader r = top.child("census");
    std::vector<std::string> names;
    if (r.has("systems")) {
      names = r.require<std::vector<std::string>>("systems");
    } else {
      for (auto s : {FlatnessSystem::ConnFlat1, FlatnessSystem::CurvFlatConn,
                     FlatnessSystem::CurvFlatMetric, FlatnessSystem::RicciFlatConn,
                     FlatnessSystem::RicciFlatMetric, FlatnessSystem::ScalarFlat})
        names.emplace_back(to_string(s));
      r.put("systems", names);
    }
    for (const std::string& s : names) {
      try {
        cfg.census_systems.push_back(flatness_system_from_string(s));
      } catch (const Error& e) {
        invalid("census.systems", e.what());
      }
    }
    cfg.census_dims = r.get<std::vector<int>>("dims", {1, 2, 3, 4, 5, 6, 7, 8});
    for (int n : cfg.census_dims)
      if (n < 1) invalid("census.dims", "dimensions must be positive");
    r.finish();
  }

  {
    Reader r = top.child("tolerances");
    Tolerances& t = cfg.tol;
    for (const std::string& key : need.tolerances) {
      if (key == "identity") t.identity = r.positive(key, t.identity);
      if (key == "fd_identity") t.fd_identity = r.positive(key, t.fd_identity);
      if (key == "flat") t.flat = r.positive(key, t.flat);
      if (key == "oracle") t.oracle = r.positive(key, t.oracle);
      if (key == "expect") t.expect = r.positive(key, t.expect);
      if (key == "prescription") t.prescription = r.positive(key, t.prescription);
      if (key == "gray_ratio") t.gray_ratio = r.positive(key, t.gray_ratio);
    }
    r.finish();
  }

  {
    Reader r = top.child("expect");
    for (const std::string& key : need.expect) {
      if (!r.has(key)) continue;
      const json& v = r.raw(key);
      const bool is_flag = key.size() > 5 && key.substr(key.size() - 5) == "_flat";
      if (is_flag ? !v.is_boolean() : !v.is_number()) invalid(r.sub(key), "wrong type");
      cfg.expect[key] = v;
    }
    r.finish();
  }

  top.finish();
  return cfg;
}

std::string config_hash(const json& normalized) {
  json j = normalized;
  j.erase("output");
  const std::string text = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoFailure, "cannot read config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return json::parse(ss.str());
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::ConfigInvalid, "config '" + path + "' is not valid JSON: " + e.what());
  }
}

namespace {

json parse_scalar(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error&) {
    return json(std::string(text));
  }
}

}  // namespace

void apply_override(json& doc, std::string_view dotted_path, std::string_view value) {
  if (dotted_path.empty()) throw Error(ErrorKind::ConfigInvalid, "empty override path");
  json v;
  const bool bracketed = !value.empty() && (value.front() == '[' || value.front() == '{');
  if (!bracketed && value.find(',') != std::string_view::npos) {
    v = json::array();
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = value.find(',', start);
      v.push_back(parse_scalar(value.substr(start, comma - start)));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
  } else {
    v = parse_scalar(value);
  }

  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = dotted_path.find('.', start);
    const std::string key(dotted_path.substr(start, dot - start));
    if (key.empty()) throw Error(ErrorKind::ConfigInvalid, "bad override path");
    if (node->is_null()) *node = json::object();
    if (!node->is_object())
      throw Error(ErrorKind::ConfigInvalid,
                  "override '" + std::string(dotted_path) + "' descends into a non-object");
    node = &(*node)[key];
    if (dot == std::string_view::npos) break;
    start = dot + 1;
  }
  *node = std::move(v);
}

}  // namespace flatlab::app
