#include "ldplab/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>

#include <openssl/evp.h>
#include <toml.hpp>

#include "ldplab/error.hpp"

namespace ldplab {
namespace {

using nlohmann::json;

json to_json_node(const toml::node& n, const std::string& where) {
  if (auto t = n.as_table()) {
    json out = json::object();
    for (auto&& [k, v] : *t) out[std::string(k.str())] = to_json_node(v, where + "." + std::string(k.str()));
    return out;
  }
  if (auto a = n.as_array()) {
    json out = json::array();
    for (auto&& v : *a) out.push_back(to_json_node(v, where));
    return out;
  }
  if (auto v = n.as_integer()) return v->get();
  if (auto v = n.as_floating_point()) return v->get();
  if (auto v = n.as_boolean()) return v->get();
  if (auto v = n.as_string()) return v->get();
  throw ConfigError(where, "unsupported value type (dates and times are not accepted)");
}

json parse_toml(const std::string& text, const std::string& source) {
  try {
    const toml::table tbl = toml::parse(text, source);
    json out = json::object();
    for (auto&& [k, v] : tbl) out[std::string(k.str())] = to_json_node(v, std::string(k.str()));
    return out;
  } catch (const toml::parse_error& e) {
    const auto& b = e.source().begin;
    std::ostringstream msg;
    msg << "parse error at line " << b.line << ", column " << b.column << ": " << e.description();
    throw ConfigError("", msg.str());
  }
}

json parse_override_value(const std::string& value) {
  try {
    const toml::table tbl = toml::parse("v = " + value);
    return to_json_node(*tbl.get("v"), "override");
  } catch (const toml::parse_error&) {
    return value;  // bare word
  }
}

void apply_override(json& root, const Override& o) {
  json* node = &root;
  std::size_t start = 0;
  const std::string& key = o.first;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError(key, "malformed override key");
    if (dot == std::string::npos) {
      (*node)[part] = parse_override_value(o.second);
      return;
    }
    json& child = (*node)[part];
    if (child.is_null()) child = json::object();
    if (!child.is_object()) throw ConfigError(key.substr(0, dot), "override descends into a non-table value");
    node = &child;
    start = dot + 1;
  }
}

// Typed view of one table that rejects unknown keys.
class Section {
 public:
  Section(const json* node, std::string path) : node_(node), path_(std::move(path)) {
    if (node_ && !node_->is_null() && !node_->is_object()) throw ConfigError(path_, "expected a table");
  }

  // JSON echoes spell absent optional values as null.
  bool has(const std::string& key) const {
    used_.insert(key);
    return node_ && node_->is_object() && node_->contains(key) && !node_->at(key).is_null();
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json* raw(const std::string& key) {
    used_.insert(key);
    return has(key) ? &node_->at(key) : nullptr;
  }

  Section sub(const std::string& key) { return Section(raw(key), field(key)); }

  double number(const std::string& key, double def) {
    const json* v = raw(key);
    if (!v) return def;
    return as_number(*v, field(key));
  }

  long integer(const std::string& key, long def) {
    const json* v = raw(key);
    if (!v) return def;
    if (!v->is_number_integer()) throw ConfigError(field(key), "expected an integer");
    return v->get<long>();
  }

  bool boolean(const std::string& key, bool def) {
    const json* v = raw(key);
    if (!v) return def;
    if (!v->is_boolean()) throw ConfigError(field(key), "expected true or false");
    return v->get<bool>();
  }

  std::string string(const std::string& key, const std::string& def) {
    const json* v = raw(key);
    if (!v) return def;
    if (!v->is_string()) throw ConfigError(field(key), "expected a string");
    return v->get<std::string>();
  }

  std::vector<double> numbers(const std::string& key, std::vector<double> def) {
    const json* v = raw(key);
    if (!v) return def;
    if (!v->is_array()) throw ConfigError(field(key), "expected an array of numbers");
    std::vector<double> out;
    for (const auto& e : *v) out.push_back(as_number(e, field(key)));
    return out;
  }

  void finish() const {
    if (!node_ || node_->is_null()) return;
    for (auto it = node_->begin(); it != node_->end(); ++it) {
      if (!used_.count(it.key())) throw ConfigError(field(it.key()), "unknown key");
    }
  }

  static double as_number(const json& v, const std::string& where) {
    if (v.is_string()) {
      const auto& t = v.get_ref<const std::string&>();
      if (t == "inf") return std::numeric_limits<double>::infinity();
      if (t == "-inf") return -std::numeric_limits<double>::infinity();
      if (t == "nan") return std::numeric_limits<double>::quiet_NaN();
    }
    if (!v.is_number()) throw ConfigError(where, "expected a number");
    return v.get<double>();
  }

 private:
  const json* node_;
  std::string path_;
  mutable std::set<std::string> used_;
};

void require(bool ok, const std::string& field, const std::string& message) {
  if (!ok) throw ConfigError(field, message);
}

Point read_point(Section& s, const std::string& key, Point def, int d) {
  const auto v = s.numbers(key, {def[0], def[1]});
  require(v.size() == static_cast<std::size_t>(d) || v.size() == 2, s.field(key),
          "expected " + std::to_string(d) + " coordinates");
  return {v[0], v.size() > 1 ? v[1] : 0.0};
}

FieldConfig read_field(Section s, FieldConfig def, int d) {
  FieldConfig f = def;
  f.kind = s.string("kind", def.kind);
  require(f.kind == "zero" || f.kind == "constant" || f.kind == "sine" || f.kind == "gaussian", s.field("kind"),
          "expected zero, constant, sine or gaussian");
  f.amplitude = s.number("amplitude", def.amplitude);
  f.center = read_point(s, "center", def.center, d);
  f.width = s.number("width", def.width);
  require(f.width > 0.0, s.field("width"), "must be positive");
  s.finish();
  return f;
}

PiecewisePolynomial read_polynomial(const json& v, const std::string& where) {
  PiecewisePolynomial p;
  if (v.is_array()) {  // plain coefficient list: a single piece
    std::vector<double> piece;
    for (const auto& e : v) piece.push_back(Section::as_number(e, where));
    p.pieces.push_back(piece);
    return p;
  }
  Section s(&v, where);
  p.breaks = s.numbers("breaks", {});
  const json* pieces = s.raw("pieces");
  require(pieces && pieces->is_array() && !pieces->empty(), s.field("pieces"), "expected an array of coefficient arrays");
  for (const auto& piece : *pieces) {
    require(piece.is_array(), s.field("pieces"), "expected an array of coefficient arrays");
    std::vector<double> coeffs;
    for (const auto& e : piece) coeffs.push_back(Section::as_number(e, s.field("pieces")));
    p.pieces.push_back(coeffs);
  }
  s.finish();
  return p;
}

std::vector<PiecewisePolynomial> read_polynomials(Section& s, const std::string& key) {
  std::vector<PiecewisePolynomial> out;
  const json* v = s.raw(key);
  if (!v) return out;
  require(v->is_array(), s.field(key), "expected an array of polynomial tables");
  for (std::size_t i = 0; i < v->size(); ++i) {
    out.push_back(read_polynomial(v->at(i), s.field(key) + "[" + std::to_string(i) + "]"));
  }
  return out;
}

json matrix_json(const Matrix2& b) { return json::array({json::array({b[0][0], b[0][1]}), json::array({b[1][0], b[1][1]})}); }

json field_json(const FieldConfig& f) {
  return {{"kind", f.kind}, {"amplitude", f.amplitude}, {"center", {f.center[0], f.center[1]}}, {"width", f.width}};
}

json polynomial_json(const PiecewisePolynomial& p) { return {{"breaks", p.breaks}, {"pieces", p.pieces}}; }

json polynomials_json(const std::vector<PiecewisePolynomial>& v) {
  json out = json::array();
  for (const auto& p : v) out.push_back(polynomial_json(p));
  return out;
}

// Non-finite numbers have no JSON form; spell them out so the hash stays well defined.
json number_json(double v) {
  if (std::isfinite(v)) return v;
  return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
}

}  // namespace

Override parse_override(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError(text, "override must look like key=value");
  auto trim = [](std::string s) {
    const auto a = s.find_first_not_of(" \t");
    const auto b = s.find_last_not_of(" \t");
    return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
  };
  return {trim(text.substr(0, eq)), trim(text.substr(eq + 1))};
}

RunConfig load_config(const std::string& toml_text, const std::vector<Override>& overrides,
                      const std::string& source) {
  return load_config_tree(parse_toml(toml_text, source), overrides);
}

RunConfig load_config_tree(nlohmann::json root, const std::vector<Override>& overrides) {
  if (!root.is_object()) throw ConfigError("", "config must be a table");
  for (const auto& o : overrides) apply_override(root, o);
  Section top(&root, "");
  RunConfig c;

  {
    Section s = top.sub("grid");
    c.grid.dim = static_cast<int>(s.integer("dim", 1));
    require(c.grid.dim == 1 || c.grid.dim == 2, s.field("dim"), "must be 1 or 2");
    c.grid.lo = s.number("lo", 0.0);
    c.grid.hi = s.number("hi", 1.0);
    require(c.grid.hi > c.grid.lo, s.field("hi"), "must exceed grid.lo");
    c.grid.resolution = static_cast<int>(s.integer("resolution", c.grid.dim == 1 ? 64 : 16));
    require(c.grid.resolution >= 2, s.field("resolution"), "must be at least 2");
    s.finish();
  }
  const int d = c.grid.dim;
  {
    Section s = top.sub("operator");
    c.op.kind = s.string("kind", "laplacian");
    require(c.op.kind == "laplacian" || c.op.kind == "constant" || c.op.kind == "isotropic", s.field("kind"),
            "expected laplacian, constant or isotropic");
    if (const json* b = s.raw("b")) {
      require(b->is_array() && b->size() == 2 && b->at(0).is_array() && b->at(0).size() == 2 && b->at(1).is_array() &&
                  b->at(1).size() == 2,
              s.field("b"), "expected a 2x2 array");
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) c.op.b[i][j] = Section::as_number(b->at(i).at(j), s.field("b"));
    }
    c.op.amplitude = s.number("amplitude", 0.0);
    require(c.op.amplitude >= 0.0 && c.op.amplitude < 1.0, s.field("amplitude"), "must lie in [0, 1)");
    s.finish();
  }
  {
    Section s = top.sub("coefficients");
    auto& cc = c.coefficients;
    cc.preset = s.string("preset", "linear_gaussian");
    require(cc.preset == "burgers" || cc.preset == "reaction_diffusion" || cc.preset == "linear_gaussian" ||
                cc.preset == "custom",
            s.field("preset"), "expected burgers, reaction_diffusion, linear_gaussian or custom");
    const int k = static_cast<int>(s.integer("k", 1));
    require(k >= 1, s.field("k"), "must be at least 1");
    const std::string profile = s.string("noise_profile", cc.preset == "custom" ? "constant" : "uniform");
    require(profile == "uniform" || profile == "sine" || profile == "constant", s.field("noise_profile"),
            "expected uniform, sine or constant");
    cc.truncation = s.number("truncation", 0.0);
    require(cc.truncation >= 0.0, s.field("truncation"), "must be >= 0");
    auto& po = cc.preset_options;
    po.d = d;
    po.k = k;
    po.noise_profile = profile;
    po.lo = {c.grid.lo, c.grid.lo};
    po.hi = {c.grid.hi, c.grid.hi};
    po.sigma_scale = s.number("sigma_scale", 1.0);
    po.sigma_eps0 = s.number("sigma_eps0", 1.0);
    po.reaction_a = s.number("reaction_a", 1.0);
    po.reaction_b = s.number("reaction_b", -1.0);
    auto& cu = cc.custom;
    cu.d = d;
    cu.k = k;
    cu.noise_profile = profile;
    cu.lo = po.lo;
    cu.hi = po.hi;
    if (cc.preset == "custom") {
      cc.custom_nu_declared = s.has("nu");
      cu.nu = s.number("nu", 1.0);
      cu.K = s.number("K", 1.0);
      cu.L = s.number("L", 1.0);
      if (const json* f = s.raw("f")) cu.f = read_polynomial(*f, s.field("f"));
      cu.g1 = read_polynomials(s, "g1");
      cu.g2 = read_polynomials(s, "g2");
      cu.sigma = read_polynomials(s, "sigma");
      require(cu.g1.empty() || cu.g1.size() == static_cast<std::size_t>(d), s.field("g1"),
              "needs one entry per axis");
      require(cu.g2.empty() || cu.g2.size() == static_cast<std::size_t>(d), s.field("g2"),
              "needs one entry per axis");
      require(cu.sigma.size() == static_cast<std::size_t>(k), s.field("sigma"), "needs k entries");
      require(cu.nu >= 1.0, s.field("nu"), "must be >= 1");
    } else {
      for (const char* key : {"nu", "K", "L", "f", "g1", "g2", "sigma"}) {
        require(!s.has(key), s.field(key), "only allowed with preset = \"custom\"");
      }
    }
    s.finish();
  }
  c.initial = read_field(top.sub("initial"), FieldConfig{}, d);
  {
    Section s = top.sub("time");
    c.time.T = s.number("T", 1.0);
    c.time.dt = s.number("dt", 1.0 / 64.0);
    require(c.time.T > 0.0, s.field("T"), "must be positive");
    require(c.time.dt > 0.0, s.field("dt"), "must be positive");
    const double M = std::round(c.time.T / c.time.dt);
    require(M >= 1.0 && std::abs(M * c.time.dt - c.time.T) <= 1e-9 * c.time.T, s.field("dt"),
            "must divide T into a whole number of steps");
    s.finish();
  }
  {
    Section s = top.sub("noise");
    c.noise.eps = s.number("eps", 0.1);
    require(c.noise.eps >= 0.0, s.field("eps"), "must be >= 0");
    c.noise.eps_grid = s.numbers("eps_grid", c.noise.eps_grid);
    for (double e : c.noise.eps_grid) require(e >= 0.0, s.field("eps_grid"), "entries must be >= 0");
    s.finish();
  }
  c.rho = top.number("rho", 0.0);
  if (const json* seed = top.raw("seed")) {
    require(seed->is_number_integer() && seed->get<long long>() >= 0, "seed", "expected a non-negative integer");
    c.seed = seed->get<std::uint64_t>();
  }
  {
    const long paths = top.integer("paths", 1000);
    require(paths >= 1, "paths", "must be at least 1");
    c.paths = static_cast<std::size_t>(paths);
  }
  {
    Section s = top.sub("event");
    auto& e = c.event;
    e.kind = s.string("kind", "point_exceedance");
    require(e.kind == "point_exceedance" || e.kind == "mean_exceedance" || e.kind == "ball_exit" ||
                e.kind == "tube_exit" || e.kind == "terminal_field",
            s.field("kind"), "expected point_exceedance, mean_exceedance, ball_exit, tube_exit or terminal_field");
    e.x0 = read_point(s, "x0", {0.5 * (c.grid.lo + c.grid.hi), 0.5 * (c.grid.lo + c.grid.hi)}, d);
    e.level = s.number("level", 1.0);
    e.rho = s.number("rho", 0.0);
    e.target = read_field(s.sub("target"), e.target, d);
    if (e.kind == "ball_exit" || e.kind == "tube_exit") require(e.level > 0.0, s.field("level"), "must be positive");
    s.finish();
  }
  {
    Section s = top.sub("optimizer");
    auto& o = c.optimizer;
    o.penalty0 = s.number("penalty0", o.penalty0);
    o.penalty_growth = s.number("penalty_growth", o.penalty_growth);
    o.max_penalty = s.number("max_penalty", o.max_penalty);
    o.rounds = static_cast<int>(s.integer("rounds", o.rounds));
    o.max_inner = static_cast<int>(s.integer("max_inner", o.max_inner));
    o.grad_tol = s.number("grad_tol", o.grad_tol);
    o.feasibility_tol = s.number("feasibility_tol", o.feasibility_tol);
    o.lbfgs_memory = static_cast<int>(s.integer("lbfgs_memory", o.lbfgs_memory));
    o.max_action = s.number("max_action", o.max_action);
    o.initial_scale = s.number("initial_scale", o.initial_scale);
    const std::string g = s.string("gradient", "sensitivity");
    require(g == "sensitivity" || g == "finite_difference", s.field("gradient"),
            "expected sensitivity or finite_difference");
    o.gradient = g == "sensitivity" ? GradientMode::sensitivity : GradientMode::finite_difference;
    require(o.penalty0 > 0.0, s.field("penalty0"), "must be positive");
    require(o.penalty_growth >= 1.0, s.field("penalty_growth"), "must be >= 1");
    require(o.max_penalty >= o.penalty0, s.field("max_penalty"), "must be at least penalty0");
    require(o.rounds >= 1, s.field("rounds"), "must be at least 1");
    require(o.max_inner >= 1, s.field("max_inner"), "must be at least 1");
    require(o.lbfgs_memory >= 1, s.field("lbfgs_memory"), "must be at least 1");
    require(o.feasibility_tol > 0.0, s.field("feasibility_tol"), "must be positive");
    s.finish();
  }
  {
    Section s = top.sub("control");
    auto& ct = c.control;
    ct.kind = s.string("kind", "zero");
    require(ct.kind == "zero" || ct.kind == "constant" || ct.kind == "csv" || ct.kind == "optimal", s.field("kind"),
            "expected zero, constant, csv or optimal");
    ct.values = s.numbers("values", {});
    ct.path = s.string("path", "");
    if (s.has("bound")) ct.bound = s.number("bound", 0.0);
    if (ct.kind == "constant") {
      require(ct.values.size() == static_cast<std::size_t>(c.coefficients.preset_options.k), s.field("values"),
              "needs k entries");
    }
    if (ct.kind == "csv") require(!ct.path.empty(), s.field("path"), "required for kind = \"csv\"");
    s.finish();
  }
  {
    Section s = top.sub("estimator");
    c.estimator.method = s.string("method", "importance");
    require(c.estimator.method == "plain" || c.estimator.method == "importance", s.field("method"),
            "expected plain or importance");
    s.finish();
  }
  {
    Section s = top.sub("evolver");
    auto& ev = c.evolver;
    ev.blowup_threshold = s.number("blowup_threshold", ev.blowup_threshold);
    ev.step_guard = s.boolean("step_guard", ev.step_guard);
    ev.step_guard_c = s.number("step_guard_c", ev.step_guard_c);
    ev.picard_tol = s.number("picard_tol", ev.picard_tol);
    ev.picard_max_sweeps = static_cast<int>(s.integer("picard_max_sweeps", ev.picard_max_sweeps));
    const std::string start = s.string("picard_start", "zero");
    require(start == "zero" || start == "heat", s.field("picard_start"), "expected zero or heat");
    ev.picard_start = start == "zero" ? PicardStart::zero : PicardStart::heat;
    require(ev.blowup_threshold > 0.0, s.field("blowup_threshold"), "must be positive");
    require(ev.step_guard_c > 0.0, s.field("step_guard_c"), "must be positive");
    require(ev.picard_max_sweeps >= 1, s.field("picard_max_sweeps"), "must be at least 1");
    s.finish();
  }
  {
    Section s = top.sub("kernel");
    c.kernel.p = s.number("p", 1.0);
    require(c.kernel.p >= 1.0, s.field("p"), "must be >= 1");
    const long ts = s.integer("time_samples", 12);
    const long gs = s.integer("gaussian_samples", 1000);
    require(ts >= 3, s.field("time_samples"), "must be at least 3");
    require(gs >= 1, s.field("gaussian_samples"), "must be at least 1");
    c.kernel.time_samples = static_cast<std::size_t>(ts);
    c.kernel.gaussian_samples = static_cast<std::size_t>(gs);
    s.finish();
  }
  {
    Section s = top.sub("convergence");
    c.convergence.eta = read_field(s.sub("eta"), c.convergence.eta, d);
    c.convergence.chi = s.numbers("chi", {});
    require(c.convergence.chi.empty() ||
                c.convergence.chi.size() == static_cast<std::size_t>(c.coefficients.preset_options.k),
            s.field("chi"), "needs k entries");
    c.convergence.gamma = s.string("gamma", "identity");
    require(c.convergence.gamma == "identity" || c.convergence.gamma == "zero", s.field("gamma"),
            "expected identity or zero");
    s.finish();
  }
  {
    Section s = top.sub("tightness");
    c.tightness.C = s.numbers("C", c.tightness.C);
    require(!c.tightness.C.empty(), s.field("C"), "must not be empty");
    for (double v : c.tightness.C) require(v > 0.0, s.field("C"), "entries must be positive");
    s.finish();
  }
  {
    Section s = top.sub("output");
    c.output.svg = s.boolean("svg", true);
    c.output.snapshot = s.boolean("snapshot", true);
    s.finish();
  }
  top.finish();

  // rho: explicit, or the default from a declared growth exponent.
  if (c.rho == 0.0) {
    if (!c.coefficients.custom_nu_declared) {
      throw ConfigError("rho", "missing, and no default is derivable because coefficients.nu is not declared");
    }
    const double nu = c.coefficients.preset == "custom" ? c.coefficients.custom.nu
                                                        : make_preset(c.coefficients.preset, c.coefficients.preset_options).nu;
    c.rho = std::max(2.0 * nu, static_cast<double>(d) + 1.0) + 1.0;
  }
  require(c.rho > static_cast<double>(d), "rho", "must exceed the spatial dimension");
  if (c.event.rho <= 0.0) c.event.rho = c.rho;
  return c;
}

RunConfig load_config_file(const std::filesystem::path& path, const std::vector<Override>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  if (path.extension() == ".json") {
    json root;
    try {
      root = json::parse(buf.str());
    } catch (const json::parse_error& e) {
      throw ConfigError("", std::string("JSON parse error: ") + e.what());
    }
    // A run manifest carries the resolved config under "config".
    if (root.is_object() && root.contains("config_hash") && root.contains("config")) root = root["config"];
    return load_config_tree(std::move(root), overrides);
  }
  return load_config(buf.str(), overrides, path.string());
}

nlohmann::json config_to_json(const RunConfig& c) {
  const auto& cc = c.coefficients;
  json coeff = {{"preset", cc.preset},
                {"k", cc.preset_options.k},
                {"noise_profile", cc.preset_options.noise_profile},
                {"truncation", cc.truncation}};
  if (cc.preset == "custom") {
    coeff["nu"] = cc.custom_nu_declared ? json(cc.custom.nu) : json(nullptr);
    coeff["K"] = cc.custom.K;
    coeff["L"] = cc.custom.L;
    coeff["f"] = polynomial_json(cc.custom.f);
    coeff["g1"] = polynomials_json(cc.custom.g1);
    coeff["g2"] = polynomials_json(cc.custom.g2);
    coeff["sigma"] = polynomials_json(cc.custom.sigma);
  } else {
    coeff["sigma_scale"] = cc.preset_options.sigma_scale;
    coeff["sigma_eps0"] = cc.preset_options.sigma_eps0;
    coeff["reaction_a"] = cc.preset_options.reaction_a;
    coeff["reaction_b"] = cc.preset_options.reaction_b;
  }
  const auto& o = c.optimizer;
  const auto& ev = c.evolver;
  json out = {
      {"grid", {{"dim", c.grid.dim}, {"lo", c.grid.lo}, {"hi", c.grid.hi}, {"resolution", c.grid.resolution}}},
      {"operator", {{"kind", c.op.kind}, {"b", matrix_json(c.op.b)}, {"amplitude", c.op.amplitude}}},
      {"coefficients", coeff},
      {"initial", field_json(c.initial)},
      {"time", {{"T", c.time.T}, {"dt", c.time.dt}}},
      {"noise", {{"eps", c.noise.eps}, {"eps_grid", c.noise.eps_grid}}},
      {"rho", c.rho},
      {"seed", c.seed},
      {"paths", c.paths},
      {"event",
       {{"kind", c.event.kind},
        {"x0", {c.event.x0[0], c.event.x0[1]}},
        {"level", c.event.level},
        {"rho", c.event.rho},
        {"target", field_json(c.event.target)}}},
      {"optimizer",
       {{"penalty0", o.penalty0},
        {"penalty_growth", o.penalty_growth},
        {"max_penalty", o.max_penalty},
        {"rounds", o.rounds},
        {"max_inner", o.max_inner},
        {"grad_tol", o.grad_tol},
        {"feasibility_tol", o.feasibility_tol},
        {"lbfgs_memory", o.lbfgs_memory},
        {"max_action", number_json(o.max_action)},
        {"initial_scale", o.initial_scale},
        {"gradient", o.gradient == GradientMode::sensitivity ? "sensitivity" : "finite_difference"}}},
      {"control",
       {{"kind", c.control.kind},
        {"values", c.control.values},
        {"path", c.control.path},
        {"bound", c.control.bound ? json(*c.control.bound) : json(nullptr)}}},
      {"estimator", {{"method", c.estimator.method}}},
      {"evolver",
       {{"blowup_threshold", number_json(ev.blowup_threshold)},
        {"step_guard", ev.step_guard},
        {"step_guard_c", ev.step_guard_c},
        {"picard_tol", ev.picard_tol},
        {"picard_max_sweeps", ev.picard_max_sweeps},
        {"picard_start", ev.picard_start == PicardStart::zero ? "zero" : "heat"}}},
      {"kernel", {{"p", c.kernel.p}, {"time_samples", c.kernel.time_samples}, {"gaussian_samples", c.kernel.gaussian_samples}}},
      {"convergence", {{"eta", field_json(c.convergence.eta)}, {"chi", c.convergence.chi}, {"gamma", c.convergence.gamma}}},
      {"tightness", {{"C", c.tightness.C}}},
      {"output", {{"svg", c.output.svg}, {"snapshot", c.output.snapshot}}},
  };
  return out;
}

std::string config_hash(const RunConfig& c) {
  const std::string text = config_to_json(c).dump();
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(text.data(), text.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("config_hash: SHA-256 digest failed");
  }
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return hex.str();
}

Grid make_grid(const RunConfig& c) {
  return c.grid.dim == 1 ? build_grid_1d(c.grid.lo, c.grid.hi, c.grid.resolution)
                         : build_grid_2d(c.grid.lo, c.grid.hi, c.grid.resolution);
}

EllipticCoefficients make_elliptic(const RunConfig& c) {
  if (c.op.kind == "laplacian") return EllipticCoefficients::identity();
  if (c.op.kind == "constant") {
    Matrix2 b = c.op.b;
    double lmin, lmax;
    if (c.grid.dim == 1) {
      lmin = lmax = b[0][0];
      b[0][1] = b[1][0] = 0.0;
      b[1][1] = 1.0;
    } else {
      const double m = 0.5 * (b[0][0] + b[1][1]);
      const double r = std::hypot(0.5 * (b[0][0] - b[1][1]), 0.5 * (b[0][1] + b[1][0]));
      lmin = m - r;
      lmax = m + r;
    }
    if (!(lmin > 0.0)) throw ConfigError("operator.b", "must be positive definite");
    return EllipticCoefficients::constant(b, std::min(lmin, 1.0 / lmax));
  }
  const double amp = c.op.amplitude;
  const double lo = c.grid.lo, hi = c.grid.hi;
  const int d = c.grid.dim;
  auto a = [amp, lo, hi, d](const Point& x) {
    double s = 1.0;
    for (int i = 0; i < d; ++i) s *= std::sin(M_PI * (x[i] - lo) / (hi - lo));
    return 1.0 + amp * s;
  };
  return EllipticCoefficients::isotropic(a, 1.0 / (1.0 + amp),
                                         "(1 + " + std::to_string(amp) + " prod sin(pi x)) I");
}

CoefficientSet make_coefficients(const RunConfig& c) {
  const auto& cc = c.coefficients;
  CoefficientSet set = cc.preset == "custom" ? make_custom(cc.custom) : make_preset(cc.preset, cc.preset_options);
  if (cc.preset == "custom" && !cc.custom_nu_declared) {
    // The step guard still needs a growth exponent: take the smallest one the tables satisfy.
    const auto report = validate_assumptions(set, make_grid(c), c.time.T);
    if (std::isfinite(report.validated_nu)) set.nu = report.validated_nu;
  }
  set.truncation = cc.truncation;
  return set;
}

TimeGrid make_times(const RunConfig& c) {
  return uniform_time_grid(c.time.T, static_cast<std::size_t>(std::llround(c.time.T / c.time.dt)));
}

std::vector<double> make_field(const FieldConfig& f, const Grid& grid) {
  std::vector<double> out(grid.size(), 0.0);
  const int d = grid.dim();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Point x = grid.interior_position(i);
    if (f.kind == "constant") {
      out[i] = f.amplitude;
    } else if (f.kind == "sine") {
      double s = f.amplitude;
      for (int a = 0; a < d; ++a) s *= std::sin(M_PI * (x[a] - grid.lo(a)) / (grid.hi(a) - grid.lo(a)));
      out[i] = s;
    } else if (f.kind == "gaussian") {
      double r2 = 0.0;
      for (int a = 0; a < d; ++a) r2 += (x[a] - f.center[a]) * (x[a] - f.center[a]);
      out[i] = f.amplitude * std::exp(-r2 / (2.0 * f.width * f.width));
    }
  }
  return out;
}

Control make_control(const ControlConfig& cc, const TimeGrid& grid, int k) {
  Control out;
  if (cc.kind == "zero") {
    out = Control::zero(grid, k);
  } else if (cc.kind == "constant") {
    if (cc.values.size() != static_cast<std::size_t>(k)) throw ConfigError("control.values", "needs k entries");
    out = Control::constant(grid, cc.values);
  } else if (cc.kind == "csv") {
    std::ifstream in(cc.path);
    if (!in) throw ConfigError("control.path", "cannot read " + cc.path);
    try {
      out = read_control_csv(in);
    } catch (const DomainError& e) {
      throw ConfigError("control.path", e.what());
    }
    if (out.k != k) throw ConfigError("control.path", "control has the wrong number of components");
    if (!(out.grid == grid)) {
      // Accept a coarser control whose steps split evenly into the solver steps.
      const std::size_t M = grid.steps(), Mc = out.grid.steps();
      if (Mc == 0 || M % Mc != 0) throw ConfigError("control.path", "control grid does not match the time grid");
      out = out.refine(M / Mc);
      if (out.grid.steps() != M || std::abs(out.grid.horizon() - grid.horizon()) > 1e-12 * grid.horizon()) {
        throw ConfigError("control.path", "control grid does not match the time grid");
      }
      out.grid = grid;
    }
  } else {
    throw DomainError("make_control: the optimal control is computed by the caller");
  }
  out.bound = cc.bound;
  return out;
}

TargetSpec make_event(const RunConfig& c, const Grid& grid) {
  const auto& e = c.event;
  if (e.kind == "point_exceedance") return TargetSpec::point_exceedance(grid, e.x0, e.level);
  if (e.kind == "mean_exceedance") return TargetSpec::mean_exceedance(grid, e.level);
  if (e.kind == "ball_exit") return TargetSpec::ball_exit(e.level, e.rho);
  if (e.kind == "tube_exit") return TargetSpec::tube_exit(e.level, e.rho);
  return TargetSpec::terminal(make_field(e.target, grid));
}

EvolverOptions evolver_options(const RunConfig& c) {
  EvolverOptions o = c.evolver;
  o.rho = c.rho;
  o.truncation = c.coefficients.truncation;
  return o;
}

}  // namespace ldplab
