#include "switchctl/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "switchctl/error.hpp"

namespace switchctl {

using nlohmann::json;

namespace {

// A JSON value plus its pointer path, for error messages.
class Node {
 public:
  Node(const json& value, std::string path, const std::string& source)
      : value_(&value), path_(std::move(path)), source_(&source) {}

  const json& raw() const { return *value_; }
  std::string path() const { return path_.empty() ? "/" : path_; }

  [[noreturn]] void fail(const std::string& what) const {
    throw Error(ErrorKind::ConfigError, *source_ + ": " + path() + ": " + what);
  }

  bool has(const std::string& key) const { return value_->is_object() && value_->contains(key); }

  Node operator[](const std::string& key) const {
    expect_object();
    if (!value_->contains(key)) fail("missing key '" + key + "'");
    return Node((*value_)[key], path_ + "/" + key, *source_);
  }

  Node operator[](size_t i) const { return Node((*value_)[i], path_ + "/" + std::to_string(i), *source_); }

  void expect_object() const {
    if (!value_->is_object()) fail("expected an object");
  }

  void allow(std::initializer_list<const char*> keys) const {
    expect_object();
    const std::set<std::string> ok(keys.begin(), keys.end());
    for (auto it = value_->begin(); it != value_->end(); ++it) {
      if (!ok.count(it.key())) Node(it.value(), path_ + "/" + it.key(), *source_).fail("unknown key");
    }
  }

  double number() const {
    if (!value_->is_number()) fail("expected a number");
    const double v = value_->get<double>();
    if (!std::isfinite(v)) fail("expected a finite number");
    return v;
  }

  double positive() const {
    const double v = number();
    if (!(v > 0.0)) fail("expected a positive number");
    return v;
  }

  long long integer() const {
    if (!value_->is_number_integer()) fail("expected an integer");
    return value_->get<long long>();
  }

  bool boolean() const {
    if (!value_->is_boolean()) fail("expected true or false");
    return value_->get<bool>();
  }

  std::string string() const {
    if (!value_->is_string()) fail("expected a string");
    return value_->get<std::string>();
  }

  size_t array_size() const {
    if (!value_->is_array()) fail("expected an array");
    return value_->size();
  }

  // A number broadcast to `n` entries or an array of exactly n numbers.
  std::vector<double> numbers(size_t n) const {
    if (value_->is_number()) return std::vector<double>(n, number());
    if (array_size() != n) fail("expected " + std::to_string(n) + " numbers");
    std::vector<double> out;
    for (size_t i = 0; i < n; ++i) out.push_back((*this)[i].number());
    return out;
  }

 private:
  const json* value_;
  std::string path_;
  const std::string* source_;
};

std::array<double, 2> pair(const Node& n, int dim) {
  const auto v = n.numbers(static_cast<size_t>(dim));
  return {v[0], dim == 2 ? v[1] : 0.0};
}

ScalarFunction parse_function(const Node& n, int dim) {
  if (n.raw().is_number()) return ScalarFunction::constant(n.number());
  n.allow({"kind", "value", "slope", "curvature", "center", "amplitude", "width"});
  const std::string kind = n["kind"].string();
  ScalarFunction f;
  f.value = n.has("value") ? n["value"].number() : 0.0;
  if (n.has("slope")) f.slope = pair(n["slope"], dim);
  if (n.has("curvature")) f.curvature = pair(n["curvature"], dim);
  if (n.has("center")) f.center = pair(n["center"], dim);
  if (n.has("amplitude")) f.amplitude = n["amplitude"].number();
  if (n.has("width")) f.width = n["width"].positive();
  auto only = [&](std::initializer_list<const char*> keys) {
    std::set<std::string> ok(keys.begin(), keys.end());
    ok.insert("kind");
    for (auto it = n.raw().begin(); it != n.raw().end(); ++it) {
      if (!ok.count(it.key())) n[it.key()].fail("not used by a " + kind + " function");
    }
  };
  if (kind == "constant") {
    only({"value"});
    f.kind = FunctionKind::Constant;
  } else if (kind == "affine") {
    only({"value", "slope", "center"});
    f.kind = FunctionKind::Affine;
  } else if (kind == "quadratic") {
    only({"value", "slope", "curvature", "center"});
    f.kind = FunctionKind::Quadratic;
  } else if (kind == "cosine_bump") {
    only({"value", "amplitude", "center", "width"});
    f.kind = FunctionKind::CosineBump;
  } else {
    n["kind"].fail("unknown function kind '" + kind + "'");
  }
  return f;
}

Domain parse_domain(const Node& n) {
  n.allow({"kind", "lower", "upper", "center", "radius"});
  const std::string kind = n["kind"].string();
  if (kind == "interval") {
    if (n.has("center") || n.has("radius")) n.fail("an interval takes lower and upper only");
    const double lo = n["lower"].number();
    const double hi = n["upper"].number();
    if (!(lo < hi)) n.fail("interval needs lower < upper");
    return Domain::interval(lo, hi);
  }
  if (kind == "rectangle") {
    if (n.has("center") || n.has("radius")) n.fail("a rectangle takes lower and upper only");
    const auto lo = n["lower"].numbers(2);
    const auto hi = n["upper"].numbers(2);
    if (!(lo[0] < hi[0] && lo[1] < hi[1])) n.fail("rectangle needs lower < upper on both axes");
    return Domain::rectangle(make_point({lo[0], lo[1]}), make_point({hi[0], hi[1]}));
  }
  if (kind == "disk") {
    if (n.has("lower") || n.has("upper")) n.fail("a disk takes center and radius only");
    const auto c = n["center"].numbers(2);
    return Domain::disk(make_point({c[0], c[1]}), n["radius"].positive());
  }
  n["kind"].fail("unknown domain kind '" + kind + "'");
}

RegimeCoefficients parse_regime(const Node& n, int dim) {
  n.allow({"diffusion", "drift", "discount", "running_cost", "control_cost"});
  RegimeCoefficients r;
  const Node a = n["diffusion"];
  r.diffusion.assign(static_cast<size_t>(dim * dim), ScalarFunction::constant(0.0));
  if (a.raw().is_object() && !a.has("kind")) {
    a.allow({"diagonal", "offdiagonal"});
    const Node diag = a["diagonal"];
    if (diag.array_size() != static_cast<size_t>(dim)) diag.fail("expected " + std::to_string(dim) + " entries");
    for (int k = 0; k < dim; ++k) r.diffusion[static_cast<size_t>(k * dim + k)] = parse_function(diag[static_cast<size_t>(k)], dim);
    if (a.has("offdiagonal")) {
      if (dim != 2) a["offdiagonal"].fail("off-diagonal diffusion needs d = 2");
      const ScalarFunction off = parse_function(a["offdiagonal"], dim);
      r.diffusion[1] = off;
      r.diffusion[2] = off;
    }
  } else {
    const ScalarFunction iso = parse_function(a, dim);
    for (int k = 0; k < dim; ++k) r.diffusion[static_cast<size_t>(k * dim + k)] = iso;
  }
  r.drift.assign(static_cast<size_t>(dim), ScalarFunction::constant(0.0));
  if (n.has("drift")) {
    const Node b = n["drift"];
    if (b.raw().is_number()) {
      for (auto& f : r.drift) f = ScalarFunction::constant(b.number());
    } else {
      if (b.array_size() != static_cast<size_t>(dim)) b.fail("expected " + std::to_string(dim) + " entries");
      for (int k = 0; k < dim; ++k) r.drift[static_cast<size_t>(k)] = parse_function(b[static_cast<size_t>(k)], dim);
    }
  }
  r.discount = parse_function(n["discount"], dim);
  r.running_cost = parse_function(n["running_cost"], dim);
  r.control_cost = parse_function(n["control_cost"], dim);
  return r;
}

SwitchingCosts parse_costs(const Node& n, int m) {
  if (n.raw().is_number()) return SwitchingCosts::uniform(m, n.number());
  if (n.array_size() != static_cast<size_t>(m)) n.fail("expected " + std::to_string(m) + " rows");
  Eigen::MatrixXd theta = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i < m; ++i) {
    const Node row = n[static_cast<size_t>(i)];
    if (row.array_size() != static_cast<size_t>(m)) row.fail("expected " + std::to_string(m) + " entries");
    for (int j = 0; j < m; ++j) {
      const Node e = row[static_cast<size_t>(j)];
      // The diagonal is unused and may be null.
      if (i == j && e.raw().is_null()) continue;
      theta(i, j) = e.number();
    }
  }
  return SwitchingCosts(theta);
}

NpdsMethod parse_method(const Node& n) {
  const std::string s = n.string();
  if (s == "picard") return NpdsMethod::Picard;
  if (s == "newton") return NpdsMethod::Newton;
  n.fail("method must be \"picard\" or \"newton\"");
}

int parse_count(const Node& n, long long lo) {
  const long long v = n.integer();
  if (v < lo || v > 1000000000) n.fail("expected an integer >= " + std::to_string(lo));
  return static_cast<int>(v);
}

ExperimentConfig parse_document(const json& doc, const std::string& source) {
  const Node root(doc, "", source);
  root.allow({"schema_version", "problem", "grid", "solver", "continuation", "simulation", "validation", "output"});
  if (root.has("schema_version") && root["schema_version"].integer() != 1) {
    root["schema_version"].fail("unsupported schema version");
  }

  const Node p = root["problem"];
  p.allow({"domain", "regimes", "switching_costs"});
  const Domain domain = parse_domain(p["domain"]);
  const int dim = domain.dim();
  const Node regimes = p["regimes"];
  const size_t m = regimes.array_size();
  if (m == 0) regimes.fail("at least one regime is required");
  std::vector<RegimeCoefficients> coeffs;
  for (size_t l = 0; l < m; ++l) coeffs.push_back(parse_regime(regimes[l], dim));
  const SwitchingCosts costs = p.has("switching_costs") ? parse_costs(p["switching_costs"], static_cast<int>(m))
                                                         : SwitchingCosts::uniform(static_cast<int>(m), 0.0);
  if (m > 1 && !p.has("switching_costs")) p.fail("missing key 'switching_costs'");

  ExperimentConfig cfg(ProblemSpec(domain, std::move(coeffs), costs));

  cfg.nodes.assign(static_cast<size_t>(dim), 101);
  if (root.has("grid")) {
    const Node g = root["grid"];
    g.allow({"nodes"});
    if (g.has("nodes")) {
      const Node n = g["nodes"];
      if (n.raw().is_number_integer()) {
        cfg.nodes.assign(static_cast<size_t>(dim), parse_count(n, 3));
      } else {
        if (n.array_size() != static_cast<size_t>(dim)) n.fail("expected " + std::to_string(dim) + " node counts");
        for (int k = 0; k < dim; ++k) cfg.nodes[static_cast<size_t>(k)] = parse_count(n[static_cast<size_t>(k)], 3);
      }
    }
  }

  if (root.has("solver")) {
    const Node s = root["solver"];
    s.allow({"epsilon", "delta", "relaxation", "max_iterations", "tolerance", "method"});
    if (s.has("epsilon")) cfg.solver.epsilon = s["epsilon"].positive();
    if (s.has("delta")) cfg.solver.delta = s["delta"].positive();
    if (s.has("relaxation")) {
      cfg.solver.relaxation = s["relaxation"].number();
      if (!(cfg.solver.relaxation > 0.0 && cfg.solver.relaxation <= 1.0)) s["relaxation"].fail("expected a value in (0, 1]");
    }
    if (s.has("max_iterations")) cfg.solver.max_iterations = parse_count(s["max_iterations"], 1);
    if (s.has("tolerance")) cfg.solver.tolerance = s["tolerance"].positive();
    if (s.has("method")) cfg.solver.method = parse_method(s["method"]);
  }

  if (root.has("continuation")) {
    const Node c = root["continuation"];
    c.allow({"epsilon0", "delta0", "shrink", "stop_threshold", "rung_cap", "region_tolerance", "method",
             "max_iterations", "tolerance"});
    auto& cp = cfg.continuation;
    if (c.has("epsilon0")) cp.epsilon0 = c["epsilon0"].positive();
    if (c.has("delta0")) cp.delta0 = c["delta0"].positive();
    if (c.has("shrink")) {
      cp.shrink = c["shrink"].number();
      if (!(cp.shrink > 0.0 && cp.shrink < 1.0)) c["shrink"].fail("expected a value in (0, 1)");
    }
    if (c.has("stop_threshold")) cp.stop_threshold = c["stop_threshold"].positive();
    if (c.has("rung_cap")) cp.rung_cap = parse_count(c["rung_cap"], 2);
    if (c.has("method")) cp.method = parse_method(c["method"]);
    if (c.has("max_iterations")) cp.max_iterations = parse_count(c["max_iterations"], 1);
    if (c.has("tolerance")) cp.tolerance = c["tolerance"].positive();
    if (c.has("region_tolerance")) cfg.region_tolerance = c["region_tolerance"].positive();
  }
  if (cfg.region_tolerance == 0.0) cfg.region_tolerance = cfg.continuation.region_tolerance();

  cfg.x0 = Vec(dim);
  for (int k = 0; k < dim; ++k) cfg.x0(k) = 0.5 * (domain.lower()(k) + domain.upper()(k));
  if (domain.kind() == DomainKind::Disk) cfg.x0 = domain.center();
  if (root.has("simulation")) {
    const Node s = root["simulation"];
    s.allow({"dt", "paths", "seed", "horizon_cap", "tail_tolerance", "x0", "regime0", "zero_volatility",
             "crosscheck_absolute", "crosscheck_se_multiplier"});
    auto& sp = cfg.simulation;
    if (s.has("dt")) sp.dt = s["dt"].positive();
    if (s.has("paths")) sp.paths = parse_count(s["paths"], 1);
    if (s.has("seed")) {
      const long long seed = s["seed"].integer();
      if (seed < 0) s["seed"].fail("expected a nonnegative integer");
      sp.seed = static_cast<std::uint64_t>(seed);
    }
    if (s.has("horizon_cap")) sp.horizon_cap = s["horizon_cap"].positive();
    if (s.has("tail_tolerance")) sp.tail_tolerance = s["tail_tolerance"].positive();
    if (s.has("zero_volatility")) sp.zero_volatility = s["zero_volatility"].boolean();
    if (s.has("x0")) {
      const auto v = s["x0"].numbers(static_cast<size_t>(dim));
      for (int k = 0; k < dim; ++k) cfg.x0(k) = v[static_cast<size_t>(k)];
      if (!domain.contains(cfg.x0)) s["x0"].fail("start point outside the closed domain");
    }
    if (s.has("regime0")) {
      const long long r = s["regime0"].integer();
      if (r < 1 || r > static_cast<long long>(m)) s["regime0"].fail("expected a regime between 1 and " + std::to_string(m));
      cfg.regime0 = static_cast<int>(r - 1);
    }
    if (s.has("crosscheck_absolute")) cfg.crosscheck_absolute = s["crosscheck_absolute"].positive();
    if (s.has("crosscheck_se_multiplier")) cfg.crosscheck_se_multiplier = s["crosscheck_se_multiplier"].positive();
  }

  if (root.has("validation")) {
    const Node v = root["validation"];
    v.allow({"samples"});
    if (v.has("samples")) cfg.validation_samples = parse_count(v["samples"], 1);
  }
  if (root.has("output")) cfg.output = root["output"].string();
  return cfg;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::string& source) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    const size_t at = std::min(static_cast<size_t>(e.byte), text.size());
    const long line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(at > 0 ? at - 1 : 0), '\n');
    throw Error(ErrorKind::ConfigError, source + ": line " + std::to_string(line) + ": malformed JSON");
  }
  try {
    return parse_document(doc, source);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::ConfigError) throw;
    // Constructor checks (dimension mismatches and the like) surface as config errors.
    throw Error(ErrorKind::ConfigError, source + ": " + e.what());
  }
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::ConfigError, path + ": cannot open config file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path);
}

namespace {

json function_to_json(const ScalarFunction& f, int dim) {
  auto vec = [dim](const std::array<double, 2>& a) {
    return dim == 2 ? json::array({a[0], a[1]}) : json::array({a[0]});
  };
  switch (f.kind) {
    case FunctionKind::Constant:
      return f.value;
    case FunctionKind::Affine:
      return {{"kind", "affine"}, {"value", f.value}, {"slope", vec(f.slope)}, {"center", vec(f.center)}};
    case FunctionKind::Quadratic:
      return {{"kind", "quadratic"}, {"value", f.value}, {"slope", vec(f.slope)},
              {"curvature", vec(f.curvature)}, {"center", vec(f.center)}};
    case FunctionKind::CosineBump:
      return {{"kind", "cosine_bump"}, {"value", f.value}, {"amplitude", f.amplitude},
              {"center", vec(f.center)}, {"width", f.width}};
  }
  return nullptr;
}

}  // namespace

json problem_to_json(const ProblemSpec& spec) {
  const Domain& d = spec.domain();
  const int dim = d.dim();
  json domain;
  switch (d.kind()) {
    case DomainKind::Interval:
      domain = {{"kind", "interval"}, {"lower", d.lower()(0)}, {"upper", d.upper()(0)}};
      break;
    case DomainKind::Rectangle:
      domain = {{"kind", "rectangle"},
                {"lower", {d.lower()(0), d.lower()(1)}},
                {"upper", {d.upper()(0), d.upper()(1)}}};
      break;
    case DomainKind::Disk:
      domain = {{"kind", "disk"}, {"center", {d.center()(0), d.center()(1)}}, {"radius", d.radius()}};
      break;
  }
  json regimes = json::array();
  for (int l = 0; l < spec.regimes(); ++l) {
    const auto& r = spec.regime(l);
    json diag = json::array();
    for (int k = 0; k < dim; ++k) diag.push_back(function_to_json(r.diffusion[static_cast<size_t>(k * dim + k)], dim));
    json diffusion = {{"diagonal", diag}};
    if (dim == 2) diffusion["offdiagonal"] = function_to_json(r.diffusion[1], dim);
    json drift = json::array();
    for (const auto& f : r.drift) drift.push_back(function_to_json(f, dim));
    regimes.push_back({{"diffusion", diffusion},
                       {"drift", drift},
                       {"discount", function_to_json(r.discount, dim)},
                       {"running_cost", function_to_json(r.running_cost, dim)},
                       {"control_cost", function_to_json(r.control_cost, dim)}});
  }
  json costs = json::array();
  for (int i = 0; i < spec.regimes(); ++i) {
    json row = json::array();
    for (int j = 0; j < spec.regimes(); ++j) row.push_back(spec.costs()(i, j));
    costs.push_back(row);
  }
  return {{"domain", domain}, {"regimes", regimes}, {"switching_costs", costs}};
}

}  // namespace switchctl
