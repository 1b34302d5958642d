#include "hiercoord/config.hpp"

#include "hiercoord/error.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace hiercoord {
namespace {

using json = nlohmann::ordered_json;

// A JSON value together with its field path, for diagnostics.
struct Node {
  const json& j;
  std::string path;
  const std::string& origin;

  [[noreturn]] void fail(const std::string& msg) const {
    throw ConfigError(fmt::format("{}: {}: {}", origin, path.empty() ? "<root>" : path, msg));
  }

  static const char* type_name(const json& v) { return v.type_name(); }

  Node object() const {
    if (!j.is_object()) fail(fmt::format("expected an object, got {}", type_name(j)));
    return *this;
  }
  void only(std::initializer_list<const char*> keys) const {
    object();
    for (const auto& [k, v] : j.items()) {
      bool known = false;
      for (const char* key : keys) known = known || k == key;
      if (!known) Node{v, sub(k), origin}.fail("unknown field");
    }
  }
  std::string sub(const std::string& key) const { return path.empty() ? key : path + "." + key; }
  bool has(const char* key) const { return j.is_object() && j.contains(key); }
  Node operator[](const char* key) const {
    object();
    if (!j.contains(key)) fail(fmt::format("missing field '{}'", key));
    return {j.at(key), sub(key), origin};
  }
  Node at(std::size_t i) const { return {j.at(i), fmt::format("{}[{}]", path, i), origin}; }
  std::size_t size() const {
    if (!j.is_array()) fail(fmt::format("expected an array, got {}", type_name(j)));
    return j.size();
  }

  double number() const {
    if (!j.is_number()) fail(fmt::format("expected a number, got {}", type_name(j)));
    const double v = j.get<double>();
    if (!std::isfinite(v)) fail("not finite");
    return v;
  }
  int integer() const {
    if (!j.is_number_integer()) fail(fmt::format("expected an integer, got {}", type_name(j)));
    return j.get<int>();
  }
  std::string string() const {
    if (!j.is_string()) fail(fmt::format("expected a string, got {}", type_name(j)));
    return j.get<std::string>();
  }
  Vector vector() const {
    Vector out(static_cast<Eigen::Index>(size()));
    for (std::size_t i = 0; i < j.size(); ++i) out[static_cast<Eigen::Index>(i)] = at(i).number();
    return out;
  }
  Vector vector(Eigen::Index n) const {
    Vector out = vector();
    if (out.size() != n) fail(fmt::format("expected {} entries, got {}", n, out.size()));
    return out;
  }
  std::vector<std::string> strings() const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < size(); ++i) out.push_back(at(i).string());
    return out;
  }
  Matrix matrix(Eigen::Index rows, Eigen::Index cols) const {
    if (size() != static_cast<std::size_t>(rows)) fail(fmt::format("expected {} rows, got {}", rows, j.size()));
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      const Node row = at(static_cast<std::size_t>(r));
      if (row.size() != static_cast<std::size_t>(cols)) {
        row.fail(fmt::format("expected {} columns, got {}", cols, row.j.size()));
      }
      for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row.at(static_cast<std::size_t>(c)).number();
    }
    return m;
  }

  double number_or(const char* key, double fallback) const { return has(key) ? (*this)[key].number() : fallback; }
  int integer_or(const char* key, int fallback) const { return has(key) ? (*this)[key].integer() : fallback; }
};

json to_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

json to_json(const Matrix& m) {
  json a = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    a.push_back(row);
  }
  return a;
}

// ---- signals ------------------------------------------------------------

Signal parse_signal(const Node& n) {
  n.only({"name", "unit", "min", "max"});
  Signal s;
  s.name = n["name"].string();
  if (n.has("unit")) s.unit = n["unit"].string();
  s.min = n.number_or("min", s.min);
  s.max = n.number_or("max", s.max);
  return s;
}

std::vector<Signal> parse_signals(const Node& parent, const char* key) {
  std::vector<Signal> out;
  if (!parent.has(key)) return out;
  const Node list = parent[key];
  for (std::size_t i = 0; i < list.size(); ++i) out.push_back(parse_signal(list.at(i)));
  return out;
}

json signals_json(const std::vector<Signal>& list) {
  json a = json::array();
  for (const auto& s : list) {
    json o{{"name", s.name}};
    if (!s.unit.empty()) o["unit"] = s.unit;
    if (std::isfinite(s.min)) o["min"] = s.min;
    if (std::isfinite(s.max)) o["max"] = s.max;
    a.push_back(o);
  }
  return a;
}

int signal_index(const Node& n, const std::vector<Signal>& list) {
  const std::string name = n.string();
  for (std::size_t i = 0; i < list.size(); ++i) {
    if (list[i].name == name) return static_cast<int>(i);
  }
  n.fail(fmt::format("unknown output '{}'", name));
}

// ---- models -------------------------------------------------------------

Dims parse_dims(const Node& n) {
  n.only({"nx", "nu", "nv", "nd", "ny", "nw"});
  Dims d;
  int* fields[] = {&d.nx, &d.nu, &d.nv, &d.nd, &d.ny, &d.nw};
  const char* names[] = {"nx", "nu", "nv", "nd", "ny", "nw"};
  for (int i = 0; i < 6; ++i) {
    *fields[i] = n.integer_or(names[i], 0);
    if (*fields[i] < 0) n[names[i]].fail("must be >= 0");
  }
  return d;
}

struct MatrixField {
  const char* key;
  Matrix LinearModelData::*member;
};

constexpr MatrixField kMatrices[] = {
    {"A", &LinearModelData::A},       {"B_u", &LinearModelData::B_u},   {"B_v", &LinearModelData::B_v},
    {"B_d", &LinearModelData::B_d},   {"C_y", &LinearModelData::C_y},   {"D_yu", &LinearModelData::D_yu},
    {"D_yv", &LinearModelData::D_yv}, {"C_w", &LinearModelData::C_w},   {"D_wu", &LinearModelData::D_wu},
    {"D_wv", &LinearModelData::D_wv},
};

struct VectorField {
  const char* key;
  Vector LinearModelData::*member;
};

constexpr VectorField kVectors[] = {
    {"x_op", &LinearModelData::x_op}, {"u_op", &LinearModelData::u_op}, {"v_op", &LinearModelData::v_op},
    {"d_op", &LinearModelData::d_op}, {"y_op", &LinearModelData::y_op}, {"w_op", &LinearModelData::w_op},
};

std::shared_ptr<const Dynamics> parse_model(const Node& n, double Ts) {
  n.only({"type", "dims", "A", "B_u", "B_v", "B_d", "C_y", "D_yu", "D_yv", "C_w", "D_wu", "D_wv",
          "x_op", "u_op", "v_op", "d_op", "y_op", "w_op", "terms"});
  const std::string type = n["type"].string();
  if (type != "linear" && type != "nonlinear") n["type"].fail("expected 'linear' or 'nonlinear'");
  const Dims dims = parse_dims(n["dims"]);
  LinearModelData lin = LinearModelData::zeros(dims, Ts);
  for (const auto& f : kMatrices) {
    if (!n.has(f.key)) continue;
    Matrix& m = lin.*(f.member);
    m = n[f.key].matrix(m.rows(), m.cols());
  }
  for (const auto& f : kVectors) {
    if (!n.has(f.key)) continue;
    Vector& v = lin.*(f.member);
    v = n[f.key].vector(v.size());
  }
  if (type == "linear") {
    if (n.has("terms")) n["terms"].fail("only nonlinear models take terms");
    return std::make_shared<const LinearModel>(std::move(lin));
  }
  NonlinearModelData data{std::move(lin), {}};
  if (n.has("terms")) {
    const Node terms = n["terms"];
    for (std::size_t i = 0; i < terms.size(); ++i) {
      const Node t = terms.at(i);
      t.only({"kind", "target", "row", "coeff", "args"});
      NonlinearTerm term;
      term.kind = t["kind"].string();
      if (!is_registered_term(term.kind)) t["kind"].fail(fmt::format("unknown term kind '{}'", term.kind));
      const std::string target = t["target"].string();
      if (target != "x" && target != "y" && target != "w") t["target"].fail("expected 'x', 'y' or 'w'");
      term.target = target[0];
      term.row = t["row"].integer();
      term.coeff = t["coeff"].number();
      const Node args = t["args"];
      for (std::size_t a = 0; a < args.size(); ++a) term.args.push_back(args.at(a).integer());
      data.terms.push_back(std::move(term));
    }
  }
  return std::make_shared<const NonlinearModel>(std::move(data));
}

json model_json(const Dynamics& model) {
  const LinearModelData* lin = nullptr;
  const NonlinearModel* nl = dynamic_cast<const NonlinearModel*>(&model);
  if (const auto* l = dynamic_cast<const LinearModel*>(&model)) lin = &l->data();
  if (nl) lin = &nl->data().linear;
  if (!lin) throw ConfigError("only linear and nonlinear unit models can be written");
  const Dims& d = model.dims();
  json o;
  o["type"] = nl ? "nonlinear" : "linear";
  o["dims"] = {{"nx", d.nx}, {"nu", d.nu}, {"nv", d.nv}, {"nd", d.nd}, {"ny", d.ny}, {"nw", d.nw}};
  for (const auto& f : kMatrices) {
    const Matrix& m = lin->*(f.member);
    if (m.size() > 0 && !m.isZero(0.0)) o[f.key] = to_json(m);
  }
  for (const auto& f : kVectors) {
    const Vector& v = lin->*(f.member);
    if (v.size() > 0 && !v.isZero(0.0)) o[f.key] = to_json(v);
  }
  if (nl) {
    json terms = json::array();
    for (const auto& t : nl->data().terms) {
      terms.push_back({{"kind", t.kind}, {"target", std::string(1, t.target)}, {"row", t.row},
                       {"coeff", t.coeff}, {"args", t.args}});
    }
    o["terms"] = terms;
  }
  return o;
}

// ---- costs and controllers ----------------------------------------------

LocalCostSpec parse_cost(const Node& n, const PlantUnit& unit) {
  n.only({"terms", "input_weight"});
  LocalCostSpec spec;
  if (n.has("terms")) {
    const Node terms = n["terms"];
    for (std::size_t i = 0; i < terms.size(); ++i) {
      const Node t = terms.at(i);
      t.only({"kind", "outputs", "weight", "target", "bound"});
      CostTerm term;
      const std::string kind = t["kind"].string();
      if (kind == "tracking") {
        term.kind = CostKind::Tracking;
      } else if (kind == "constraint") {
        term.kind = CostKind::ConstraintViolation;
      } else {
        t["kind"].fail("expected 'tracking' or 'constraint'");
      }
      const Node outs = t["outputs"];
      for (std::size_t k = 0; k < outs.size(); ++k) term.outputs.push_back(signal_index(outs.at(k), unit.outputs));
      const auto m = static_cast<Eigen::Index>(term.outputs.size());
      term.weight = t["weight"].vector(m);
      term.target = t[term.kind == CostKind::Tracking ? "target" : "bound"].vector(m);
      spec.terms.push_back(std::move(term));
    }
  }
  if (n.has("input_weight")) spec.input_weight = n["input_weight"].vector(static_cast<Eigen::Index>(unit.inputs.size()));
  return spec;
}

json cost_json(const LocalCostSpec& spec, const PlantUnit& unit) {
  json terms = json::array();
  for (const auto& t : spec.terms) {
    json outs = json::array();
    for (int o : t.outputs) outs.push_back(unit.outputs.at(static_cast<std::size_t>(o)).name);
    const bool track = t.kind == CostKind::Tracking;
    terms.push_back({{"kind", track ? "tracking" : "constraint"}, {"outputs", outs},
                     {"weight", to_json(t.weight)}, {track ? "target" : "bound", to_json(t.target)}});
  }
  json o{{"terms", terms}};
  if (spec.input_weight.size() > 0) o["input_weight"] = to_json(spec.input_weight);
  return o;
}

void parse_controller(const Node& n, PlantUnit& unit, int horizon) {
  n.only({"kind", "tracked_outputs", "q", "r", "max_iterations", "fd_step", "armijo", "backtrack",
          "max_backtracks", "tolerance"});
  const std::string kind = n["kind"].string();
  if (kind == "none") {
    unit.controller = ControllerKind::None;
    return;
  }
  if (kind == "linear_mpc") {
    unit.controller = ControllerKind::LinearMpc;
  } else if (kind == "nmpc") {
    unit.controller = ControllerKind::Nmpc;
  } else {
    n["kind"].fail("expected 'none', 'linear_mpc' or 'nmpc'");
  }
  NmpcConfig& c = unit.controller_config;
  c.mpc.horizon = horizon;
  const Node outs = n["tracked_outputs"];
  for (std::size_t k = 0; k < outs.size(); ++k) c.mpc.tracked_outputs.push_back(signal_index(outs.at(k), unit.outputs));
  c.mpc.q = n["q"].vector(static_cast<Eigen::Index>(c.mpc.tracked_outputs.size()));
  c.mpc.r = n["r"].vector(static_cast<Eigen::Index>(unit.inputs.size()));
  c.max_iterations = n.integer_or("max_iterations", c.max_iterations);
  c.fd_step = n.number_or("fd_step", c.fd_step);
  c.armijo = n.number_or("armijo", c.armijo);
  c.backtrack = n.number_or("backtrack", c.backtrack);
  c.max_backtracks = n.integer_or("max_backtracks", c.max_backtracks);
  c.tolerance = n.number_or("tolerance", c.tolerance);
}

json controller_json(const PlantUnit& unit) {
  if (unit.controller == ControllerKind::None) return {{"kind", "none"}};
  const NmpcConfig& c = unit.controller_config;
  json outs = json::array();
  for (int o : c.mpc.tracked_outputs) outs.push_back(unit.outputs.at(static_cast<std::size_t>(o)).name);
  json o{{"kind", unit.controller == ControllerKind::LinearMpc ? "linear_mpc" : "nmpc"},
         {"tracked_outputs", outs},
         {"q", to_json(c.mpc.q)},
         {"r", to_json(c.mpc.r)}};
  if (unit.controller == ControllerKind::Nmpc) {
    o["max_iterations"] = c.max_iterations;
    o["fd_step"] = c.fd_step;
    o["armijo"] = c.armijo;
    o["backtrack"] = c.backtrack;
    o["max_backtracks"] = c.max_backtracks;
    o["tolerance"] = c.tolerance;
  }
  return o;
}

SetpointGeometry parse_geometry(const Node& n, Eigen::Index k) {
  n.only({"halfwidth", "radius_init", "radius_min", "radius_max"});
  return {n["halfwidth"].vector(k), n["radius_init"].vector(k), n["radius_min"].vector(k),
          n["radius_max"].vector(k)};
}

// ---- plant ----------------------------------------------------------------

PlantUnit parse_unit(const Node& n, double Ts, int horizon) {
  n.only({"name", "inputs", "disturbances", "outputs", "model", "cost", "controller", "setpoint"});
  PlantUnit u;
  u.name = n["name"].string();
  u.inputs = parse_signals(n, "inputs");
  u.disturbances = parse_signals(n, "disturbances");
  u.outputs = parse_signals(n, "outputs");
  u.model = parse_model(n["model"], Ts);
  if (n.has("cost")) u.cost = parse_cost(n["cost"], u);
  if (n.has("controller")) parse_controller(n["controller"], u, horizon);
  if (u.controller != ControllerKind::None) {
    u.setpoint = parse_geometry(n["setpoint"], static_cast<Eigen::Index>(u.controller_config.mpc.tracked_outputs.size()));
  } else if (n.has("setpoint")) {
    n["setpoint"].fail("only controlled units take a set-point geometry");
  }
  return u;
}

int unit_ref(const Node& n, const std::vector<PlantUnit>& units) {
  const std::string name = n.string();
  for (std::size_t i = 0; i < units.size(); ++i) {
    if (units[i].name == name) return static_cast<int>(i) + 1;
  }
  n.fail(fmt::format("unknown unit '{}'", name));
}

PlantSpec parse_plant(const Node& n) {
  n.only({"name", "Ts", "horizon", "units", "edges"});
  PlantSpec p;
  p.name = n["name"].string();
  p.Ts = n["Ts"].number();
  if (!(p.Ts > 0.0)) n["Ts"].fail("must be positive");
  p.horizon = n["horizon"].integer();
  if (p.horizon < 1) n["horizon"].fail("must be >= 1");
  const Node units = n["units"];
  for (std::size_t i = 0; i < units.size(); ++i) p.units.push_back(parse_unit(units.at(i), p.Ts, p.horizon));
  std::set<std::string> names;
  for (std::size_t i = 0; i < p.units.size(); ++i) {
    if (!names.insert(p.units[i].name).second) units.at(i)["name"].fail("duplicate unit name");
  }
  const Node edges = n["edges"];
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const Node e = edges.at(i);
    e.only({"from", "to", "channels", "scale", "dim"});
    UnitEdge edge;
    edge.source = unit_ref(e["from"], p.units);
    edge.dest = unit_ref(e["to"], p.units);
    edge.channels = e["channels"].strings();
    if (e.has("dim") && e["dim"].integer() != static_cast<int>(edge.channels.size())) {
      e["dim"].fail(fmt::format("dimension mismatch: dim {} but {} channels", e["dim"].integer(), edge.channels.size()));
    }
    if (e.has("scale")) {
      const Vector s = e["scale"].vector(static_cast<Eigen::Index>(edge.channels.size()));
      for (Eigen::Index k = 0; k < s.size(); ++k) {
        if (!(s[k] > 0.0)) e["scale"].fail("scales must be positive");
      }
      edge.scale.assign(s.data(), s.data() + s.size());
    } else {
      edge.scale.assign(edge.channels.size(), 1.0);
    }
    p.edges.push_back(std::move(edge));
  }
  return p;
}

json plant_json(const PlantSpec& p) {
  json units = json::array();
  for (const auto& u : p.units) {
    json o{{"name", u.name}};
    if (!u.inputs.empty()) o["inputs"] = signals_json(u.inputs);
    if (!u.disturbances.empty()) o["disturbances"] = signals_json(u.disturbances);
    if (!u.outputs.empty()) o["outputs"] = signals_json(u.outputs);
    o["model"] = model_json(*u.model);
    o["cost"] = cost_json(u.cost, u);
    o["controller"] = controller_json(u);
    if (u.controller != ControllerKind::None) {
      o["setpoint"] = {{"halfwidth", to_json(u.setpoint.halfwidth)},
                       {"radius_init", to_json(u.setpoint.radius_init)},
                       {"radius_min", to_json(u.setpoint.radius_min)},
                       {"radius_max", to_json(u.setpoint.radius_max)}};
    }
    units.push_back(o);
  }
  json edges = json::array();
  for (const auto& e : p.edges) {
    edges.push_back({{"from", p.units.at(static_cast<std::size_t>(e.source - 1)).name},
                     {"to", p.units.at(static_cast<std::size_t>(e.dest - 1)).name},
                     {"dim", e.channels.size()},
                     {"channels", e.channels},
                     {"scale", e.scale}});
  }
  return {{"name", p.name}, {"Ts", p.Ts}, {"horizon", p.horizon}, {"units", units}, {"edges", edges}};
}

// ---- coordinator ------------------------------------------------------------

CoordinatorConfig parse_coordinator(const Node& n) {
  n.only({"eps_max", "sigma_max", "filter", "filter_gain", "kappa", "power_iterations", "power_step",
          "grid_size", "gamma_e", "gamma_c", "threads"});
  CoordinatorConfig c;
  c.fixed_point.eps_max = n.number_or("eps_max", c.fixed_point.eps_max);
  c.fixed_point.sigma_max = n.integer_or("sigma_max", c.fixed_point.sigma_max);
  if (n.has("filter")) {
    const std::string f = n["filter"].string();
    if (f == "identity") {
      c.filter = CoordinatorConfig::FilterMode::Identity;
    } else if (f == "fixed") {
      c.filter = CoordinatorConfig::FilterMode::Fixed;
    } else if (f == "synthesized") {
      c.filter = CoordinatorConfig::FilterMode::Synthesized;
    } else {
      n["filter"].fail("expected 'identity', 'fixed' or 'synthesized'");
    }
  }
  c.filter_gain = n.number_or("filter_gain", c.filter_gain);
  c.kappa = n.number_or("kappa", c.kappa);
  c.power_iterations = n.integer_or("power_iterations", c.power_iterations);
  c.power_step = n.number_or("power_step", c.power_step);
  c.grid_size = n.integer_or("grid_size", c.grid_size);
  c.gamma_e = n.number_or("gamma_e", c.gamma_e);
  c.gamma_c = n.number_or("gamma_c", c.gamma_c);
  c.threads = n.integer_or("threads", c.threads);
  try {
    c.validate();
  } catch (const ConfigError& e) {
    n.fail(e.what());
  }
  return c;
}

json coordinator_json(const CoordinatorConfig& c) {
  const char* filter = c.filter == CoordinatorConfig::FilterMode::Identity ? "identity"
                       : c.filter == CoordinatorConfig::FilterMode::Fixed  ? "fixed"
                                                                           : "synthesized";
  return {{"eps_max", c.fixed_point.eps_max}, {"sigma_max", c.fixed_point.sigma_max},
          {"filter", filter}, {"filter_gain", c.filter_gain}, {"kappa", c.kappa},
          {"power_iterations", c.power_iterations}, {"power_step", c.power_step},
          {"grid_size", c.grid_size}, {"gamma_e", c.gamma_e}, {"gamma_c", c.gamma_c},
          {"threads", c.threads}};
}

bool flat(const json& j) {
  if (!j.is_structured()) return false;
  for (const auto& e : j) {
    if (e.is_structured()) return false;
  }
  return true;
}

// Like dump(2), but arrays and objects holding only scalars stay on one line
// (so matrices print one row per line).
void pretty(const json& j, int indent, std::string& out) {
  const std::string pad(static_cast<std::size_t>(indent + 2), ' ');
  if ((flat(j) && (j.is_array() || j.dump().size() <= 90)) || !j.is_structured() || j.empty()) {
    out += j.dump();
    return;
  }
  const bool obj = j.is_object();
  out += obj ? "{\n" : "[\n";
  bool first = true;
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!first) out += ",\n";
    first = false;
    out += pad;
    if (obj) out += json(it.key()).dump() + ": ";
    pretty(*it, indent + 2, out);
  }
  out += "\n" + std::string(static_cast<std::size_t>(indent), ' ') + (obj ? "}" : "]");
}

std::string pretty(const json& j) {
  std::string out;
  pretty(j, 0, out);
  return out + "\n";
}

json parse_json(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    // nlohmann reports "parse error at line L, column C: ..."
    std::string msg = e.what();
    const auto pos = msg.find("parse error");
    throw ConfigError(fmt::format("{}: {}", origin, pos == std::string::npos ? msg : msg.substr(pos)));
  }
}

std::vector<ScheduleChange> parse_changes(const Node& parent, const char* key) {
  std::vector<ScheduleChange> out;
  if (!parent.has(key)) return out;
  const Node list = parent[key];
  for (std::size_t i = 0; i < list.size(); ++i) {
    const Node c = list.at(i);
    c.only({"step", "signal", "value"});
    out.push_back({c["step"].integer(), c["signal"].string(), c["value"].number()});
  }
  return out;
}

json changes_json(const std::vector<ScheduleChange>& list) {
  json a = json::array();
  for (const auto& c : list) a.push_back({{"step", c.step}, {"signal", c.signal}, {"value", c.value}});
  return a;
}

}  // namespace

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(fmt::format("{}: cannot open file", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

BenchmarkConfig parse_benchmark(const std::string& text, const std::string& origin) {
  const json doc = parse_json(text, origin);
  const Node root{doc, "", origin};
  root.only({"name", "plant", "decomposition", "coordinator"});
  BenchmarkConfig cfg;
  cfg.name = root["name"].string();
  try {
    cfg.plant = parse_plant(root["plant"]);
  } catch (const ConfigError& e) {
    // model constructors report without a path
    const std::string msg = e.what();
    if (msg.rfind(origin, 0) == 0) throw;
    throw ConfigError(fmt::format("{}: plant: {}", origin, msg));
  }
  const Node groups = root["decomposition"];
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const Node members = groups.at(g);
    std::vector<int> group;
    for (std::size_t i = 0; i < members.size(); ++i) group.push_back(unit_ref(members.at(i), cfg.plant.units));
    cfg.decomposition.push_back(std::move(group));
  }
  if (root.has("coordinator")) cfg.coordinator = parse_coordinator(root["coordinator"]);
  return cfg;
}

BenchmarkConfig load_benchmark(const std::filesystem::path& path) {
  return parse_benchmark(read_text(path), path.string());
}

std::string dump_benchmark(const BenchmarkConfig& config) {
  json groups = json::array();
  for (const auto& g : config.decomposition) {
    json names = json::array();
    for (int u : g) names.push_back(config.plant.units.at(static_cast<std::size_t>(u - 1)).name);
    groups.push_back(names);
  }
  json doc{{"name", config.name},
           {"plant", plant_json(config.plant)},
           {"decomposition", groups},
           {"coordinator", coordinator_json(config.coordinator)}};
  return pretty(doc);
}

ValidationReport validate_benchmark(const BenchmarkConfig& config) {
  ValidationReport rep = validate_plant(config.plant);
  if (!rep.ok()) return rep;
  ValidationReport dec = validate_decomposition(config.plant, config.decomposition);
  rep.violations.insert(rep.violations.end(), dec.violations.begin(), dec.violations.end());
  rep.warnings.insert(rep.warnings.end(), dec.warnings.begin(), dec.warnings.end());
  if (rep.ok()) {
    try {
      decompose(config.plant, config.decomposition);
    } catch (const ConfigError& e) {
      rep.violations.push_back(e.what());
    }
  }
  try {
    config.coordinator.validate();
  } catch (const ConfigError& e) {
    rep.violations.push_back(e.what());
  }
  return rep;
}

ScenarioFile parse_scenario(const std::string& text, const std::filesystem::path& base_dir,
                            const std::string& origin) {
  const json doc = parse_json(text, origin);
  const Node root{doc, "", origin};
  root.only({"name", "steps", "transient_end", "setpoints", "bounds", "disturbances", "configs"});
  ScenarioFile out;
  Scenario& s = out.scenario;
  s.name = root["name"].string();
  s.steps = root["steps"].integer();
  s.transient_end = root.integer_or("transient_end", 0);
  s.setpoints = parse_changes(root, "setpoints");
  s.bounds = parse_changes(root, "bounds");
  s.disturbances = parse_changes(root, "disturbances");
  try {
    s.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(fmt::format("{}: {}", origin, e.what()));
  }
  if (root.has("configs")) {
    const Node cfgs = root["configs"].object();
    for (const auto& [k, v] : cfgs.j.items()) {
      const Node n{v, cfgs.sub(k), origin};
      out.configs[k] = base_dir / n.string();
    }
  }
  return out;
}

ScenarioFile load_scenario(const std::filesystem::path& path) {
  return parse_scenario(read_text(path), path.parent_path(), path.string());
}

std::string dump_scenario(const Scenario& s, const std::map<std::string, std::string>& configs) {
  json doc{{"name", s.name}, {"steps", s.steps}, {"transient_end", s.transient_end}};
  if (!s.setpoints.empty()) doc["setpoints"] = changes_json(s.setpoints);
  if (!s.bounds.empty()) doc["bounds"] = changes_json(s.bounds);
  if (!s.disturbances.empty()) doc["disturbances"] = changes_json(s.disturbances);
  if (!configs.empty()) {
    json c = json::object();
    for (const auto& [k, v] : configs) c[k] = v;
    doc["configs"] = c;
  }
  return pretty(doc);
}

}  // namespace hiercoord
