#include "hiercoord/models.hpp"

#include "hiercoord/error.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <fmt/format.h>
#include <functional>

namespace hiercoord {
namespace {

void expect_shape(const Matrix& m, Eigen::Index rows, Eigen::Index cols, const char* name) {
  if (m.rows() != rows || m.cols() != cols) {
    throw ConfigError(fmt::format("matrix {} is {}x{}, expected {}x{}", name, m.rows(),
                                  m.cols(), rows, cols));
  }
}

void expect_len(const Vector& v, Eigen::Index n, const char* name) {
  if (v.size() != n) {
    throw ConfigError(fmt::format("vector {} has length {}, expected {}", name, v.size(), n));
  }
}

}  // namespace

LinearModelData LinearModelData::zeros(const Dims& d, double Ts) {
  LinearModelData m;
  m.A = Matrix::Zero(d.nx, d.nx);
  m.B_u = Matrix::Zero(d.nx, d.nu);
  m.B_v = Matrix::Zero(d.nx, d.nv);
  m.B_d = Matrix::Zero(d.nx, d.nd);
  m.C_y = Matrix::Zero(d.ny, d.nx);
  m.D_yu = Matrix::Zero(d.ny, d.nu);
  m.D_yv = Matrix::Zero(d.ny, d.nv);
  m.C_w = Matrix::Zero(d.nw, d.nx);
  m.D_wu = Matrix::Zero(d.nw, d.nu);
  m.D_wv = Matrix::Zero(d.nw, d.nv);
  m.x_op = Vector::Zero(d.nx);
  m.u_op = Vector::Zero(d.nu);
  m.v_op = Vector::Zero(d.nv);
  m.d_op = Vector::Zero(d.nd);
  m.y_op = Vector::Zero(d.ny);
  m.w_op = Vector::Zero(d.nw);
  m.Ts = Ts;
  return m;
}

LinearModel::LinearModel(LinearModelData data) : data_(std::move(data)) {
  auto& m = data_;
  dims_.nx = static_cast<int>(m.A.rows());
  dims_.nu = static_cast<int>(m.B_u.cols());
  dims_.nv = static_cast<int>(m.B_v.cols());
  dims_.nd = static_cast<int>(m.B_d.cols());
  dims_.ny = static_cast<int>(m.C_y.rows());
  dims_.nw = static_cast<int>(m.C_w.rows());
  const auto& d = dims_;
  expect_shape(m.A, d.nx, d.nx, "A");
  expect_shape(m.B_u, d.nx, d.nu, "B_u");
  expect_shape(m.B_v, d.nx, d.nv, "B_v");
  expect_shape(m.B_d, d.nx, d.nd, "B_d");
  expect_shape(m.C_y, d.ny, d.nx, "C_y");
  expect_shape(m.D_yu, d.ny, d.nu, "D_yu");
  expect_shape(m.D_yv, d.ny, d.nv, "D_yv");
  expect_shape(m.C_w, d.nw, d.nx, "C_w");
  expect_shape(m.D_wu, d.nw, d.nu, "D_wu");
  expect_shape(m.D_wv, d.nw, d.nv, "D_wv");
  expect_len(m.x_op, d.nx, "x_op");
  expect_len(m.u_op, d.nu, "u_op");
  expect_len(m.v_op, d.nv, "v_op");
  expect_len(m.d_op, d.nd, "d_op");
  expect_len(m.y_op, d.ny, "y_op");
  expect_len(m.w_op, d.nw, "w_op");
  if (!(m.Ts > 0.0)) throw ConfigError("sampling period Ts must be positive");

  op_ = {m.x_op, m.u_op, m.v_op, m.d_op, m.y_op, m.w_op};
  feedthrough_ = m.D_wv.size() > 0 && m.D_wv.cwiseAbs().maxCoeff() > 0.0;
  if (d.nx > 0) {
    spectral_radius_ = m.A.eigenvalues().cwiseAbs().maxCoeff();
  }
}

void LinearModel::outputs(const VectorRef& x, const VectorRef& u, const VectorRef& v,
                          const VectorRef& /*d*/, Vector& y, Vector& w) const {
  const auto& m = data_;
  y = m.y_op;
  w = m.w_op;
  if (dims_.nx > 0) {
    const Vector dx = x - m.x_op;
    y.noalias() += m.C_y * dx;
    w.noalias() += m.C_w * dx;
  }
  if (dims_.nu > 0) {
    const Vector du = u - m.u_op;
    y.noalias() += m.D_yu * du;
    w.noalias() += m.D_wu * du;
  }
  if (dims_.nv > 0) {
    const Vector dv = v - m.v_op;
    y.noalias() += m.D_yv * dv;
    w.noalias() += m.D_wv * dv;
  }
}

void LinearModel::step(const VectorRef& x, const VectorRef& u, const VectorRef& v,
                       const VectorRef& d, Vector& x_next) const {
  const auto& m = data_;
  x_next = m.x_op;
  if (dims_.nx == 0) return;
  x_next.noalias() += m.A * (x - m.x_op);
  if (dims_.nu > 0) x_next.noalias() += m.B_u * (u - m.u_op);
  if (dims_.nv > 0) x_next.noalias() += m.B_v * (v - m.v_op);
  if (dims_.nd > 0) x_next.noalias() += m.B_d * (d - m.d_op);
}

bool is_registered_term(const std::string& kind) {
  return kind == "sqrt_flow" || kind == "bilinear";
}

double eval_term(const std::string& kind, double a, double b) {
  if (kind == "sqrt_flow") {
    const double s = (a > 0.0) ? 1.0 : (a < 0.0 ? -1.0 : 0.0);
    return s * std::sqrt(std::abs(a * b));
  }
  if (kind == "bilinear") return a * b;
  throw ConfigError("unknown nonlinear term '" + kind + "'");
}

NonlinearModel::NonlinearModel(NonlinearModelData data)
    : data_(std::move(data)), linear_(data_.linear) {
  const Dims& d = linear_.dims();
  const int nz = d.nx + d.nu + d.nv + d.nd;
  const auto& op = linear_.operating_point();
  for (const auto& t : data_.terms) {
    if (!is_registered_term(t.kind)) {
      throw ConfigError("unknown nonlinear term '" + t.kind + "'");
    }
    if (t.args.size() != 2) {
      throw ConfigError(fmt::format("term '{}' takes 2 arguments, got {}", t.kind, t.args.size()));
    }
    for (int a : t.args) {
      if (a < 0 || a >= nz) {
        throw ConfigError(fmt::format("term '{}' argument {} outside [0,{})", t.kind, a, nz));
      }
    }
    const int rows = t.target == 'x' ? d.nx : t.target == 'y' ? d.ny : t.target == 'w' ? d.nw : -1;
    if (rows < 0) throw ConfigError(fmt::format("term target '{}' must be x, y or w", t.target));
    if (t.row < 0 || t.row >= rows) {
      throw ConfigError(fmt::format("term '{}' row {} outside target '{}'", t.kind, t.row, t.target));
    }
    term_op_.push_back(term_value(t, op.x, op.u, op.v, op.d));
    if (t.target == 'w' && t.coeff != 0.0) {
      for (int a : t.args) {
        if (a >= d.nx + d.nu && a < d.nx + d.nu + d.nv) feedthrough_ = true;
      }
    }
  }
  feedthrough_ = feedthrough_ || linear_.has_coupling_feedthrough();
}

double NonlinearModel::term_value(const NonlinearTerm& t, const VectorRef& x, const VectorRef& u,
                                  const VectorRef& v, const VectorRef& d) const {
  const Dims& dm = linear_.dims();
  auto pick = [&](int i) -> double {
    if (i < dm.nx) return x[i];
    i -= dm.nx;
    if (i < dm.nu) return u[i];
    i -= dm.nu;
    if (i < dm.nv) return v[i];
    return d[i - dm.nv];
  };
  return eval_term(t.kind, pick(t.args[0]), pick(t.args[1]));
}

void NonlinearModel::outputs(const VectorRef& x, const VectorRef& u, const VectorRef& v,
                             const VectorRef& d, Vector& y, Vector& w) const {
  linear_.outputs(x, u, v, d, y, w);
  for (std::size_t i = 0; i < data_.terms.size(); ++i) {
    const auto& t = data_.terms[i];
    if (t.target == 'x') continue;
    const double delta = t.coeff * (term_value(t, x, u, v, d) - term_op_[i]);
    (t.target == 'y' ? y : w)[t.row] += delta;
  }
}

void NonlinearModel::step(const VectorRef& x, const VectorRef& u, const VectorRef& v,
                          const VectorRef& d, Vector& x_next) const {
  linear_.step(x, u, v, d, x_next);
  for (std::size_t i = 0; i < data_.terms.size(); ++i) {
    const auto& t = data_.terms[i];
    if (t.target != 'x') continue;
    x_next[t.row] += t.coeff * (term_value(t, x, u, v, d) - term_op_[i]);
  }
}

CompositeModel::CompositeModel(std::vector<std::shared_ptr<const Dynamics>> components,
                               CompositeWiring wiring, int external_inputs)
    : components_(std::move(components)), wiring_(std::move(wiring)) {
  const std::size_t n = components_.size();
  if (n == 0) throw ConfigError("composite without components");
  if (wiring_.inputs.size() != n) throw ConfigError("composite wiring: one input map per component");

  Dims at;
  for (std::size_t c = 0; c < n; ++c) {
    const Dims& cd = components_[c]->dims();
    offsets_.push_back(at);
    at.nx += cd.nx;
    at.nu += cd.nu;
    at.nd += cd.nd;
    at.ny += cd.ny;
    if (static_cast<int>(wiring_.inputs[c].size()) != cd.nv) {
      throw ConfigError(fmt::format("composite wiring: component {} has {} inputs, {} wired", c,
                                    cd.nv, wiring_.inputs[c].size()));
    }
  }
  dims_ = at;
  dims_.nv = external_inputs;
  dims_.nw = static_cast<int>(wiring_.outputs.size());

  op_.x = Vector(dims_.nx);
  op_.u = Vector(dims_.nu);
  op_.d = Vector(dims_.nd);
  op_.y = Vector(dims_.ny);
  op_.v = Vector::Zero(dims_.nv);
  op_.w = Vector(dims_.nw);
  std::vector<bool> external_seen(static_cast<std::size_t>(external_inputs), false);
  for (std::size_t c = 0; c < n; ++c) {
    const Dims& cd = components_[c]->dims();
    const auto& cop = components_[c]->operating_point();
    op_.x.segment(offsets_[c].nx, cd.nx) = cop.x;
    op_.u.segment(offsets_[c].nu, cd.nu) = cop.u;
    op_.d.segment(offsets_[c].nd, cd.nd) = cop.d;
    op_.y.segment(offsets_[c].ny, cd.ny) = cop.y;
    for (int j = 0; j < cd.nv; ++j) {
      const WireSource& src = wiring_.inputs[c][static_cast<std::size_t>(j)];
      if (src.kind == WireSource::Kind::External) {
        if (src.index < 0 || src.index >= external_inputs) {
          throw ConfigError("composite wiring: external index out of range");
        }
        op_.v[src.index] = cop.v[j];
        external_seen[static_cast<std::size_t>(src.index)] = true;
      } else {
        if (src.component < 0 || static_cast<std::size_t>(src.component) >= n ||
            static_cast<std::size_t>(src.component) == c) {
          throw ConfigError("composite wiring: bad internal source component");
        }
        if (src.index < 0 || src.index >= components_[static_cast<std::size_t>(src.component)]->dims().nw) {
          throw ConfigError("composite wiring: internal source index out of range");
        }
      }
    }
  }
  for (bool seen : external_seen) {
    if (!seen) throw ConfigError("composite wiring: unused external input");
  }
  for (std::size_t i = 0; i < wiring_.outputs.size(); ++i) {
    const auto [c, j] = wiring_.outputs[i];
    if (c < 0 || static_cast<std::size_t>(c) >= n || j < 0 ||
        j >= components_[static_cast<std::size_t>(c)]->dims().nw) {
      throw ConfigError("composite wiring: output source out of range");
    }
    op_.w[static_cast<Eigen::Index>(i)] =
        components_[static_cast<std::size_t>(c)]->operating_point().w[j];
  }

  // Components without feedthrough first; the rest in dependency order.
  std::vector<int> state(n, 0);
  for (std::size_t c = 0; c < n; ++c) {
    if (!components_[c]->has_coupling_feedthrough()) {
      order_.push_back(c);
      state[c] = 2;
    }
  }
  std::function<void(std::size_t)> visit = [&](std::size_t c) {
    if (state[c] == 2) return;
    if (state[c] == 1) throw ConfigError("composite wiring: algebraic loop through feedthrough components");
    state[c] = 1;
    for (const auto& src : wiring_.inputs[c]) {
      if (src.kind == WireSource::Kind::Internal) visit(static_cast<std::size_t>(src.component));
    }
    state[c] = 2;
    order_.push_back(c);
  };
  for (std::size_t c = 0; c < n; ++c) visit(c);

  for (const auto& [c, j] : wiring_.outputs) {
    (void)j;
    const auto& comp = *components_[static_cast<std::size_t>(c)];
    if (!comp.has_coupling_feedthrough()) continue;
    // Conservative: any feedthrough component driven (directly) from outside
    // makes the composite feed through as well.
    for (const auto& src : wiring_.inputs[static_cast<std::size_t>(c)]) {
      if (src.kind == WireSource::Kind::External) feedthrough_ = true;
    }
  }
  if (!feedthrough_) {
    // Indirect paths: external -> feedthrough chain -> output.
    std::vector<bool> touched(n, false);
    for (std::size_t c : order_) {
      if (!components_[c]->has_coupling_feedthrough()) continue;
      for (const auto& src : wiring_.inputs[c]) {
        if (src.kind == WireSource::Kind::External ||
            touched[static_cast<std::size_t>(src.component)]) {
          touched[c] = true;
        }
      }
    }
    for (const auto& [c, j] : wiring_.outputs) {
      (void)j;
      if (touched[static_cast<std::size_t>(c)]) feedthrough_ = true;
    }
  }
}

void CompositeModel::resolve(const VectorRef& x, const VectorRef& u, const VectorRef& v,
                             const VectorRef& d, std::vector<ComponentSignals>& sig) const {
  const std::size_t n = components_.size();
  sig.resize(n);
  auto assemble = [&](std::size_t c) {
    const auto& in = wiring_.inputs[c];
    Vector& vc = sig[c].v;
    vc.resize(static_cast<Eigen::Index>(in.size()));
    for (std::size_t j = 0; j < in.size(); ++j) {
      const auto& src = in[j];
      vc[static_cast<Eigen::Index>(j)] = src.kind == WireSource::Kind::External
                                             ? v[src.index]
                                             : sig[static_cast<std::size_t>(src.component)].w[src.index];
    }
  };
  for (std::size_t c : order_) {
    const Dims& cd = components_[c]->dims();
    const Dims& o = offsets_[c];
    if (components_[c]->has_coupling_feedthrough()) {
      assemble(c);
      components_[c]->outputs(x.segment(o.nx, cd.nx), u.segment(o.nu, cd.nu), sig[c].v,
                              d.segment(o.nd, cd.nd), sig[c].y, sig[c].w);
    } else {
      components_[c]->outputs(x.segment(o.nx, cd.nx), u.segment(o.nu, cd.nu),
                              components_[c]->operating_point().v, d.segment(o.nd, cd.nd),
                              sig[c].y, sig[c].w);
    }
  }
  // All outgoing couplings are now final; complete the inputs and the
  // regulated outputs of components evaluated with placeholder inputs.
  for (std::size_t c = 0; c < n; ++c) {
    if (components_[c]->has_coupling_feedthrough()) continue;
    assemble(c);
    const Dims& cd = components_[c]->dims();
    const Dims& o = offsets_[c];
    components_[c]->outputs(x.segment(o.nx, cd.nx), u.segment(o.nu, cd.nu), sig[c].v,
                            d.segment(o.nd, cd.nd), sig[c].y, sig[c].w);
  }
}

void CompositeModel::evaluate_components(const VectorRef& x, const VectorRef& u,
                                         const VectorRef& v, const VectorRef& d,
                                         std::vector<ComponentSignals>& sig,
                                         Vector& x_next) const {
  resolve(x, u, v, d, sig);
  x_next.resize(dims_.nx);
  Vector xc;
  for (std::size_t c = 0; c < components_.size(); ++c) {
    const Dims& cd = components_[c]->dims();
    const Dims& o = offsets_[c];
    components_[c]->step(x.segment(o.nx, cd.nx), u.segment(o.nu, cd.nu), sig[c].v,
                         d.segment(o.nd, cd.nd), xc);
    x_next.segment(o.nx, cd.nx) = xc;
  }
}

void CompositeModel::outputs(const VectorRef& x, const VectorRef& u, const VectorRef& v,
                             const VectorRef& d, Vector& y, Vector& w) const {
  thread_local std::vector<ComponentSignals> sig;
  resolve(x, u, v, d, sig);
  y.resize(dims_.ny);
  w.resize(dims_.nw);
  for (std::size_t c = 0; c < components_.size(); ++c) {
    y.segment(offsets_[c].ny, components_[c]->dims().ny) = sig[c].y;
  }
  for (std::size_t i = 0; i < wiring_.outputs.size(); ++i) {
    const auto [c, j] = wiring_.outputs[i];
    w[static_cast<Eigen::Index>(i)] = sig[static_cast<std::size_t>(c)].w[j];
  }
}

void CompositeModel::step(const VectorRef& x, const VectorRef& u, const VectorRef& v,
                          const VectorRef& d, Vector& x_next) const {
  thread_local std::vector<ComponentSignals> sig;
  evaluate_components(x, u, v, d, sig, x_next);
}

void CompositeModel::evaluate(const VectorRef& x, const VectorRef& u, const VectorRef& v,
                              const VectorRef& d, Vector& y, Vector& w, Vector& x_next) const {
  thread_local std::vector<ComponentSignals> sig;
  evaluate_components(x, u, v, d, sig, x_next);
  y.resize(dims_.ny);
  w.resize(dims_.nw);
  for (std::size_t c = 0; c < components_.size(); ++c) {
    y.segment(offsets_[c].ny, components_[c]->dims().ny) = sig[c].y;
  }
  for (std::size_t i = 0; i < wiring_.outputs.size(); ++i) {
    const auto [c, j] = wiring_.outputs[i];
    w[static_cast<Eigen::Index>(i)] = sig[static_cast<std::size_t>(c)].w[j];
  }
}

SimulationResult simulate_profile(const Dynamics& model, const Vector& x0, const Profile& u,
                                  const Profile& v_in, const Vector& d) {
  const Dims& dm = model.dims();
  const int n = v_in.horizon() > 0 ? v_in.horizon() : u.horizon();
  if (x0.size() != dm.nx) {
    throw std::invalid_argument(fmt::format("x0 has length {}, model expects {}", x0.size(), dm.nx));
  }
  if (d.size() != dm.nd) {
    throw std::invalid_argument(fmt::format("disturbance has length {}, model expects {}", d.size(), dm.nd));
  }
  if (v_in.dim() != dm.nv || (dm.nv > 0 && v_in.horizon() != n)) {
    throw std::invalid_argument(fmt::format("coupling profile dim {} does not match model nv {}",
                                            v_in.dim(), dm.nv));
  }
  if (u.dim() != dm.nu || (dm.nu > 0 && u.horizon() != n)) {
    throw std::invalid_argument(fmt::format("input profile dim {} does not match model nu {}",
                                            u.dim(), dm.nu));
  }
  if (!x0.allFinite()) throw SimulationError("numerical blow-up at step 0 (initial state)", 0);

  SimulationResult out{Profile(dm.ny, n), Profile(dm.nw, n), x0};
  Vector x = x0;
  Vector x_next, y, w;
  const Vector empty;
  for (int k = 0; k < n; ++k) {
    const Vector uk = dm.nu > 0 ? Vector(u.step(k)) : empty;
    const Vector vk = dm.nv > 0 ? Vector(v_in.step(k)) : empty;
    model.evaluate(x, uk, vk, d, y, w, x_next);
    if (!x_next.allFinite() || !y.allFinite() || !w.allFinite()) {
      throw SimulationError(fmt::format("numerical blow-up at step {}", k), k);
    }
    out.y.step(k) = y;
    out.w.step(k) = w;
    x.swap(x_next);
  }
  out.x_final = x;
  return out;
}

}  // namespace hiercoord
