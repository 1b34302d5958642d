#include "hiercoord/coordinator.hpp"

#include "hiercoord/error.hpp"
#include "hiercoord/kernels.hpp"
#include "hiercoord/log.hpp"

#include <cmath>
#include <fmt/format.h>

namespace hiercoord {

void FixedPointConfig::validate() const {
  if (!(eps_max > 0.0)) throw ConfigError("eps_max must be positive");
  if (sigma_max < 1) throw ConfigError("sigma_max must be >= 1");
}

Vector filter_step(const Vector& prev, const Vector& hat, const Vector& pi) {
  if (prev.size() != hat.size() || prev.size() != pi.size()) {
    throw std::invalid_argument("filter_step: length mismatch");
  }
  Vector out(prev.size());
  kernels::active().blend(prev.data(), hat.data(), pi.data(), out.data(),
                          static_cast<std::size_t>(prev.size()));
  return out;
}

Vector filter_step(const Vector& prev, const Vector& hat, double pi) {
  return filter_step(prev, hat, Vector::Constant(prev.size(), pi));
}

double scaled_norm(const Vector& d, const Vector& weights) {
  if (d.size() != weights.size()) throw std::invalid_argument("scaled_norm: length mismatch");
  if (d.size() == 0) return 0.0;
  const Vector zero = Vector::Zero(d.size());
  const double s = kernels::active().weighted_sq_diff(d.data(), zero.data(), weights.data(),
                                                      static_cast<std::size_t>(d.size()));
  return std::sqrt(s / static_cast<double>(d.size()));
}

FixedPointResult fixed_point_solve(const CouplingMap& map, const Vector& r, const Vector& v0,
                                   const Vector& pi, const FixedPointConfig& config) {
  config.validate();
  const auto len = static_cast<Eigen::Index>(map.length());
  if (v0.size() != len || pi.size() != len) {
    throw std::invalid_argument("fixed_point_solve: initial guess or filter length mismatch");
  }
  const Vector w = map.weights();
  FixedPointResult res;
  Vector v = v0;
  while (true) {
    RoundOutput out = map.round(r, v);
    res.nmpc_ms += out.nmpc_ms;
    res.budget_hits += out.budget_hits;
    Vector next = filter_step(v, out.v_in_hat, pi);
    const double eps = scaled_norm(next - v, w);
    if (!std::isfinite(eps)) {
      v = std::move(next);
      ++res.iterations;
      res.residuals.push_back(eps);
      break;
    }
    v = std::move(next);
    ++res.iterations;
    res.residuals.push_back(eps);
    if (eps <= config.eps_max) {
      res.converged = true;
      break;
    }
    if (res.iterations >= config.sigma_max) break;
  }

  if (!v.allFinite()) {
    // Diverged to overflow: report the cost as untrusted infinity.
    res.v_in_star = std::move(v);
    res.J_c = std::numeric_limits<double>::infinity();
    res.coherence_residual = std::numeric_limits<double>::infinity();
    return res;
  }
  RoundOutput fin = map.round(r, v);
  res.nmpc_ms += fin.nmpc_ms;
  res.budget_hits += fin.budget_hits;
  res.coherence_residual = scaled_norm(v - fin.v_in_hat, w);
  res.costs = fin.costs;
  res.J_c = 0.0;
  for (double c : fin.costs) res.J_c += c;
  res.v_in_star = std::move(v);
  res.final_round = std::move(fin);
  return res;
}

double estimate_map_gain(const CouplingMap& map, const Vector& r, const Vector& v,
                         int iterations, double step) {
  const auto len = static_cast<Eigen::Index>(map.length());
  if (len == 0) return 0.0;
  if (iterations < 1 || !(step > 0.0)) throw std::invalid_argument("estimate_map_gain: bad parameters");
  // Work in scaled coordinates so every channel counts alike.
  const Vector sqrt_w = map.weights().cwiseSqrt();
  const Vector scale = sqrt_w.cwiseInverse();
  const Vector base = map.round(r, v).v_in_hat;

  Vector d(len);
  for (Eigen::Index i = 0; i < len; ++i) {
    d[i] = (i % 2 == 0 ? 1.0 : -1.0) * (1.0 + static_cast<double>(i % 7) / 7.0);
  }
  d.normalize();
  double log_sum = 0.0;
  for (int it = 0; it < iterations; ++it) {
    const Vector probe = v + step * scale.cwiseProduct(d);
    const Vector jd = (map.round(r, probe).v_in_hat - base).cwiseProduct(sqrt_w) / step;
    const double g = jd.norm();
    if (!std::isfinite(g)) throw SolverError("map gain estimate is not finite");
    if (g == 0.0) return 0.0;
    log_sum += std::log(g);
    d = jd / g;
  }
  return std::exp(log_sum / iterations);
}

double synthesize_filter(double rho_hat, double kappa) {
  if (!std::isfinite(rho_hat) || rho_hat < 0.0) {
    throw SolverError(fmt::format("cannot synthesize filter from gain {}", rho_hat));
  }
  if (!(kappa > 0.0)) throw std::invalid_argument("filter kappa must be positive");
  return std::min(1.0, kappa / (1.0 + rho_hat));
}

Network::Network(Topology topology, std::vector<std::shared_ptr<const Subsystem>> subsystems)
    : topology_(std::move(topology)),
      routing_(build_routing(topology_)),
      subsystems_(std::move(subsystems)) {
  if (static_cast<int>(subsystems_.size()) != topology_.size()) {
    throw ConfigError(fmt::format("topology declares {} subsystems, {} models given",
                                  topology_.size(), subsystems_.size()));
  }
  for (SubsystemId s : topology_.all()) {
    const auto& sub = subsystems_[static_cast<std::size_t>(s.index - 1)];
    if (!sub) throw ConfigError(fmt::format("subsystem {} missing", s.index));
    const Dims& dm = sub->model().dims();
    if (dm.nv != topology_.in_dim(s)) {
      throw ConfigError(fmt::format("subsystem {}: model has {} incoming channels, topology {}",
                                    sub->name(), dm.nv, topology_.in_dim(s)));
    }
    if (dm.nw != topology_.out_dim(s)) {
      throw ConfigError(fmt::format("subsystem {}: model has {} outgoing channels, topology {}",
                                    sub->name(), dm.nw, topology_.out_dim(s)));
    }
    if (sub->controlled() != topology_.is_controlled(s)) {
      throw ConfigError(fmt::format("subsystem {}: controlled flag disagrees with topology", sub->name()));
    }
    const std::size_t k = static_cast<std::size_t>(sub->setpoint_dim());
    setpoint_blocks_.push_back({static_cast<std::size_t>(setpoint_dim_), k});
    setpoint_dim_ += static_cast<int>(k);
  }
  weights_ = in_stack_weights(topology_, routing_);
}

Profile Network::gather_in(SubsystemId s, const Vector& in_stack) const {
  const int n = topology_.horizon();
  const int nv = topology_.in_dim(s);
  Profile p(nv, n);
  int col = 0;
  for (std::size_t e : topology_.stack_in(s)) {
    const int dim = topology_.edges()[e].dim;
    const auto off = static_cast<Eigen::Index>(routing_.edge_in[e].offset);
    for (int k = 0; k < n; ++k) {
      p.step(k).segment(col, dim) = in_stack.segment(off + static_cast<Eigen::Index>(k) * dim, dim);
    }
    col += dim;
  }
  return p;
}

void Network::scatter_out(SubsystemId s, const Profile& w, Vector& out_stack) const {
  const int n = topology_.horizon();
  int col = 0;
  for (std::size_t e : topology_.stack_out(s)) {
    const int dim = topology_.edges()[e].dim;
    const auto off = static_cast<Eigen::Index>(routing_.edge_out[e].offset);
    for (int k = 0; k < n; ++k) {
      out_stack.segment(off + static_cast<Eigen::Index>(k) * dim, dim) = w.step(k).segment(col, dim);
    }
    col += dim;
  }
}

Vector Network::nominal_in() const {
  Vector out(static_cast<Eigen::Index>(routing_.length));
  for (SubsystemId s : topology_.all()) {
    const auto& op = subsystem(s).model().operating_point();
    scatter_out(s, Profile::constant(op.w, topology_.horizon()), out);
  }
  return routing_.global.apply(out);
}

Vector Network::shift_in(const Vector& in_stack) const {
  if (static_cast<std::size_t>(in_stack.size()) != routing_.length) {
    throw std::invalid_argument("shift_in: length mismatch");
  }
  Vector out = in_stack;
  const int n = topology_.horizon();
  const auto edges = topology_.edges();
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const int dim = edges[e].dim;
    const auto off = static_cast<Eigen::Index>(routing_.edge_in[e].offset);
    for (int k = 0; k + 1 < n; ++k) {
      out.segment(off + static_cast<Eigen::Index>(k) * dim, dim) =
          in_stack.segment(off + static_cast<Eigen::Index>(k + 1) * dim, dim);
    }
  }
  return out;
}

NetworkMap::NetworkMap(const Network& network, const PeriodContext& period)
    : network_(network), period_(period) {
  const auto n = static_cast<std::size_t>(network_.size());
  if (period_.states.size() != n || period_.costs.size() != n) {
    throw std::invalid_argument("period context does not cover every subsystem");
  }
}

RoundOutput NetworkMap::round(const Vector& r, const Vector& v_in) const {
  if (r.size() != network_.setpoint_dim()) throw std::invalid_argument("set-point dimension mismatch");
  if (static_cast<std::size_t>(v_in.size()) != network_.stack_length()) {
    throw std::invalid_argument("coupling stack length mismatch");
  }
  RoundOutput out;
  Vector v_out = Vector::Zero(v_in.size());
  for (SubsystemId s : network_.topology().all()) {
    const auto i = static_cast<std::size_t>(s.index - 1);
    const Subsystem& sub = network_.subsystem(s);
    std::optional<Vector> rs;
    if (sub.controlled()) {
      const Block b = network_.setpoint_block(s);
      rs = r.segment(static_cast<Eigen::Index>(b.offset), static_cast<Eigen::Index>(b.length));
    }
    Response resp;
    try {
      resp = sub.respond(period_.states[i], period_.costs[i], rs, network_.gather_in(s, v_in));
    } catch (const SimulationError& e) {
      throw SimulationError(fmt::format("subsystem {}: {}", sub.name(), e.what()), e.step());
    }
    network_.scatter_out(s, resp.v_out, v_out);
    out.costs.push_back(resp.cost);
    if (sub.controller() == ControllerKind::Nmpc) out.nmpc_ms += resp.walltime_ms;
    if (resp.budget_exhausted) ++out.budget_hits;
    out.responses.push_back(std::move(resp));
  }
  out.v_in_hat = network_.routing().global.apply(v_out);
  nmpc_ns_.fetch_add(static_cast<std::int64_t>(out.nmpc_ms * 1e6));
  return out;
}

}  // namespace hiercoord
