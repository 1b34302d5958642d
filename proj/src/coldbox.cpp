#include "hiercoord/coldbox.hpp"

#include <cmath>

namespace hiercoord {
namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

constexpr double kTs = 5.0;
constexpr int kHorizon = 12;

// Bath level (%) and 4 K pot temperature (K); heater NCR22a and valve CV155.
PlantUnit jt_unit() {
  LinearModelData m = LinearModelData::zeros({2, 2, 3, 1, 2, 3}, kTs);
  m.A << 0.985, 0.0,
         0.0, 0.9;
  m.B_u << -0.006, 0.0075,
            0.003, -0.002;
  // incoming from NEF2: T_H, P_H, P_C
  m.B_v << -0.3, 0.05, 0.0,
            0.02, 0.0, 0.0;
  m.B_d << -0.006,
            0.003;
  m.C_y.setIdentity();
  // outgoing to NEF2: M_H, M_C, T_C
  m.C_w << 0.0, 0.0,
           0.0, 0.0,
           0.0, 0.5;
  m.D_wu << 0.0, 0.00025,
            0.0001, 0.0002,
            0.0, 0.0;
  m.x_op = vec({60.5, 4.6});
  m.u_op = vec({20.0, 40.0});
  m.v_op = vec({6.0, 15.0, 1.2});
  m.d_op = vec({10.0});
  m.y_op = vec({60.5, 4.6});
  m.w_op = vec({0.035, 0.03, 4.4});

  PlantUnit u;
  u.name = "JT";
  u.inputs = {{"NCR22a", "W", 0.0, 55.0}, {"CV155", "%", 0.0, 100.0}};
  u.disturbances = {{"NCR22w", "W"}};
  u.outputs = {{"Ltb131", "%"}, {"Ttb108", "K"}};
  u.model = std::make_shared<const LinearModel>(m);
  u.cost = LocalCostSpec::tracking({0, 1}, vec({1e4, 1e4}), vec({60.5, 4.6}), vec({0.0, 0.0}));
  u.controller = ControllerKind::LinearMpc;
  u.controller_config.mpc.horizon = kHorizon;
  u.controller_config.mpc.tracked_outputs = {0, 1};
  u.controller_config.mpc.q = vec({1.0, 100.0});
  u.controller_config.mpc.r = vec({0.01, 0.01});
  u.setpoint = {vec({3.0, 0.5}), vec({0.5, 0.05}), vec({1e-6, 1e-6}), vec({2.0, 0.5})};
  return u;
}

// Lower heat exchanger: wall temperature and hot-stream hold-up.
PlantUnit nef2_unit() {
  LinearModelData m = LinearModelData::zeros({2, 0, 8, 0, 0, 7}, kTs);
  m.A << 0.85, 0.0,
         0.0, 0.6;
  // incoming: JT (M_H, M_C, T_C), NEF34 (T_H, P_H, P_C), T1 (M_C, T_C)
  m.B_v << 0.0, 0.0, 0.05, 0.05, 0.0, 0.0, 0.0, 0.03,
           0.4, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0;
  // outgoing: JT (T_H, P_H, P_C), NEF34 (M_H, M_C, T_C), T1 (P_C)
  m.C_w << 0.9, 0.0,
           0.05, 0.0,
           0.01, 0.0,
           0.0, 1.0,
           0.0, 1.0,
           0.7, 0.0,
           0.01, 0.0;
  m.v_op = vec({0.035, 0.03, 4.4, 14.0, 15.0, 1.2, 0.0345, 9.5});
  m.w_op = vec({6.0, 15.0, 1.2, 0.035, 0.0645, 5.0, 1.2});

  PlantUnit u;
  u.name = "NEF2";
  u.model = std::make_shared<const LinearModel>(m);
  u.cost = LocalCostSpec::zero();
  return u;
}

// Upper heat exchangers: wall temperature and high-pressure line; the flow
// delivered to the turbine stage M_out is measured here.
PlantUnit nef34_unit() {
  LinearModelData m = LinearModelData::zeros({2, 0, 4, 0, 1, 5}, kTs);
  m.A << 0.85, 0.0,
         0.0, 0.7;
  // incoming: NEF2 (M_H, M_C, T_C), T1 (M_H)
  m.B_v << 0.0, 0.0, 0.1, 0.0,
           -6.0, 0.0, 0.0, -6.0;
  m.D_yv << 1.0, 0.0, 0.0, 1.0;
  // outgoing: NEF2 (T_H, P_H, P_C), T1 (T_H, P_H)
  m.C_w << 0.9, 0.0,
           0.0, 1.0,
           0.0, 0.1,
           0.9, 0.0,
           0.0, 1.0;
  m.v_op = vec({0.035, 0.0645, 5.0, 0.0345});
  m.y_op = vec({0.0695});
  m.w_op = vec({14.0, 15.0, 1.2, 14.0, 15.0});

  PlantUnit u;
  u.name = "NEF34";
  u.outputs = {{"M_out", "kg/s"}};
  u.model = std::make_shared<const LinearModel>(m);
  u.cost = LocalCostSpec::constraint({0}, vec({1e12}), vec({0.07}));
  return u;
}

// Turbine: valve-flow law on the pressure drop DeltaP156 and a thermal lag
// for the outlet temperature Ttb130.
PlantUnit t1_unit() {
  constexpr double dp_op = 6.0, ph_op = 15.0, m_op = 0.0345;
  const double c = m_op / std::sqrt(dp_op * ph_op);
  constexpr double lag = 0.7, kappa = 5.0;

  NonlinearModelData m;
  m.linear = LinearModelData::zeros({1, 1, 3, 0, 1, 3}, kTs);
  auto& l = m.linear;
  l.A << lag;
  // incoming: NEF2 (P_C), NEF34 (T_H, P_H)
  l.B_v << 0.0, 1.0 - lag, 0.0;
  l.C_y << 1.0;
  // outgoing: NEF2 (M_C, T_C), NEF34 (M_H)
  l.C_w << 0.0, 1.0, 0.0;
  l.x_op = vec({9.5});
  l.u_op = vec({dp_op});
  l.v_op = vec({1.2, 14.0, ph_op});
  l.y_op = vec({9.5});
  l.w_op = vec({m_op, 9.5, m_op});
  // z = [x, DeltaP, P_C, T_H, P_H]
  m.terms = {{"sqrt_flow", 'w', 0, c, {1, 4}},
             {"sqrt_flow", 'w', 2, c, {1, 4}},
             {"sqrt_flow", 'x', 0, -(1.0 - lag) * kappa * c, {1, 4}}};

  PlantUnit u;
  u.name = "T1";
  u.inputs = {{"dP156", "bar", 0.0, 12.0}};
  u.outputs = {{"Ttb130", "K"}};
  u.model = std::make_shared<const NonlinearModel>(m);
  u.cost = LocalCostSpec::tracking({0}, vec({1e6}), vec({9.5}), vec({0.0}));
  u.controller = ControllerKind::Nmpc;
  auto& cfg = u.controller_config;
  cfg.mpc.horizon = kHorizon;
  cfg.mpc.tracked_outputs = {0};
  cfg.mpc.q = vec({1e4});
  cfg.mpc.r = vec({0.01});
  cfg.max_iterations = 30;
  cfg.fd_step = 1e-6;
  cfg.tolerance = 1e-12;
  u.setpoint = {vec({0.5}), vec({0.02}), vec({1e-7}), vec({0.5})};
  return u;
}

CoordinatorConfig default_coordinator() {
  CoordinatorConfig c;
  c.fixed_point.eps_max = 1e-6;
  c.fixed_point.sigma_max = 200;
  return c;
}

}  // namespace

PlantSpec coldbox_plant() {
  PlantSpec p;
  p.name = "coldbox";
  p.Ts = kTs;
  p.horizon = kHorizon;
  p.units = {jt_unit(), nef2_unit(), nef34_unit(), t1_unit()};
  const double flow = 0.01, temp = 1.0, pres = 1.0;
  p.edges = {
      {1, 2, {"M_H", "M_C", "T_C"}, {flow, flow, temp}},
      {2, 1, {"T_H", "P_H", "P_C"}, {temp, pres, pres}},
      {2, 3, {"M_H", "M_C", "T_C"}, {flow, flow, temp}},
      {2, 4, {"P_C"}, {pres}},
      {3, 2, {"T_H", "P_H", "P_C"}, {temp, pres, pres}},
      {3, 4, {"T_H", "P_H"}, {temp, pres}},
      {4, 2, {"M_C", "T_C"}, {flow, temp}},
      {4, 3, {"M_H"}, {flow}},
  };
  return p;
}

BenchmarkConfig build_coldbox_2ss() {
  return {"coldbox_2ss", coldbox_plant(), {{1}, {2, 3, 4}}, default_coordinator()};
}

BenchmarkConfig build_coldbox_4ss() {
  return {"coldbox_4ss", coldbox_plant(), {{1}, {2}, {3}, {4}}, default_coordinator()};
}

}  // namespace hiercoord
