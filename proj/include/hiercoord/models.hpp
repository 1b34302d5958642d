#pragma once

// Subsystem dynamics: linear state-space blocks in deviation form, affine
// blocks with registered nonlinear terms, and composites of several blocks
// wired together (used when one subsystem groups several plant units).

#include "hiercoord/coupling_graph.hpp"

#include <memory>
#include <string>
#include <vector>

namespace hiercoord {

using VectorRef = Eigen::Ref<const Vector>;

struct Dims {
  int nx = 0;  // states
  int nu = 0;  // control inputs
  int nv = 0;  // incoming coupling channels (per step)
  int nd = 0;  // measured disturbances
  int ny = 0;  // regulated / constrained outputs
  int nw = 0;  // outgoing coupling channels (per step)
};

struct OperatingPoint {
  Vector x, u, v, d, y, w;
};

class Dynamics {
 public:
  virtual ~Dynamics() = default;

  virtual const Dims& dims() const = 0;
  virtual const OperatingPoint& operating_point() const = 0;

  /// y(k), w(k) from x(k), u(k), v(k), d(k).
  virtual void outputs(const VectorRef& x, const VectorRef& u, const VectorRef& v,
                       const VectorRef& d, Vector& y, Vector& w) const = 0;
  /// x(k+1).
  virtual void step(const VectorRef& x, const VectorRef& u, const VectorRef& v,
                    const VectorRef& d, Vector& x_next) const = 0;
  /// Both at once; composites override to resolve their wiring only once.
  virtual void evaluate(const VectorRef& x, const VectorRef& u, const VectorRef& v,
                        const VectorRef& d, Vector& y, Vector& w, Vector& x_next) const {
    outputs(x, u, v, d, y, w);
    step(x, u, v, d, x_next);
  }

  /// True when the outgoing coupling w(k) depends on the incoming v(k).
  virtual bool has_coupling_feedthrough() const = 0;
};

/// x+ = x_op + A dx + B_u du + B_v dv + B_d dd
/// y  = y_op + C_y dx + D_yu du + D_yv dv
/// w  = w_op + C_w dx + D_wu du + D_wv dv        (d* = deviation from *_op)
struct LinearModelData {
  Matrix A, B_u, B_v, B_d;
  Matrix C_y, D_yu, D_yv;
  Matrix C_w, D_wu, D_wv;
  Vector x_op, u_op, v_op, d_op, y_op, w_op;
  double Ts = 1.0;

  /// Zero matrices of consistent shape, operating point at the origin.
  static LinearModelData zeros(const Dims& dims, double Ts = 1.0);
};

class LinearModel final : public Dynamics {
 public:
  /// Throws ConfigError on inconsistent dimensions or Ts <= 0.
  explicit LinearModel(LinearModelData data);

  const LinearModelData& data() const { return data_; }
  double spectral_radius() const { return spectral_radius_; }

  const Dims& dims() const override { return dims_; }
  const OperatingPoint& operating_point() const override { return op_; }
  void outputs(const VectorRef& x, const VectorRef& u, const VectorRef& v,
               const VectorRef& d, Vector& y, Vector& w) const override;
  void step(const VectorRef& x, const VectorRef& u, const VectorRef& v,
            const VectorRef& d, Vector& x_next) const override;
  bool has_coupling_feedthrough() const override { return feedthrough_; }

 private:
  LinearModelData data_;
  Dims dims_;
  OperatingPoint op_;
  double spectral_radius_ = 0.0;
  bool feedthrough_ = false;
};

/// A named nonlinear primitive added to one row of x+, y or w.
/// Arguments index the concatenated signal z = [x; u; v; d] (absolute values).
/// The term contributes coeff * (phi(z) - phi(z_op)), so the operating point
/// of the linear part stays an equilibrium.
struct NonlinearTerm {
  std::string kind;  // "sqrt_flow": sign(a) sqrt(|a b|); "bilinear": a b
  char target = 'x';  // 'x', 'y' or 'w'
  int row = 0;
  double coeff = 0.0;
  std::vector<int> args;
};

bool is_registered_term(const std::string& kind);
double eval_term(const std::string& kind, double a, double b);

struct NonlinearModelData {
  LinearModelData linear;
  std::vector<NonlinearTerm> terms;
};

class NonlinearModel final : public Dynamics {
 public:
  explicit NonlinearModel(NonlinearModelData data);

  const NonlinearModelData& data() const { return data_; }
  const LinearModel& linear_part() const { return linear_; }

  const Dims& dims() const override { return linear_.dims(); }
  const OperatingPoint& operating_point() const override { return linear_.operating_point(); }
  void outputs(const VectorRef& x, const VectorRef& u, const VectorRef& v,
               const VectorRef& d, Vector& y, Vector& w) const override;
  void step(const VectorRef& x, const VectorRef& u, const VectorRef& v,
            const VectorRef& d, Vector& x_next) const override;
  bool has_coupling_feedthrough() const override { return feedthrough_; }

 private:
  double term_value(const NonlinearTerm& t, const VectorRef& x, const VectorRef& u,
                    const VectorRef& v, const VectorRef& d) const;

  NonlinearModelData data_;
  LinearModel linear_;
  std::vector<double> term_op_;  // phi(z_op) per term
  bool feedthrough_ = false;
};

/// Where each component input comes from inside a composite.
struct WireSource {
  enum class Kind { External, Internal } kind = Kind::External;
  int index = 0;      // external: composite v index; internal: source w index
  int component = 0;  // internal only
};

struct CompositeWiring {
  std::vector<std::vector<WireSource>> inputs;  // per component, one per v channel
  std::vector<std::pair<int, int>> outputs;     // composite w index -> (component, w index)
};

/// Several blocks evaluated together. x, u, d and y are the concatenations of
/// the components' vectors in component order.
class CompositeModel final : public Dynamics {
 public:
  /// Throws ConfigError on wiring errors or an algebraic loop (a cycle of
  /// internal connections made only of feedthrough components).
  CompositeModel(std::vector<std::shared_ptr<const Dynamics>> components,
                 CompositeWiring wiring, int external_inputs);

  struct ComponentSignals {
    Vector v, y, w;
  };

  /// Evaluates all components, also returning each component's signals.
  void evaluate_components(const VectorRef& x, const VectorRef& u, const VectorRef& v,
                           const VectorRef& d, std::vector<ComponentSignals>& signals,
                           Vector& x_next) const;

  std::size_t component_count() const { return components_.size(); }
  const Dynamics& component(std::size_t i) const { return *components_[i]; }
  const Dims& component_offsets(std::size_t i) const { return offsets_[i]; }

  const Dims& dims() const override { return dims_; }
  const OperatingPoint& operating_point() const override { return op_; }
  void outputs(const VectorRef& x, const VectorRef& u, const VectorRef& v,
               const VectorRef& d, Vector& y, Vector& w) const override;
  void step(const VectorRef& x, const VectorRef& u, const VectorRef& v,
            const VectorRef& d, Vector& x_next) const override;
  void evaluate(const VectorRef& x, const VectorRef& u, const VectorRef& v,
                const VectorRef& d, Vector& y, Vector& w, Vector& x_next) const override;
  bool has_coupling_feedthrough() const override { return feedthrough_; }

 private:
  void resolve(const VectorRef& x, const VectorRef& u, const VectorRef& v,
               const VectorRef& d, std::vector<ComponentSignals>& signals) const;

  std::vector<std::shared_ptr<const Dynamics>> components_;
  CompositeWiring wiring_;
  std::vector<Dims> offsets_;  // start index of each component's x/u/d/y
  std::vector<std::size_t> order_;  // evaluation order of component outputs
  Dims dims_;
  OperatingPoint op_;
  bool feedthrough_ = false;
};

struct SimulationResult {
  Profile y;  // y(k) .. y(k+N-1)
  Profile w;  // w(k) .. w(k+N-1)
  Vector x_final;  // x(k+N)
};

/// Iterates the dynamics N steps from x0. `u` may be empty (nu = 0); the
/// disturbance d is held over the horizon. Throws SimulationError on blow-up.
SimulationResult simulate_profile(const Dynamics& model, const Vector& x0, const Profile& u,
                                  const Profile& v_in, const Vector& d);

}  // namespace hiercoord
