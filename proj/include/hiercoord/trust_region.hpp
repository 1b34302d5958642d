#pragma once

// Upper layer, outer loop: derivative-free set-point optimization. A grid of
// candidates inside a box trust region is evaluated, a quadratic surrogate is
// fitted to the results and minimised over the box, and the region is moved
// and resized according to how the candidate fared.

#include "hiercoord/coupling_graph.hpp"

#include <functional>
#include <vector>

namespace hiercoord {

struct TrustRegionConfig {
  int grid_size = 3;
  Vector lower;  // set-point bounds
  Vector upper;
  Vector radius_init;
  Vector radius_min;
  Vector radius_max;
  double gamma_e = 1.6;
  double gamma_c = 0.5;

  void validate(int dim) const;
};

struct CloudPoint {
  Vector r;
  double J = 0.0;
  bool converged = true;
};

struct TrustRegionState {
  Vector center;
  Vector radius;
  std::vector<CloudPoint> cloud;
};

TrustRegionState initial_region(const Vector& center, const TrustRegionConfig& config);

/// center + radius * linspace(-1, 1, g) per axis, clipped to the bounds,
/// duplicates removed; the center always comes first.
std::vector<Vector> build_grid(const TrustRegionState& state, const TrustRegionConfig& config);

/// J(r) = c + g'r + 1/2 r'Hr in original coordinates.
struct QuadModel {
  enum class Form { Full, Diagonal, Linear, Constant };
  double c = 0.0;
  Vector g;
  Matrix H;
  Form form = Form::Constant;
  bool reduced = false;   // fell back from the full model
  double residual = 0.0;  // RMS of the fit over the points used

  double value(const Vector& r) const;
  bool positive_definite() const;
};

/// Least-squares fit over the converged points of the cloud. Uses the full
/// quadratic when enough points are available and the design has full rank,
/// otherwise a diagonal Hessian, then a linear, then a constant model.
QuadModel quadratic_fit(const std::vector<CloudPoint>& cloud);

/// Minimiser of the model over [lo, hi] by projected Newton; requires a
/// positive definite Hessian.
Vector minimize_on_box(const QuadModel& model, const Vector& lo, const Vector& hi);

using SetpointEvaluator = std::function<CloudPoint(const Vector& r)>;
using BatchEvaluator = std::function<std::vector<CloudPoint>(const std::vector<Vector>& rs)>;

struct StepOutcome {
  CloudPoint candidate;
  bool from_model = false;  // false: best grid point was used
  bool improved = false;
};

/// Proposes the model minimiser over the region (or the best grid point when
/// the Hessian is not positive definite), evaluates it, resizes the region and
/// moves the center to the best evaluated point.
StepOutcome trust_region_step(TrustRegionState& state, const QuadModel& model,
                              const TrustRegionConfig& config, const SetpointEvaluator& evaluate);

struct OptimizeResult {
  Vector r_opt;
  double J = 0.0;
  bool any_converged = false;
  QuadModel model;
  StepOutcome step;
  int evaluations = 0;
};

/// One sampling period: grid, fit, step. Returns the best converged point seen
/// this period, or the previous center with any_converged = false.
OptimizeResult optimize_setpoint(TrustRegionState& state, const TrustRegionConfig& config,
                                 const BatchEvaluator& evaluate_batch);

}  // namespace hiercoord
