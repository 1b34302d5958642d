#pragma once

// Local cost contributions: output tracking with input penalty, and quadratic
// penalty on upper-bound violations. A subsystem's cost is a sum of terms,
// each acting on a selection of its outputs; no terms means a zero cost.

#include "hiercoord/coupling_graph.hpp"

#include <vector>

namespace hiercoord {

enum class CostKind { Tracking, ConstraintViolation };

struct CostTerm {
  CostKind kind = CostKind::Tracking;
  std::vector<int> outputs;  // indices into y
  Vector weight;             // diagonal of Q_c over the selected outputs, >= 0
  Vector target;             // r_d (tracking) or upper bound (violation)
};

struct LocalCostSpec {
  std::vector<CostTerm> terms;
  Vector input_weight;  // diagonal of R_c; empty means zero

  static LocalCostSpec zero() { return {}; }
  static LocalCostSpec tracking(std::vector<int> outputs, Vector q, Vector r_d, Vector r_c = {});
  static LocalCostSpec constraint(std::vector<int> outputs, Vector q, Vector upper);

  bool is_zero() const;
  /// Throws ConfigError on negative weights or mismatched lengths.
  void validate(int ny, int nu) const;
};

/// sum_i ||y(k+i) - r_d||^2_Q over tracking terms + ||u(k+i)||^2_R.
double tracking_cost(const Profile& y, const Profile& u, const LocalCostSpec& spec);
/// sum_i ||max(y(k+i) - y_bar, 0)||^2_Q over violation terms.
double constraint_cost(const Profile& y, const LocalCostSpec& spec);
/// tracking_cost + constraint_cost.
double local_cost(const Profile& y, const Profile& u, const LocalCostSpec& spec);

/// Per-step violation amount sum_j max(y_j - y_bar_j, 0) over violation terms.
double violation_amount(const Vector& y, const LocalCostSpec& spec);

}  // namespace hiercoord
