#include "hiercoord/costs.hpp"

#include "hiercoord/error.hpp"
#include "hiercoord/kernels.hpp"

#include <fmt/format.h>

namespace hiercoord {
namespace {

// Gathers the selected outputs of every step plus repeated targets/weights so
// the whole horizon is one contiguous kernel call.
struct Expanded {
  std::vector<double> values, target, weight;
};

void expand(const Profile& y, const CostTerm& term, Expanded& out) {
  const std::size_t m = term.outputs.size();
  const std::size_t n = static_cast<std::size_t>(y.horizon());
  out.values.resize(m * n);
  out.target.resize(m * n);
  out.weight.resize(m * n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto yk = y.step(static_cast<int>(k));
    for (std::size_t j = 0; j < m; ++j) {
      const int idx = term.outputs[j];
      if (idx < 0 || idx >= y.dim()) {
        throw std::invalid_argument(fmt::format("cost term output {} outside y (dim {})", idx, y.dim()));
      }
      out.values[k * m + j] = yk[idx];
      out.target[k * m + j] = term.target[static_cast<Eigen::Index>(j)];
      out.weight[k * m + j] = term.weight[static_cast<Eigen::Index>(j)];
    }
  }
}

void check_term(const CostTerm& t) {
  const auto m = static_cast<Eigen::Index>(t.outputs.size());
  if (t.weight.size() != m || t.target.size() != m) {
    throw std::invalid_argument("cost term: weight/target length must match outputs");
  }
}

}  // namespace

LocalCostSpec LocalCostSpec::tracking(std::vector<int> outputs, Vector q, Vector r_d, Vector r_c) {
  LocalCostSpec s;
  s.terms.push_back({CostKind::Tracking, std::move(outputs), std::move(q), std::move(r_d)});
  s.input_weight = std::move(r_c);
  return s;
}

LocalCostSpec LocalCostSpec::constraint(std::vector<int> outputs, Vector q, Vector upper) {
  LocalCostSpec s;
  s.terms.push_back({CostKind::ConstraintViolation, std::move(outputs), std::move(q), std::move(upper)});
  return s;
}

bool LocalCostSpec::is_zero() const {
  for (const auto& t : terms) {
    if (t.weight.size() > 0 && t.weight.maxCoeff() > 0.0) return false;
  }
  return input_weight.size() == 0 || input_weight.maxCoeff() <= 0.0;
}

void LocalCostSpec::validate(int ny, int nu) const {
  for (const auto& t : terms) {
    const auto m = static_cast<Eigen::Index>(t.outputs.size());
    if (t.weight.size() != m || t.target.size() != m) {
      throw ConfigError("cost term: weight/target length must match the selected outputs");
    }
    for (int o : t.outputs) {
      if (o < 0 || o >= ny) throw ConfigError(fmt::format("cost term output {} outside y (dim {})", o, ny));
    }
    if (m > 0 && t.weight.minCoeff() < 0.0) throw ConfigError("cost weights must be nonnegative");
  }
  if (input_weight.size() != 0) {
    if (input_weight.size() != nu) {
      throw ConfigError(fmt::format("input weight has length {}, expected {}", input_weight.size(), nu));
    }
    if (input_weight.minCoeff() < 0.0) throw ConfigError("input weights must be nonnegative");
  }
}

double tracking_cost(const Profile& y, const Profile& u, const LocalCostSpec& spec) {
  thread_local Expanded buf;
  double total = 0.0;
  for (const auto& term : spec.terms) {
    if (term.kind != CostKind::Tracking) continue;
    check_term(term);
    expand(y, term, buf);
    total += kernels::weighted_sq_diff(buf.values, buf.target, buf.weight);
  }
  if (spec.input_weight.size() > 0 && u.dim() > 0) {
    if (spec.input_weight.size() != u.dim()) {
      throw std::invalid_argument("input weight length does not match u");
    }
    const std::size_t len = static_cast<std::size_t>(u.values().size());
    buf.target.assign(len, 0.0);
    buf.weight.resize(len);
    for (std::size_t i = 0; i < len; ++i) {
      buf.weight[i] = spec.input_weight[static_cast<Eigen::Index>(i % static_cast<std::size_t>(u.dim()))];
    }
    total += kernels::weighted_sq_diff({u.values().data(), len}, buf.target, buf.weight);
  }
  return total;
}

double constraint_cost(const Profile& y, const LocalCostSpec& spec) {
  thread_local Expanded buf;
  double total = 0.0;
  for (const auto& term : spec.terms) {
    if (term.kind != CostKind::ConstraintViolation) continue;
    check_term(term);
    expand(y, term, buf);
    total += kernels::hinge_sq(buf.values, buf.target, buf.weight);
  }
  return total;
}

double local_cost(const Profile& y, const Profile& u, const LocalCostSpec& spec) {
  return tracking_cost(y, u, spec) + constraint_cost(y, spec);
}

double violation_amount(const Vector& y, const LocalCostSpec& spec) {
  const Profile one(static_cast<int>(y.size()), 1, y);
  thread_local Expanded buf;
  double total = 0.0;
  for (const auto& term : spec.terms) {
    if (term.kind != CostKind::ConstraintViolation) continue;
    check_term(term);
    expand(one, term, buf);
    total += kernels::hinge_sum(buf.values, buf.target);
  }
  return total;
}

}  // namespace hiercoord
