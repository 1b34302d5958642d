#include "hiercoord/trust_region.hpp"

#include "hiercoord/error.hpp"
#include "hiercoord/log.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <limits>

namespace hiercoord {
namespace {

Vector box_lo(const TrustRegionState& s, const TrustRegionConfig& c) {
  return (s.center - s.radius).cwiseMax(c.lower);
}
Vector box_hi(const TrustRegionState& s, const TrustRegionConfig& c) {
  return (s.center + s.radius).cwiseMin(c.upper);
}

bool same_point(const Vector& a, const Vector& b) {
  return a.size() == b.size() && (a - b).cwiseAbs().maxCoeff() == 0.0;
}

// Design row for the normalised coordinates z over the active axes.
void design_row(const Vector& z, QuadModel::Form form, Eigen::Ref<Vector> row) {
  const Eigen::Index n = z.size();
  Eigen::Index k = 0;
  row[k++] = 1.0;
  if (form == QuadModel::Form::Constant) return;
  for (Eigen::Index i = 0; i < n; ++i) row[k++] = z[i];
  if (form == QuadModel::Form::Linear) return;
  for (Eigen::Index i = 0; i < n; ++i) row[k++] = 0.5 * z[i] * z[i];
  if (form == QuadModel::Form::Diagonal) return;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) row[k++] = z[i] * z[j];
  }
}

Eigen::Index coefficient_count(Eigen::Index n, QuadModel::Form form) {
  switch (form) {
    case QuadModel::Form::Constant: return 1;
    case QuadModel::Form::Linear: return 1 + n;
    case QuadModel::Form::Diagonal: return 1 + 2 * n;
    case QuadModel::Form::Full: return 1 + n + n * (n + 1) / 2;
  }
  return 1;
}

}  // namespace

void TrustRegionConfig::validate(int dim) const {
  if (dim < 1) throw ConfigError("set-point dimension must be >= 1");
  if (grid_size < 1) throw ConfigError("grid_size must be >= 1");
  auto check = [&](const Vector& v, const char* name) {
    if (v.size() != dim) throw ConfigError(fmt::format("trust region {} must have {} entries", name, dim));
  };
  check(lower, "lower");
  check(upper, "upper");
  check(radius_init, "radius_init");
  check(radius_min, "radius_min");
  check(radius_max, "radius_max");
  for (int i = 0; i < dim; ++i) {
    if (!(lower[i] <= upper[i])) throw ConfigError("trust region: lower > upper");
    if (!(radius_min[i] > 0.0) || !(radius_min[i] <= radius_max[i])) {
      throw ConfigError("trust region: need 0 < radius_min <= radius_max");
    }
    if (radius_init[i] < radius_min[i] || radius_init[i] > radius_max[i]) {
      throw ConfigError("trust region: radius_init outside [radius_min, radius_max]");
    }
  }
  if (!(gamma_e > 1.0)) throw ConfigError("gamma_e must be > 1");
  if (!(gamma_c > 0.0 && gamma_c < 1.0)) throw ConfigError("gamma_c must be in (0,1)");
}

TrustRegionState initial_region(const Vector& center, const TrustRegionConfig& config) {
  config.validate(static_cast<int>(center.size()));
  return {center.cwiseMax(config.lower).cwiseMin(config.upper), config.radius_init, {}};
}

std::vector<Vector> build_grid(const TrustRegionState& state, const TrustRegionConfig& config) {
  const Eigen::Index n = state.center.size();
  if (n == 0) throw std::invalid_argument("build_grid: empty set-point");
  if (state.radius.size() != n || (state.radius.array() <= 0.0).any()) {
    throw std::invalid_argument("build_grid: radius must be positive");
  }
  const int g = config.grid_size;
  std::vector<double> ticks;
  for (int i = 0; i < g; ++i) ticks.push_back(g == 1 ? 0.0 : -1.0 + 2.0 * i / (g - 1));

  const Vector center = state.center.cwiseMax(config.lower).cwiseMin(config.upper);
  std::vector<Vector> out{center};
  std::vector<int> idx(static_cast<std::size_t>(n), 0);
  while (true) {
    Vector p(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      p[i] = std::clamp(state.center[i] + state.radius[i] * ticks[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])],
                        config.lower[i], config.upper[i]);
    }
    if (std::none_of(out.begin(), out.end(), [&](const Vector& q) { return same_point(p, q); })) {
      out.push_back(std::move(p));
    }
    Eigen::Index axis = 0;
    while (axis < n && ++idx[static_cast<std::size_t>(axis)] == g) idx[static_cast<std::size_t>(axis++)] = 0;
    if (axis == n) break;
  }
  return out;
}

double QuadModel::value(const Vector& r) const {
  return c + g.dot(r) + 0.5 * r.dot(H * r);
}

bool QuadModel::positive_definite() const {
  if (form == Form::Linear || form == Form::Constant || H.size() == 0) return false;
  Eigen::SelfAdjointEigenSolver<Matrix> es(H, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff() > 1e-12 * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
}

QuadModel quadratic_fit(const std::vector<CloudPoint>& cloud) {
  std::vector<const CloudPoint*> pts;
  for (const auto& p : cloud) {
    if (p.converged && std::isfinite(p.J)) pts.push_back(&p);
  }
  if (pts.empty()) throw SolverError("quadratic_fit: no converged points");
  const Eigen::Index dim = pts.front()->r.size();

  // Normalise each axis over the cloud; axes with a single value are inactive.
  Vector lo = pts.front()->r, hi = pts.front()->r;
  for (const auto* p : pts) {
    lo = lo.cwiseMin(p->r);
    hi = hi.cwiseMax(p->r);
  }
  std::vector<Eigen::Index> active;
  for (Eigen::Index i = 0; i < dim; ++i) {
    if (hi[i] > lo[i]) active.push_back(i);
  }
  const auto na = static_cast<Eigen::Index>(active.size());
  Vector mid(na), half(na);
  for (Eigen::Index a = 0; a < na; ++a) {
    mid[a] = 0.5 * (lo[active[static_cast<std::size_t>(a)]] + hi[active[static_cast<std::size_t>(a)]]);
    half[a] = 0.5 * (hi[active[static_cast<std::size_t>(a)]] - lo[active[static_cast<std::size_t>(a)]]);
  }
  const auto m = static_cast<Eigen::Index>(pts.size());
  double jscale = 0.0;
  for (const auto* p : pts) jscale = std::max(jscale, std::abs(p->J));
  if (jscale == 0.0) jscale = 1.0;

  std::vector<Vector> z;
  Vector y(m);
  for (Eigen::Index k = 0; k < m; ++k) {
    Vector zk(na);
    for (Eigen::Index a = 0; a < na; ++a) {
      zk[a] = (pts[static_cast<std::size_t>(k)]->r[active[static_cast<std::size_t>(a)]] - mid[a]) / half[a];
    }
    z.push_back(std::move(zk));
    y[k] = pts[static_cast<std::size_t>(k)]->J / jscale;
  }

  QuadModel out;
  for (QuadModel::Form form : {QuadModel::Form::Full, QuadModel::Form::Diagonal,
                               QuadModel::Form::Linear, QuadModel::Form::Constant}) {
    if (na == 0 && form != QuadModel::Form::Constant) continue;
    if (na == 1 && form == QuadModel::Form::Full) continue;  // same as diagonal
    const Eigen::Index p = coefficient_count(na, form);
    if (p > m) continue;
    Matrix X(m, p);
    for (Eigen::Index k = 0; k < m; ++k) {
      Vector row(p);
      design_row(z[static_cast<std::size_t>(k)], form, row);
      X.row(k) = row.transpose();
    }
    Eigen::ColPivHouseholderQR<Matrix> qr(X);
    qr.setThreshold(1e-10);
    if (qr.rank() < p) continue;
    const Vector beta = qr.solve(y);

    // Back to original coordinates: z = D^{-1}(r - mid).
    Vector gz = Vector::Zero(na);
    Matrix Hz = Matrix::Zero(na, na);
    Eigen::Index k = 1;
    if (form != QuadModel::Form::Constant) {
      for (Eigen::Index i = 0; i < na; ++i) gz[i] = beta[k++];
    }
    if (form == QuadModel::Form::Diagonal || form == QuadModel::Form::Full) {
      for (Eigen::Index i = 0; i < na; ++i) Hz(i, i) = beta[k++];
    }
    if (form == QuadModel::Form::Full) {
      for (Eigen::Index i = 0; i < na; ++i) {
        for (Eigen::Index j = i + 1; j < na; ++j) {
          Hz(i, j) = Hz(j, i) = beta[k++];
        }
      }
    }
    const Vector dinv = half.cwiseInverse();
    const Matrix Ha = dinv.asDiagonal() * Hz * dinv.asDiagonal();
    const Vector ga = dinv.cwiseProduct(gz) - Ha * mid;
    const double ca = beta[0] - gz.dot(dinv.cwiseProduct(mid)) + 0.5 * mid.dot(Ha * mid);

    out.form = form;
    const QuadModel::Form top = na > 1 ? QuadModel::Form::Full
                                : na == 1 ? QuadModel::Form::Diagonal
                                          : QuadModel::Form::Constant;
    out.reduced = form != top;
    out.c = ca * jscale;
    out.g = Vector::Zero(dim);
    out.H = Matrix::Zero(dim, dim);
    for (Eigen::Index a = 0; a < na; ++a) {
      out.g[active[static_cast<std::size_t>(a)]] = ga[a] * jscale;
      for (Eigen::Index b = 0; b < na; ++b) {
        out.H(active[static_cast<std::size_t>(a)], active[static_cast<std::size_t>(b)]) = Ha(a, b) * jscale;
      }
    }
    out.H = 0.5 * (out.H + out.H.transpose());
    out.residual = std::sqrt((X * beta - y).squaredNorm() / static_cast<double>(m)) * jscale;
    if (out.reduced) log::debug("quadratic fit reduced to form {}", static_cast<int>(form));
    return out;
  }
  throw SolverError("quadratic_fit: no usable model");
}

Vector minimize_on_box(const QuadModel& model, const Vector& lo, const Vector& hi) {
  const Eigen::Index n = model.g.size();
  // Work on the axes where the box is not degenerate.
  Vector x = (0.5 * (lo + hi));
  auto q = [&](const Vector& v) { return model.g.dot(v) + 0.5 * v.dot(model.H * v); };
  for (int it = 0; it < 100; ++it) {
    const Vector grad = model.H * x + model.g;
    std::vector<Eigen::Index> free;
    for (Eigen::Index i = 0; i < n; ++i) {
      const bool at_lo = x[i] <= lo[i] && grad[i] > 0.0;
      const bool at_hi = x[i] >= hi[i] && grad[i] < 0.0;
      if (!at_lo && !at_hi && hi[i] > lo[i]) free.push_back(i);
    }
    if (free.empty()) break;
    const auto nf = static_cast<Eigen::Index>(free.size());
    Matrix Hf(nf, nf);
    Vector gf(nf);
    for (Eigen::Index a = 0; a < nf; ++a) {
      gf[a] = grad[free[static_cast<std::size_t>(a)]];
      for (Eigen::Index b = 0; b < nf; ++b) Hf(a, b) = model.H(free[static_cast<std::size_t>(a)], free[static_cast<std::size_t>(b)]);
    }
    Eigen::LLT<Matrix> llt(Hf);
    if (llt.info() != Eigen::Success) break;
    const Vector df = llt.solve(-gf);
    Vector d = Vector::Zero(n);
    for (Eigen::Index a = 0; a < nf; ++a) d[free[static_cast<std::size_t>(a)]] = df[a];

    const double q0 = q(x);
    double t = 1.0;
    Vector next = x;
    for (int b = 0; b < 60; ++b) {
      next = (x + t * d).cwiseMax(lo).cwiseMin(hi);
      if (q(next) <= q0 + 1e-4 * grad.dot(next - x)) break;
      t *= 0.5;
    }
    const double move = (next - x).norm();
    x = next;
    if (move <= 1e-15 * (1.0 + x.norm())) break;
  }
  return x;
}

StepOutcome trust_region_step(TrustRegionState& state, const QuadModel& model,
                              const TrustRegionConfig& config, const SetpointEvaluator& evaluate) {
  double center_J = std::numeric_limits<double>::infinity();
  const CloudPoint* best = nullptr;
  for (const auto& p : state.cloud) {
    if (!p.converged) continue;
    if (same_point(p.r, state.center)) center_J = std::min(center_J, p.J);
    if (!best || p.J < best->J) best = &p;
  }

  StepOutcome out;
  if (model.positive_definite()) {
    const Vector r = minimize_on_box(model, box_lo(state, config), box_hi(state, config));
    out.from_model = true;
    auto hit = std::find_if(state.cloud.begin(), state.cloud.end(),
                            [&](const CloudPoint& p) { return same_point(p.r, r); });
    if (hit != state.cloud.end()) {
      out.candidate = *hit;
    } else {
      out.candidate = evaluate(r);
      state.cloud.push_back(out.candidate);
    }
  } else if (best) {
    out.candidate = *best;
  } else {
    out.candidate = {state.center, std::numeric_limits<double>::infinity(), false};
  }

  out.improved = out.candidate.converged && out.candidate.J < center_J;
  const double factor = out.improved ? config.gamma_e : config.gamma_c;
  state.radius = (state.radius * factor).cwiseMax(config.radius_min).cwiseMin(config.radius_max);

  best = nullptr;
  for (const auto& p : state.cloud) {
    if (p.converged && (!best || p.J < best->J)) best = &p;
  }
  if (best) state.center = best->r;
  return out;
}

OptimizeResult optimize_setpoint(TrustRegionState& state, const TrustRegionConfig& config,
                                 const BatchEvaluator& evaluate_batch) {
  config.validate(static_cast<int>(state.center.size()));
  const Vector previous = state.center;
  state.cloud.clear();
  const std::vector<Vector> grid = build_grid(state, config);
  state.cloud = evaluate_batch(grid);
  if (state.cloud.size() != grid.size()) throw std::logic_error("batch evaluator returned wrong count");

  OptimizeResult res;
  res.evaluations = static_cast<int>(grid.size());
  const bool any = std::any_of(state.cloud.begin(), state.cloud.end(),
                               [](const CloudPoint& p) { return p.converged && std::isfinite(p.J); });
  if (!any) {
    log::warn("no set-point evaluation converged; keeping the previous set-point");
    state.radius = (state.radius * config.gamma_c).cwiseMax(config.radius_min);
    res.r_opt = previous;
    res.J = state.cloud.front().J;
    return res;
  }
  res.model = quadratic_fit(state.cloud);
  const std::size_t before = state.cloud.size();
  res.step = trust_region_step(state, res.model, config, [&](const Vector& r) {
    return evaluate_batch({r}).front();
  });
  res.evaluations += static_cast<int>(state.cloud.size() - before);
  res.any_converged = true;
  res.r_opt = state.center;
  for (const auto& p : state.cloud) {
    if (p.converged && same_point(p.r, state.center)) {
      res.J = p.J;
      break;
    }
  }
  return res;
}

}  // namespace hiercoord
