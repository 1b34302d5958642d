#include "hiercoord/coupling_graph.hpp"

#include "hiercoord/error.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>

namespace hiercoord {

Profile::Profile(int dim, int horizon)
    : dim_(dim), horizon_(horizon), values_(Vector::Zero(static_cast<Eigen::Index>(dim) * horizon)) {}

Profile::Profile(int dim, int horizon, Vector values)
    : dim_(dim), horizon_(horizon), values_(std::move(values)) {
  if (values_.size() != static_cast<Eigen::Index>(dim) * horizon) {
    throw std::invalid_argument(fmt::format(
        "profile length {} is not dim {} x horizon {}", values_.size(), dim, horizon));
  }
}

Profile Profile::constant(const Vector& value, int horizon) {
  Profile p(static_cast<int>(value.size()), horizon);
  for (int k = 0; k < horizon; ++k) p.step(k) = value;
  return p;
}

Profile Profile::shifted() const {
  Profile out(dim_, horizon_);
  if (horizon_ == 0 || dim_ == 0) return out;
  for (int k = 0; k + 1 < horizon_; ++k) out.step(k) = step(k + 1);
  out.step(horizon_ - 1) = step(horizon_ - 1);
  return out;
}

Vector concat_ordered(const std::map<SubsystemId, Vector>& parts) {
  if (parts.empty()) throw std::invalid_argument("empty concatenation");
  Eigen::Index total = 0;
  for (const auto& [id, v] : parts) {
    if (!v.allFinite()) {
      throw std::invalid_argument(fmt::format("non-finite part for subsystem {}", id.index));
    }
    total += v.size();
  }
  Vector out(total);
  Eigen::Index at = 0;
  for (const auto& [id, v] : parts) {
    out.segment(at, v.size()) = v;
    at += v.size();
  }
  return out;
}

ValidationReport validate_topology(const TopologySpec& spec) {
  ValidationReport report;
  if (spec.subsystem_count < 1) report.violations.push_back("no subsystems");
  if (spec.horizon < 1) report.violations.push_back("horizon must be >= 1");
  for (int c : spec.controlled) {
    if (c < 1 || c > spec.subsystem_count) {
      report.violations.push_back(fmt::format("controlled id {} out of range", c));
    }
  }
  if (spec.controlled.empty()) {
    report.warnings.push_back("empty controlled set: central cost has only uncontrolled terms");
  }

  std::map<std::pair<int, int>, int> seen;
  std::vector<int> degree(static_cast<std::size_t>(std::max(spec.subsystem_count, 0)) + 1, 0);
  for (const auto& e : spec.edges) {
    const int s = e.source.index;
    const int d = e.dest.index;
    const std::string tag = fmt::format("edge {}->{}", s, d);
    if (s == d) report.violations.push_back(tag + ": self-loop");
    if (s < 1 || s > spec.subsystem_count || d < 1 || d > spec.subsystem_count) {
      report.violations.push_back(tag + ": unknown subsystem");
      continue;
    }
    if (e.dim < 1) report.violations.push_back(tag + ": zero-dimension signal");
    if (!e.channels.empty() && static_cast<int>(e.channels.size()) != e.dim) {
      report.violations.push_back(tag + ": dimension mismatch (channel names)");
    }
    if (!e.scale.empty() && static_cast<int>(e.scale.size()) != e.dim) {
      report.violations.push_back(tag + ": dimension mismatch (scales)");
    }
    for (double sc : e.scale) {
      if (!(sc > 0.0) || !std::isfinite(sc)) {
        report.violations.push_back(tag + ": channel scale must be positive");
        break;
      }
    }
    auto [it, inserted] = seen.emplace(std::make_pair(s, d), e.dim);
    if (!inserted) {
      if (it->second != e.dim) {
        report.violations.push_back(tag + ": dimension mismatch between declarations");
      } else {
        report.violations.push_back(tag + ": non-unique edge");
      }
    }
    if (s != d) {
      ++degree[static_cast<std::size_t>(s)];
      ++degree[static_cast<std::size_t>(d)];
    }
  }
  if (spec.subsystem_count > 1) {
    for (int s = 1; s <= spec.subsystem_count; ++s) {
      if (degree[static_cast<std::size_t>(s)] == 0) {
        report.warnings.push_back(fmt::format("subsystem {} is unreachable (no couplings)", s));
      }
    }
  }
  return report;
}

Topology::Topology(TopologySpec spec)
    : count_(spec.subsystem_count),
      horizon_(spec.horizon),
      controlled_(std::move(spec.controlled)),
      edges_(std::move(spec.edges)) {
  TopologySpec check_spec{count_, controlled_, edges_, horizon_};
  const auto report = validate_topology(check_spec);
  if (!report.ok()) {
    std::string msg = "invalid topology:";
    for (const auto& v : report.violations) msg += " " + v + ";";
    throw ConfigError(msg);
  }
  for (auto& e : edges_) {
    if (e.scale.empty()) e.scale.assign(static_cast<std::size_t>(e.dim), 1.0);
  }
  std::sort(edges_.begin(), edges_.end(), [](const CouplingEdge& a, const CouplingEdge& b) {
    return std::tie(a.dest, a.source) < std::tie(b.dest, b.source);
  });
}

void Topology::check(SubsystemId s) const {
  if (s.index < 1 || s.index > count_) {
    throw std::out_of_range(fmt::format("unknown subsystem {}", s.index));
  }
}

bool Topology::is_controlled(SubsystemId s) const {
  check(s);
  return controlled_.count(s.index) != 0;
}

std::vector<SubsystemId> Topology::all() const {
  std::vector<SubsystemId> out;
  for (int s = 1; s <= count_; ++s) out.push_back({s});
  return out;
}

std::vector<SubsystemId> Topology::controlled() const {
  std::vector<SubsystemId> out;
  for (int s : controlled_) out.push_back({s});
  return out;
}

std::vector<SubsystemId> Topology::uncontrolled() const {
  std::vector<SubsystemId> out;
  for (int s = 1; s <= count_; ++s) {
    if (!controlled_.count(s)) out.push_back({s});
  }
  return out;
}

std::vector<std::size_t> Topology::stack_in(SubsystemId s) const {
  check(s);
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < edges_.size(); ++i) {
    if (edges_[i].dest == s) out.push_back(i);  // already ordered by source
  }
  return out;
}

std::vector<std::size_t> Topology::stack_out(SubsystemId s) const {
  check(s);
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < edges_.size(); ++i) {
    if (edges_[i].source == s) out.push_back(i);
  }
  std::sort(out.begin(), out.end(),
            [&](std::size_t a, std::size_t b) { return edges_[a].dest < edges_[b].dest; });
  return out;
}

std::vector<SubsystemId> Topology::neighbors(SubsystemId s) const {
  std::vector<SubsystemId> out;
  for (std::size_t i : stack_in(s)) out.push_back(edges_[i].source);
  return out;
}

int Topology::in_dim(SubsystemId s) const {
  int d = 0;
  for (std::size_t i : stack_in(s)) d += edges_[i].dim;
  return d;
}

int Topology::out_dim(SubsystemId s) const {
  int d = 0;
  for (std::size_t i : stack_out(s)) d += edges_[i].dim;
  return d;
}

RoutingMatrix::RoutingMatrix(std::vector<std::size_t> source_of_row, std::size_t cols)
    : source_(std::move(source_of_row)), cols_(cols) {
  std::vector<bool> used(cols_, false);
  for (std::size_t c : source_) {
    if (c >= cols_) throw std::invalid_argument("routing column out of range");
    if (used[c]) throw std::invalid_argument("routing column used twice");
    used[c] = true;
  }
}

Vector RoutingMatrix::apply(const Vector& v) const {
  if (static_cast<std::size_t>(v.size()) != cols_) {
    throw std::invalid_argument("routing: input length mismatch");
  }
  Vector out(static_cast<Eigen::Index>(source_.size()));
  for (std::size_t i = 0; i < source_.size(); ++i) {
    out[static_cast<Eigen::Index>(i)] = v[static_cast<Eigen::Index>(source_[i])];
  }
  return out;
}

Vector RoutingMatrix::apply_transpose(const Vector& v) const {
  if (static_cast<std::size_t>(v.size()) != source_.size()) {
    throw std::invalid_argument("routing: input length mismatch");
  }
  Vector out = Vector::Zero(static_cast<Eigen::Index>(cols_));
  for (std::size_t i = 0; i < source_.size(); ++i) {
    out[static_cast<Eigen::Index>(source_[i])] += v[static_cast<Eigen::Index>(i)];
  }
  return out;
}

Matrix RoutingMatrix::dense() const {
  Matrix m = Matrix::Zero(static_cast<Eigen::Index>(source_.size()),
                          static_cast<Eigen::Index>(cols_));
  for (std::size_t i = 0; i < source_.size(); ++i) {
    m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(source_[i])) = 1.0;
  }
  return m;
}

Routing build_routing(const Topology& topology) {
  const auto edges = topology.edges();
  const auto n = static_cast<std::size_t>(topology.horizon());
  Routing r;
  r.edge_in.resize(edges.size());
  r.edge_out.resize(edges.size());

  std::size_t at = 0;
  for (SubsystemId s : topology.all()) {
    const std::size_t begin = at;
    for (std::size_t e : topology.stack_in(s)) {
      const std::size_t len = n * static_cast<std::size_t>(edges[e].dim);
      r.edge_in[e] = {at, len};
      at += len;
    }
    r.in_slice.push_back({begin, at - begin});
  }
  r.length = at;

  at = 0;
  for (SubsystemId s : topology.all()) {
    const std::size_t begin = at;
    for (std::size_t e : topology.stack_out(s)) {
      const std::size_t len = n * static_cast<std::size_t>(edges[e].dim);
      r.edge_out[e] = {at, len};
      at += len;
    }
    r.out_slice.push_back({begin, at - begin});
  }

  std::vector<std::size_t> source(r.length);
  for (std::size_t e = 0; e < edges.size(); ++e) {
    for (std::size_t j = 0; j < r.edge_in[e].length; ++j) {
      source[r.edge_in[e].offset + j] = r.edge_out[e].offset + j;
    }
  }
  r.global = RoutingMatrix(source, r.length);

  for (const Block& slice : r.in_slice) {
    std::vector<std::size_t> rows(source.begin() + static_cast<std::ptrdiff_t>(slice.offset),
                                  source.begin() + static_cast<std::ptrdiff_t>(slice.offset + slice.length));
    r.per_subsystem.emplace_back(std::move(rows), r.length);
  }
  return r;
}

Vector in_stack_weights(const Topology& topology, const Routing& routing) {
  Vector w(static_cast<Eigen::Index>(routing.length));
  const auto edges = topology.edges();
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const int dim = edges[e].dim;
    const Block b = routing.edge_in[e];
    for (std::size_t j = 0; j < b.length; ++j) {
      const double sc = edges[e].scale[j % static_cast<std::size_t>(dim)];
      w[static_cast<Eigen::Index>(b.offset + j)] = 1.0 / (sc * sc);
    }
  }
  return w;
}

}  // namespace hiercoord
