#pragma once

// Decomposition topology, horizon profiles and the routing that rearranges
// stacked outgoing coupling profiles into stacked incoming ones.

#include <Eigen/Dense>

#include <compare>
#include <cstddef>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace hiercoord {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

struct SubsystemId {
  int index = 0;  // 1-based
  auto operator<=>(const SubsystemId&) const = default;
};

struct CouplingEdge {
  SubsystemId source;
  SubsystemId dest;
  int dim = 0;
  // Optional per-channel metadata; empty or of length dim.
  std::vector<std::string> channels;
  std::vector<double> scale;  // residual scaling per channel (default 1)
};

/// A stacked trajectory of a dim-dimensional signal over `horizon` steps,
/// time-major: step k occupies values[k*dim .. (k+1)*dim).
class Profile {
 public:
  Profile() = default;
  Profile(int dim, int horizon);
  Profile(int dim, int horizon, Vector values);

  /// The same per-step value repeated over the horizon.
  static Profile constant(const Vector& value, int horizon);

  int dim() const { return dim_; }
  int horizon() const { return horizon_; }
  const Vector& values() const { return values_; }
  Vector& values() { return values_; }

  auto step(int k) { return values_.segment(static_cast<Eigen::Index>(k) * dim_, dim_); }
  auto step(int k) const { return values_.segment(static_cast<Eigen::Index>(k) * dim_, dim_); }

  /// Drops step 0 and repeats the last step (receding-horizon warm start).
  Profile shifted() const;

 private:
  int dim_ = 0;
  int horizon_ = 0;
  Vector values_;
};

/// Concatenation in strictly increasing subsystem index order.
Vector concat_ordered(const std::map<SubsystemId, Vector>& parts);

struct TopologySpec {
  int subsystem_count = 0;
  std::set<int> controlled;
  std::vector<CouplingEdge> edges;
  int horizon = 1;
};

struct ValidationReport {
  std::vector<std::string> violations;
  std::vector<std::string> warnings;
  bool ok() const { return violations.empty(); }
};

ValidationReport validate_topology(const TopologySpec& spec);

class Topology {
 public:
  /// Throws ConfigError listing the violations of validate_topology.
  explicit Topology(TopologySpec spec);

  int size() const { return count_; }
  int horizon() const { return horizon_; }
  bool is_controlled(SubsystemId s) const;
  std::vector<SubsystemId> controlled() const;
  std::vector<SubsystemId> uncontrolled() const;
  std::vector<SubsystemId> all() const;

  /// Canonical order: lexicographic by (dest, source).
  std::span<const CouplingEdge> edges() const { return edges_; }

  /// Edge indices feeding s, ordered by source.
  std::vector<std::size_t> stack_in(SubsystemId s) const;
  /// Edge indices leaving s, ordered by dest.
  std::vector<std::size_t> stack_out(SubsystemId s) const;
  /// Sources impacting s.
  std::vector<SubsystemId> neighbors(SubsystemId s) const;

  int in_dim(SubsystemId s) const;
  int out_dim(SubsystemId s) const;

 private:
  void check(SubsystemId s) const;

  int count_;
  int horizon_;
  std::set<int> controlled_;
  std::vector<CouplingEdge> edges_;
};

/// 0/1 block permutation stored as an index map: row i takes column source_[i].
class RoutingMatrix {
 public:
  RoutingMatrix() = default;
  RoutingMatrix(std::vector<std::size_t> source_of_row, std::size_t cols);

  std::size_t rows() const { return source_.size(); }
  std::size_t cols() const { return cols_; }
  std::span<const std::size_t> source_of_row() const { return source_; }

  Vector apply(const Vector& v) const;
  Vector apply_transpose(const Vector& v) const;
  Matrix dense() const;

 private:
  std::vector<std::size_t> source_;
  std::size_t cols_ = 0;
};

struct Block {
  std::size_t offset = 0;
  std::size_t length = 0;
};

struct Routing {
  RoutingMatrix global;                    // v_in = global * v_out
  std::vector<RoutingMatrix> per_subsystem;  // G_in^(s), index s-1
  std::vector<Block> in_slice;   // where v_s^in sits in the in-stack
  std::vector<Block> out_slice;  // where v_s^out sits in the out-stack
  std::vector<Block> edge_in;    // edge e's block in the in-stack
  std::vector<Block> edge_out;   // edge e's block in the out-stack
  std::size_t length = 0;        // N * sum of edge dims
};

Routing build_routing(const Topology& topology);

/// In-stack vector of per-entry residual weights 1/scale^2 (time-major blocks).
Vector in_stack_weights(const Topology& topology, const Routing& routing);

}  // namespace hiercoord
