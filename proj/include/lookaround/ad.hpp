#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "lookaround/geometry.hpp"

namespace lookaround::ad {

/// Handle into a Tape.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

/// Reverse-mode tape over a fixed set of primitives: affine maps, leaky
/// ReLU, softplus, elementwise arithmetic, pooling over rows, quaternion
/// algebra for the pose heads, and fused loss heads. Values are computed
/// eagerly as the graph is built; backward() walks the tape in reverse.
/// Row-batched ops parallelize over disjoint output slots, so gradients are
/// bit-identical for any worker count.
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(Tape&&) noexcept;
  Tape& operator=(Tape&&) noexcept;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // --- leaves ------------------------------------------------------------
  Var leaf(std::span<const double> values, int rows = 0, int cols = 0);
  Var constant(std::span<const double> values, int rows = 0, int cols = 0);
  Var constant(double value);

  // --- elementwise -------------------------------------------------------
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var div(Var a, Var b);
  Var scale(Var a, double factor);
  Var add_const(Var a, double offset);
  Var leaky_relu(Var a, double slope);
  Var softplus(Var a);
  Var clamp_min(Var a, double floor);
  Var log(Var a);
  Var abs(Var a);

  // --- shape / reductions -------------------------------------------------
  Var concat(Var a, Var b);
  Var slice(Var a, int offset, int rows, int cols = 1);
  Var sum(Var a);
  Var dot(Var a, Var b);
  Var norm(Var a);        // euclidean norm; zero-subgradient at 0
  Var normalize3(Var a);  // v / |v|

  // --- affine -------------------------------------------------------------
  /// y = W x + b, W is [out x in] row-major.
  Var linear(Var w, Var b, Var x);
  /// Y = X W^T + b per row, X is [N x in], result [N x out].
  Var linear_rows(Var x, Var w, Var b);

  // --- pooling over rows ----------------------------------------------------
  Var max_pool_rows(Var x);  // [N x d] -> [d], first maximum wins
  Var sum_pool_rows(Var x);  // [N x d] -> [d], summed in row order

  // --- quaternion ops (w, x, y, z) -----------------------------------------
  Var quat_exp(Var omega);  // axis-angle -> unit quaternion
  Var quat_mul(Var a, Var b);
  Var quat_conj(Var a);
  Var quat_rotate(Var q, Var v);  // q (0,v) q*
  Var geodesic_angle(Var q);      // 2 atan2(|vec|, |w|)

  // --- fused loss heads -----------------------------------------------------
  /// Mean over target points of the distance to the nearest row of `points`
  /// ([M x 3]); the support-fitting loss.
  Var chamfer_to_target(Var points, const PointCloud& target);
  /// Laplace depth NLL against an observed map (invalid pixels skipped);
  /// prediction scaled into observed units by 1/lambda_hat.
  Var laplace_depth_nll(Var mean, Var sigma, const DepthMap& gt, double lambda_hat);

  // --- execution ------------------------------------------------------------
  double value(Var v) const;
  std::span<const double> values(Var v) const;
  int rows(Var v) const;
  int cols(Var v) const;
  std::size_t size(Var v) const;

  /// Reverse pass from a scalar root; call once per built graph.
  void backward(Var root);
  std::span<const double> grad(Var v) const;

  void clear();
  std::size_t node_count() const;

 private:
  struct Node;
  Var push(Node&& n);
  Node& at(Var v);
  const Node& at(Var v) const;
  void backward_node(int id);

  std::vector<Node> nodes_;
};

}  // namespace lookaround::ad
