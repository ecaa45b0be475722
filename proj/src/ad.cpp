#include "lookaround/ad.hpp"

#include <algorithm>
#include <cmath>

#include "lookaround/errors.hpp"
#include "lookaround/kernels.hpp"
#include "lookaround/threads.hpp"

namespace lookaround::ad {

namespace {

enum class Op : std::uint8_t {
  kLeaf,
  kConst,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kScale,
  kAddConst,
  kLeakyRelu,
  kSoftplus,
  kClampMin,
  kLog,
  kAbs,
  kConcat,
  kSlice,
  kSum,
  kDot,
  kNorm,
  kNormalize3,
  kLinear,
  kLinearRows,
  kMaxPoolRows,
  kSumPoolRows,
  kQuatExp,
  kQuatMul,
  kQuatConj,
  kGeodesicAngle,
  kChamfer,
  kDepthNll,
};

double softplus_val(double x) {
  // numerically stable ln(1 + e^x)
  if (x > 30.0) return x;
  if (x < -30.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

}  // namespace

struct Tape::Node {
  Op op = Op::kConst;
  int a = -1, b = -1, c = -1;
  int rows = 1, cols = 1;
  double x0 = 0.0;
  std::vector<double> val;
  std::vector<double> grad;
  std::vector<int> iaux;
  std::vector<double> daux;
};

Tape::Tape() = default;
Tape::~Tape() = default;
Tape::Tape(Tape&&) noexcept = default;
Tape& Tape::operator=(Tape&&) noexcept = default;

Var Tape::push(Node&& n) {
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Tape::Node& Tape::at(Var v) {
  if (!v.valid() || v.id >= static_cast<int>(nodes_.size()))
    throw ContractViolation("ad: invalid node handle");
  return nodes_[v.id];
}

const Tape::Node& Tape::at(Var v) const { return const_cast<Tape*>(this)->at(v); }

double Tape::value(Var v) const {
  const Node& n = at(v);
  if (n.val.size() != 1) throw ContractViolation("ad: value() on a non-scalar node");
  return n.val[0];
}

std::span<const double> Tape::values(Var v) const { return at(v).val; }
int Tape::rows(Var v) const { return at(v).rows; }
int Tape::cols(Var v) const { return at(v).cols; }
std::size_t Tape::size(Var v) const { return at(v).val.size(); }

std::span<const double> Tape::grad(Var v) const {
  const Node& n = at(v);
  if (n.grad.size() != n.val.size()) throw ContractViolation("ad: gradient not computed");
  return n.grad;
}

void Tape::clear() { nodes_.clear(); }

std::size_t Tape::node_count() const { return nodes_.size(); }

Var Tape::leaf(std::span<const double> v, int rows, int cols) {
  Node n;
  n.op = Op::kLeaf;
  n.val.assign(v.begin(), v.end());
  n.rows = rows > 0 ? rows : static_cast<int>(v.size());
  n.cols = cols > 0 ? cols : 1;
  if (static_cast<std::size_t>(n.rows) * n.cols != n.val.size())
    throw ContractViolation("ad: leaf shape mismatch");
  return push(std::move(n));
}

Var Tape::constant(std::span<const double> v, int rows, int cols) {
  Var out = leaf(v, rows, cols);
  nodes_[out.id].op = Op::kConst;
  return out;
}

Var Tape::constant(double value) { return constant(std::span<const double>(&value, 1)); }

namespace {
void check_same_size(const char* what, std::size_t a, std::size_t b) {
  if (a != b) throw ContractViolation(std::string("ad: size mismatch in ") + what);
}
}  // namespace

Var Tape::add(Var a, Var b) {
  const Node &na = at(a), &nb = at(b);
  check_same_size("add", na.val.size(), nb.val.size());
  Node n;
  n.op = Op::kAdd;
  n.a = a.id;
  n.b = b.id;
  n.rows = na.rows;
  n.cols = na.cols;
  n.val.resize(na.val.size());
  for (std::size_t i = 0; i < n.val.size(); ++i) n.val[i] = na.val[i] + nb.val[i];
  return push(std::move(n));
}

Var Tape::sub(Var a, Var b) {
  const Node &na = at(a), &nb = at(b);
  check_same_size("sub", na.val.size(), nb.val.size());
  Node n;
  n.op = Op::kSub;
  n.a = a.id;
  n.b = b.id;
  n.rows = na.rows;
  n.cols = na.cols;
  n.val.resize(na.val.size());
  for (std::size_t i = 0; i < n.val.size(); ++i) n.val[i] = na.val[i] - nb.val[i];
  return push(std::move(n));
}

Var Tape::mul(Var a, Var b) {
  const Node &na = at(a), &nb = at(b);
  check_same_size("mul", na.val.size(), nb.val.size());
  Node n;
  n.op = Op::kMul;
  n.a = a.id;
  n.b = b.id;
  n.rows = na.rows;
  n.cols = na.cols;
  n.val.resize(na.val.size());
  for (std::size_t i = 0; i < n.val.size(); ++i) n.val[i] = na.val[i] * nb.val[i];
  return push(std::move(n));
}

Var Tape::div(Var a, Var b) {
  const Node &na = at(a), &nb = at(b);
  check_same_size("div", na.val.size(), nb.val.size());
  Node n;
  n.op = Op::kDiv;
  n.a = a.id;
  n.b = b.id;
  n.rows = na.rows;
  n.cols = na.cols;
  n.val.resize(na.val.size());
  for (std::size_t i = 0; i < n.val.size(); ++i) n.val[i] = na.val[i] / nb.val[i];
  return push(std::move(n));
}

Var Tape::scale(Var a, double factor) {
  const Node& na = at(a);
  Node n;
  n.op = Op::kScale;
  n.a = a.id;
  n.x0 = factor;
  n.rows = na.rows;
  n.cols = na.cols;
  n.val.resize(na.val.size());
  for (std::size_t i = 0; i < n.val.size(); ++i) n.val[i] = factor * na.val[i];
  return push(std::move(n));
}

Var Tape::add_const(Var a, double offset) {
  const Node& na = at(a);
  Node n;
  n.op = Op::kAddConst;
  n.a = a.id;
  n.x0 = offset;
  n.rows = na.rows;
  n.cols = na.cols;
  n.val.resize(na.val.size());
  for (std::size_t i = 0; i < n.val.size(); ++i) n.val[i] = na.val[i] + offset;
  return push(std::move(n));
}

Var Tape::leaky_relu(Var a, double slope) {
  const Node& na = at(a);
  Node n;
  n.op = Op::kLeakyRelu;
  n.a = a.id;
  n.x0 = slope;
  n.rows = na.rows;
  n.cols = na.cols;
  n.val.resize(na.val.size());
  for (std::size_t i = 0; i < n.val.size(); ++i)
    n.val[i] = na.val[i] > 0.0 ? na.val[i] : slope * na.val[i];
  return push(std::move(n));
}

Var Tape::softplus(Var a) {
  const Node& na = at(a);
  Node n;
  n.op = Op::kSoftplus;
  n.a = a.id;
  n.rows = na.rows;
  n.cols = na.cols;
  n.val.resize(na.val.size());
  for (std::size_t i = 0; i < n.val.size(); ++i) n.val[i] = softplus_val(na.val[i]);
  return push(std::move(n));
}

Var Tape::clamp_min(Var a, double floor) {
  const Node& na = at(a);
  Node n;
  n.op = Op::kClampMin;
  n.a = a.id;
  n.x0 = floor;
  n.rows = na.rows;
  n.cols = na.cols;
  n.val.resize(na.val.size());
  for (std::size_t i = 0; i < n.val.size(); ++i) n.val[i] = std::max(na.val[i], floor);
  return push(std::move(n));
}

Var Tape::log(Var a) {
  const Node& na = at(a);
  Node n;
  n.op = Op::kLog;
  n.a = a.id;
  n.rows = na.rows;
  n.cols = na.cols;
  n.val.resize(na.val.size());
  for (std::size_t i = 0; i < n.val.size(); ++i) n.val[i] = std::log(na.val[i]);
  return push(std::move(n));
}

Var Tape::abs(Var a) {
  const Node& na = at(a);
  Node n;
  n.op = Op::kAbs;
  n.a = a.id;
  n.rows = na.rows;
  n.cols = na.cols;
  n.val.resize(na.val.size());
  for (std::size_t i = 0; i < n.val.size(); ++i) n.val[i] = std::abs(na.val[i]);
  return push(std::move(n));
}

Var Tape::concat(Var a, Var b) {
  const Node &na = at(a), &nb = at(b);
  Node n;
  n.op = Op::kConcat;
  n.a = a.id;
  n.b = b.id;
  n.rows = static_cast<int>(na.val.size() + nb.val.size());
  n.cols = 1;
  n.val.reserve(na.val.size() + nb.val.size());
  n.val.insert(n.val.end(), na.val.begin(), na.val.end());
  n.val.insert(n.val.end(), nb.val.begin(), nb.val.end());
  return push(std::move(n));
}

Var Tape::slice(Var a, int offset, int rows, int cols) {
  const Node& na = at(a);
  const std::size_t len = static_cast<std::size_t>(rows) * cols;
  if (offset < 0 || offset + len > na.val.size())
    throw ContractViolation("ad: slice out of range");
  Node n;
  n.op = Op::kSlice;
  n.a = a.id;
  n.rows = rows;
  n.cols = cols;
  n.iaux = {offset};
  n.val.assign(na.val.begin() + offset, na.val.begin() + offset + len);
  return push(std::move(n));
}

Var Tape::sum(Var a) {
  const Node& na = at(a);
  Node n;
  n.op = Op::kSum;
  n.a = a.id;
  double s = 0.0;
  for (double v : na.val) s += v;
  n.val = {s};
  return push(std::move(n));
}

Var Tape::dot(Var a, Var b) {
  const Node &na = at(a), &nb = at(b);
  check_same_size("dot", na.val.size(), nb.val.size());
  Node n;
  n.op = Op::kDot;
  n.a = a.id;
  n.b = b.id;
  double s = 0.0;
  for (std::size_t i = 0; i < na.val.size(); ++i) s += na.val[i] * nb.val[i];
  n.val = {s};
  return push(std::move(n));
}

Var Tape::norm(Var a) {
  const Node& na = at(a);
  Node n;
  n.op = Op::kNorm;
  n.a = a.id;
  double s = 0.0;
  for (double v : na.val) s += v * v;
  n.val = {std::sqrt(s)};
  return push(std::move(n));
}

Var Tape::normalize3(Var a) {
  const Node& na = at(a);
  if (na.val.size() != 3) throw ContractViolation("ad: normalize3 wants a 3-vector");
  Node n;
  n.op = Op::kNormalize3;
  n.a = a.id;
  n.rows = 3;
  const double nn = std::sqrt(na.val[0] * na.val[0] + na.val[1] * na.val[1] +
                              na.val[2] * na.val[2]);
  n.x0 = nn;
  n.val.resize(3);
  for (int i = 0; i < 3; ++i) n.val[i] = nn > 1e-12 ? na.val[i] / nn : 0.0;
  return push(std::move(n));
}

Var Tape::linear(Var w, Var b, Var x) {
  const Node &nw = at(w), &nb = at(b), &nx = at(x);
  const int out = nw.rows, in = nw.cols;
  if (static_cast<int>(nx.val.size()) != in || static_cast<int>(nb.val.size()) != out)
    throw ContractViolation("ad: linear shape mismatch");
  Node n;
  n.op = Op::kLinear;
  n.a = w.id;
  n.b = b.id;
  n.c = x.id;
  n.rows = out;
  n.val.resize(out);
  const bool par = static_cast<std::size_t>(out) * in > 16384;
#pragma omp parallel for schedule(static) num_threads(threads::worker_count()) if (par)
  for (int o = 0; o < out; ++o) {
    const double* wr = nw.val.data() + static_cast<std::size_t>(o) * in;
    double s = nb.val[o];
    for (int i = 0; i < in; ++i) s += wr[i] * nx.val[i];
    n.val[o] = s;
  }
  return push(std::move(n));
}

Var Tape::linear_rows(Var x, Var w, Var b) {
  const Node &nx = at(x), &nw = at(w), &nb = at(b);
  const int out = nw.rows, in = nw.cols, rows = nx.rows;
  if (nx.cols != in || static_cast<int>(nb.val.size()) != out)
    throw ContractViolation("ad: linear_rows shape mismatch");
  Node n;
  n.op = Op::kLinearRows;
  n.a = x.id;
  n.b = w.id;
  n.c = b.id;
  n.rows = rows;
  n.cols = out;
  n.val.resize(static_cast<std::size_t>(rows) * out);
#pragma omp parallel for schedule(static) num_threads(threads::worker_count())
  for (int r = 0; r < rows; ++r) {
    const double* xr = nx.val.data() + static_cast<std::size_t>(r) * in;
    double* yr = n.val.data() + static_cast<std::size_t>(r) * out;
    for (int o = 0; o < out; ++o) {
      const double* wr = nw.val.data() + static_cast<std::size_t>(o) * in;
      double s = nb.val[o];
      for (int i = 0; i < in; ++i) s += wr[i] * xr[i];
      yr[o] = s;
    }
  }
  return push(std::move(n));
}

Var Tape::max_pool_rows(Var x) {
  const Node& nx = at(x);
  const int rows = nx.rows, d = nx.cols;
  if (rows < 1) throw ContractViolation("ad: max_pool_rows on empty input");
  Node n;
  n.op = Op::kMaxPoolRows;
  n.a = x.id;
  n.rows = d;
  n.val.resize(d);
  n.iaux.resize(d);
  for (int j = 0; j < d; ++j) {
    double best = nx.val[j];
    int arg = 0;
    for (int r = 1; r < rows; ++r) {
      const double v = nx.val[static_cast<std::size_t>(r) * d + j];
      if (v > best) {
        best = v;
        arg = r;
      }
    }
    n.val[j] = best;
    n.iaux[j] = arg;
  }
  return push(std::move(n));
}

Var Tape::sum_pool_rows(Var x) {
  const Node& nx = at(x);
  const int rows = nx.rows, d = nx.cols;
  Node n;
  n.op = Op::kSumPoolRows;
  n.a = x.id;
  n.rows = d;
  n.val.assign(d, 0.0);
  for (int r = 0; r < rows; ++r)
    for (int j = 0; j < d; ++j) n.val[j] += nx.val[static_cast<std::size_t>(r) * d + j];
  return push(std::move(n));
}

Var Tape::quat_exp(Var omega) {
  const Node& no = at(omega);
  if (no.val.size() != 3) throw ContractViolation("ad: quat_exp wants a 3-vector");
  Node n;
  n.op = Op::kQuatExp;
  n.a = omega.id;
  n.rows = 4;
  n.val.resize(4);
  const double t = std::sqrt(no.val[0] * no.val[0] + no.val[1] * no.val[1] +
                             no.val[2] * no.val[2]);
  if (t < 1e-8) {
    const double t2 = t * t;
    n.val[0] = 1.0 - t2 / 8.0;
    const double s = 0.5 - t2 / 48.0;
    for (int i = 0; i < 3; ++i) n.val[1 + i] = s * no.val[i];
  } else {
    n.val[0] = std::cos(0.5 * t);
    const double s = std::sin(0.5 * t) / t;
    for (int i = 0; i < 3; ++i) n.val[1 + i] = s * no.val[i];
  }
  return push(std::move(n));
}

Var Tape::quat_mul(Var a, Var b) {
  const Node &na = at(a), &nb = at(b);
  if (na.val.size() != 4 || nb.val.size() != 4)
    throw ContractViolation("ad: quat_mul wants quaternions");
  const double aw = na.val[0], ax = na.val[1], ay = na.val[2], az = na.val[3];
  const double bw = nb.val[0], bx = nb.val[1], by = nb.val[2], bz = nb.val[3];
  Node n;
  n.op = Op::kQuatMul;
  n.a = a.id;
  n.b = b.id;
  n.rows = 4;
  n.val = {aw * bw - ax * bx - ay * by - az * bz, aw * bx + ax * bw + ay * bz - az * by,
           aw * by - ax * bz + ay * bw + az * bx, aw * bz + ax * by - ay * bx + az * bw};
  return push(std::move(n));
}

Var Tape::quat_conj(Var a) {
  const Node& na = at(a);
  if (na.val.size() != 4) throw ContractViolation("ad: quat_conj wants a quaternion");
  Node n;
  n.op = Op::kQuatConj;
  n.a = a.id;
  n.rows = 4;
  n.val = {na.val[0], -na.val[1], -na.val[2], -na.val[3]};
  return push(std::move(n));
}

Var Tape::quat_rotate(Var q, Var v) {
  Var pure = concat(constant(0.0), v);
  Var rotated = quat_mul(quat_mul(q, pure), quat_conj(q));
  return slice(rotated, 1, 3);
}

Var Tape::geodesic_angle(Var q) {
  const Node& nq = at(q);
  if (nq.val.size() != 4) throw ContractViolation("ad: geodesic_angle wants a quaternion");
  Node n;
  n.op = Op::kGeodesicAngle;
  n.a = q.id;
  const double s = std::sqrt(nq.val[1] * nq.val[1] + nq.val[2] * nq.val[2] +
                             nq.val[3] * nq.val[3]);
  n.val = {2.0 * std::atan2(s, std::abs(nq.val[0]))};
  return push(std::move(n));
}

Var Tape::chamfer_to_target(Var points, const PointCloud& target) {
  const Node& np = at(points);
  if (np.cols != 3) throw ContractViolation("ad: chamfer_to_target wants [M x 3] points");
  if (target.empty()) throw ContractViolation("ad: chamfer target is empty");

  std::vector<Vec3> support(np.rows);
  for (int m = 0; m < np.rows; ++m)
    support[m] = Vec3(np.val[3 * m], np.val[3 * m + 1], np.val[3 * m + 2]);
  const auto nn = kernels::nearest_indices(target.points, support);

  Node n;
  n.op = Op::kChamfer;
  n.a = points.id;
  n.iaux.assign(nn.begin(), nn.end());
  n.daux.resize(target.size() * 3);
  for (std::size_t k = 0; k < target.size(); ++k)
    for (int c = 0; c < 3; ++c) n.daux[3 * k + c] = target.points[k][c];

  double total = 0.0;
  for (std::size_t k = 0; k < target.size(); ++k)
    total += (support[nn[k]] - target.points[k]).norm();
  n.val = {total / static_cast<double>(target.size())};
  return push(std::move(n));
}

Var Tape::laplace_depth_nll(Var mean, Var sigma, const DepthMap& gt, double lambda_hat) {
  const Node &nm = at(mean), &ns = at(sigma);
  check_same_size("laplace_depth_nll", nm.val.size(), ns.val.size());
  if (nm.val.size() != gt.values.size())
    throw ContractViolation("ad: depth NLL dimension mismatch");
  if (!(lambda_hat > 0.0)) throw ContractViolation("ad: lambda_hat must be positive");

  Node n;
  n.op = Op::kDepthNll;
  n.a = mean.id;
  n.b = sigma.id;
  n.x0 = 1.0 / lambda_hat;
  n.daux = gt.values;  // NaN marks invalid
  const double sqrt2 = std::sqrt(2.0);
  double total = 0.0;
  for (std::size_t i = 0; i < gt.values.size(); ++i) {
    const double d = gt.values[i];
    if (!std::isfinite(d)) continue;
    const double r = std::abs(d - n.x0 * nm.val[i]);
    total += -std::log(sqrt2 / (2.0 * ns.val[i])) + sqrt2 * r / ns.val[i];
  }
  n.val = {total};
  return push(std::move(n));
}

// ---------------------------------------------------------------------------
// Backward
// ---------------------------------------------------------------------------

void Tape::backward(Var root) {
  const Node& r = at(root);
  if (r.val.size() != 1) throw ContractViolation("ad: backward needs a scalar root");
  for (Node& n : nodes_) n.grad.assign(n.val.size(), 0.0);
  nodes_[root.id].grad[0] = 1.0;
  for (int id = root.id; id >= 0; --id) backward_node(id);
}

void Tape::backward_node(int id) {
  Node& n = nodes_[id];
  bool any = false;
  for (double g : n.grad)
    if (g != 0.0) {
      any = true;
      break;
    }
  if (!any) return;

  auto ga = [&](int i) -> std::vector<double>& { return nodes_[i].grad; };

  switch (n.op) {
    case Op::kLeaf:
    case Op::kConst:
      break;
    case Op::kAdd:
      for (std::size_t i = 0; i < n.val.size(); ++i) {
        ga(n.a)[i] += n.grad[i];
        ga(n.b)[i] += n.grad[i];
      }
      break;
    case Op::kSub:
      for (std::size_t i = 0; i < n.val.size(); ++i) {
        ga(n.a)[i] += n.grad[i];
        ga(n.b)[i] -= n.grad[i];
      }
      break;
    case Op::kMul:
      for (std::size_t i = 0; i < n.val.size(); ++i) {
        ga(n.a)[i] += n.grad[i] * nodes_[n.b].val[i];
        ga(n.b)[i] += n.grad[i] * nodes_[n.a].val[i];
      }
      break;
    case Op::kDiv:
      for (std::size_t i = 0; i < n.val.size(); ++i) {
        const double bv = nodes_[n.b].val[i];
        ga(n.a)[i] += n.grad[i] / bv;
        ga(n.b)[i] -= n.grad[i] * nodes_[n.a].val[i] / (bv * bv);
      }
      break;
    case Op::kScale:
      for (std::size_t i = 0; i < n.val.size(); ++i) ga(n.a)[i] += n.x0 * n.grad[i];
      break;
    case Op::kAddConst:
      for (std::size_t i = 0; i < n.val.size(); ++i) ga(n.a)[i] += n.grad[i];
      break;
    case Op::kLeakyRelu:
      for (std::size_t i = 0; i < n.val.size(); ++i)
        ga(n.a)[i] += n.grad[i] * (nodes_[n.a].val[i] > 0.0 ? 1.0 : n.x0);
      break;
    case Op::kSoftplus:
      for (std::size_t i = 0; i < n.val.size(); ++i) {
        const double x = nodes_[n.a].val[i];
        const double sig = x > 30.0 ? 1.0 : (x < -30.0 ? std::exp(x) : 1.0 / (1.0 + std::exp(-x)));
        ga(n.a)[i] += n.grad[i] * sig;
      }
      break;
    case Op::kClampMin:
      for (std::size_t i = 0; i < n.val.size(); ++i)
        if (nodes_[n.a].val[i] > n.x0) ga(n.a)[i] += n.grad[i];
      break;
    case Op::kLog:
      for (std::size_t i = 0; i < n.val.size(); ++i)
        ga(n.a)[i] += n.grad[i] / nodes_[n.a].val[i];
      break;
    case Op::kAbs:
      for (std::size_t i = 0; i < n.val.size(); ++i) {
        const double x = nodes_[n.a].val[i];
        if (x != 0.0) ga(n.a)[i] += n.grad[i] * (x > 0.0 ? 1.0 : -1.0);
      }
      break;
    case Op::kConcat: {
      const std::size_t na = nodes_[n.a].val.size();
      for (std::size_t i = 0; i < na; ++i) ga(n.a)[i] += n.grad[i];
      for (std::size_t i = 0; i < nodes_[n.b].val.size(); ++i) ga(n.b)[i] += n.grad[na + i];
      break;
    }
    case Op::kSlice: {
      const int off = n.iaux[0];
      for (std::size_t i = 0; i < n.val.size(); ++i) ga(n.a)[off + i] += n.grad[i];
      break;
    }
    case Op::kSum:
      for (std::size_t i = 0; i < nodes_[n.a].val.size(); ++i) ga(n.a)[i] += n.grad[0];
      break;
    case Op::kDot:
      for (std::size_t i = 0; i < nodes_[n.a].val.size(); ++i) {
        ga(n.a)[i] += n.grad[0] * nodes_[n.b].val[i];
        ga(n.b)[i] += n.grad[0] * nodes_[n.a].val[i];
      }
      break;
    case Op::kNorm: {
      const double nv = n.val[0];
      if (nv > 1e-12)
        for (std::size_t i = 0; i < nodes_[n.a].val.size(); ++i)
          ga(n.a)[i] += n.grad[0] * nodes_[n.a].val[i] / nv;
      break;
    }
    case Op::kNormalize3: {
      const double nn = n.x0;
      if (nn > 1e-12) {
        const double udg = n.val[0] * n.grad[0] + n.val[1] * n.grad[1] + n.val[2] * n.grad[2];
        for (int i = 0; i < 3; ++i) ga(n.a)[i] += (n.grad[i] - n.val[i] * udg) / nn;
      }
      break;
    }
    case Op::kLinear: {
      const Node& nw = nodes_[n.a];
      const int out = nw.rows, in = nw.cols;
      std::vector<double>& gw = ga(n.a);
      std::vector<double>& gb = ga(n.b);
      std::vector<double>& gx = ga(n.c);
      const std::vector<double>& xv = nodes_[n.c].val;
      const bool par = static_cast<std::size_t>(out) * in > 16384;
#pragma omp parallel for schedule(static) num_threads(threads::worker_count()) if (par)
      for (int o = 0; o < out; ++o) {
        const double g = n.grad[o];
        if (g == 0.0) continue;
        double* wr = gw.data() + static_cast<std::size_t>(o) * in;
        for (int i = 0; i < in; ++i) wr[i] += g * xv[i];
        gb[o] += g;
      }
#pragma omp parallel for schedule(static) num_threads(threads::worker_count()) if (par)
      for (int i = 0; i < in; ++i) {
        double s = 0.0;
        for (int o = 0; o < out; ++o)
          s += n.grad[o] * nw.val[static_cast<std::size_t>(o) * in + i];
        gx[i] += s;
      }
      break;
    }
    case Op::kLinearRows: {
      const Node& nx = nodes_[n.a];
      const Node& nw = nodes_[n.b];
      const int rows = nx.rows, in = nw.cols, out = nw.rows;
      std::vector<double>& gx = ga(n.a);
      std::vector<double>& gw = ga(n.b);
      std::vector<double>& gb = ga(n.c);
#pragma omp parallel for schedule(static) num_threads(threads::worker_count())
      for (int r = 0; r < rows; ++r) {
        const double* gy = n.grad.data() + static_cast<std::size_t>(r) * out;
        double* gxr = gx.data() + static_cast<std::size_t>(r) * in;
        for (int o = 0; o < out; ++o) {
          if (gy[o] == 0.0) continue;
          const double* wr = nw.val.data() + static_cast<std::size_t>(o) * in;
          for (int i = 0; i < in; ++i) gxr[i] += gy[o] * wr[i];
        }
      }
#pragma omp parallel for schedule(static) num_threads(threads::worker_count())
      for (int o = 0; o < out; ++o) {
        double* wr = gw.data() + static_cast<std::size_t>(o) * in;
        double bs = 0.0;
        for (int r = 0; r < rows; ++r) {
          const double g = n.grad[static_cast<std::size_t>(r) * out + o];
          if (g == 0.0) continue;
          const double* xr = nx.val.data() + static_cast<std::size_t>(r) * in;
          for (int i = 0; i < in; ++i) wr[i] += g * xr[i];
          bs += g;
        }
        gb[o] += bs;
      }
      break;
    }
    case Op::kMaxPoolRows: {
      const int d = static_cast<int>(n.val.size());
      for (int j = 0; j < d; ++j)
        ga(n.a)[static_cast<std::size_t>(n.iaux[j]) * d + j] += n.grad[j];
      break;
    }
    case Op::kSumPoolRows: {
      const Node& nx = nodes_[n.a];
      const int d = static_cast<int>(n.val.size());
      for (int r = 0; r < nx.rows; ++r)
        for (int j = 0; j < d; ++j) ga(n.a)[static_cast<std::size_t>(r) * d + j] += n.grad[j];
      break;
    }
    case Op::kQuatExp: {
      const std::vector<double>& o = nodes_[n.a].val;
      const double t = std::sqrt(o[0] * o[0] + o[1] * o[1] + o[2] * o[2]);
      double s, sp, dw_coeff;  // v = s(t) omega; dv/do = s I + sp o o^T / t; dw/do = dw_coeff o
      if (t < 1e-8) {
        s = 0.5 - t * t / 48.0;
        sp = -1.0 / 24.0;  // ds/dt / t in the limit: s'(t) ~ -t/24 -> s'/t = -1/24
        dw_coeff = -0.25;  // dw/do ~ -omega/4
        for (int i = 0; i < 3; ++i) {
          double g = n.grad[0] * dw_coeff * o[i];
          g += n.grad[1 + i] * s;
          for (int j = 0; j < 3; ++j) g += n.grad[1 + j] * sp * o[j] * o[i];
          ga(n.a)[i] += g;
        }
      } else {
        s = std::sin(0.5 * t) / t;
        const double ds_dt = (0.5 * std::cos(0.5 * t) * t - std::sin(0.5 * t)) / (t * t);
        dw_coeff = -0.5 * std::sin(0.5 * t) / t;
        for (int i = 0; i < 3; ++i) {
          double g = n.grad[0] * dw_coeff * o[i];
          g += n.grad[1 + i] * s;
          for (int j = 0; j < 3; ++j) g += n.grad[1 + j] * (ds_dt / t) * o[j] * o[i];
          ga(n.a)[i] += g;
        }
      }
      break;
    }
    case Op::kQuatMul: {
      const std::vector<double>& a = nodes_[n.a].val;
      const std::vector<double>& b = nodes_[n.b].val;
      const double gw = n.grad[0], gx = n.grad[1], gy = n.grad[2], gz = n.grad[3];
      std::vector<double>& da = ga(n.a);
      std::vector<double>& db = ga(n.b);
      // w = awbw - axbx - ayby - azbz
      da[0] += gw * b[0]; db[0] += gw * a[0];
      da[1] -= gw * b[1]; db[1] -= gw * a[1];
      da[2] -= gw * b[2]; db[2] -= gw * a[2];
      da[3] -= gw * b[3]; db[3] -= gw * a[3];
      // x = awbx + axbw + aybz - azby
      da[0] += gx * b[1]; db[1] += gx * a[0];
      da[1] += gx * b[0]; db[0] += gx * a[1];
      da[2] += gx * b[3]; db[3] += gx * a[2];
      da[3] -= gx * b[2]; db[2] -= gx * a[3];
      // y = awby - axbz + aybw + azbx
      da[0] += gy * b[2]; db[2] += gy * a[0];
      da[1] -= gy * b[3]; db[3] -= gy * a[1];
      da[2] += gy * b[0]; db[0] += gy * a[2];
      da[3] += gy * b[1]; db[1] += gy * a[3];
      // z = awbz + axby - aybx + azbw
      da[0] += gz * b[3]; db[3] += gz * a[0];
      da[1] += gz * b[2]; db[2] += gz * a[1];
      da[2] -= gz * b[1]; db[1] -= gz * a[2];
      da[3] += gz * b[0]; db[0] += gz * a[3];
      break;
    }
    case Op::kQuatConj:
      ga(n.a)[0] += n.grad[0];
      for (int i = 1; i < 4; ++i) ga(n.a)[i] -= n.grad[i];
      break;
    case Op::kGeodesicAngle: {
      const std::vector<double>& q = nodes_[n.a].val;
      const double s = std::sqrt(q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
      const double w = q[0];
      const double denom = w * w + s * s;
      if (s > 1e-12 && denom > 1e-300) {
        const double dth_ds = 2.0 * std::abs(w) / denom;
        const double dth_dw = -2.0 * (w >= 0.0 ? 1.0 : -1.0) * s / denom;
        ga(n.a)[0] += n.grad[0] * dth_dw;
        for (int i = 1; i < 4; ++i) ga(n.a)[i] += n.grad[0] * dth_ds * q[i] / s;
      }
      break;
    }
    case Op::kChamfer: {
      const std::size_t targets = n.iaux.size();
      const double g = n.grad[0] / static_cast<double>(targets);
      std::vector<double>& gp = ga(n.a);
      const std::vector<double>& pv = nodes_[n.a].val;
      for (std::size_t k = 0; k < targets; ++k) {
        const int m = n.iaux[k];
        const double dx = pv[3 * m] - n.daux[3 * k];
        const double dy = pv[3 * m + 1] - n.daux[3 * k + 1];
        const double dz = pv[3 * m + 2] - n.daux[3 * k + 2];
        const double dist = std::sqrt(dx * dx + dy * dy + dz * dz);
        if (dist < 1e-12) continue;
        gp[3 * m] += g * dx / dist;
        gp[3 * m + 1] += g * dy / dist;
        gp[3 * m + 2] += g * dz / dist;
      }
      break;
    }
    case Op::kDepthNll: {
      const double sqrt2 = std::sqrt(2.0);
      const std::vector<double>& mv = nodes_[n.a].val;
      const std::vector<double>& sv = nodes_[n.b].val;
      std::vector<double>& gm = ga(n.a);
      std::vector<double>& gs = ga(n.b);
      for (std::size_t i = 0; i < n.daux.size(); ++i) {
        const double d = n.daux[i];
        if (!std::isfinite(d)) continue;
        const double r = d - n.x0 * mv[i];
        const double sgn = r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0);
        gm[i] += n.grad[0] * (-n.x0) * sgn * sqrt2 / sv[i];
        gs[i] += n.grad[0] * (1.0 / sv[i] - sqrt2 * std::abs(r) / (sv[i] * sv[i]));
      }
      break;
    }
  }
}

}  // namespace lookaround::ad
