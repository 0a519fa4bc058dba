#pragma once

#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ad/array.hpp"

namespace covbench::ad {

enum class OpKind {
  leaf,
  constant,
  add,
  mul,
  matmul,
  tanh_,
  relu,
  softplus,
  exp_,
  log_,
  sum,
  mean,
  logsumexp,
  slice,
  concat,
  affine,
  custom,
};

const char* op_name(OpKind k);

struct Node;
using Value = std::shared_ptr<Node>;

// One node of the computation graph. `backward` reads this node's adjoint and
// accumulates into the parents' adjoints; it runs exactly once per node.
struct Node {
  Array value;
  std::vector<Value> parents;
  std::function<void(Node&)> backward;
  Array adjoint;
  bool has_adjoint = false;
  bool requires_grad = false;
  OpKind op = OpKind::constant;
  std::string leaf_name;
  int topo_mark = 0;

  void accumulate(const Array& g);
};

Value constant(Array v);
Value leaf(Array v, std::string name);

// Elementwise binary ops with trailing-shape broadcast: the smaller operand's
// shape must equal a trailing suffix of the larger one's.
Value add(const Value& a, const Value& b);
Value mul(const Value& a, const Value& b);
Value sub(const Value& a, const Value& b);

Value scale(const Value& a, double c);
Value add_const(const Value& a, double c);

Value matmul(const Value& a, const Value& b);  // strictly 2-D
Value tanh_op(const Value& a);
Value relu(const Value& a);
Value softplus(const Value& a);
Value exp_op(const Value& a);
Value log_op(const Value& a);  // rejects non-positive inputs

Value sum(const Value& a);    // full reduction to scalar
Value mean(const Value& a);   // full reduction to scalar
Value logsumexp(const Value& a);  // full reduction to scalar

// axis 0 slices rows of a 2-D array (or elements of a 1-D array); axis 1
// slices columns of a 2-D array. `len` elements starting at `start`.
Value slice(const Value& a, int axis, int64_t start, int64_t len);
Value concat(const Value& a, const Value& b, int axis);

// x (m,k) @ w (k,n) + row-broadcast b (n)
Value affine(const Value& x, const Value& w, const Value& b);

// Custom primitive: caller supplies the forward value and the local gradient
// rule. Parents receive accumulated adjoints through `backward`.
Value custom(Array value, std::vector<Value> parents, std::function<void(Node&)> backward);

struct SliceSpec {
  int axis = 0;
  int64_t start = 0;
  int64_t len = 0;
};

// Enum-driven constructor used by generic code and the primitive test sweep.
Value forward_primitive(OpKind kind, std::span<const Value> inputs, const SliceSpec* spec = nullptr);

// Reverse-mode sweep from a scalar root; returns the adjoint of every named
// leaf reachable from the root. Rejects non-scalar roots.
std::map<std::string, Array> backward(const Value& root);

struct GradcheckReport {
  bool ok = false;
  int64_t worst_index = -1;
  double worst_rel_err = 0.0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::string message;
};

// Compares reverse-mode gradients against central finite differences,
// coordinate by coordinate. `make_loss` must build a scalar graph over the
// single leaf it is given. Suspected kinks are reported as failures.
GradcheckReport gradcheck(const std::function<Value(const Value&)>& make_loss, const Array& params,
                          double step, double tol);

double relative_error(double a, double b);

}  // namespace covbench::ad
