#include "ad/graph.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace covbench::ad {

namespace {

[[noreturn]] void shape_error(const char* op, const Array& a, const Array& b) {
  throw std::invalid_argument(std::string(op) + ": incompatible shapes " + a.shape_str() + " and " +
                              b.shape_str());
}

// Trailing-suffix broadcast test: true when small's shape equals a trailing
// suffix of big's shape.
bool is_suffix(const std::vector<int64_t>& big, const std::vector<int64_t>& small) {
  if (small.size() > big.size()) return false;
  return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

Value make_node(Array value, std::vector<Value> parents, OpKind op, std::function<void(Node&)> bwd) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->parents = std::move(parents);
  n->op = op;
  for (const auto& p : n->parents)
    if (p->requires_grad) n->requires_grad = true;
  if (n->requires_grad) n->backward = std::move(bwd);
  return n;
}

double stable_softplus(double x) {
  if (x > 35.0) return x;
  if (x < -35.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// For a (big op small) broadcast, accumulate g (big-shaped) into the
// small-shaped parent by summing over the repeated leading block.
void accumulate_reduced(Node& parent, const Array& g) {
  const int64_t small_n = parent.value.size();
  if (g.size() == small_n && parent.value.shape() == g.shape()) {
    parent.accumulate(g);
    return;
  }
  Array red(parent.value.shape());
  const int64_t big_n = g.size();
  for (int64_t i = 0; i < big_n; ++i) red[i % small_n] += g[i];
  parent.accumulate(red);
}

}  // namespace

const char* op_name(OpKind k) {
  switch (k) {
    case OpKind::leaf: return "leaf";
    case OpKind::constant: return "constant";
    case OpKind::add: return "add";
    case OpKind::mul: return "mul";
    case OpKind::matmul: return "matmul";
    case OpKind::tanh_: return "tanh";
    case OpKind::relu: return "relu";
    case OpKind::softplus: return "softplus";
    case OpKind::exp_: return "exp";
    case OpKind::log_: return "log";
    case OpKind::sum: return "sum";
    case OpKind::mean: return "mean";
    case OpKind::logsumexp: return "logsumexp";
    case OpKind::slice: return "slice";
    case OpKind::concat: return "concat";
    case OpKind::affine: return "affine";
    case OpKind::custom: return "custom";
  }
  return "?";
}

void Node::accumulate(const Array& g) {
  if (!has_adjoint) {
    adjoint = g;
    has_adjoint = true;
    return;
  }
  double* a = adjoint.data();
  const double* b = g.data();
  const int64_t n = adjoint.size();
  for (int64_t i = 0; i < n; ++i) a[i] += b[i];
}

Value constant(Array v) {
  auto n = std::make_shared<Node>();
  n->value = std::move(v);
  n->op = OpKind::constant;
  return n;
}

Value leaf(Array v, std::string name) {
  auto n = std::make_shared<Node>();
  n->value = std::move(v);
  n->op = OpKind::leaf;
  n->requires_grad = true;
  n->leaf_name = std::move(name);
  return n;
}

Value add(const Value& a, const Value& b) {
  const Value& big = a->value.size() >= b->value.size() ? a : b;
  const Value& small = a->value.size() >= b->value.size() ? b : a;
  if (!is_suffix(big->value.shape(), small->value.shape())) shape_error("add", a->value, b->value);
  Array out = big->value;
  const int64_t sn = small->value.size();
  const double* s = small->value.data();
  double* o = out.data();
  const int64_t n = out.size();
  for (int64_t i = 0; i < n; ++i) o[i] += s[i % sn];
  return make_node(std::move(out), {a, b}, OpKind::add, [](Node& self) {
    for (auto& p : self.parents)
      if (p->requires_grad) accumulate_reduced(*p, self.adjoint);
  });
}

Value mul(const Value& a, const Value& b) {
  const bool a_big = a->value.size() >= b->value.size();
  const Value& big = a_big ? a : b;
  const Value& small = a_big ? b : a;
  if (!is_suffix(big->value.shape(), small->value.shape())) shape_error("mul", a->value, b->value);
  Array out = big->value;
  const int64_t sn = small->value.size();
  const double* s = small->value.data();
  double* o = out.data();
  const int64_t n = out.size();
  for (int64_t i = 0; i < n; ++i) o[i] *= s[i % sn];
  return make_node(std::move(out), {a, b}, OpKind::mul, [a_big](Node& self) {
    Node& big_p = a_big ? *self.parents[0] : *self.parents[1];
    Node& small_p = a_big ? *self.parents[1] : *self.parents[0];
    const Array& g = self.adjoint;
    const int64_t n = g.size();
    const int64_t sn = small_p.value.size();
    if (big_p.requires_grad) {
      Array gb(big_p.value.shape());
      const double* s = small_p.value.data();
      for (int64_t i = 0; i < n; ++i) gb[i] = g[i] * s[i % sn];
      big_p.accumulate(gb);
    }
    if (small_p.requires_grad) {
      Array gs(small_p.value.shape());
      const double* bv = big_p.value.data();
      for (int64_t i = 0; i < n; ++i) gs[i % sn] += g[i] * bv[i];
      small_p.accumulate(gs);
    }
  });
}

Value sub(const Value& a, const Value& b) { return add(a, scale(b, -1.0)); }

Value scale(const Value& a, double c) {
  Array out = a->value;
  for (int64_t i = 0; i < out.size(); ++i) out[i] *= c;
  return make_node(std::move(out), {a}, OpKind::mul, [c](Node& self) {
    Node& p = *self.parents[0];
    Array g = self.adjoint;
    for (int64_t i = 0; i < g.size(); ++i) g[i] *= c;
    p.accumulate(g);
  });
}

Value add_const(const Value& a, double c) {
  Array out = a->value;
  for (int64_t i = 0; i < out.size(); ++i) out[i] += c;
  return make_node(std::move(out), {a}, OpKind::add, [](Node& self) {
    self.parents[0]->accumulate(self.adjoint);
  });
}

namespace {

// C (m,n) = A (m,k) @ B (k,n), ikj order.
void matmul_into(double* c, const double* a, const double* b, int64_t m, int64_t k, int64_t n) {
  std::fill(c, c + m * n, 0.0);
  for (int64_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    for (int64_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b + p * n;
      for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C (m,n) += A (m,k) @ B^T where Bt is (n,k)
void matmul_bt_add(double* c, const double* a, const double* bt, int64_t m, int64_t k, int64_t n) {
  for (int64_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    for (int64_t j = 0; j < n; ++j) {
      const double* btrow = bt + j * k;
      double acc = 0.0;
      for (int64_t p = 0; p < k; ++p) acc += arow[p] * btrow[p];
      crow[j] += acc;
    }
  }
}

// C (k,n) += A^T @ G where A is (m,k), G is (m,n)
void matmul_at_add(double* c, const double* a, const double* g, int64_t m, int64_t k, int64_t n) {
  for (int64_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    const double* grow = g + i * n;
    for (int64_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      double* crow = c + p * n;
      for (int64_t j = 0; j < n; ++j) crow[j] += av * grow[j];
    }
  }
}

}  // namespace

Value matmul(const Value& a, const Value& b) {
  if (a->value.rank() != 2 || b->value.rank() != 2 || a->value.cols() != b->value.rows())
    shape_error("matmul", a->value, b->value);
  const int64_t m = a->value.rows(), k = a->value.cols(), n = b->value.cols();
  Array out({m, n});
  matmul_into(out.data(), a->value.data(), b->value.data(), m, k, n);
  return make_node(std::move(out), {a, b}, OpKind::matmul, [m, k, n](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    const double* g = self.adjoint.data();
    if (pa.requires_grad) {
      Array ga({m, k});
      matmul_bt_add(ga.data(), g, pb.value.data(), m, n, k);
      pa.accumulate(ga);
    }
    if (pb.requires_grad) {
      Array gb({k, n});
      matmul_at_add(gb.data(), pa.value.data(), g, m, k, n);
      pb.accumulate(gb);
    }
  });
}

namespace {

template <typename F, typename G>
Value unary_op(const Value& a, OpKind kind, F fwd, G grad_from_in_out) {
  Array out = a->value;
  for (int64_t i = 0; i < out.size(); ++i) out[i] = fwd(out[i]);
  return make_node(std::move(out), {a}, kind, [grad_from_in_out](Node& self) {
    Node& p = *self.parents[0];
    Array g(p.value.shape());
    const int64_t n = g.size();
    for (int64_t i = 0; i < n; ++i) g[i] = self.adjoint[i] * grad_from_in_out(p.value[i], self.value[i]);
    p.accumulate(g);
  });
}

}  // namespace

Value tanh_op(const Value& a) {
  return unary_op(a, OpKind::tanh_, [](double x) { return std::tanh(x); },
                  [](double, double y) { return 1.0 - y * y; });
}

Value relu(const Value& a) {
  return unary_op(a, OpKind::relu, [](double x) { return x > 0.0 ? x : 0.0; },
                  [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Value softplus(const Value& a) {
  return unary_op(a, OpKind::softplus, [](double x) { return stable_softplus(x); },
                  [](double x, double) { return sigmoid(x); });
}

Value exp_op(const Value& a) {
  return unary_op(a, OpKind::exp_, [](double x) { return std::exp(x); },
                  [](double, double y) { return y; });
}

Value log_op(const Value& a) {
  for (int64_t i = 0; i < a->value.size(); ++i)
    if (!(a->value[i] > 0.0)) {
      std::ostringstream os;
      os << "log: non-positive input " << a->value[i] << " at flat index " << i << " of shape "
         << a->value.shape_str();
      throw std::domain_error(os.str());
    }
  return unary_op(a, OpKind::log_, [](double x) { return std::log(x); },
                  [](double x, double) { return 1.0 / x; });
}

Value sum(const Value& a) {
  double acc = 0.0;
  for (int64_t i = 0; i < a->value.size(); ++i) acc += a->value[i];
  return make_node(Array::scalar(acc), {a}, OpKind::sum, [](Node& self) {
    Node& p = *self.parents[0];
    p.accumulate(Array::full(p.value.shape(), self.adjoint.item()));
  });
}

Value mean(const Value& a) {
  const double inv = 1.0 / static_cast<double>(a->value.size());
  double acc = 0.0;
  for (int64_t i = 0; i < a->value.size(); ++i) acc += a->value[i];
  return make_node(Array::scalar(acc * inv), {a}, OpKind::mean, [inv](Node& self) {
    Node& p = *self.parents[0];
    p.accumulate(Array::full(p.value.shape(), self.adjoint.item() * inv));
  });
}

Value logsumexp(const Value& a) {
  const Array& x = a->value;
  double m = x[0];
  for (int64_t i = 1; i < x.size(); ++i) m = std::max(m, x[i]);
  double acc = 0.0;
  for (int64_t i = 0; i < x.size(); ++i) acc += std::exp(x[i] - m);
  const double lse = m + std::log(acc);
  return make_node(Array::scalar(lse), {a}, OpKind::logsumexp, [lse](Node& self) {
    Node& p = *self.parents[0];
    Array g(p.value.shape());
    const double gv = self.adjoint.item();
    for (int64_t i = 0; i < g.size(); ++i) g[i] = gv * std::exp(p.value[i] - lse);
    p.accumulate(g);
  });
}

Value slice(const Value& a, int axis, int64_t start, int64_t len) {
  const Array& v = a->value;
  const int rank = v.rank();
  if (rank < 1 || rank > 2 || axis < 0 || axis >= rank)
    throw std::invalid_argument("slice: unsupported axis " + std::to_string(axis) + " for shape " + v.shape_str());
  const int64_t extent = v.dim(axis);
  if (start < 0 || len <= 0 || start + len > extent)
    throw std::invalid_argument("slice: range [" + std::to_string(start) + "," + std::to_string(start + len) +
                                ") out of bounds for shape " + v.shape_str());
  Array out;
  if (rank == 1 || axis == 0) {
    const int64_t rowlen = rank == 2 ? v.cols() : 1;
    out = rank == 2 ? Array({len, v.cols()}) : Array({len});
    std::copy(v.data() + start * rowlen, v.data() + (start + len) * rowlen, out.data());
  } else {
    out = Array({v.rows(), len});
    for (int64_t r = 0; r < v.rows(); ++r)
      std::copy(v.data() + r * v.cols() + start, v.data() + r * v.cols() + start + len,
                out.data() + r * len);
  }
  return make_node(std::move(out), {a}, OpKind::slice, [axis, start, len](Node& self) {
    Node& p = *self.parents[0];
    Array g(p.value.shape());
    const Array& adj = self.adjoint;
    if (p.value.rank() == 1 || axis == 0) {
      const int64_t rowlen = p.value.rank() == 2 ? p.value.cols() : 1;
      std::copy(adj.data(), adj.data() + adj.size(), g.data() + start * rowlen);
    } else {
      for (int64_t r = 0; r < p.value.rows(); ++r)
        std::copy(adj.data() + r * len, adj.data() + (r + 1) * len, g.data() + r * p.value.cols() + start);
    }
    p.accumulate(g);
  });
}

Value concat(const Value& a, const Value& b, int axis) {
  const Array& av = a->value;
  const Array& bv = b->value;
  if (av.rank() != bv.rank() || av.rank() < 1 || av.rank() > 2) shape_error("concat", av, bv);
  Array out;
  if (av.rank() == 1) {
    if (axis != 0) throw std::invalid_argument("concat: axis out of range for rank-1");
    out = Array({av.size() + bv.size()});
    std::copy(av.data(), av.data() + av.size(), out.data());
    std::copy(bv.data(), bv.data() + bv.size(), out.data() + av.size());
  } else if (axis == 0) {
    if (av.cols() != bv.cols()) shape_error("concat", av, bv);
    out = Array({av.rows() + bv.rows(), av.cols()});
    std::copy(av.data(), av.data() + av.size(), out.data());
    std::copy(bv.data(), bv.data() + bv.size(), out.data() + av.size());
  } else {
    if (av.rows() != bv.rows()) shape_error("concat", av, bv);
    out = Array({av.rows(), av.cols() + bv.cols()});
    for (int64_t r = 0; r < av.rows(); ++r) {
      std::copy(av.data() + r * av.cols(), av.data() + (r + 1) * av.cols(), out.data() + r * out.cols());
      std::copy(bv.data() + r * bv.cols(), bv.data() + (r + 1) * bv.cols(),
                out.data() + r * out.cols() + av.cols());
    }
  }
  const int64_t a_rows = av.rank() == 2 ? av.rows() : av.size();
  const int64_t a_cols = av.rank() == 2 ? av.cols() : 1;
  return make_node(std::move(out), {a, b}, OpKind::concat, [axis, a_rows, a_cols](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    const Array& adj = self.adjoint;
    if (pa.value.rank() == 1) {
      const int64_t na = pa.value.size();
      if (pa.requires_grad) {
        Array g(pa.value.shape());
        std::copy(adj.data(), adj.data() + na, g.data());
        pa.accumulate(g);
      }
      if (pb.requires_grad) {
        Array g(pb.value.shape());
        std::copy(adj.data() + na, adj.data() + adj.size(), g.data());
        pb.accumulate(g);
      }
    } else if (axis == 0) {
      if (pa.requires_grad) {
        Array g(pa.value.shape());
        std::copy(adj.data(), adj.data() + g.size(), g.data());
        pa.accumulate(g);
      }
      if (pb.requires_grad) {
        Array g(pb.value.shape());
        std::copy(adj.data() + pa.value.size(), adj.data() + adj.size(), g.data());
        pb.accumulate(g);
      }
    } else {
      const int64_t cols = adj.cols();
      if (pa.requires_grad) {
        Array g(pa.value.shape());
        for (int64_t r = 0; r < a_rows; ++r)
          std::copy(adj.data() + r * cols, adj.data() + r * cols + a_cols, g.data() + r * a_cols);
        pa.accumulate(g);
      }
      if (pb.requires_grad) {
        Array g(pb.value.shape());
        const int64_t b_cols = cols - a_cols;
        for (int64_t r = 0; r < a_rows; ++r)
          std::copy(adj.data() + r * cols + a_cols, adj.data() + (r + 1) * cols, g.data() + r * b_cols);
        pb.accumulate(g);
      }
    }
  });
}

Value affine(const Value& x, const Value& w, const Value& b) {
  const Array& xv = x->value;
  const Array& wv = w->value;
  const Array& bv = b->value;
  if (xv.rank() != 2 || wv.rank() != 2 || xv.cols() != wv.rows()) shape_error("affine", xv, wv);
  if (bv.rank() != 1 || bv.size() != wv.cols()) shape_error("affine", wv, bv);
  const int64_t m = xv.rows(), k = xv.cols(), n = wv.cols();
  Array out({m, n});
  matmul_into(out.data(), xv.data(), wv.data(), m, k, n);
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < n; ++j) out.at(i, j) += bv[j];
  return make_node(std::move(out), {x, w, b}, OpKind::affine, [m, k, n](Node& self) {
    Node& px = *self.parents[0];
    Node& pw = *self.parents[1];
    Node& pb = *self.parents[2];
    const double* g = self.adjoint.data();
    if (px.requires_grad) {
      Array gx({m, k});
      matmul_bt_add(gx.data(), g, pw.value.data(), m, n, k);
      px.accumulate(gx);
    }
    if (pw.requires_grad) {
      Array gw({k, n});
      matmul_at_add(gw.data(), px.value.data(), g, m, k, n);
      pw.accumulate(gw);
    }
    if (pb.requires_grad) {
      Array gb({n});
      for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j) gb[j] += g[i * n + j];
      pb.accumulate(gb);
    }
  });
}

Value custom(Array value, std::vector<Value> parents, std::function<void(Node&)> backward) {
  return make_node(std::move(value), std::move(parents), OpKind::custom, std::move(backward));
}

Value forward_primitive(OpKind kind, std::span<const Value> in, const SliceSpec* spec) {
  auto need = [&](size_t n) {
    if (in.size() != n)
      throw std::invalid_argument(std::string(op_name(kind)) + ": expected " + std::to_string(n) +
                                  " inputs, got " + std::to_string(in.size()));
  };
  switch (kind) {
    case OpKind::add: need(2); return add(in[0], in[1]);
    case OpKind::mul: need(2); return mul(in[0], in[1]);
    case OpKind::matmul: need(2); return matmul(in[0], in[1]);
    case OpKind::tanh_: need(1); return tanh_op(in[0]);
    case OpKind::relu: need(1); return relu(in[0]);
    case OpKind::softplus: need(1); return softplus(in[0]);
    case OpKind::exp_: need(1); return exp_op(in[0]);
    case OpKind::log_: need(1); return log_op(in[0]);
    case OpKind::sum: need(1); return sum(in[0]);
    case OpKind::mean: need(1); return mean(in[0]);
    case OpKind::logsumexp: need(1); return logsumexp(in[0]);
    case OpKind::slice:
      need(1);
      if (!spec) throw std::invalid_argument("slice: missing spec");
      return slice(in[0], spec->axis, spec->start, spec->len);
    case OpKind::concat:
      need(2);
      return concat(in[0], in[1], spec ? spec->axis : 0);
    case OpKind::affine: need(3); return affine(in[0], in[1], in[2]);
    default:
      throw std::invalid_argument(std::string("forward_primitive: not a primitive: ") + op_name(kind));
  }
}

namespace {

std::atomic<int> g_backward_epoch{1};

void topo_order(const Value& root, std::vector<Node*>& order) {
  const int token = g_backward_epoch.fetch_add(1) * 2;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.emplace_back(root.get(), 0);
  root->topo_mark = token;  // in progress
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      Node* p = node->parents[idx++].get();
      if (p->requires_grad && p->topo_mark != token && p->topo_mark != token + 1) {
        p->topo_mark = token;
        stack.emplace_back(p, 0);
      }
    } else {
      node->topo_mark = token + 1;  // done
      order.push_back(node);
      stack.pop_back();
    }
  }
}

}  // namespace

std::map<std::string, Array> backward(const Value& root) {
  if (root->value.size() != 1)
    throw std::invalid_argument("backward: root must be scalar-valued, got shape " + root->value.shape_str());
  std::map<std::string, Array> grads;
  if (!root->requires_grad) return grads;

  std::vector<Node*> order;
  topo_order(root, order);
  for (Node* n : order) {
    n->has_adjoint = false;
    n->adjoint = Array();
  }
  root->accumulate(Array::full(root->value.shape(), 1.0));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (!n->has_adjoint) continue;  // unreachable through differentiable paths
    if (n->backward) n->backward(*n);
    if (!n->leaf_name.empty()) grads.emplace(n->leaf_name, n->adjoint);
  }
  return grads;
}

double relative_error(double a, double b) {
  const double denom = std::max({std::fabs(a), std::fabs(b), 1e-6});
  return std::fabs(a - b) / denom;
}

GradcheckReport gradcheck(const std::function<Value(const Value&)>& make_loss, const Array& params,
                          double step, double tol) {
  if (!(step > 0.0) || !(tol > 0.0)) throw std::invalid_argument("gradcheck: step and tol must be positive");
  GradcheckReport rep;

  auto eval = [&](const Array& p, int64_t coord) {
    Value root = make_loss(leaf(p, "p"));
    if (root->value.size() != 1)
      throw std::invalid_argument("gradcheck: loss must be scalar");
    const double f = root->value.item();
    if (!std::isfinite(f)) {
      std::ostringstream os;
      os << "gradcheck: non-finite loss at probe of coordinate " << coord;
      throw std::domain_error(os.str());
    }
    return f;
  };

  Value root = make_loss(leaf(params, "p"));
  if (root->value.size() != 1) throw std::invalid_argument("gradcheck: loss must be scalar");
  const double f0 = root->value.item();
  if (!std::isfinite(f0)) throw std::domain_error("gradcheck: non-finite loss at base point");
  auto grads = backward(root);
  const auto it = grads.find("p");
  Array g = it != grads.end() ? it->second : Array::zeros(params.shape());

  rep.ok = true;
  for (int64_t i = 0; i < params.size(); ++i) {
    Array plus = params, minus = params;
    plus[i] += step;
    minus[i] -= step;
    const double fp = eval(plus, i);
    const double fm = eval(minus, i);
    const double fd = (fp - fm) / (2.0 * step);
    // Central second difference blows up at kinks; a smooth loss gives O(step).
    const double kink = std::fabs(fp + fm - 2.0 * f0) / step;
    if (kink > 0.1) {
      rep.ok = false;
      rep.worst_index = i;
      rep.worst_rel_err = kink;
      rep.analytic = g[i];
      rep.numeric = fd;
      rep.message = "suspected non-differentiable coordinate " + std::to_string(i);
      return rep;
    }
    const double rel = relative_error(g[i], fd);
    if (rel > rep.worst_rel_err) {
      rep.worst_rel_err = rel;
      rep.worst_index = i;
      rep.analytic = g[i];
      rep.numeric = fd;
    }
  }
  rep.ok = rep.worst_rel_err <= tol;
  if (!rep.ok && rep.message.empty()) {
    std::ostringstream os;
    os << "worst coordinate " << rep.worst_index << ": analytic " << rep.analytic << " vs numeric "
       << rep.numeric << " (rel " << rep.worst_rel_err << ")";
    rep.message = os.str();
  }
  return rep;
}

}  // namespace covbench::ad
