#include "gmlab/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace gmlab {

std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (auto d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}

namespace detail {

namespace {
thread_local std::uint64_t g_next_id = 1;

void check_finite(const char* op, const std::vector<double>& v) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      throw NumericError(std::string("non-finite value produced by op '") +
                         op + "'");
    }
  }
}
}  // namespace

NodePtr make_node(Shape shape, std::vector<double> val, bool requires_grad,
                  const char* op_name) {
  if (shape_numel(shape) != val.size()) {
    throw ContractError(std::string("tensor '") + op_name +
                        "': data length does not match shape");
  }
  check_finite(op_name, val);
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->val = std::move(val);
  n->requires_grad = requires_grad;
  n->id = g_next_id++;
  return n;
}

}  // namespace detail

using detail::Node;
using detail::NodePtr;

Tensor Tensor::constant(Shape shape, std::vector<double> data) {
  return Tensor(detail::make_node(std::move(shape), std::move(data), false,
                                  "constant"));
}

Tensor Tensor::param(Shape shape, std::vector<double> data) {
  return Tensor(
      detail::make_node(std::move(shape), std::move(data), true, "param"));
}

Tensor Tensor::zeros(Shape shape) {
  std::vector<double> d(shape_numel(shape), 0.0);
  return constant(std::move(shape), std::move(d));
}

Tensor Tensor::ones(Shape shape) {
  std::vector<double> d(shape_numel(shape), 1.0);
  return constant(std::move(shape), std::move(d));
}

Tensor Tensor::one_hot(std::size_t n, std::size_t index) {
  if (index >= n) throw ContractError("one_hot: index out of range");
  std::vector<double> d(n, 0.0);
  d[index] = 1.0;
  return constant({n}, std::move(d));
}

const std::vector<double>& Tensor::grad() const {
  if (node_->grad.empty()) {
    throw ContractError("grad(): no gradient present on this tensor");
  }
  return node_->grad;
}

double Tensor::item() const {
  if (size() != 1) throw ContractError("item(): tensor is not scalar");
  return node_->val[0];
}

// ---------------------------------------------------------------------------
// helpers

namespace {

struct Bcast {
  Shape out;
  std::vector<std::size_t> sa, sb;  // strides into a and b per out dim
  bool same = false;
};

Bcast broadcast_plan(const char* op, const Shape& a, const Shape& b) {
  Bcast p;
  if (a == b) {
    p.out = a;
    p.same = true;
    return p;
  }
  const std::size_t r = std::max(a.size(), b.size());
  p.out.assign(r, 1);
  p.sa.assign(r, 0);
  p.sb.assign(r, 0);
  // trailing alignment
  std::vector<std::size_t> da(r, 1), db(r, 1);
  for (std::size_t i = 0; i < a.size(); ++i) da[r - a.size() + i] = a[i];
  for (std::size_t i = 0; i < b.size(); ++i) db[r - b.size() + i] = b[i];
  for (std::size_t i = 0; i < r; ++i) {
    if (da[i] == db[i]) {
      p.out[i] = da[i];
    } else if (da[i] == 1) {
      p.out[i] = db[i];
    } else if (db[i] == 1) {
      p.out[i] = da[i];
    } else {
      throw ContractError(std::string(op) + ": shapes " + shape_str(a) +
                          " and " + shape_str(b) + " do not broadcast");
    }
  }
  // row-major strides, zeroed on broadcast dims
  std::size_t stra = 1, strb = 1;
  for (std::size_t i = r; i-- > 0;) {
    p.sa[i] = (da[i] == 1) ? 0 : stra;
    p.sb[i] = (db[i] == 1) ? 0 : strb;
    stra *= da[i];
    strb *= db[i];
  }
  return p;
}

inline void map_indices(std::size_t flat, const Shape& out,
                        const std::vector<std::size_t>& sa,
                        const std::vector<std::size_t>& sb, std::size_t& ia,
                        std::size_t& ib) {
  ia = 0;
  ib = 0;
  for (std::size_t d = out.size(); d-- > 0;) {
    const std::size_t c = flat % out[d];
    flat /= out[d];
    ia += c * sa[d];
    ib += c * sb[d];
  }
}

template <class F, class DA, class DB>
Tensor binary_op(const char* name, const Tensor& a, const Tensor& b, F f,
                 DA dfa, DB dfb) {
  NodePtr pa = a.node(), pb = b.node();
  Bcast plan = broadcast_plan(name, pa->shape, pb->shape);
  const std::size_t n = shape_numel(plan.out);
  std::vector<double> out(n);
  if (plan.same) {
    for (std::size_t k = 0; k < n; ++k) out[k] = f(pa->val[k], pb->val[k]);
  } else {
    for (std::size_t k = 0; k < n; ++k) {
      std::size_t ia, ib;
      map_indices(k, plan.out, plan.sa, plan.sb, ia, ib);
      out[k] = f(pa->val[ia], pb->val[ib]);
    }
  }
  const bool rg = pa->requires_grad || pb->requires_grad;
  NodePtr res = detail::make_node(plan.out, std::move(out), rg, name);
  if (rg) {
    res->parents = {pa, pb};
    res->backfn = [pa, pb, plan, dfa, dfb](Node& self) {
      const bool ga = pa->requires_grad, gb = pb->requires_grad;
      if (ga) pa->ensure_grad();
      if (gb) pb->ensure_grad();
      const std::size_t n2 = self.numel();
      if (plan.same) {
        for (std::size_t k = 0; k < n2; ++k) {
          const double g = self.grad[k];
          if (ga) pa->grad[k] += dfa(pa->val[k], pb->val[k], self.val[k]) * g;
          if (gb) pb->grad[k] += dfb(pa->val[k], pb->val[k], self.val[k]) * g;
        }
      } else {
        for (std::size_t k = 0; k < n2; ++k) {
          std::size_t ia, ib;
          map_indices(k, plan.out, plan.sa, plan.sb, ia, ib);
          const double g = self.grad[k];
          if (ga) pa->grad[ia] += dfa(pa->val[ia], pb->val[ib], self.val[k]) * g;
          if (gb) pb->grad[ib] += dfb(pa->val[ia], pb->val[ib], self.val[k]) * g;
        }
      }
    };
  }
  return Tensor(res);
}

template <class F, class DF>
Tensor unary_op(const char* name, const Tensor& a, F f, DF df) {
  NodePtr pa = a.node();
  const std::size_t n = pa->numel();
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) out[k] = f(pa->val[k]);
  const bool rg = pa->requires_grad;
  NodePtr res = detail::make_node(pa->shape, std::move(out), rg, name);
  if (rg) {
    res->parents = {pa};
    res->backfn = [pa, df](Node& self) {
      pa->ensure_grad();
      for (std::size_t k = 0; k < self.numel(); ++k) {
        pa->grad[k] += df(pa->val[k], self.val[k]) * self.grad[k];
      }
    };
  }
  return Tensor(res);
}

inline double stable_sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double stable_softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

}  // namespace

// ---------------------------------------------------------------------------
// elementwise

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_op(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double, double, double) { return 1.0; },
      [](double, double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_op(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double, double, double) { return 1.0; },
      [](double, double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_op(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double, double y, double) { return y; },
      [](double x, double, double) { return x; });
}

Tensor divide(const Tensor& a, const Tensor& b) {
  return binary_op(
      "div", a, b, [](double x, double y) { return x / y; },
      [](double, double y, double) { return 1.0 / y; },
      [](double x, double y, double) { return -x / (y * y); });
}

Tensor neg(const Tensor& a) {
  return unary_op(
      "neg", a, [](double x) { return -x; },
      [](double, double) { return -1.0; });
}

Tensor add_scalar(const Tensor& a, double s) {
  return unary_op(
      "add_scalar", a, [s](double x) { return x + s; },
      [](double, double) { return 1.0; });
}

Tensor mul_scalar(const Tensor& a, double s) {
  return unary_op(
      "mul_scalar", a, [s](double x) { return x * s; },
      [s](double, double) { return s; });
}

// ---------------------------------------------------------------------------
// unary

Tensor exp(const Tensor& a) {
  return unary_op(
      "exp", a, [](double x) { return std::exp(x); },
      [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  return unary_op(
      "log", a, [](double x) { return std::log(x); },
      [](double x, double) { return 1.0 / x; });
}

Tensor sqrt(const Tensor& a) {
  return unary_op(
      "sqrt", a, [](double x) { return std::sqrt(x); },
      [](double, double y) { return 0.5 / y; });
}

Tensor tanh(const Tensor& a) {
  return unary_op(
      "tanh", a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& a) {
  return unary_op(
      "sigmoid", a, [](double x) { return stable_sigmoid(x); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor softplus(const Tensor& a) {
  return unary_op(
      "softplus", a, [](double x) { return stable_softplus(x); },
      [](double x, double) { return stable_sigmoid(x); });
}

// ---------------------------------------------------------------------------
// reductions

Tensor sum(const Tensor& a) {
  NodePtr pa = a.node();
  double s = 0.0;
  for (double x : pa->val) s += x;
  NodePtr res = detail::make_node({1}, {s}, pa->requires_grad, "sum");
  if (pa->requires_grad) {
    res->parents = {pa};
    res->backfn = [pa](Node& self) {
      pa->ensure_grad();
      const double g = self.grad[0];
      for (auto& gi : pa->grad) gi += g;
    };
  }
  return Tensor(res);
}

Tensor mean(const Tensor& a) {
  return mul_scalar(sum(a), 1.0 / static_cast<double>(a.size()));
}

Tensor sum_last(const Tensor& a) {
  NodePtr pa = a.node();
  if (pa->shape.empty()) throw ContractError("sum_last: rank-0 input");
  const std::size_t L = pa->shape.back();
  const std::size_t M = pa->numel() / L;
  Shape out_shape(pa->shape.begin(), pa->shape.end() - 1);
  if (out_shape.empty()) out_shape = {1};
  std::vector<double> out(M, 0.0);
  for (std::size_t m = 0; m < M; ++m) {
    for (std::size_t j = 0; j < L; ++j) out[m] += pa->val[m * L + j];
  }
  NodePtr res =
      detail::make_node(out_shape, std::move(out), pa->requires_grad, "sum_last");
  if (pa->requires_grad) {
    res->parents = {pa};
    res->backfn = [pa, M, L](Node& self) {
      pa->ensure_grad();
      for (std::size_t m = 0; m < M; ++m) {
        const double g = self.grad[m];
        for (std::size_t j = 0; j < L; ++j) pa->grad[m * L + j] += g;
      }
    };
  }
  return Tensor(res);
}

// ---------------------------------------------------------------------------
// softmax family

Tensor softmax_last(const Tensor& a) {
  NodePtr pa = a.node();
  if (pa->shape.empty()) throw ContractError("softmax: rank-0 input");
  const std::size_t L = pa->shape.back();
  const std::size_t M = pa->numel() / L;
  std::vector<double> out(pa->numel());
  for (std::size_t m = 0; m < M; ++m) {
    const double* x = pa->val.data() + m * L;
    double mx = x[0];
    for (std::size_t j = 1; j < L; ++j) mx = std::max(mx, x[j]);
    double z = 0.0;
    for (std::size_t j = 0; j < L; ++j) z += std::exp(x[j] - mx);
    for (std::size_t j = 0; j < L; ++j) out[m * L + j] = std::exp(x[j] - mx) / z;
  }
  NodePtr res =
      detail::make_node(pa->shape, std::move(out), pa->requires_grad, "softmax");
  if (pa->requires_grad) {
    res->parents = {pa};
    res->backfn = [pa, M, L](Node& self) {
      pa->ensure_grad();
      for (std::size_t m = 0; m < M; ++m) {
        const double* y = self.val.data() + m * L;
        const double* g = self.grad.data() + m * L;
        double s = 0.0;
        for (std::size_t j = 0; j < L; ++j) s += y[j] * g[j];
        for (std::size_t j = 0; j < L; ++j) {
          pa->grad[m * L + j] += y[j] * (g[j] - s);
        }
      }
    };
  }
  return Tensor(res);
}

Tensor logsumexp_last(const Tensor& a) {
  // row max as a detached constant; gradient of the residual form is exact
  const std::size_t L = a.shape().back();
  const std::size_t M = a.size() / L;
  std::vector<double> mx(M);
  for (std::size_t m = 0; m < M; ++m) {
    const double* x = a.values().data() + m * L;
    double v = x[0];
    for (std::size_t j = 1; j < L; ++j) v = std::max(v, x[j]);
    mx[m] = v;
  }
  Shape keep = a.shape();
  keep.back() = 1;
  Tensor m_keep = Tensor::constant(keep, mx);
  Shape dropped(a.shape().begin(), a.shape().end() - 1);
  if (dropped.empty()) dropped = {1};
  Tensor m_flat = Tensor::constant(dropped, std::move(mx));
  return add(log(sum_last(exp(sub(a, m_keep)))), m_flat);
}

Tensor log_softmax_last(const Tensor& a) {
  Tensor lse = logsumexp_last(a);
  Shape keep = a.shape();
  keep.back() = 1;
  return sub(a, reshape(lse, keep));
}

// ---------------------------------------------------------------------------
// structural

Tensor shift_last(const Tensor& a) {
  NodePtr pa = a.node();
  if (pa->shape.empty()) throw ContractError("shift: rank-0 input");
  const std::size_t L = pa->shape.back();
  const std::size_t M = pa->numel() / L;
  std::vector<double> out(pa->numel(), 0.0);
  for (std::size_t m = 0; m < M; ++m) {
    for (std::size_t j = 1; j < L; ++j) {
      out[m * L + j] = pa->val[m * L + j - 1];
    }
  }
  NodePtr res =
      detail::make_node(pa->shape, std::move(out), pa->requires_grad, "shift");
  if (pa->requires_grad) {
    res->parents = {pa};
    res->backfn = [pa, M, L](Node& self) {
      pa->ensure_grad();
      for (std::size_t m = 0; m < M; ++m) {
        for (std::size_t j = 1; j < L; ++j) {
          pa->grad[m * L + j - 1] += self.grad[m * L + j];
        }
      }
    };
  }
  return Tensor(res);
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw ContractError("concat: no inputs");
  const std::size_t r = parts[0].rank();
  if (axis < 0 || static_cast<std::size_t>(axis) >= r) {
    throw ContractError("concat: bad axis");
  }
  for (const auto& p : parts) {
    if (p.rank() != r) throw ContractError("concat: rank mismatch");
    for (std::size_t d = 0; d < r; ++d) {
      if (d != static_cast<std::size_t>(axis) &&
          p.shape()[d] != parts[0].shape()[d]) {
        throw ContractError("concat: shape mismatch off the concat axis");
      }
    }
  }
  if (r > 2) throw ContractError("concat: rank > 2 unsupported");

  Shape out_shape = parts[0].shape();
  std::size_t total = 0;
  for (const auto& p : parts) total += p.shape()[axis];
  out_shape[axis] = total;

  std::vector<double> out(shape_numel(out_shape));
  bool rg = false;
  std::vector<NodePtr> ps;
  for (const auto& p : parts) {
    rg = rg || p.requires_grad();
    ps.push_back(p.node());
  }

  if (r == 1 || axis == 0) {
    std::size_t off = 0;
    for (const auto& p : parts) {
      std::copy(p.values().begin(), p.values().end(), out.begin() + off);
      off += p.size();
    }
  } else {  // r == 2, axis == 1
    const std::size_t M = out_shape[0];
    std::size_t coff = 0;
    for (const auto& p : parts) {
      const std::size_t C = p.shape()[1];
      for (std::size_t m = 0; m < M; ++m) {
        for (std::size_t c = 0; c < C; ++c) {
          out[m * total + coff + c] = p.values()[m * C + c];
        }
      }
      coff += C;
    }
  }

  NodePtr res = detail::make_node(out_shape, std::move(out), rg, "concat");
  if (rg) {
    res->parents = ps;
    const std::size_t M = (r == 2) ? out_shape[0] : 1;
    res->backfn = [ps, axis, r, M, total](Node& self) {
      if (r == 1 || axis == 0) {
        std::size_t off = 0;
        for (const auto& p : ps) {
          if (p->requires_grad) {
            p->ensure_grad();
            for (std::size_t k = 0; k < p->numel(); ++k) {
              p->grad[k] += self.grad[off + k];
            }
          }
          off += p->numel();
        }
      } else {
        std::size_t coff = 0;
        for (const auto& p : ps) {
          const std::size_t C = p->shape[1];
          if (p->requires_grad) {
            p->ensure_grad();
            for (std::size_t m = 0; m < M; ++m) {
              for (std::size_t c = 0; c < C; ++c) {
                p->grad[m * C + c] += self.grad[m * total + coff + c];
              }
            }
          }
          coff += C;
        }
      }
    };
  }
  return Tensor(res);
}

Tensor slice(const Tensor& a, int axis, std::size_t start, std::size_t len) {
  NodePtr pa = a.node();
  const std::size_t r = pa->shape.size();
  if (axis < 0 || static_cast<std::size_t>(axis) >= r || r > 2) {
    throw ContractError("slice: bad axis/rank");
  }
  if (start + len > pa->shape[axis]) {
    throw ContractError("slice: out of range");
  }
  Shape out_shape = pa->shape;
  out_shape[static_cast<std::size_t>(axis)] = len;
  std::vector<double> out(shape_numel(out_shape));

  const std::size_t cols = (r == 2) ? pa->shape[1] : 1;
  if (r == 1 || axis == 0) {
    std::copy(pa->val.begin() + start * cols,
              pa->val.begin() + (start + len) * cols, out.begin());
  } else {
    const std::size_t M = pa->shape[0];
    for (std::size_t m = 0; m < M; ++m) {
      for (std::size_t c = 0; c < len; ++c) {
        out[m * len + c] = pa->val[m * cols + start + c];
      }
    }
  }
  NodePtr res =
      detail::make_node(out_shape, std::move(out), pa->requires_grad, "slice");
  if (pa->requires_grad) {
    res->parents = {pa};
    res->backfn = [pa, axis, r, start, len, cols](Node& self) {
      pa->ensure_grad();
      if (r == 1 || axis == 0) {
        for (std::size_t k = 0; k < self.numel(); ++k) {
          pa->grad[start * cols + k] += self.grad[k];
        }
      } else {
        const std::size_t M = pa->shape[0];
        for (std::size_t m = 0; m < M; ++m) {
          for (std::size_t c = 0; c < len; ++c) {
            pa->grad[m * cols + start + c] += self.grad[m * len + c];
          }
        }
      }
    };
  }
  return Tensor(res);
}

Tensor rows(const Tensor& a, const std::vector<std::size_t>& indices) {
  NodePtr pa = a.node();
  if (pa->shape.size() != 2) throw ContractError("rows: input must be 2-D");
  const std::size_t C = pa->shape[1];
  for (auto i : indices) {
    if (i >= pa->shape[0]) throw ContractError("rows: index out of range");
  }
  std::vector<double> out(indices.size() * C);
  for (std::size_t k = 0; k < indices.size(); ++k) {
    std::copy(pa->val.begin() + indices[k] * C,
              pa->val.begin() + (indices[k] + 1) * C, out.begin() + k * C);
  }
  NodePtr res = detail::make_node({indices.size(), C}, std::move(out),
                                  pa->requires_grad, "rows");
  if (pa->requires_grad) {
    res->parents = {pa};
    res->backfn = [pa, indices, C](Node& self) {
      pa->ensure_grad();
      for (std::size_t k = 0; k < indices.size(); ++k) {
        for (std::size_t c = 0; c < C; ++c) {
          pa->grad[indices[k] * C + c] += self.grad[k * C + c];
        }
      }
    };
  }
  return Tensor(res);
}

Tensor transpose(const Tensor& a) {
  NodePtr pa = a.node();
  if (pa->shape.size() != 2) throw ContractError("transpose: input must be 2-D");
  const std::size_t M = pa->shape[0], N = pa->shape[1];
  std::vector<double> out(M * N);
  for (std::size_t i = 0; i < M; ++i) {
    for (std::size_t j = 0; j < N; ++j) out[j * M + i] = pa->val[i * N + j];
  }
  NodePtr res =
      detail::make_node({N, M}, std::move(out), pa->requires_grad, "transpose");
  if (pa->requires_grad) {
    res->parents = {pa};
    res->backfn = [pa, M, N](Node& self) {
      pa->ensure_grad();
      for (std::size_t i = 0; i < M; ++i) {
        for (std::size_t j = 0; j < N; ++j) {
          pa->grad[i * N + j] += self.grad[j * M + i];
        }
      }
    };
  }
  return Tensor(res);
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  NodePtr pa = a.node(), pb = b.node();
  if (pa->shape.size() != 2 || pb->shape.size() != 2 ||
      pa->shape[1] != pb->shape[0]) {
    throw ContractError("matmul: incompatible shapes " + shape_str(pa->shape) +
                        " x " + shape_str(pb->shape));
  }
  const std::size_t M = pa->shape[0], K = pa->shape[1], N = pb->shape[1];
  std::vector<double> out(M * N, 0.0);
  for (std::size_t i = 0; i < M; ++i) {
    for (std::size_t k = 0; k < K; ++k) {
      const double av = pa->val[i * K + k];
      if (av == 0.0) continue;
      const double* brow = pb->val.data() + k * N;
      double* orow = out.data() + i * N;
      for (std::size_t j = 0; j < N; ++j) orow[j] += av * brow[j];
    }
  }
  const bool rg = pa->requires_grad || pb->requires_grad;
  NodePtr res = detail::make_node({M, N}, std::move(out), rg, "matmul");
  if (rg) {
    res->parents = {pa, pb};
    res->backfn = [pa, pb, M, K, N](Node& self) {
      if (pa->requires_grad) {
        pa->ensure_grad();
        for (std::size_t i = 0; i < M; ++i) {
          for (std::size_t k = 0; k < K; ++k) {
            double s = 0.0;
            const double* g = self.grad.data() + i * N;
            const double* brow = pb->val.data() + k * N;
            for (std::size_t j = 0; j < N; ++j) s += g[j] * brow[j];
            pa->grad[i * K + k] += s;
          }
        }
      }
      if (pb->requires_grad) {
        pb->ensure_grad();
        for (std::size_t k = 0; k < K; ++k) {
          for (std::size_t i = 0; i < M; ++i) {
            const double av = pa->val[i * K + k];
            if (av == 0.0) continue;
            const double* g = self.grad.data() + i * N;
            double* brow = pb->grad.data() + k * N;
            for (std::size_t j = 0; j < N; ++j) brow[j] += av * g[j];
          }
        }
      }
    };
  }
  return Tensor(res);
}

Tensor matvec(const Tensor& a, const Tensor& v) {
  if (v.rank() != 1) throw ContractError("matvec: v must be 1-D");
  Tensor col = reshape(v, {v.size(), 1});
  return reshape(matmul(a, col), {a.shape()[0]});
}

Tensor dot(const Tensor& a, const Tensor& b) { return sum(mul(a, b)); }

Tensor reshape(const Tensor& a, Shape shape) {
  NodePtr pa = a.node();
  if (shape_numel(shape) != pa->numel()) {
    throw ContractError("reshape: element count mismatch");
  }
  NodePtr res =
      detail::make_node(std::move(shape), pa->val, pa->requires_grad, "reshape");
  if (pa->requires_grad) {
    res->parents = {pa};
    res->backfn = [pa](Node& self) {
      pa->ensure_grad();
      for (std::size_t k = 0; k < self.numel(); ++k) {
        pa->grad[k] += self.grad[k];
      }
    };
  }
  return Tensor(res);
}

Tensor diag_part(const Tensor& a) {
  NodePtr pa = a.node();
  if (pa->shape.size() != 2 || pa->shape[0] != pa->shape[1]) {
    throw ContractError("diag_part: input must be square");
  }
  const std::size_t D = pa->shape[0];
  std::vector<double> out(D);
  for (std::size_t i = 0; i < D; ++i) out[i] = pa->val[i * D + i];
  NodePtr res =
      detail::make_node({D}, std::move(out), pa->requires_grad, "diag_part");
  if (pa->requires_grad) {
    res->parents = {pa};
    res->backfn = [pa, D](Node& self) {
      pa->ensure_grad();
      for (std::size_t i = 0; i < D; ++i) {
        pa->grad[i * D + i] += self.grad[i];
      }
    };
  }
  return Tensor(res);
}

Tensor straight_through(std::vector<double> forward_values,
                        const Tensor& surrogate) {
  NodePtr ps = surrogate.node();
  if (forward_values.size() != ps->numel()) {
    throw ContractError("straight_through: value/surrogate size mismatch");
  }
  NodePtr res = detail::make_node(ps->shape, std::move(forward_values),
                                  ps->requires_grad, "straight_through");
  if (ps->requires_grad) {
    res->parents = {ps};
    res->backfn = [ps](Node& self) {
      ps->ensure_grad();
      for (std::size_t k = 0; k < self.numel(); ++k) {
        ps->grad[k] += self.grad[k];
      }
    };
  }
  return Tensor(res);
}

Tensor trisolve_lower(const Tensor& L, const Tensor& B) {
  NodePtr pl = L.node(), pb = B.node();
  if (pl->shape.size() != 2 || pl->shape[0] != pl->shape[1]) {
    throw ContractError("trisolve: L must be square");
  }
  if (pb->shape.size() != 2 || pb->shape[0] != pl->shape[0]) {
    throw ContractError("trisolve: B rows must match L");
  }
  const std::size_t D = pl->shape[0], M = pb->shape[1];
  for (std::size_t i = 0; i < D; ++i) {
    if (pl->val[i * D + i] == 0.0) {
      throw ContractError("trisolve: zero diagonal");
    }
  }
  std::vector<double> Z(D * M);
  for (std::size_t m = 0; m < M; ++m) {
    for (std::size_t i = 0; i < D; ++i) {
      double s = pb->val[i * M + m];
      for (std::size_t k = 0; k < i; ++k) s -= pl->val[i * D + k] * Z[k * M + m];
      Z[i * M + m] = s / pl->val[i * D + i];
    }
  }
  const bool rg = pl->requires_grad || pb->requires_grad;
  NodePtr res = detail::make_node({D, M}, std::move(Z), rg, "trisolve");
  if (rg) {
    res->parents = {pl, pb};
    res->backfn = [pl, pb, D, M](Node& self) {
      // W = L^{-T} dZ via back substitution, then dB = W, dL = -W Z^T (lower)
      std::vector<double> W(D * M);
      for (std::size_t m = 0; m < M; ++m) {
        for (std::size_t i = D; i-- > 0;) {
          double s = self.grad[i * M + m];
          for (std::size_t k = i + 1; k < D; ++k) {
            s -= pl->val[k * D + i] * W[k * M + m];
          }
          W[i * M + m] = s / pl->val[i * D + i];
        }
      }
      if (pb->requires_grad) {
        pb->ensure_grad();
        for (std::size_t k = 0; k < D * M; ++k) pb->grad[k] += W[k];
      }
      if (pl->requires_grad) {
        pl->ensure_grad();
        for (std::size_t i = 0; i < D; ++i) {
          for (std::size_t j = 0; j <= i; ++j) {
            double s = 0.0;
            for (std::size_t m = 0; m < M; ++m) {
              s += W[i * M + m] * self.val[j * M + m];
            }
            pl->grad[i * D + j] -= s;
          }
        }
      }
    };
  }
  return Tensor(res);
}

Tensor detach(const Tensor& a) {
  return Tensor::constant(a.shape(), a.values());
}

// ---------------------------------------------------------------------------
// backward

void backward(const Tensor& loss) {
  NodePtr root = loss.node();
  if (!root) throw ContractError("backward: undefined loss");
  if (root->numel() != 1) throw ContractError("backward: loss must be scalar");
  if (!root->requires_grad) {
    throw ContractError("backward: loss is detached from the tape");
  }
  if (root->backward_done) {
    throw ContractError("backward: called twice on the same loss");
  }
  root->backward_done = true;

  // Creation order is topological by construction; visit in reverse.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<Node*> stack = {root.get()};
  seen.insert(root.get());
  while (!stack.empty()) {
    Node* n = stack.back();
    stack.pop_back();
    order.push_back(n);
    for (const auto& p : n->parents) {
      if (p->requires_grad && seen.insert(p.get()).second) {
        stack.push_back(p.get());
      }
    }
  }
  std::sort(order.begin(), order.end(),
            [](const Node* a, const Node* b) { return a->id > b->id; });

  root->grad.assign(1, 1.0);
  for (Node* n : order) {
    if (n->backfn && !n->grad.empty()) n->backfn(*n);
  }
}

// ---------------------------------------------------------------------------
// sampling

Tensor sample_uniform01(Rng& rng, Shape shape) {
  std::vector<double> d(shape_numel(shape));
  for (auto& x : d) x = rng.uniform01();
  return Tensor::constant(std::move(shape), std::move(d));
}

Tensor sample_standard_normal(Rng& rng, Shape shape) {
  std::vector<double> d(shape_numel(shape));
  for (auto& x : d) x = rng.standard_normal();
  return Tensor::constant(std::move(shape), std::move(d));
}

Tensor sample_gumbel01(Rng& rng, Shape shape) {
  std::vector<double> d(shape_numel(shape));
  for (auto& x : d) x = rng.gumbel01();
  return Tensor::constant(std::move(shape), std::move(d));
}

Tensor sample_bernoulli(Rng& rng, const std::vector<double>& p, Shape shape) {
  if (p.size() != shape_numel(shape)) {
    throw ContractError("sample_bernoulli: p size mismatch");
  }
  std::vector<double> d(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) d[i] = rng.bernoulli(p[i]);
  return Tensor::constant(std::move(shape), std::move(d));
}

std::size_t sample_categorical(Rng& rng, const std::vector<double>& w) {
  return rng.categorical(w);
}

}  // namespace gmlab
