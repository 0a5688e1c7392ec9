#include "hcq/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace hcq {

namespace {

using detail::Node;
using detail::NodePtr;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

template <class Fn>
Tensor make_result(const char* op, Shape shape, std::vector<double> data,
                   std::initializer_list<const Tensor*> inputs, Fn&& fn) {
  for (double v : data) {
    if (!std::isfinite(v)) throw NonFiniteError(std::string(op) + ": non-finite output");
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  auto& tape = Tape::active();
  bool needs = false;
  if (tape.recording()) {
    for (const Tensor* t : inputs) needs = needs || t->requires_grad();
  }
  if (needs) {
    node->requires_grad = true;
    std::vector<NodePtr> in;
    in.reserve(inputs.size());
    for (const Tensor* t : inputs) in.push_back(t->node());
    const Node* out = node.get();
    tape.record(node, std::move(in),
                [out, fn = std::forward<Fn>(fn)](const std::vector<double>& g) { fn(g, *out); });
  }
  return Tensor::wrap(node);
}

// Grad buffer for an input, or nullptr when it does not participate.
std::vector<double>* grad_of(Node* n) { return n->requires_grad ? &n->ensure_grad() : nullptr; }

struct Broadcast {
  Shape out;
  bool same = false;
  std::vector<std::size_t> ia, ib;
};

Broadcast plan_broadcast(const Shape& a, const Shape& b, const char* op) {
  Broadcast p;
  if (a == b) {
    p.out = a;
    p.same = true;
    return p;
  }
  const std::size_t nd = std::max(a.size(), b.size());
  p.out.assign(nd, 1);
  std::vector<std::size_t> sa(nd, 0), sb(nd, 0);
  std::size_t stride_a = 1, stride_b = 1;
  for (std::size_t k = 0; k < nd; ++k) {
    const std::size_t i = nd - 1 - k;
    const std::size_t da = k < a.size() ? a[a.size() - 1 - k] : 1;
    const std::size_t db = k < b.size() ? b[b.size() - 1 - k] : 1;
    if (da != db && da != 1 && db != 1) {
      throw ShapeError(std::string(op) + ": cannot broadcast " + shape_str(a) + " with " + shape_str(b));
    }
    p.out[i] = std::max(da, db);
    sa[i] = da == 1 ? 0 : stride_a;
    sb[i] = db == 1 ? 0 : stride_b;
    stride_a *= da;
    stride_b *= db;
  }
  const std::size_t n = numel_of(p.out);
  p.ia.resize(n);
  p.ib.resize(n);
  std::vector<std::size_t> idx(nd, 0);
  std::size_t oa = 0, ob = 0;
  for (std::size_t e = 0; e < n; ++e) {
    p.ia[e] = oa;
    p.ib[e] = ob;
    for (std::size_t d = nd; d-- > 0;) {
      ++idx[d];
      oa += sa[d];
      ob += sb[d];
      if (idx[d] < p.out[d]) break;
      oa -= sa[d] * idx[d];
      ob -= sb[d] * idx[d];
      idx[d] = 0;
    }
  }
  return p;
}

// f(x, y) -> z; dzdx(x, y, z), dzdy(x, y, z).
template <class F, class DA, class DB>
Tensor binary(const char* op, const Tensor& a, const Tensor& b, F f, DA dzda, DB dzdb) {
  auto plan = std::make_shared<Broadcast>(plan_broadcast(a.shape(), b.shape(), op));
  const auto& xa = a.data();
  const auto& xb = b.data();
  const std::size_t n = numel_of(plan->out);
  std::vector<double> out(n);
  if (plan->same) {
    for (std::size_t i = 0; i < n; ++i) out[i] = f(xa[i], xb[i]);
  } else {
    for (std::size_t i = 0; i < n; ++i) out[i] = f(xa[plan->ia[i]], xb[plan->ib[i]]);
  }
  Node* na = a.node().get();
  Node* nb = b.node().get();
  return make_result(op, plan->out, std::move(out), {&a, &b},
                     [na, nb, plan, dzda, dzdb](const std::vector<double>& g, const Node& o) {
                       auto* ga = grad_of(na);
                       auto* gb = grad_of(nb);
                       const std::size_t n = g.size();
                       for (std::size_t i = 0; i < n; ++i) {
                         const std::size_t i_a = plan->same ? i : plan->ia[i];
                         const std::size_t i_b = plan->same ? i : plan->ib[i];
                         const double x = na->data[i_a], y = nb->data[i_b], z = o.data[i];
                         if (ga) (*ga)[i_a] += g[i] * dzda(x, y, z);
                         if (gb) (*gb)[i_b] += g[i] * dzdb(x, y, z);
                       }
                     });
}

// f(x) -> y; dydx(x, y).
template <class F, class D>
Tensor unary(const char* op, const Tensor& a, F f, D dydx) {
  const auto& xa = a.data();
  std::vector<double> out(xa.size());
  for (std::size_t i = 0; i < xa.size(); ++i) out[i] = f(xa[i]);
  Node* na = a.node().get();
  return make_result(op, a.shape(), std::move(out), {&a}, [na, dydx](const std::vector<double>& g, const Node& o) {
    auto& ga = na->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * dydx(na->data[i], o.data[i]);
  });
}

struct AxisSplit {
  std::size_t outer = 1, n = 1, inner = 1;
};

AxisSplit split_axis(const Shape& s, std::size_t axis, const char* op) {
  if (axis >= s.size()) throw ShapeError(std::string(op) + ": axis out of range for " + shape_str(s));
  AxisSplit r;
  for (std::size_t i = 0; i < axis; ++i) r.outer *= s[i];
  r.n = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
  return r;
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void require_2d(const Tensor& t, const char* op) {
  if (t.dim() != 2) throw ShapeError(std::string(op) + ": expected 2-D tensor, got " + shape_str(t.shape()));
}

}  // namespace

Tensor elementwise(ElementwiseKind kind, const Tensor& a, const Tensor* b) {
  auto need_b = [&]() -> const Tensor& {
    if (!b) throw std::invalid_argument("binary elementwise op requires a second operand");
    return *b;
  };
  switch (kind) {
    case ElementwiseKind::Add: return add(a, need_b());
    case ElementwiseKind::Sub: return sub(a, need_b());
    case ElementwiseKind::Mul: return mul(a, need_b());
    case ElementwiseKind::Div: return div(a, need_b());
    case ElementwiseKind::Relu: return relu(a);
    case ElementwiseKind::Sigmoid: return sigmoid(a);
    case ElementwiseKind::Exp: return exp(a);
    case ElementwiseKind::Log: return log(a);
    case ElementwiseKind::Neg: return neg(a);
  }
  throw std::invalid_argument("unknown elementwise kind");
}

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      "add", a, b, [](double x, double y) { return x + y; }, [](double, double, double) { return 1.0; },
      [](double, double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      "sub", a, b, [](double x, double y) { return x - y; }, [](double, double, double) { return 1.0; },
      [](double, double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      "mul", a, b, [](double x, double y) { return x * y; }, [](double, double y, double) { return y; },
      [](double x, double, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  for (double y : b.data()) {
    if (y == 0.0) throw DomainError("div: division by zero");
  }
  return binary(
      "div", a, b, [](double x, double y) { return x / y; }, [](double, double y, double) { return 1.0 / y; },
      [](double, double y, double z) { return -z / y; });
}

Tensor minimum(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) throw ShapeError("minimum: shapes must match");
  return binary(
      "minimum", a, b, [](double x, double y) { return std::min(x, y); },
      [](double x, double y, double) { return x <= y ? 1.0 : 0.0; },
      [](double x, double y, double) { return x <= y ? 0.0 : 1.0; });
}

Tensor maximum(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) throw ShapeError("maximum: shapes must match");
  return binary(
      "maximum", a, b, [](double x, double y) { return std::max(x, y); },
      [](double x, double y, double) { return x >= y ? 1.0 : 0.0; },
      [](double x, double y, double) { return x >= y ? 0.0 : 1.0; });
}

Tensor neg(const Tensor& a) {
  return unary("neg", a, [](double x) { return -x; }, [](double, double) { return -1.0; });
}

Tensor relu(const Tensor& a) {
  return unary(
      "relu", a, [](double x) { return x > 0 ? x : 0.0; }, [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& a) {
  return unary("sigmoid", a, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Tensor exp(const Tensor& a) {
  return unary("exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  for (double x : a.data()) {
    if (!(x > 0.0)) throw DomainError("log: argument must be positive");
  }
  return unary("log", a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor softplus(const Tensor& a) {
  return unary(
      "softplus", a, [](double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); },
      [](double x, double) { return stable_sigmoid(x); });
}

Tensor abs(const Tensor& a) {
  return unary(
      "abs", a, [](double x) { return std::abs(x); },
      [](double x, double) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); });
}

Tensor scale(const Tensor& a, double factor) {
  return unary("scale", a, [factor](double x) { return x * factor; }, [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& a, double value) {
  return unary("add_scalar", a, [value](double x) { return x + value; }, [](double, double) { return 1.0; });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  return unary(
      "clamp", a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
      [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

Tensor inverse_sigmoid(const Tensor& a, double eps) {
  return unary(
      "inverse_sigmoid", a,
      [eps](double x) {
        const double c = std::clamp(x, eps, 1.0 - eps);
        return std::log(c / (1.0 - c));
      },
      [eps](double x, double) { return (x >= eps && x <= 1.0 - eps) ? 1.0 / (x * (1.0 - x)) : 0.0; });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_2d(a, "matmul");
  require_2d(b, "matmul");
  const std::size_t m = a.size(0), k = a.size(1), n = b.size(1);
  if (b.size(0) != k) {
    throw ShapeError("matmul: inner dimensions disagree " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  std::vector<double> out(m * n);
  MutMap(out.data(), m, n).noalias() = ConstMap(a.data().data(), m, k) * ConstMap(b.data().data(), k, n);
  Node* na = a.node().get();
  Node* nb = b.node().get();
  return make_result("matmul", {m, n}, std::move(out), {&a, &b},
                     [na, nb, m, k, n](const std::vector<double>& g, const Node&) {
                       ConstMap go(g.data(), m, n);
                       if (auto* ga = grad_of(na)) {
                         MutMap(ga->data(), m, k).noalias() += go * ConstMap(nb->data.data(), k, n).transpose();
                       }
                       if (auto* gb = grad_of(nb)) {
                         MutMap(gb->data(), k, n).noalias() += ConstMap(na->data.data(), m, k).transpose() * go;
                       }
                     });
}

Tensor bmm(const Tensor& a, const Tensor& b) {
  if (a.dim() != 3 || b.dim() != 3 || a.size(0) != b.size(0) || a.size(2) != b.size(1)) {
    throw ShapeError("bmm: incompatible shapes " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  const std::size_t bs = a.size(0), m = a.size(1), k = a.size(2), n = b.size(2);
  std::vector<double> out(bs * m * n);
  for (std::size_t i = 0; i < bs; ++i) {
    MutMap(out.data() + i * m * n, m, n).noalias() =
        ConstMap(a.data().data() + i * m * k, m, k) * ConstMap(b.data().data() + i * k * n, k, n);
  }
  Node* na = a.node().get();
  Node* nb = b.node().get();
  return make_result("bmm", {bs, m, n}, std::move(out), {&a, &b},
                     [na, nb, bs, m, k, n](const std::vector<double>& g, const Node&) {
                       auto* ga = grad_of(na);
                       auto* gb = grad_of(nb);
                       for (std::size_t i = 0; i < bs; ++i) {
                         ConstMap go(g.data() + i * m * n, m, n);
                         if (ga) {
                           MutMap(ga->data() + i * m * k, m, k).noalias() +=
                               go * ConstMap(nb->data.data() + i * k * n, k, n).transpose();
                         }
                         if (gb) {
                           MutMap(gb->data() + i * k * n, k, n).noalias() +=
                               ConstMap(na->data.data() + i * m * k, m, k).transpose() * go;
                         }
                       }
                     });
}

Tensor transpose(const Tensor& a) {
  require_2d(a, "transpose");
  const std::size_t r = a.size(0), c = a.size(1);
  std::vector<double> out(r * c);
  const auto& x = a.data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = x[i * c + j];
  Node* na = a.node().get();
  return make_result("transpose", {c, r}, std::move(out), {&a}, [na, r, c](const std::vector<double>& g, const Node&) {
    auto& ga = na->ensure_grad();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g[j * r + i];
  });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (numel_of(shape) != a.numel()) {
    throw ShapeError("reshape: " + shape_str(a.shape()) + " -> " + shape_str(shape));
  }
  std::vector<double> out(a.data().begin(), a.data().end());
  Node* na = a.node().get();
  return make_result("reshape", std::move(shape), std::move(out), {&a}, [na](const std::vector<double>& g, const Node&) {
    auto& ga = na->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  });
}

Tensor slice(const Tensor& a, std::size_t axis, std::size_t begin, std::size_t end) {
  const auto sp = split_axis(a.shape(), axis, "slice");
  if (begin >= end || end > sp.n) {
    throw ShapeError("slice: range [" + std::to_string(begin) + "," + std::to_string(end) + ") invalid for " +
                     shape_str(a.shape()));
  }
  const std::size_t len = end - begin;
  Shape shape = a.shape();
  shape[axis] = len;
  std::vector<double> out(sp.outer * len * sp.inner);
  const auto& x = a.data();
  for (std::size_t o = 0; o < sp.outer; ++o) {
    std::copy_n(x.begin() + (o * sp.n + begin) * sp.inner, len * sp.inner, out.begin() + o * len * sp.inner);
  }
  Node* na = a.node().get();
  return make_result("slice", std::move(shape), std::move(out), {&a},
                     [na, sp, begin, len](const std::vector<double>& g, const Node&) {
                       auto& ga = na->ensure_grad();
                       for (std::size_t o = 0; o < sp.outer; ++o) {
                         const double* src = g.data() + o * len * sp.inner;
                         double* dst = ga.data() + (o * sp.n + begin) * sp.inner;
                         for (std::size_t i = 0; i < len * sp.inner; ++i) dst[i] += src[i];
                       }
                     });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Shape& ref = parts.front().shape();
  if (axis >= ref.size()) throw ShapeError("concat: axis out of range");
  Shape shape = ref;
  shape[axis] = 0;
  std::vector<std::size_t> lens;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != ref.size()) throw ShapeError("concat: rank mismatch");
    for (std::size_t d = 0; d < s.size(); ++d) {
      if (d != axis && s[d] != ref[d]) {
        throw ShapeError("concat: " + shape_str(s) + " incompatible with " + shape_str(ref));
      }
    }
    lens.push_back(s[axis]);
    shape[axis] += s[axis];
  }
  const auto sp = split_axis(shape, axis, "concat");
  std::vector<double> out(numel_of(shape));
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const auto& x = parts[p].data();
    const std::size_t chunk = lens[p] * sp.inner;
    for (std::size_t o = 0; o < sp.outer; ++o) {
      std::copy_n(x.begin() + o * chunk, chunk, out.begin() + (o * sp.n + offset) * sp.inner);
    }
    offset += lens[p];
  }
  for (double v : out) {
    if (!std::isfinite(v)) throw NonFiniteError("concat: non-finite output");
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data = std::move(out);
  auto& tape = Tape::active();
  bool needs = false;
  if (tape.recording()) {
    for (const auto& p : parts) needs = needs || p.requires_grad();
  }
  if (needs) {
    node->requires_grad = true;
    std::vector<NodePtr> in;
    std::vector<Node*> raw;
    for (const auto& p : parts) {
      in.push_back(p.node());
      raw.push_back(p.node().get());
    }
    tape.record(node, std::move(in), [raw, lens, sp](const std::vector<double>& g) {
      std::size_t offset = 0;
      for (std::size_t p = 0; p < raw.size(); ++p) {
        const std::size_t chunk = lens[p] * sp.inner;
        if (auto* gp = grad_of(raw[p])) {
          for (std::size_t o = 0; o < sp.outer; ++o) {
            const double* src = g.data() + (o * sp.n + offset) * sp.inner;
            double* dst = gp->data() + o * chunk;
            for (std::size_t i = 0; i < chunk; ++i) dst[i] += src[i];
          }
        }
        offset += lens[p];
      }
    });
  }
  return Tensor::wrap(node);
}

Tensor index_select(const Tensor& a, std::size_t axis, const std::vector<std::size_t>& indices) {
  const auto sp = split_axis(a.shape(), axis, "index_select");
  if (indices.empty()) throw ShapeError("index_select: empty index list");
  for (auto i : indices) {
    if (i >= sp.n) throw ShapeError("index_select: index out of range");
  }
  const std::size_t len = indices.size();
  Shape shape = a.shape();
  shape[axis] = len;
  std::vector<double> out(sp.outer * len * sp.inner);
  const auto& x = a.data();
  for (std::size_t o = 0; o < sp.outer; ++o)
    for (std::size_t t = 0; t < len; ++t)
      std::copy_n(x.begin() + (o * sp.n + indices[t]) * sp.inner, sp.inner,
                  out.begin() + (o * len + t) * sp.inner);
  Node* na = a.node().get();
  return make_result("index_select", std::move(shape), std::move(out), {&a},
                     [na, sp, indices, len](const std::vector<double>& g, const Node&) {
                       auto& ga = na->ensure_grad();
                       for (std::size_t o = 0; o < sp.outer; ++o)
                         for (std::size_t t = 0; t < len; ++t) {
                           const double* src = g.data() + (o * len + t) * sp.inner;
                           double* dst = ga.data() + (o * sp.n + indices[t]) * sp.inner;
                           for (std::size_t i = 0; i < sp.inner; ++i) dst[i] += src[i];
                         }
                     });
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  Node* na = a.node().get();
  return make_result("sum", {1}, {s}, {&a}, [na](const std::vector<double>& g, const Node&) {
    auto& ga = na->ensure_grad();
    for (auto& v : ga) v += g[0];
  });
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.numel())); }

Tensor sum_last(const Tensor& a) {
  const Shape& s = a.shape();
  const std::size_t c = s.back();
  const std::size_t rows = a.numel() / c;
  Shape shape(s.begin(), s.end() - 1);
  if (shape.empty()) shape = {1};
  std::vector<double> out(rows, 0.0);
  const auto& x = a.data();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < c; ++j) out[r] += x[r * c + j];
  Node* na = a.node().get();
  return make_result("sum_last", std::move(shape), std::move(out), {&a},
                     [na, rows, c](const std::vector<double>& g, const Node&) {
                       auto& ga = na->ensure_grad();
                       for (std::size_t r = 0; r < rows; ++r)
                         for (std::size_t j = 0; j < c; ++j) ga[r * c + j] += g[r];
                     });
}

Tensor softmax(const Tensor& a, std::size_t axis) {
  const auto sp = split_axis(a.shape(), axis, "softmax");
  const auto& x = a.data();
  std::vector<double> out(x.size());
  for (std::size_t o = 0; o < sp.outer; ++o)
    for (std::size_t in = 0; in < sp.inner; ++in) {
      const std::size_t base = o * sp.n * sp.inner + in;
      double mx = x[base];
      for (std::size_t i = 1; i < sp.n; ++i) mx = std::max(mx, x[base + i * sp.inner]);
      double z = 0.0;
      for (std::size_t i = 0; i < sp.n; ++i) {
        const double e = std::exp(x[base + i * sp.inner] - mx);
        out[base + i * sp.inner] = e;
        z += e;
      }
      for (std::size_t i = 0; i < sp.n; ++i) out[base + i * sp.inner] /= z;
    }
  Node* na = a.node().get();
  return make_result("softmax", a.shape(), std::move(out), {&a}, [na, sp](const std::vector<double>& g, const Node& o) {
    auto& ga = na->ensure_grad();
    const auto& y = o.data;
    for (std::size_t ou = 0; ou < sp.outer; ++ou)
      for (std::size_t in = 0; in < sp.inner; ++in) {
        const std::size_t base = ou * sp.n * sp.inner + in;
        double dot = 0.0;
        for (std::size_t i = 0; i < sp.n; ++i) dot += g[base + i * sp.inner] * y[base + i * sp.inner];
        for (std::size_t i = 0; i < sp.n; ++i) {
          const std::size_t k = base + i * sp.inner;
          ga[k] += y[k] * (g[k] - dot);
        }
      }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  const std::size_t c = x.shape().back();
  if (gamma.numel() != c || beta.numel() != c) throw ShapeError("layer_norm: affine size mismatch");
  const std::size_t rows = x.numel() / c;
  const auto& xv = x.data();
  const auto& gv = gamma.data();
  const auto& bv = beta.data();
  auto xhat = std::make_shared<std::vector<double>>(x.numel());
  auto rstd = std::make_shared<std::vector<double>>(rows);
  std::vector<double> out(x.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    double mu = 0.0;
    for (std::size_t j = 0; j < c; ++j) mu += xv[r * c + j];
    mu /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      const double d = xv[r * c + j] - mu;
      var += d * d;
    }
    var /= static_cast<double>(c);
    const double rs = 1.0 / std::sqrt(var + eps);
    (*rstd)[r] = rs;
    for (std::size_t j = 0; j < c; ++j) {
      const double h = (xv[r * c + j] - mu) * rs;
      (*xhat)[r * c + j] = h;
      out[r * c + j] = h * gv[j] + bv[j];
    }
  }
  Node* nx = x.node().get();
  Node* ng = gamma.node().get();
  Node* nb = beta.node().get();
  return make_result("layer_norm", x.shape(), std::move(out), {&x, &gamma, &beta},
                     [nx, ng, nb, xhat, rstd, rows, c](const std::vector<double>& g, const Node&) {
                       auto* gx = grad_of(nx);
                       auto* gg = grad_of(ng);
                       auto* gb = grad_of(nb);
                       const auto& gam = ng->data;
                       for (std::size_t r = 0; r < rows; ++r) {
                         const double* gr = g.data() + r * c;
                         const double* hr = xhat->data() + r * c;
                         if (gg)
                           for (std::size_t j = 0; j < c; ++j) (*gg)[j] += gr[j] * hr[j];
                         if (gb)
                           for (std::size_t j = 0; j < c; ++j) (*gb)[j] += gr[j];
                         if (gx) {
                           double m1 = 0.0, m2 = 0.0;
                           for (std::size_t j = 0; j < c; ++j) {
                             const double dh = gr[j] * gam[j];
                             m1 += dh;
                             m2 += dh * hr[j];
                           }
                           m1 /= static_cast<double>(c);
                           m2 /= static_cast<double>(c);
                           for (std::size_t j = 0; j < c; ++j) {
                             const double dh = gr[j] * gam[j];
                             (*gx)[r * c + j] += (*rstd)[r] * (dh - m1 - hr[j] * m2);
                           }
                         }
                       }
                     });
}

Tensor bilinear_sample(const Tensor& fmap, const Tensor& locations) {
  if (fmap.dim() != 3) throw ShapeError("bilinear_sample: feature map must be [H,W,C]");
  if (locations.dim() != 2 || locations.size(1) != 2) throw ShapeError("bilinear_sample: locations must be [P,2]");
  const std::size_t h = fmap.size(0), w = fmap.size(1), c = fmap.size(2), p = locations.size(0);
  const auto& f = fmap.data();
  const auto& loc = locations.data();
  std::vector<double> out(p * c, 0.0);
  const auto hi = static_cast<long>(h), wi = static_cast<long>(w);
  auto cell = [&](long y, long x) -> const double* {
    if (y < 0 || x < 0 || y >= hi || x >= wi) return nullptr;
    return f.data() + (static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x)) * c;
  };
  for (std::size_t i = 0; i < p; ++i) {
    const double x = loc[2 * i] * static_cast<double>(w) - 0.5;
    const double y = loc[2 * i + 1] * static_cast<double>(h) - 0.5;
    const double fx = std::floor(x), fy = std::floor(y);
    const long x0 = static_cast<long>(fx), y0 = static_cast<long>(fy);
    const double wx = x - fx, wy = y - fy;
    const double wts[4] = {(1 - wx) * (1 - wy), wx * (1 - wy), (1 - wx) * wy, wx * wy};
    const double* src[4] = {cell(y0, x0), cell(y0, x0 + 1), cell(y0 + 1, x0), cell(y0 + 1, x0 + 1)};
    double* dst = out.data() + i * c;
    for (int k = 0; k < 4; ++k) {
      if (!src[k]) continue;
      for (std::size_t j = 0; j < c; ++j) dst[j] += wts[k] * src[k][j];
    }
  }
  Node* nf = fmap.node().get();
  Node* nl = locations.node().get();
  return make_result("bilinear_sample", {p, c}, std::move(out), {&fmap, &locations},
                     [nf, nl, h, w, c, p](const std::vector<double>& g, const Node&) {
                       auto* gf = grad_of(nf);
                       auto* gl = grad_of(nl);
                       const auto& f = nf->data;
                       const auto& loc = nl->data;
                       const auto hi = static_cast<long>(h), wi = static_cast<long>(w);
                       auto offset = [&](long y, long x) -> long {
                         if (y < 0 || x < 0 || y >= hi || x >= wi) return -1;
                         return (y * wi + x) * static_cast<long>(c);
                       };
                       for (std::size_t i = 0; i < p; ++i) {
                         const double x = loc[2 * i] * static_cast<double>(w) - 0.5;
                         const double y = loc[2 * i + 1] * static_cast<double>(h) - 0.5;
                         const double fx = std::floor(x), fy = std::floor(y);
                         const long x0 = static_cast<long>(fx), y0 = static_cast<long>(fy);
                         const double wx = x - fx, wy = y - fy;
                         const long off[4] = {offset(y0, x0), offset(y0, x0 + 1), offset(y0 + 1, x0),
                                              offset(y0 + 1, x0 + 1)};
                         const double* gi = g.data() + i * c;
                         if (gf) {
                           const double wts[4] = {(1 - wx) * (1 - wy), wx * (1 - wy), (1 - wx) * wy, wx * wy};
                           for (int k = 0; k < 4; ++k) {
                             if (off[k] < 0) continue;
                             double* dst = gf->data() + off[k];
                             for (std::size_t j = 0; j < c; ++j) dst[j] += wts[k] * gi[j];
                           }
                         }
                         if (gl) {
                           double v[4] = {0, 0, 0, 0};
                           for (int k = 0; k < 4; ++k) {
                             if (off[k] < 0) continue;
                             const double* src = f.data() + off[k];
                             for (std::size_t j = 0; j < c; ++j) v[k] += gi[j] * src[j];
                           }
                           const double dx = (1 - wy) * (v[1] - v[0]) + wy * (v[3] - v[2]);
                           const double dy = (1 - wx) * (v[2] - v[0]) + wx * (v[3] - v[1]);
                           (*gl)[2 * i] += dx * static_cast<double>(w);
                           (*gl)[2 * i + 1] += dy * static_cast<double>(h);
                         }
                       }
                     });
}

Tensor im2col(const Tensor& image, std::size_t kernel, std::size_t stride) {
  if (image.dim() != 3) throw ShapeError("im2col: image must be [H,W,C]");
  const std::size_t h = image.size(0), w = image.size(1), c = image.size(2);
  if (kernel == 0 || stride == 0 || kernel > h || kernel > w) throw ShapeError("im2col: invalid kernel/stride");
  const std::size_t ho = (h - kernel) / stride + 1, wo = (w - kernel) / stride + 1;
  const std::size_t cols = kernel * kernel * c;
  std::vector<double> out(ho * wo * cols);
  const auto& x = image.data();
  for (std::size_t oy = 0; oy < ho; ++oy)
    for (std::size_t ox = 0; ox < wo; ++ox) {
      double* dst = out.data() + (oy * wo + ox) * cols;
      for (std::size_t ky = 0; ky < kernel; ++ky) {
        const double* src = x.data() + ((oy * stride + ky) * w + ox * stride) * c;
        std::copy_n(src, kernel * c, dst + ky * kernel * c);
      }
    }
  Node* ni = image.node().get();
  return make_result("im2col", {ho * wo, cols}, std::move(out), {&image},
                     [ni, ho, wo, w, c, kernel, stride, cols](const std::vector<double>& g, const Node&) {
                       auto& gi = ni->ensure_grad();
                       for (std::size_t oy = 0; oy < ho; ++oy)
                         for (std::size_t ox = 0; ox < wo; ++ox) {
                           const double* src = g.data() + (oy * wo + ox) * cols;
                           for (std::size_t ky = 0; ky < kernel; ++ky) {
                             double* dst = gi.data() + ((oy * stride + ky) * w + ox * stride) * c;
                             for (std::size_t i = 0; i < kernel * c; ++i) dst[i] += src[ky * kernel * c + i];
                           }
                         }
                     });
}

Tensor sine_encode(const Tensor& a, std::size_t dim, double temperature) {
  require_2d(a, "sine_encode");
  if (dim == 0 || dim % 2 != 0) throw ShapeError("sine_encode: dimension must be even and positive");
  const std::size_t r = a.size(0), m = a.size(1);
  auto freq = std::make_shared<std::vector<double>>(dim / 2);
  for (std::size_t j = 0; j < dim / 2; ++j) {
    (*freq)[j] = 2.0 * std::numbers::pi /
                 std::pow(temperature, 2.0 * static_cast<double>(j) / static_cast<double>(dim));
  }
  const auto& x = a.data();
  std::vector<double> out(r * m * dim);
  for (std::size_t i = 0; i < r * m; ++i)
    for (std::size_t j = 0; j < dim / 2; ++j) {
      const double t = x[i] * (*freq)[j];
      out[i * dim + 2 * j] = std::sin(t);
      out[i * dim + 2 * j + 1] = std::cos(t);
    }
  Node* na = a.node().get();
  return make_result("sine_encode", {r, m * dim}, std::move(out), {&a},
                     [na, freq, dim](const std::vector<double>& g, const Node& o) {
                       auto& ga = na->ensure_grad();
                       for (std::size_t i = 0; i < ga.size(); ++i)
                         for (std::size_t j = 0; j < dim / 2; ++j) {
                           const double s = o.data[i * dim + 2 * j], co = o.data[i * dim + 2 * j + 1];
                           ga[i] += (*freq)[j] * (g[i * dim + 2 * j] * co - g[i * dim + 2 * j + 1] * s);
                         }
                     });
}

}  // namespace hcq
