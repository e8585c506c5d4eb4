#include "citl/autodiff.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <stdexcept>
#include <utility>

namespace citl::ad {

std::size_t Var::size() const { return tape->node(*this).value.size(); }
int Var::rows() const { return tape->node(*this).rows; }
int Var::cols() const { return tape->node(*this).cols; }
const std::vector<double>& Var::value() const { return tape->node(*this).value; }

double Var::scalar() const {
  const auto& v = value();
  if (v.size() != 1) throw std::logic_error("ad: scalar() on non-scalar value");
  return v[0];
}

const std::vector<double>& Var::grad() const { return tape->grad_buffer(*this); }

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var{this, static_cast<int>(nodes_.size() - 1)};
}

std::vector<double>& Tape::grad_buffer(Var v) {
  auto& n = node(v);
  if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
  return n.grad;
}

Var Tape::leaf(std::vector<double> values, int rows, int cols) {
  if (values.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols))
    throw std::invalid_argument("ad: leaf shape mismatch");
  Node n;
  n.value = std::move(values);
  n.rows = rows;
  n.cols = cols;
  n.requires_grad = true;
  return push(std::move(n));
}

Var Tape::leaf(std::span<const double> values, int rows, int cols) {
  return leaf(std::vector<double>(values.begin(), values.end()), rows, cols);
}

Var Tape::constant(std::vector<double> values, int rows, int cols) {
  if (values.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols))
    throw std::invalid_argument("ad: constant shape mismatch");
  Node n;
  n.value = std::move(values);
  n.rows = rows;
  n.cols = cols;
  return push(std::move(n));
}

Var Tape::constant(std::span<const double> values, int rows, int cols) {
  return constant(std::vector<double>(values.begin(), values.end()), rows, cols);
}

void Tape::backward(Var root) {
  if (root.tape != this) throw std::logic_error("ad: root belongs to another tape");
  if (node(root).value.size() != 1) throw std::logic_error("ad: backward() needs a scalar root");
  for (auto& n : nodes_) std::fill(n.grad.begin(), n.grad.end(), 0.0);
  grad_buffer(root)[0] = 1.0;
  for (int id = root.id; id >= 0; --id) {
    auto& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.requires_grad || !n.backward || n.grad.empty()) continue;
    n.backward(*this);
  }
}

class OpBuilder {
 public:
  using Node = Tape::Node;

  static Tape& tape_of(Var a) {
    assert(a.valid());
    return *a.tape;
  }

  static Tape& tape_of(Var a, Var b) {
    if (a.tape != b.tape) throw std::logic_error("ad: operands on different tapes");
    return *a.tape;
  }

  static const Node& node(Var v) { return v.tape->node(v); }
  static std::vector<double>& grad(Var v) { return v.tape->grad_buffer(v); }
  static const std::vector<double>& out_grad(Tape& t, int id) {
    return t.nodes_[static_cast<std::size_t>(id)].grad;
  }
  static bool needs(Var v) { return node(v).requires_grad; }

  // Creates a result node. backward receives (tape, upstream gradient).
  template <class F>
  static Var make(Tape& t, std::vector<double> value, int rows, int cols, bool requires_grad, F&& bw) {
    Node n;
    n.value = std::move(value);
    n.rows = rows;
    n.cols = cols;
    n.requires_grad = requires_grad;
    const int id = static_cast<int>(t.nodes_.size());
    if (requires_grad) {
      n.backward = [id, f = std::forward<F>(bw)](Tape& tape) {
        const auto& g = tape.nodes_[static_cast<std::size_t>(id)].grad;
        f(tape, g);
      };
    }
    return t.push(std::move(n));
  }

  static Var from(Tape& t, int id) { return Var{&t, id}; }
};

namespace {

using B = OpBuilder;

void require_same_shape(Var a, Var b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument(std::string("ad: shape mismatch in ") + op);
}

void require_scalar(Var a, const char* op) {
  if (a.size() != 1) throw std::invalid_argument(std::string("ad: expected scalar in ") + op);
}

template <class F, class D>
Var unary(Var a, F&& f, D&& dfdx) {
  Tape& t = B::tape_of(a);
  const auto& av = a.value();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = f(av[i]);
  const int aid = a.id;
  return B::make(t, std::move(out), a.rows(), a.cols(), B::needs(a),
                 [aid, dfdx](Tape& tape, const std::vector<double>& g) {
                   Var av = B::from(tape, aid);
                   if (!B::needs(av)) return;
                   auto& ga = B::grad(av);
                   const auto& x = av.value();
                   for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * dfdx(x[i]);
                 });
}

}  // namespace

Var operator+(Var a, Var b) {
  require_same_shape(a, b, "add");
  Tape& t = B::tape_of(a, b);
  std::vector<double> out(a.value());
  const auto& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  const int aid = a.id, bid = b.id;
  return B::make(t, std::move(out), a.rows(), a.cols(), B::needs(a) || B::needs(b),
                 [aid, bid](Tape& tape, const std::vector<double>& g) {
                   for (int id : {aid, bid}) {
                     Var v = B::from(tape, id);
                     if (!B::needs(v)) continue;
                     auto& gv = B::grad(v);
                     for (std::size_t i = 0; i < g.size(); ++i) gv[i] += g[i];
                   }
                 });
}

Var operator-(Var a, Var b) { return a + (-b); }

Var operator-(Var a) {
  return unary(a, [](double x) { return -x; }, [](double) { return -1.0; });
}

Var operator*(Var a, Var b) {
  require_same_shape(a, b, "mul");
  Tape& t = B::tape_of(a, b);
  const auto& av = a.value();
  const auto& bv = b.value();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  const int aid = a.id, bid = b.id;
  return B::make(t, std::move(out), a.rows(), a.cols(), B::needs(a) || B::needs(b),
                 [aid, bid](Tape& tape, const std::vector<double>& g) {
                   Var a = B::from(tape, aid);
                   Var b = B::from(tape, bid);
                   if (B::needs(a)) {
                     auto& ga = B::grad(a);
                     const auto& bv = b.value();
                     for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
                   }
                   if (B::needs(b)) {
                     auto& gb = B::grad(b);
                     const auto& av = a.value();
                     for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
                   }
                 });
}

Var operator*(double s, Var a) {
  return unary(a, [s](double x) { return s * x; }, [s](double) { return s; });
}

Var operator+(Var a, double s) {
  return unary(a, [s](double x) { return x + s; }, [](double) { return 1.0; });
}

Var scale(Var a, Var s) {
  require_scalar(s, "scale");
  Tape& t = B::tape_of(a, s);
  const double sv = s.scalar();
  std::vector<double> out(a.value());
  for (auto& x : out) x *= sv;
  const int aid = a.id, sid = s.id;
  return B::make(t, std::move(out), a.rows(), a.cols(), B::needs(a) || B::needs(s),
                 [aid, sid](Tape& tape, const std::vector<double>& g) {
                   Var a = B::from(tape, aid);
                   Var s = B::from(tape, sid);
                   const auto& av = a.value();
                   if (B::needs(a)) {
                     auto& ga = B::grad(a);
                     const double sv = s.scalar();
                     for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * sv;
                   }
                   if (B::needs(s)) {
                     double acc = 0.0;
                     for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * av[i];
                     B::grad(s)[0] += acc;
                   }
                 });
}

Var tanh(Var a) {
  return unary(a, [](double x) { return std::tanh(x); },
               [](double x) {
                 const double y = std::tanh(x);
                 return 1.0 - y * y;
               });
}

Var exp(Var a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double x) { return std::exp(x); });
}

Var log(Var a) {
  return unary(a, [](double x) { return std::log(x); }, [](double x) { return 1.0 / x; });
}

Var relu(Var a) {
  return unary(a, [](double x) { return x > 0.0 ? x : 0.0; },
               [](double x) { return x > 0.0 ? 1.0 : 0.0; });
}

Var softplus(Var a) {
  return unary(a, [](double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); },
               [](double x) {
                 // logistic sigmoid
                 if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
                 const double e = std::exp(x);
                 return e / (1.0 + e);
               });
}

Var sum(Var a) {
  Tape& t = B::tape_of(a);
  double s = 0.0;
  for (double x : a.value()) s += x;
  const int aid = a.id;
  return B::make(t, {s}, 1, 1, B::needs(a), [aid](Tape& tape, const std::vector<double>& g) {
    auto& ga = B::grad(B::from(tape, aid));
    for (auto& x : ga) x += g[0];
  });
}

Var mean(Var a) {
  if (a.size() == 0) throw std::invalid_argument("ad: mean of empty value");
  return (1.0 / static_cast<double>(a.size())) * sum(a);
}

Var dot(Var a, Var b) {
  if (a.size() != b.size()) throw std::invalid_argument("ad: size mismatch in dot");
  Tape& t = B::tape_of(a, b);
  const auto& av = a.value();
  const auto& bv = b.value();
  double s = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) s += av[i] * bv[i];
  const int aid = a.id, bid = b.id;
  return B::make(t, {s}, 1, 1, B::needs(a) || B::needs(b),
                 [aid, bid](Tape& tape, const std::vector<double>& g) {
                   Var a = B::from(tape, aid);
                   Var b = B::from(tape, bid);
                   if (B::needs(a)) {
                     auto& ga = B::grad(a);
                     const auto& bv = b.value();
                     for (std::size_t i = 0; i < bv.size(); ++i) ga[i] += g[0] * bv[i];
                   }
                   if (B::needs(b)) {
                     auto& gb = B::grad(b);
                     const auto& av = a.value();
                     for (std::size_t i = 0; i < av.size(); ++i) gb[i] += g[0] * av[i];
                   }
                 });
}

Var logsumexp(Var a) {
  if (a.size() == 0) throw std::invalid_argument("ad: logsumexp of empty value");
  Tape& t = B::tape_of(a);
  const auto& av = a.value();
  const double mx = *std::max_element(av.begin(), av.end());
  double s = 0.0;
  for (double x : av) s += std::exp(x - mx);
  const double out = mx + std::log(s);
  const int aid = a.id;
  return B::make(t, {out}, 1, 1, B::needs(a), [aid, out](Tape& tape, const std::vector<double>& g) {
    Var a = B::from(tape, aid);
    auto& ga = B::grad(a);
    const auto& av = a.value();
    for (std::size_t i = 0; i < av.size(); ++i) ga[i] += g[0] * std::exp(av[i] - out);
  });
}

Var log_softmax(Var a) {
  if (a.size() == 0) throw std::invalid_argument("ad: log_softmax of empty value");
  Tape& t = B::tape_of(a);
  const auto& av = a.value();
  const double mx = *std::max_element(av.begin(), av.end());
  double s = 0.0;
  for (double x : av) s += std::exp(x - mx);
  const double lse = mx + std::log(s);
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] - lse;
  const int aid = a.id;
  const int self = static_cast<int>(t.node_count());
  return B::make(t, std::move(out), a.rows(), a.cols(), B::needs(a),
                 [aid, self](Tape& tape, const std::vector<double>& g) {
                   const auto& y = B::from(tape, self).value();
                   double gs = 0.0;
                   for (double x : g) gs += x;
                   auto& ga = B::grad(B::from(tape, aid));
                   for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] - std::exp(y[i]) * gs;
                 });
}

Var pick(Var a, std::size_t index) {
  if (index >= a.size()) throw std::out_of_range("ad: pick index");
  Tape& t = B::tape_of(a);
  const int aid = a.id;
  return B::make(t, {a.value()[index]}, 1, 1, B::needs(a),
                 [aid, index](Tape& tape, const std::vector<double>& g) {
                   B::grad(B::from(tape, aid))[index] += g[0];
                 });
}

Var matvec(Var w, Var x) {
  const int r = w.rows(), c = w.cols();
  if (x.size() != static_cast<std::size_t>(c)) throw std::invalid_argument("ad: matvec shape");
  Tape& t = B::tape_of(w, x);
  const auto& wv = w.value();
  const auto& xv = x.value();
  std::vector<double> out(static_cast<std::size_t>(r), 0.0);
  for (int i = 0; i < r; ++i) {
    double s = 0.0;
    const double* row = wv.data() + static_cast<std::size_t>(i) * c;
    for (int j = 0; j < c; ++j) s += row[j] * xv[static_cast<std::size_t>(j)];
    out[static_cast<std::size_t>(i)] = s;
  }
  const int wid = w.id, xid = x.id;
  return B::make(t, std::move(out), r, 1, B::needs(w) || B::needs(x),
                 [wid, xid, r, c](Tape& tape, const std::vector<double>& g) {
                   Var w = B::from(tape, wid);
                   Var x = B::from(tape, xid);
                   const auto& wv = w.value();
                   const auto& xv = x.value();
                   if (B::needs(w)) {
                     auto& gw = B::grad(w);
                     for (int i = 0; i < r; ++i) {
                       const double gi = g[static_cast<std::size_t>(i)];
                       if (gi == 0.0) continue;
                       double* row = gw.data() + static_cast<std::size_t>(i) * c;
                       for (int j = 0; j < c; ++j) row[j] += gi * xv[static_cast<std::size_t>(j)];
                     }
                   }
                   if (B::needs(x)) {
                     auto& gx = B::grad(x);
                     for (int i = 0; i < r; ++i) {
                       const double gi = g[static_cast<std::size_t>(i)];
                       const double* row = wv.data() + static_cast<std::size_t>(i) * c;
                       for (int j = 0; j < c; ++j) gx[static_cast<std::size_t>(j)] += gi * row[j];
                     }
                   }
                 });
}

Var matvec_t(Var w, Var x) {
  const int r = w.rows(), c = w.cols();
  if (x.size() != static_cast<std::size_t>(r)) throw std::invalid_argument("ad: matvec_t shape");
  Tape& t = B::tape_of(w, x);
  const auto& wv = w.value();
  const auto& xv = x.value();
  std::vector<double> out(static_cast<std::size_t>(c), 0.0);
  for (int i = 0; i < r; ++i) {
    const double xi = xv[static_cast<std::size_t>(i)];
    if (xi == 0.0) continue;
    const double* row = wv.data() + static_cast<std::size_t>(i) * c;
    for (int j = 0; j < c; ++j) out[static_cast<std::size_t>(j)] += row[j] * xi;
  }
  const int wid = w.id, xid = x.id;
  return B::make(t, std::move(out), c, 1, B::needs(w) || B::needs(x),
                 [wid, xid, r, c](Tape& tape, const std::vector<double>& g) {
                   Var w = B::from(tape, wid);
                   Var x = B::from(tape, xid);
                   const auto& wv = w.value();
                   const auto& xv = x.value();
                   if (B::needs(w)) {
                     auto& gw = B::grad(w);
                     for (int i = 0; i < r; ++i) {
                       const double xi = xv[static_cast<std::size_t>(i)];
                       if (xi == 0.0) continue;
                       double* row = gw.data() + static_cast<std::size_t>(i) * c;
                       for (int j = 0; j < c; ++j) row[j] += g[static_cast<std::size_t>(j)] * xi;
                     }
                   }
                   if (B::needs(x)) {
                     auto& gx = B::grad(x);
                     for (int i = 0; i < r; ++i) {
                       const double* row = wv.data() + static_cast<std::size_t>(i) * c;
                       double s = 0.0;
                       for (int j = 0; j < c; ++j) s += row[j] * g[static_cast<std::size_t>(j)];
                       gx[static_cast<std::size_t>(i)] += s;
                     }
                   }
                 });
}

Var gather_rows(Var table, std::span<const int> rows) {
  const int c = table.cols();
  Tape& t = B::tape_of(table);
  const auto& tv = table.value();
  std::vector<double> out;
  out.reserve(rows.size() * static_cast<std::size_t>(c));
  for (int r : rows) {
    if (r < 0 || r >= table.rows()) throw std::out_of_range("ad: gather_rows index");
    const auto* row = tv.data() + static_cast<std::size_t>(r) * c;
    out.insert(out.end(), row, row + c);
  }
  std::vector<int> idx(rows.begin(), rows.end());
  const int tid = table.id;
  return B::make(t, std::move(out), static_cast<int>(rows.size()), c, B::needs(table),
                 [tid, idx = std::move(idx), c](Tape& tape, const std::vector<double>& g) {
                   auto& gt = B::grad(B::from(tape, tid));
                   for (std::size_t k = 0; k < idx.size(); ++k) {
                     double* dst = gt.data() + static_cast<std::size_t>(idx[k]) * c;
                     const double* src = g.data() + k * static_cast<std::size_t>(c);
                     for (int j = 0; j < c; ++j) dst[j] += src[j];
                   }
                 });
}

Var mean_rows(Var m) {
  const int r = m.rows(), c = m.cols();
  if (r == 0) throw std::invalid_argument("ad: mean_rows of empty matrix");
  Tape& t = B::tape_of(m);
  const auto& mv = m.value();
  std::vector<double> out(static_cast<std::size_t>(c), 0.0);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) out[static_cast<std::size_t>(j)] += mv[static_cast<std::size_t>(i) * c + j];
  const double inv = 1.0 / r;
  for (auto& x : out) x *= inv;
  const int mid = m.id;
  return B::make(t, std::move(out), c, 1, B::needs(m),
                 [mid, r, c, inv](Tape& tape, const std::vector<double>& g) {
                   auto& gm = B::grad(B::from(tape, mid));
                   for (int i = 0; i < r; ++i)
                     for (int j = 0; j < c; ++j)
                       gm[static_cast<std::size_t>(i) * c + j] += g[static_cast<std::size_t>(j)] * inv;
                 });
}

Var concat(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("ad: concat of nothing");
  Tape& t = B::tape_of(parts.front());
  std::vector<double> out;
  std::vector<int> ids;
  bool any = false;
  for (Var p : parts) {
    if (p.tape != &t) throw std::logic_error("ad: operands on different tapes");
    out.insert(out.end(), p.value().begin(), p.value().end());
    ids.push_back(p.id);
    any = any || B::needs(p);
  }
  const int n = static_cast<int>(out.size());
  return B::make(t, std::move(out), n, 1, any, [ids = std::move(ids)](Tape& tape, const std::vector<double>& g) {
    std::size_t off = 0;
    for (int id : ids) {
      Var p = B::from(tape, id);
      const std::size_t n = p.size();
      if (B::needs(p)) {
        auto& gp = B::grad(p);
        for (std::size_t i = 0; i < n; ++i) gp[i] += g[off + i];
      }
      off += n;
    }
  });
}

Var normalize(Var x, double min_norm) {
  Tape& t = B::tape_of(x);
  const auto& xv = x.value();
  double sq = 0.0;
  for (double v : xv) sq += v * v;
  const double norm = std::sqrt(sq);
  if (norm < min_norm) {
    std::vector<double> e1(xv.size(), 0.0);
    if (!e1.empty()) e1[0] = 1.0;
    return t.constant(std::move(e1), x.rows(), x.cols());
  }
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] / norm;
  const int xid = x.id;
  const int self = static_cast<int>(t.node_count());
  return B::make(t, std::move(out), x.rows(), x.cols(), B::needs(x),
                 [xid, self, norm](Tape& tape, const std::vector<double>& g) {
                   // d(x/|x|) = (g - y (y.g)) / |x|
                   const auto& y = B::from(tape, self).value();
                   double yg = 0.0;
                   for (std::size_t i = 0; i < y.size(); ++i) yg += y[i] * g[i];
                   auto& gx = B::grad(B::from(tape, xid));
                   for (std::size_t i = 0; i < y.size(); ++i) gx[i] += (g[i] - y[i] * yg) / norm;
                 });
}

}  // namespace citl::ad
