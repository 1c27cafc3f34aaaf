#include "shem/autograd.h"

#include <cassert>
#include <cmath>
#include <stdexcept>

#include "shem/kernels.h"

namespace shem::ad {
namespace {

void check(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

double log_sum_exp(const double* x, std::size_t n) {
  double m = x[0];
  for (std::size_t i = 1; i < n; ++i) m = std::max(m, x[i]);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::exp(x[i] - m);
  return m + std::log(s);
}

}  // namespace

Tape::Tape() {
  nodes_.reserve(1 << 14);
  values_.reserve(1 << 20);
  grads_.reserve(1 << 20);
}

void Tape::clear() {
  nodes_.clear();
  values_.clear();
  grads_.clear();
  lists_.clear();
}

Var Tape::push(Node node, bool allocate) {
  if (allocate) {
    node.offset = values_.size();
    values_.resize(values_.size() + node.size(), 0.0);
    grads_.resize(values_.size(), 0.0);
  }
  nodes_.push_back(node);
  return Var{static_cast<std::int32_t>(nodes_.size() - 1)};
}

double* Tape::val(std::int32_t id) {
  Node& n = nodes_[id];
  return n.external ? n.ext_value : values_.data() + n.offset;
}

const double* Tape::val(std::int32_t id) const {
  const Node& n = nodes_[id];
  return n.external ? n.ext_value : values_.data() + n.offset;
}

double* Tape::grd(std::int32_t id) {
  Node& n = nodes_[id];
  return n.external ? n.ext_grad : grads_.data() + n.offset;
}

std::span<const double> Tape::value(Var v) const {
  return {val(v.id), nodes_[v.id].size()};
}

std::span<double> Tape::grad(Var v) { return {grd(v.id), nodes_[v.id].size()}; }

Var Tape::constant(std::span<const double> values, std::size_t rows, std::size_t cols) {
  check(values.size() == rows * cols, "constant: shape mismatch");
  Node n;
  n.rows = rows;
  n.cols = cols;
  Var v = push(n, true);
  std::copy(values.begin(), values.end(), val(v.id));
  return v;
}

Var Tape::scalar(double x) { return constant(std::span<const double>(&x, 1), 1, 1); }

Var Tape::zeros(std::size_t size) {
  Node n;
  n.rows = size;
  n.cols = 1;
  return push(n, true);
}

Var Tape::param(Parameter& p) {
  Node n;
  n.rows = p.rows;
  n.cols = p.cols;
  n.external = true;
  n.needs_grad = true;
  n.ext_value = p.value.data();
  n.ext_grad = p.grad.data();
  return push(n, false);
}

Var Tape::row(Parameter& p, std::size_t r) {
  check(r < p.rows, "row: index out of range");
  Node n;
  n.rows = p.cols;
  n.cols = 1;
  n.external = true;
  n.needs_grad = true;
  n.ext_value = p.value.data() + r * p.cols;
  n.ext_grad = p.grad.data() + r * p.cols;
  return push(n, false);
}

Var Tape::unary(Op op, Var a) {
  Node n;
  n.op = op;
  n.a = a.id;
  n.rows = nodes_[a.id].rows;
  n.cols = nodes_[a.id].cols;
  n.needs_grad = nodes_[a.id].needs_grad;
  return push(n, true);
}

Var Tape::binary(Op op, Var a, Var b, std::size_t rows, std::size_t cols) {
  Node n;
  n.op = op;
  n.a = a.id;
  n.b = b.id;
  n.rows = rows;
  n.cols = cols;
  n.needs_grad = nodes_[a.id].needs_grad || nodes_[b.id].needs_grad;
  return push(n, true);
}

Var Tape::matvec(Var w, Var x) {
  const std::size_t r = nodes_[w.id].rows, c = nodes_[w.id].cols;
  check(nodes_[x.id].size() == c, "matvec: dimension mismatch");
  Var y = binary(Op::kMatVec, w, x, r, 1);
  kernels::active().gemv(val(w.id), r, c, val(x.id), val(y.id));
  return y;
}

Var Tape::matvec_t(Var w, Var x) {
  const std::size_t r = nodes_[w.id].rows, c = nodes_[w.id].cols;
  check(nodes_[x.id].size() == r, "matvec_t: dimension mismatch");
  Var y = binary(Op::kMatVecT, w, x, c, 1);
  kernels::active().gemv_t(val(w.id), r, c, val(x.id), val(y.id));
  return y;
}

Var Tape::add(Var a, Var b) {
  const std::size_t n = nodes_[a.id].size();
  check(nodes_[b.id].size() == n, "add: size mismatch");
  Var y = binary(Op::kAdd, a, b, nodes_[a.id].rows, nodes_[a.id].cols);
  const double *x0 = val(a.id), *x1 = val(b.id);
  double* out = val(y.id);
  for (std::size_t i = 0; i < n; ++i) out[i] = x0[i] + x1[i];
  return y;
}

Var Tape::sub(Var a, Var b) {
  const std::size_t n = nodes_[a.id].size();
  check(nodes_[b.id].size() == n, "sub: size mismatch");
  Var y = binary(Op::kSub, a, b, nodes_[a.id].rows, nodes_[a.id].cols);
  const double *x0 = val(a.id), *x1 = val(b.id);
  double* out = val(y.id);
  for (std::size_t i = 0; i < n; ++i) out[i] = x0[i] - x1[i];
  return y;
}

Var Tape::mul(Var a, Var b) {
  const std::size_t n = nodes_[a.id].size();
  check(nodes_[b.id].size() == n, "mul: size mismatch");
  Var y = binary(Op::kMul, a, b, nodes_[a.id].rows, nodes_[a.id].cols);
  const double *x0 = val(a.id), *x1 = val(b.id);
  double* out = val(y.id);
  for (std::size_t i = 0; i < n; ++i) out[i] = x0[i] * x1[i];
  return y;
}

Var Tape::scale(Var a, double c) {
  Var y = unary(Op::kScale, a);
  nodes_[y.id].aux = c;
  const std::size_t n = nodes_[a.id].size();
  const double* x = val(a.id);
  double* out = val(y.id);
  for (std::size_t i = 0; i < n; ++i) out[i] = c * x[i];
  return y;
}

Var Tape::sum(std::span<const Var> items) {
  check(!items.empty(), "sum: no inputs");
  const std::size_t n = nodes_[items[0].id].size();
  Node node;
  node.op = Op::kSum;
  node.rows = nodes_[items[0].id].rows;
  node.cols = nodes_[items[0].id].cols;
  node.list_offset = lists_.size();
  node.list_length = items.size();
  for (Var v : items) {
    check(nodes_[v.id].size() == n, "sum: size mismatch");
    lists_.push_back(v.id);
    node.needs_grad = node.needs_grad || nodes_[v.id].needs_grad;
  }
  Var y = push(node, true);
  double* out = val(y.id);
  for (Var v : items) kernels::active().axpy(1.0, val(v.id), out, n);
  return y;
}

Var Tape::mean(std::span<const Var> items) {
  return scale(sum(items), 1.0 / static_cast<double>(items.size()));
}

Var Tape::sigmoid(Var a) {
  Var y = unary(Op::kSigmoid, a);
  const std::size_t n = nodes_[a.id].size();
  const double* x = val(a.id);
  double* out = val(y.id);
  for (std::size_t i = 0; i < n; ++i) out[i] = 1.0 / (1.0 + std::exp(-x[i]));
  return y;
}

Var Tape::tanh(Var a) {
  Var y = unary(Op::kTanh, a);
  const std::size_t n = nodes_[a.id].size();
  const double* x = val(a.id);
  double* out = val(y.id);
  for (std::size_t i = 0; i < n; ++i) out[i] = std::tanh(x[i]);
  return y;
}

Var Tape::concat(std::span<const Var> items) {
  check(!items.empty(), "concat: no inputs");
  Node node;
  node.op = Op::kConcat;
  node.list_offset = lists_.size();
  node.list_length = items.size();
  std::size_t total = 0;
  for (Var v : items) {
    lists_.push_back(v.id);
    total += nodes_[v.id].size();
    node.needs_grad = node.needs_grad || nodes_[v.id].needs_grad;
  }
  node.rows = total;
  node.cols = 1;
  Var y = push(node, true);
  double* out = val(y.id);
  for (Var v : items) {
    const std::size_t n = nodes_[v.id].size();
    std::copy(val(v.id), val(v.id) + n, out);
    out += n;
  }
  return y;
}

Var Tape::stack(std::span<const Var> rows) {
  check(!rows.empty(), "stack: no inputs");
  const std::size_t width = nodes_[rows[0].id].size();
  for (Var v : rows) check(nodes_[v.id].size() == width, "stack: ragged rows");
  Var y = concat(rows);
  nodes_[y.id].rows = rows.size();
  nodes_[y.id].cols = width;
  return y;
}

Var Tape::slice(Var a, std::size_t offset, std::size_t length) {
  check(offset + length <= nodes_[a.id].size(), "slice: out of range");
  Node node;
  node.op = Op::kSlice;
  node.a = a.id;
  node.rows = length;
  node.cols = 1;
  node.index = offset;
  node.needs_grad = nodes_[a.id].needs_grad;
  Var y = push(node, true);
  const double* x = val(a.id) + offset;
  std::copy(x, x + length, val(y.id));
  return y;
}

Var Tape::softmax(Var a) {
  Var y = unary(Op::kSoftmax, a);
  const std::size_t n = nodes_[a.id].size();
  const double* x = val(a.id);
  double* out = val(y.id);
  const double lse = log_sum_exp(x, n);
  for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(x[i] - lse);
  return y;
}

Var Tape::log_softmax(Var a) {
  Var y = unary(Op::kLogSoftmax, a);
  const std::size_t n = nodes_[a.id].size();
  const double* x = val(a.id);
  double* out = val(y.id);
  const double lse = log_sum_exp(x, n);
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] - lse;
  return y;
}

Var Tape::dot(Var a, Var b) {
  const std::size_t n = nodes_[a.id].size();
  check(nodes_[b.id].size() == n, "dot: size mismatch");
  Var y = binary(Op::kDot, a, b, 1, 1);
  val(y.id)[0] = kernels::active().dot(val(a.id), val(b.id), n);
  return y;
}

Var Tape::pick(Var a, std::size_t index) {
  check(index < nodes_[a.id].size(), "pick: index out of range");
  Node node;
  node.op = Op::kPick;
  node.a = a.id;
  node.rows = node.cols = 1;
  node.index = index;
  node.needs_grad = nodes_[a.id].needs_grad;
  Var y = push(node, true);
  val(y.id)[0] = val(a.id)[index];
  return y;
}

Var Tape::cosine(Var a, Var b) {
  const std::size_t n = nodes_[a.id].size();
  check(nodes_[b.id].size() == n, "cosine: size mismatch");
  const auto& k = kernels::active();
  const double na = std::sqrt(k.dot(val(a.id), val(a.id), n));
  const double nb = std::sqrt(k.dot(val(b.id), val(b.id), n));
  check(na > 0.0 && nb > 0.0, "cosine: zero-norm vector");
  Var y = binary(Op::kCosine, a, b, 1, 1);
  val(y.id)[0] = k.dot(val(a.id), val(b.id), n) / (na * nb);
  return y;
}

Var Tape::cross_entropy(Var logits, std::size_t target) {
  const std::size_t n = nodes_[logits.id].size();
  check(target < n, "cross_entropy: target out of range");
  Node node;
  node.op = Op::kCrossEntropy;
  node.a = logits.id;
  node.rows = node.cols = 1;
  node.index = target;
  node.needs_grad = nodes_[logits.id].needs_grad;
  Var y = push(node, true);
  const double* x = val(logits.id);
  val(y.id)[0] = log_sum_exp(x, n) - x[target];
  return y;
}

Var Tape::kl(Var q_logits, Var p_logits, KlMode mode) {
  const std::size_t n = nodes_[q_logits.id].size();
  check(nodes_[p_logits.id].size() == n, "kl: size mismatch");
  Var y = binary(Op::kKl, q_logits, p_logits, 1, 1);
  nodes_[y.id].mode = static_cast<std::uint8_t>(mode);
  const double* ql = val(q_logits.id);
  const double* pl = val(p_logits.id);
  const double lq = log_sum_exp(ql, n), lp = log_sum_exp(pl, n);
  double v = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double log_q = ql[i] - lq, log_p = pl[i] - lp;
    const double q = std::exp(log_q);
    v += mode == KlMode::kDivergence ? q * (log_q - log_p) : -q * log_p;
  }
  val(y.id)[0] = v;
  return y;
}

void Tape::backward(Var out, double seed) {
  check(out.valid() && static_cast<std::size_t>(out.id) < nodes_.size(),
        "backward: bad node");
  check(nodes_[out.id].size() == 1, "backward: output must be scalar");
  if (!nodes_[out.id].needs_grad) return;
  grd(out.id)[0] += seed;
  for (std::size_t id = static_cast<std::size_t>(out.id) + 1; id-- > 0;) {
    if (nodes_[id].needs_grad && nodes_[id].op != Op::kLeaf) backward_node(id);
  }
}

void Tape::backward_node(std::size_t id) {
  const Node& n = nodes_[id];
  const double* g = grd(static_cast<std::int32_t>(id));
  const double* y = val(static_cast<std::int32_t>(id));
  const auto& k = kernels::active();
  auto wants = [&](std::int32_t i) { return i >= 0 && nodes_[i].needs_grad; };
  const std::size_t size = n.size();

  switch (n.op) {
    case Op::kLeaf:
      break;
    case Op::kMatVec: {
      const Node& w = nodes_[n.a];
      if (wants(n.a)) k.ger(grd(n.a), w.rows, w.cols, g, val(n.b));
      if (wants(n.b)) k.gemv_t(val(n.a), w.rows, w.cols, g, grd(n.b));
      break;
    }
    case Op::kMatVecT: {
      const Node& w = nodes_[n.a];
      if (wants(n.a)) k.ger(grd(n.a), w.rows, w.cols, val(n.b), g);
      if (wants(n.b)) k.gemv(val(n.a), w.rows, w.cols, g, grd(n.b));
      break;
    }
    case Op::kAdd:
      if (wants(n.a)) k.axpy(1.0, g, grd(n.a), size);
      if (wants(n.b)) k.axpy(1.0, g, grd(n.b), size);
      break;
    case Op::kSub:
      if (wants(n.a)) k.axpy(1.0, g, grd(n.a), size);
      if (wants(n.b)) k.axpy(-1.0, g, grd(n.b), size);
      break;
    case Op::kMul: {
      if (wants(n.a)) {
        double* ga = grd(n.a);
        const double* xb = val(n.b);
        for (std::size_t i = 0; i < size; ++i) ga[i] += g[i] * xb[i];
      }
      if (wants(n.b)) {
        double* gb = grd(n.b);
        const double* xa = val(n.a);
        for (std::size_t i = 0; i < size; ++i) gb[i] += g[i] * xa[i];
      }
      break;
    }
    case Op::kScale:
      if (wants(n.a)) k.axpy(n.aux, g, grd(n.a), size);
      break;
    case Op::kSum:
      for (std::size_t j = 0; j < n.list_length; ++j) {
        const std::int32_t in = lists_[n.list_offset + j];
        if (wants(in)) k.axpy(1.0, g, grd(in), size);
      }
      break;
    case Op::kSigmoid: {
      double* ga = grd(n.a);
      for (std::size_t i = 0; i < size; ++i) ga[i] += g[i] * y[i] * (1.0 - y[i]);
      break;
    }
    case Op::kTanh: {
      double* ga = grd(n.a);
      for (std::size_t i = 0; i < size; ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
      break;
    }
    case Op::kConcat: {
      const double* src = g;
      for (std::size_t j = 0; j < n.list_length; ++j) {
        const std::int32_t in = lists_[n.list_offset + j];
        const std::size_t len = nodes_[in].size();
        if (wants(in)) k.axpy(1.0, src, grd(in), len);
        src += len;
      }
      break;
    }
    case Op::kSlice:
      k.axpy(1.0, g, grd(n.a) + n.index, size);
      break;
    case Op::kSoftmax: {
      const double gy = k.dot(g, y, size);
      double* ga = grd(n.a);
      for (std::size_t i = 0; i < size; ++i) ga[i] += y[i] * (g[i] - gy);
      break;
    }
    case Op::kLogSoftmax: {
      double gs = 0.0;
      for (std::size_t i = 0; i < size; ++i) gs += g[i];
      double* ga = grd(n.a);
      for (std::size_t i = 0; i < size; ++i) ga[i] += g[i] - std::exp(y[i]) * gs;
      break;
    }
    case Op::kDot: {
      const std::size_t len = nodes_[n.a].size();
      if (wants(n.a)) k.axpy(g[0], val(n.b), grd(n.a), len);
      if (wants(n.b)) k.axpy(g[0], val(n.a), grd(n.b), len);
      break;
    }
    case Op::kPick:
      grd(n.a)[n.index] += g[0];
      break;
    case Op::kCosine: {
      const std::size_t len = nodes_[n.a].size();
      const double* xa = val(n.a);
      const double* xb = val(n.b);
      const double na = std::sqrt(k.dot(xa, xa, len));
      const double nb = std::sqrt(k.dot(xb, xb, len));
      const double c = y[0];
      if (wants(n.a)) {
        double* ga = grd(n.a);
        for (std::size_t i = 0; i < len; ++i) {
          ga[i] += g[0] * (xb[i] / (na * nb) - c * xa[i] / (na * na));
        }
      }
      if (wants(n.b)) {
        double* gb = grd(n.b);
        for (std::size_t i = 0; i < len; ++i) {
          gb[i] += g[0] * (xa[i] / (na * nb) - c * xb[i] / (nb * nb));
        }
      }
      break;
    }
    case Op::kCrossEntropy: {
      const std::size_t len = nodes_[n.a].size();
      const double* x = val(n.a);
      const double lse = log_sum_exp(x, len);
      double* ga = grd(n.a);
      for (std::size_t i = 0; i < len; ++i) ga[i] += g[0] * std::exp(x[i] - lse);
      ga[n.index] -= g[0];
      break;
    }
    case Op::kKl: {
      const std::size_t len = nodes_[n.a].size();
      const double* ql = val(n.a);
      const double* pl = val(n.b);
      const double lq = log_sum_exp(ql, len), lp = log_sum_exp(pl, len);
      const bool divergence = n.mode == static_cast<std::uint8_t>(KlMode::kDivergence);
      const double v = y[0];
      if (wants(n.a)) {
        double* ga = grd(n.a);
        for (std::size_t i = 0; i < len; ++i) {
          const double log_q = ql[i] - lq, log_p = pl[i] - lp;
          const double q = std::exp(log_q);
          const double term = divergence ? log_q - log_p : -log_p;
          ga[i] += g[0] * q * (term - v);
        }
      }
      if (wants(n.b)) {
        double* gb = grd(n.b);
        for (std::size_t i = 0; i < len; ++i) {
          gb[i] += g[0] * (std::exp(pl[i] - lp) - std::exp(ql[i] - lq));
        }
      }
      break;
    }
  }
}

}  // namespace shem::ad
