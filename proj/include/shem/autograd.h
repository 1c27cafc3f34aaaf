#pragma once

// Tape-based reverse-mode differentiation over dense float64 vectors and
// row-major matrices. Parameter leaves alias their Parameter storage, so
// backward() accumulates straight into Parameter::grad.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace shem {

struct Parameter {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> value;
  std::vector<double> grad;

  Parameter() = default;
  Parameter(std::string n, std::size_t r, std::size_t c)
      : name(std::move(n)), rows(r), cols(c), value(r * c, 0.0), grad(r * c, 0.0) {}

  std::size_t size() const { return value.size(); }
  void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }
};

namespace ad {

struct Var {
  std::int32_t id = -1;
  bool valid() const { return id >= 0; }
};

enum class KlMode : std::uint8_t {
  kDivergence,    // sum q (log q - log p)
  kCrossEntropy,  // -sum q log p
};

class Tape {
 public:
  Tape();

  // Drops all nodes; keeps arena capacity.
  void clear();
  std::size_t node_count() const { return nodes_.size(); }

  Var constant(std::span<const double> values, std::size_t rows, std::size_t cols);
  Var constant(std::span<const double> values) { return constant(values, values.size(), 1); }
  Var scalar(double v);
  Var zeros(std::size_t n);

  // Whole parameter as a rows x cols node.
  Var param(Parameter& p);
  // Row r of a matrix parameter as a vector node.
  Var row(Parameter& p, std::size_t r);

  Var matvec(Var w, Var x);    // W x
  Var matvec_t(Var w, Var x);  // W^T x
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double c);
  Var sum(std::span<const Var> items);  // elementwise, equal sizes
  Var sum(std::initializer_list<Var> items) { return sum(std::span<const Var>(items.begin(), items.size())); }
  Var mean(std::span<const Var> items);
  Var sigmoid(Var a);
  Var tanh(Var a);
  Var concat(std::span<const Var> items);
  Var concat(std::initializer_list<Var> items) { return concat(std::span<const Var>(items.begin(), items.size())); }
  // Equal-length vectors as the rows of a matrix.
  Var stack(std::span<const Var> rows);
  Var slice(Var a, std::size_t offset, std::size_t length);
  Var softmax(Var a);
  Var log_softmax(Var a);
  Var dot(Var a, Var b);
  Var pick(Var a, std::size_t index);
  Var cosine(Var a, Var b);
  // -log softmax(logits)[target]
  Var cross_entropy(Var logits, std::size_t target);
  // Divergence between softmax(q_logits) and softmax(p_logits).
  Var kl(Var q_logits, Var p_logits, KlMode mode = KlMode::kDivergence);

  std::span<const double> value(Var v) const;
  std::span<double> grad(Var v);
  double scalar_value(Var v) const { return value(v)[0]; }
  std::size_t size(Var v) const { return nodes_[v.id].size(); }
  std::size_t rows(Var v) const { return nodes_[v.id].rows; }
  std::size_t cols(Var v) const { return nodes_[v.id].cols; }
  bool needs_grad(Var v) const { return nodes_[v.id].needs_grad; }

  // Seeds d(out)/d(out) = seed and propagates to every leaf.
  void backward(Var out, double seed = 1.0);

 private:
  enum class Op : std::uint8_t {
    kLeaf,
    kMatVec,
    kMatVecT,
    kAdd,
    kSub,
    kMul,
    kScale,
    kSum,
    kSigmoid,
    kTanh,
    kConcat,
    kSlice,
    kSoftmax,
    kLogSoftmax,
    kDot,
    kPick,
    kCosine,
    kCrossEntropy,
    kKl,
  };

  struct Node {
    Op op = Op::kLeaf;
    bool needs_grad = false;
    bool external = false;
    std::uint8_t mode = 0;
    std::int32_t a = -1;
    std::int32_t b = -1;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t offset = 0;       // arena offset when !external
    double* ext_value = nullptr;  // parameter storage when external
    double* ext_grad = nullptr;
    std::size_t list_offset = 0;  // inputs of variadic ops
    std::size_t list_length = 0;
    std::size_t index = 0;        // slice offset / pick index / target
    double aux = 0.0;             // scale factor / cached scalars

    std::size_t size() const { return rows * cols; }
  };

  Var push(Node node, bool allocate);
  double* val(std::int32_t id);
  double* grd(std::int32_t id);
  const double* val(std::int32_t id) const;
  Var unary(Op op, Var a);
  Var binary(Op op, Var a, Var b, std::size_t rows, std::size_t cols);
  void backward_node(std::size_t id);

  std::vector<Node> nodes_;
  std::vector<double> values_;
  std::vector<double> grads_;
  std::vector<std::int32_t> lists_;
};

}  // namespace ad
}  // namespace shem
