#pragma once

// Reverse-mode automatic differentiation over dense double tensors.
//
// A Tape records every forward operation in insertion order, which is also a
// valid topological order. Parameters enter the tape as leaves; backward()
// walks the tape in reverse and accumulates into Parameter::grad.
//
// Losses are named. A parameter may carry barrier tags naming losses whose
// gradient it must ignore; those losses then contribute exactly zero to its
// accumulator while the remaining losses contribute as usual.

#include <cstdint>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "evtrace/tensor.hpp"

namespace evtrace {

/// Loss names understood by the barrier mechanism.
namespace loss_names {
inline constexpr std::string_view kGeneration = "gen";
inline constexpr std::string_view kAttention = "att";
inline constexpr std::string_view kBagOfLabels = "bol";
inline constexpr std::string_view kDomain = "dom";
}  // namespace loss_names

bool is_registered_loss(std::string_view name);

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  bool trainable = true;
  std::set<std::string, std::less<>> barriers;

  Parameter(std::string n, Tensor v)
      : name(std::move(n)), value(std::move(v)), grad(Tensor::zeros_like(value)) {}

  bool barred_for(std::string_view loss) const {
    return barriers.find(loss) != barriers.end();
  }
  void zero_grad() { grad.fill(0.0); }
};

/// Tags `params` so backward passes for `loss_name` leave them untouched.
/// Throws std::invalid_argument for an unregistered loss name.
void with_barrier(std::string_view loss_name, std::span<Parameter* const> params);

/// Owns a model's parameters with stable addresses.
class ParameterStore {
 public:
  Parameter& add(std::string name, Tensor value);
  Parameter* find(std::string_view name);
  const Parameter* find(std::string_view name) const;

  std::size_t size() const { return params_.size(); }
  Parameter& operator[](std::size_t i) { return *params_[i]; }
  const Parameter& operator[](std::size_t i) const { return *params_[i]; }

  void zero_grad();
  std::vector<Tensor> snapshot() const;
  void restore(const std::vector<Tensor>& values);

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
};

enum class OpKind : std::uint8_t {
  kConstant,
  kParam,
  kMatmul,
  kAdd,
  kSub,
  kMul,
  kScale,
  kConcat,
  kSlice,
  kStackRows,
  kSigmoid,
  kTanh,
  kExp,
  kLog,
  kSoftmax,
  kSumAxis,
  kSumAll,
  kEmbedding,
  kKlDiv,
  kGradReverse,
};

std::string_view op_name(OpKind kind);

class Tape;

/// Handle to a node on a tape.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool valid() const { return tape != nullptr && id >= 0; }
};

struct LossTerm {
  std::string name;
  Var node;
  double weight = 1.0;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  /// Leaf for a parameter; repeated calls return the same node.
  Var param(Parameter& p);

  const Tensor& value(Var v) const { return nodes_[check(v)].value; }
  /// Gradient of the most recent backward() seed w.r.t. a node (zeros if the
  /// node did not influence it). Only meaningful after backward().
  Tensor gradient(Var v) const;
  std::size_t size() const { return nodes_.size(); }
  OpKind kind(Var v) const { return nodes_[check(v)].kind; }

  /// Accumulates weighted loss gradients into the parameters that were used
  /// on this tape, honoring barrier tags. Each term must be a scalar node.
  void backward(std::span<const LossTerm> losses);
  /// Single unnamed loss of weight 1; barriers never apply.
  void backward(Var loss);

 private:
  friend Var record(Tape&, OpKind, std::vector<int>, Tensor, Tensor,
                    std::vector<std::size_t>, double);
  struct Node {
    OpKind kind;
    std::vector<int> parents;
    Tensor value;
    Tensor aux;                      // saved tensor (e.g. KL target)
    std::vector<std::size_t> ints;   // saved indices (slice offset, ids)
    double scalar = 0.0;             // saved scalar (scale, lambda)
    Parameter* param = nullptr;
  };

  int check(Var v) const;
  void propagate(std::vector<Tensor>& grads, const std::vector<char>* mask) const;
  void backward_node(int id, std::vector<Tensor>& grads,
                     const std::vector<char>* mask) const;

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, int> param_nodes_;
  std::vector<Tensor> last_grads_;
};

// Forward primitives. Every op records a node on the tape of its operands.

/// Matrix product; rank-1 operands act as row (left) or column (right)
/// vectors and the result drops the unit dimension.
Var matmul(Var a, Var b);
/// Elementwise sum; a rank-1 right operand broadcasts over matrix rows.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
/// Concatenates rank-1 operands.
Var concat(std::span<const Var> parts);
Var concat(Var a, Var b);
Var slice(Var a, std::size_t offset, std::size_t length);
/// Stacks equal-length vectors into a matrix, one per row.
Var stack_rows(std::span<const Var> rows);
Var sigmoid(Var a);
Var tanh(Var a);
Var exp(Var a);
/// Natural log with inputs clamped to >= kProbabilityFloor. Throws
/// DomainError for non-positive inputs.
Var log(Var a);
/// Softmax along the last axis with max subtraction.
Var softmax(Var a);
/// Sum over an axis of a matrix (axis 0 gives column sums, axis 1 row sums).
Var sum_axis(Var a, std::size_t axis);
Var sum_all(Var a);
/// Rows of `table` selected by `ids`, as a matrix ids.size() x cols.
Var embedding_lookup(Var table, std::span<const std::size_t> ids);
/// sum_x target(x) * ln(target(x) / approx(x)) with 0 ln 0 = 0 and approx
/// clamped to >= kProbabilityFloor.
Var kl_div(const Tensor& target, Var approx);
/// Identity forward; backward multiplies the incoming gradient by -lambda.
Var gradient_reversal(Var a, double lambda);

inline constexpr double kProbabilityFloor = 1e-12;

/// Plain value-level KL divergence matching kl_div().
double kl_divergence(std::span<const double> target, std::span<const double> approx);

}  // namespace evtrace
