// SPDX-License-Identifier: Apache-2.0
//
// Tape-based reverse-mode automatic differentiation over Tensor values.
//
// Every op appends one node to the tape of its operands. Nodes are stored in
// creation order, which is a topological order, so backward() is a single
// reverse sweep that visits each node once.
#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mvse/geogrid.hpp"
#include "mvse/tensor.hpp"

namespace mvse::ad {

/// Named trainable tensor and its accumulated gradient.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
};

/// Insertion-ordered collection of parameters with stable addresses.
class ParameterSet {
 public:
  Parameter& add(std::string name, Tensor init);

  bool contains(std::string_view name) const;
  Parameter& get(std::string_view name);
  const Parameter& get(std::string_view name) const;

  std::size_t size() const noexcept { return items_.size(); }
  /// Total number of scalar parameters.
  std::size_t scalar_count() const noexcept;

  void zero_grad();

  auto begin() noexcept { return items_.begin(); }
  auto end() noexcept { return items_.end(); }
  auto begin() const noexcept { return items_.cbegin(); }
  auto end() const noexcept { return items_.cend(); }

  /// Deep copy (values only; gradients reset to zero).
  ParameterSet clone() const;

  /// Copies values from `other`, which must hold the same names and shapes.
  void assign_values(const ParameterSet& other);

  /// Bitwise equality of names, shapes and values.
  bool same_values(const ParameterSet& other) const;

 private:
  std::vector<std::unique_ptr<Parameter>> items_;
  std::unordered_map<std::string, std::size_t> index_;
};

class Tape;

/// Handle to a node on a tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t index) : tape_(tape), index_(index) {}

  Tape& tape() const { return *tape_; }
  std::size_t index() const noexcept { return index_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }

 private:
  Tape* tape_ = nullptr;
  std::size_t index_ = 0;
};

struct TapeOptions {
  /// Record backward closures. Off for pure inference.
  bool record_gradients = true;
  /// Raise NumericError as soon as an op produces NaN or infinity.
  bool trap_non_finite = true;
};

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  explicit Tape(TapeOptions options = {}) : options_(options) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  const TapeOptions& options() const noexcept { return options_; }

  /// Leaf that never receives a gradient.
  Var constant(Tensor value);
  /// Leaf bound to a parameter; backward() accumulates into parameter.grad.
  /// Repeated calls for the same parameter return the same node.
  Var parameter(Parameter& p);
  /// Leaf for a read-only parameter. It receives gradients only when `p`
  /// belongs to the set passed to bind().
  Var parameter(const Parameter& p);

  /// Parameters of `params` requested through parameter(const&) become
  /// trainable leaves of this tape.
  void bind(ParameterSet& params) noexcept { bound_ = &params; }

  /// Accumulates d(loss)/d(parameter) into the grad of every parameter bound
  /// to this tape. The loss must hold exactly one element.
  void backward(Var loss);

  std::size_t size() const noexcept { return nodes_.size(); }
  const Tensor& value(std::size_t index) const { return nodes_.at(index).value; }
  bool requires_grad(std::size_t index) const { return nodes_.at(index).requires_grad; }
  const std::string& op_name(std::size_t index) const { return nodes_.at(index).op; }

  /// Gradient buffer of a node, allocated as zeros on first access.
  Tensor& grad(std::size_t index);

  /// Appends an op node. Used by op implementations.
  Var record(std::string op, Tensor value, std::span<const Var> parents, BackwardFn backward);

 private:
  struct Node {
    std::string op;
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool has_grad = false;
    BackwardFn backward;
    Parameter* param = nullptr;
  };

  TapeOptions options_;
  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, std::size_t> param_nodes_;
  ParameterSet* bound_ = nullptr;
};

// ---------------------------------------------------------------------------
// Differentiable ops. Operands must live on the same tape.

/// [n,k] x [k,m] -> [n,m]
Var matmul(Var a, Var b);
/// [n,k] x [m,k]^T -> [n,m]
Var matmul_nt(Var a, Var b);
/// [n,m] -> [m,n]
Var transpose(Var a);

Var add(Var a, Var b);
Var sub(Var a, Var b);
/// Elementwise product of equal shapes.
Var mul(Var a, Var b);
/// x[..., m] + b[m]
Var add_bias(Var x, Var bias);
/// x[..., m] * w[m]
Var mul_broadcast(Var x, Var w);
Var scale(Var a, double s);

/// Concatenates 2-D operands along the last axis.
Var concat(std::span<const Var> parts);
Var reshape(Var a, Shape shape);

Var sin(Var a);
Var relu(Var a);
/// Sum of all elements -> [1]
Var sum(Var a);
/// Mean of all elements -> [1]
Var mean(Var a);

/// Layer normalisation of each leading-axis item over all its (valid)
/// positions and channels, with per-channel affine gamma/beta over the last
/// axis. For x[B,H,W,C] a spatial mask of H*W cells may be given; masked
/// positions are excluded from the statistics and produce zero.
Var layer_norm(Var x, Var gamma, Var beta, const SquareMask* mask = nullptr, double eps = 1e-5);

/// Cross-correlation of x[B,H,W,Ci] with weight[Co,K,K,Ci] and bias[Co].
/// Filter taps outside `filter_mask` are treated as zero; input cells
/// outside `grid_mask` are read as zero and output cells outside it are zero.
/// Zero padding beyond the borders.
Var masked_conv2d(Var x, Var weight, Var bias, const SquareMask& filter_mask,
                  const SquareMask& grid_mask);

/// Flattens x[B,H,W,C] over the valid cells of `mask` -> [B, valid*C].
Var gather_cells(Var x, const SquareMask& mask);

/// Row-wise x / ||x||. A zero row raises NumericError.
Var l2_normalize_rows(Var x);
/// Row-wise log(sum(exp(x))) -> [n]
Var logsumexp_rows(Var x);
/// Diagonal of a square matrix -> [n]
Var diagonal(Var x);

}  // namespace mvse::ad
