// SPDX-License-Identifier: Apache-2.0
#include "mvse/autodiff.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cmath>

#include "mvse/error.hpp"

namespace mvse::ad {

// ---------------------------------------------------------------------------
// ParameterSet

Parameter& ParameterSet::add(std::string name, Tensor init) {
  if (index_.count(name)) throw InvalidArgument("duplicate parameter name: " + name);
  auto p = std::make_unique<Parameter>();
  p->name = name;
  p->grad = Tensor(init.shape());
  p->value = std::move(init);
  index_.emplace(std::move(name), items_.size());
  items_.push_back(std::move(p));
  return *items_.back();
}

bool ParameterSet::contains(std::string_view name) const { return index_.count(std::string(name)) > 0; }

Parameter& ParameterSet::get(std::string_view name) {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw InvalidArgument("unknown parameter: " + std::string(name));
  return *items_[it->second];
}

const Parameter& ParameterSet::get(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw InvalidArgument("unknown parameter: " + std::string(name));
  return *items_[it->second];
}

std::size_t ParameterSet::scalar_count() const noexcept {
  std::size_t n = 0;
  for (const auto& p : items_) n += p->value.numel();
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& p : items_) p->grad.fill(0.0);
}

ParameterSet ParameterSet::clone() const {
  ParameterSet out;
  for (const auto& p : items_) out.add(p->name, p->value);
  return out;
}

void ParameterSet::assign_values(const ParameterSet& other) {
  if (other.size() != size()) throw InvalidArgument("parameter sets differ in size");
  for (std::size_t i = 0; i < items_.size(); ++i) {
    const auto& src = *other.items_[i];
    auto& dst = *items_[i];
    if (src.name != dst.name || src.value.shape() != dst.value.shape()) {
      throw ShapeError("assign_values(" + dst.name + ")", dst.value.shape(), src.value.shape());
    }
    dst.value = src.value;
  }
}

bool ParameterSet::same_values(const ParameterSet& other) const {
  if (other.size() != size()) return false;
  for (std::size_t i = 0; i < items_.size(); ++i) {
    const auto& a = *items_[i];
    const auto& b = *other.items_[i];
    if (a.name != b.name || a.value.shape() != b.value.shape()) return false;
    if (!std::equal(a.value.data().begin(), a.value.data().end(), b.value.data().begin(),
                    [](double x, double y) { return std::bit_cast<std::uint64_t>(x) == std::bit_cast<std::uint64_t>(y); })) {
      return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// Tape

const Tensor& Var::value() const { return tape_->value(index_); }

Var Tape::constant(Tensor value) {
  Node n;
  n.op = "constant";
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(Parameter& p) {
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return Var(this, it->second);
  Node n;
  n.op = "parameter:" + p.name;
  n.value = p.value;
  n.requires_grad = options_.record_gradients;
  n.param = &p;
  nodes_.push_back(std::move(n));
  param_nodes_.emplace(&p, nodes_.size() - 1);
  return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(const Parameter& p) {
  if (bound_ != nullptr && bound_->contains(p.name)) {
    Parameter& owned = bound_->get(p.name);
    if (&owned == &p) return parameter(owned);
  }
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return Var(this, it->second);
  Node n;
  n.op = "parameter:" + p.name;
  n.value = p.value;
  nodes_.push_back(std::move(n));
  param_nodes_.emplace(&p, nodes_.size() - 1);
  return Var(this, nodes_.size() - 1);
}

Tensor& Tape::grad(std::size_t index) {
  auto& n = nodes_.at(index);
  if (!n.has_grad) {
    n.grad = Tensor(n.value.shape());
    n.has_grad = true;
  }
  return n.grad;
}

Var Tape::record(std::string op, Tensor value, std::span<const Var> parents, BackwardFn backward) {
  if (options_.trap_non_finite && !value.all_finite()) throw NumericError(op);
  Node n;
  n.op = std::move(op);
  n.value = std::move(value);
  if (options_.record_gradients) {
    for (const auto& p : parents) {
      if (&p.tape() != this) throw InvalidArgument(n.op + ": operands live on different tapes");
      n.requires_grad = n.requires_grad || nodes_[p.index()].requires_grad;
    }
    if (n.requires_grad) n.backward = std::move(backward);
  }
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

void Tape::backward(Var loss) {
  if (&loss.tape() != this) throw InvalidArgument("backward: loss lives on a different tape");
  if (!options_.record_gradients) throw InvalidArgument("backward: tape does not record gradients");
  const auto& lv = value(loss.index());
  if (lv.numel() != 1) throw ShapeError("backward (loss must be scalar)", lv.shape(), {1});
  for (auto& n : nodes_) {
    if (n.has_grad) n.grad.fill(0.0);
  }
  grad(loss.index())[0] = 1.0;
  for (std::size_t i = loss.index() + 1; i-- > 0;) {
    auto& n = nodes_[i];
    if (!n.requires_grad || !n.has_grad) continue;
    if (n.backward) n.backward(*this, i);
    if (n.param != nullptr) {
      auto& dst = n.param->grad;
      if (dst.shape() != n.value.shape()) dst = Tensor(n.value.shape());
      for (std::size_t j = 0; j < dst.numel(); ++j) dst[j] += n.grad[j];
    }
  }
}

// ---------------------------------------------------------------------------
// Ops

namespace {

void require_rank(const char* op, const Tensor& t, std::size_t rank) {
  if (t.rank() != rank) {
    Shape want(rank, 0);
    throw ShapeError(std::string(op) + " (rank " + std::to_string(rank) + " required)", t.shape(), want);
  }
}

}  // namespace

Var matmul(Var a, Var b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (A.rank() != 2 || B.rank() != 2 || A.dim(1) != B.dim(0)) throw ShapeError("matmul", A.shape(), B.shape());
  const std::size_t n = A.dim(0), k = A.dim(1), m = B.dim(1);
  Tensor C({n, m});
  for (std::size_t i = 0; i < n; ++i) {
    double* c = &C[i * m];
    for (std::size_t p = 0; p < k; ++p) {
      const double av = A[i * k + p];
      const double* brow = &B[p * m];
      for (std::size_t j = 0; j < m; ++j) c[j] += av * brow[j];
    }
  }
  const Var parents[] = {a, b};
  return a.tape().record("matmul", std::move(C), parents, [ai = a.index(), bi = b.index(), n, k, m](Tape& t, std::size_t self) {
    const Tensor& G = t.grad(self);
    const Tensor& A = t.value(ai);
    const Tensor& B = t.value(bi);
    if (t.requires_grad(ai)) {
      Tensor& dA = t.grad(ai);
      for (std::size_t i = 0; i < n; ++i) {
        const double* g = &G[i * m];
        for (std::size_t p = 0; p < k; ++p) {
          const double* brow = &B[p * m];
          double acc = 0.0;
          for (std::size_t j = 0; j < m; ++j) acc += g[j] * brow[j];
          dA[i * k + p] += acc;
        }
      }
    }
    if (t.requires_grad(bi)) {
      Tensor& dB = t.grad(bi);
      for (std::size_t i = 0; i < n; ++i) {
        const double* g = &G[i * m];
        for (std::size_t p = 0; p < k; ++p) {
          const double av = A[i * k + p];
          double* db = &dB[p * m];
          for (std::size_t j = 0; j < m; ++j) db[j] += av * g[j];
        }
      }
    }
  });
}

Var matmul_nt(Var a, Var b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (A.rank() != 2 || B.rank() != 2 || A.dim(1) != B.dim(1)) throw ShapeError("matmul_nt", A.shape(), B.shape());
  const std::size_t n = A.dim(0), k = A.dim(1), m = B.dim(0);
  Tensor C({n, m});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += A[i * k + p] * B[j * k + p];
      C[i * m + j] = acc;
    }
  }
  const Var parents[] = {a, b};
  return a.tape().record("matmul_nt", std::move(C), parents, [ai = a.index(), bi = b.index(), n, k, m](Tape& t, std::size_t self) {
    const Tensor& G = t.grad(self);
    const Tensor& A = t.value(ai);
    const Tensor& B = t.value(bi);
    if (t.requires_grad(ai)) {
      Tensor& dA = t.grad(ai);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) {
          const double g = G[i * m + j];
          for (std::size_t p = 0; p < k; ++p) dA[i * k + p] += g * B[j * k + p];
        }
    }
    if (t.requires_grad(bi)) {
      Tensor& dB = t.grad(bi);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) {
          const double g = G[i * m + j];
          for (std::size_t p = 0; p < k; ++p) dB[j * k + p] += g * A[i * k + p];
        }
    }
  });
}

Var transpose(Var a) {
  const Tensor& A = a.value();
  require_rank("transpose", A, 2);
  const std::size_t n = A.dim(0), m = A.dim(1);
  Tensor T({m, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) T[j * n + i] = A[i * m + j];
  const Var parents[] = {a};
  return a.tape().record("transpose", std::move(T), parents, [ai = a.index(), n, m](Tape& t, std::size_t self) {
    const Tensor& G = t.grad(self);
    Tensor& dA = t.grad(ai);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) dA[i * m + j] += G[j * n + i];
  });
}

namespace {

template <class Fwd, class Bwd>
Var binary_same_shape(const char* op, Var a, Var b, Fwd fwd, Bwd bwd) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (A.shape() != B.shape()) throw ShapeError(op, A.shape(), B.shape());
  Tensor C(A.shape());
  for (std::size_t i = 0; i < C.numel(); ++i) C[i] = fwd(A[i], B[i]);
  const Var parents[] = {a, b};
  return a.tape().record(op, std::move(C), parents, [ai = a.index(), bi = b.index(), bwd](Tape& t, std::size_t self) {
    const Tensor& G = t.grad(self);
    const Tensor& A = t.value(ai);
    const Tensor& B = t.value(bi);
    const bool ga = t.requires_grad(ai), gb = t.requires_grad(bi);
    Tensor* dA = ga ? &t.grad(ai) : nullptr;
    Tensor* dB = gb ? &t.grad(bi) : nullptr;
    for (std::size_t i = 0; i < G.numel(); ++i) {
      double da = 0.0, db = 0.0;
      bwd(A[i], B[i], G[i], da, db);
      if (dA) (*dA)[i] += da;
      if (dB) (*dB)[i] += db;
    }
  });
}

}  // namespace

Var add(Var a, Var b) {
  return binary_same_shape(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double, double, double g, double& da, double& db) { da = g; db = g; });
}

Var sub(Var a, Var b) {
  return binary_same_shape(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double, double, double g, double& da, double& db) { da = g; db = -g; });
}

Var mul(Var a, Var b) {
  return binary_same_shape(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double x, double y, double g, double& da, double& db) { da = g * y; db = g * x; });
}

Var add_bias(Var x, Var bias) {
  const Tensor& X = x.value();
  const Tensor& Bv = bias.value();
  if (Bv.rank() != 1 || X.rank() == 0 || X.shape().back() != Bv.dim(0)) throw ShapeError("add_bias", X.shape(), Bv.shape());
  const std::size_t m = Bv.dim(0);
  Tensor Y = X;
  for (std::size_t i = 0; i < Y.numel(); ++i) Y[i] += Bv[i % m];
  const Var parents[] = {x, bias};
  return x.tape().record("add_bias", std::move(Y), parents, [xi = x.index(), bi = bias.index(), m](Tape& t, std::size_t self) {
    const Tensor& G = t.grad(self);
    if (t.requires_grad(xi)) {
      Tensor& dX = t.grad(xi);
      for (std::size_t i = 0; i < G.numel(); ++i) dX[i] += G[i];
    }
    if (t.requires_grad(bi)) {
      Tensor& dB = t.grad(bi);
      for (std::size_t i = 0; i < G.numel(); ++i) dB[i % m] += G[i];
    }
  });
}

Var mul_broadcast(Var x, Var w) {
  const Tensor& X = x.value();
  const Tensor& W = w.value();
  if (W.rank() != 1 || X.rank() == 0 || X.shape().back() != W.dim(0)) throw ShapeError("mul_broadcast", X.shape(), W.shape());
  const std::size_t m = W.dim(0);
  Tensor Y = X;
  for (std::size_t i = 0; i < Y.numel(); ++i) Y[i] *= W[i % m];
  const Var parents[] = {x, w};
  return x.tape().record("mul_broadcast", std::move(Y), parents, [xi = x.index(), wi = w.index(), m](Tape& t, std::size_t self) {
    const Tensor& G = t.grad(self);
    const Tensor& X = t.value(xi);
    const Tensor& W = t.value(wi);
    if (t.requires_grad(xi)) {
      Tensor& dX = t.grad(xi);
      for (std::size_t i = 0; i < G.numel(); ++i) dX[i] += G[i] * W[i % m];
    }
    if (t.requires_grad(wi)) {
      Tensor& dW = t.grad(wi);
      for (std::size_t i = 0; i < G.numel(); ++i) dW[i % m] += G[i] * X[i];
    }
  });
}

Var scale(Var a, double s) {
  Tensor Y = a.value();
  for (std::size_t i = 0; i < Y.numel(); ++i) Y[i] *= s;
  const Var parents[] = {a};
  return a.tape().record("scale", std::move(Y), parents, [ai = a.index(), s](Tape& t, std::size_t self) {
    const Tensor& G = t.grad(self);
    Tensor& dA = t.grad(ai);
    for (std::size_t i = 0; i < G.numel(); ++i) dA[i] += G[i] * s;
  });
}

Var concat(std::span<const Var> parts) {
  if (parts.empty()) throw InvalidArgument("concat: no operands");
  const std::size_t n = parts[0].value().rank() == 2 ? parts[0].value().dim(0) : 0;
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    const Tensor& v = p.value();
    if (v.rank() != 2 || v.dim(0) != n) throw ShapeError("concat", parts[0].value().shape(), v.shape());
    widths.push_back(v.dim(1));
    total += v.dim(1);
  }
  Tensor Y({n, total});
  std::size_t offset = 0;
  for (std::size_t q = 0; q < parts.size(); ++q) {
    const Tensor& v = parts[q].value();
    for (std::size_t i = 0; i < n; ++i)
      std::copy_n(&v[i * widths[q]], widths[q], &Y[i * total + offset]);
    offset += widths[q];
  }
  std::vector<std::size_t> idx;
  for (const auto& p : parts) idx.push_back(p.index());
  return parts[0].tape().record("concat", std::move(Y), parts, [idx, widths, n, total](Tape& t, std::size_t self) {
    const Tensor& G = t.grad(self);
    std::size_t offset = 0;
    for (std::size_t q = 0; q < idx.size(); ++q) {
      if (t.requires_grad(idx[q])) {
        Tensor& d = t.grad(idx[q]);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < widths[q]; ++j) d[i * widths[q] + j] += G[i * total + offset + j];
      }
      offset += widths[q];
    }
  });
}

Var reshape(Var a, Shape shape) {
  Tensor Y = a.value().reshaped(std::move(shape));
  const Var parents[] = {a};
  return a.tape().record("reshape", std::move(Y), parents, [ai = a.index()](Tape& t, std::size_t self) {
    const Tensor& G = t.grad(self);
    Tensor& dA = t.grad(ai);
    for (std::size_t i = 0; i < G.numel(); ++i) dA[i] += G[i];
  });
}

Var sin(Var a) {
  Tensor Y = a.value();
  for (std::size_t i = 0; i < Y.numel(); ++i) Y[i] = std::sin(Y[i]);
  const Var parents[] = {a};
  return a.tape().record("sin", std::move(Y), parents, [ai = a.index()](Tape& t, std::size_t self) {
    const Tensor& G = t.grad(self);
    const Tensor& X = t.value(ai);
    Tensor& dA = t.grad(ai);
    for (std::size_t i = 0; i < G.numel(); ++i) dA[i] += G[i] * std::cos(X[i]);
  });
}

Var relu(Var a) {
  Tensor Y = a.value();
  for (std::size_t i = 0; i < Y.numel(); ++i) Y[i] = Y[i] > 0.0 ? Y[i] : 0.0;
  const Var parents[] = {a};
  return a.tape().record("relu", std::move(Y), parents, [ai = a.index()](Tape& t, std::size_t self) {
    const Tensor& G = t.grad(self);
    const Tensor& X = t.value(ai);
    Tensor& dA = t.grad(ai);
    for (std::size_t i = 0; i < G.numel(); ++i)
      if (X[i] > 0.0) dA[i] += G[i];
  });
}

Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  const Var parents[] = {a};
  return a.tape().record("sum", Tensor::scalar(s), parents, [ai = a.index()](Tape& t, std::size_t self) {
    const double g = t.grad(self)[0];
    Tensor& dA = t.grad(ai);
    for (std::size_t i = 0; i < dA.numel(); ++i) dA[i] += g;
  });
}

Var mean(Var a) {
  const std::size_t n = a.value().numel();
  if (n == 0) throw InvalidArgument("mean of empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

Var layer_norm(Var x, Var gamma, Var beta, const SquareMask* mask, double eps) {
  const Tensor& X = x.value();
  const Tensor& Gm = gamma.value();
  const Tensor& Bt = beta.value();
  if (X.rank() < 2) throw ShapeError("layer_norm", X.shape(), Gm.shape());
  const std::size_t C = X.shape().back();
  if (Gm.shape() != Shape{C}) throw ShapeError("layer_norm", X.shape(), Gm.shape());
  if (Bt.shape() != Shape{C}) throw ShapeError("layer_norm", X.shape(), Bt.shape());
  const std::size_t B = X.dim(0);
  const std::size_t positions = X.numel() / (B * C);
  std::vector<bool> valid(positions, true);
  if (mask != nullptr) {
    if (mask->cells.size() != positions) throw ShapeError("layer_norm (mask)", X.shape(), {mask->side, mask->side});
    valid = mask->cells;
  }
  std::size_t nvalid = 0;
  for (bool v : valid) nvalid += v ? 1 : 0;
  if (nvalid == 0) throw InvalidArgument("layer_norm: no valid positions");
  const double count = static_cast<double>(nvalid * C);

  Tensor Y(X.shape());
  std::vector<double> inv_std(B);
  Tensor Xhat(X.shape());
  for (std::size_t b = 0; b < B; ++b) {
    const double* xb = &X[b * positions * C];
    double mu = 0.0;
    for (std::size_t p = 0; p < positions; ++p)
      if (valid[p])
        for (std::size_t c = 0; c < C; ++c) mu += xb[p * C + c];
    mu /= count;
    double var = 0.0;
    for (std::size_t p = 0; p < positions; ++p)
      if (valid[p])
        for (std::size_t c = 0; c < C; ++c) {
          const double d = xb[p * C + c] - mu;
          var += d * d;
        }
    var /= count;
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[b] = is;
    for (std::size_t p = 0; p < positions; ++p) {
      if (!valid[p]) continue;
      for (std::size_t c = 0; c < C; ++c) {
        const std::size_t i = (b * positions + p) * C + c;
        Xhat[i] = (X[i] - mu) * is;
        Y[i] = Gm[c] * Xhat[i] + Bt[c];
      }
    }
  }
  const Var parents[] = {x, gamma, beta};
  return x.tape().record(
      "layer_norm", std::move(Y), parents,
      [xi = x.index(), gi = gamma.index(), bi = beta.index(), valid = std::move(valid), inv_std = std::move(inv_std),
       Xhat = std::move(Xhat), B, positions, C, count](Tape& t, std::size_t self) {
        const Tensor& G = t.grad(self);
        const Tensor& Gm = t.value(gi);
        if (t.requires_grad(gi) || t.requires_grad(bi)) {
          const bool gg = t.requires_grad(gi), gb = t.requires_grad(bi);
          Tensor* dG = gg ? &t.grad(gi) : nullptr;
          Tensor* dB = gb ? &t.grad(bi) : nullptr;
          for (std::size_t b = 0; b < B; ++b)
            for (std::size_t p = 0; p < positions; ++p) {
              if (!valid[p]) continue;
              for (std::size_t c = 0; c < C; ++c) {
                const std::size_t i = (b * positions + p) * C + c;
                if (dG) (*dG)[c] += G[i] * Xhat[i];
                if (dB) (*dB)[c] += G[i];
              }
            }
        }
        if (!t.requires_grad(xi)) return;
        Tensor& dX = t.grad(xi);
        for (std::size_t b = 0; b < B; ++b) {
          double mean_d = 0.0, mean_dx = 0.0;
          for (std::size_t p = 0; p < positions; ++p) {
            if (!valid[p]) continue;
            for (std::size_t c = 0; c < C; ++c) {
              const std::size_t i = (b * positions + p) * C + c;
              const double d = G[i] * Gm[c];
              mean_d += d;
              mean_dx += d * Xhat[i];
            }
          }
          mean_d /= count;
          mean_dx /= count;
          for (std::size_t p = 0; p < positions; ++p) {
            if (!valid[p]) continue;
            for (std::size_t c = 0; c < C; ++c) {
              const std::size_t i = (b * positions + p) * C + c;
              const double d = G[i] * Gm[c];
              dX[i] += inv_std[b] * (d - mean_d - Xhat[i] * mean_dx);
            }
          }
        }
      });
}

Var masked_conv2d(Var x, Var weight, Var bias, const SquareMask& filter_mask, const SquareMask& grid_mask) {
  const Tensor& X = x.value();
  const Tensor& W = weight.value();
  const Tensor& Bv = bias.value();
  if (X.rank() != 4) throw ShapeError("masked_conv2d (input must be [B,H,W,C])", X.shape(), W.shape());
  if (W.rank() != 4 || W.dim(1) != W.dim(2) || W.dim(3) != X.dim(3)) throw ShapeError("masked_conv2d", X.shape(), W.shape());
  if (W.dim(1) != filter_mask.side || W.dim(1) % 2 == 0) throw ShapeError("masked_conv2d (filter mask)", W.shape(), {filter_mask.side, filter_mask.side});
  if (X.dim(1) != X.dim(2) || X.dim(1) != grid_mask.side) throw ShapeError("masked_conv2d (grid mask)", X.shape(), {grid_mask.side, grid_mask.side});
  if (Bv.shape() != Shape{W.dim(0)}) throw ShapeError("masked_conv2d (bias)", W.shape(), Bv.shape());

  const std::size_t B = X.dim(0), S = X.dim(1), Ci = X.dim(3), Co = W.dim(0), K = W.dim(1);
  const int half = static_cast<int>(K / 2);

  // Active taps: (filter offset, input offset) pairs per output cell are
  // recomputed on the fly; the filter mask is folded into a tap list.
  std::vector<std::pair<int, int>> taps;
  for (std::size_t a = 0; a < K; ++a)
    for (std::size_t c = 0; c < K; ++c)
      if (filter_mask.at(a, c)) taps.emplace_back(static_cast<int>(a), static_cast<int>(c));

  Tensor Y({B, S, S, Co});
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t yy = 0; yy < S; ++yy) {
      for (std::size_t xx = 0; xx < S; ++xx) {
        if (!grid_mask.at(yy, xx)) continue;
        double* out = &Y[((b * S + yy) * S + xx) * Co];
        for (std::size_t o = 0; o < Co; ++o) out[o] = Bv[o];
        for (const auto& [a, c] : taps) {
          const int iy = static_cast<int>(yy) + a - half;
          const int ix = static_cast<int>(xx) + c - half;
          if (iy < 0 || ix < 0 || iy >= static_cast<int>(S) || ix >= static_cast<int>(S)) continue;
          if (!grid_mask.at(static_cast<std::size_t>(iy), static_cast<std::size_t>(ix))) continue;
          const double* in = &X[((b * S + static_cast<std::size_t>(iy)) * S + static_cast<std::size_t>(ix)) * Ci];
          for (std::size_t o = 0; o < Co; ++o) {
            const double* w = &W[((o * K + static_cast<std::size_t>(a)) * K + static_cast<std::size_t>(c)) * Ci];
            double acc = 0.0;
            for (std::size_t i = 0; i < Ci; ++i) acc += w[i] * in[i];
            out[o] += acc;
          }
        }
      }
    }
  }

  const Var parents[] = {x, weight, bias};
  return x.tape().record(
      "masked_conv2d", std::move(Y), parents,
      [xi = x.index(), wi = weight.index(), bi = bias.index(), taps = std::move(taps), grid = grid_mask, B, S, Ci, Co, K,
       half](Tape& t, std::size_t self) {
        const Tensor& G = t.grad(self);
        const Tensor& X = t.value(xi);
        const Tensor& W = t.value(wi);
        Tensor* dX = t.requires_grad(xi) ? &t.grad(xi) : nullptr;
        Tensor* dW = t.requires_grad(wi) ? &t.grad(wi) : nullptr;
        Tensor* dB = t.requires_grad(bi) ? &t.grad(bi) : nullptr;
        for (std::size_t b = 0; b < B; ++b) {
          for (std::size_t yy = 0; yy < S; ++yy) {
            for (std::size_t xx = 0; xx < S; ++xx) {
              if (!grid.at(yy, xx)) continue;
              const double* g = &G[((b * S + yy) * S + xx) * Co];
              if (dB)
                for (std::size_t o = 0; o < Co; ++o) (*dB)[o] += g[o];
              for (const auto& [a, c] : taps) {
                const int iy = static_cast<int>(yy) + a - half;
                const int ix = static_cast<int>(xx) + c - half;
                if (iy < 0 || ix < 0 || iy >= static_cast<int>(S) || ix >= static_cast<int>(S)) continue;
                if (!grid.at(static_cast<std::size_t>(iy), static_cast<std::size_t>(ix))) continue;
                const std::size_t in_off = ((b * S + static_cast<std::size_t>(iy)) * S + static_cast<std::size_t>(ix)) * Ci;
                for (std::size_t o = 0; o < Co; ++o) {
                  const double go = g[o];
                  if (go == 0.0) continue;
                  const std::size_t w_off = ((o * K + static_cast<std::size_t>(a)) * K + static_cast<std::size_t>(c)) * Ci;
                  if (dW)
                    for (std::size_t i = 0; i < Ci; ++i) (*dW)[w_off + i] += go * X[in_off + i];
                  if (dX)
                    for (std::size_t i = 0; i < Ci; ++i) (*dX)[in_off + i] += go * W[w_off + i];
                }
              }
            }
          }
        }
      });
}

Var gather_cells(Var x, const SquareMask& mask) {
  const Tensor& X = x.value();
  if (X.rank() != 4 || X.dim(1) != mask.side || X.dim(2) != mask.side) {
    throw ShapeError("gather_cells", X.shape(), {mask.side, mask.side});
  }
  const std::size_t B = X.dim(0), P = mask.side * mask.side, C = X.dim(3);
  std::vector<std::size_t> cells;
  for (std::size_t p = 0; p < P; ++p)
    if (mask.cells[p]) cells.push_back(p);
  const std::size_t width = cells.size() * C;
  Tensor Y({B, width});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t q = 0; q < cells.size(); ++q)
      std::copy_n(&X[(b * P + cells[q]) * C], C, &Y[b * width + q * C]);
  const Var parents[] = {x};
  return x.tape().record("gather_cells", std::move(Y), parents, [xi = x.index(), cells = std::move(cells), B, P, C, width](Tape& t, std::size_t self) {
    const Tensor& G = t.grad(self);
    Tensor& dX = t.grad(xi);
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t q = 0; q < cells.size(); ++q)
        for (std::size_t c = 0; c < C; ++c) dX[(b * P + cells[q]) * C + c] += G[b * width + q * C + c];
  });
}

Var l2_normalize_rows(Var x) {
  const Tensor& X = x.value();
  require_rank("l2_normalize_rows", X, 2);
  const std::size_t n = X.dim(0), m = X.dim(1);
  Tensor Y({n, m});
  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < m; ++j) s += X[i * m + j] * X[i * m + j];
    const double nrm = std::sqrt(s);
    if (!(nrm > 0.0)) throw NumericError("l2_normalize_rows", "row " + std::to_string(i) + " has zero norm");
    norms[i] = nrm;
    for (std::size_t j = 0; j < m; ++j) Y[i * m + j] = X[i * m + j] / nrm;
  }
  const Var parents[] = {x};
  return x.tape().record("l2_normalize_rows", std::move(Y), parents, [xi = x.index(), norms = std::move(norms), n, m](Tape& t, std::size_t self) {
    const Tensor& G = t.grad(self);
    const Tensor& Y = t.value(self);
    Tensor& dX = t.grad(xi);
    for (std::size_t i = 0; i < n; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < m; ++j) dot += Y[i * m + j] * G[i * m + j];
      for (std::size_t j = 0; j < m; ++j) dX[i * m + j] += (G[i * m + j] - Y[i * m + j] * dot) / norms[i];
    }
  });
}

Var logsumexp_rows(Var x) {
  const Tensor& X = x.value();
  require_rank("logsumexp_rows", X, 2);
  const std::size_t n = X.dim(0), m = X.dim(1);
  if (m == 0) throw InvalidArgument("logsumexp_rows: empty rows");
  Tensor Y({n});
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = &X[i * m];
    const double mx = *std::max_element(row, row + m);
    double s = 0.0;
    for (std::size_t j = 0; j < m; ++j) s += std::exp(row[j] - mx);
    Y[i] = mx + std::log(s);
  }
  const Var parents[] = {x};
  return x.tape().record("logsumexp_rows", std::move(Y), parents, [xi = x.index(), n, m](Tape& t, std::size_t self) {
    const Tensor& G = t.grad(self);
    const Tensor& Y = t.value(self);
    const Tensor& X = t.value(xi);
    Tensor& dX = t.grad(xi);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) dX[i * m + j] += G[i] * std::exp(X[i * m + j] - Y[i]);
  });
}

Var diagonal(Var x) {
  const Tensor& X = x.value();
  if (X.rank() != 2 || X.dim(0) != X.dim(1)) throw ShapeError("diagonal (square matrix required)", X.shape(), X.shape());
  const std::size_t n = X.dim(0);
  Tensor Y({n});
  for (std::size_t i = 0; i < n; ++i) Y[i] = X[i * n + i];
  const Var parents[] = {x};
  return x.tape().record("diagonal", std::move(Y), parents, [xi = x.index(), n](Tape& t, std::size_t self) {
    const Tensor& G = t.grad(self);
    Tensor& dX = t.grad(xi);
    for (std::size_t i = 0; i < n; ++i) dX[i * n + i] += G[i];
  });
}

}  // namespace mvse::ad
