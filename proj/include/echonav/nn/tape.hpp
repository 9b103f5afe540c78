#ifndef ECHONAV_NN_TAPE_HPP_
#define ECHONAV_NN_TAPE_HPP_

// Recorded-tape reverse-mode autodiff. Every op appends a node holding its
// value and a backward closure; Tape::backward walks the nodes in exact
// reverse order and accumulates gradients additively.

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <unordered_map>
#include <vector>

#include "echonav/nn/blas.hpp"
#include "echonav/nn/tensor.hpp"

namespace echonav::nn {

template <class T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
  Tensor<T> m;  // Adam first moment
  Tensor<T> v;  // Adam second moment
  bool trainable = true;

  void zero_grad() { std::fill(grad.data.begin(), grad.data.end(), T(0)); }
};

/// Owns parameters; references handed out stay valid for the set's lifetime.
template <class T>
class ParameterSet {
 public:
  ParameterSet() = default;
  ParameterSet(const ParameterSet&) = delete;
  ParameterSet& operator=(const ParameterSet&) = delete;

  Parameter<T>& add(const std::string& name, Tensor<T> init, bool trainable = true) {
    if (find(name)) throw std::invalid_argument("duplicate parameter name " + name);
    auto p = std::make_unique<Parameter<T>>();
    p->name = name;
    p->grad = Tensor<T>(init.shape);
    p->m = Tensor<T>(init.shape);
    p->v = Tensor<T>(init.shape);
    p->value = std::move(init);
    p->trainable = trainable;
    params_.push_back(std::move(p));
    return *params_.back();
  }

  Parameter<T>* find(const std::string& name) const {
    for (const auto& p : params_) {
      if (p->name == name) return p.get();
    }
    return nullptr;
  }

  std::size_t size() const { return params_.size(); }
  Parameter<T>& operator[](std::size_t i) { return *params_[i]; }
  const Parameter<T>& operator[](std::size_t i) const { return *params_[i]; }

  std::size_t scalar_count(bool trainable_only = true) const {
    std::size_t n = 0;
    for (const auto& p : params_) {
      if (p->trainable || !trainable_only) n += p->value.size();
    }
    return n;
  }

  void zero_grad() {
    for (auto& p : params_) p->zero_grad();
  }

 private:
  std::vector<std::unique_ptr<Parameter<T>>> params_;
};

template <class T>
class Tape;

template <class T>
struct Var {
  Tape<T>* tape = nullptr;
  int id = -1;

  const Tensor<T>& value() const { return tape->value(id); }
  const Shape& shape() const { return value().shape; }
  int dim(int i) const { return value().dim(i); }
};

template <class T>
class Tape {
 public:
  using Backward = std::function<void(Tape&, int)>;

  explicit Tape(bool training = true) : training_(training) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool training() const { return training_; }
  std::size_t size() const { return nodes_.size(); }

  Var<T> constant(Tensor<T> t) { return push(std::move(t), nullptr, false, {}); }

  /// Leaf that receives a gradient (used by gradient checks).
  Var<T> input(Tensor<T> t) { return push(std::move(t), nullptr, true, {}); }

  Var<T> param(Parameter<T>& p) {
    auto it = param_nodes_.find(&p);
    if (it != param_nodes_.end()) return {this, it->second};
    Var<T> v = push(Tensor<T>{}, &p, p.trainable, {});
    param_nodes_.emplace(&p, v.id);
    return v;
  }

  const Tensor<T>& value(int id) const {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    return n.param ? n.param->value : n.value;
  }

  bool needs_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].needs_grad; }

  /// Gradient slot of a node, zero-allocated on first use.
  Tensor<T>& grad(int id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.empty()) n.grad = Tensor<T>(value(id).shape);
    return n.grad;
  }

  bool has_grad(int id) const { return !nodes_[static_cast<std::size_t>(id)].grad.empty(); }

  Var<T> record(Tensor<T> value, std::initializer_list<int> inputs, Backward backward) {
    bool needs = false;
    for (int i : inputs) needs = needs || needs_grad(i);
    return push(std::move(value), nullptr, needs, needs ? std::move(backward) : Backward{});
  }

  Var<T> record(Tensor<T> value, const std::vector<int>& inputs, Backward backward) {
    bool needs = false;
    for (int i : inputs) needs = needs || needs_grad(i);
    return push(std::move(value), nullptr, needs, needs ? std::move(backward) : Backward{});
  }

  /// Reverse sweep from a scalar. Parameter gradients are added into
  /// Parameter::grad; values are never modified.
  void backward(Var<T> loss) {
    if (value(loss.id).size() != 1) throw std::invalid_argument("backward needs a scalar");
    grad(loss.id)[0] += T(1);
    for (int i = loss.id; i >= 0; --i) {
      Node& n = nodes_[static_cast<std::size_t>(i)];
      if (!n.needs_grad || n.grad.empty()) continue;
      if (n.backward) n.backward(*this, i);
      if (n.param) {
        auto& g = n.param->grad.data;
        for (std::size_t k = 0; k < g.size(); ++k) g[k] += n.grad.data[k];
      }
    }
  }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    Parameter<T>* param = nullptr;
    bool needs_grad = false;
    Backward backward;
  };

  Var<T> push(Tensor<T> value, Parameter<T>* param, bool needs, Backward backward) {
    nodes_.push_back({std::move(value), Tensor<T>{}, param, needs, std::move(backward)});
    return {this, static_cast<int>(nodes_.size() - 1)};
  }

  bool training_;
  std::vector<Node> nodes_;
  std::unordered_map<const Parameter<T>*, int> param_nodes_;
};

namespace detail {

inline void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

template <class T>
void require_same_shape(const Var<T>& a, const Var<T>& b, const char* op) {
  require(a.shape() == b.shape(), std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                                      " vs " + shape_str(b.shape()));
}

template <class T, class F, class G>
Var<T> unary(Var<T> a, F f, G df) {
  const Tensor<T>& x = a.value();
  Tensor<T> y(x.shape);
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  const int ia = a.id;
  return a.tape->record(std::move(y), {ia}, [ia, df](Tape<T>& t, int self) {
    const Tensor<T>& x = t.value(ia);
    const Tensor<T>& y = t.value(self);
    const Tensor<T>& g = t.grad(self);
    Tensor<T>& gx = t.grad(ia);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * df(x[i], y[i]);
  });
}

}  // namespace detail

// ---- elementwise -----------------------------------------------------------

template <class T>
Var<T> add(Var<T> a, Var<T> b) {
  detail::require_same_shape(a, b, "add");
  Tensor<T> y = a.value();
  const Tensor<T>& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += bv[i];
  const int ia = a.id, ib = b.id;
  return a.tape->record(std::move(y), {ia, ib}, [ia, ib](Tape<T>& t, int self) {
    const Tensor<T>& g = t.grad(self);
    for (int id : {ia, ib}) {
      if (!t.needs_grad(id)) continue;
      Tensor<T>& gi = t.grad(id);
      for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i];
    }
  });
}

template <class T>
Var<T> sub(Var<T> a, Var<T> b) {
  detail::require_same_shape(a, b, "sub");
  Tensor<T> y = a.value();
  const Tensor<T>& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] -= bv[i];
  const int ia = a.id, ib = b.id;
  return a.tape->record(std::move(y), {ia, ib}, [ia, ib](Tape<T>& t, int self) {
    const Tensor<T>& g = t.grad(self);
    if (t.needs_grad(ia)) {
      Tensor<T>& ga = t.grad(ia);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (t.needs_grad(ib)) {
      Tensor<T>& gb = t.grad(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

template <class T>
Var<T> mul(Var<T> a, Var<T> b) {
  detail::require_same_shape(a, b, "mul");
  Tensor<T> y = a.value();
  const Tensor<T>& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= bv[i];
  const int ia = a.id, ib = b.id;
  return a.tape->record(std::move(y), {ia, ib}, [ia, ib](Tape<T>& t, int self) {
    const Tensor<T>& g = t.grad(self);
    const Tensor<T>& av = t.value(ia);
    const Tensor<T>& bv = t.value(ib);
    if (t.needs_grad(ia)) {
      Tensor<T>& ga = t.grad(ia);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (t.needs_grad(ib)) {
      Tensor<T>& gb = t.grad(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

template <class T>
Var<T> scale(Var<T> a, T c) {
  return detail::unary(a, [c](T x) { return c * x; }, [c](T, T) { return c; });
}

template <class T>
Var<T> add_scalar(Var<T> a, T c) {
  return detail::unary(a, [c](T x) { return x + c; }, [](T, T) { return T(1); });
}

template <class T>
Var<T> relu(Var<T> a) {
  return detail::unary(a, [](T x) { return x > T(0) ? x : T(0); },
                       [](T x, T) { return x > T(0) ? T(1) : T(0); });
}

template <class T>
Var<T> sigmoid(Var<T> a) {
  return detail::unary(
      a,
      [](T x) {
        if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
        const T e = std::exp(x);
        return e / (T(1) + e);
      },
      [](T, T y) { return y * (T(1) - y); });
}

template <class T>
Var<T> tanh(Var<T> a) {
  return detail::unary(a, [](T x) { return std::tanh(x); }, [](T, T y) { return T(1) - y * y; });
}

template <class T>
Var<T> exp(Var<T> a) {
  return detail::unary(a, [](T x) { return std::exp(x); }, [](T, T y) { return y; });
}

template <class T>
Var<T> square(Var<T> a) {
  return detail::unary(a, [](T x) { return x * x; }, [](T x, T) { return T(2) * x; });
}

template <class T>
Var<T> clamp(Var<T> a, T lo, T hi) {
  return detail::unary(a, [lo, hi](T x) { return std::clamp(x, lo, hi); },
                       [lo, hi](T x, T) { return (x > lo && x < hi) ? T(1) : T(0); });
}

/// Elementwise minimum; the gradient goes to the smaller input (to `a` on ties).
template <class T>
Var<T> minimum(Var<T> a, Var<T> b) {
  detail::require_same_shape(a, b, "minimum");
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  Tensor<T> y(av.shape);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::min(av[i], bv[i]);
  const int ia = a.id, ib = b.id;
  return a.tape->record(std::move(y), {ia, ib}, [ia, ib](Tape<T>& t, int self) {
    const Tensor<T>& g = t.grad(self);
    const Tensor<T>& av = t.value(ia);
    const Tensor<T>& bv = t.value(ib);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const int to = av[i] <= bv[i] ? ia : ib;
      if (t.needs_grad(to)) t.grad(to)[i] += g[i];
    }
  });
}

// ---- reductions ------------------------------------------------------------

template <class T>
Var<T> sum(Var<T> a) {
  T s = T(0);
  for (T v : a.value().data) s += v;
  const int ia = a.id;
  return a.tape->record(Tensor<T>({1}, s), {ia}, [ia](Tape<T>& t, int self) {
    const T g = t.grad(self)[0];
    for (auto& v : t.grad(ia).data) v += g;
  });
}

template <class T>
Var<T> mean(Var<T> a) {
  return scale(sum(a), T(1) / static_cast<T>(a.value().size()));
}

/// [B, K] -> [B].
template <class T>
Var<T> sum_rows(Var<T> a) {
  const Tensor<T>& x = a.value();
  detail::require(x.rank() == 2, "sum_rows expects [B, K]");
  const int b = x.dim(0), k = x.dim(1);
  Tensor<T> y({b});
  for (int i = 0; i < b; ++i) {
    for (int j = 0; j < k; ++j) y[i] += x[static_cast<std::size_t>(i) * k + j];
  }
  const int ia = a.id;
  return a.tape->record(std::move(y), {ia}, [ia, b, k](Tape<T>& t, int self) {
    const Tensor<T>& g = t.grad(self);
    Tensor<T>& gx = t.grad(ia);
    for (int i = 0; i < b; ++i) {
      for (int j = 0; j < k; ++j) gx[static_cast<std::size_t>(i) * k + j] += g[i];
    }
  });
}

// ---- shape ops -------------------------------------------------------------

template <class T>
Var<T> reshape(Var<T> a, Shape shape) {
  detail::require(shape_size(shape) == a.value().size(), "reshape: element count changes");
  Tensor<T> y(std::move(shape), a.value().data);
  const int ia = a.id;
  return a.tape->record(std::move(y), {ia}, [ia](Tape<T>& t, int self) {
    const Tensor<T>& g = t.grad(self);
    Tensor<T>& gx = t.grad(ia);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
}

/// [N, ...] -> [N, prod(...)].
template <class T>
Var<T> flatten(Var<T> a) {
  const Tensor<T>& x = a.value();
  return reshape(a, {x.dim(0), static_cast<int>(x.inner())});
}

/// Concatenates along dimension 1; all other dimensions must agree.
template <class T>
Var<T> concat(const std::vector<Var<T>>& parts) {
  detail::require(!parts.empty(), "concat: no inputs");
  const Shape& s0 = parts[0].shape();
  detail::require(s0.size() >= 2, "concat: rank must be at least 2");
  Shape out_shape = s0;
  out_shape[1] = 0;
  std::vector<int> ids;
  std::vector<std::size_t> chunk;  // per-part elements per sample
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == s0.size() && s[0] == s0[0];
    for (std::size_t d = 2; ok && d < s.size(); ++d) ok = s[d] == s0[d];
    detail::require(ok, "concat: shape mismatch " + shape_str(s) + " vs " + shape_str(s0));
    out_shape[1] += s[1];
    ids.push_back(p.id);
    chunk.push_back(p.value().inner());
  }
  const int n = s0[0];
  std::size_t row = 0;
  for (auto c : chunk) row += c;
  Tensor<T> y(out_shape);
  std::size_t off = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const Tensor<T>& x = parts[p].value();
    for (int i = 0; i < n; ++i) {
      std::copy_n(x.ptr() + i * chunk[p], chunk[p], y.ptr() + i * row + off);
    }
    off += chunk[p];
  }
  return parts[0].tape->record(std::move(y), ids, [ids, chunk, row, n](Tape<T>& t, int self) {
    const Tensor<T>& g = t.grad(self);
    std::size_t off = 0;
    for (std::size_t p = 0; p < ids.size(); ++p) {
      if (t.needs_grad(ids[p])) {
        Tensor<T>& gx = t.grad(ids[p]);
        for (int i = 0; i < n; ++i) {
          for (std::size_t k = 0; k < chunk[p]; ++k) gx[i * chunk[p] + k] += g[i * row + off + k];
        }
      }
      off += chunk[p];
    }
  });
}

/// Channels [begin, end) of dimension 1.
template <class T>
Var<T> slice(Var<T> a, int begin, int end) {
  const Tensor<T>& x = a.value();
  detail::require(x.rank() >= 2 && begin >= 0 && begin < end && end <= x.dim(1), "slice: bad range");
  Shape out_shape = x.shape;
  out_shape[1] = end - begin;
  const std::size_t per_channel = x.inner() / static_cast<std::size_t>(x.dim(1));
  const std::size_t row = x.inner();
  const std::size_t off = static_cast<std::size_t>(begin) * per_channel;
  const std::size_t len = static_cast<std::size_t>(end - begin) * per_channel;
  const int n = x.dim(0);
  Tensor<T> y(out_shape);
  for (int i = 0; i < n; ++i) std::copy_n(x.ptr() + i * row + off, len, y.ptr() + i * len);
  const int ia = a.id;
  return a.tape->record(std::move(y), {ia}, [ia, n, row, off, len](Tape<T>& t, int self) {
    const Tensor<T>& g = t.grad(self);
    Tensor<T>& gx = t.grad(ia);
    for (int i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < len; ++k) gx[i * row + off + k] += g[i * len + k];
    }
  });
}

/// Samples [begin, end) of dimension 0.
template <class T>
Var<T> slice_rows(Var<T> a, int begin, int end) {
  const Tensor<T>& x = a.value();
  detail::require(x.rank() >= 1 && begin >= 0 && begin < end && end <= x.dim(0), "slice_rows: bad range");
  Shape out_shape = x.shape;
  out_shape[0] = end - begin;
  const std::size_t row = x.inner();
  const std::size_t off = static_cast<std::size_t>(begin) * row;
  Tensor<T> y(out_shape);
  std::copy_n(x.ptr() + off, y.size(), y.ptr());
  const int ia = a.id;
  return a.tape->record(std::move(y), {ia}, [ia, off](Tape<T>& t, int self) {
    const Tensor<T>& g = t.grad(self);
    Tensor<T>& gx = t.grad(ia);
    for (std::size_t k = 0; k < g.size(); ++k) gx[off + k] += g[k];
  });
}

/// Concatenates along dimension 0.
template <class T>
Var<T> stack_rows(const std::vector<Var<T>>& parts) {
  detail::require(!parts.empty(), "stack_rows: no inputs");
  Shape out_shape = parts[0].shape();
  out_shape[0] = 0;
  std::vector<int> ids;
  for (const auto& p : parts) {
    Shape s = p.shape();
    detail::require(s.size() == out_shape.size(), "stack_rows: rank mismatch");
    out_shape[0] += s[0];
    s[0] = 0;
    Shape expect = out_shape;
    expect[0] = 0;
    detail::require(s == expect, "stack_rows: shape mismatch");
    ids.push_back(p.id);
  }
  Tensor<T> y(out_shape);
  std::size_t off = 0;
  for (const auto& p : parts) {
    std::copy(p.value().data.begin(), p.value().data.end(), y.data.begin() + static_cast<std::ptrdiff_t>(off));
    off += p.value().size();
  }
  return parts[0].tape->record(std::move(y), ids, [ids](Tape<T>& t, int self) {
    const Tensor<T>& g = t.grad(self);
    std::size_t off = 0;
    for (int id : ids) {
      const std::size_t n = t.value(id).size();
      if (t.needs_grad(id)) {
        Tensor<T>& gx = t.grad(id);
        for (std::size_t k = 0; k < n; ++k) gx[k] += g[off + k];
      }
      off += n;
    }
  });
}

/// [B, C] -> [B, C, H, W], copying each feature vector to every location.
template <class T>
Var<T> tile_spatial(Var<T> a, int h, int w) {
  const Tensor<T>& x = a.value();
  detail::require(x.rank() == 2, "tile_spatial expects [B, C]");
  detail::require(h > 0 && w > 0, "tile_spatial: size must be positive");
  const int b = x.dim(0), c = x.dim(1);
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  Tensor<T> y({b, c, h, w});
  for (std::size_t i = 0; i < x.size(); ++i) std::fill_n(y.ptr() + i * hw, hw, x[i]);
  const int ia = a.id;
  return a.tape->record(std::move(y), {ia}, [ia, hw](Tape<T>& t, int self) {
    const Tensor<T>& g = t.grad(self);
    Tensor<T>& gx = t.grad(ia);
    for (std::size_t i = 0; i < gx.size(); ++i) {
      T s = T(0);
      for (std::size_t k = 0; k < hw; ++k) s += g[i * hw + k];
      gx[i] += s;
    }
  });
}

// ---- dense and convolutional layers ---------------------------------------

/// x [B, I], weight [O, I], bias [O] -> [B, O].
template <class T>
Var<T> linear(Var<T> x, Var<T> weight, std::type_identity_t<std::optional<Var<T>>> bias) {
  const Tensor<T>& xv = x.value();
  const Tensor<T>& wv = weight.value();
  detail::require(xv.rank() == 2 && wv.rank() == 2 && xv.dim(1) == wv.dim(1),
                  "linear: shape mismatch " + shape_str(xv.shape) + " x " + shape_str(wv.shape));
  const int b = xv.dim(0), in = xv.dim(1), out = wv.dim(0);
  Tensor<T> y({b, out});
  blas::gemm<T>(false, true, b, out, in, T(1), xv.ptr(), in, wv.ptr(), in, T(0), y.ptr(), out);
  int ib = -1;
  if (bias) {
    const Tensor<T>& bv = bias->value();
    detail::require(bv.size() == static_cast<std::size_t>(out), "linear: bias size mismatch");
    for (int i = 0; i < b; ++i) {
      for (int o = 0; o < out; ++o) y[static_cast<std::size_t>(i) * out + o] += bv[o];
    }
    ib = bias->id;
  }
  const int ix = x.id, iw = weight.id;
  std::vector<int> ins = {ix, iw};
  if (ib >= 0) ins.push_back(ib);
  return x.tape->record(std::move(y), ins, [ix, iw, ib, b, in, out](Tape<T>& t, int self) {
    const Tensor<T>& g = t.grad(self);
    if (t.needs_grad(ix)) {
      blas::gemm<T>(false, false, b, in, out, T(1), g.ptr(), out, t.value(iw).ptr(), in, T(1),
                    t.grad(ix).ptr(), in);
    }
    if (t.needs_grad(iw)) {
      blas::gemm<T>(true, false, out, in, b, T(1), g.ptr(), out, t.value(ix).ptr(), in, T(1),
                    t.grad(iw).ptr(), in);
    }
    if (ib >= 0 && t.needs_grad(ib)) {
      Tensor<T>& gb = t.grad(ib);
      for (int i = 0; i < b; ++i) {
        for (int o = 0; o < out; ++o) gb[o] += g[static_cast<std::size_t>(i) * out + o];
      }
    }
  });
}

/// floor((size + 2p - k) / s) + 1; throws when no full window fits.
inline int conv_out_size(int size, int kernel, int stride, int padding) {
  detail::require(kernel > 0 && stride > 0 && padding >= 0, "conv: invalid hyperparameters");
  const int span = size + 2 * padding - kernel;
  detail::require(span >= 0, "conv: kernel larger than padded input");
  return span / stride + 1;
}

/// (size - 1) s - 2p + k; throws on nonpositive output.
inline int conv_transpose_out_size(int size, int kernel, int stride, int padding) {
  detail::require(kernel > 0 && stride > 0 && padding >= 0, "conv_transpose: invalid hyperparameters");
  const int out = (size - 1) * stride - 2 * padding + kernel;
  detail::require(out > 0, "conv_transpose: nonpositive output size");
  return out;
}

namespace detail {

/// [N, C, S] -> [C, N*S].
template <class T>
void to_channel_major(const T* src, int n, int c, std::size_t s, T* dst) {
  for (int i = 0; i < n; ++i) {
    for (int ch = 0; ch < c; ++ch) {
      std::copy_n(src + (static_cast<std::size_t>(i) * c + ch) * s, s,
                  dst + static_cast<std::size_t>(ch) * n * s + static_cast<std::size_t>(i) * s);
    }
  }
}

/// [C, N*S] -> [N, C, S], accumulating when `add`.
template <class T>
void from_channel_major(const T* src, int n, int c, std::size_t s, T* dst, bool add) {
  for (int i = 0; i < n; ++i) {
    for (int ch = 0; ch < c; ++ch) {
      const T* from = src + static_cast<std::size_t>(ch) * n * s + static_cast<std::size_t>(i) * s;
      T* to = dst + (static_cast<std::size_t>(i) * c + ch) * s;
      if (add) {
        for (std::size_t k = 0; k < s; ++k) to[k] += from[k];
      } else {
        std::copy_n(from, s, to);
      }
    }
  }
}

template <class T>
void add_channel_bias(Tensor<T>& y, const Tensor<T>& bias) {
  const int n = y.dim(0), c = y.dim(1);
  const std::size_t s = y.inner() / static_cast<std::size_t>(c);
  for (int i = 0; i < n; ++i) {
    for (int ch = 0; ch < c; ++ch) {
      T* p = y.ptr() + (static_cast<std::size_t>(i) * c + ch) * s;
      for (std::size_t k = 0; k < s; ++k) p[k] += bias[ch];
    }
  }
}

template <class T>
void channel_bias_grad(const Tensor<T>& g, Tensor<T>& gb) {
  const int n = g.dim(0), c = g.dim(1);
  const std::size_t s = g.inner() / static_cast<std::size_t>(c);
  for (int i = 0; i < n; ++i) {
    for (int ch = 0; ch < c; ++ch) {
      const T* p = g.ptr() + (static_cast<std::size_t>(i) * c + ch) * s;
      T acc = T(0);
      for (std::size_t k = 0; k < s; ++k) acc += p[k];
      gb[ch] += acc;
    }
  }
}

}  // namespace detail

/// Cross-correlation. x [N, C, H, W], weight [O, C, k, k], bias [O].
template <class T>
Var<T> conv2d(Var<T> x, Var<T> weight, std::type_identity_t<std::optional<Var<T>>> bias, int stride, int padding) {
  const Tensor<T>& xv = x.value();
  const Tensor<T>& wv = weight.value();
  detail::require(xv.rank() == 4 && wv.rank() == 4, "conv2d expects NCHW input and OCkk weight");
  detail::require(xv.dim(1) == wv.dim(1), "conv2d: channel mismatch " + shape_str(xv.shape) + " vs " +
                                              shape_str(wv.shape));
  detail::require(wv.dim(2) == wv.dim(3), "conv2d: square kernels only");
  const int n = xv.dim(0), c = xv.dim(1), o = wv.dim(0), k = wv.dim(2);
  const blas::ConvGeometry g{c,      xv.dim(2), xv.dim(3), k, stride, padding,
                             conv_out_size(xv.dim(2), k, stride, padding),
                             conv_out_size(xv.dim(3), k, stride, padding)};
  const std::size_t pos = static_cast<std::size_t>(g.positions());
  const std::size_t ld = static_cast<std::size_t>(n) * pos;
  const std::size_t img = static_cast<std::size_t>(c) * g.height * g.width;
  std::vector<T> cols(static_cast<std::size_t>(g.patch()) * ld);
  for (int i = 0; i < n; ++i) blas::im2col(xv.ptr() + i * img, g, cols.data(), ld, i * pos);
  std::vector<T> out(static_cast<std::size_t>(o) * ld);
  blas::gemm<T>(false, false, o, static_cast<int>(ld), g.patch(), T(1), wv.ptr(), g.patch(), cols.data(),
                static_cast<int>(ld), T(0), out.data(), static_cast<int>(ld));
  Tensor<T> y({n, o, g.out_h, g.out_w});
  detail::from_channel_major(out.data(), n, o, pos, y.ptr(), false);
  int ib = -1;
  if (bias) {
    detail::require(bias->value().size() == static_cast<std::size_t>(o), "conv2d: bias size mismatch");
    detail::add_channel_bias(y, bias->value());
    ib = bias->id;
  }
  const int ix = x.id, iw = weight.id;
  std::vector<int> ins = {ix, iw};
  if (ib >= 0) ins.push_back(ib);
  return x.tape->record(
      std::move(y), ins,
      [ix, iw, ib, g, n, o, pos, ld, img, cols = std::move(cols)](Tape<T>& t, int self) {
        const Tensor<T>& gy = t.grad(self);
        std::vector<T> gmat(static_cast<std::size_t>(o) * ld);
        detail::to_channel_major(gy.ptr(), n, o, pos, gmat.data());
        const int ldi = static_cast<int>(ld);
        if (t.needs_grad(iw)) {
          blas::gemm<T>(false, true, o, g.patch(), ldi, T(1), gmat.data(), ldi, cols.data(), ldi, T(1),
                        t.grad(iw).ptr(), g.patch());
        }
        if (ib >= 0 && t.needs_grad(ib)) detail::channel_bias_grad(gy, t.grad(ib));
        if (t.needs_grad(ix)) {
          std::vector<T> gcols(static_cast<std::size_t>(g.patch()) * ld);
          blas::gemm<T>(true, false, g.patch(), ldi, o, T(1), t.value(iw).ptr(), g.patch(), gmat.data(), ldi,
                        T(0), gcols.data(), ldi);
          Tensor<T>& gx = t.grad(ix);
          for (int i = 0; i < n; ++i) blas::col2im(gcols.data(), g, ld, i * pos, gx.ptr() + i * img);
        }
      });
}

/// Adjoint of conv2d with respect to its input. x [N, Cin, H, W],
/// weight [Cin, Cout, k, k], bias [Cout].
template <class T>
Var<T> conv_transpose2d(Var<T> x, Var<T> weight, std::type_identity_t<std::optional<Var<T>>> bias, int stride, int padding) {
  const Tensor<T>& xv = x.value();
  const Tensor<T>& wv = weight.value();
  detail::require(xv.rank() == 4 && wv.rank() == 4, "conv_transpose2d expects NCHW input and IOkk weight");
  detail::require(xv.dim(1) == wv.dim(0), "conv_transpose2d: channel mismatch " + shape_str(xv.shape) +
                                              " vs " + shape_str(wv.shape));
  detail::require(wv.dim(2) == wv.dim(3), "conv_transpose2d: square kernels only");
  const int n = xv.dim(0), cin = xv.dim(1), cout = wv.dim(1), k = wv.dim(2);
  const int h = xv.dim(2), w = xv.dim(3);
  // Geometry of the forward conv that maps the output back onto the input grid.
  const blas::ConvGeometry g{cout, conv_transpose_out_size(h, k, stride, padding),
                             conv_transpose_out_size(w, k, stride, padding), k, stride, padding, h, w};
  const std::size_t pos = static_cast<std::size_t>(h) * w;
  const std::size_t ld = static_cast<std::size_t>(n) * pos;
  const std::size_t out_img = static_cast<std::size_t>(cout) * g.height * g.width;
  std::vector<T> xmat(static_cast<std::size_t>(cin) * ld);
  detail::to_channel_major(xv.ptr(), n, cin, pos, xmat.data());
  std::vector<T> cols(static_cast<std::size_t>(g.patch()) * ld);
  const int ldi = static_cast<int>(ld);
  blas::gemm<T>(true, false, g.patch(), ldi, cin, T(1), wv.ptr(), g.patch(), xmat.data(), ldi, T(0),
                cols.data(), ldi);
  Tensor<T> y({n, cout, g.height, g.width});
  for (int i = 0; i < n; ++i) blas::col2im(cols.data(), g, ld, i * pos, y.ptr() + i * out_img);
  int ib = -1;
  if (bias) {
    detail::require(bias->value().size() == static_cast<std::size_t>(cout),
                    "conv_transpose2d: bias size mismatch");
    detail::add_channel_bias(y, bias->value());
    ib = bias->id;
  }
  const int ix = x.id, iw = weight.id;
  std::vector<int> ins = {ix, iw};
  if (ib >= 0) ins.push_back(ib);
  return x.tape->record(
      std::move(y), ins,
      [ix, iw, ib, g, n, cin, pos, ld, out_img, xmat = std::move(xmat)](Tape<T>& t, int self) {
        const Tensor<T>& gy = t.grad(self);
        const int ldi = static_cast<int>(ld);
        std::vector<T> gcols(static_cast<std::size_t>(g.patch()) * ld);
        for (int i = 0; i < n; ++i) blas::im2col(gy.ptr() + i * out_img, g, gcols.data(), ld, i * pos);
        if (t.needs_grad(iw)) {
          blas::gemm<T>(false, true, cin, g.patch(), ldi, T(1), xmat.data(), ldi, gcols.data(), ldi, T(1),
                        t.grad(iw).ptr(), g.patch());
        }
        if (ib >= 0 && t.needs_grad(ib)) detail::channel_bias_grad(gy, t.grad(ib));
        if (t.needs_grad(ix)) {
          std::vector<T> gx(static_cast<std::size_t>(cin) * ld);
          blas::gemm<T>(false, false, cin, ldi, g.patch(), T(1), t.value(iw).ptr(), g.patch(), gcols.data(),
                        ldi, T(0), gx.data(), ldi);
          detail::from_channel_major(gx.data(), n, cin, pos, t.grad(ix).ptr(), true);
        }
      });
}

struct BatchNormOptions {
  double eps = 1e-5;
  double momentum = 0.1;
};

/// Per-channel normalization of [N, C, ...]. Train mode uses batch statistics
/// and updates the running estimates (unbiased variance); eval mode uses the
/// running estimates.
template <class T>
Var<T> batch_norm2d(Var<T> x, Var<T> gamma, Var<T> beta, Parameter<T>& running_mean,
                    Parameter<T>& running_var, const BatchNormOptions& opt = {}) {
  const Tensor<T>& xv = x.value();
  detail::require(xv.rank() >= 2, "batch_norm2d expects [N, C, ...]");
  const int n = xv.dim(0), c = xv.dim(1);
  const std::size_t s = xv.inner() / static_cast<std::size_t>(c);
  const std::size_t m = static_cast<std::size_t>(n) * s;
  detail::require(gamma.value().size() == static_cast<std::size_t>(c) &&
                      beta.value().size() == static_cast<std::size_t>(c) &&
                      running_mean.value.size() == static_cast<std::size_t>(c) &&
                      running_var.value.size() == static_cast<std::size_t>(c),
                  "batch_norm2d: parameter size mismatch");
  const bool train = x.tape->training();
  detail::require(!train || m >= 2, "batch_norm2d: train mode needs at least 2 values per channel");
  std::vector<T> mu(static_cast<std::size_t>(c)), inv_std(static_cast<std::size_t>(c));
  auto at = [&](int i, int ch) { return static_cast<std::size_t>(i * c + ch) * s; };
  for (int ch = 0; ch < c; ++ch) {
    if (train) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < s; ++k) acc += xv[at(i, ch) + k];
      }
      const double mean = acc / static_cast<double>(m);
      double var = 0.0;
      for (int i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < s; ++k) {
          const double d = xv[at(i, ch) + k] - mean;
          var += d * d;
        }
      }
      var /= static_cast<double>(m);
      mu[ch] = static_cast<T>(mean);
      inv_std[ch] = static_cast<T>(1.0 / std::sqrt(var + opt.eps));
      const double unbiased = var * static_cast<double>(m) / static_cast<double>(m - 1);
      running_mean.value[ch] =
          static_cast<T>((1.0 - opt.momentum) * running_mean.value[ch] + opt.momentum * mean);
      running_var.value[ch] =
          static_cast<T>((1.0 - opt.momentum) * running_var.value[ch] + opt.momentum * unbiased);
    } else {
      mu[ch] = running_mean.value[ch];
      inv_std[ch] = static_cast<T>(1.0 / std::sqrt(static_cast<double>(running_var.value[ch]) + opt.eps));
    }
  }
  const Tensor<T>& gv = gamma.value();
  const Tensor<T>& bv = beta.value();
  Tensor<T> xhat(xv.shape);
  Tensor<T> y(xv.shape);
  for (int i = 0; i < n; ++i) {
    for (int ch = 0; ch < c; ++ch) {
      for (std::size_t k = 0; k < s; ++k) {
        const std::size_t idx = at(i, ch) + k;
        xhat[idx] = (xv[idx] - mu[ch]) * inv_std[ch];
        y[idx] = gv[ch] * xhat[idx] + bv[ch];
      }
    }
  }
  const int ix = x.id, ig = gamma.id, ibeta = beta.id;
  return x.tape->record(
      std::move(y), {ix, ig, ibeta},
      [ix, ig, ibeta, n, c, s, m, train, inv_std = std::move(inv_std), xhat = std::move(xhat)](Tape<T>& t,
                                                                                              int self) {
        const Tensor<T>& gy = t.grad(self);
        const Tensor<T>& gv = t.value(ig);
        auto at = [c, s](int i, int ch) { return static_cast<std::size_t>(i * c + ch) * s; };
        for (int ch = 0; ch < c; ++ch) {
          T sum_g = T(0), sum_gx = T(0);
          for (int i = 0; i < n; ++i) {
            for (std::size_t k = 0; k < s; ++k) {
              const std::size_t idx = at(i, ch) + k;
              sum_g += gy[idx];
              sum_gx += gy[idx] * xhat[idx];
            }
          }
          if (t.needs_grad(ig)) t.grad(ig)[ch] += sum_gx;
          if (t.needs_grad(ibeta)) t.grad(ibeta)[ch] += sum_g;
          if (!t.needs_grad(ix)) continue;
          Tensor<T>& gx = t.grad(ix);
          const T scale_ = gv[ch] * inv_std[ch];
          const T mt = static_cast<T>(m);
          for (int i = 0; i < n; ++i) {
            for (std::size_t k = 0; k < s; ++k) {
              const std::size_t idx = at(i, ch) + k;
              if (train) {
                gx[idx] += scale_ * (gy[idx] - sum_g / mt - xhat[idx] * sum_gx / mt);
              } else {
                gx[idx] += scale_ * gy[idx];
              }
            }
          }
        }
      });
}

// ---- classification / losses ----------------------------------------------

/// Row-wise log-softmax of [B, K].
template <class T>
Var<T> log_softmax(Var<T> a) {
  const Tensor<T>& x = a.value();
  detail::require(x.rank() == 2, "log_softmax expects [B, K]");
  const int b = x.dim(0), k = x.dim(1);
  Tensor<T> y(x.shape);
  for (int i = 0; i < b; ++i) {
    const T* row = x.ptr() + static_cast<std::size_t>(i) * k;
    const T mx = *std::max_element(row, row + k);
    T z = T(0);
    for (int j = 0; j < k; ++j) z += std::exp(row[j] - mx);
    const T lz = mx + std::log(z);
    for (int j = 0; j < k; ++j) y[static_cast<std::size_t>(i) * k + j] = row[j] - lz;
  }
  const int ia = a.id;
  return a.tape->record(std::move(y), {ia}, [ia, b, k](Tape<T>& t, int self) {
    const Tensor<T>& g = t.grad(self);
    const Tensor<T>& y = t.value(self);
    Tensor<T>& gx = t.grad(ia);
    for (int i = 0; i < b; ++i) {
      const std::size_t r = static_cast<std::size_t>(i) * k;
      T gs = T(0);
      for (int j = 0; j < k; ++j) gs += g[r + j];
      for (int j = 0; j < k; ++j) gx[r + j] += g[r + j] - std::exp(y[r + j]) * gs;
    }
  });
}

/// out[b] = a[b, index[b]] for a of shape [B, K].
template <class T>
Var<T> gather(Var<T> a, const std::vector<int>& index) {
  const Tensor<T>& x = a.value();
  detail::require(x.rank() == 2 && index.size() == static_cast<std::size_t>(x.dim(0)),
                  "gather: shape mismatch");
  const int k = x.dim(1);
  Tensor<T> y({x.dim(0)});
  for (std::size_t i = 0; i < index.size(); ++i) {
    detail::require(index[i] >= 0 && index[i] < k, "gather: index out of range");
    y[i] = x[i * k + index[i]];
  }
  const int ia = a.id;
  return a.tape->record(std::move(y), {ia}, [ia, k, index](Tape<T>& t, int self) {
    const Tensor<T>& g = t.grad(self);
    Tensor<T>& gx = t.grad(ia);
    for (std::size_t i = 0; i < index.size(); ++i) gx[i * k + index[i]] += g[i];
  });
}

/// Mean absolute error over entries whose mask is nonzero (all when empty).
template <class T>
Var<T> l1_loss(Var<T> pred, const Tensor<T>& target, const std::vector<unsigned char>& mask = {}) {
  const Tensor<T>& p = pred.value();
  detail::require(p.shape == target.shape, "l1_loss: shape mismatch " + shape_str(p.shape) + " vs " +
                                               shape_str(target.shape));
  detail::require(mask.empty() || mask.size() == p.size(), "l1_loss: mask size mismatch");
  std::size_t count = 0;
  T acc = T(0);
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!mask.empty() && !mask[i]) continue;
    acc += std::abs(p[i] - target[i]);
    ++count;
  }
  detail::require(count > 0, "l1_loss: no valid entries");
  const T inv = T(1) / static_cast<T>(count);
  const int ip = pred.id;
  return pred.tape->record(Tensor<T>({1}, acc * inv), {ip}, [ip, inv, target, mask](Tape<T>& t, int self) {
    const T g = t.grad(self)[0] * inv;
    const Tensor<T>& p = t.value(ip);
    Tensor<T>& gp = t.grad(ip);
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (!mask.empty() && !mask[i]) continue;
      const T d = p[i] - target[i];
      gp[i] += d > T(0) ? g : (d < T(0) ? -g : T(0));
    }
  });
}

}  // namespace echonav::nn

#endif  // ECHONAV_NN_TAPE_HPP_
