#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "dnt/error.hpp"
#include "dnt/learncore/params.hpp"
#include "dnt/rng.hpp"

namespace dnt::learn {

// Fully-connected ReLU network with a linear output layer and hand-written
// backprop. Templated on the scalar type: production code runs float, the
// finite-difference tests instantiate double over the same code path.
//
// Parameter layout per layer l: weight matrix W_l (rows = dims[l+1],
// cols = dims[l], row-major) followed by bias b_l. All loops run in a fixed
// order so results are bit-reproducible.
template <typename T>
class Mlp {
 public:
  Mlp() = default;

  explicit Mlp(std::vector<int> dims) : dims_(std::move(dims)) {
    if (dims_.size() < 2) throw InvalidArgument("Mlp: need at least input and output dims");
    for (int d : dims_)
      if (d < 1) throw InvalidArgument("Mlp: all layer dims must be >= 1");
    params_.assign(param_count(dims_), T(0));
  }

  static std::size_t param_count(const std::vector<int>& dims) {
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l)
      n += static_cast<std::size_t>(dims[l + 1]) * dims[l] + dims[l + 1];
    return n;
  }

  /// He-style init for the ReLU stack; biases zero.
  static Mlp random(std::vector<int> dims, Rng& rng) {
    Mlp net(std::move(dims));
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < net.dims_.size(); ++l) {
      const int in = net.dims_[l], out = net.dims_[l + 1];
      const double scale = std::sqrt(2.0 / in);
      for (int i = 0; i < out * in; ++i)
        net.params_[off + i] = static_cast<T>(rng.normal() * scale);
      off += static_cast<std::size_t>(out) * in + out;
    }
    return net;
  }

  const std::vector<int>& dims() const { return dims_; }
  int input_dim() const { return dims_.front(); }
  int output_dim() const { return dims_.back(); }
  std::vector<T>& params() { return params_; }
  const std::vector<T>& params() const { return params_; }

  std::vector<T> forward(std::span<const T> input) const {
    if (static_cast<int>(input.size()) != input_dim())
      throw InvalidArgument("Mlp::forward: input dim mismatch");
    std::vector<T> act(input.begin(), input.end());
    std::vector<T> next;
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
      const int in = dims_[l], out = dims_[l + 1];
      next.assign(static_cast<std::size_t>(out), T(0));
      affine(off, in, out, act.data(), next.data());
      off += static_cast<std::size_t>(out) * in + out;
      if (l + 2 < dims_.size())
        for (T& v : next) v = v > T(0) ? v : T(0);
      act.swap(next);
    }
    return act;
  }

  /// Mean over the batch of the summed squared error against full target
  /// vectors. Accumulates the gradient of that mean into `grad` (resized and
  /// zeroed here).
  T mse_loss_grad(const std::vector<std::vector<T>>& inputs,
                  const std::vector<std::vector<T>>& targets,
                  std::vector<T>& grad) const {
    if (inputs.empty() || inputs.size() != targets.size())
      throw InvalidArgument("Mlp::mse_loss_grad: bad batch");
    grad.assign(params_.size(), T(0));
    T loss = T(0);
    std::vector<T> dout;
    for (std::size_t b = 0; b < inputs.size(); ++b) {
      const auto acts = forward_keep(inputs[b]);
      const std::vector<T>& y = acts.back();
      dout.assign(y.size(), T(0));
      for (std::size_t i = 0; i < y.size(); ++i) {
        const T r = y[i] - targets[b][i];
        loss += r * r;
        dout[i] = T(2) * r / static_cast<T>(inputs.size());
      }
      backprop(acts, dout, grad);
    }
    return loss / static_cast<T>(inputs.size());
  }

  /// Mean squared TD error on chosen actions: mean_b (q[a_b] - y_b)^2.
  T td_loss_grad(const std::vector<std::vector<T>>& inputs,
                 const std::vector<int>& actions, const std::vector<T>& targets,
                 std::vector<T>& grad) const {
    if (inputs.empty() || inputs.size() != actions.size() ||
        inputs.size() != targets.size())
      throw InvalidArgument("Mlp::td_loss_grad: bad batch");
    grad.assign(params_.size(), T(0));
    T loss = T(0);
    std::vector<T> dout;
    for (std::size_t b = 0; b < inputs.size(); ++b) {
      const auto acts = forward_keep(inputs[b]);
      const std::vector<T>& y = acts.back();
      const int a = actions[b];
      if (a < 0 || a >= static_cast<int>(y.size()))
        throw InvalidArgument("Mlp::td_loss_grad: action index out of range");
      const T r = y[static_cast<std::size_t>(a)] - targets[b];
      loss += r * r;
      dout.assign(y.size(), T(0));
      dout[static_cast<std::size_t>(a)] = T(2) * r / static_cast<T>(inputs.size());
      backprop(acts, dout, grad);
    }
    return loss / static_cast<T>(inputs.size());
  }

  ParamVector to_param_vector() const {
    ParamVector pv;
    pv.manifest = dims_;
    pv.values.resize(params_.size());
    for (std::size_t i = 0; i < params_.size(); ++i)
      pv.values[i] = static_cast<float>(params_[i]);
    return pv;
  }

  static Mlp from_param_vector(const ParamVector& pv) {
    Mlp net(pv.manifest);
    if (net.params_.size() != pv.values.size())
      throw InvalidArgument("Mlp::from_param_vector: manifest/value size mismatch");
    for (std::size_t i = 0; i < pv.values.size(); ++i)
      net.params_[i] = static_cast<T>(pv.values[i]);
    return net;
  }

 private:
  // y = W x + b for layer at parameter offset `off`.
  void affine(std::size_t off, int in, int out, const T* x, T* y) const {
    const T* w = params_.data() + off;
    const T* b = w + static_cast<std::size_t>(out) * in;
    for (int o = 0; o < out; ++o) {
      T acc = b[o];
      const T* wr = w + static_cast<std::size_t>(o) * in;
      for (int i = 0; i < in; ++i) acc += wr[i] * x[i];
      y[o] = acc;
    }
  }

  // Forward pass keeping post-activation values of every layer (index 0 is
  // the input itself).
  std::vector<std::vector<T>> forward_keep(const std::vector<T>& input) const {
    if (static_cast<int>(input.size()) != input_dim())
      throw InvalidArgument("Mlp: input dim mismatch");
    std::vector<std::vector<T>> acts;
    acts.reserve(dims_.size());
    acts.push_back(input);
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
      const int in = dims_[l], out = dims_[l + 1];
      std::vector<T> next(static_cast<std::size_t>(out), T(0));
      affine(off, in, out, acts.back().data(), next.data());
      off += static_cast<std::size_t>(out) * in + out;
      if (l + 2 < dims_.size())
        for (T& v : next) v = v > T(0) ? v : T(0);
      acts.push_back(std::move(next));
    }
    return acts;
  }

  // Accumulates parameter gradients given dL/d(output). ReLU masks are
  // recovered from the stored post-activation values (v > 0 passed through).
  void backprop(const std::vector<std::vector<T>>& acts, std::vector<T> dout,
                std::vector<T>& grad) const {
    // Offsets of each layer's parameters.
    std::vector<std::size_t> offsets(dims_.size() - 1);
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
      offsets[l] = off;
      off += static_cast<std::size_t>(dims_[l + 1]) * dims_[l] + dims_[l + 1];
    }
    for (std::size_t l = dims_.size() - 1; l-- > 0;) {
      const int in = dims_[l], out = dims_[l + 1];
      const std::vector<T>& x = acts[l];
      const T* w = params_.data() + offsets[l];
      T* gw = grad.data() + offsets[l];
      T* gb = gw + static_cast<std::size_t>(out) * in;
      std::vector<T> dx(static_cast<std::size_t>(in), T(0));
      for (int o = 0; o < out; ++o) {
        const T d = dout[static_cast<std::size_t>(o)];
        if (d == T(0)) continue;
        gb[o] += d;
        T* gwr = gw + static_cast<std::size_t>(o) * in;
        const T* wr = w + static_cast<std::size_t>(o) * in;
        for (int i = 0; i < in; ++i) {
          gwr[i] += d * x[static_cast<std::size_t>(i)];
          dx[static_cast<std::size_t>(i)] += d * wr[i];
        }
      }
      if (l > 0) {
        // Through the ReLU of the previous layer.
        for (int i = 0; i < in; ++i)
          if (x[static_cast<std::size_t>(i)] <= T(0)) dx[static_cast<std::size_t>(i)] = T(0);
      }
      dout.swap(dx);
    }
  }

  std::vector<int> dims_;
  std::vector<T> params_;
};

}  // namespace dnt::learn
