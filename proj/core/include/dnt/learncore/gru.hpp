#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "dnt/error.hpp"
#include "dnt/learncore/params.hpp"
#include "dnt/rng.hpp"

namespace dnt::learn {

// Sequence model used by the twin's one-step request forecaster: token
// embedding -> single gated recurrent cell -> linear head -> softmax over the
// catalog. Backprop-through-time is written out by hand; like Mlp this is
// templated so the gradient checks run the same code in double.
//
// Cell equations, h_prev from the previous step, x the embedded token:
//   z = sigmoid(Wz x + Uz h_prev + bz)
//   r = sigmoid(Wr x + Ur h_prev + br)
//   g = tanh(Wh x + Uh (r .* h_prev) + bh)
//   h = (1 - z) .* h_prev + z .* g
template <typename T>
class GruNet {
 public:
  GruNet() = default;

  GruNet(int catalog, int emb_dim, int hidden, int window)
      : catalog_(catalog), emb_(emb_dim), hid_(hidden), window_(window) {
    if (catalog < 1 || emb_dim < 1 || hidden < 1 || window < 1)
      throw InvalidArgument("GruNet: all dims must be >= 1");
    params_.assign(param_count(), T(0));
  }

  /// Small random init for embedding and cell; the output head starts at
  /// zero so an untrained net predicts the uniform distribution.
  static GruNet random(int catalog, int emb_dim, int hidden, int window, Rng& rng) {
    GruNet net(catalog, emb_dim, hidden, window);
    const std::size_t head_off = net.offset_wo();
    const double scale = 0.2;
    for (std::size_t i = 0; i < head_off; ++i)
      net.params_[i] = static_cast<T>(rng.normal() * scale);
    return net;
  }

  int catalog() const { return catalog_; }
  int window() const { return window_; }
  int hidden() const { return hid_; }
  int emb_dim() const { return emb_; }
  std::vector<T>& params() { return params_; }
  const std::vector<T>& params() const { return params_; }

  std::size_t param_count() const {
    const std::size_t e = static_cast<std::size_t>(catalog_) * emb_;
    const std::size_t gates = 3u * (static_cast<std::size_t>(hid_) * emb_ +
                                    static_cast<std::size_t>(hid_) * hid_ + hid_);
    const std::size_t head = static_cast<std::size_t>(catalog_) * hid_ + catalog_;
    return e + gates + head;
  }

  /// Probability vector over the catalog for the next token after `ids`.
  std::vector<T> probs(std::span<const std::int32_t> ids) const {
    if (static_cast<int>(ids.size()) != window_)
      throw InvalidArgument("GruNet::probs: window length mismatch");
    std::vector<T> h(static_cast<std::size_t>(hid_), T(0));
    std::vector<T> z(hid_), r(hid_), g(hid_), tmp(hid_);
    for (int t = 0; t < window_; ++t) {
      check_id(ids[static_cast<std::size_t>(t)]);
      cell_forward(ids[static_cast<std::size_t>(t)], h, z, r, g, tmp);
    }
    std::vector<T> logits(static_cast<std::size_t>(catalog_), T(0));
    head_forward(h, logits);
    softmax_inplace(logits);
    return logits;
  }

  /// Cross-entropy of the next-token prediction; accumulates the gradient of
  /// the (single-window) loss into `grad`, which must be param-sized and is
  /// ADDED to, not cleared.
  T ce_loss_grad(std::span<const std::int32_t> ids, std::int32_t target,
                 std::vector<T>& grad) const {
    if (static_cast<int>(ids.size()) != window_)
      throw InvalidArgument("GruNet::ce_loss_grad: window length mismatch");
    check_id(target);
    const std::size_t H = static_cast<std::size_t>(hid_);
    // Forward, keeping per-step internals.
    std::vector<std::vector<T>> hs(static_cast<std::size_t>(window_) + 1,
                                   std::vector<T>(H, T(0)));
    std::vector<std::vector<T>> zs(window_, std::vector<T>(H)),
        rs(window_, std::vector<T>(H)), gs(window_, std::vector<T>(H));
    std::vector<T> tmp(H);
    for (int t = 0; t < window_; ++t) {
      check_id(ids[static_cast<std::size_t>(t)]);
      hs[static_cast<std::size_t>(t) + 1] = hs[static_cast<std::size_t>(t)];
      cell_forward(ids[static_cast<std::size_t>(t)], hs[static_cast<std::size_t>(t) + 1],
                   zs[static_cast<std::size_t>(t)], rs[static_cast<std::size_t>(t)],
                   gs[static_cast<std::size_t>(t)], tmp);
    }
    std::vector<T> p(static_cast<std::size_t>(catalog_), T(0));
    head_forward(hs.back(), p);
    softmax_inplace(p);
    const T eps = static_cast<T>(1e-12);
    const T loss = -std::log(p[static_cast<std::size_t>(target)] + eps);

    // Head backward: dlogits = p - onehot(target).
    std::vector<T> dh(H, T(0));
    {
      const T* wo = params_.data() + offset_wo();
      T* gwo = grad.data() + offset_wo();
      T* gbo = grad.data() + offset_bo();
      for (int c = 0; c < catalog_; ++c) {
        T d = p[static_cast<std::size_t>(c)];
        if (c == target) d -= T(1);
        if (d == T(0)) continue;
        gbo[c] += d;
        const T* wr = wo + static_cast<std::size_t>(c) * hid_;
        T* gwr = gwo + static_cast<std::size_t>(c) * hid_;
        for (int i = 0; i < hid_; ++i) {
          gwr[i] += d * hs.back()[static_cast<std::size_t>(i)];
          dh[static_cast<std::size_t>(i)] += d * wr[i];
        }
      }
    }

    // BPTT.
    std::vector<T> dz(H), dr(H), dg(H), daz(H), dar(H), dah(H), dh_prev(H), dx(emb_);
    for (int t = window_ - 1; t >= 0; --t) {
      const std::vector<T>& h_prev = hs[static_cast<std::size_t>(t)];
      const std::vector<T>& z = zs[static_cast<std::size_t>(t)];
      const std::vector<T>& r = rs[static_cast<std::size_t>(t)];
      const std::vector<T>& g = gs[static_cast<std::size_t>(t)];
      for (std::size_t i = 0; i < H; ++i) {
        dz[i] = dh[i] * (g[i] - h_prev[i]);
        dg[i] = dh[i] * z[i];
        dh_prev[i] = dh[i] * (T(1) - z[i]);
        dah[i] = dg[i] * (T(1) - g[i] * g[i]);
        daz[i] = dz[i] * z[i] * (T(1) - z[i]);
      }
      // dah feeds Uh^T into both r and h_prev paths.
      std::fill(dr.begin(), dr.end(), T(0));
      const T* uh = params_.data() + offset_u(2);
      for (std::size_t i = 0; i < H; ++i) {
        const T d = dah[i];
        if (d == T(0)) continue;
        const T* ur = uh + i * H;
        for (std::size_t j = 0; j < H; ++j) {
          const T back = d * ur[j];
          dr[j] += back * h_prev[j];
          dh_prev[j] += back * r[j];
        }
      }
      for (std::size_t i = 0; i < H; ++i) dar[i] = dr[i] * r[i] * (T(1) - r[i]);

      std::fill(dx.begin(), dx.end(), T(0));
      const std::int32_t id = ids[static_cast<std::size_t>(t)];
      const T* x = params_.data() + offset_embed() + static_cast<std::size_t>(id) * emb_;
      // Order: z gate (0), r gate (1), candidate (2).
      accum_gate(0, daz, x, h_prev, dx, dh_prev, grad, nullptr);
      accum_gate(1, dar, x, h_prev, dx, dh_prev, grad, nullptr);
      accum_gate(2, dah, x, h_prev, dx, dh_prev, grad, &r);
      T* gx = grad.data() + offset_embed() + static_cast<std::size_t>(id) * emb_;
      for (int i = 0; i < emb_; ++i) gx[i] += dx[static_cast<std::size_t>(i)];
      dh.swap(dh_prev);
    }
    return loss;
  }

  /// One SGD step on a single (window, target) pair; returns the loss.
  T sgd_window(std::span<const std::int32_t> ids, std::int32_t target, T lr) {
    std::vector<T> grad(params_.size(), T(0));
    const T loss = ce_loss_grad(ids, target, grad);
    for (std::size_t i = 0; i < params_.size(); ++i) params_[i] -= lr * grad[i];
    return loss;
  }

  ParamVector to_param_vector() const {
    ParamVector pv;
    pv.manifest = {catalog_, emb_, hid_, window_};
    pv.values.resize(params_.size());
    for (std::size_t i = 0; i < params_.size(); ++i)
      pv.values[i] = static_cast<float>(params_[i]);
    return pv;
  }

  static GruNet from_param_vector(const ParamVector& pv) {
    if (pv.manifest.size() != 4)
      throw InvalidArgument("GruNet::from_param_vector: bad manifest");
    GruNet net(pv.manifest[0], pv.manifest[1], pv.manifest[2], pv.manifest[3]);
    if (net.params_.size() != pv.values.size())
      throw InvalidArgument("GruNet::from_param_vector: size mismatch");
    for (std::size_t i = 0; i < pv.values.size(); ++i)
      net.params_[i] = static_cast<T>(pv.values[i]);
    return net;
  }

 private:
  // Parameter layout: embed | (W,U,b) x {z,r,h} | Wo | bo.
  std::size_t offset_embed() const { return 0; }
  std::size_t gate_block() const {
    return static_cast<std::size_t>(hid_) * emb_ + static_cast<std::size_t>(hid_) * hid_ + hid_;
  }
  std::size_t offset_w(int gate) const {
    return static_cast<std::size_t>(catalog_) * emb_ + static_cast<std::size_t>(gate) * gate_block();
  }
  std::size_t offset_u(int gate) const {
    return offset_w(gate) + static_cast<std::size_t>(hid_) * emb_;
  }
  std::size_t offset_b(int gate) const {
    return offset_u(gate) + static_cast<std::size_t>(hid_) * hid_;
  }
  std::size_t offset_wo() const { return offset_w(3); }
  std::size_t offset_bo() const { return offset_wo() + static_cast<std::size_t>(catalog_) * hid_; }

  void check_id(std::int32_t id) const {
    if (id < 0 || id >= catalog_)
      throw InvalidArgument("GruNet: content id out of catalog range");
  }

  static T sigmoid(T v) { return T(1) / (T(1) + std::exp(-v)); }

  // Advances h in place; z, r, g receive the gate values.
  void cell_forward(std::int32_t id, std::vector<T>& h, std::vector<T>& z,
                    std::vector<T>& r, std::vector<T>& g, std::vector<T>& rh) const {
    const std::size_t H = static_cast<std::size_t>(hid_);
    const T* x = params_.data() + offset_embed() + static_cast<std::size_t>(id) * emb_;
    gate_affine(0, x, h.data(), z.data());
    gate_affine(1, x, h.data(), r.data());
    for (std::size_t i = 0; i < H; ++i) {
      z[i] = sigmoid(z[i]);
      r[i] = sigmoid(r[i]);
      rh[i] = r[i] * h[i];
    }
    gate_affine(2, x, rh.data(), g.data());
    for (std::size_t i = 0; i < H; ++i) {
      g[i] = std::tanh(g[i]);
      h[i] = (T(1) - z[i]) * h[i] + z[i] * g[i];
    }
  }

  // out = W_gate x + U_gate hvec + b_gate
  void gate_affine(int gate, const T* x, const T* hvec, T* out) const {
    const T* w = params_.data() + offset_w(gate);
    const T* u = params_.data() + offset_u(gate);
    const T* b = params_.data() + offset_b(gate);
    for (int o = 0; o < hid_; ++o) {
      T acc = b[o];
      const T* wr = w + static_cast<std::size_t>(o) * emb_;
      for (int i = 0; i < emb_; ++i) acc += wr[i] * x[i];
      const T* ur = u + static_cast<std::size_t>(o) * hid_;
      for (int i = 0; i < hid_; ++i) acc += ur[i] * hvec[i];
      out[o] = acc;
    }
  }

  void head_forward(const std::vector<T>& h, std::vector<T>& logits) const {
    const T* wo = params_.data() + offset_wo();
    const T* bo = params_.data() + offset_bo();
    for (int c = 0; c < catalog_; ++c) {
      T acc = bo[c];
      const T* wr = wo + static_cast<std::size_t>(c) * hid_;
      for (int i = 0; i < hid_; ++i) acc += wr[i] * h[static_cast<std::size_t>(i)];
      logits[static_cast<std::size_t>(c)] = acc;
    }
  }

  static void softmax_inplace(std::vector<T>& v) {
    T mx = v[0];
    for (T x : v)
      if (x > mx) mx = x;
    T sum = T(0);
    for (T& x : v) {
      x = std::exp(x - mx);
      sum += x;
    }
    for (T& x : v) x /= sum;
  }

  // Accumulates dW, dU, db for one gate given d(pre-activation). The hidden
  // input of the candidate gate is r .* h_prev; `r_mask` carries r there and
  // the h_prev/r split is handled by the caller, so here U sees rh directly.
  void accum_gate(int gate, const std::vector<T>& da, const T* x,
                  const std::vector<T>& h_prev, std::vector<T>& dx,
                  std::vector<T>& dh_prev, std::vector<T>& grad,
                  const std::vector<T>* r_mask) const {
    const std::size_t H = static_cast<std::size_t>(hid_);
    const T* w = params_.data() + offset_w(gate);
    const T* u = params_.data() + offset_u(gate);
    T* gw = grad.data() + offset_w(gate);
    T* gu = grad.data() + offset_u(gate);
    T* gb = grad.data() + offset_b(gate);
    for (std::size_t o = 0; o < H; ++o) {
      const T d = da[o];
      if (d == T(0)) continue;
      gb[o] += d;
      T* gwr = gw + o * emb_;
      const T* wr = w + o * emb_;
      for (int i = 0; i < emb_; ++i) {
        gwr[i] += d * x[i];
        dx[static_cast<std::size_t>(i)] += d * wr[i];
      }
      T* gur = gu + o * H;
      const T* ur = u + o * H;
      if (r_mask == nullptr) {
        for (std::size_t j = 0; j < H; ++j) {
          gur[j] += d * h_prev[j];
          dh_prev[j] += d * ur[j];
        }
      } else {
        // Candidate gate: hidden input is r .* h_prev. dU uses that product;
        // the backward flow into r and h_prev was already accumulated by the
        // caller before dar was formed, so only dU is taken here.
        const std::vector<T>& r = *r_mask;
        for (std::size_t j = 0; j < H; ++j) gur[j] += d * (r[j] * h_prev[j]);
      }
    }
  }

  int catalog_ = 0, emb_ = 0, hid_ = 0, window_ = 0;
  std::vector<T> params_;
};

}  // namespace dnt::learn
