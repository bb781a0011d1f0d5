#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dnt/error.hpp"
#include "dnt/learncore/mlp.hpp"
#include "dnt/learncore/params.hpp"
#include "dnt/rng.hpp"

namespace dnt::learn {

struct Transition {
  std::vector<float> s;
  std::int32_t a = 0;
  float r = 0.0f;
  std::vector<float> s2;
  bool done = false;
};

/// Fixed-capacity ring buffer of transitions.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity < 1) throw InvalidArgument("ReplayBuffer: capacity must be >= 1");
    data_.reserve(capacity < 4096 ? capacity : 4096);
  }

  void push(Transition t) {
    if (data_.size() < capacity_) {
      data_.push_back(std::move(t));
    } else {
      data_[cursor_] = std::move(t);
    }
    cursor_ = (cursor_ + 1) % capacity_;
  }

  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Transition& at(std::size_t i) const { return data_[i]; }

  /// Uniform sample with replacement; requires size() >= batch.
  std::vector<const Transition*> sample(std::size_t batch, Rng& rng) const {
    if (size() < batch)
      throw InvalidArgument("ReplayBuffer::sample: fewer transitions than batch size");
    std::vector<const Transition*> out(batch);
    for (std::size_t i = 0; i < batch; ++i)
      out[i] = &data_[static_cast<std::size_t>(rng.below(data_.size()))];
    return out;
  }

 private:
  std::vector<Transition> data_;
  std::size_t capacity_;
  std::size_t cursor_ = 0;
};

struct EpsilonSchedule {
  double eps_start = 1.0;
  double eps_end = 0.05;
  std::int64_t decay_steps = 20000;
};

/// Linear interpolation from eps_start to eps_end over decay_steps, clamped.
inline double epsilon_at(const EpsilonSchedule& s, std::int64_t step) {
  if (step < 0) throw InvalidArgument("epsilon_at: step must be >= 0");
  if (s.decay_steps <= 0 || step >= s.decay_steps) return s.eps_end;
  const double f = static_cast<double>(step) / static_cast<double>(s.decay_steps);
  return s.eps_start + f * (s.eps_end - s.eps_start);
}

/// Greedy action with deterministic tie-breaking (lowest index wins).
/// Non-finite q-values never win against finite ones.
inline int argmax_action(std::span<const float> q) {
  if (q.empty()) throw InvalidArgument("argmax_action: empty q-vector");
  int best = 0;
  for (int i = 1; i < static_cast<int>(q.size()); ++i)
    if (q[static_cast<std::size_t>(i)] > q[static_cast<std::size_t>(best)]) best = i;
  return best;
}

/// Hard copy online -> target. Shapes must match.
inline void sync_target(const Mlp<float>& online, Mlp<float>& target) {
  if (online.dims() != target.dims())
    throw InvalidArgument("sync_target: manifest mismatch");
  target.params() = online.params();
}

/// One SGD step on the mean squared TD error over a sampled batch.
/// Bellman target y = r + gamma * max_a' Q_target(s', a'), or y = r on
/// terminal transitions. Returns the batch loss; target params untouched.
inline float dqn_train_step(Mlp<float>& online, const Mlp<float>& target,
                            const ReplayBuffer& buffer, double gamma, double lr,
                            int batch_size, Rng& rng) {
  const auto batch = buffer.sample(static_cast<std::size_t>(batch_size), rng);
  std::vector<std::vector<float>> inputs(batch.size());
  std::vector<int> actions(batch.size());
  std::vector<float> targets(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const Transition& t = *batch[b];
    inputs[b] = t.s;
    actions[b] = t.a;
    float y = t.r;
    if (!t.done) {
      const std::vector<float> q2 = target.forward(t.s2);
      float mx = q2[0];
      for (float v : q2)
        if (v > mx) mx = v;
      y += static_cast<float>(gamma) * mx;
    }
    targets[b] = y;
  }
  std::vector<float> grad;
  const float loss = online.td_loss_grad(inputs, actions, targets, grad);
  auto& p = online.params();
  const float step = static_cast<float>(lr);
  for (std::size_t i = 0; i < p.size(); ++i) p[i] -= step * grad[i];
  return loss;
}

struct DqnHyper {
  std::vector<int> hidden{64, 64};
  double gamma = 0.95;
  double lr = 1e-3;
  int batch_size = 64;
  std::size_t buffer_capacity = 50000;
  int target_sync_every = 500;
  int train_every = 4;
  EpsilonSchedule eps;
};

/// Convenience bundle: online/target nets, replay buffer, schedules and the
/// step counter that drives them.
class DqnAgent {
 public:
  DqnAgent(int obs_dim, int num_actions, const DqnHyper& hyper, std::uint64_t seed)
      : hyper_(hyper),
        init_rng_(derive_seed(seed, "dqn-init")),
        train_rng_(derive_seed(seed, "dqn-train")),
        explore_rng_(derive_seed(seed, "dqn-explore")),
        buffer_(hyper.buffer_capacity) {
    std::vector<int> dims;
    dims.push_back(obs_dim);
    for (int h : hyper.hidden) dims.push_back(h);
    dims.push_back(num_actions);
    online_ = Mlp<float>::random(dims, init_rng_);
    target_ = online_;
  }

  /// Epsilon-greedy action for the current step count.
  int act(std::span<const float> obs) {
    const double eps = epsilon_at(hyper_.eps, steps_);
    if (explore_rng_.uniform() < eps)
      return static_cast<int>(explore_rng_.below(
          static_cast<std::uint64_t>(online_.output_dim())));
    return greedy(obs);
  }

  int greedy(std::span<const float> obs) const {
    const std::vector<float> q = online_.forward(obs);
    return argmax_action(q);
  }

  void remember(Transition t) { buffer_.push(std::move(t)); }

  /// Advances the step counter; trains every train_every steps once the
  /// buffer holds a batch, and hard-syncs the target on schedule. Returns the
  /// TD loss when a step was taken.
  float step_and_maybe_train() {
    ++steps_;
    float loss = -1.0f;
    if (steps_ % hyper_.train_every == 0 &&
        buffer_.size() >= static_cast<std::size_t>(hyper_.batch_size)) {
      loss = dqn_train_step(online_, target_, buffer_, hyper_.gamma, hyper_.lr,
                            hyper_.batch_size, train_rng_);
    }
    if (steps_ % hyper_.target_sync_every == 0) sync_target(online_, target_);
    return loss;
  }

  std::int64_t steps() const { return steps_; }
  void set_steps(std::int64_t s) { steps_ = s; }
  double epsilon() const { return epsilon_at(hyper_.eps, steps_); }

  Mlp<float>& online() { return online_; }
  const Mlp<float>& online() const { return online_; }
  const Mlp<float>& target() const { return target_; }

  ParamVector params() const { return online_.to_param_vector(); }
  void load_params(const ParamVector& pv) {
    online_ = Mlp<float>::from_param_vector(pv);
    sync_target(online_, target_);
  }

  ReplayBuffer& buffer() { return buffer_; }

 private:
  DqnHyper hyper_;
  Rng init_rng_, train_rng_, explore_rng_;
  Mlp<float> online_, target_;
  ReplayBuffer buffer_;
  std::int64_t steps_ = 0;
};

}  // namespace dnt::learn
