#pragma once
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "aflsim/neural.hpp"
#include "aflsim/rng.hpp"

namespace aflsim {

struct Transition {
  std::vector<double> state;
  int action = 0;
  double reward = 0.0;
  std::vector<double> next_state;  // ignored when terminal
  bool terminal = false;
};

/// Fixed-capacity ring of transitions, oldest overwritten first. All stored
/// vectors must match the buffer's state encoding length.
class ReplayBuffer {
 public:
  ReplayBuffer(int capacity, int state_dim)
      : capacity_(capacity), state_dim_(state_dim) {
    if (capacity < 1) throw std::invalid_argument("capacity must be positive");
    if (state_dim < 1) throw std::invalid_argument("state dim must be positive");
    states_.resize(static_cast<std::size_t>(capacity) * state_dim);
    next_states_.resize(static_cast<std::size_t>(capacity) * state_dim);
    actions_.resize(static_cast<std::size_t>(capacity));
    rewards_.resize(static_cast<std::size_t>(capacity));
    terminals_.resize(static_cast<std::size_t>(capacity));
  }

  int capacity() const { return capacity_; }
  int state_dim() const { return state_dim_; }
  int size() const { return size_; }

  void push(const Transition& t) {
    if (static_cast<int>(t.state.size()) != state_dim_ ||
        (!t.terminal && static_cast<int>(t.next_state.size()) != state_dim_))
      throw std::invalid_argument("transition encoding length mismatch");
    const std::size_t base = static_cast<std::size_t>(cursor_) * state_dim_;
    std::copy(t.state.begin(), t.state.end(), states_.begin() + static_cast<std::ptrdiff_t>(base));
    if (t.terminal) {
      std::fill_n(next_states_.begin() + static_cast<std::ptrdiff_t>(base), state_dim_, 0.0);
    } else {
      std::copy(t.next_state.begin(), t.next_state.end(),
                next_states_.begin() + static_cast<std::ptrdiff_t>(base));
    }
    actions_[static_cast<std::size_t>(cursor_)] = t.action;
    rewards_[static_cast<std::size_t>(cursor_)] = t.reward;
    terminals_[static_cast<std::size_t>(cursor_)] = t.terminal ? 1 : 0;
    cursor_ = (cursor_ + 1) % capacity_;
    if (size_ < capacity_) ++size_;
  }

  Transition at(int idx) const {
    if (idx < 0 || idx >= size_) throw std::out_of_range("replay index");
    const int slot = (size_ < capacity_) ? idx : (cursor_ + idx) % capacity_;
    Transition t;
    const std::size_t base = static_cast<std::size_t>(slot) * state_dim_;
    t.state.assign(states_.begin() + static_cast<std::ptrdiff_t>(base),
                   states_.begin() + static_cast<std::ptrdiff_t>(base + state_dim_));
    t.next_state.assign(next_states_.begin() + static_cast<std::ptrdiff_t>(base),
                        next_states_.begin() + static_cast<std::ptrdiff_t>(base + state_dim_));
    t.action = actions_[static_cast<std::size_t>(slot)];
    t.reward = rewards_[static_cast<std::size_t>(slot)];
    t.terminal = terminals_[static_cast<std::size_t>(slot)] != 0;
    return t;
  }

  /// m uniform draws with replacement packed into flat row-major arrays.
  struct Batch {
    int m = 0;
    int state_dim = 0;
    std::vector<double> states;
    std::vector<double> next_states;
    std::vector<int> actions;
    std::vector<double> rewards;
    std::vector<std::uint8_t> terminals;
  };

  void sample_into(Batch& batch, int m, RngEngine& rng) const {
    if (size_ == 0) throw std::logic_error("sampling from an empty buffer");
    batch.m = m;
    batch.state_dim = state_dim_;
    batch.states.resize(static_cast<std::size_t>(m) * state_dim_);
    batch.next_states.resize(static_cast<std::size_t>(m) * state_dim_);
    batch.actions.resize(static_cast<std::size_t>(m));
    batch.rewards.resize(static_cast<std::size_t>(m));
    batch.terminals.resize(static_cast<std::size_t>(m));
    for (int k = 0; k < m; ++k) {
      const int slot = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(size_)));
      const int phys = (size_ < capacity_) ? slot : (cursor_ + slot) % capacity_;
      const std::size_t src = static_cast<std::size_t>(phys) * state_dim_;
      const std::size_t dst = static_cast<std::size_t>(k) * state_dim_;
      std::copy_n(states_.begin() + static_cast<std::ptrdiff_t>(src), state_dim_,
                  batch.states.begin() + static_cast<std::ptrdiff_t>(dst));
      std::copy_n(next_states_.begin() + static_cast<std::ptrdiff_t>(src), state_dim_,
                  batch.next_states.begin() + static_cast<std::ptrdiff_t>(dst));
      batch.actions[static_cast<std::size_t>(k)] = actions_[static_cast<std::size_t>(phys)];
      batch.rewards[static_cast<std::size_t>(k)] = rewards_[static_cast<std::size_t>(phys)];
      batch.terminals[static_cast<std::size_t>(k)] = terminals_[static_cast<std::size_t>(phys)];
    }
  }

 private:
  int capacity_;
  int state_dim_;
  int size_ = 0;
  int cursor_ = 0;
  std::vector<double> states_;
  std::vector<double> next_states_;
  std::vector<int> actions_;
  std::vector<double> rewards_;
  std::vector<std::uint8_t> terminals_;
};

struct EpsilonSchedule {
  double start = 1.0;
  double end = 0.05;
  std::uint64_t anneal_steps = 5000;

  double at(std::uint64_t step) const {
    if (anneal_steps == 0 || step >= anneal_steps) return end;
    const double f = static_cast<double>(step) / static_cast<double>(anneal_steps);
    return start + (end - start) * f;
  }
};

inline double epsilon_at(const EpsilonSchedule& schedule, std::uint64_t step) {
  return schedule.at(step);
}

/// Q-learner: online network, periodically synced target copy, RMSprop, and
/// uniform replay. One train_step per environment event; the target network
/// is refreshed every sync_period train steps.
class DqnAgent {
 public:
  DqnAgent(const std::vector<int>& layer_dims, std::uint64_t seed, double lr,
           double gamma = 1.0, int sync_period = 20, int batch_size = 64)
      : online_(mlp_init(layer_dims, seed)),
        target_(online_),
        opt_(RmsPropState::for_net(online_, lr)),
        grads_(MlpGrads::zeros_like(online_)),
        gamma_(gamma),
        sync_period_(sync_period),
        batch_size_(batch_size) {
    if (gamma < 0.0 || gamma > 1.0) throw std::invalid_argument("gamma outside [0,1]");
    if (sync_period < 1) throw std::invalid_argument("sync period must be positive");
    if (batch_size < 1) throw std::invalid_argument("batch size must be positive");
  }

  const Mlp& online() const { return online_; }
  const Mlp& target() const { return target_; }
  Mlp& online_mut() { return online_; }
  int num_actions() const { return online_.output_dim(); }
  std::uint64_t step_counter() const { return step_counter_; }
  std::uint64_t env_steps() const { return env_steps_; }
  int batch_size() const { return batch_size_; }
  double gamma() const { return gamma_; }

  /// epsilon-greedy: explore uniformly with probability eps, otherwise pick
  /// the greedy action (ties to the lowest index). eps == 0 draws nothing.
  int select_action(const std::vector<double>& state, double eps, RngEngine& rng) {
    ++env_steps_;
    if (eps > 0.0 && uniform01(rng) < eps)
      return static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(num_actions())));
    return greedy_action(state);
  }

  int greedy_action(const std::vector<double>& state) const {
    const std::vector<double> q = online_.forward(state);
    int best = 0;
    for (int a = 1; a < static_cast<int>(q.size()); ++a)
      if (q[static_cast<std::size_t>(a)] > q[static_cast<std::size_t>(best)]) best = a;
    return best;
  }

  /// TD targets from the frozen target network:
  ///   y = r + gamma * max_a' Q(s', a'; target), or y = r when terminal.
  std::vector<double> td_targets(const ReplayBuffer::Batch& batch) const {
    if (batch.m == 0) throw std::invalid_argument("empty batch");
    std::vector<double> y(static_cast<std::size_t>(batch.m));
    MlpWorkspace ws;
    forward_batch(target_, batch.next_states.data(), batch.m, ws);
    const auto& q = ws.activations.back();
    const int out = target_.output_dim();
    for (int b = 0; b < batch.m; ++b) {
      double r = batch.rewards[static_cast<std::size_t>(b)];
      if (batch.terminals[static_cast<std::size_t>(b)]) {
        y[static_cast<std::size_t>(b)] = r;
        continue;
      }
      const double* row = q.data() + static_cast<std::size_t>(b) * out;
      double best = row[0];
      for (int a = 1; a < out; ++a) best = std::max(best, row[a]);
      y[static_cast<std::size_t>(b)] = r + gamma_ * best;
    }
    return y;
  }

  /// One learning step: skipped (nullopt) until the buffer can fill a batch.
  std::optional<double> train_step(const ReplayBuffer& buffer, RngEngine& rng) {
    if (buffer.size() < batch_size_) return std::nullopt;
    buffer.sample_into(batch_, batch_size_, rng);
    const std::vector<double> y = td_targets(batch_);
    const double loss =
        td_loss_and_grads(online_, batch_.states.data(), batch_.m,
                          batch_.actions.data(), y.data(), grads_, ws_);
    rmsprop_step(opt_, online_, grads_);
    ++step_counter_;
    if (step_counter_ % static_cast<std::uint64_t>(sync_period_) == 0)
      target_ = online_;
    return loss;
  }

  void sync_target() { target_ = online_; }

  // -------------------------------------------------------------------------
  // Checkpointing. Length-prefixed fields, in order:
  //   [u64 len][payload]  header: u64 step_counter, u64 env_steps
  //   [u64 len][payload]  online parameters (neural blob layout)
  //   [u64 len][payload]  target parameters
  //   [u64 len][payload]  RMSprop accumulator as a neural blob
  // -------------------------------------------------------------------------

  std::vector<std::uint8_t> save_checkpoint() const {
    std::vector<std::uint8_t> out;
    std::vector<std::uint8_t> header;
    detail::append_le(header, step_counter_);
    detail::append_le(header, env_steps_);
    append_field(out, header);
    append_field(out, save_params(online_));
    append_field(out, save_params(target_));
    Mlp acc_view = online_;
    acc_view.weights = opt_.acc.weights;
    acc_view.biases = opt_.acc.biases;
    append_field(out, save_params(acc_view));
    return out;
  }

  void load_checkpoint(const std::vector<std::uint8_t>& bytes) {
    std::size_t pos = 0;
    const std::vector<std::uint8_t> header = read_field(bytes, pos);
    detail::ByteReader r{header.data(), header.size()};
    step_counter_ = r.read_le<std::uint64_t>();
    env_steps_ = r.read_le<std::uint64_t>();
    const Mlp online = load_params(read_field(bytes, pos));
    const Mlp target = load_params(read_field(bytes, pos));
    const Mlp acc = load_params(read_field(bytes, pos));
    if (online.dims != online_.dims)
      throw std::runtime_error("checkpoint dims do not match the agent");
    online_ = online;
    target_ = target;
    opt_.acc.weights = acc.weights;
    opt_.acc.biases = acc.biases;
    if (pos != bytes.size()) throw std::runtime_error("trailing bytes in checkpoint");
  }

 private:
  static void append_field(std::vector<std::uint8_t>& out,
                           const std::vector<std::uint8_t>& payload) {
    detail::append_le(out, static_cast<std::uint64_t>(payload.size()));
    out.insert(out.end(), payload.begin(), payload.end());
  }

  static std::vector<std::uint8_t> read_field(const std::vector<std::uint8_t>& bytes,
                                              std::size_t& pos) {
    if (pos + 8 > bytes.size()) throw std::runtime_error("truncated checkpoint");
    detail::ByteReader r{bytes.data() + pos, 8};
    const auto len = r.read_le<std::uint64_t>();
    pos += 8;
    if (pos + len > bytes.size()) throw std::runtime_error("truncated checkpoint");
    std::vector<std::uint8_t> payload(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                                      bytes.begin() + static_cast<std::ptrdiff_t>(pos + len));
    pos += len;
    return payload;
  }

  Mlp online_;
  Mlp target_;
  RmsPropState opt_;
  MlpGrads grads_;
  double gamma_;
  int sync_period_;
  int batch_size_;
  std::uint64_t step_counter_ = 0;
  std::uint64_t env_steps_ = 0;
  ReplayBuffer::Batch batch_;
  MlpWorkspace ws_;
};

}  // namespace aflsim
