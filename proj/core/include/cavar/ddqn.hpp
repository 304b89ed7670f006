#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "cavar/rng.hpp"
#include "cavar/timeseries.hpp"

namespace cavar::ddqn {

struct Layer {
    std::size_t in = 0;
    std::size_t out = 0;
    /// Row-major out x in.
    std::vector<double> weights;
    std::vector<double> biases;

    bool operator==(const Layer& other) const = default;
};

/// Feed-forward net with rectifier hidden layers and a linear output layer.
class QNetwork {
public:
    QNetwork() = default;

    /// widths = {d, h1, ..., 2}. Weights are He-uniform (limit sqrt(6/fan_in)),
    /// biases zero.
    QNetwork(std::vector<std::size_t> widths, Rng& rng);

    /// All weights and biases zero.
    static QNetwork zeros(std::vector<std::size_t> widths);

    const std::vector<std::size_t>& widths() const noexcept { return widths_; }
    std::size_t input_dim() const noexcept { return widths_.empty() ? 0 : widths_.front(); }
    std::vector<Layer>& layers() noexcept { return layers_; }
    const std::vector<Layer>& layers() const noexcept { return layers_; }

    std::vector<double> forward(std::span<const double> state) const;
    std::size_t parameter_count() const noexcept;

    bool operator==(const QNetwork& other) const = default;

private:
    std::vector<std::size_t> widths_;
    std::vector<Layer> layers_;
};

/// Parameter-shaped buffers (same layout as QNetwork::layers()).
struct Gradients {
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> biases;

    static Gradients like(const QNetwork& net);
};

/// Mean squared error over (Q(s_i, a_i) - y_i) with its gradient by
/// reverse-mode differentiation.
double mse_loss_and_gradient(const QNetwork& net, std::span<const std::vector<double>> states,
                             std::span<const int> actions, std::span<const double> targets, Gradients& grad);

class Adam {
public:
    explicit Adam(const QNetwork& net, double learning_rate = 5e-4, double beta1 = 0.9, double beta2 = 0.999,
                  double epsilon = 1e-8);

    void apply(QNetwork& net, const Gradients& grad);
    std::uint64_t steps() const noexcept { return t_; }

private:
    double lr_, b1_, b2_, eps_;
    std::uint64_t t_ = 0;
    Gradients m_, v_;
};

struct Transition {
    std::vector<double> state;
    int action = 0;
    double reward = 0.0;
    /// Empty when done.
    std::vector<double> next_state;
    bool done = false;
};

/// Bounded FIFO; index 0 is the oldest stored transition.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity);

    void push(Transition t);
    std::size_t size() const noexcept { return count_; }
    std::size_t capacity() const noexcept { return storage_.size(); }
    const Transition& at(std::size_t i) const;

    /// Uniform without replacement within the batch; requires batch <= size().
    std::vector<const Transition*> sample(std::size_t batch, Rng& rng) const;

private:
    std::vector<Transition> storage_;
    std::size_t head_ = 0;
    std::size_t count_ = 0;
};

/// Labelled environment over row-major feature states.
struct Environment {
    std::vector<std::vector<double>> states;
    std::vector<std::uint8_t> labels;
    double rho = 1.0;
    bool terminate_on_false_negative = true;

    static Environment from(const FeatureMatrix& features, std::span<const std::uint8_t> labels, double rho,
                            bool terminate_on_false_negative = true);
    std::size_t size() const noexcept { return states.size(); }
};

double reward_for(int action, std::uint8_t label, double rho);

struct StepResult {
    double reward = 0.0;
    /// Index of the next state; meaningful only when !done.
    std::size_t next = 0;
    bool done = false;
};

/// TP +1, FP -1, TN +rho, FN -rho. Done at the last index and, if enabled,
/// on a false negative.
StepResult env_step(const Environment& env, std::size_t t, int action);

/// Argmax with ties to action 0.
int greedy_action(std::span<const double> q);

int select_action(const QNetwork& net, std::span<const double> state, double epsilon, Rng& rng);

/// R if done, else R + gamma * Q_target(s', argmax_a Q_online(s', a)).
double td_target(const Transition& t, const QNetwork& online, const QNetwork& target, double gamma);

/// R if done, else R + gamma * max_a Q_target(s', a).
double dqn_target(const Transition& t, const QNetwork& target, double gamma);

/// One Adam step on the DDQN mean squared TD error; returns the loss.
/// Throws NonFiniteLoss before touching the weights.
double train_step(QNetwork& online, const QNetwork& target, std::span<const Transition* const> batch, double gamma,
                  Adam& optimizer);

void sync_target(const QNetwork& online, QNetwork& target);

struct AgentConfig {
    double gamma = 0.95;
    double epsilon_start = 1.0;
    double epsilon_decay = 0.995;
    double epsilon_min = 0.01;
    double learning_rate = 5e-4;
    std::size_t batch_size = 64;
    std::size_t buffer_capacity = 100000;
    std::size_t target_sync_every = 500;
    std::size_t episodes = 50;
    std::vector<std::size_t> hidden = {96, 64};
    bool terminate_on_false_negative = true;
    std::uint64_t seed = 1;
};

void validate(const AgentConfig& config);

/// epsilon_k = max(epsilon_min, epsilon_start * decay^k).
double epsilon_at(const AgentConfig& config, std::size_t episode);

struct EpisodeLog {
    std::size_t episode = 0;
    double cum_reward = 0.0;
    double epsilon = 0.0;
    double gmean = 0.0;
    std::size_t steps = 0;
};

class Agent {
public:
    Agent(std::size_t input_dim, const AgentConfig& config);

    const QNetwork& online() const noexcept { return online_; }
    const QNetwork& target() const noexcept { return target_; }
    const ReplayBuffer& buffer() const noexcept { return buffer_; }
    std::uint64_t gradient_steps() const noexcept { return grad_steps_; }
    const AgentConfig& config() const noexcept { return config_; }

    int act(std::span<const double> state, double epsilon);

    /// Stores the transition and, once the buffer holds a batch, performs one
    /// gradient step (syncing the target every target_sync_every steps).
    /// Returns the loss, or a negative value when no step was taken.
    double observe(Transition t);

    /// Runs one episode from `start` until done; returns the index the next
    /// episode starts from (wrapping to 0 after the end of data).
    std::size_t run_episode(const Environment& env, std::size_t start, double epsilon, EpisodeLog& log);

private:
    AgentConfig config_;
    QNetwork online_;
    QNetwork target_;
    Adam adam_;
    ReplayBuffer buffer_;
    Rng policy_rng_;
    Rng replay_rng_;
    std::uint64_t grad_steps_ = 0;
};

struct TrainResult {
    QNetwork network;
    std::vector<EpisodeLog> log;
    double rho = 1.0;
};

/// Episodes tile the chronological sequence: each starts where the previous
/// one ended. G-mean in the log is the greedy policy's on `eval` (the
/// training slice when eval is empty).
TrainResult train(const FeatureMatrix& features, std::span<const std::uint8_t> labels, const AgentConfig& config,
                  const FeatureMatrix* eval_features = nullptr, std::span<const std::uint8_t> eval_labels = {});

std::vector<std::uint8_t> predict(const QNetwork& net, const FeatureMatrix& features);

void write_training_log(std::ostream& out, const std::vector<EpisodeLog>& log);

std::string to_json(const QNetwork& net);
QNetwork from_json(const std::string& text);

}  // namespace cavar::ddqn
