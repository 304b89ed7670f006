#include "cavar/ddqn.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <nlohmann/json.hpp>

#include "cavar/csv.hpp"
#include "cavar/error.hpp"
#include "cavar/labeling.hpp"
#include "cavar/metrics.hpp"

namespace cavar::ddqn {

namespace {

constexpr const char* kWeightsFormat = "cavar-qnetwork";
constexpr int kWeightsVersion = 1;

void check_widths(const std::vector<std::size_t>& widths) {
    if (widths.size() < 2 || widths.back() != 2) {
        fail(ErrorCode::InvalidParams, "QNetwork: widths must start with the input size and end with 2 outputs");
    }
    for (std::size_t w : widths) {
        if (w == 0) fail(ErrorCode::InvalidParams, "QNetwork: zero-width layer");
    }
}

// Per-layer pre-activations and activations of one forward pass.
struct Trace {
    std::vector<std::vector<double>> z;
    std::vector<std::vector<double>> a;
};

void forward_traced(const QNetwork& net, std::span<const double> x, Trace& trace) {
    const auto& layers = net.layers();
    trace.z.resize(layers.size());
    trace.a.resize(layers.size() + 1);
    trace.a[0].assign(x.begin(), x.end());
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const Layer& layer = layers[l];
        const std::vector<double>& in = trace.a[l];
        std::vector<double>& z = trace.z[l];
        z.resize(layer.out);
        for (std::size_t o = 0; o < layer.out; ++o) {
            const double* w = layer.weights.data() + o * layer.in;
            double s = layer.biases[o];
            for (std::size_t i = 0; i < layer.in; ++i) s += w[i] * in[i];
            z[o] = s;
        }
        std::vector<double>& a = trace.a[l + 1];
        a = z;
        if (l + 1 < layers.size()) {
            for (double& v : a) v = v > 0.0 ? v : 0.0;
        }
    }
}

void check_state(const QNetwork& net, std::span<const double> state) {
    if (state.size() != net.input_dim()) {
        fail(ErrorCode::LengthMismatch, "QNetwork: state has " + std::to_string(state.size()) +
                                            " features, network expects " + std::to_string(net.input_dim()));
    }
}

}  // namespace

QNetwork::QNetwork(std::vector<std::size_t> widths, Rng& rng) : widths_(std::move(widths)) {
    check_widths(widths_);
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
        Layer layer;
        layer.in = widths_[l];
        layer.out = widths_[l + 1];
        const double limit = std::sqrt(6.0 / static_cast<double>(layer.in));
        layer.weights.resize(layer.in * layer.out);
        for (double& w : layer.weights) w = limit * (2.0 * rng.uniform() - 1.0);
        layer.biases.assign(layer.out, 0.0);
        layers_.push_back(std::move(layer));
    }
}

QNetwork QNetwork::zeros(std::vector<std::size_t> widths) {
    Rng unused(0, "ddqn.zeros");
    QNetwork net(std::move(widths), unused);
    for (Layer& layer : net.layers_) std::fill(layer.weights.begin(), layer.weights.end(), 0.0);
    return net;
}

std::vector<double> QNetwork::forward(std::span<const double> state) const {
    check_state(*this, state);
    std::vector<double> cur(state.begin(), state.end());
    std::vector<double> next;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const Layer& layer = layers_[l];
        next.assign(layer.out, 0.0);
        for (std::size_t o = 0; o < layer.out; ++o) {
            const double* w = layer.weights.data() + o * layer.in;
            double s = layer.biases[o];
            for (std::size_t i = 0; i < layer.in; ++i) s += w[i] * cur[i];
            next[o] = (l + 1 < layers_.size() && s < 0.0) ? 0.0 : s;
        }
        cur.swap(next);
    }
    return cur;
}

std::size_t QNetwork::parameter_count() const noexcept {
    std::size_t n = 0;
    for (const Layer& layer : layers_) n += layer.weights.size() + layer.biases.size();
    return n;
}

Gradients Gradients::like(const QNetwork& net) {
    Gradients g;
    for (const Layer& layer : net.layers()) {
        g.weights.emplace_back(layer.weights.size(), 0.0);
        g.biases.emplace_back(layer.biases.size(), 0.0);
    }
    return g;
}

double mse_loss_and_gradient(const QNetwork& net, std::span<const std::vector<double>> states,
                             std::span<const int> actions, std::span<const double> targets, Gradients& grad) {
    if (states.size() != actions.size() || states.size() != targets.size() || states.empty()) {
        fail(ErrorCode::LengthMismatch, "mse_loss_and_gradient: batch arrays must be non-empty and aligned");
    }
    grad = Gradients::like(net);
    const auto& layers = net.layers();
    const double scale = 1.0 / static_cast<double>(states.size());
    double loss = 0.0;
    Trace trace;
    std::vector<double> delta, prev;
    for (std::size_t k = 0; k < states.size(); ++k) {
        check_state(net, states[k]);
        forward_traced(net, states[k], trace);
        const auto a = static_cast<std::size_t>(actions[k]);
        const double err = trace.a.back()[a] - targets[k];
        loss += err * err * scale;

        delta.assign(layers.back().out, 0.0);
        delta[a] = 2.0 * err * scale;
        for (std::size_t l = layers.size(); l-- > 0;) {
            const Layer& layer = layers[l];
            const std::vector<double>& in = trace.a[l];
            std::vector<double>& gw = grad.weights[l];
            std::vector<double>& gb = grad.biases[l];
            for (std::size_t o = 0; o < layer.out; ++o) {
                const double d = delta[o];
                if (d == 0.0) continue;
                gb[o] += d;
                double* row = gw.data() + o * layer.in;
                for (std::size_t i = 0; i < layer.in; ++i) row[i] += d * in[i];
            }
            if (l == 0) break;
            prev.assign(layer.in, 0.0);
            for (std::size_t o = 0; o < layer.out; ++o) {
                const double d = delta[o];
                if (d == 0.0) continue;
                const double* w = layer.weights.data() + o * layer.in;
                for (std::size_t i = 0; i < layer.in; ++i) prev[i] += w[i] * d;
            }
            const std::vector<double>& z = trace.z[l - 1];
            for (std::size_t i = 0; i < layer.in; ++i) {
                if (!(z[i] > 0.0)) prev[i] = 0.0;
            }
            delta.swap(prev);
        }
    }
    return loss;
}

Adam::Adam(const QNetwork& net, double learning_rate, double beta1, double beta2, double epsilon)
    : lr_(learning_rate), b1_(beta1), b2_(beta2), eps_(epsilon), m_(Gradients::like(net)), v_(Gradients::like(net)) {
    if (!(learning_rate > 0.0) || !(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) ||
        !(epsilon > 0.0)) {
        fail(ErrorCode::InvalidParams, "Adam: invalid hyperparameters");
    }
}

void Adam::apply(QNetwork& net, const Gradients& grad) {
    ++t_;
    const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
    auto update = [&](std::vector<double>& p, const std::vector<double>& g, std::vector<double>& m,
                      std::vector<double>& v) {
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = b1_ * m[i] + (1.0 - b1_) * g[i];
            v[i] = b2_ * v[i] + (1.0 - b2_) * g[i] * g[i];
            p[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
        }
    };
    auto& layers = net.layers();
    for (std::size_t l = 0; l < layers.size(); ++l) {
        update(layers[l].weights, grad.weights[l], m_.weights[l], v_.weights[l]);
        update(layers[l].biases, grad.biases[l], m_.biases[l], v_.biases[l]);
    }
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : storage_(capacity) {
    if (capacity == 0) fail(ErrorCode::InvalidParams, "ReplayBuffer: capacity must be positive");
}

void ReplayBuffer::push(Transition t) {
    storage_[head_] = std::move(t);
    head_ = (head_ + 1) % storage_.size();
    count_ = std::min(count_ + 1, storage_.size());
}

const Transition& ReplayBuffer::at(std::size_t i) const {
    if (i >= count_) fail(ErrorCode::IndexOutOfRange, "ReplayBuffer::at: index out of range");
    const std::size_t oldest = count_ < storage_.size() ? 0 : head_;
    return storage_[(oldest + i) % storage_.size()];
}

std::vector<const Transition*> ReplayBuffer::sample(std::size_t batch, Rng& rng) const {
    if (batch > count_) fail(ErrorCode::InvalidParams, "ReplayBuffer::sample: batch larger than buffer");
    // Floyd's algorithm: distinct indices, each subset equally likely.
    std::vector<std::size_t> chosen;
    chosen.reserve(batch);
    for (std::size_t j = count_ - batch; j < count_; ++j) {
        const auto t = static_cast<std::size_t>(rng.below(j + 1));
        const bool seen = std::find(chosen.begin(), chosen.end(), t) != chosen.end();
        chosen.push_back(seen ? j : t);
    }
    std::vector<const Transition*> out;
    out.reserve(batch);
    for (std::size_t i : chosen) out.push_back(&at(i));
    return out;
}

Environment Environment::from(const FeatureMatrix& features, std::span<const std::uint8_t> labels, double rho,
                              bool terminate_on_false_negative) {
    if (features.rows() != labels.size()) {
        fail(ErrorCode::LengthMismatch, "Environment: features and labels differ in length");
    }
    Environment env;
    env.rho = rho;
    env.terminate_on_false_negative = terminate_on_false_negative;
    env.labels.assign(labels.begin(), labels.end());
    env.states.reserve(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        env.states.push_back(features.row(i));
        for (double v : env.states.back()) {
            if (!std::isfinite(v)) fail(ErrorCode::NonFinite, "Environment: non-finite feature value");
        }
    }
    return env;
}

double reward_for(int action, std::uint8_t label, double rho) {
    if (action == 1) return label ? 1.0 : -1.0;
    return label ? -rho : rho;
}

StepResult env_step(const Environment& env, std::size_t t, int action) {
    if (t >= env.size()) fail(ErrorCode::IndexOutOfRange, "env_step: t beyond the end of the episode data");
    StepResult r;
    const std::uint8_t y = env.labels[t];
    r.reward = reward_for(action, y, env.rho);
    const bool false_negative = action == 0 && y == 1;
    r.done = t + 1 == env.size() || (env.terminate_on_false_negative && false_negative);
    r.next = r.done ? t : t + 1;
    return r;
}

int greedy_action(std::span<const double> q) { return q[1] > q[0] ? 1 : 0; }

int select_action(const QNetwork& net, std::span<const double> state, double epsilon, Rng& rng) {
    if (rng.uniform() < epsilon) return static_cast<int>(rng.below(2));
    return greedy_action(net.forward(state));
}

double td_target(const Transition& t, const QNetwork& online, const QNetwork& target, double gamma) {
    if (t.done) return t.reward;
    const int next_action = greedy_action(online.forward(t.next_state));
    return t.reward + gamma * target.forward(t.next_state)[static_cast<std::size_t>(next_action)];
}

double dqn_target(const Transition& t, const QNetwork& target, double gamma) {
    if (t.done) return t.reward;
    const std::vector<double> q = target.forward(t.next_state);
    return t.reward + gamma * std::max(q[0], q[1]);
}

double train_step(QNetwork& online, const QNetwork& target, std::span<const Transition* const> batch, double gamma,
                  Adam& optimizer) {
    std::vector<std::vector<double>> states;
    std::vector<int> actions;
    std::vector<double> targets;
    states.reserve(batch.size());
    for (const Transition* t : batch) {
        states.push_back(t->state);
        actions.push_back(t->action);
        targets.push_back(td_target(*t, online, target, gamma));
    }
    Gradients grad;
    const double loss = mse_loss_and_gradient(online, states, actions, targets, grad);
    if (!std::isfinite(loss)) {
        fail(ErrorCode::NonFiniteLoss, "train_step: loss is not finite at optimizer step " +
                                           std::to_string(optimizer.steps() + 1));
    }
    optimizer.apply(online, grad);
    return loss;
}

void sync_target(const QNetwork& online, QNetwork& target) {
    if (online.widths() != target.widths()) {
        fail(ErrorCode::InvalidParams, "sync_target: networks have different architectures");
    }
    target = online;
}

void validate(const AgentConfig& c) {
    const bool ok = c.gamma >= 0.0 && c.gamma < 1.0 && c.epsilon_min >= 0.0 && c.epsilon_min <= c.epsilon_start &&
                    c.epsilon_start <= 1.0 && c.epsilon_decay > 0.0 && c.epsilon_decay <= 1.0 &&
                    c.learning_rate > 0.0 && c.batch_size > 0 && c.buffer_capacity >= c.batch_size &&
                    c.target_sync_every > 0 && c.episodes > 0;
    if (!ok) fail(ErrorCode::InvalidParams, "AgentConfig: hyperparameters out of range");
    for (std::size_t h : c.hidden) {
        if (h == 0) fail(ErrorCode::InvalidParams, "AgentConfig: zero hidden width");
    }
}

double epsilon_at(const AgentConfig& config, std::size_t episode) {
    return std::max(config.epsilon_min, config.epsilon_start * std::pow(config.epsilon_decay, static_cast<double>(episode)));
}

namespace {

QNetwork initial_network(std::size_t input_dim, const AgentConfig& config) {
    validate(config);
    std::vector<std::size_t> widths{input_dim};
    widths.insert(widths.end(), config.hidden.begin(), config.hidden.end());
    widths.push_back(2);
    Rng rng(config.seed, "ddqn.init");
    return QNetwork(std::move(widths), rng);
}

}  // namespace

Agent::Agent(std::size_t input_dim, const AgentConfig& config)
    : config_(config),
      online_(initial_network(input_dim, config)),
      target_(online_),
      adam_(online_, config.learning_rate),
      buffer_(config.buffer_capacity),
      policy_rng_(config.seed, "ddqn.policy"),
      replay_rng_(config.seed, "ddqn.replay") {}

int Agent::act(std::span<const double> state, double epsilon) {
    return select_action(online_, state, epsilon, policy_rng_);
}

double Agent::observe(Transition t) {
    buffer_.push(std::move(t));
    if (buffer_.size() < config_.batch_size) return -1.0;
    const std::vector<const Transition*> batch = buffer_.sample(config_.batch_size, replay_rng_);
    const double loss = train_step(online_, target_, batch, config_.gamma, adam_);
    ++grad_steps_;
    if (grad_steps_ % config_.target_sync_every == 0) sync_target(online_, target_);
    return loss;
}

std::size_t Agent::run_episode(const Environment& env, std::size_t start, double epsilon, EpisodeLog& log) {
    if (start >= env.size()) fail(ErrorCode::IndexOutOfRange, "run_episode: start beyond the data");
    std::size_t t = start;
    for (;;) {
        const std::vector<double>& s = env.states[t];
        const int a = act(s, epsilon);
        const StepResult step = env_step(env, t, a);
        Transition tr{s, a, step.reward, step.done ? std::vector<double>{} : env.states[step.next], step.done};
        observe(std::move(tr));
        log.cum_reward += step.reward;
        ++log.steps;
        if (step.done) return t + 1 >= env.size() ? 0 : t + 1;
        t = step.next;
    }
}

std::vector<std::uint8_t> predict(const QNetwork& net, const FeatureMatrix& features) {
    std::vector<std::uint8_t> out(features.rows());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = static_cast<std::uint8_t>(greedy_action(net.forward(features.row(i))));
    }
    return out;
}

TrainResult train(const FeatureMatrix& features, std::span<const std::uint8_t> labels, const AgentConfig& config,
                  const FeatureMatrix* eval_features, std::span<const std::uint8_t> eval_labels) {
    validate(config);
    const labeling::ClassRatio ratio = labeling::class_ratio(labels);
    const Environment env = Environment::from(features, labels, ratio.rho, config.terminate_on_false_negative);
    const FeatureMatrix& eval_x = eval_features ? *eval_features : features;
    const std::span<const std::uint8_t> eval_y = eval_features ? eval_labels : labels;
    if (eval_x.rows() != eval_y.size()) {
        fail(ErrorCode::LengthMismatch, "train: evaluation features and labels differ in length");
    }

    Agent agent(features.cols(), config);
    TrainResult result;
    result.rho = ratio.rho;
    std::size_t cursor = 0;
    for (std::size_t k = 0; k < config.episodes; ++k) {
        EpisodeLog log;
        log.episode = k;
        log.epsilon = epsilon_at(config, k);
        cursor = agent.run_episode(env, cursor, log.epsilon, log);
        const std::vector<std::uint8_t> pred = predict(agent.online(), eval_x);
        log.gmean = metrics::scores(metrics::confusion(pred, eval_y)).g_mean;
        result.log.push_back(log);
    }
    result.network = agent.online();
    return result;
}

void write_training_log(std::ostream& out, const std::vector<EpisodeLog>& log) {
    csv::write_row(out, {"episode", "cum_reward", "epsilon", "gmean"});
    for (const EpisodeLog& e : log) {
        csv::write_row(out, {std::to_string(e.episode), csv::format_double(e.cum_reward),
                             csv::format_double(e.epsilon), csv::format_double(e.gmean)});
    }
}

std::string to_json(const QNetwork& net) {
    nlohmann::json j;
    j["format"] = kWeightsFormat;
    j["version"] = kWeightsVersion;
    j["widths"] = net.widths();
    nlohmann::json layers = nlohmann::json::array();
    for (const Layer& layer : net.layers()) {
        layers.push_back({{"weights", layer.weights}, {"biases", layer.biases}});
    }
    j["layers"] = std::move(layers);
    return j.dump();
}

QNetwork from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::ParseError, std::string("QNetwork JSON: ") + e.what());
    }
    try {
        if (j.at("format").get<std::string>() != kWeightsFormat || j.at("version").get<int>() != kWeightsVersion) {
            fail(ErrorCode::ParseError, "QNetwork JSON: unsupported format or version");
        }
        QNetwork net = QNetwork::zeros(j.at("widths").get<std::vector<std::size_t>>());
        const nlohmann::json& layers = j.at("layers");
        if (layers.size() != net.layers().size()) fail(ErrorCode::ParseError, "QNetwork JSON: layer count mismatch");
        for (std::size_t l = 0; l < layers.size(); ++l) {
            Layer& layer = net.layers()[l];
            auto w = layers[l].at("weights").get<std::vector<double>>();
            auto b = layers[l].at("biases").get<std::vector<double>>();
            if (w.size() != layer.weights.size() || b.size() != layer.biases.size()) {
                fail(ErrorCode::ParseError, "QNetwork JSON: layer " + std::to_string(l) + " has the wrong shape");
            }
            layer.weights = std::move(w);
            layer.biases = std::move(b);
        }
        return net;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::ParseError, std::string("QNetwork JSON: ") + e.what());
    }
}

}  // namespace cavar::ddqn
