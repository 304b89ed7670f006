#include <algorithm>
#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "cavar/ddqn.hpp"
#include "cavar/error.hpp"
#include "cavar/metrics.hpp"
#include "cavar/simulate.hpp"

namespace cavar::ddqn {
namespace {

std::vector<double> random_state(Rng& rng, std::size_t d) {
    std::vector<double> s(d);
    for (double& x : s) x = rng.uniform();
    return s;
}

Environment tiny_env(std::vector<std::uint8_t> labels, double rho, bool terminate = true) {
    Environment env;
    for (std::size_t i = 0; i < labels.size(); ++i) env.states.push_back({static_cast<double>(i)});
    env.labels = std::move(labels);
    env.rho = rho;
    env.terminate_on_false_negative = terminate;
    return env;
}

TEST(Environment, Rewards) {
    const Environment env = tiny_env({1, 0, 1, 0}, 0.355);
    EXPECT_EQ(env_step(env, 0, 1).reward, 1.0);
    EXPECT_EQ(env_step(env, 1, 0).reward, 0.355);
    EXPECT_EQ(env_step(env, 1, 1).reward, -1.0);
    const StepResult fn = env_step(env, 2, 0);
    EXPECT_EQ(fn.reward, -0.355);
    EXPECT_TRUE(fn.done);
    EXPECT_FALSE(env_step(tiny_env({1, 0, 1, 0}, 0.355, false), 2, 0).done);
    EXPECT_TRUE(env_step(env, 3, 0).done);
    EXPECT_EQ(env_step(env, 1, 0).next, 2u);
    EXPECT_THROW(env_step(env, 4, 0), Error);
}

TEST(Environment, RewardClosure) {
    Rng rng(3, "test.closure");
    const double rho = 0.27;
    for (int k = 0; k < 1000; ++k) {
        const double r = reward_for(static_cast<int>(rng.below(2)), static_cast<std::uint8_t>(rng.below(2)), rho);
        ASSERT_TRUE(r == 1.0 || r == -1.0 || r == rho || r == -rho);
    }
}

QNetwork with_output_bias(double q0, double q1) {
    QNetwork net = QNetwork::zeros({2, 3, 2});
    net.layers().back().biases = {q0, q1};
    return net;
}

TEST(Policy, GreedyAndTies) {
    Rng rng(1, "test.policy");
    const std::vector<double> s{0.3, 0.4};
    EXPECT_EQ(select_action(with_output_bias(0.2, 0.9), s, 0.0, rng), 1);
    EXPECT_EQ(select_action(with_output_bias(0.5, 0.5), s, 0.0, rng), 0);
}

TEST(Policy, UniformWhenFullyExploring) {
    Rng rng(2, "test.explore");
    const QNetwork net = with_output_bias(0.0, 10.0);
    const std::vector<double> s{0.1, 0.2};
    int ones = 0;
    for (int i = 0; i < 10000; ++i) ones += select_action(net, s, 1.0, rng);
    EXPECT_NEAR(ones / 10000.0, 0.5, 0.02);
}

TEST(Targets, TerminalAndHandComputed) {
    const QNetwork any = with_output_bias(0.0, 0.0);
    Transition done{{0.1, 0.2}, 0, -1.0, {}, true};
    EXPECT_EQ(td_target(done, any, any, 0.95), -1.0);

    const QNetwork online = with_output_bias(0.0, 1.0);
    const QNetwork target = with_output_bias(5.0, 2.0);
    const Transition t{{0.1, 0.2}, 1, 1.0, {0.3, 0.4}, false};
    EXPECT_NEAR(td_target(t, online, target, 0.95), 2.9, 1e-15);
    EXPECT_NEAR(dqn_target(t, target, 0.95), 1.0 + 0.95 * 5.0, 1e-15);
}

TEST(Targets, ReduceToDqnWhenNetworksMatch) {
    Rng rng(4, "test.targets");
    const QNetwork net({3, 8, 2}, rng);
    for (int k = 0; k < 1000; ++k) {
        Transition t{random_state(rng, 3), static_cast<int>(rng.below(2)), rng.normal(), random_state(rng, 3),
                     rng.uniform() < 0.1};
        if (t.done) t.next_state.clear();
        ASSERT_EQ(td_target(t, net, net, 0.95), dqn_target(t, net, 0.95));
    }
}

TEST(Targets, DoubleEstimatorDoesNotExceedMax) {
    Rng rng(5, "test.double");
    QNetwork online({4, 16, 2}, rng);
    const QNetwork target({4, 16, 2}, rng);
    Adam adam(online, 1e-2);
    std::vector<Transition> pool;
    for (int i = 0; i < 256; ++i) {
        pool.push_back({random_state(rng, 4), static_cast<int>(rng.below(2)), rng.normal(), random_state(rng, 4), false});
    }
    for (int step = 0; step < 50; ++step) {
        std::vector<const Transition*> batch;
        for (int i = 0; i < 32; ++i) batch.push_back(&pool[rng.below(pool.size())]);
        train_step(online, target, batch, 0.95, adam);
    }
    double ddqn_gap = 0.0, dqn_gap = 0.0;
    for (int k = 0; k < 1000; ++k) {
        const Transition t{random_state(rng, 4), 0, 0.0, random_state(rng, 4), false};
        const auto q = online.forward(t.next_state);
        const double qmax = std::max(q[0], q[1]);
        const double dd = td_target(t, online, target, 1.0);
        const double dq = dqn_target(t, target, 1.0);
        ASSERT_LE(dd, dq);
        ddqn_gap += qmax - dd;
        dqn_gap += qmax - dq;
    }
    EXPECT_GE(ddqn_gap, dqn_gap);
}

TEST(Network, ShapeAndZeroNet) {
    Rng rng(6, "test.net");
    const QNetwork net({3, 4, 3, 2}, rng);
    EXPECT_EQ(net.parameter_count(), 3u * 4 + 4 + 4 * 3 + 3 + 3 * 2 + 2);
    for (const Layer& l : net.layers()) {
        const double limit = std::sqrt(6.0 / static_cast<double>(l.in));
        for (double w : l.weights) ASSERT_LE(std::fabs(w), limit);
        for (double b : l.biases) ASSERT_EQ(b, 0.0);
    }
    EXPECT_THROW(QNetwork({3, 4, 3}, rng), Error);

    FeatureMatrix m;
    m.names = {"a", "b", "c"};
    m.columns = {{0.1, 0.9}, {0.5, 0.5}, {0.2, 0.7}};
    EXPECT_EQ(predict(QNetwork::zeros({3, 4, 2}), m), (std::vector<std::uint8_t>{0, 0}));
}

TEST(Gradient, MatchesCentralDifferences) {
    Rng rng(7, "test.gradient");
    QNetwork net({3, 4, 3, 2}, rng);
    for (Layer& l : net.layers()) {
        for (double& b : l.biases) b = 0.1 * rng.normal();
    }
    std::vector<std::vector<double>> states;
    std::vector<int> actions;
    std::vector<double> targets;
    for (int i = 0; i < 6; ++i) {
        states.push_back({rng.normal(), rng.normal(), rng.normal()});
        actions.push_back(static_cast<int>(rng.below(2)));
        targets.push_back(rng.normal());
    }
    Gradients g = Gradients::like(net);
    mse_loss_and_gradient(net, states, actions, targets, g);

    const double h = 1e-5;
    auto loss_at = [&](QNetwork& n) {
        Gradients scratch = Gradients::like(n);
        return mse_loss_and_gradient(n, states, actions, targets, scratch);
    };
    auto check = [&](double& param, double analytic) {
        const double saved = param;
        param = saved + h;
        const double up = loss_at(net);
        param = saved - h;
        const double down = loss_at(net);
        param = saved;
        const double numeric = (up - down) / (2 * h);
        const double scale = std::max({std::fabs(numeric), std::fabs(analytic), 1e-6});
        EXPECT_LE(std::fabs(numeric - analytic) / scale, 1e-4) << numeric << " vs " << analytic;
    };
    for (std::size_t l = 0; l < net.layers().size(); ++l) {
        for (std::size_t i = 0; i < net.layers()[l].weights.size(); ++i) check(net.layers()[l].weights[i], g.weights[l][i]);
        for (std::size_t i = 0; i < net.layers()[l].biases.size(); ++i) check(net.layers()[l].biases[i], g.biases[l][i]);
    }
}

TEST(TrainStep, FixedPointLeavesWeights) {
    Rng rng(8, "test.fixed");
    QNetwork online({3, 5, 2}, rng);
    const QNetwork target = online;
    std::vector<Transition> ts;
    for (int i = 0; i < 8; ++i) {
        Transition t{random_state(rng, 3), static_cast<int>(rng.below(2)), 0.0, {}, true};
        t.reward = online.forward(t.state)[static_cast<std::size_t>(t.action)];
        ts.push_back(t);
    }
    std::vector<const Transition*> batch;
    for (const auto& t : ts) batch.push_back(&t);
    const QNetwork before = online;
    Adam adam(online);
    EXPECT_NEAR(train_step(online, target, batch, 0.95, adam), 0.0, 1e-24);
    for (std::size_t l = 0; l < online.layers().size(); ++l) {
        for (std::size_t i = 0; i < online.layers()[l].weights.size(); ++i) {
            EXPECT_NEAR(online.layers()[l].weights[i], before.layers()[l].weights[i], 1e-6);
        }
    }
}

TEST(TrainStep, SingleTransitionDescends) {
    Rng rng(9, "test.descend");
    QNetwork online({3, 6, 2}, rng);
    const QNetwork target = online;
    const Transition t{{0.2, 0.5, 0.9}, 1, 3.0, {}, true};
    const std::vector<const Transition*> batch{&t};
    Adam adam(online, 1e-3);
    const double before = std::fabs(online.forward(t.state)[1] - 3.0);
    train_step(online, target, batch, 0.95, adam);
    EXPECT_LT(std::fabs(online.forward(t.state)[1] - 3.0), before);
}

TEST(TrainStep, NonFiniteLossLeavesWeights) {
    Rng rng(10, "test.nan");
    QNetwork online({2, 3, 2}, rng);
    const QNetwork target = online;
    const QNetwork before = online;
    const Transition t{{0.1, 0.2}, 0, NAN, {}, true};
    const std::vector<const Transition*> batch{&t};
    Adam adam(online);
    try {
        train_step(online, target, batch, 0.95, adam);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NonFiniteLoss);
    }
    EXPECT_EQ(online, before);
    EXPECT_EQ(adam.steps(), 0u);
}

TEST(Sync, BitIdenticalForward) {
    Rng rng(11, "test.sync");
    const QNetwork online({3, 7, 2}, rng);
    QNetwork target({3, 7, 2}, rng);
    sync_target(online, target);
    for (int k = 0; k < 100; ++k) {
        const auto s = random_state(rng, 3);
        ASSERT_EQ(online.forward(s), target.forward(s));
        const Transition t{s, 0, 0.5, random_state(rng, 3), false};
        ASSERT_EQ(td_target(t, online, target, 0.9), dqn_target(t, target, 0.9));
    }
}

TEST(Sync, CadenceHonoured) {
    AgentConfig cfg;
    cfg.hidden = {8};
    cfg.learning_rate = 1e-2;
    Agent agent(2, cfg);
    Rng rng(12, "test.cadence");
    auto transition = [&] {
        return Transition{random_state(rng, 2), static_cast<int>(rng.below(2)), rng.normal(), random_state(rng, 2), false};
    };
    while (agent.gradient_steps() < cfg.target_sync_every - 1) agent.observe(transition());
    EXPECT_NE(agent.online(), agent.target());
    const QNetwork stale = agent.target();
    agent.observe(transition());
    EXPECT_EQ(agent.gradient_steps(), cfg.target_sync_every);
    EXPECT_EQ(agent.online(), agent.target());
    EXPECT_NE(agent.target(), stale);
    agent.observe(transition());
    EXPECT_NE(agent.online(), agent.target());
}

TEST(Replay, FifoAndCapacity) {
    ReplayBuffer buf(3);
    for (int i = 0; i < 5; ++i) {
        buf.push({{static_cast<double>(i)}, 0, 0.0, {}, true});
        EXPECT_LE(buf.size(), 3u);
    }
    EXPECT_EQ(buf.size(), 3u);
    EXPECT_EQ(buf.at(0).state[0], 2.0);
    EXPECT_EQ(buf.at(2).state[0], 4.0);
    Rng rng(1, "test.replay");
    const auto s = buf.sample(3, rng);
    std::vector<double> seen;
    for (const Transition* t : s) seen.push_back(t->state[0]);
    std::sort(seen.begin(), seen.end());
    EXPECT_EQ(seen, (std::vector<double>{2, 3, 4}));
    EXPECT_THROW(buf.sample(4, rng), Error);
}

TEST(Schedule, EpsilonExact) {
    AgentConfig cfg;
    for (std::size_t k = 0; k < 2000; ++k) {
        ASSERT_EQ(epsilon_at(cfg, k), std::max(0.01, std::pow(0.995, static_cast<double>(k))));
    }
}

simulate::Blobs separable(double imbalance, std::uint64_t seed) {
    // Means at +-(1, 1) with sigma 0.3: each lies sqrt(2)/0.3 standard deviations from the origin.
    return simulate::simulate_blobs(imbalance, 2000, std::sqrt(2.0) / 0.3, seed, 0.3);
}

TEST(Train, ImbalancedSeparableTask) {
    int passed = 0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const simulate::Blobs b = separable(10.0, seed);
        AgentConfig cfg;
        cfg.seed = seed;
        const TrainResult r = train(b.features, b.labels, cfg);
        ASSERT_EQ(r.log.size(), 50u);
        for (std::size_t k = 0; k < r.log.size(); ++k) ASSERT_EQ(r.log[k].epsilon, epsilon_at(cfg, k));
        const auto pred = predict(r.network, b.features);
        const double g = metrics::scores(metrics::confusion(pred, b.labels)).g_mean;
        EXPECT_NEAR(g, r.log.back().gmean, 1e-9);
        if (g >= 0.85) ++passed;
    }
    EXPECT_GE(passed, 4);
}

TEST(Train, BalancedTaskAccuracy) {
    const simulate::Blobs b = separable(1.0, 3);
    const TrainResult r = train(b.features, b.labels, {});
    EXPECT_DOUBLE_EQ(r.rho, 1.0);
    EXPECT_GE(metrics::scores(metrics::confusion(predict(r.network, b.features), b.labels)).accuracy, 0.9);
}

TEST(Train, IdenticalWeightTrajectories) {
    const simulate::Blobs b = simulate::simulate_blobs(5.0, 600, 2.0, 4);
    AgentConfig cfg;
    cfg.hidden = {16, 8};
    cfg.seed = 21;
    const Environment env = Environment::from(b.features, b.labels, 0.2, true);
    Agent a(2, cfg), c(2, cfg);
    std::size_t ca = 0, cc = 0;
    for (std::size_t k = 0; k < 15; ++k) {
        EpisodeLog la, lc;
        ca = a.run_episode(env, ca, epsilon_at(cfg, k), la);
        cc = c.run_episode(env, cc, epsilon_at(cfg, k), lc);
        ASSERT_EQ(ca, cc);
        ASSERT_EQ(la.cum_reward, lc.cum_reward);
        ASSERT_EQ(a.online(), c.online());
        ASSERT_EQ(a.target(), c.target());
    }
    EXPECT_GT(a.gradient_steps(), 0u);
    const TrainResult r1 = train(b.features, b.labels, cfg);
    const TrainResult r2 = train(b.features, b.labels, cfg);
    EXPECT_EQ(r1.network, r2.network);
    cfg.seed = 22;
    EXPECT_NE(train(b.features, b.labels, cfg).network, r1.network);
}

TEST(Train, EpisodesTileTheData) {
    const Environment env = tiny_env({0, 0, 1, 0, 0}, 0.25);
    AgentConfig cfg;
    cfg.hidden = {4};
    Agent agent(1, cfg);
    std::size_t cursor = 0;
    std::size_t total = 0;
    for (int k = 0; k < 6; ++k) {
        EpisodeLog log;
        const std::size_t next = agent.run_episode(env, cursor, 1.0, log);
        total += log.steps;
        EXPECT_EQ(next, (cursor + log.steps) % env.size());
        cursor = next;
    }
    EXPECT_GE(total, 6u);
}

TEST(Persistence, JsonRoundTrip) {
    Rng rng(13, "test.json");
    const QNetwork net({3, 5, 4, 2}, rng);
    const QNetwork back = from_json(to_json(net));
    EXPECT_EQ(back, net);
    try {
        from_json("{\"format\":\"other\"}");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ParseError);
    }
    EXPECT_THROW(from_json("not json"), Error);
}

TEST(Persistence, TrainingLogCsv) {
    std::ostringstream out;
    write_training_log(out, {{0, 1.5, 1.0, 0.25, 10}});
    EXPECT_EQ(out.str().substr(0, out.str().find('\n')), "episode,cum_reward,epsilon,gmean");
}

TEST(Config, Validation) {
    AgentConfig cfg;
    cfg.gamma = 1.0;
    EXPECT_THROW(validate(cfg), Error);
    cfg = {};
    cfg.batch_size = 0;
    EXPECT_THROW(validate(cfg), Error);
    cfg = {};
    cfg.batch_size = 200;
    cfg.buffer_capacity = 100;
    EXPECT_THROW(validate(cfg), Error);
}

}  // namespace
}  // namespace cavar::ddqn
