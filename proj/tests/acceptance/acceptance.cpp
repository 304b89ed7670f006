// Runs the ten acceptance checks and prints one PASS/FAIL line per check.
// Exit status is non-zero when any check fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <unistd.h>

#include "cavar/adjust.hpp"
#include "cavar/backtest.hpp"
#include "cavar/config.hpp"
#include "cavar/ddqn.hpp"
#include "cavar/error.hpp"
#include "cavar/evt.hpp"
#include "cavar/garch.hpp"
#include "cavar/metrics.hpp"
#include "cavar/pipeline.hpp"
#include "cavar/rng.hpp"
#include "cavar/simulate.hpp"

namespace {

using namespace cavar;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << " [failed: " << what << "]";
        }
    }
};

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

void garch_recovery(Outcome& out) {
    const garch::Params truth{0.0, 1e-6, 0.08, 0.90, 0.0, 0.0};
    int hits = 0;
    double slowest = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto path = simulate::simulate_garch(truth, {}, 5000, seed);
        const auto start = Clock::now();
        const garch::GarchFit fit = garch::fit_mle(path.returns.values, {});
        slowest = std::max(slowest, seconds_since(start));
        if (std::fabs(fit.params.alpha1 - 0.08) <= 0.05 && std::fabs(fit.params.beta1 - 0.90) <= 0.05) ++hits;
    }
    const garch::Params gjr_truth{0.0, 1e-6, 0.05, 0.88, 0.10, 0.0};
    const garch::Spec gjr{garch::Model::GJR, garch::InnovationKind::Normal};
    int gamma_hits = 0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto path = simulate::simulate_garch(gjr_truth, gjr, 5000, 100 + seed);
        const auto start = Clock::now();
        const garch::GarchFit fit = garch::fit_mle(path.returns.values, gjr);
        slowest = std::max(slowest, seconds_since(start));
        if (fit.params.gamma > 0.0 && std::fabs(fit.params.gamma - 0.10) <= 0.06) ++gamma_hits;
    }
    out.detail << "GARCH alpha1/beta1 within 0.05 in " << hits << "/5; GJR gamma within 0.06 in " << gamma_hits
               << "/5; slowest fit " << slowest << " s";
    out.require(hits >= 4, "GARCH recovery");
    out.require(gamma_hits >= 4, "GJR gamma recovery");
    out.require(slowest < 10.0, "fit time");
}

void var_coverage(Outcome& out) {
    const garch::Params truth{0.0, 1e-6, 0.08, 0.90, 0.0, 0.0};
    bool rates_ok = true;
    int kupiec_ok = 0;
    out.detail << "true-parameter violation rates";
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto path = simulate::simulate_garch(truth, {}, 5000, 200 + seed);
        const auto& r = path.returns.values;
        const auto true_var = garch::var_from_sigma(path.sigma, 0.0, garch::Innovation::normal(), 0.05).values;
        const double rate = static_cast<double>(backtest::count_violations(r, true_var).x) / static_cast<double>(r.size());
        out.detail << " " << rate;
        rates_ok = rates_ok && rate >= 0.040 && rate <= 0.060;
        const garch::GarchFit fit = garch::fit_mle(r, {});
        const auto fitted = garch::var_forecast(fit, 0.05).values;
        const auto v = backtest::count_violations(r, fitted);
        if (backtest::kupiec_pof(v.x, v.n, 0.05).decision == backtest::Decision::AcceptH0) ++kupiec_ok;
    }
    out.detail << "; fitted VaR passes Kupiec in " << kupiec_ok << "/5";
    out.require(rates_ok, "violation rate in [0.040, 0.060]");
    out.require(kupiec_ok >= 4, "Kupiec on fitted VaR");
}

void backtest_exactness(Outcome& out) {
    const backtest::TestResult k = backtest::kupiec_pof(50, 1000, 0.05);
    out.require(std::fabs(k.statistic) < 1e-12 && k.decision == backtest::Decision::AcceptH0, "Kupiec at x/n = alpha");

    Rng rng(3, "acceptance.cc");
    double worst = 0.0;
    for (int s = 0; s < 200; ++s) {
        std::vector<std::uint8_t> hits(250 + rng.below(750));
        const double p = 0.01 + 0.2 * rng.uniform();
        for (auto& h : hits) h = rng.uniform() < p ? 1 : 0;
        const double cc = backtest::christoffersen_cc(hits, 0.05).statistic;
        const double uc = backtest::kupiec_pof(std::count(hits.begin(), hits.end(), 1), hits.size(), 0.05).statistic;
        const double ind = backtest::christoffersen_independence(hits).statistic;
        worst = std::max(worst, std::fabs(cc - (uc + ind)));
    }
    std::vector<std::uint8_t> some(100, 0);
    some[10] = some[40] = some[41] = 1;
    const double c1 = backtest::kupiec_pof(3, 100, 0.05).critical_value;
    const double c2 = backtest::christoffersen_cc(some, 0.05).critical_value;
    out.detail << "LR at nominal rate " << k.statistic << "; max |cc - uc - ind| " << worst << "; criticals " << c1
               << ", " << c2;
    out.require(worst <= 1e-12, "cc additivity");
    out.require(std::fabs(c1 - 3.8415) <= 1e-3, "df 1 critical value");
    out.require(std::fabs(c2 - 5.9915) <= 1e-3, "df 2 critical value");
}

void exact_rank_test(Outcome& out) {
    const std::vector<double> a{1, 2, 3, 4, 5, 6, 7, 8};
    std::vector<double> b;
    for (double x : a) b.push_back(x + 10.0 + 0.1 * x);
    const auto all_neg = backtest::wilcoxon_signed_rank(a, b, backtest::Alternative::Less);

    // Differences ranked 1..8 with ranks 1, 3 and 4 positive give W+ = 8.
    const std::vector<double> d{1, -2, 3, 4, -5, -6, -7, -8};
    const auto eight = backtest::wilcoxon_signed_rank(d, std::vector<double>(8, 0.0), backtest::Alternative::Less);
    out.detail << "all-negative p " << all_neg.p_value << "; W+ = " << eight.statistic << " p " << eight.p_value;
    out.require(all_neg.exact && all_neg.p_value == 0.00390625, "all-negative p value");
    out.require(eight.exact && std::fabs(eight.p_value - 0.0976) <= 5e-4, "W+ = 8 tail probability");
}

void gradient_check(Outcome& out) {
    Rng rng(7, "acceptance.gradient");
    ddqn::QNetwork net({3, 8, 2}, rng);
    for (ddqn::Layer& l : net.layers()) {
        for (double& bias : l.biases) bias = 0.1 * rng.normal();
    }
    std::vector<std::vector<double>> states;
    std::vector<int> actions;
    std::vector<double> targets;
    for (int i = 0; i < 8; ++i) {
        states.push_back({rng.normal(), rng.normal(), rng.normal()});
        actions.push_back(static_cast<int>(rng.below(2)));
        targets.push_back(rng.normal());
    }
    ddqn::Gradients g = ddqn::Gradients::like(net);
    ddqn::mse_loss_and_gradient(net, states, actions, targets, g);
    const double h = 1e-5;
    double worst = 0.0;
    auto check = [&](double& param, double analytic) {
        const double saved = param;
        ddqn::Gradients scratch = ddqn::Gradients::like(net);
        param = saved + h;
        const double up = ddqn::mse_loss_and_gradient(net, states, actions, targets, scratch);
        param = saved - h;
        const double down = ddqn::mse_loss_and_gradient(net, states, actions, targets, scratch);
        param = saved;
        const double numeric = (up - down) / (2 * h);
        worst = std::max(worst, std::fabs(numeric - analytic) / std::max({std::fabs(numeric), std::fabs(analytic), 1e-6}));
    };
    for (std::size_t l = 0; l < net.layers().size(); ++l) {
        for (std::size_t i = 0; i < net.layers()[l].weights.size(); ++i) check(net.layers()[l].weights[i], g.weights[l][i]);
        for (std::size_t i = 0; i < net.layers()[l].biases.size(); ++i) check(net.layers()[l].biases[i], g.biases[l][i]);
    }
    out.detail << "; gradient max relative error " << worst;
    out.require(worst <= 1e-4, "gradient check");
}

void ddqn_learning(Outcome& out) {
    const auto start = Clock::now();
    int hits = 0;
    out.detail << "G-mean per seed";
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const simulate::Blobs blobs = simulate::simulate_blobs(10.0, 2000, 2.0, seed);
        ddqn::AgentConfig cfg;
        cfg.seed = seed;
        const ddqn::TrainResult r = ddqn::train(blobs.features, blobs.labels, cfg);
        const auto pred = ddqn::predict(r.network, blobs.features);
        const double g = metrics::scores(metrics::confusion(pred, blobs.labels)).g_mean;
        out.detail << " " << g;
        out.require(r.log.size() <= 50, "episode budget");
        if (g >= 0.85) ++hits;
    }
    const double elapsed = seconds_since(start);
    out.detail << "; " << hits << "/5 reach 0.85 in " << elapsed << " s";
    out.require(hits >= 4, "G-mean in 4/5 seeds");
    out.require(elapsed < 300.0, "runtime");
    gradient_check(out);
}

void ddqn_mechanics(Outcome& out) {
    Rng rng(4, "acceptance.targets");
    const ddqn::QNetwork net({3, 8, 2}, rng);
    std::size_t equal = 0;
    for (int k = 0; k < 1000; ++k) {
        ddqn::Transition t{{rng.uniform(), rng.uniform(), rng.uniform()},
                           static_cast<int>(rng.below(2)),
                           rng.normal(),
                           {rng.uniform(), rng.uniform(), rng.uniform()},
                           rng.uniform() < 0.1};
        if (t.done) t.next_state.clear();
        if (ddqn::td_target(t, net, net, 0.95) == ddqn::dqn_target(t, net, 0.95)) ++equal;
    }
    ddqn::AgentConfig cfg;
    bool schedule = true;
    for (std::size_t k = 0; k < 2000; ++k) {
        schedule = schedule && ddqn::epsilon_at(cfg, k) == std::max(0.01, std::pow(0.995, static_cast<double>(k)));
    }

    const simulate::Blobs blobs = simulate::simulate_blobs(5.0, 600, 2.0, 4);
    cfg.hidden = {16, 8};
    cfg.episodes = 15;
    cfg.seed = 21;
    const auto env = ddqn::Environment::from(blobs.features, blobs.labels, 0.2, true);
    ddqn::Agent a(2, cfg), c(2, cfg);
    std::size_t ca = 0, cc = 0;
    bool same = true;
    for (std::size_t k = 0; k < cfg.episodes && same; ++k) {
        ddqn::EpisodeLog la, lc;
        ca = a.run_episode(env, ca, ddqn::epsilon_at(cfg, k), la);
        cc = c.run_episode(env, cc, ddqn::epsilon_at(cfg, k), lc);
        same = ca == cc && la.cum_reward == lc.cum_reward && a.online() == c.online() && a.target() == c.target();
    }
    same = same && ddqn::train(blobs.features, blobs.labels, cfg).network ==
                       ddqn::train(blobs.features, blobs.labels, cfg).network;
    out.detail << "DDQN = DQN on " << equal << "/1000 transitions; epsilon schedule "
               << (schedule ? "exact" : "mismatch") << "; trajectories " << (same ? "identical" : "differ");
    out.require(equal == 1000, "target equality");
    out.require(schedule, "epsilon schedule");
    out.require(same, "determinism");
}

void adjusted_var_benefit(Outcome& out) {
    int better = 0;
    out.detail << "cc unadjusted -> adjusted";
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto path = simulate::simulate_regime_switch(0.005, 0.02, 0.05, 5000, seed);
        const std::span<const double> all(path.returns.values);
        const std::size_t half = all.size() / 2;
        const garch::GarchFit fit = garch::fit_mle(all.subspan(0, half), {});
        const auto sigma = garch::filter_volatility(all, {}, fit.params);
        const auto var = garch::var_from_sigma(sigma, fit.params.mu, garch::Innovation::normal(), 0.05).values;
        const std::vector<double> r(all.begin() + half, all.end());
        const std::vector<double> base(var.begin() + half, var.end());
        const std::vector<std::uint8_t> oracle(path.regimes.begin() + half, path.regimes.end());

        const adjust::GridResult g = adjust::grid_search_calibrate(r, base, oracle, {});
        const auto adjusted = adjust::adjust_var(base, oracle, g.best).values;
        const auto hb = backtest::count_violations(r, base);
        const auto ha = backtest::count_violations(r, adjusted);
        const double cc_base = backtest::christoffersen_cc(hb.hits, 0.05).statistic;
        const double cc_adj = backtest::christoffersen_cc(ha.hits, 0.05).statistic;
        const double expected = 0.05 * static_cast<double>(r.size());
        const bool ok = cc_adj < cc_base && std::fabs(ha.x - expected) <= std::fabs(hb.x - expected);
        out.detail << " " << cc_base << "->" << cc_adj << " (x " << hb.x << "->" << ha.x << ")";
        if (ok) ++better;
    }
    out.detail << "; improved in " << better << "/5";
    out.require(better >= 4, "adjusted series improves cc without worsening coverage");

    const std::vector<double> base{-0.02, -0.031, -0.015, -0.04, -0.025};
    const std::vector<std::uint8_t> pred{0, 1, 1, 0, 1};
    const auto adj = adjust::adjust_var(base, pred, {0.30, 0.20});
    bool homogeneous = true;
    for (std::size_t i = 0; i < base.size(); ++i) {
        const double kappa = pred[i] ? 1.20 : 0.70;
        homogeneous = homogeneous && adj.multipliers[i] == kappa && std::fabs(adj.values[i] - kappa * base[i]) <= 1e-15;
    }
    out.require(homogeneous, "homogeneity at (0.30, 0.20)");
}

void evt_checks(Outcome& out) {
    int xi_hits = 0, accepted = 0, rejected = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto x = simulate::simulate_gpd(0.01, 0.3, 500, seed);
        if (std::fabs(evt::fit_gpd_mle(x).params.xi - 0.3) <= 0.15) ++xi_hits;

        const auto y = simulate::simulate_gpd(0.01, 0.3, 200, 1000 + seed);
        evt::KsOptions ks;
        ks.seed = seed;
        if (evt::ks_test(y, evt::fit_gpd_mle(y).params, ks).p_value > 0.05) ++accepted;

        Rng rng(seed, "acceptance.uniform");
        std::vector<double> u(200);
        for (double& v : u) v = rng.uniform();
        if (evt::ks_test(u, {0.0, 0.5, 1.0}, ks).p_value < 0.05) ++rejected;
    }
    out.detail << "xi within 0.15 in " << xi_hits << "/20; KS accepts " << accepted << "/20 self-consistent, rejects "
               << rejected << "/20 mismatched";
    out.require(xi_hits >= 18, "shape recovery");
    out.require(accepted >= 18, "KS acceptance");
    out.require(rejected >= 18, "KS rejection");
}

void metric_consistency(Outcome& out) {
    const double f1 = metrics::f1_score(0.853, 0.540);
    Rng rng(9, "acceptance.scores");
    int violations = 0;
    for (int k = 0; k < 1000; ++k) {
        const metrics::ConfusionMatrix cm{rng.below(60), rng.below(60), rng.below(60), rng.below(60)};
        if (cm.tp + cm.fn == 0 || cm.tn + cm.fp == 0) continue;
        const metrics::Scores s = metrics::scores(cm);
        const bool ok = s.g_mean >= std::min(s.recall, s.specificity) - 1e-15 &&
                        s.g_mean <= std::max(s.recall, s.specificity) + 1e-15 && s.g_mean >= 0.0 && s.g_mean <= 1.0;
        if (!ok) ++violations;
    }
    out.detail << "f1 " << f1 << "; g-mean bound violations " << violations << "/1000";
    out.require(std::fabs(f1 - 0.661) <= 0.001, "f1");
    out.require(violations == 0, "g-mean bounds");
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void end_to_end(Outcome& out) {
    const fs::path root = fs::temp_directory_path() / ("cavar-acceptance-" + std::to_string(::getpid()));
    fs::remove_all(root);
    double slowest = 0.0;
    std::string reports[2];
    for (int i = 0; i < 2; ++i) {
        config::PipelineConfig cfg;
        cfg.seed = 7;
        cfg.output_dir = (root / ("run" + std::to_string(i))).string();
        const auto start = Clock::now();
        {
            pipeline::Runner runner(cfg);
            runner.run("all");
        }
        slowest = std::max(slowest, seconds_since(start));
        reports[i] = slurp(fs::path(cfg.output_dir) / "report.json");
    }
    fs::remove_all(root);
    const bool identical = !reports[0].empty() && reports[0] == reports[1];
    out.detail << "T = 5000, 50 episodes; report.json " << (identical ? "byte-identical" : "differs") << "; slowest run "
               << slowest << " s";
    out.require(identical, "determinism");
    out.require(slowest < 600.0, "runtime");
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria{
        {"GARCH recovery", garch_recovery},
        {"VaR coverage", var_coverage},
        {"Backtest exactness", backtest_exactness},
        {"Exact rank test", exact_rank_test},
        {"DDQN learning", ddqn_learning},
        {"DDQN mechanics", ddqn_mechanics},
        {"Adjusted-VaR benefit", adjusted_var_benefit},
        {"EVT", evt_checks},
        {"Metric consistency", metric_consistency},
        {"End-to-end determinism", end_to_end},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome out;
        const auto start = Clock::now();
        try {
            criteria[i].second(out);
        } catch (const std::exception& e) {
            out.require(false, std::string("exception: ") + e.what());
        }
        if (!out.pass) ++failures;
        std::printf("%s %2zu %s (%.1f s): %s\n", out.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                    seconds_since(start), out.detail.str().c_str());
        std::fflush(stdout);
    }
    return failures == 0 ? EXIT_SUCCESS : EXIT_FAILURE;
}
