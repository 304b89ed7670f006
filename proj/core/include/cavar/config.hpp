#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cavar/adjust.hpp"
#include "cavar/ddqn.hpp"
#include "cavar/garch.hpp"
#include "cavar/labeling.hpp"
#include "cavar/timeseries.hpp"

namespace cavar::config {

enum class DataSource { File, Simulate };
enum class Generator { Garch, Gjr, Regime };

struct SimulateConfig {
    Generator generator = Generator::Garch;
    std::size_t length = 5000;
    double initial_price = 100.0;
    double mu = 2e-4;
    double alpha0 = 2e-6;
    double alpha1 = 0.08;
    double beta1 = 0.90;
    double gamma = 0.10;
    garch::InnovationKind innovation = garch::InnovationKind::Normal;
    double nu = 8.0;
    double low_vol = 0.005;
    double high_vol = 0.02;
    double switch_prob = 0.05;
};

struct PipelineConfig {
    DataSource data_source = DataSource::Simulate;
    std::string data_path;

    SimulateConfig simulate;

    std::vector<std::string> features = {"Return lag 1", "Return lag 2", "Return lag 3", "SMA 5", "SMA 15",
                                         "EMA 5",        "EMA 15",       "RSI 14",       "BB upper", "BB lower",
                                         "Signal 1",     "Signal 2",     "sig GARCH",    "VaR GARCH"};
    std::size_t bollinger_window = 20;
    SignalConfig signals;

    SplitSpec split;

    std::vector<garch::Model> models = {garch::Model::GARCH, garch::Model::GJR};
    garch::InnovationKind innovation = garch::InnovationKind::Normal;
    bool zero_mean = false;

    std::vector<double> alphas = {0.05, 0.01};

    labeling::ThresholdConfig threshold;
    garch::Model label_model = garch::Model::GARCH;

    ddqn::AgentConfig agent;

    double grid_step = 0.05;
    double grid_upper = 0.5;
    std::size_t grid_windows = 4;
    adjust::Objective grid_objective = adjust::Objective::ConditionalCoverage;
    bool mcmc = true;
    std::size_t mcmc_draws = 5000;
    double mcmc_proposal_sd = 0.03;

    std::size_t evt_n_mc = 2000;
    bool evt_fit_location = false;

    double test_level = 0.05;

    std::uint64_t seed = 1;
    std::string output_dir = "cavar-out";
};

/// Parses the sectioned key = value format (see docs/config.md). Unknown
/// sections or keys, duplicates, malformed values and values violating a
/// module invariant raise ConfigInvalid with the line number.
PipelineConfig parse(const std::string& text);
PipelineConfig load(const std::string& path);

/// Cross-field checks (also run by parse()).
void validate(const PipelineConfig& config);

/// Canonical "section.key = value" listing of every field, sorted.
std::string canonical(const PipelineConfig& config);

/// FNV-1a 64 of canonical(config), as 16 hex digits.
std::string hash(const PipelineConfig& config);

/// Feature name as used for the volatility / VaR extra columns of a model.
std::string sigma_feature(garch::Model model);
std::string var_feature(garch::Model model);

}  // namespace cavar::config
