#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "cavar/config.hpp"
#include "cavar/error.hpp"
#include "cavar/pipeline.hpp"
#include "cavar/version.hpp"

namespace {

constexpr const char* kConfigEnv = "CAVAR_CONFIG";

struct Options {
    std::string subcommand;
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out;
    bool quiet = false;
};

int report_error(const std::string& stage, const cavar::Error& e, const std::string& context) {
    std::cerr << cavar::pipeline::error_json(stage, e, context) << '\n';
    return cavar::pipeline::exit_code(e.code());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Classifier-adjusted Value-at-Risk pipeline"};
    app.set_version_flag("--version", std::string(cavar::version()));
    app.require_subcommand(1, 1);

    Options opt;
    app.add_option("--config", opt.config_path, std::string("Config file (default: $") + kConfigEnv + ")");
    app.add_option("--seed", opt.seed, "Override run.seed");
    app.add_option("--out", opt.out, "Override run.output");
    app.add_flag("--quiet", opt.quiet, "Suppress progress messages");

    const std::pair<const char*, const char*> commands[] = {
        {"simulate", "Generate a synthetic price series"},
        {"ingest", "Read prices, compute log returns and the chronological split"},
        {"fit-garch", "Fit GARCH / GJR-GARCH on the training window"},
        {"label", "Select the risk threshold, label returns, build features"},
        {"train-agent", "Train the double deep Q-network classifier"},
        {"calibrate", "Calibrate the VaR adjustment on the validation window"},
        {"adjust", "Apply the adjustment to every out-of-sample VaR series"},
        {"backtest", "Coverage, independence and rank tests"},
        {"evt", "Generalized Pareto fit and KS test of the exceedances"},
        {"report", "Collate report.json and plotting CSVs"},
        {"all", "Run every stage in order"},
    };
    for (const auto& [name, help] : commands) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->fallthrough();
        sub->callback([&opt, name = std::string(name)] { opt.subcommand = name; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        const cavar::Error err(cavar::ErrorCode::ConfigInvalid, e.what());
        return report_error("cli", err, "arguments");
    }

    if (opt.config_path.empty()) {
        if (const char* env = std::getenv(kConfigEnv); env && *env) opt.config_path = env;
    }

    cavar::config::PipelineConfig config;
    try {
        if (!opt.config_path.empty()) config = cavar::config::load(opt.config_path);
        if (opt.seed) config.seed = *opt.seed;
        if (!opt.out.empty()) config.output_dir = opt.out;
        cavar::config::validate(config);
    } catch (const cavar::Error& e) {
        return report_error("config", e, opt.config_path.empty() ? "defaults" : opt.config_path);
    }

    try {
        cavar::pipeline::Runner runner(config, opt.quiet ? nullptr : &std::clog);
        runner.run(opt.subcommand);
    } catch (const cavar::pipeline::StageError& e) {
        return report_error(e.stage(), e, e.context());
    } catch (const cavar::Error& e) {
        return report_error(opt.subcommand, e, "output=" + config.output_dir);
    } catch (const std::exception& e) {
        std::cerr << cavar::pipeline::error_json(opt.subcommand, cavar::Error(cavar::ErrorCode::Io, e.what()))
                  << '\n';
        return 3;
    }
    return 0;
}
