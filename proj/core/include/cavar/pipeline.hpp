#pragma once

#include <chrono>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "cavar/config.hpp"
#include "cavar/error.hpp"

namespace cavar::pipeline {

/// Stage names in execution order (`simulate` runs first only when the data
/// source is the simulator).
const std::vector<std::string>& stage_names();
bool is_subcommand(const std::string& name);

/// A module error annotated with the stage that raised it.
class StageError : public Error {
public:
    StageError(std::string stage, const Error& cause, std::string context = {});

    const std::string& stage() const noexcept { return stage_; }
    const std::string& context() const noexcept { return context_; }

private:
    std::string stage_;
    std::string context_;
};

/// 2 config errors, 3 data errors, 4 numerical failures.
int exit_code(ErrorCode code);

/// {"stage", "code", "message", "context"} on one line.
std::string error_json(const std::string& stage, const Error& error, const std::string& context = {});

struct StageTiming {
    std::string stage;
    double seconds = 0.0;
};

class Runner {
public:
    /// Takes exclusive ownership of the output directory via a lock file.
    Runner(config::PipelineConfig config, std::ostream* log = nullptr);
    ~Runner();

    Runner(const Runner&) = delete;
    Runner& operator=(const Runner&) = delete;

    /// Runs one stage or "all"; rewrites manifest.json afterwards.
    void run(const std::string& subcommand);

    const std::filesystem::path& output_dir() const noexcept { return dir_; }
    const std::vector<StageTiming>& timings() const noexcept { return timings_; }

private:
    void run_stage(const std::string& stage);
    void note(const std::string& message) const;
    void write_manifest() const;

    void simulate();
    void ingest();
    void fit_garch();
    void label();
    void train_agent();
    void calibrate();
    void adjust();
    void backtest();
    void evt();
    void report();

    config::PipelineConfig config_;
    std::ostream* log_;
    std::filesystem::path dir_;
    std::filesystem::path lock_;
    std::vector<StageTiming> timings_;
};

}  // namespace cavar::pipeline
