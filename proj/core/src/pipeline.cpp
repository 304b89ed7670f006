#include "cavar/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cavar/adjust.hpp"
#include "cavar/backtest.hpp"
#include "cavar/csv.hpp"
#include "cavar/ddqn.hpp"
#include "cavar/evt.hpp"
#include "cavar/features.hpp"
#include "cavar/garch.hpp"
#include "cavar/labeling.hpp"
#include "cavar/metrics.hpp"
#include "cavar/rng.hpp"
#include "cavar/simulate.hpp"
#include "cavar/version.hpp"

namespace cavar::pipeline {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr const char* kLockName = ".cavar.lock";
constexpr Date kSimulationStart{std::chrono::year{2000}, std::chrono::January, std::chrono::day{3}};

const char* kSplitNames[] = {"train", "validation", "test"};

// ---------------------------------------------------------------- file io

void write_text(const fs::path& path, const std::string& text) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) fail(ErrorCode::Io, "cannot write " + tmp.string());
        out << text;
        if (!out) fail(ErrorCode::Io, "write failed for " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) fail(ErrorCode::Io, "cannot move " + tmp.string() + " into place: " + ec.message());
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::Io, "cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json read_json(const fs::path& path) {
    try {
        return json::parse(read_text(path));
    } catch (const json::exception& e) {
        fail(ErrorCode::ParseError, path.string() + ": " + e.what());
    }
}

class CsvWriter {
public:
    void row(const std::vector<std::string>& cells) { csv::write_row(out_, cells); }
    void save(const fs::path& path) const { write_text(path, out_.str()); }

private:
    std::ostringstream out_;
};

std::string num(double v) { return csv::format_double(v); }

std::string model_slug(garch::Model m) { return m == garch::Model::GARCH ? "garch" : "gjr"; }

std::string series_key(garch::Model m, double alpha) { return model_slug(m) + "_" + num(alpha); }

// ------------------------------------------------------------- artifacts

struct Artifacts {
    fs::path dir;

    fs::path at(const std::string& name) const { return dir / name; }

    fs::path require(const std::string& name, const std::string& producer) const {
        const fs::path p = dir / name;
        if (!fs::exists(p)) {
            fail(ErrorCode::MissingArtifact,
                 "missing artifact " + p.string() + " (produced by stage '" + producer + "')");
        }
        return p;
    }
};

std::size_t column_of(const csv::Table& t, const std::string& name, const fs::path& file) {
    const int c = t.column(name);
    if (c < 0) fail(ErrorCode::ParseError, file.string() + ": missing column '" + name + "'");
    return static_cast<std::size_t>(c);
}

std::vector<double> double_column(const csv::Table& t, const std::string& name, const fs::path& file) {
    const std::size_t c = column_of(t, name, file);
    std::vector<double> out;
    out.reserve(t.rows.size());
    for (const auto& row : t.rows) out.push_back(csv::parse_double(row.at(c)));
    return out;
}

std::vector<std::string> string_column(const csv::Table& t, const std::string& name, const fs::path& file) {
    const std::size_t c = column_of(t, name, file);
    std::vector<std::string> out;
    out.reserve(t.rows.size());
    for (const auto& row : t.rows) out.push_back(row.at(c));
    return out;
}

std::vector<std::size_t> index_column(const csv::Table& t, const fs::path& file) {
    const std::size_t c = column_of(t, "index", file);
    std::vector<std::size_t> out;
    out.reserve(t.rows.size());
    for (const auto& row : t.rows) out.push_back(static_cast<std::size_t>(csv::parse_int(row.at(c))));
    return out;
}

std::vector<std::uint8_t> flag_column(const csv::Table& t, const std::string& name, const fs::path& file) {
    std::vector<std::uint8_t> out;
    for (double v : double_column(t, name, file)) out.push_back(v != 0.0 ? 1 : 0);
    return out;
}

struct ReturnsData {
    ReturnSeries series;
    SplitBounds bounds;
};

const char* split_name(std::size_t t, const SplitBounds& b) {
    if (t < b.train.end) return kSplitNames[0];
    if (t < b.validation.end) return kSplitNames[1];
    return kSplitNames[2];
}

ReturnsData load_returns(const Artifacts& a) {
    const fs::path file = a.require("returns.csv", "ingest");
    const csv::Table t = csv::read_file(file.string());
    ReturnsData out;
    out.series.values = double_column(t, "return", file);
    for (const std::string& d : string_column(t, "date", file)) out.series.dates.push_back(parse_date(d));
    const std::vector<std::string> split = string_column(t, "split", file);
    const std::size_t n = split.size();
    const auto count = [&](const char* s) { return static_cast<std::size_t>(std::count(split.begin(), split.end(), s)); };
    const std::size_t n_train = count("train");
    const std::size_t n_val = count("validation");
    out.bounds.train = {0, n_train};
    out.bounds.validation = {n_train, n_train + n_val};
    out.bounds.test = {n_train + n_val, n};
    for (std::size_t i = 0; i < n; ++i) {
        if (split[i] != split_name(i, out.bounds)) fail(ErrorCode::ParseError, file.string() + ": splits are not contiguous");
    }
    return out;
}

struct ModelData {
    garch::Spec spec;
    garch::Params params;
    std::vector<double> sigma;

    std::vector<double> var(double alpha) const {
        return garch::var_from_sigma(sigma, params.mu, garch::innovation_of(spec, params), alpha).values;
    }
};

json params_json(const garch::Params& p) {
    return {{"mu", p.mu}, {"alpha0", p.alpha0}, {"alpha1", p.alpha1}, {"beta1", p.beta1}, {"gamma", p.gamma}, {"nu", p.nu}};
}

ModelData load_model(const Artifacts& a, garch::Model m) {
    const json j = read_json(a.require("garch_" + model_slug(m) + ".json", "fit-garch"));
    ModelData out;
    try {
        out.spec.model = garch::parse_model(j.at("model").get<std::string>());
        out.spec.innovation = garch::parse_innovation(j.at("innovation").get<std::string>());
        const json& p = j.at("params");
        out.params = {p.at("mu").get<double>(),     p.at("alpha0").get<double>(), p.at("alpha1").get<double>(),
                      p.at("beta1").get<double>(),  p.at("gamma").get<double>(),  p.at("nu").get<double>()};
    } catch (const json::exception& e) {
        fail(ErrorCode::ParseError, "garch_" + model_slug(m) + ".json: " + e.what());
    }
    const fs::path file = a.require("volatility_" + model_slug(m) + ".csv", "fit-garch");
    out.sigma = double_column(csv::read_file(file.string()), "sigma", file);
    return out;
}

struct Rows {
    std::vector<std::size_t> index;
    std::vector<std::string> split;
    std::vector<std::uint8_t> labels;

    std::vector<std::size_t> where(const std::string& s) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < split.size(); ++i) {
            if (split[i] == s) out.push_back(i);
        }
        return out;
    }
};

struct FeatureData {
    Rows rows;
    FeatureMatrix matrix;

    FeatureMatrix subset(const std::vector<std::size_t>& idx) const {
        FeatureMatrix m;
        m.names = matrix.names;
        for (std::size_t i : idx) m.dates.push_back(matrix.dates[i]);
        for (const auto& col : matrix.columns) {
            std::vector<double> v;
            v.reserve(idx.size());
            for (std::size_t i : idx) v.push_back(col[i]);
            m.columns.push_back(std::move(v));
        }
        return m;
    }
};

FeatureData load_features(const Artifacts& a) {
    const fs::path file = a.require("features.csv", "label");
    const csv::Table t = csv::read_file(file.string());
    FeatureData out;
    out.rows.index = index_column(t, file);
    out.rows.split = string_column(t, "split", file);
    out.rows.labels = flag_column(t, "risk_level", file);
    for (const std::string& d : string_column(t, "date", file)) out.matrix.dates.push_back(parse_date(d));
    for (const std::string& name : t.header) {
        if (name == "index" || name == "date" || name == "split" || name == "risk_level") continue;
        out.matrix.names.push_back(name);
        out.matrix.columns.push_back(double_column(t, name, file));
    }
    return out;
}

struct Predictions {
    Rows rows;
    std::vector<std::uint8_t> predicted;
};

Predictions load_predictions(const Artifacts& a) {
    const fs::path file = a.require("predictions.csv", "train-agent");
    const csv::Table t = csv::read_file(file.string());
    Predictions out;
    out.rows.index = index_column(t, file);
    out.rows.split = string_column(t, "split", file);
    out.rows.labels = flag_column(t, "risk_level", file);
    out.predicted = flag_column(t, "prediction", file);
    return out;
}

template <class T>
std::vector<T> pick(const std::vector<T>& v, const std::vector<std::size_t>& idx) {
    std::vector<T> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(v.at(i));
    return out;
}

json test_json(const backtest::TestResult& r) {
    return {{"name", r.name},
            {"statistic", r.statistic},
            {"df", r.df},
            {"critical_value", r.critical_value},
            {"p_value", r.p_value},
            {"level", r.level},
            {"tail", r.tail == backtest::Tail::Upper ? "upper" : "lower"},
            {"exact", r.exact},
            {"decision", backtest::to_string(r.decision)}};
}

json scores_json(const metrics::ConfusionMatrix& cm) {
    const metrics::Scores s = metrics::scores(cm);
    json undefined = json::array();
    if (s.precision_undefined) undefined.push_back("precision");
    if (s.recall_undefined) undefined.push_back("recall");
    if (s.specificity_undefined) undefined.push_back("specificity");
    if (s.f1_undefined) undefined.push_back("f1");
    return {{"confusion", {{"tp", cm.tp}, {"fp", cm.fp}, {"tn", cm.tn}, {"fn", cm.fn}}},
            {"accuracy", s.accuracy},
            {"precision", s.precision},
            {"recall", s.recall},
            {"specificity", s.specificity},
            {"f1", s.f1},
            {"g_mean", s.g_mean},
            {"undefined", undefined}};
}

struct Moments {
    double mean = 0.0, sd = 0.0, min = 0.0, max = 0.0;
};

Moments moments(const std::vector<double>& v) {
    Moments m;
    if (v.empty()) return m;
    m.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - m.mean) * (x - m.mean);
    m.sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    m.min = *lo;
    m.max = *hi;
    return m;
}

json moments_json(const Moments& m) { return {{"mean", m.mean}, {"std", m.sd}, {"min", m.min}, {"max", m.max}}; }

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const Moments mx = moments(x), my = moments(y);
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - mx.mean) * (y[i] - my.mean);
    const double denom = mx.sd * my.sd * static_cast<double>(x.size() - 1);
    return denom > 0.0 ? s / denom : 0.0;
}

std::string hex64(std::uint64_t h) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 0; i < 16; ++i) out[static_cast<std::size_t>(i)] = digits[(h >> (60 - 4 * i)) & 0xF];
    return out;
}

}  // namespace

// ------------------------------------------------------------------ public

const std::vector<std::string>& stage_names() {
    static const std::vector<std::string> names{"simulate", "ingest", "fit-garch", "label",    "train-agent",
                                                "calibrate", "adjust", "backtest",  "evt",      "report"};
    return names;
}

bool is_subcommand(const std::string& name) {
    const auto& s = stage_names();
    return name == "all" || std::find(s.begin(), s.end(), name) != s.end();
}

StageError::StageError(std::string stage, const Error& cause, std::string context)
    : Error(cause.code(), cause.what()), stage_(std::move(stage)), context_(std::move(context)) {}

int exit_code(ErrorCode code) {
    switch (code) {
        case ErrorCode::ConfigInvalid:
        case ErrorCode::InvalidParams:
            return 2;
        case ErrorCode::NonFinite:
        case ErrorCode::ConvergenceFailure:
        case ErrorCode::DomainError:
        case ErrorCode::NonFiniteLoss:
        case ErrorCode::DegenerateChain:
            return 4;
        default:
            return 3;
    }
}

std::string error_json(const std::string& stage, const Error& error, const std::string& context) {
    json j{{"stage", stage}, {"code", std::string(to_string(error.code()))}, {"message", error.what()}, {"context", context}};
    return j.dump();
}

Runner::Runner(config::PipelineConfig config, std::ostream* log)
    : config_(std::move(config)), log_(log), dir_(config_.output_dir) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) fail(ErrorCode::Io, "cannot create output directory " + dir_.string() + ": " + ec.message());
    lock_ = dir_ / kLockName;
    std::FILE* f = std::fopen(lock_.string().c_str(), "wx");
    if (!f) {
        const fs::path held = lock_;
        lock_.clear();
        fail(ErrorCode::Io, "output directory is locked by another run (remove " + held.string() + " if stale)");
    }
    std::fputs(config::hash(config_).c_str(), f);
    std::fclose(f);
}

Runner::~Runner() {
    if (!lock_.empty()) {
        std::error_code ec;
        fs::remove(lock_, ec);
    }
}

void Runner::note(const std::string& message) const {
    if (log_) *log_ << "[cavar] " << message << '\n';
}

void Runner::run(const std::string& subcommand) {
    if (!is_subcommand(subcommand)) fail(ErrorCode::ConfigInvalid, "unknown subcommand '" + subcommand + "'");
    if (subcommand == "all") {
        for (const std::string& s : stage_names()) {
            if (s == "simulate" && config_.data_source != config::DataSource::Simulate) continue;
            run_stage(s);
        }
    } else {
        run_stage(subcommand);
    }
    write_manifest();
}

void Runner::run_stage(const std::string& stage) {
    const auto start = std::chrono::steady_clock::now();
    note(stage + ": start");
    try {
        if (stage == "simulate") simulate();
        else if (stage == "ingest") ingest();
        else if (stage == "fit-garch") fit_garch();
        else if (stage == "label") label();
        else if (stage == "train-agent") train_agent();
        else if (stage == "calibrate") calibrate();
        else if (stage == "adjust") adjust();
        else if (stage == "backtest") backtest();
        else if (stage == "evt") evt();
        else if (stage == "report") report();
    } catch (const StageError&) {
        throw;
    } catch (const Error& e) {
        throw StageError(stage, e, "output=" + dir_.string());
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    timings_.push_back({stage, seconds});
    note(stage + ": done in " + num(std::round(seconds * 1000.0) / 1000.0) + " s");
}

void Runner::write_manifest() const {
    json files = json::array();
    std::vector<fs::path> paths;
    for (const auto& entry : fs::directory_iterator(dir_)) {
        if (!entry.is_regular_file()) continue;
        const std::string name = entry.path().filename().string();
        if (name == kLockName || name == "manifest.json") continue;
        paths.push_back(entry.path());
    }
    std::sort(paths.begin(), paths.end());
    for (const fs::path& p : paths) {
        files.push_back({{"path", p.filename().string()},
                         {"bytes", fs::file_size(p)},
                         {"fnv1a64", hex64(fnv1a64(read_text(p)))}});
    }
    json stages = json::array();
    for (const StageTiming& t : timings_) stages.push_back({{"stage", t.stage}, {"wall_seconds", t.seconds}});
    const json manifest{{"config_hash", config::hash(config_)},
                        {"seed", config_.seed},
                        {"versions",
                         {{"cavar", std::string(version())},
                          {"report_format", 1},
                          {"weights_format", 1}}},
                        {"stages", stages},
                        {"files", files}};
    write_json(dir_ / "manifest.json", manifest);
}

// --------------------------------------------------------------- stages

void Runner::simulate() {
    const config::SimulateConfig& s = config_.simulate;
    std::vector<double> returns;
    CsvWriter truth;
    if (s.generator == config::Generator::Regime) {
        const simulate::RegimePath path =
            simulate::simulate_regime_switch(s.low_vol, s.high_vol, s.switch_prob, s.length, config_.seed);
        returns = path.returns.values;
        truth.row({"index", "sigma", "regime"});
        for (std::size_t t = 0; t < returns.size(); ++t) {
            truth.row({std::to_string(t), num(path.sigma[t]), std::to_string(path.regimes[t])});
        }
    } else {
        const bool gjr = s.generator == config::Generator::Gjr;
        const garch::Spec spec{gjr ? garch::Model::GJR : garch::Model::GARCH, s.innovation};
        const garch::Params params{s.mu, s.alpha0, s.alpha1, s.beta1, gjr ? s.gamma : 0.0, s.nu};
        const simulate::GarchPath path = simulate::simulate_garch(params, spec, s.length, config_.seed);
        returns = path.returns.values;
        truth.row({"index", "sigma"});
        for (std::size_t t = 0; t < returns.size(); ++t) truth.row({std::to_string(t), num(path.sigma[t])});
    }
    const PriceSeries prices = simulate::prices_from_returns(returns, s.initial_price, kSimulationStart);
    std::ostringstream out;
    write_price_csv(out, prices);
    write_text(dir_ / "simulated_prices.csv", out.str());
    truth.save(dir_ / "simulated_truth.csv");
    note("simulate: " + std::to_string(returns.size()) + " returns");
}

void Runner::ingest() {
    const Artifacts a{dir_};
    const fs::path source = config_.data_source == config::DataSource::File
                                ? fs::path(config_.data_path)
                                : a.require("simulated_prices.csv", "simulate");
    if (!fs::exists(source)) fail(ErrorCode::MissingArtifact, "price file " + source.string() + " does not exist");
    const PriceSeries prices = read_price_csv_file(source.string());
    prices.validate();
    const ReturnSeries returns = compute_log_returns(prices);
    const SplitBounds bounds = split_bounds(returns.size(), config_.split);

    std::ostringstream price_out;
    write_price_csv(price_out, prices);
    write_text(a.at("prices.csv"), price_out.str());

    CsvWriter w;
    w.row({"index", "date", "return", "split"});
    for (std::size_t t = 0; t < returns.size(); ++t) {
        w.row({std::to_string(t), format_date(returns.dates[t]), num(returns.values[t]), split_name(t, bounds)});
    }
    w.save(a.at("returns.csv"));

    json splits = json::object();
    const IndexRange ranges[] = {bounds.train, bounds.validation, bounds.test};
    for (int k = 0; k < 3; ++k) {
        const ReturnSeries part = returns.slice(ranges[k]);
        splits[kSplitNames[k]] = {{"begin", ranges[k].begin},
                                  {"end", ranges[k].end},
                                  {"first_date", format_date(part.dates.front())},
                                  {"last_date", format_date(part.dates.back())},
                                  {"returns", moments_json(moments(part.values))}};
    }
    write_json(a.at("ingest.json"), {{"source", config_.data_source == config::DataSource::File ? "file" : "simulate"},
                                     {"prices", prices.size()},
                                     {"returns", returns.size()},
                                     {"close", moments_json(moments(prices.close))},
                                     {"log_returns", moments_json(moments(returns.values))},
                                     {"splits", splits}});
    note("ingest: " + std::to_string(returns.size()) + " returns, train " + std::to_string(bounds.train.size()) +
         ", validation " + std::to_string(bounds.validation.size()) + ", test " + std::to_string(bounds.test.size()));
}

void Runner::fit_garch() {
    const Artifacts a{dir_};
    const ReturnsData data = load_returns(a);
    const std::span<const double> all(data.series.values);
    const std::span<const double> train = all.subspan(0, data.bounds.train.end);
    garch::FitOptions options;
    options.zero_mean = config_.zero_mean;

    for (garch::Model m : config_.models) {
        const garch::Spec spec{m, config_.innovation};
        const garch::GarchFit fit = garch::fit_mle(train, spec, options);
        const double train_mean = std::accumulate(train.begin(), train.end(), 0.0) / static_cast<double>(train.size());
        double train_var = 0.0;
        for (double r : train) train_var += (r - train_mean) * (r - train_mean);
        train_var /= static_cast<double>(train.size() - 1);
        const std::vector<double> sigma = garch::filter_volatility(all, spec, fit.params, train_var);

        write_json(a.at("garch_" + model_slug(m) + ".json"),
                   {{"model", garch::to_string(m)},
                    {"innovation", garch::to_string(config_.innovation)},
                    {"params", params_json(fit.params)},
                    {"loglik", fit.loglik},
                    {"converged", fit.converged},
                    {"iterations", fit.iterations},
                    {"start_logliks", fit.start_logliks},
                    {"warnings", fit.warnings},
                    {"train_observations", train.size()}});

        const garch::Innovation innovation = garch::innovation_of(spec, fit.params);
        std::vector<std::vector<double>> vars;
        std::vector<std::string> header{"index", "date", "split", "sigma"};
        for (double alpha : config_.alphas) {
            vars.push_back(garch::var_from_sigma(sigma, fit.params.mu, innovation, alpha).values);
            header.push_back("var_" + num(alpha));
        }
        for (double alpha : config_.alphas) {
            vars.push_back(garch::es_from_sigma(sigma, fit.params.mu, innovation, alpha));
            header.push_back("es_" + num(alpha));
        }
        CsvWriter w;
        w.row(header);
        for (std::size_t t = 0; t < all.size(); ++t) {
            std::vector<std::string> row{std::to_string(t), format_date(data.series.dates[t]), split_name(t, data.bounds),
                                         num(sigma[t])};
            for (const auto& v : vars) row.push_back(num(v[t]));
            w.row(row);
        }
        w.save(a.at("volatility_" + model_slug(m) + ".csv"));
        note("fit-garch: " + garch::to_string(m) + " loglik " + num(fit.loglik) +
             (fit.converged ? "" : " (not converged)"));
    }
}

void Runner::label() {
    const Artifacts a{dir_};
    const ReturnsData data = load_returns(a);
    const PriceSeries prices = read_price_csv_file(a.require("prices.csv", "ingest").string());
    const ReturnSeries& returns = data.series;
    const std::size_t n = returns.size();

    std::vector<features::ExtraColumn> extra;
    ModelData label_model;
    for (garch::Model m : config_.models) {
        ModelData md = load_model(a, m);
        if (md.sigma.size() != n) fail(ErrorCode::LengthMismatch, "volatility file does not match returns.csv");
        extra.push_back({config::sigma_feature(m), md.sigma});
        extra.push_back({config::var_feature(m), md.var(config_.threshold.alpha)});
        if (m == config_.label_model) label_model = std::move(md);
    }

    const std::size_t train_end = data.bounds.train.end;
    const std::vector<double> label_var = label_model.var(config_.threshold.alpha);
    const double threshold = labeling::select_threshold(std::span(returns.values).subspan(0, train_end),
                                                        std::span(label_var).subspan(0, train_end), config_.threshold);
    const labeling::RiskLabelSeries labels = labeling::label_returns(returns.values, threshold);

    features::FeatureOptions fopt;
    fopt.bollinger_window = config_.bollinger_window;
    fopt.signals = config_.signals;
    const features::FeatureSet fs_raw = features::build_features(prices, returns, config_.features, extra, fopt);
    const std::size_t first = fs_raw.first_row;
    if (first + 2 > train_end) fail(ErrorCode::TooShort, "label: feature warm-up consumes the training window");
    const Normalized norm = minmax_normalize(fs_raw.matrix, {0, train_end - first});
    for (const std::string& d : norm.dropped) note("label: dropped constant feature '" + d + "'");
    if (norm.matrix.cols() == 0) fail(ErrorCode::ConstantColumn, "label: every feature is constant on the training window");

    const std::vector<std::uint8_t> train_labels(labels.labels.begin() + static_cast<std::ptrdiff_t>(first),
                                                 labels.labels.begin() + static_cast<std::ptrdiff_t>(train_end));
    const labeling::ClassRatio ratio = labeling::class_ratio(train_labels);

    CsvWriter w;
    std::vector<std::string> header{"index", "date", "split"};
    header.insert(header.end(), norm.matrix.names.begin(), norm.matrix.names.end());
    header.push_back("risk_level");
    w.row(header);
    json counts = json::object();
    std::map<std::string, std::pair<std::size_t, std::size_t>> tally;
    for (std::size_t i = 0; i < norm.matrix.rows(); ++i) {
        const std::size_t t = first + i;
        std::vector<std::string> row{std::to_string(t), format_date(returns.dates[t]), split_name(t, data.bounds)};
        for (const auto& col : norm.matrix.columns) row.push_back(num(col[i]));
        row.push_back(std::to_string(labels.labels[t]));
        w.row(row);
        auto& c = tally[split_name(t, data.bounds)];
        (labels.labels[t] ? c.second : c.first) += 1;
    }
    w.save(a.at("features.csv"));
    for (const char* s : kSplitNames) counts[s] = {{"low_risk", tally[s].first}, {"high_risk", tally[s].second}};

    json scales = json::array();
    for (const ColumnScale& sc : norm.scales) scales.push_back({{"name", sc.name}, {"min", sc.min}, {"max", sc.max}});
    write_json(a.at("labels.json"), {{"threshold", threshold},
                                     {"model", garch::to_string(config_.label_model)},
                                     {"alpha", config_.threshold.alpha},
                                     {"horizon", config_.threshold.horizon},
                                     {"rho", ratio.rho},
                                     {"minority", ratio.minority},
                                     {"majority", ratio.majority},
                                     {"first_row", first},
                                     {"counts", counts},
                                     {"scales", scales},
                                     {"dropped", norm.dropped},
                                     {"clamp_count", norm.clamp_count}});
    note("label: threshold " + num(threshold) + ", rho " + num(ratio.rho));
}

void Runner::train_agent() {
    const Artifacts a{dir_};
    const FeatureData data = load_features(a);
    const std::vector<std::size_t> train_idx = data.rows.where("train");
    const std::vector<std::size_t> val_idx = data.rows.where("validation");
    const FeatureMatrix train_x = data.subset(train_idx);
    const std::vector<std::uint8_t> train_y = pick(data.rows.labels, train_idx);
    const FeatureMatrix val_x = data.subset(val_idx);
    const std::vector<std::uint8_t> val_y = pick(data.rows.labels, val_idx);

    ddqn::AgentConfig agent = config_.agent;
    agent.seed = config_.seed;
    const ddqn::TrainResult result = val_idx.empty() ? ddqn::train(train_x, train_y, agent)
                                                     : ddqn::train(train_x, train_y, agent, &val_x, val_y);

    write_text(a.at("agent_weights.json"), ddqn::to_json(result.network) + "\n");
    std::ostringstream log;
    ddqn::write_training_log(log, result.log);
    write_text(a.at("training_log.csv"), log.str());

    const std::vector<std::uint8_t> predicted = ddqn::predict(result.network, data.matrix);
    CsvWriter w;
    w.row({"index", "date", "split", "risk_level", "prediction"});
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        w.row({std::to_string(data.rows.index[i]), format_date(data.matrix.dates[i]), data.rows.split[i],
               std::to_string(data.rows.labels[i]), std::to_string(predicted[i])});
    }
    w.save(a.at("predictions.csv"));

    json splits = json::object();
    for (const char* s : kSplitNames) {
        const std::vector<std::size_t> idx = data.rows.where(s);
        if (idx.empty()) continue;
        splits[s] = scores_json(metrics::confusion(pick(predicted, idx), pick(data.rows.labels, idx)));
    }
    std::size_t steps = 0;
    for (const auto& e : result.log) steps += e.steps;
    write_json(a.at("classification.json"), {{"model", "DDQN"},
                                             {"rho", result.rho},
                                             {"episodes", result.log.size()},
                                             {"environment_steps", steps},
                                             {"final_epsilon", result.log.back().epsilon},
                                             {"splits", splits}});
    note("train-agent: " + std::to_string(result.log.size()) + " episodes, " + std::to_string(steps) + " steps");
}

void Runner::calibrate() {
    const Artifacts a{dir_};
    const ReturnsData data = load_returns(a);
    const Predictions pred = load_predictions(a);
    const std::vector<std::size_t> rows = pred.rows.where("validation");
    if (rows.size() < config_.grid_windows) fail(ErrorCode::EmptyWindow, "calibrate: validation span is too short");
    const std::vector<std::size_t> t_idx = pick(pred.rows.index, rows);
    const std::vector<double> r = pick(data.series.values, t_idx);
    const std::vector<std::uint8_t> p = pick(pred.predicted, rows);

    json entries = json::array();
    std::uint64_t stream = 0;
    for (garch::Model m : config_.models) {
        const ModelData md = load_model(a, m);
        for (double alpha : config_.alphas) {
            const std::vector<double> v = pick(md.var(alpha), t_idx);
            adjust::GridOptions g;
            g.step = config_.grid_step;
            g.upper = config_.grid_upper;
            g.alpha = alpha;
            g.objective = config_.grid_objective;
            g.windows = adjust::rolling_windows(r.size(), config_.grid_windows);
            const adjust::GridResult grid = adjust::grid_search_calibrate(r, v, p, g);

            const std::string key = series_key(m, alpha);
            CsvWriter surface;
            surface.row({"b1", "b2", "violations", "objective"});
            for (const adjust::GridCell& c : grid.surface) {
                surface.row({num(c.b1), num(c.b2), std::to_string(c.violations), num(c.objective)});
            }
            surface.save(a.at("grid_" + key + ".csv"));

            json entry{{"model", garch::to_string(m)},
                       {"alpha", alpha},
                       {"b1", grid.best.b1},
                       {"b2", grid.best.b2},
                       {"objective", adjust::to_string(config_.grid_objective)},
                       {"objective_value", grid.best_objective},
                       {"validation_violations", grid.best_violations},
                       {"validation_days", r.size()}};
            if (config_.mcmc) {
                adjust::McmcOptions mo;
                mo.draws = config_.mcmc_draws;
                mo.proposal_sd = config_.mcmc_proposal_sd;
                mo.upper = config_.grid_upper;
                mo.seed = mix64(config_.seed) + stream;
                try {
                    const adjust::PosteriorSample post = adjust::mcmc_calibrate(r, v, p, alpha, mo);
                    CsvWriter draws;
                    draws.row({"b1", "b2"});
                    for (std::size_t i = 0; i < post.b1.size(); ++i) draws.row({num(post.b1[i]), num(post.b2[i])});
                    draws.save(a.at("posterior_" + key + ".csv"));
                    const Moments s1 = moments(post.b1), s2 = moments(post.b2);
                    entry["mcmc"] = {{"b1_mean", s1.mean},    {"b1_sd", s1.sd},
                                     {"b2_mean", s2.mean},    {"b2_sd", s2.sd},
                                     {"correlation", pearson(post.b1, post.b2)},
                                     {"acceptance_rate", post.acceptance_rate},
                                     {"burn_in", post.burn_in},
                                     {"draws", post.b1.size()}};
                } catch (const Error& e) {
                    if (e.code() != ErrorCode::DegenerateChain) throw;
                    entry["mcmc"] = {{"error", std::string(to_string(e.code()))}, {"message", e.what()}};
                    note("calibrate: " + key + " MCMC chain degenerate; grid result kept");
                }
            }
            ++stream;
            entries.push_back(entry);
            note("calibrate: " + key + " b1 " + num(grid.best.b1) + " b2 " + num(grid.best.b2));
        }
    }
    write_json(a.at("calibration.json"), {{"span", "validation"}, {"windows", config_.grid_windows}, {"entries", entries}});
}

void Runner::adjust() {
    const Artifacts a{dir_};
    const json calibration = read_json(a.require("calibration.json", "calibrate"));
    const Predictions pred = load_predictions(a);
    std::vector<std::string> header{"index", "date", "split", "prediction"};
    std::vector<std::vector<double>> cols;
    const ReturnsData data = load_returns(a);

    for (garch::Model m : config_.models) {
        const ModelData md = load_model(a, m);
        for (double alpha : config_.alphas) {
            const json* found = nullptr;
            for (const json& e : calibration.at("entries")) {
                if (e.at("model").get<std::string>() == garch::to_string(m) && e.at("alpha").get<double>() == alpha) {
                    found = &e;
                }
            }
            if (!found) {
                fail(ErrorCode::MissingArtifact, "calibration.json has no entry for " + series_key(m, alpha) +
                                                     "; re-run calibrate");
            }
            const adjust::AdjustmentParams params{found->at("b1").get<double>(), found->at("b2").get<double>()};
            const std::vector<double> base = pick(md.var(alpha), pred.rows.index);
            const adjust::AdjustedVarSeries adj = adjust::adjust_var(base, pred.predicted, params);
            header.push_back(series_key(m, alpha) + "_var");
            header.push_back(series_key(m, alpha) + "_var_ml");
            cols.push_back(base);
            cols.push_back(adj.values);
        }
    }
    CsvWriter w;
    w.row(header);
    for (std::size_t i = 0; i < pred.rows.index.size(); ++i) {
        std::vector<std::string> row{std::to_string(pred.rows.index[i]),
                                     format_date(data.series.dates.at(pred.rows.index[i])), pred.rows.split[i],
                                     std::to_string(pred.predicted[i])};
        for (const auto& c : cols) row.push_back(num(c[i]));
        w.row(row);
    }
    w.save(a.at("adjusted_var.csv"));
}

namespace {

struct AdjustedTable {
    std::vector<std::size_t> index;
    std::vector<std::string> split;
    csv::Table table;
    fs::path file;

    std::vector<double> column(const std::string& name) const { return double_column(table, name, file); }
};

AdjustedTable load_adjusted(const Artifacts& a) {
    AdjustedTable t;
    t.file = a.require("adjusted_var.csv", "adjust");
    t.table = csv::read_file(t.file.string());
    t.index = index_column(t.table, t.file);
    t.split = string_column(t.table, "split", t.file);
    return t;
}

std::vector<std::size_t> rows_in(const std::vector<std::string>& split, std::initializer_list<const char*> names) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < split.size(); ++i) {
        for (const char* n : names) {
            if (split[i] == n) out.push_back(i);
        }
    }
    return out;
}

}  // namespace

void Runner::backtest() {
    const Artifacts a{dir_};
    const AdjustedTable adj = load_adjusted(a);
    const ReturnsData data = load_returns(a);
    const double level = config_.test_level;

    json series = json::array();
    json pairs = json::array();
    std::vector<double> original_counts, adjusted_counts;
    json mann_whitney = json::array();
    CsvWriter hits_csv;
    std::vector<std::string> hit_header{"index", "date", "split"};
    std::vector<std::vector<std::uint8_t>> hit_cols;
    const std::vector<std::size_t> oos = rows_in(adj.split, {"validation", "test"});

    for (garch::Model m : config_.models) {
        for (double alpha : config_.alphas) {
            const std::string key = series_key(m, alpha);
            const std::vector<double> base = adj.column(key + "_var");
            const std::vector<double> ml = adj.column(key + "_var_ml");
            for (const char* split : {"validation", "test"}) {
                const std::vector<std::size_t> rows = rows_in(adj.split, {split});
                if (rows.empty()) continue;
                const std::vector<double> r = pick(data.series.values, pick(adj.index, rows));
                std::size_t counts[2] = {0, 0};
                for (int version = 0; version < 2; ++version) {
                    const std::vector<double> v = pick(version == 0 ? base : ml, rows);
                    const backtest::ViolationSeries hits = backtest::count_violations(r, v);
                    counts[version] = hits.x;
                    series.push_back(
                        {{"model", garch::to_string(m)},
                         {"alpha", alpha},
                         {"split", split},
                         {"version", version == 0 ? "VaR" : "VaR_ML"},
                         {"n", hits.n},
                         {"expected", static_cast<std::size_t>(std::llround(static_cast<double>(hits.n) * alpha))},
                         {"actual", hits.x},
                         {"kupiec", test_json(backtest::kupiec_pof(hits.x, hits.n, alpha, level))},
                         {"independence", test_json(backtest::christoffersen_independence(hits.hits, level))},
                         {"conditional_coverage", test_json(backtest::christoffersen_cc(hits.hits, alpha, level))}});
                }
                original_counts.push_back(static_cast<double>(counts[0]));
                adjusted_counts.push_back(static_cast<double>(counts[1]));
                pairs.push_back({{"model", garch::to_string(m)},
                                 {"alpha", alpha},
                                 {"split", split},
                                 {"original", counts[0]},
                                 {"adjusted", counts[1]}});
            }
            const std::vector<std::size_t> test_rows = rows_in(adj.split, {"test"});
            if (!test_rows.empty()) {
                const std::vector<double> b = pick(base, test_rows);
                const std::vector<double> s = pick(ml, test_rows);
                mann_whitney.push_back({{"model", garch::to_string(m)},
                                        {"alpha", alpha},
                                        {"split", "test"},
                                        {"two_sided", test_json(backtest::mann_whitney_u(b, s, backtest::Alternative::TwoSided, level))}});
            }
            const std::vector<double> r_oos = pick(data.series.values, pick(adj.index, oos));
            const std::vector<double> b_oos = pick(base, oos), m_oos = pick(ml, oos);
            hit_header.push_back(key + "_hit");
            hit_header.push_back(key + "_hit_ml");
            hit_cols.push_back(backtest::count_violations(r_oos, b_oos).hits);
            hit_cols.push_back(backtest::count_violations(r_oos, m_oos).hits);
        }
    }

    json wilcoxon{{"pairs", pairs}};
    for (const auto& [name, alt] : {std::pair{"less", backtest::Alternative::Less},
                                    std::pair{"two_sided", backtest::Alternative::TwoSided}}) {
        try {
            wilcoxon[name] = test_json(backtest::wilcoxon_signed_rank(adjusted_counts, original_counts, alt, level));
        } catch (const Error& e) {
            if (e.code() != ErrorCode::AllZeroDifferences) throw;
            wilcoxon[name] = {{"error", std::string(to_string(e.code()))}, {"message", e.what()}};
        }
    }

    hits_csv.row(hit_header);
    for (std::size_t k = 0; k < oos.size(); ++k) {
        const std::size_t i = oos[k];
        std::vector<std::string> row{std::to_string(adj.index[i]), format_date(data.series.dates.at(adj.index[i])),
                                     adj.split[i]};
        for (const auto& c : hit_cols) row.push_back(std::to_string(c[k]));
        hits_csv.row(row);
    }
    hits_csv.save(a.at("hits.csv"));

    write_json(a.at("backtest.json"), {{"level", level},
                                       {"series", series},
                                       {"wilcoxon_signed_rank", wilcoxon},
                                       {"mann_whitney", mann_whitney}});
}

void Runner::evt() {
    const Artifacts a{dir_};
    const AdjustedTable adj = load_adjusted(a);
    const ReturnsData data = load_returns(a);
    const std::vector<std::size_t> oos = rows_in(adj.split, {"validation", "test"});
    const std::vector<double> r = pick(data.series.values, pick(adj.index, oos));

    json entries = json::array();
    std::uint64_t stream = 0;
    for (garch::Model m : config_.models) {
        for (double alpha : config_.alphas) {
            for (int version = 0; version < 2; ++version) {
                const std::string key = series_key(m, alpha);
                const std::vector<double> v = pick(adj.column(key + (version == 0 ? "_var" : "_var_ml")), oos);
                json entry{{"model", garch::to_string(m)},
                           {"alpha", alpha},
                           {"version", version == 0 ? "VaR" : "VaR_ML"},
                           {"span", "validation+test"}};
                const std::uint64_t seed = mix64(config_.seed ^ 0x65767400ULL) + stream++;
                try {
                    const evt::ExceedanceSet ex = evt::extract_exceedances(r, v);
                    entry["count"] = ex.count();
                    evt::GpdFitOptions fo;
                    fo.fit_location = config_.evt_fit_location;
                    const evt::GpdFit fit = evt::fit_gpd_mle(ex.values, fo);
                    evt::KsOptions ko;
                    ko.n_mc = config_.evt_n_mc;
                    ko.seed = seed;
                    ko.level = config_.test_level;
                    ko.fit = fo;
                    const backtest::TestResult ks = evt::ks_test(ex.values, fit.params, ko);
                    entry["mu"] = fit.params.mu;
                    entry["beta"] = fit.params.beta;
                    entry["xi"] = fit.params.xi;
                    entry["loglik"] = fit.loglik;
                    entry["heavy_tail"] = fit.params.xi >= 1.0;
                    entry["ks"] = test_json(ks);
                    entry["warnings"] = fit.warnings;
                } catch (const Error& e) {
                    if (e.code() != ErrorCode::TooFewExceedances && e.code() != ErrorCode::NoExceedances) throw;
                    entry["skipped"] = std::string(to_string(e.code()));
                    entry["message"] = e.what();
                }
                entries.push_back(entry);
            }
        }
    }
    write_json(a.at("evt.json"), {{"n_mc", config_.evt_n_mc}, {"entries", entries}});
}

void Runner::report() {
    const Artifacts a{dir_};
    const json ingest = read_json(a.require("ingest.json", "ingest"));
    const json labels = read_json(a.require("labels.json", "label"));
    const json classification = read_json(a.require("classification.json", "train-agent"));
    const json calibration = read_json(a.require("calibration.json", "calibrate"));
    const json backtests = read_json(a.require("backtest.json", "backtest"));
    const json evt = read_json(a.require("evt.json", "evt"));
    const AdjustedTable adj = load_adjusted(a);

    json models = json::array();
    for (garch::Model m : config_.models) {
        const json g = read_json(a.require("garch_" + model_slug(m) + ".json", "fit-garch"));
        models.push_back({{"model", g.at("model")},
                          {"innovation", g.at("innovation")},
                          {"params", g.at("params")},
                          {"loglik", g.at("loglik")},
                          {"converged", g.at("converged")}});
    }

    json var_stats = json::array();
    CsvWriter var_csv;
    var_csv.row({"model", "alpha", "version", "split", "mean", "std", "min", "max"});
    for (garch::Model m : config_.models) {
        for (double alpha : config_.alphas) {
            for (int version = 0; version < 2; ++version) {
                const std::vector<double> col =
                    adj.column(series_key(m, alpha) + (version == 0 ? "_var" : "_var_ml"));
                for (const char* split : {"validation", "test"}) {
                    const Moments mo = moments(pick(col, rows_in(adj.split, {split})));
                    const char* ver = version == 0 ? "VaR" : "VaR_ML";
                    var_stats.push_back({{"model", garch::to_string(m)},
                                         {"alpha", alpha},
                                         {"version", ver},
                                         {"split", split},
                                         {"stats", moments_json(mo)}});
                    var_csv.row({garch::to_string(m), num(alpha), ver, split, num(mo.mean), num(mo.sd), num(mo.min),
                                 num(mo.max)});
                }
            }
        }
    }
    var_csv.save(a.at("var_statistics.csv"));

    CsvWriter metrics_csv;
    metrics_csv.row({"metric", "train", "validation", "test"});
    for (const char* metric : {"accuracy", "precision", "recall", "specificity", "f1", "g_mean"}) {
        std::vector<std::string> row{metric};
        for (const char* s : kSplitNames) {
            const json& splits = classification.at("splits");
            row.push_back(splits.contains(s) ? num(splits.at(s).at(metric).get<double>()) : "");
        }
        metrics_csv.row(row);
    }
    metrics_csv.save(a.at("metrics.csv"));

    const json report{{"config_hash", config::hash(config_)},
                      {"seed", config_.seed},
                      {"data", ingest},
                      {"garch", models},
                      {"labels",
                       {{"threshold", labels.at("threshold")},
                        {"rho", labels.at("rho")},
                        {"counts", labels.at("counts")},
                        {"dropped_features", labels.at("dropped")}}},
                      {"classification", classification},
                      {"var_statistics", var_stats},
                      {"calibration", calibration},
                      {"backtests", backtests},
                      {"evt", evt}};
    write_json(a.at("report.json"), report);
}

}  // namespace cavar::pipeline
