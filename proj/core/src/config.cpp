#include "cavar/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "cavar/csv.hpp"
#include "cavar/error.hpp"
#include "cavar/features.hpp"
#include "cavar/rng.hpp"

namespace cavar::config {

namespace {

struct Field {
    std::string section;
    std::string key;
    std::function<void(const std::string&)> set;
    std::function<std::string()> get;
};

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad_value(const std::string& value, const char* expected) {
    fail(ErrorCode::ConfigInvalid, "expected " + std::string(expected) + ", got '" + value + "'");
}

std::uint64_t to_u64(const std::string& v) {
    std::uint64_t out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || ec != std::errc{} || ptr != v.data() + v.size()) bad_value(v, "a non-negative integer");
    return out;
}

double to_double(const std::string& v) {
    try {
        return csv::parse_double(v);
    } catch (const Error&) {
        bad_value(v, "a number");
    }
}

bool to_bool(const std::string& v) {
    if (v == "true" || v == "yes" || v == "on" || v == "1") return true;
    if (v == "false" || v == "no" || v == "off" || v == "0") return false;
    bad_value(v, "a boolean");
}

std::vector<std::string> to_list(const std::string& v) {
    std::vector<std::string> out;
    if (trim(v).empty()) return out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t comma = v.find(',', start);
        std::string item = trim(std::string_view(v).substr(start, comma == std::string::npos ? std::string::npos : comma - start));
        if (item.empty()) bad_value(v, "a comma-separated list without empty items");
        out.push_back(std::move(item));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) out += (i ? ", " : "") + items[i];
    return out;
}

std::string fmt(double v) { return csv::format_double(v); }
std::string fmt(bool v) { return v ? "true" : "false"; }

template <class T>
Field size_field(std::string s, std::string k, T& ref) {
    return {std::move(s), std::move(k), [&ref](const std::string& v) { ref = static_cast<T>(to_u64(v)); },
            [&ref] { return std::to_string(ref); }};
}

Field double_field(std::string s, std::string k, double& ref) {
    return {std::move(s), std::move(k), [&ref](const std::string& v) { ref = to_double(v); },
            [&ref] { return fmt(ref); }};
}

Field bool_field(std::string s, std::string k, bool& ref) {
    return {std::move(s), std::move(k), [&ref](const std::string& v) { ref = to_bool(v); },
            [&ref] { return fmt(ref); }};
}

Field string_field(std::string s, std::string k, std::string& ref) {
    return {std::move(s), std::move(k), [&ref](const std::string& v) { ref = v; }, [&ref] { return ref; }};
}

garch::Model to_model(const std::string& v) {
    try {
        return garch::parse_model(v);
    } catch (const Error&) {
        bad_value(v, "garch or gjr");
    }
}

garch::InnovationKind to_innovation(const std::string& v) {
    try {
        return garch::parse_innovation(v);
    } catch (const Error&) {
        bad_value(v, "normal or student_t");
    }
}

std::vector<Field> fields(PipelineConfig& c) {
    std::vector<Field> f;
    f.push_back({"data", "source",
                 [&c](const std::string& v) {
                     if (v == "file") c.data_source = DataSource::File;
                     else if (v == "simulate") c.data_source = DataSource::Simulate;
                     else bad_value(v, "file or simulate");
                 },
                 [&c] { return std::string(c.data_source == DataSource::File ? "file" : "simulate"); }});
    f.push_back(string_field("data", "path", c.data_path));

    SimulateConfig& s = c.simulate;
    f.push_back({"simulate", "generator",
                 [&s](const std::string& v) {
                     if (v == "garch") s.generator = Generator::Garch;
                     else if (v == "gjr") s.generator = Generator::Gjr;
                     else if (v == "regime") s.generator = Generator::Regime;
                     else bad_value(v, "garch, gjr or regime");
                 },
                 [&s] {
                     return std::string(s.generator == Generator::Garch ? "garch"
                                        : s.generator == Generator::Gjr ? "gjr"
                                                                        : "regime");
                 }});
    f.push_back(size_field("simulate", "length", s.length));
    f.push_back(double_field("simulate", "initial_price", s.initial_price));
    f.push_back(double_field("simulate", "mu", s.mu));
    f.push_back(double_field("simulate", "alpha0", s.alpha0));
    f.push_back(double_field("simulate", "alpha1", s.alpha1));
    f.push_back(double_field("simulate", "beta1", s.beta1));
    f.push_back(double_field("simulate", "gamma", s.gamma));
    f.push_back({"simulate", "innovation", [&s](const std::string& v) { s.innovation = to_innovation(v); },
                 [&s] { return garch::to_string(s.innovation); }});
    f.push_back(double_field("simulate", "nu", s.nu));
    f.push_back(double_field("simulate", "low_vol", s.low_vol));
    f.push_back(double_field("simulate", "high_vol", s.high_vol));
    f.push_back(double_field("simulate", "switch_prob", s.switch_prob));

    f.push_back({"features", "list", [&c](const std::string& v) { c.features = to_list(v); },
                 [&c] { return join(c.features); }});
    f.push_back(size_field("features", "bollinger_window", c.bollinger_window));
    f.push_back(size_field("features", "fast_window", c.signals.fast));
    f.push_back(size_field("features", "slow_window", c.signals.slow));
    f.push_back(size_field("features", "rsi_window", c.signals.rsi_window));
    f.push_back(double_field("features", "rsi_lower", c.signals.rsi_lower));
    f.push_back(double_field("features", "rsi_upper", c.signals.rsi_upper));

    f.push_back(double_field("split", "train", c.split.train));
    f.push_back(double_field("split", "validation", c.split.validation));
    f.push_back(double_field("split", "test", c.split.test));

    f.push_back({"garch", "models",
                 [&c](const std::string& v) {
                     c.models.clear();
                     for (const std::string& m : to_list(v)) c.models.push_back(to_model(m));
                 },
                 [&c] {
                     std::vector<std::string> names;
                     for (garch::Model m : c.models) names.push_back(garch::to_string(m));
                     return join(names);
                 }});
    f.push_back({"garch", "innovation", [&c](const std::string& v) { c.innovation = to_innovation(v); },
                 [&c] { return garch::to_string(c.innovation); }});
    f.push_back(bool_field("garch", "zero_mean", c.zero_mean));

    f.push_back({"var", "alphas",
                 [&c](const std::string& v) {
                     c.alphas.clear();
                     for (const std::string& a : to_list(v)) c.alphas.push_back(to_double(a));
                 },
                 [&c] {
                     std::vector<std::string> items;
                     for (double a : c.alphas) items.push_back(fmt(a));
                     return join(items);
                 }});

    f.push_back(size_field("labels", "horizon", c.threshold.horizon));
    f.push_back(double_field("labels", "alpha", c.threshold.alpha));
    f.push_back({"labels", "anchor",
                 [&c](const std::string& v) {
                     if (v == "trailing") c.threshold.anchor = labeling::HorizonAnchor::Trailing;
                     else if (v == "leading") c.threshold.anchor = labeling::HorizonAnchor::Leading;
                     else bad_value(v, "trailing or leading");
                 },
                 [&c] {
                     return std::string(c.threshold.anchor == labeling::HorizonAnchor::Trailing ? "trailing" : "leading");
                 }});
    f.push_back({"labels", "model", [&c](const std::string& v) { c.label_model = to_model(v); },
                 [&c] { return garch::to_string(c.label_model); }});

    ddqn::AgentConfig& a = c.agent;
    f.push_back(double_field("agent", "gamma", a.gamma));
    f.push_back(double_field("agent", "epsilon_start", a.epsilon_start));
    f.push_back(double_field("agent", "epsilon_decay", a.epsilon_decay));
    f.push_back(double_field("agent", "epsilon_min", a.epsilon_min));
    f.push_back(double_field("agent", "learning_rate", a.learning_rate));
    f.push_back(size_field("agent", "batch_size", a.batch_size));
    f.push_back(size_field("agent", "buffer_capacity", a.buffer_capacity));
    f.push_back(size_field("agent", "target_sync_every", a.target_sync_every));
    f.push_back(size_field("agent", "episodes", a.episodes));
    f.push_back({"agent", "hidden",
                 [&a](const std::string& v) {
                     a.hidden.clear();
                     for (const std::string& h : to_list(v)) a.hidden.push_back(static_cast<std::size_t>(to_u64(h)));
                 },
                 [&a] {
                     std::vector<std::string> items;
                     for (std::size_t h : a.hidden) items.push_back(std::to_string(h));
                     return join(items);
                 }});
    f.push_back(bool_field("agent", "terminate_on_false_negative", a.terminate_on_false_negative));

    f.push_back(double_field("adjust", "grid_step", c.grid_step));
    f.push_back(double_field("adjust", "grid_upper", c.grid_upper));
    f.push_back(size_field("adjust", "windows", c.grid_windows));
    f.push_back({"adjust", "objective",
                 [&c](const std::string& v) {
                     if (v == "violations" || v == "coverage" || v == "cc") c.grid_objective = adjust::parse_objective(v);
                     else bad_value(v, "violations, coverage or cc");
                 },
                 [&c] { return adjust::to_string(c.grid_objective); }});
    f.push_back(bool_field("adjust", "mcmc", c.mcmc));
    f.push_back(size_field("adjust", "mcmc_draws", c.mcmc_draws));
    f.push_back(double_field("adjust", "mcmc_proposal_sd", c.mcmc_proposal_sd));

    f.push_back(size_field("evt", "n_mc", c.evt_n_mc));
    f.push_back(bool_field("evt", "fit_location", c.evt_fit_location));

    f.push_back(double_field("backtest", "level", c.test_level));

    f.push_back(size_field("run", "seed", c.seed));
    f.push_back(string_field("run", "output", c.output_dir));
    return f;
}

void check(bool ok, const std::string& message) {
    if (!ok) fail(ErrorCode::ConfigInvalid, message);
}

}  // namespace

std::string sigma_feature(garch::Model model) {
    return model == garch::Model::GARCH ? "sig GARCH" : "sig gjr-GARCH";
}

std::string var_feature(garch::Model model) {
    return model == garch::Model::GARCH ? "VaR GARCH" : "VaR gjr-GARCH";
}

void validate(const PipelineConfig& c) {
    check(c.data_source == DataSource::Simulate || !c.data_path.empty(), "data.path is required when data.source = file");

    const SimulateConfig& s = c.simulate;
    check(s.length >= 300, "simulate.length must be at least 300");
    check(s.initial_price > 0.0, "simulate.initial_price must be positive");
    if (s.generator == Generator::Regime) {
        check(s.low_vol > 0.0 && s.low_vol < s.high_vol, "simulate: need 0 < low_vol < high_vol");
        check(s.switch_prob > 0.0 && s.switch_prob < 1.0, "simulate.switch_prob must lie in (0, 1)");
    } else {
        const garch::Spec spec{s.generator == Generator::Gjr ? garch::Model::GJR : garch::Model::GARCH, s.innovation};
        garch::Params p{s.mu, s.alpha0, s.alpha1, s.beta1, s.generator == Generator::Gjr ? s.gamma : 0.0, s.nu};
        try {
            garch::validate(spec, p);
        } catch (const Error& e) {
            fail(ErrorCode::ConfigInvalid, std::string("simulate: ") + e.what());
        }
    }

    check(!c.features.empty(), "features.list must not be empty");
    for (const std::string& name : c.features) {
        bool known = features::is_builtin_feature(name);
        for (garch::Model m : c.models) known = known || name == sigma_feature(m) || name == var_feature(m);
        check(known, "features.list: unknown feature '" + name + "' (volatility features need their model in garch.models)");
    }
    check(c.bollinger_window >= 2, "features.bollinger_window must be at least 2");
    check(c.signals.fast >= 2 && c.signals.fast < c.signals.slow, "features: need 2 <= fast_window < slow_window");
    check(c.signals.rsi_window >= 2, "features.rsi_window must be at least 2");
    check(c.signals.rsi_lower > 0.0 && c.signals.rsi_lower < c.signals.rsi_upper && c.signals.rsi_upper < 100.0,
          "features: need 0 < rsi_lower < rsi_upper < 100");

    const SplitSpec& sp = c.split;
    check(sp.train > 0.0 && sp.train < 1.0 && sp.validation > 0.0 && sp.validation < 1.0 && sp.test > 0.0 &&
              sp.test < 1.0 && std::fabs(sp.train + sp.validation + sp.test - 1.0) <= 1e-9,
          "split: fractions must lie in (0, 1) and sum to 1");

    check(!c.models.empty(), "garch.models must not be empty");
    for (std::size_t i = 0; i < c.models.size(); ++i) {
        for (std::size_t j = 0; j < i; ++j) check(c.models[i] != c.models[j], "garch.models lists a model twice");
    }
    check(!c.alphas.empty(), "var.alphas must not be empty");
    for (double alpha : c.alphas) check(alpha > 0.0 && alpha < 0.5, "var.alphas must lie in (0, 0.5)");

    check(c.threshold.horizon >= 1, "labels.horizon must be positive");
    check(c.threshold.alpha > 0.0 && c.threshold.alpha < 0.5, "labels.alpha must lie in (0, 0.5)");
    check(std::find(c.models.begin(), c.models.end(), c.label_model) != c.models.end(),
          "labels.model must be one of garch.models");

    try {
        ddqn::validate(c.agent);
    } catch (const Error& e) {
        fail(ErrorCode::ConfigInvalid, std::string("agent: ") + e.what());
    }

    check(c.grid_step > 0.0 && c.grid_upper > 0.0 && c.grid_upper <= 0.5, "adjust: need grid_step > 0 and grid_upper in (0, 0.5]");
    check(c.grid_windows >= 2, "adjust.windows must be at least 2");
    check(c.mcmc_draws >= 5000, "adjust.mcmc_draws must be at least 5000");
    check(c.mcmc_proposal_sd > 0.0, "adjust.mcmc_proposal_sd must be positive");
    check(c.evt_n_mc >= 2000, "evt.n_mc must be at least 2000");
    check(c.test_level > 0.0 && c.test_level < 1.0, "backtest.level must lie in (0, 1)");
    check(!c.output_dir.empty(), "run.output must not be empty");
}

PipelineConfig parse(const std::string& text) {
    PipelineConfig config;
    std::vector<Field> table = fields(config);
    std::map<std::string, std::size_t> seen;
    std::istringstream in(text);
    std::string raw;
    std::string section;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::string line = trim(raw);
        const std::string where = "line " + std::to_string(line_no) + ": ";
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;
        if (line.front() == '[') {
            check(line.back() == ']', where + "unterminated section header");
            section = trim(std::string_view(line).substr(1, line.size() - 2));
            const bool known = std::any_of(table.begin(), table.end(), [&](const Field& f) { return f.section == section; });
            check(known, where + "unknown section [" + section + "]");
            continue;
        }
        const std::size_t eq = line.find('=');
        check(eq != std::string::npos, where + "expected 'key = value'");
        check(!section.empty(), where + "key outside of any section");
        const std::string key = trim(std::string_view(line).substr(0, eq));
        const std::string value = trim(std::string_view(line).substr(eq + 1));
        auto it = std::find_if(table.begin(), table.end(),
                               [&](const Field& f) { return f.section == section && f.key == key; });
        check(it != table.end(), where + "unknown key '" + key + "' in [" + section + "]");
        const std::string full = section + "." + key;
        check(seen.emplace(full, line_no).second, where + "duplicate key " + full);
        try {
            it->set(value);
        } catch (const Error& e) {
            fail(ErrorCode::ConfigInvalid, where + full + ": " + e.what());
        }
    }
    validate(config);
    return config;
}

PipelineConfig load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::ConfigInvalid, "cannot open config file " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

std::string canonical(const PipelineConfig& config) {
    PipelineConfig copy = config;
    std::vector<Field> table = fields(copy);
    std::vector<std::string> lines;
    for (const Field& f : table) {
        // The output location does not change any result.
        if (f.section == "run" && f.key == "output") continue;
        lines.push_back(f.section + "." + f.key + " = " + f.get());
    }
    std::sort(lines.begin(), lines.end());
    std::string out;
    for (const std::string& l : lines) out += l + "\n";
    return out;
}

std::string hash(const PipelineConfig& config) {
    const std::uint64_t h = fnv1a64(canonical(config));
    char buf[17];
    static const char* digits = "0123456789abcdef";
    for (int i = 0; i < 16; ++i) buf[i] = digits[(h >> (60 - 4 * i)) & 0xF];
    buf[16] = '\0';
    return buf;
}

}  // namespace cavar::config
