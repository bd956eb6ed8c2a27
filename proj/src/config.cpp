#include "lpnsr/config.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "lpnsr/diffusion.hpp"
#include "lpnsr/inference.hpp"

namespace lpnsr {

DiffusionSchedule RunConfig::make_schedule() const {
    return build_schedule(schedule_T, eta_min, eta_max, kappa);
}

TrainConfig RunConfig::train_config(int iterations, const std::string& diag_dir) const {
    TrainConfig tc;
    tc.iterations = iterations;
    tc.batch = batch;
    tc.adam.lr = static_cast<float>(lr);
    tc.adam.beta1 = static_cast<float>(beta1);
    tc.adam.beta2 = static_cast<float>(beta2);
    tc.adam.weight_decay = static_cast<float>(weight_decay);
    tc.lambda1 = static_cast<float>(lambda1);
    tc.lambda_l = static_cast<float>(lambda_l);
    tc.lambda_g = static_cast<float>(lambda_g);
    tc.seed = seed;
    tc.eval_every = eval_every;
    tc.checkpoint_every = checkpoint_every;
    tc.diag_dir = diag_dir;
    return tc;
}

namespace {

struct KeySpec {
    const char* key;
    const char* desc;
    std::function<void(RunConfig&, const std::string&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

long long parse_int(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const long long x = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected integer, got '" + v + "'");
    }
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected number, got '" + v + "'");
    }
}

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

const std::vector<KeySpec>& key_table() {
    auto int_key = [](const char* key, const char* desc, int RunConfig::*field,
                      long long lo, long long hi) {
        return KeySpec{
            key, desc,
            [field, lo, hi](RunConfig& c, const std::string& k, const std::string& v) {
                const long long x = parse_int(k, v);
                if (x < lo || x > hi)
                    throw ConfigError("config key '" + k + "': value " + v + " out of range [" +
                                      std::to_string(lo) + ", " + std::to_string(hi) + "]");
                c.*field = static_cast<int>(x);
            },
            [field](const RunConfig& c) { return std::to_string(c.*field); }};
    };
    auto dbl_key = [](const char* key, const char* desc, double RunConfig::*field,
                      double lo, double hi) {
        return KeySpec{
            key, desc,
            [field, lo, hi](RunConfig& c, const std::string& k, const std::string& v) {
                const double x = parse_double(k, v);
                if (!(x >= lo && x <= hi))
                    throw ConfigError("config key '" + k + "': value " + v + " out of range [" +
                                      fmt_double(lo) + ", " + fmt_double(hi) + "]");
                c.*field = x;
            },
            [field](const RunConfig& c) { return fmt_double(c.*field); }};
    };
    auto corpus_int = [](const char* key, const char* desc, int CorpusConfig::*field,
                         long long lo, long long hi) {
        return KeySpec{
            key, desc,
            [field, lo, hi](RunConfig& c, const std::string& k, const std::string& v) {
                const long long x = parse_int(k, v);
                if (x < lo || x > hi)
                    throw ConfigError("config key '" + k + "': value " + v + " out of range [" +
                                      std::to_string(lo) + ", " + std::to_string(hi) + "]");
                c.corpus.*field = static_cast<int>(x);
            },
            [field](const RunConfig& c) { return std::to_string(c.corpus.*field); }};
    };
    auto corpus_dbl = [](const char* key, const char* desc, double CorpusConfig::*field,
                         double lo, double hi) {
        return KeySpec{
            key, desc,
            [field, lo, hi](RunConfig& c, const std::string& k, const std::string& v) {
                const double x = parse_double(k, v);
                if (!(x >= lo && x <= hi))
                    throw ConfigError("config key '" + k + "': value " + v + " out of range [" +
                                      fmt_double(lo) + ", " + fmt_double(hi) + "]");
                c.corpus.*field = x;
            },
            [field](const RunConfig& c) { return fmt_double(c.corpus.*field); }};
    };

    static const std::vector<KeySpec> table = {
        int_key("schedule.T", "number of diffusion steps", &RunConfig::schedule_T, 1, 64),
        dbl_key("schedule.eta_min", "first shifting value (0,1)", &RunConfig::eta_min, 1e-9, 0.999999),
        dbl_key("schedule.eta_max", "last shifting value (0,1)", &RunConfig::eta_max, 1e-9, 0.999999),
        dbl_key("schedule.kappa", "noise scale kappa", &RunConfig::kappa, 1e-9, 100.0),
        corpus_int("corpus.train", "training split size", &CorpusConfig::train_size, 1, 1000000),
        corpus_int("corpus.val", "validation split size", &CorpusConfig::val_size, 1, 1000000),
        corpus_int("corpus.test", "test split size", &CorpusConfig::test_size, 1, 1000000),
        corpus_int("corpus.channels", "image channels (1 or 3)", &CorpusConfig::channels, 1, 3),
        corpus_int("corpus.hr_size", "HR image side, multiple of 4", &CorpusConfig::hr_size, 8, 512),
        corpus_dbl("corpus.blur_min", "degradation blur sigma lower bound", &CorpusConfig::blur_min, 0.2, 2.0),
        corpus_dbl("corpus.blur_max", "degradation blur sigma upper bound", &CorpusConfig::blur_max, 0.2, 2.0),
        corpus_dbl("corpus.noise_min", "degradation noise sigma lower bound", &CorpusConfig::noise_min, 0.0, 0.1),
        corpus_dbl("corpus.noise_max", "degradation noise sigma upper bound", &CorpusConfig::noise_max, 0.0, 0.1),
        int_key("train.denoiser_iters", "denoiser pretraining iterations", &RunConfig::denoiser_iters, 0, 10000000),
        int_key("train.upsampler_iters", "upsampler pretraining iterations", &RunConfig::upsampler_iters, 0, 10000000),
        int_key("train.predictor_iters", "noise-predictor training iterations", &RunConfig::predictor_iters, 0, 10000000),
        int_key("train.batch", "batch size", &RunConfig::batch, 1, 1024),
        dbl_key("train.lr", "Adam learning rate", &RunConfig::lr, 1e-12, 1.0),
        dbl_key("train.beta1", "Adam beta1", &RunConfig::beta1, 0.0, 0.999999),
        dbl_key("train.beta2", "Adam beta2", &RunConfig::beta2, 0.0, 0.999999),
        dbl_key("train.weight_decay", "decoupled weight decay", &RunConfig::weight_decay, 0.0, 1.0),
        int_key("train.eval_every", "validation cadence in iterations", &RunConfig::eval_every, 1, 10000000),
        int_key("train.checkpoint_every", "snapshot cadence in iterations (0: final only)", &RunConfig::checkpoint_every, 0, 10000000),
        dbl_key("loss.lambda1", "L1 loss weight", &RunConfig::lambda1, 0.0, 1000.0),
        dbl_key("loss.lambda_l", "perceptual-proxy loss weight", &RunConfig::lambda_l, 0.0, 1000.0),
        dbl_key("loss.lambda_g", "adversarial slot weight (contributes zero)", &RunConfig::lambda_g, 0.0, 1000.0),
        int_key("infer.steps", "inference start step t_start", &RunConfig::infer_steps, 1, 64),
        KeySpec{"infer.init", "initial upsampling: bicubic | regression",
                [](RunConfig& c, const std::string& k, const std::string& v) {
                    init_mode_from_name(v);  // validates
                    c.infer_init = v;
                    (void)k;
                },
                [](const RunConfig& c) { return c.infer_init; }},
        KeySpec{"infer.strategy",
                "noise strategy: predicted | random_gaussian | approx_optimal | theoretical_optimal | zero",
                [](RunConfig& c, const std::string& k, const std::string& v) {
                    noise_strategy_from_name(v);  // validates
                    c.infer_strategy = v;
                    (void)k;
                },
                [](const RunConfig& c) { return c.infer_strategy; }},
        int_key("eval.seeds", "noise seeds averaged by eval harnesses", &RunConfig::eval_seeds, 1, 64),
        KeySpec{"seed", "global seed",
                [](RunConfig& c, const std::string& k, const std::string& v) {
                    c.seed = static_cast<std::uint64_t>(parse_int(k, v));
                },
                [](const RunConfig& c) { return std::to_string(c.seed); }},
    };
    return table;
}

void apply_key(RunConfig& cfg, const std::string& key, const std::string& value, int line_no) {
    for (const auto& spec : key_table()) {
        if (key == spec.key) {
            spec.set(cfg, key, value);
            return;
        }
    }
    std::string where = line_no > 0 ? " (line " + std::to_string(line_no) + ")" : "";
    throw ConfigError("unknown config key '" + key + "'" + where);
}

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

}  // namespace

void RunConfig::validate() const {
    if (eta_min >= eta_max)
        throw ConfigError("config: schedule.eta_min must be < schedule.eta_max");
    make_schedule();  // full schedule validation
    if (corpus.blur_min > corpus.blur_max)
        throw ConfigError("config: corpus.blur_min must be <= corpus.blur_max");
    if (corpus.noise_min > corpus.noise_max)
        throw ConfigError("config: corpus.noise_min must be <= corpus.noise_max");
    if (corpus.hr_size % 4 != 0)
        throw ConfigError("config: corpus.hr_size must be a multiple of 4");
    if (infer_steps > schedule_T)
        throw ConfigError("config: infer.steps must be <= schedule.T");
}

RunConfig load_config(const std::string& path, const Overrides& overrides) {
    RunConfig cfg;
    if (!path.empty()) {
        std::ifstream f(path);
        if (!f) throw IoError("cannot open config file: " + path);
        std::string line;
        int line_no = 0;
        while (std::getline(f, line)) {
            ++line_no;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line = line.substr(0, hash);
            line = trim(line);
            if (line.empty()) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw ConfigError("config parse error at line " + std::to_string(line_no) +
                                  ": expected 'key = value', got '" + line + "'");
            const std::string key = trim(line.substr(0, eq));
            const std::string value = trim(line.substr(eq + 1));
            if (key.empty() || value.empty())
                throw ConfigError("config parse error at line " + std::to_string(line_no) +
                                  ": empty key or value");
            apply_key(cfg, key, value, line_no);
        }
    }
    for (const auto& [key, value] : overrides) apply_key(cfg, key, value, 0);
    cfg.validate();
    return cfg;
}

std::string config_key_reference() {
    RunConfig defaults;
    std::ostringstream out;
    char line[160];
    for (const auto& spec : key_table()) {
        std::snprintf(line, sizeof(line), "  %-24s %s (default %s)", spec.key, spec.desc,
                      spec.get(defaults).c_str());
        out << line << "\n";
    }
    return out.str();
}

std::string render_config(const RunConfig& cfg) {
    std::ostringstream out;
    for (const auto& spec : key_table()) out << spec.key << " = " << spec.get(cfg) << "\n";
    return out.str();
}

}  // namespace lpnsr
