#include "lpnsr/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "lpnsr/checkpoint.hpp"
#include "lpnsr/config.hpp"
#include "lpnsr/data.hpp"
#include "lpnsr/inference.hpp"
#include "lpnsr/training.hpp"
#include "lpnsr/verify.hpp"

namespace lpnsr {

namespace {

namespace fs = std::filesystem;

struct CliArgs {
    std::string subcommand;
    std::string config_path;
    std::string out_dir = "out";
    std::string data_dir;
    std::string denoiser_path;
    std::string predictor_path;
    std::string upsampler_path;
    std::string input_path;
    Overrides overrides;
    bool help = false;
    bool dump_pgm = false;
};

const char* kUsage =
    "usage: lpnsr <subcommand> [options]\n"
    "\n"
    "subcommands:\n"
    "  gen-data            generate the paired HR/LR corpus\n"
    "  pretrain-denoiser   phase 1: train the denoiser on marginal states\n"
    "  pretrain-upsampler  phase 2: train the x4 regression upsampler\n"
    "  train-predictor     phase 3: end-to-end noise-predictor training\n"
    "  infer               super-resolve one LR tensor file\n"
    "  eval-steps          step-count x init-mode sweep over the test split\n"
    "  eval-strategies     noise-injection strategy comparison\n"
    "  verify              run the numerical verification suite\n"
    "\n"
    "common options:\n"
    "  --config PATH       key = value config file\n"
    "  --out-dir DIR       output directory (default ./out)\n"
    "  --data DIR          corpus directory (from gen-data)\n"
    "  --denoiser PATH     denoiser checkpoint (.lpnw)\n"
    "  --predictor PATH    noise-predictor checkpoint (.lpnw)\n"
    "  --upsampler PATH    upsampler checkpoint (.lpnw)\n"
    "  --input PATH        LR input tensor (.lten), infer only\n"
    "  --seed N            shorthand for the `seed` config key\n"
    "  --steps N           shorthand for `infer.steps`\n"
    "  --init MODE         shorthand for `infer.init`\n"
    "  --strategy NAME     shorthand for `infer.strategy`\n"
    "  --dump-pgm          eval commands: write sample PGMs per configuration\n"
    "  --<section.key> V   override any config key\n"
    "  --help              this text plus the config key reference\n";

int usage_error(const std::string& msg) {
    std::cerr << "error: " << msg << "\n\n" << kUsage;
    return 2;
}

CliArgs parse_args(const std::vector<std::string>& args) {
    CliArgs a;
    if (args.empty()) throw ConfigError("missing subcommand");
    a.subcommand = args[0];
    std::size_t i = 1;
    auto take_value = [&](const std::string& flag) {
        if (i + 1 >= args.size()) throw ConfigError("flag " + flag + " needs a value");
        return args[++i];
    };
    for (; i < args.size(); ++i) {
        const std::string& arg = args[i];
        if (arg == "--help" || arg == "-h") a.help = true;
        else if (arg == "--config") a.config_path = take_value(arg);
        else if (arg == "--out-dir") a.out_dir = take_value(arg);
        else if (arg == "--data") a.data_dir = take_value(arg);
        else if (arg == "--denoiser") a.denoiser_path = take_value(arg);
        else if (arg == "--predictor") a.predictor_path = take_value(arg);
        else if (arg == "--upsampler") a.upsampler_path = take_value(arg);
        else if (arg == "--input") a.input_path = take_value(arg);
        else if (arg == "--seed") a.overrides.emplace_back("seed", take_value(arg));
        else if (arg == "--steps") a.overrides.emplace_back("infer.steps", take_value(arg));
        else if (arg == "--init") a.overrides.emplace_back("infer.init", take_value(arg));
        else if (arg == "--strategy") a.overrides.emplace_back("infer.strategy", take_value(arg));
        else if (arg == "--dump-pgm") a.dump_pgm = true;
        else if (arg.rfind("--", 0) == 0 && arg.find('.') != std::string::npos)
            a.overrides.emplace_back(arg.substr(2), take_value(arg));
        else
            throw ConfigError("unknown flag '" + arg + "'");
    }
    return a;
}

void echo_config(const CliArgs& a, const RunConfig& cfg) {
    fs::create_directories(a.out_dir);
    std::ofstream f(fs::path(a.out_dir) / "config_effective.txt");
    if (!f) throw IoError("cannot write effective config under " + a.out_dir);
    f << render_config(cfg);
}

void require_artifact(const std::string& path, const char* what, const char* prior_command) {
    if (path.empty())
        throw ConfigError(std::string("missing --") + what + " (produce it with `" + prior_command +
                          "` first)");
    if (!fs::exists(path))
        throw IoError(std::string(what) + " checkpoint not found: " + path + " (run `" +
                      prior_command + "` first)");
}

std::string ckpt_path(const CliArgs& a, const char* stem) {
    return (fs::path(a.out_dir) / (std::string(stem) + ".lpnw")).string();
}

int cmd_gen_data(const CliArgs& a, const RunConfig& cfg) {
    echo_config(a, cfg);
    for (const char* split : {"train", "val", "test"}) {
        Corpus c = make_corpus(cfg.corpus, split, cfg.seed);
        save_corpus(a.out_dir, c);
        std::printf("gen-data: wrote %zu %s samples under %s\n", c.samples.size(), split,
                    a.out_dir.c_str());
    }
    return 0;
}

int cmd_pretrain_denoiser(const CliArgs& a, const RunConfig& cfg) {
    if (a.data_dir.empty()) throw ConfigError("missing --data (produce it with `gen-data` first)");
    echo_config(a, cfg);
    Corpus train = load_corpus(a.data_dir, "train");
    Corpus val = load_corpus(a.data_dir, "val");
    auto sched = cfg.make_schedule();
    TrainReport rep;
    TrainConfig tc = cfg.train_config(cfg.denoiser_iters, a.out_dir);
    tc.snapshot = [&](int iter, const NetworkParams& p) {
        save_checkpoint((fs::path(a.out_dir) / ("denoiser_iter" + std::to_string(iter) + ".lpnw")).string(), p, sched);
    };
    NetworkParams den = pretrain_denoiser(train, val, sched, tc, &rep);
    save_checkpoint(ckpt_path(a, "denoiser"), den, sched);
    rep.checkpoint_path = ckpt_path(a, "denoiser");
    write_train_report((fs::path(a.out_dir) / "denoiser_report.tsv").string(), rep);
    std::printf("pretrain-denoiser: val_l1 %.6f (identity baseline %.6f) in %.1fs -> %s\n",
                rep.final_val_metric, rep.baseline_val_metric, rep.wall_seconds,
                ckpt_path(a, "denoiser").c_str());
    return 0;
}

int cmd_pretrain_upsampler(const CliArgs& a, const RunConfig& cfg) {
    if (a.data_dir.empty()) throw ConfigError("missing --data (produce it with `gen-data` first)");
    echo_config(a, cfg);
    Corpus train = load_corpus(a.data_dir, "train");
    Corpus val = load_corpus(a.data_dir, "val");
    auto sched = cfg.make_schedule();
    TrainReport rep;
    TrainConfig tc = cfg.train_config(cfg.upsampler_iters, a.out_dir);
    tc.snapshot = [&](int iter, const NetworkParams& p) {
        save_checkpoint((fs::path(a.out_dir) / ("upsampler_iter" + std::to_string(iter) + ".lpnw")).string(), p, sched);
    };
    NetworkParams up = pretrain_upsampler(train, val, tc, &rep);
    save_checkpoint(ckpt_path(a, "upsampler"), up, sched);
    rep.checkpoint_path = ckpt_path(a, "upsampler");
    write_train_report((fs::path(a.out_dir) / "upsampler_report.tsv").string(), rep);
    std::printf("pretrain-upsampler: val_l1 %.6f (bicubic baseline %.6f)%s in %.1fs -> %s\n",
                rep.final_val_metric, rep.baseline_val_metric,
                rep.beat_baseline ? "" : " [did NOT beat bicubic]", rep.wall_seconds,
                ckpt_path(a, "upsampler").c_str());
    return 0;
}

int cmd_train_predictor(const CliArgs& a, const RunConfig& cfg) {
    if (a.data_dir.empty()) throw ConfigError("missing --data (produce it with `gen-data` first)");
    require_artifact(a.denoiser_path, "denoiser", "pretrain-denoiser");
    echo_config(a, cfg);
    Corpus train = load_corpus(a.data_dir, "train");
    Corpus val = load_corpus(a.data_dir, "val");
    auto sched = cfg.make_schedule();
    NetworkParams den = load_checkpoint(a.denoiser_path, "denoiser", sched);
    TrainReport rep;
    TrainConfig tc = cfg.train_config(cfg.predictor_iters, a.out_dir);
    tc.snapshot = [&](int iter, const NetworkParams& p) {
        save_checkpoint((fs::path(a.out_dir) / ("predictor_iter" + std::to_string(iter) + ".lpnw")).string(), p, sched);
    };
    NetworkParams pred = train_predictor(train, val, sched, den, tc, &rep);
    save_checkpoint(ckpt_path(a, "predictor"), pred, sched);
    rep.checkpoint_path = ckpt_path(a, "predictor");
    write_train_report((fs::path(a.out_dir) / "predictor_report.tsv").string(), rep);
    std::printf("train-predictor: val_loss %.6f (init %.6f) in %.1fs -> %s\n",
                rep.final_val_metric, rep.initial_val_metric, rep.wall_seconds,
                ckpt_path(a, "predictor").c_str());
    return 0;
}

int cmd_infer(const CliArgs& a, const RunConfig& cfg) {
    if (a.input_path.empty()) throw ConfigError("missing --input LR tensor (.lten)");
    require_artifact(a.denoiser_path, "denoiser", "pretrain-denoiser");
    echo_config(a, cfg);
    auto sched = cfg.make_schedule();

    NetworkParams den = load_checkpoint(a.denoiser_path, "denoiser", sched);
    std::optional<NetworkParams> pred, up;
    InferenceConfig icfg;
    icfg.t_start = cfg.infer_steps;
    icfg.init = init_mode_from_name(cfg.infer_init);
    icfg.strategy = noise_strategy_from_name(cfg.infer_strategy);
    icfg.seed = cfg.seed;
    if (icfg.strategy == NoiseStrategy::TheoreticalOptimal)
        throw ConfigError(
            "infer: theoretical_optimal needs ground truth; use eval-strategies instead");
    if (icfg.strategy == NoiseStrategy::Predicted && icfg.t_start > 1) {
        require_artifact(a.predictor_path, "predictor", "train-predictor");
        pred = load_checkpoint(a.predictor_path, "predictor", sched);
    }
    if (icfg.init == InitMode::Regression ||
        (icfg.strategy == NoiseStrategy::ApproximateOptimal && icfg.t_start > 1)) {
        require_artifact(a.upsampler_path, "upsampler", "pretrain-upsampler");
        up = load_checkpoint(a.upsampler_path, "upsampler", sched);
    }

    Tensor y_lr = read_tensor(a.input_path);
    if (y_lr.ndim() != 4) throw DimensionError("infer: input must be a [1,C,h,w] LTEN tensor");

    Networks nets;
    nets.denoiser = make_denoiser(den);
    if (pred) nets.predictor = &*pred;
    if (up) nets.upsampler = &*up;

    Tensor sr = infer(y_lr, std::nullopt, icfg, nets, sched);
    const std::string out_lten = (fs::path(a.out_dir) / "sr.lten").string();
    write_tensor(out_lten, sr);
    if (sr.dim(1) == 1) export_pgm((fs::path(a.out_dir) / "sr.pgm").string(), sr);
    std::printf("infer: %dx%d -> %dx%d, steps=%d init=%s strategy=%s -> %s\n", y_lr.dim(2),
                y_lr.dim(3), sr.dim(2), sr.dim(3), icfg.t_start, cfg.infer_init.c_str(),
                cfg.infer_strategy.c_str(), out_lten.c_str());
    return 0;
}

Networks load_eval_networks(const CliArgs& a, const DiffusionSchedule& sched,
                            std::optional<NetworkParams>& den, std::optional<NetworkParams>& pred,
                            std::optional<NetworkParams>& up) {
    require_artifact(a.denoiser_path, "denoiser", "pretrain-denoiser");
    require_artifact(a.predictor_path, "predictor", "train-predictor");
    require_artifact(a.upsampler_path, "upsampler", "pretrain-upsampler");
    den = load_checkpoint(a.denoiser_path, "denoiser", sched);
    pred = load_checkpoint(a.predictor_path, "predictor", sched);
    up = load_checkpoint(a.upsampler_path, "upsampler", sched);
    Networks nets;
    nets.denoiser = make_denoiser(*den);
    nets.predictor = &*pred;
    nets.upsampler = &*up;
    return nets;
}

// First-sample visualization triple per configuration (grayscale corpora).
void dump_eval_pgms(const CliArgs& a, const Corpus& test, const Networks& nets,
                    const DiffusionSchedule& sched, const InferenceConfig& icfg,
                    const std::string& label) {
    if (!a.dump_pgm || test.samples.empty() || test.samples[0].x0.dim(1) != 1) return;
    const PairedSample& s = test.samples[0];
    const fs::path dir = fs::path(a.out_dir) / "pgm";
    fs::create_directories(dir);
    Tensor sr = infer(s.y_lr, s.x0, icfg, nets, sched);
    export_pgm((dir / (label + "_input.pgm")).string(), s.y0);
    export_pgm((dir / (label + "_output.pgm")).string(), sr);
    export_pgm((dir / (label + "_target.pgm")).string(), s.x0);
}

int cmd_eval_steps(const CliArgs& a, const RunConfig& cfg) {
    if (a.data_dir.empty()) throw ConfigError("missing --data (produce it with `gen-data` first)");
    echo_config(a, cfg);
    auto sched = cfg.make_schedule();
    std::optional<NetworkParams> den, pred, up;
    Networks nets = load_eval_networks(a, sched, den, pred, up);
    Corpus test = load_corpus(a.data_dir, "test");
    auto rows = step_sweep(test, nets, sched, cfg.seed);
    write_eval_table((fs::path(a.out_dir) / "steps.tsv").string(), rows);
    for (InitMode init : {InitMode::Bicubic, InitMode::Regression})
        for (int t_start = 1; t_start <= sched.T; ++t_start) {
            InferenceConfig icfg;
            icfg.t_start = t_start;
            icfg.init = init;
            icfg.strategy = NoiseStrategy::Predicted;
            icfg.seed = cfg.seed;
            dump_eval_pgms(a, test, nets, sched, icfg,
                           std::string(init_mode_name(init)) + "-t" + std::to_string(t_start));
        }
    std::printf("%s", format_eval_table(rows, true).c_str());
    return 0;
}

int cmd_eval_strategies(const CliArgs& a, const RunConfig& cfg) {
    if (a.data_dir.empty()) throw ConfigError("missing --data (produce it with `gen-data` first)");
    echo_config(a, cfg);
    auto sched = cfg.make_schedule();
    std::optional<NetworkParams> den, pred, up;
    Networks nets = load_eval_networks(a, sched, den, pred, up);
    Corpus test = load_corpus(a.data_dir, "test");
    auto rows = compare_strategies(test, nets, sched, cfg.seed, cfg.eval_seeds);
    write_eval_table((fs::path(a.out_dir) / "strategies.tsv").string(), rows);
    for (NoiseStrategy st : {NoiseStrategy::RandomGaussian, NoiseStrategy::ApproximateOptimal,
                             NoiseStrategy::Predicted, NoiseStrategy::TheoreticalOptimal}) {
        InferenceConfig icfg;
        icfg.t_start = sched.T;
        icfg.init = InitMode::Regression;
        icfg.strategy = st;
        icfg.seed = cfg.seed;
        dump_eval_pgms(a, test, nets, sched, icfg, noise_strategy_name(st));
    }
    std::printf("%s", format_eval_table(rows, true).c_str());
    return 0;
}

int cmd_verify(const CliArgs& a, const RunConfig& cfg) {
    echo_config(a, cfg);
    VerifyConfig vcfg;
    vcfg.seed = cfg.seed;
    vcfg.sched = cfg.make_schedule();
    std::optional<NetworkParams> den;
    if (!a.denoiser_path.empty()) {
        require_artifact(a.denoiser_path, "denoiser", "pretrain-denoiser");
        den = load_checkpoint(a.denoiser_path, "denoiser", vcfg.sched);
        vcfg.trained_denoiser = &*den;
    }
    VerificationReport rep = run_all_verifications(vcfg);
    const std::string text = rep.to_text();
    std::ofstream f(fs::path(a.out_dir) / "verify_report.txt");
    if (!f) throw IoError("cannot write verify report under " + a.out_dir);
    f << text;
    std::printf("%s", text.c_str());
    return rep.all_pass() ? 0 : 1;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
    CliArgs a;
    try {
        a = parse_args(args);
    } catch (const ConfigError& e) {
        return usage_error(e.what());
    }

    using Handler = int (*)(const CliArgs&, const RunConfig&);
    Handler handler = nullptr;
    if (a.subcommand == "gen-data") handler = cmd_gen_data;
    else if (a.subcommand == "pretrain-denoiser") handler = cmd_pretrain_denoiser;
    else if (a.subcommand == "pretrain-upsampler") handler = cmd_pretrain_upsampler;
    else if (a.subcommand == "train-predictor") handler = cmd_train_predictor;
    else if (a.subcommand == "infer") handler = cmd_infer;
    else if (a.subcommand == "eval-steps") handler = cmd_eval_steps;
    else if (a.subcommand == "eval-strategies") handler = cmd_eval_strategies;
    else if (a.subcommand == "verify") handler = cmd_verify;
    else if (a.subcommand == "--help" || a.subcommand == "-h" || a.subcommand == "help") {
        std::printf("%s\nconfig keys:\n%s", kUsage, config_key_reference().c_str());
        return 0;
    } else {
        return usage_error("unknown subcommand '" + a.subcommand + "'");
    }

    if (a.help) {
        std::printf("%s\nconfig keys:\n%s", kUsage, config_key_reference().c_str());
        return 0;
    }

    try {
        RunConfig cfg = load_config(a.config_path, a.overrides);
        return handler(a, cfg);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace lpnsr
