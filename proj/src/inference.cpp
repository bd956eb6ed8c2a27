#include "lpnsr/inference.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "lpnsr/ops.hpp"
#include "lpnsr/rng.hpp"

namespace lpnsr {

const char* init_mode_name(InitMode m) {
    return m == InitMode::Bicubic ? "bicubic" : "regression";
}

InitMode init_mode_from_name(const std::string& name) {
    if (name == "bicubic") return InitMode::Bicubic;
    if (name == "regression") return InitMode::Regression;
    throw ConfigError("unknown init mode '" + name + "' (expected bicubic|regression)");
}

namespace {

Tensor normal_tensor(std::vector<int> shape, Rng& rng) {
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.numel(); ++i) t.data()[i] = static_cast<float>(rng.normal());
    return t;
}

void check_config(const InferenceConfig& cfg, const Networks& nets,
                  const std::optional<Tensor>& x0_truth, const DiffusionSchedule& sched) {
    if (cfg.t_start < 1 || cfg.t_start > sched.T)
        throw DomainError("infer: t_start out of range 1..T");
    if (!nets.denoiser) throw ConfigError("infer: a denoiser is required");
    if (cfg.init == InitMode::Regression && nets.upsampler == nullptr)
        throw ConfigError("infer: regression init requires an upsampler network");
    if (cfg.t_start > 1) {
        if (cfg.strategy == NoiseStrategy::Predicted && nets.predictor == nullptr)
            throw ConfigError("infer: the Predicted strategy requires a predictor network");
        if (cfg.strategy == NoiseStrategy::ApproximateOptimal && nets.upsampler == nullptr)
            throw ConfigError("infer: the ApproximateOptimal strategy requires an upsampler network");
        if (cfg.strategy == NoiseStrategy::TheoreticalOptimal && !x0_truth.has_value())
            throw ConfigError("infer: the TheoreticalOptimal strategy requires ground truth");
    }
}

}  // namespace

Tensor infer(const Tensor& y_lr, const std::optional<Tensor>& x0_truth,
             const InferenceConfig& cfg, const Networks& nets, const DiffusionSchedule& sched) {
    check_config(cfg, nets, x0_truth, sched);

    Tensor y0 = ops::bicubic_up(nullptr, y_lr, 4);  // denoiser conditioning
    Tensor start = cfg.init == InitMode::Regression
                       ? upsampler_forward(nullptr, *nets.upsampler, y_lr)
                       : y0;

    Tensor x0_sub;  // pre-upsampled stand-in for the ground truth
    if (cfg.strategy == NoiseStrategy::ApproximateOptimal && cfg.t_start > 1)
        x0_sub = upsampler_forward(nullptr, *nets.upsampler, y_lr);

    Rng rng(Rng::derive(cfg.seed, "infer", 0));
    Tensor x = init_state(nullptr, start, cfg.t_start, sched, normal_tensor(start.shape(), rng));

    Tensor out;
    for (int t = cfg.t_start; t >= 1; --t) {
        Tensor x0p = nets.denoiser(nullptr, x, y0, t);
        if (t == 1) {
            out = x0p;
            break;
        }
        ReverseMoments m = reverse_moments(nullptr, x, x0p, t, sched);
        Tensor z;
        switch (cfg.strategy) {
            case NoiseStrategy::RandomGaussian: z = normal_tensor(x.shape(), rng); break;
            case NoiseStrategy::Zero: z = Tensor::zeros_like(x); break;
            case NoiseStrategy::Predicted:
                z = predictor_forward(nullptr, *nets.predictor, x, x0p, y0, t);
                break;
            case NoiseStrategy::ApproximateOptimal:
                z = optimal_noise(nullptr, x0_sub, y0, m, t, sched);
                break;
            case NoiseStrategy::TheoreticalOptimal:
                z = optimal_noise(nullptr, *x0_truth, y0, m, t, sched);
                break;
        }
        x = reverse_step_from_moments(nullptr, m, t, sched, z);
    }
    return out;
}

namespace {

constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

// 7x7 Gaussian window, sigma 1.5, normalized.
const std::vector<double>& ssim_window() {
    static const std::vector<double> w = [] {
        std::vector<double> win(49);
        double sum = 0.0;
        for (int y = 0; y < 7; ++y)
            for (int x = 0; x < 7; ++x) {
                const double dy = y - 3, dx = x - 3;
                win[y * 7 + x] = std::exp(-(dx * dx + dy * dy) / (2.0 * 1.5 * 1.5));
                sum += win[y * 7 + x];
            }
        for (double& v : win) v /= sum;
        return win;
    }();
    return w;
}

}  // namespace

Metrics compute_metrics(const Tensor& pred, const Tensor& target) {
    if (!pred.same_shape(target)) throw DimensionError("metrics: shape mismatch");
    if (pred.ndim() != 4) throw DimensionError("metrics: expected [B,C,H,W]");
    const int B = pred.dim(0), C = pred.dim(1), H = pred.dim(2), W = pred.dim(3);

    Metrics m;
    // [-1,1] -> [0,1]
    const std::size_t n = pred.numel();
    std::vector<double> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
        a[i] = (static_cast<double>(pred.data()[i]) + 1.0) / 2.0;
        b[i] = (static_cast<double>(target.data()[i]) + 1.0) / 2.0;
    }

    double mse = 0.0;
    for (std::size_t i = 0; i < n; ++i) mse += (a[i] - b[i]) * (a[i] - b[i]);
    mse /= static_cast<double>(n);
    m.psnr = mse < 1e-12 ? std::numeric_limits<double>::infinity() : 10.0 * std::log10(1.0 / mse);

    // Mean SSIM over all fully-contained 7x7 windows.
    const auto& win = ssim_window();
    double ssim_sum = 0.0;
    std::size_t windows = 0;
    for (int bi = 0; bi < B; ++bi)
        for (int ci = 0; ci < C; ++ci) {
            const std::size_t base = (static_cast<std::size_t>(bi) * C + ci) * H * W;
            for (int y = 0; y + 7 <= H; ++y)
                for (int x = 0; x + 7 <= W; ++x) {
                    double mu_a = 0, mu_b = 0;
                    for (int wy = 0; wy < 7; ++wy)
                        for (int wx = 0; wx < 7; ++wx) {
                            const double wv = win[wy * 7 + wx];
                            const std::size_t off = base + static_cast<std::size_t>(y + wy) * W + (x + wx);
                            mu_a += wv * a[off];
                            mu_b += wv * b[off];
                        }
                    double var_a = 0, var_b = 0, cov = 0;
                    for (int wy = 0; wy < 7; ++wy)
                        for (int wx = 0; wx < 7; ++wx) {
                            const double wv = win[wy * 7 + wx];
                            const std::size_t off = base + static_cast<std::size_t>(y + wy) * W + (x + wx);
                            const double da = a[off] - mu_a, db = b[off] - mu_b;
                            var_a += wv * da * da;
                            var_b += wv * db * db;
                            cov += wv * da * db;
                        }
                    ssim_sum += ((2.0 * mu_a * mu_b + kC1) * (2.0 * cov + kC2)) /
                                ((mu_a * mu_a + mu_b * mu_b + kC1) * (var_a + var_b + kC2));
                    ++windows;
                }
        }
    if (windows == 0) throw DimensionError("metrics: image smaller than the SSIM window");
    m.ssim = ssim_sum / static_cast<double>(windows);

    m.l1 = ops::l1_loss(nullptr, pred, target).item();
    m.proxy = ops::l1_loss(nullptr, ops::edge_features(nullptr, pred),
                           ops::edge_features(nullptr, target)).item();
    return m;
}

namespace {

struct Accum {
    double psnr = 0, ssim = 0, l1 = 0, proxy = 0, seconds = 0;
    std::size_t count = 0;
    void add(const Metrics& m, double secs) {
        psnr += m.psnr;  // +inf propagates by design (exact recovery sentinel)
        ssim += m.ssim;
        l1 += m.l1;
        proxy += m.proxy;
        seconds += secs;
        ++count;
    }
    EvalRow row(std::string config) const {
        EvalRow r;
        r.config = std::move(config);
        const double n = static_cast<double>(count);
        r.psnr = psnr / n;
        r.ssim = ssim / n;
        r.l1 = l1 / n;
        r.proxy = proxy / n;
        r.runtime_s = seconds / n;
        return r;
    }
};

EvalRow eval_config(const Corpus& test, const Networks& nets, const DiffusionSchedule& sched,
                    const InferenceConfig& base_cfg, std::uint64_t seed, int n_seeds,
                    const std::string& label) {
    Accum acc;
    for (int k = 0; k < n_seeds; ++k) {
        for (std::size_t i = 0; i < test.samples.size(); ++i) {
            const PairedSample& s = test.samples[i];
            InferenceConfig cfg = base_cfg;
            cfg.seed = Rng::derive(seed + static_cast<std::uint64_t>(k), "eval-image", i);
            const auto t0 = std::chrono::steady_clock::now();
            Tensor sr = infer(s.y_lr, s.x0, cfg, nets, sched);
            const double secs =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            acc.add(compute_metrics(sr, s.x0), secs);
        }
    }
    return acc.row(label);
}

}  // namespace

std::vector<EvalRow> compare_strategies(const Corpus& test, const Networks& nets,
                                        const DiffusionSchedule& sched, std::uint64_t seed,
                                        int n_seeds) {
    std::vector<EvalRow> rows;
    InferenceConfig cfg;
    cfg.t_start = sched.T;
    cfg.init = InitMode::Regression;
    for (NoiseStrategy s : {NoiseStrategy::RandomGaussian, NoiseStrategy::ApproximateOptimal,
                            NoiseStrategy::Predicted, NoiseStrategy::TheoreticalOptimal}) {
        cfg.strategy = s;
        rows.push_back(eval_config(test, nets, sched, cfg, seed, n_seeds, noise_strategy_name(s)));
    }
    return rows;
}

std::vector<EvalRow> step_sweep(const Corpus& test, const Networks& nets,
                                const DiffusionSchedule& sched, std::uint64_t seed) {
    std::vector<EvalRow> rows;
    for (InitMode init : {InitMode::Bicubic, InitMode::Regression}) {
        for (int t_start = 1; t_start <= sched.T; ++t_start) {
            InferenceConfig cfg;
            cfg.t_start = t_start;
            cfg.init = init;
            cfg.strategy = NoiseStrategy::Predicted;
            std::ostringstream label;
            label << init_mode_name(init) << "-t" << t_start;
            rows.push_back(eval_config(test, nets, sched, cfg, seed, 1, label.str()));
        }
    }
    return rows;
}

std::string format_eval_table(const std::vector<EvalRow>& rows, bool with_runtime) {
    std::ostringstream out;
    out << "config\tpsnr\tssim\tl1\tproxy";
    if (with_runtime) out << "\truntime_s";
    out << "\n";
    char buf[256];
    for (const auto& r : rows) {
        if (std::isinf(r.psnr))
            std::snprintf(buf, sizeof(buf), "%s\tinf\t%.6f\t%.6f\t%.6f", r.config.c_str(), r.ssim,
                          r.l1, r.proxy);
        else
            std::snprintf(buf, sizeof(buf), "%s\t%.4f\t%.6f\t%.6f\t%.6f", r.config.c_str(), r.psnr,
                          r.ssim, r.l1, r.proxy);
        out << buf;
        if (with_runtime) {
            std::snprintf(buf, sizeof(buf), "\t%.4f", r.runtime_s);
            out << buf;
        }
        out << "\n";
    }
    return out.str();
}

void write_eval_table(const std::string& path, const std::vector<EvalRow>& rows) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write eval table: " + path);
    f << format_eval_table(rows, false);
}

}  // namespace lpnsr
