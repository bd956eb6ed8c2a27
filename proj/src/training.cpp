#include "lpnsr/training.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "lpnsr/diffusion.hpp"
#include "lpnsr/ops.hpp"
#include "lpnsr/rng.hpp"

namespace lpnsr {

void TrainConfig::validate() const {
    if (iterations < 0) throw ConfigError("train: iterations must be >= 0");
    if (batch < 1) throw ConfigError("train: batch must be >= 1");
    if (lambda1 < 0.0f || lambda_l < 0.0f || lambda_g < 0.0f)
        throw ConfigError("train: loss weights must be >= 0");
    if (eval_every < 1) throw ConfigError("train: eval_every must be >= 1");
    if (checkpoint_every < 0) throw ConfigError("train: checkpoint_every must be >= 0");
    if (adam.lr <= 0.0f) throw ConfigError("train: learning rate must be > 0");
}

void write_train_report(const std::string& path, const TrainReport& report) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write train report: " + path);
    f << "iter\tloss\tval_l1\n";
    char line[128];
    for (const auto& row : report.rows) {
        std::snprintf(line, sizeof(line), "%d\t%.8f\t%.8f", row.iter, row.train_loss, row.val_l1);
        f << line << "\n";
    }
}

Tensor loss_total(Tape* tape, const Tensor& pred, const Tensor& target,
                  float lambda1, float lambda_l, float lambda_g) {
    if (lambda1 < 0.0f || lambda_l < 0.0f || lambda_g < 0.0f)
        throw ConfigError("loss_total: weights must be >= 0");
    Tensor l1 = ops::l1_loss(tape, pred, target);
    Tensor proxy = ops::l1_loss(tape, ops::edge_features(tape, pred), ops::edge_features(tape, target));
    Tensor total = ops::add(tape, ops::mul_scalar(tape, l1, lambda1), ops::mul_scalar(tape, proxy, lambda_l));
    // Adversarial slot: structurally present, contributes zero (out of scope).
    return ops::add(tape, total, ops::mul_scalar(tape, Tensor::scalar(0.0f), lambda_g));
}

double perceptual_proxy(const Tensor& pred, const Tensor& target) {
    return ops::l1_loss(nullptr, ops::edge_features(nullptr, pred),
                        ops::edge_features(nullptr, target)).item();
}

Tensor stack_batch(const std::vector<const Tensor*>& parts) {
    if (parts.empty()) throw DimensionError("stack_batch: empty list");
    const Tensor& first = *parts.front();
    if (first.ndim() != 4 || first.dim(0) != 1)
        throw DimensionError("stack_batch: expected [1,C,H,W] parts");
    Tensor out({static_cast<int>(parts.size()), first.dim(1), first.dim(2), first.dim(3)});
    const std::size_t stride = first.numel();
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (!parts[i]->same_shape(first)) throw DimensionError("stack_batch: shape mismatch");
        std::memcpy(out.data() + i * stride, parts[i]->data(), stride * sizeof(float));
    }
    return out;
}

namespace {

Tensor normal_tensor(std::vector<int> shape, Rng& rng) {
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.numel(); ++i) t.data()[i] = static_cast<float>(rng.normal());
    return t;
}

std::vector<std::size_t> draw_batch(Rng& rng, std::size_t corpus_size, int batch) {
    std::vector<std::size_t> idx(static_cast<std::size_t>(batch));
    for (auto& i : idx) i = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(corpus_size) - 1));
    return idx;
}

struct Batch {
    Tensor x0;
    Tensor y0;
    Tensor y_lr;
};

Batch collect(const Corpus& corpus, const std::vector<std::size_t>& idx) {
    std::vector<const Tensor*> x0s, y0s, ylrs;
    for (std::size_t i : idx) {
        x0s.push_back(&corpus.samples[i].x0);
        y0s.push_back(&corpus.samples[i].y0);
        ylrs.push_back(&corpus.samples[i].y_lr);
    }
    return {stack_batch(x0s), stack_batch(y0s), stack_batch(ylrs)};
}

void dump_nan_state(const std::string& dir, const char* phase, int iter, const Batch& batch) {
    if (dir.empty()) return;
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const std::string stem = dir + "/nan_" + phase + "_iter" + std::to_string(iter);
    write_tensor(stem + "_x0.lten", batch.x0);
    write_tensor(stem + "_y0.lten", batch.y0);
}

void record_grad_norms(NetworkParams& p, std::vector<std::pair<std::string, double>>& out) {
    out.clear();
    for (auto& [name, t] : p.entries) out.emplace_back(name, t.grad_norm());
}

// Validation pass over the val split in batches; fixed noise per (sample, t).
double denoiser_val_l1_impl(const NetworkParams& den, const Corpus& val,
                            const DiffusionSchedule& sched, std::uint64_t seed,
                            std::vector<double>* per_t, bool identity) {
    const int batch = 8;
    std::vector<double> acc(static_cast<std::size_t>(sched.T), 0.0);
    std::vector<std::size_t> count(static_cast<std::size_t>(sched.T), 0);
    for (std::size_t start = 0; start < val.samples.size(); start += batch) {
        std::vector<std::size_t> idx;
        for (std::size_t i = start; i < std::min(start + batch, val.samples.size()); ++i)
            idx.push_back(i);
        Batch b = collect(val, idx);
        for (int t = 1; t <= sched.T; ++t) {
            Rng rng(Rng::derive(seed, "val-eps", static_cast<std::uint64_t>(start) * 17 + t));
            Tensor eps = normal_tensor(b.x0.shape(), rng);
            Tensor x_t = forward_marginal(nullptr, b.x0, b.y0, t, sched, eps);
            Tensor pred = identity ? x_t : denoiser_forward(nullptr, den, x_t, b.y0, t);
            acc[t - 1] += ops::l1_loss(nullptr, pred, b.x0).item() * static_cast<double>(idx.size());
            count[t - 1] += idx.size();
        }
    }
    double total = 0.0;
    for (int t = 0; t < sched.T; ++t) {
        acc[t] /= static_cast<double>(count[t]);
        total += acc[t];
    }
    if (per_t) *per_t = acc;
    return total / sched.T;
}

}  // namespace

DenoiserEval eval_denoiser(const NetworkParams& den, const Corpus& val,
                           const DiffusionSchedule& sched, std::uint64_t seed) {
    DenoiserEval e;
    e.val_l1 = denoiser_val_l1_impl(den, val, sched, seed, &e.per_t_val, false);
    e.identity_l1 = denoiser_val_l1_impl(den, val, sched, seed, &e.per_t_identity, true);
    return e;
}

double eval_bicubic_l1(const Corpus& val) {
    double acc = 0.0;
    for (const auto& s : val.samples)
        acc += ops::l1_loss(nullptr, s.y0, s.x0).item();
    return acc / static_cast<double>(val.samples.size());
}

double eval_upsampler_l1(const NetworkParams& up, const Corpus& val) {
    double acc = 0.0;
    const int batch = 8;
    std::size_t n = 0;
    for (std::size_t start = 0; start < val.samples.size(); start += batch) {
        std::vector<std::size_t> idx;
        for (std::size_t i = start; i < std::min(start + batch, val.samples.size()); ++i)
            idx.push_back(i);
        Batch b = collect(val, idx);
        Tensor sr = upsampler_forward(nullptr, up, b.y_lr);
        acc += ops::l1_loss(nullptr, sr, b.x0).item() * static_cast<double>(idx.size());
        n += idx.size();
    }
    return acc / static_cast<double>(n);
}

ChainEval eval_predictor_chain(const NetworkParams& den, const NetworkParams& pred,
                               const Corpus& val, const DiffusionSchedule& sched,
                               float lambda1, float lambda_l, float lambda_g,
                               std::uint64_t seed) {
    ChainEval e;
    const int batch = 8;
    std::size_t n = 0;
    for (std::size_t start = 0; start < val.samples.size(); start += batch) {
        std::vector<std::size_t> idx;
        for (std::size_t i = start; i < std::min(start + batch, val.samples.size()); ++i)
            idx.push_back(i);
        Batch b = collect(val, idx);
        Rng rng(Rng::derive(seed, "val-chain", start));
        Tensor x = init_state(nullptr, b.y0, sched.T, sched, normal_tensor(b.y0.shape(), rng));
        Tensor out;
        for (int t = sched.T; t >= 1; --t) {
            Tensor x0p = denoiser_forward(nullptr, den, x, b.y0, t);
            if (t > 1) {
                Tensor z = predictor_forward(nullptr, pred, x, x0p, b.y0, t);
                x = reverse_step(nullptr, x, x0p, t, sched, z);
            } else {
                out = x0p;
            }
        }
        const double w = static_cast<double>(idx.size());
        e.loss += loss_total(nullptr, out, b.x0, lambda1, lambda_l, lambda_g).item() * w;
        e.l1 += ops::l1_loss(nullptr, out, b.x0).item() * w;
        e.proxy += perceptual_proxy(out, b.x0) * w;
        n += idx.size();
    }
    e.loss /= static_cast<double>(n);
    e.l1 /= static_cast<double>(n);
    e.proxy /= static_cast<double>(n);
    return e;
}

NetworkParams pretrain_denoiser(const Corpus& train, const Corpus& val,
                                const DiffusionSchedule& sched, const TrainConfig& cfg,
                                TrainReport* report) {
    cfg.validate();
    if (train.samples.empty()) throw ConfigError("pretrain_denoiser: empty corpus");
    const auto t0 = std::chrono::steady_clock::now();

    const int channels = train.samples[0].x0.dim(1);
    NetworkParams den = init_params(denoiser_arch(channels, kDefaultWidth, sched.T),
                                    Rng::derive(cfg.seed, "init-denoiser", 0));
    den.set_trainable(true);
    std::vector<Tensor> tensors = den.tensors();
    AdamState adam;
    adam.init(tensors, cfg.adam);

    TrainReport rep;
    rep.initial_val_metric = denoiser_val_l1_impl(den, val, sched, cfg.seed, nullptr, false);
    rep.baseline_val_metric = denoiser_val_l1_impl(den, val, sched, cfg.seed, nullptr, true);

    Rng rng(Rng::derive(cfg.seed, "train-denoiser", 0));
    for (int iter = 1; iter <= cfg.iterations; ++iter) {
        Batch b = collect(train, draw_batch(rng, train.samples.size(), cfg.batch));
        const int t = rng.uniform_int(1, sched.T);
        Tensor eps = normal_tensor(b.x0.shape(), rng);

        den.zero_grad();
        Tape tape;
        Tensor x_t = forward_marginal(&tape, b.x0, b.y0, t, sched, eps);
        Tensor pred = denoiser_forward(&tape, den, x_t, b.y0, t);
        Tensor loss = ops::l1_loss(&tape, pred, b.x0);
        if (!std::isfinite(loss.item())) {
            dump_nan_state(cfg.diag_dir, "denoiser", iter, b);
            throw Error("pretrain_denoiser: NaN loss at iteration " + std::to_string(iter));
        }
        backward(loss, tape);
        adam.step(tensors);

        if (iter % cfg.eval_every == 0 || iter == cfg.iterations) {
            TrainReportRow row;
            row.iter = iter;
            row.train_loss = loss.item();
            row.val_l1 = denoiser_val_l1_impl(den, val, sched, cfg.seed, nullptr, false);
            rep.rows.push_back(row);
        }
        if (cfg.snapshot && cfg.checkpoint_every > 0 && iter % cfg.checkpoint_every == 0)
            cfg.snapshot(iter, den);
    }
    record_grad_norms(den, rep.last_grad_norms_trained);
    rep.final_val_metric = cfg.iterations > 0 ? rep.rows.back().val_l1 : rep.initial_val_metric;
    rep.beat_baseline = rep.final_val_metric < rep.baseline_val_metric;
    rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (report) *report = rep;
    return den;
}

NetworkParams pretrain_upsampler(const Corpus& train, const Corpus& val,
                                 const TrainConfig& cfg, TrainReport* report) {
    cfg.validate();
    if (train.samples.empty()) throw ConfigError("pretrain_upsampler: empty corpus");
    const auto t0 = std::chrono::steady_clock::now();

    const int channels = train.samples[0].x0.dim(1);
    NetworkParams up = init_params(upsampler_arch(channels, kDefaultWidth),
                                   Rng::derive(cfg.seed, "init-upsampler", 0));
    up.set_trainable(true);
    std::vector<Tensor> tensors = up.tensors();
    AdamState adam;
    adam.init(tensors, cfg.adam);

    TrainReport rep;
    rep.initial_val_metric = eval_upsampler_l1(up, val);
    rep.baseline_val_metric = eval_bicubic_l1(val);

    Rng rng(Rng::derive(cfg.seed, "train-upsampler", 0));
    for (int iter = 1; iter <= cfg.iterations; ++iter) {
        Batch b = collect(train, draw_batch(rng, train.samples.size(), cfg.batch));
        up.zero_grad();
        Tape tape;
        Tensor sr = upsampler_forward(&tape, up, b.y_lr);
        Tensor loss = ops::l1_loss(&tape, sr, b.x0);
        if (!std::isfinite(loss.item())) {
            dump_nan_state(cfg.diag_dir, "upsampler", iter, b);
            throw Error("pretrain_upsampler: NaN loss at iteration " + std::to_string(iter));
        }
        backward(loss, tape);
        adam.step(tensors);

        if (iter % cfg.eval_every == 0 || iter == cfg.iterations) {
            TrainReportRow row;
            row.iter = iter;
            row.train_loss = loss.item();
            row.val_l1 = eval_upsampler_l1(up, val);
            rep.rows.push_back(row);
        }
        if (cfg.snapshot && cfg.checkpoint_every > 0 && iter % cfg.checkpoint_every == 0)
            cfg.snapshot(iter, up);
    }
    record_grad_norms(up, rep.last_grad_norms_trained);
    rep.final_val_metric = cfg.iterations > 0 ? rep.rows.back().val_l1 : rep.initial_val_metric;
    rep.beat_baseline = rep.final_val_metric < rep.baseline_val_metric;
    rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (report) *report = rep;
    return up;
}

NetworkParams train_predictor(const Corpus& train, const Corpus& val,
                              const DiffusionSchedule& sched, const NetworkParams& denoiser,
                              const TrainConfig& cfg, TrainReport* report) {
    cfg.validate();
    if (train.samples.empty()) throw ConfigError("train_predictor: empty corpus");
    if (sched.T < 2) throw ConfigError("train_predictor: needs T >= 2 (no intermediate steps at T=1)");
    const auto t0 = std::chrono::steady_clock::now();

    // The denoiser is frozen for the whole phase.
    NetworkParams den = denoiser;  // shallow copies share buffers
    den.set_trainable(false);

    const int channels = train.samples[0].x0.dim(1);
    NetworkParams pred = init_params(predictor_arch(channels, kDefaultWidth, sched.T),
                                     Rng::derive(cfg.seed, "init-predictor", 0));
    pred.set_trainable(true);
    std::vector<Tensor> tensors = pred.tensors();
    AdamState adam;
    adam.init(tensors, cfg.adam);

    TrainReport rep;
    {
        ChainEval e0 = eval_predictor_chain(den, pred, val, sched, cfg.lambda1, cfg.lambda_l,
                                            cfg.lambda_g, cfg.seed);
        rep.initial_val_metric = e0.loss;
        rep.baseline_val_metric = e0.loss;
    }

    Rng rng(Rng::derive(cfg.seed, "train-predictor", 0));
    for (int iter = 1; iter <= cfg.iterations; ++iter) {
        Batch b = collect(train, draw_batch(rng, train.samples.size(), cfg.batch));
        Tensor z_init = normal_tensor(b.y0.shape(), rng);

        pred.zero_grad();
        den.zero_grad();
        Tape tape;
        Tensor x = init_state(&tape, b.y0, sched.T, sched, z_init);
        Tensor out;
        for (int t = sched.T; t >= 1; --t) {
            Tensor x0p = denoiser_forward(&tape, den, x, b.y0, t);
            if (t > 1) {
                Tensor z = predictor_forward(&tape, pred, x, x0p, b.y0, t);
                x = reverse_step(&tape, x, x0p, t, sched, z);
            } else {
                out = x0p;
            }
        }
        Tensor loss = loss_total(&tape, out, b.x0, cfg.lambda1, cfg.lambda_l, cfg.lambda_g);
        if (!std::isfinite(loss.item())) {
            dump_nan_state(cfg.diag_dir, "predictor", iter, b);
            throw Error("train_predictor: NaN loss at iteration " + std::to_string(iter));
        }
        backward(loss, tape);

        if (iter == cfg.iterations) {
            record_grad_norms(pred, rep.last_grad_norms_trained);
            record_grad_norms(den, rep.last_grad_norms_frozen);
        }
        adam.step(tensors);

        if (iter % cfg.eval_every == 0 || iter == cfg.iterations) {
            ChainEval e = eval_predictor_chain(den, pred, val, sched, cfg.lambda1, cfg.lambda_l,
                                               cfg.lambda_g, cfg.seed);
            TrainReportRow row;
            row.iter = iter;
            row.train_loss = loss.item();
            row.val_l1 = e.l1;
            row.val_proxy = e.proxy;
            rep.rows.push_back(row);
            rep.final_val_metric = e.loss;
        }
        if (cfg.snapshot && cfg.checkpoint_every > 0 && iter % cfg.checkpoint_every == 0)
            cfg.snapshot(iter, pred);
    }
    if (cfg.iterations == 0) rep.final_val_metric = rep.initial_val_metric;
    rep.beat_baseline = rep.final_val_metric < rep.baseline_val_metric;
    rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (report) *report = rep;
    return pred;
}

}  // namespace lpnsr
