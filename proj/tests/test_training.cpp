#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "lpnsr/diffusion.hpp"
#include "lpnsr/ops.hpp"
#include "lpnsr/rng.hpp"
#include "lpnsr/training.hpp"

using namespace lpnsr;

namespace {

CorpusConfig tiny_corpus_cfg() {
    CorpusConfig cfg;
    cfg.train_size = 48;
    cfg.val_size = 16;
    cfg.test_size = 8;
    return cfg;
}

}  // namespace

TEST_CASE("loss_total basic behaviors") {
    Rng rng(71);
    Tensor a({1, 1, 6, 6});
    for (std::size_t i = 0; i < a.numel(); ++i) a.data()[i] = static_cast<float>(rng.uniform(-1, 1));

    CHECK(loss_total(nullptr, a, a, 1.0f, 1.0f, 0.1f).item() == 0.0f);

    // lambda_l = lambda_g = 0 reduces to plain L1.
    Tensor b = a.clone();
    for (std::size_t i = 0; i < b.numel(); ++i) b.data()[i] += static_cast<float>(rng.uniform(0, 0.2));
    const double plain = ops::l1_loss(nullptr, b, a).item();
    CHECK(loss_total(nullptr, b, a, 1.0f, 0.0f, 0.0f).item() == doctest::Approx(plain).epsilon(1e-6));

    // Constant offset: proxy is zero while L1 is not.
    Tensor off = a.clone();
    for (std::size_t i = 0; i < off.numel(); ++i) off.data()[i] += 0.3f;
    CHECK(perceptual_proxy(off, a) == doctest::Approx(0.0).epsilon(1e-5));
    CHECK(loss_total(nullptr, off, a, 0.0f, 1.0f, 0.0f).item() == doctest::Approx(0.0).epsilon(1e-5));
    CHECK(loss_total(nullptr, off, a, 1.0f, 1.0f, 0.0f).item() == doctest::Approx(0.3).epsilon(1e-5));

    // The adversarial slot contributes nothing.
    CHECK(loss_total(nullptr, b, a, 1.0f, 0.0f, 0.1f).item() ==
          doctest::Approx(loss_total(nullptr, b, a, 1.0f, 0.0f, 0.0f).item()).epsilon(1e-9));

    CHECK_THROWS_AS(loss_total(nullptr, a, a, -1.0f, 0.0f, 0.0f), ConfigError);
}

TEST_CASE("loss_total is batch-order invariant given fixed samples") {
    Rng rng(72);
    auto rnd = [&](std::vector<int> s) {
        Tensor t(s);
        for (std::size_t i = 0; i < t.numel(); ++i) t.data()[i] = static_cast<float>(rng.uniform(-1, 1));
        return t;
    };
    Tensor s0 = rnd({1, 1, 8, 8}), s1 = rnd({1, 1, 8, 8}), s2 = rnd({1, 1, 8, 8});
    Tensor t0 = rnd({1, 1, 8, 8}), t1 = rnd({1, 1, 8, 8}), t2 = rnd({1, 1, 8, 8});
    Tensor pred_a = stack_batch({&s0, &s1, &s2});
    Tensor targ_a = stack_batch({&t0, &t1, &t2});
    Tensor pred_b = stack_batch({&s2, &s0, &s1});
    Tensor targ_b = stack_batch({&t2, &t0, &t1});
    const double la = loss_total(nullptr, pred_a, targ_a, 1.0f, 1.0f, 0.1f).item();
    const double lb = loss_total(nullptr, pred_b, targ_b, 1.0f, 1.0f, 0.1f).item();
    CHECK(la == doctest::Approx(lb).epsilon(1e-6));
}

TEST_CASE("zero-iteration phases return the initialization unchanged") {
    auto sched = build_schedule(4, 0.001, 0.999, 2.0);
    auto cfg = tiny_corpus_cfg();
    Corpus train = make_corpus(cfg, "train", 5);
    Corpus val = make_corpus(cfg, "val", 5);

    TrainConfig tc;
    tc.iterations = 0;
    tc.seed = 9;

    TrainReport rep;
    NetworkParams den = pretrain_denoiser(train, val, sched, tc, &rep);
    NetworkParams fresh = init_params(denoiser_arch(1, kDefaultWidth, sched.T),
                                      Rng::derive(tc.seed, "init-denoiser", 0));
    for (std::size_t i = 0; i < den.entries.size(); ++i)
        CHECK(den.entries[i].second.vec() == fresh.entries[i].second.vec());

    // Zero-iteration upsampler is exactly bicubic.
    NetworkParams up = pretrain_upsampler(train, val, tc, &rep);
    CHECK(eval_upsampler_l1(up, val) == doctest::Approx(eval_bicubic_l1(val)).epsilon(1e-7));
}

TEST_CASE("short denoiser pretraining beats the identity baseline at every t") {
    auto sched = build_schedule(4, 0.001, 0.999, 2.0);
    auto ccfg = tiny_corpus_cfg();
    Corpus train = make_corpus(ccfg, "train", 15);
    Corpus val = make_corpus(ccfg, "val", 15);

    TrainConfig tc;
    tc.iterations = 600;
    tc.eval_every = 300;
    tc.seed = 1;

    TrainReport rep;
    NetworkParams den = pretrain_denoiser(train, val, sched, tc, &rep);
    auto eval = eval_denoiser(den, val, sched, tc.seed);
    REQUIRE(eval.per_t_val.size() == 4);
    for (int t = 0; t < 4; ++t) {
        INFO("t=", t + 1, " val=", eval.per_t_val[t], " identity=", eval.per_t_identity[t]);
        CHECK(eval.per_t_val[t] < eval.per_t_identity[t]);
    }
    // Denoising near t=1 is the easier problem.
    CHECK(eval.per_t_val[0] < eval.per_t_val[3]);
    CHECK(rep.beat_baseline);
    CHECK(rep.rows.size() == 2);
}

TEST_CASE("short upsampler pretraining beats bicubic") {
    auto ccfg = tiny_corpus_cfg();
    Corpus train = make_corpus(ccfg, "train", 25);
    Corpus val = make_corpus(ccfg, "val", 25);

    TrainConfig tc;
    tc.iterations = 400;
    tc.eval_every = 200;
    tc.seed = 2;

    TrainReport rep;
    NetworkParams up = pretrain_upsampler(train, val, tc, &rep);
    CHECK(rep.beat_baseline);
    CHECK(eval_upsampler_l1(up, val) < eval_bicubic_l1(val));
}

TEST_CASE("predictor training: frozen denoiser, gradient flow, loss reduction") {
    auto sched = build_schedule(4, 0.001, 0.999, 2.0);
    auto ccfg = tiny_corpus_cfg();
    Corpus train = make_corpus(ccfg, "train", 35);
    Corpus val = make_corpus(ccfg, "val", 35);

    TrainConfig dtc;
    dtc.iterations = 400;
    dtc.eval_every = 400;
    dtc.seed = 3;
    NetworkParams den = pretrain_denoiser(train, val, sched, dtc);
    const std::uint64_t den_sum_before = den.value_checksum();

    TrainConfig ptc;
    ptc.iterations = 120;
    ptc.eval_every = 60;
    ptc.seed = 4;
    TrainReport rep;
    NetworkParams pred = train_predictor(train, val, sched, den, ptc, &rep);

    // Phase 3 never mutates the denoiser.
    CHECK(den.value_checksum() == den_sum_before);

    // Frozen denoiser gradients are exactly zero in the last iteration.
    REQUIRE(!rep.last_grad_norms_frozen.empty());
    for (const auto& [name, g] : rep.last_grad_norms_frozen) CHECK(g == 0.0);

    // Every predictor tensor sees gradient once the zero head has moved.
    REQUIRE(!rep.last_grad_norms_trained.empty());
    for (const auto& [name, g] : rep.last_grad_norms_trained) {
        INFO("predictor tensor ", name);
        CHECK(g > 0.0);
    }

    // Validation loss dropped from initialization.
    CHECK(rep.final_val_metric < rep.initial_val_metric);
}

TEST_CASE("predictor training with all-zero weights is a no-op on parameters") {
    auto sched = build_schedule(4, 0.001, 0.999, 2.0);
    auto ccfg = tiny_corpus_cfg();
    Corpus train = make_corpus(ccfg, "train", 45);
    Corpus val = make_corpus(ccfg, "val", 45);

    TrainConfig dtc;
    dtc.iterations = 0;
    dtc.seed = 5;
    NetworkParams den = pretrain_denoiser(train, val, sched, dtc);

    TrainConfig ptc;
    ptc.iterations = 5;
    ptc.eval_every = 5;
    ptc.seed = 6;
    ptc.lambda1 = 0.0f;
    ptc.lambda_l = 0.0f;
    ptc.lambda_g = 0.0f;
    ptc.adam.weight_decay = 0.0f;
    NetworkParams pred = train_predictor(train, val, sched, den, ptc);

    NetworkParams fresh = init_params(predictor_arch(1, kDefaultWidth, sched.T),
                                      Rng::derive(ptc.seed, "init-predictor", 0));
    for (std::size_t i = 0; i < pred.entries.size(); ++i)
        CHECK(pred.entries[i].second.vec() == fresh.entries[i].second.vec());
}

TEST_CASE("train report file uses the iter/loss/val_l1 row format") {
    TrainReport rep;
    rep.rows.push_back({100, 0.5, 0.25, 0.1});
    rep.rows.push_back({200, 0.4, 0.2, 0.09});
    auto dir = std::filesystem::temp_directory_path() / "lpnsr_tests" / "report";
    std::filesystem::create_directories(dir);
    const std::string path = (dir / "train.tsv").string();
    write_train_report(path, rep);

    std::ifstream f(path);
    std::string header, row1;
    std::getline(f, header);
    std::getline(f, row1);
    CHECK(header == "iter\tloss\tval_l1");
    CHECK(row1.substr(0, 4) == "100\t");
}

TEST_CASE("training is deterministic given a seed") {
    auto sched = build_schedule(4, 0.001, 0.999, 2.0);
    auto ccfg = tiny_corpus_cfg();
    ccfg.train_size = 16;
    ccfg.val_size = 8;
    Corpus train = make_corpus(ccfg, "train", 55);
    Corpus val = make_corpus(ccfg, "val", 55);

    TrainConfig tc;
    tc.iterations = 30;
    tc.eval_every = 30;
    tc.seed = 12;
    NetworkParams a = pretrain_denoiser(train, val, sched, tc);
    NetworkParams b = pretrain_denoiser(train, val, sched, tc);
    for (std::size_t i = 0; i < a.entries.size(); ++i)
        CHECK(a.entries[i].second.vec() == b.entries[i].second.vec());
}
