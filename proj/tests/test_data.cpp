#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "lpnsr/data.hpp"
#include "lpnsr/diffusion.hpp"
#include "lpnsr/ops.hpp"
#include "lpnsr/rng.hpp"

using namespace lpnsr;

namespace {

std::filesystem::path temp_dir(const char* name) {
    auto p = std::filesystem::temp_directory_path() / "lpnsr_tests" / name;
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

}  // namespace

TEST_CASE("gen_hr_image is deterministic per (seed, index) and bounded") {
    Tensor a = gen_hr_image(77, 3, 32, 1);
    Tensor b = gen_hr_image(77, 3, 32, 1);
    CHECK(a.vec() == b.vec());
    Tensor c = gen_hr_image(77, 4, 32, 1);
    CHECK(a.vec() != c.vec());

    for (int idx = 0; idx < 16; ++idx) {
        Tensor img = gen_hr_image(123, idx, 32, 1);
        float lo = 1e9f, hi = -1e9f;
        for (float v : img.vec()) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        CHECK(lo >= -1.0f);
        CHECK(hi <= 1.0f);
        CHECK(img.all_finite());
    }
}

TEST_CASE("gen_hr_corpus: 256 images in under a second") {
    const auto t0 = std::chrono::steady_clock::now();
    auto corpus = gen_hr_corpus(256, 32, 1, 9);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    CHECK(corpus.size() == 256);
    CHECK(secs < 1.0);
    CHECK_THROWS_AS(gen_hr_corpus(0, 32, 1, 9), ConfigError);
}

TEST_CASE("degrade of a constant image is constant and seed-free when noiseless") {
    Tensor flat = Tensor::full({1, 1, 32, 32}, 0.25f);
    Tensor lr = degrade(flat, 0.2, 0.0, 1);
    CHECK(lr.shape() == std::vector<int>{1, 1, 8, 8});
    for (float v : lr.vec()) CHECK(v == doctest::Approx(0.25).epsilon(1e-6));

    Tensor lr2 = degrade(flat, 0.2, 0.0, 999);  // seed unused without noise
    CHECK(lr.vec() == lr2.vec());

    CHECK_THROWS_AS(degrade(flat, 0.05, 0.0, 1), ConfigError);
    CHECK_THROWS_AS(degrade(flat, 1.0, 0.5, 1), ConfigError);
}

TEST_CASE("noisy degrade averages to the noiseless pipeline (Monte Carlo)") {
    Tensor x0 = gen_hr_image(5, 0, 32, 1);
    Tensor clean = degrade(x0, 1.0, 0.0, 0);
    const int N = 1000;
    const double sigma = 0.05;
    std::vector<double> acc(clean.numel(), 0.0);
    for (int k = 0; k < N; ++k) {
        Tensor noisy = degrade(x0, 1.0, sigma, 1000 + k);
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += noisy.data()[i];
    }
    // 3 sigma / sqrt(N) per-pixel bound; clamping is negligible away from
    // the range edges for this image.
    const double tol = 3.0 * sigma / std::sqrt(static_cast<double>(N));
    std::size_t violations = 0;
    for (std::size_t i = 0; i < acc.size(); ++i) {
        const double mean = acc[i] / N;
        if (std::fabs(mean - clean.data()[i]) > tol) ++violations;
    }
    // ~0.27% expected violations at exactly 3 sigma; allow a small margin.
    CHECK(violations <= 2);
}

TEST_CASE("LTEN round trip is bit-identical and corrupt files are format errors") {
    auto dir = temp_dir("lten");
    Rng rng(61);
    Tensor t({2, 3, 4, 5});
    for (std::size_t i = 0; i < t.numel(); ++i) t.data()[i] = static_cast<float>(rng.uniform(-2, 2));

    const std::string path = (dir / "t.lten").string();
    write_tensor(path, t);
    Tensor r = read_tensor(path);
    CHECK(r.shape() == t.shape());
    CHECK(r.vec() == t.vec());

    // Corrupted magic.
    {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.write("XXXX", 4);
    }
    CHECK_THROWS_AS(read_tensor(path), FormatError);

    // Truncation.
    write_tensor(path, t);
    std::filesystem::resize_file(path, 20);
    CHECK_THROWS_AS(read_tensor(path), FormatError);

    CHECK_THROWS_AS(read_tensor((dir / "missing.lten").string()), IoError);
}

TEST_CASE("PGM export maps the value range endpoints exactly") {
    auto dir = temp_dir("pgm");
    Tensor t({1, 1, 1, 3}, {-1.0f, 0.0f, 1.0f});
    const std::string path = (dir / "img.pgm").string();
    export_pgm(path, t);

    std::ifstream f(path, std::ios::binary);
    std::string magic;
    int w, h, maxval;
    f >> magic >> w >> h >> maxval;
    CHECK(magic == "P5");
    CHECK(w == 3);
    CHECK(h == 1);
    CHECK(maxval == 255);
    f.get();  // single whitespace after header
    unsigned char px[3];
    f.read(reinterpret_cast<char*>(px), 3);
    CHECK(px[0] == 0);
    CHECK(px[1] == 128);
    CHECK(px[2] == 255);
}

TEST_CASE("make_corpus: sizes, determinism, disjoint streams, lossy residuals") {
    CorpusConfig cfg;
    cfg.train_size = 12;
    cfg.val_size = 6;
    cfg.test_size = 6;

    Corpus train = make_corpus(cfg, "train", 42);
    Corpus val = make_corpus(cfg, "val", 42);
    CHECK(train.samples.size() == 12);
    CHECK(val.samples.size() == 6);

    Corpus train2 = make_corpus(cfg, "train", 42);
    CHECK(train.samples[3].x0.vec() == train2.samples[3].x0.vec());
    CHECK(train.samples[3].y_lr.vec() == train2.samples[3].y_lr.vec());

    // Split streams are disjoint: same index, different content.
    CHECK(train.samples[0].x0.vec() != val.samples[0].x0.vec());

    // Degradation is lossy on average.
    double mean_abs_e0 = 0.0;
    std::size_t n = 0;
    for (const auto& s : train.samples) {
        CHECK(s.e0.same_shape(s.x0));
        CHECK(s.y0.same_shape(s.x0));
        for (std::size_t i = 0; i < s.e0.numel(); ++i) {
            CHECK(s.e0.data()[i] == s.y0.data()[i] - s.x0.data()[i]);
            mean_abs_e0 += std::fabs(s.e0.data()[i]);
            ++n;
        }
    }
    CHECK(mean_abs_e0 / static_cast<double>(n) > 0.0);
}

TEST_CASE("corpus regeneration writes byte-identical LTEN dumps") {
    CorpusConfig cfg;
    cfg.train_size = 4;
    cfg.val_size = 2;
    cfg.test_size = 2;
    auto dir_a = temp_dir("corpus_a");
    auto dir_b = temp_dir("corpus_b");
    save_corpus(dir_a.string(), make_corpus(cfg, "train", 7));
    save_corpus(dir_b.string(), make_corpus(cfg, "train", 7));

    for (int i = 0; i < 4; ++i) {
        char stem[64];
        std::snprintf(stem, sizeof(stem), "train/sample_%06d.x0.lten", i);
        std::ifstream fa(dir_a / stem, std::ios::binary);
        std::ifstream fb(dir_b / stem, std::ios::binary);
        std::string ba((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
        std::string bb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
        CHECK(ba == bb);
        CHECK(!ba.empty());
    }

    Corpus loaded = load_corpus(dir_a.string(), "train");
    Corpus orig = make_corpus(cfg, "train", 7);
    CHECK(loaded.samples.size() == orig.samples.size());
    CHECK(loaded.samples[2].x0.vec() == orig.samples[2].x0.vec());
    CHECK(loaded.samples[2].y0.vec() == orig.samples[2].y0.vec());

    CHECK_THROWS_AS(load_corpus(dir_b.string(), "val"), IoError);
}

TEST_CASE("cross-module: posterior mean inverts the noiseless marginal per sample") {
    CorpusConfig cfg;
    cfg.train_size = 3;
    auto sched = build_schedule(4, 0.001, 0.999, 2.0);
    Corpus c = make_corpus(cfg, "train", 11);
    for (const auto& s : c.samples) {
        Tensor zero = Tensor::zeros_like(s.x0);
        for (int t = 1; t <= sched.T; ++t) {
            Tensor x_t = forward_marginal(nullptr, s.x0, s.y0, t, sched, zero);
            auto post = posterior_params(nullptr, x_t, s.y0, t, sched);
            for (std::size_t i = 0; i < s.x0.numel(); ++i)
                CHECK(post.mean.data()[i] ==
                      doctest::Approx(s.x0.data()[i]).epsilon(5e-4));
        }
    }
}

TEST_CASE("bicubic up of avg_down of a constant field is the identity") {
    Tensor flat = Tensor::full({1, 1, 32, 32}, -0.6f);
    Tensor down = ops::avg_down(nullptr, flat, 4);
    Tensor up = bicubic_resample(down, 4, ResampleDir::Up);
    for (float v : up.vec()) CHECK(v == doctest::Approx(-0.6).epsilon(1e-6));
}
