#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lpnsr/tensor.hpp"

namespace lpnsr {

// One (HR, LR) training/eval record. y0 is the bicubic upsample of y_lr at HR
// resolution; e0 = y0 - x0 elementwise.
struct PairedSample {
    Tensor x0;    // [1,C,S,S] in [-1,1]
    Tensor y_lr;  // [1,C,S/4,S/4]
    Tensor y0;    // [1,C,S,S]
    Tensor e0;    // [1,C,S,S]
    double blur_sigma = 0.0;
    double noise_sigma = 0.0;
};

struct Corpus {
    std::vector<PairedSample> samples;
    std::string split;  // train | val | test
    std::uint64_t seed = 0;
};

struct CorpusConfig {
    int train_size = 2048;
    int val_size = 128;
    int test_size = 128;
    int channels = 1;
    int hr_size = 32;
    double blur_min = 0.2;
    double blur_max = 2.0;
    double noise_min = 0.0;
    double noise_max = 0.05;
};

// Procedural HR image: low-frequency sinusoid field, 1-3 rectangles,
// 0-2 Gaussian blobs, one checkerboard patch; min-max normalized to [-1,1].
// Deterministic per (seed, index).
Tensor gen_hr_image(std::uint64_t seed, std::uint64_t index, int size, int channels);
std::vector<Tensor> gen_hr_corpus(int n, int size, int channels, std::uint64_t seed);

// Gaussian blur (5x5, replicate borders) -> avg_down(x4) -> white Gaussian
// noise -> clamp to [-1,1].
Tensor degrade(const Tensor& x0, double blur_sigma, double noise_sigma, std::uint64_t seed);

// Catmull-Rom resampling (a = -0.5, edge clamp), factors 2 and 4.
enum class ResampleDir { Up, Down };
Tensor bicubic_resample(const Tensor& img, int factor, ResampleDir dir);

PairedSample make_sample(std::uint64_t seed, std::uint64_t index, const CorpusConfig& cfg,
                         const std::string& split);
Corpus make_corpus(const CorpusConfig& cfg, const std::string& split, std::uint64_t seed);

// LTEN tensor file: magic "LTEN", u32 version=1, u32 ndim, ndim x u32 dims,
// little-endian f32 payload in row-major order.
void write_tensor(const std::string& path, const Tensor& t);
Tensor read_tensor(const std::string& path);

// Binary PGM (P5, maxval 255); values mapped [-1,1] -> [0,255] and clamped.
void export_pgm(const std::string& path, const Tensor& t);

// Corpus on disk: <dir>/manifest_<split>.txt lists one sample stem per line;
// each stem has "<stem>.x0.lten" and "<stem>.ylr.lten". y0/e0 are rebuilt on
// load. A degradation_<split>.txt records per-sample blur/noise sigmas.
void save_corpus(const std::string& dir, const Corpus& corpus);
Corpus load_corpus(const std::string& dir, const std::string& split);

}  // namespace lpnsr
