#include "lpnsr/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "lpnsr/ops.hpp"
#include "lpnsr/rng.hpp"
#include "lpnsr/util.hpp"

namespace lpnsr {

namespace {

constexpr double kPi = 3.14159265358979323846;

void add_sinusoid_field(Tensor& img, int c, Rng& rng) {
    const int H = img.dim(2), W = img.dim(3);
    for (int k = 0; k < 3; ++k) {
        const double amp = rng.uniform(0.3, 1.0);
        const double fx = rng.uniform(0.5, 3.0) * 2.0 * kPi / W;
        const double fy = rng.uniform(0.5, 3.0) * 2.0 * kPi / H;
        const double px = rng.uniform(0.0, 2.0 * kPi);
        const double py = rng.uniform(0.0, 2.0 * kPi);
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x)
                img.at(0, c, y, x) += static_cast<float>(amp * std::sin(fy * y + py) * std::sin(fx * x + px));
    }
}

void add_rectangles(Tensor& img, int c, Rng& rng) {
    const int H = img.dim(2), W = img.dim(3);
    const int count = rng.uniform_int(1, 3);
    for (int k = 0; k < count; ++k) {
        const int w = rng.uniform_int(4, W / 2);
        const int h = rng.uniform_int(4, H / 2);
        const int x0 = rng.uniform_int(0, W - w);
        const int y0 = rng.uniform_int(0, H - h);
        const float amp = static_cast<float>(rng.uniform(-1.0, 1.0));
        for (int y = y0; y < y0 + h; ++y)
            for (int x = x0; x < x0 + w; ++x) img.at(0, c, y, x) += amp;
    }
}

void add_blobs(Tensor& img, int c, Rng& rng) {
    const int H = img.dim(2), W = img.dim(3);
    const int count = rng.uniform_int(0, 2);
    for (int k = 0; k < count; ++k) {
        const double cx = rng.uniform(0.2, 0.8) * W;
        const double cy = rng.uniform(0.2, 0.8) * H;
        const double s = rng.uniform(1.5, 5.0);
        const double amp = rng.uniform(-1.0, 1.0);
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
                img.at(0, c, y, x) += static_cast<float>(amp * std::exp(-d2 / (2.0 * s * s)));
            }
    }
}

void add_checkerboard(Tensor& img, int c, Rng& rng) {
    const int H = img.dim(2), W = img.dim(3);
    const int cell = rng.uniform_int(2, 4);
    const int w = rng.uniform_int(W / 4, W / 2);
    const int h = rng.uniform_int(H / 4, H / 2);
    const int x0 = rng.uniform_int(0, W - w);
    const int y0 = rng.uniform_int(0, H - h);
    const int phase = rng.uniform_int(0, 1);
    const float amp = static_cast<float>(rng.uniform(0.3, 0.8));
    for (int y = y0; y < y0 + h; ++y)
        for (int x = x0; x < x0 + w; ++x) {
            const int parity = ((x / cell) + (y / cell) + phase) & 1;
            img.at(0, c, y, x) += parity ? amp : -amp;
        }
}

void normalize_minmax(Tensor& img) {
    float lo = img.data()[0], hi = img.data()[0];
    for (std::size_t i = 0; i < img.numel(); ++i) {
        lo = std::min(lo, img.data()[i]);
        hi = std::max(hi, img.data()[i]);
    }
    if (hi - lo < 1e-12f) {
        img.fill(0.0f);
        return;
    }
    const float scale = 2.0f / (hi - lo);
    for (std::size_t i = 0; i < img.numel(); ++i)
        img.data()[i] = std::clamp((img.data()[i] - lo) * scale - 1.0f, -1.0f, 1.0f);
}

// 5x5 Gaussian blur with replicate borders; constant images stay constant.
Tensor gaussian_blur5(const Tensor& img, double sigma) {
    double k[5];
    double sum = 0.0;
    for (int i = 0; i < 5; ++i) {
        const double d = i - 2;
        k[i] = std::exp(-d * d / (2.0 * sigma * sigma));
        sum += k[i];
    }
    for (double& v : k) v /= sum;

    const int B = img.dim(0), C = img.dim(1), H = img.dim(2), W = img.dim(3);
    Tensor tmp(img.shape()), out(img.shape());
    auto clamp = [](int i, int n) { return i < 0 ? 0 : (i >= n ? n - 1 : i); };
    for (int b = 0; b < B; ++b)
        for (int c = 0; c < C; ++c) {
            for (int y = 0; y < H; ++y)
                for (int x = 0; x < W; ++x) {
                    double s = 0.0;
                    for (int i = 0; i < 5; ++i) s += k[i] * img.at(b, c, y, clamp(x + i - 2, W));
                    tmp.at(b, c, y, x) = static_cast<float>(s);
                }
            for (int y = 0; y < H; ++y)
                for (int x = 0; x < W; ++x) {
                    double s = 0.0;
                    for (int i = 0; i < 5; ++i) s += k[i] * tmp.at(b, c, clamp(y + i - 2, H), x);
                    out.at(b, c, y, x) = static_cast<float>(s);
                }
        }
    return out;
}

}  // namespace

Tensor gen_hr_image(std::uint64_t seed, std::uint64_t index, int size, int channels) {
    Tensor img({1, channels, size, size});
    for (int c = 0; c < channels; ++c) {
        Rng rng(Rng::derive(seed, "hr-image", index * 16 + static_cast<std::uint64_t>(c)));
        add_sinusoid_field(img, c, rng);
        add_rectangles(img, c, rng);
        add_blobs(img, c, rng);
        add_checkerboard(img, c, rng);
    }
    normalize_minmax(img);
    return img;
}

std::vector<Tensor> gen_hr_corpus(int n, int size, int channels, std::uint64_t seed) {
    if (n < 1) throw ConfigError("gen_hr_corpus: n must be >= 1");
    std::vector<Tensor> out(static_cast<std::size_t>(n));
    parallel_for(out.size(), [&](std::size_t i) {
        out[i] = gen_hr_image(seed, i, size, channels);
    });
    return out;
}

Tensor degrade(const Tensor& x0, double blur_sigma, double noise_sigma, std::uint64_t seed) {
    if (blur_sigma < 0.2 || blur_sigma > 2.0)
        throw ConfigError("degrade: blur_sigma out of range [0.2, 2.0]");
    if (noise_sigma < 0.0 || noise_sigma > 0.1)
        throw ConfigError("degrade: noise_sigma out of range [0, 0.1]");

    Tensor blurred = gaussian_blur5(x0, blur_sigma);
    Tensor lr = ops::avg_down(nullptr, blurred, 4);
    if (noise_sigma > 0.0) {
        Rng rng(Rng::derive(seed, "degrade-noise", 0));
        for (std::size_t i = 0; i < lr.numel(); ++i)
            lr.data()[i] += static_cast<float>(noise_sigma * rng.normal());
    }
    for (std::size_t i = 0; i < lr.numel(); ++i)
        lr.data()[i] = std::clamp(lr.data()[i], -1.0f, 1.0f);
    return lr;
}

Tensor bicubic_resample(const Tensor& img, int factor, ResampleDir dir) {
    if (factor != 2 && factor != 4) throw ConfigError("bicubic_resample: factor must be 2 or 4");
    return dir == ResampleDir::Up ? ops::bicubic_up(nullptr, img, factor)
                                  : ops::bicubic_down(nullptr, img, factor);
}

PairedSample make_sample(std::uint64_t seed, std::uint64_t index, const CorpusConfig& cfg,
                         const std::string& split) {
    const std::uint64_t stream = Rng::derive(seed, "sample/" + split, index);
    Rng rng(stream);
    PairedSample s;
    s.blur_sigma = rng.uniform(cfg.blur_min, cfg.blur_max);
    s.noise_sigma = rng.uniform(cfg.noise_min, cfg.noise_max);
    s.x0 = gen_hr_image(stream, index, cfg.hr_size, cfg.channels);
    s.y_lr = degrade(s.x0, s.blur_sigma, s.noise_sigma, stream);
    s.y0 = bicubic_resample(s.y_lr, 4, ResampleDir::Up);
    s.e0 = ops::sub(nullptr, s.y0, s.x0);
    return s;
}

Corpus make_corpus(const CorpusConfig& cfg, const std::string& split, std::uint64_t seed) {
    int n = 0;
    if (split == "train") n = cfg.train_size;
    else if (split == "val") n = cfg.val_size;
    else if (split == "test") n = cfg.test_size;
    else throw ConfigError("make_corpus: unknown split '" + split + "'");
    if (n < 1) throw ConfigError("make_corpus: split size must be >= 1");
    if (cfg.hr_size % 4 != 0) throw ConfigError("make_corpus: hr_size must be divisible by 4");
    if (cfg.blur_min < 0.2 || cfg.blur_max > 2.0 || cfg.blur_min > cfg.blur_max)
        throw ConfigError("make_corpus: blur range invalid");
    if (cfg.noise_min < 0.0 || cfg.noise_max > 0.1 || cfg.noise_min > cfg.noise_max)
        throw ConfigError("make_corpus: noise range invalid");

    Corpus corpus;
    corpus.split = split;
    corpus.seed = seed;
    corpus.samples.resize(static_cast<std::size_t>(n));
    parallel_for(corpus.samples.size(), [&](std::size_t i) {
        corpus.samples[i] = make_sample(seed, i, cfg, split);
    });
    return corpus;
}

namespace {

void write_u32(std::ofstream& f, std::uint32_t v) {
    f.write(reinterpret_cast<const char*>(&v), 4);
}

std::uint32_t read_u32(std::ifstream& f, const std::string& path) {
    std::uint32_t v = 0;
    f.read(reinterpret_cast<char*>(&v), 4);
    if (!f) throw FormatError("truncated tensor file: " + path);
    return v;
}

}  // namespace

void write_tensor(const std::string& path, const Tensor& t) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    f.write("LTEN", 4);
    write_u32(f, 1);
    write_u32(f, static_cast<std::uint32_t>(t.ndim()));
    for (int d : t.shape()) write_u32(f, static_cast<std::uint32_t>(d));
    f.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.numel() * 4));
    if (!f) throw IoError("write failed: " + path);
}

Tensor read_tensor(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for reading: " + path);
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, "LTEN", 4) != 0)
        throw FormatError("bad magic in tensor file: " + path);
    const std::uint32_t version = read_u32(f, path);
    if (version != 1)
        throw FormatError("unsupported tensor file version " + std::to_string(version) + ": " + path);
    const std::uint32_t ndim = read_u32(f, path);
    if (ndim == 0 || ndim > 8) throw FormatError("implausible ndim in tensor file: " + path);
    std::vector<int> shape(ndim);
    for (auto& d : shape) d = static_cast<int>(read_u32(f, path));
    Tensor t(shape);
    f.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.numel() * 4));
    if (!f) throw FormatError("truncated tensor file: " + path);
    return t;
}

void export_pgm(const std::string& path, const Tensor& t) {
    if (t.ndim() != 4 || t.dim(0) != 1 || t.dim(1) != 1)
        throw DimensionError("export_pgm: expected a [1,1,H,W] tensor");
    const int H = t.dim(2), W = t.dim(3);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    f << "P5\n" << W << " " << H << "\n255\n";
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            const double v01 = (static_cast<double>(t.at(0, 0, y, x)) + 1.0) / 2.0;
            const int byte = std::clamp(static_cast<int>(std::lround(v01 * 255.0)), 0, 255);
            f.put(static_cast<char>(byte));
        }
    if (!f) throw IoError("write failed: " + path);
}

void save_corpus(const std::string& dir, const Corpus& corpus) {
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(dir) / corpus.split);
    std::ofstream manifest(fs::path(dir) / ("manifest_" + corpus.split + ".txt"));
    std::ofstream degradation(fs::path(dir) / ("degradation_" + corpus.split + ".txt"));
    if (!manifest || !degradation) throw IoError("cannot write corpus index files in " + dir);
    char stem[64];
    for (std::size_t i = 0; i < corpus.samples.size(); ++i) {
        std::snprintf(stem, sizeof(stem), "%s/sample_%06zu", corpus.split.c_str(), i);
        const PairedSample& s = corpus.samples[i];
        write_tensor((fs::path(dir) / (std::string(stem) + ".x0.lten")).string(), s.x0);
        write_tensor((fs::path(dir) / (std::string(stem) + ".ylr.lten")).string(), s.y_lr);
        manifest << stem << "\n";
        char line[128];
        std::snprintf(line, sizeof(line), "%s\t%.9f\t%.9f", stem, s.blur_sigma, s.noise_sigma);
        degradation << line << "\n";
    }
}

Corpus load_corpus(const std::string& dir, const std::string& split) {
    namespace fs = std::filesystem;
    const std::string manifest_path = (fs::path(dir) / ("manifest_" + split + ".txt")).string();
    std::ifstream manifest(manifest_path);
    if (!manifest)
        throw IoError("corpus manifest not found: " + manifest_path + " (run `gen-data` first)");
    Corpus corpus;
    corpus.split = split;
    std::string stem;
    while (std::getline(manifest, stem)) {
        if (stem.empty()) continue;
        PairedSample s;
        s.x0 = read_tensor((fs::path(dir) / (stem + ".x0.lten")).string());
        s.y_lr = read_tensor((fs::path(dir) / (stem + ".ylr.lten")).string());
        s.y0 = bicubic_resample(s.y_lr, 4, ResampleDir::Up);
        s.e0 = ops::sub(nullptr, s.y0, s.x0);
        corpus.samples.push_back(std::move(s));
    }
    if (corpus.samples.empty()) throw FormatError("empty corpus manifest: " + manifest_path);
    return corpus;
}

}  // namespace lpnsr
