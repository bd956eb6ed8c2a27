#include "lpnsr/models.hpp"

#include <cmath>
#include <cstring>

#include "lpnsr/ops.hpp"
#include "lpnsr/rng.hpp"

namespace lpnsr {

Tensor& NetworkParams::at(const std::string& name) {
    for (auto& [n, t] : entries)
        if (n == name) return t;
    throw ConfigError("network '" + arch + "' has no parameter '" + name + "'");
}

const Tensor& NetworkParams::at(const std::string& name) const {
    for (const auto& [n, t] : entries)
        if (n == name) return t;
    throw ConfigError("network '" + arch + "' has no parameter '" + name + "'");
}

bool NetworkParams::has(const std::string& name) const {
    for (const auto& [n, t] : entries)
        if (n == name) return true;
    return false;
}

std::vector<Tensor> NetworkParams::tensors() {
    std::vector<Tensor> out;
    out.reserve(entries.size());
    for (auto& [n, t] : entries) out.push_back(t);
    return out;
}

std::size_t NetworkParams::param_count() const {
    std::size_t n = 0;
    for (const auto& [name, t] : entries) n += t.numel();
    return n;
}

void NetworkParams::set_trainable(bool on) {
    for (auto& [n, t] : entries) t.set_requires_grad(on);
}

void NetworkParams::zero_grad() {
    for (auto& [n, t] : entries) t.zero_grad();
}

std::uint64_t NetworkParams::value_checksum() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& [name, t] : entries) {
        for (float v : t.vec()) {
            std::uint32_t bits;
            std::memcpy(&bits, &v, 4);
            for (int k = 0; k < 4; ++k) {
                h ^= (bits >> (8 * k)) & 0xffu;
                h *= 0x100000001b3ULL;
            }
        }
    }
    return h;
}

namespace {

struct ArchSpec {
    std::string kind;  // denoiser | predictor | upsampler
    int channels = 0;
    int width = 0;
    int T = 0;  // 0 for upsampler
    int embed_lo() const { return kind == "predictor" ? 2 : 1; }
    bool has_embed() const { return kind != "upsampler"; }
    int embed_channels() const { return has_embed() ? T - embed_lo() + 1 : 0; }
    int cin() const {
        if (kind == "denoiser") return 2 * channels + embed_channels();
        if (kind == "predictor") return 3 * channels + embed_channels();
        return channels;
    }
};

std::string format_arch(const ArchSpec& a) {
    std::string s = a.kind + "-c" + std::to_string(a.channels) + "-w" + std::to_string(a.width);
    if (a.has_embed()) s += "-T" + std::to_string(a.T);
    return s;
}

ArchSpec parse_arch(const std::string& tag) {
    ArchSpec a;
    std::size_t pos = tag.find('-');
    if (pos == std::string::npos) throw ConfigError("unknown architecture tag '" + tag + "'");
    a.kind = tag.substr(0, pos);
    if (a.kind != "denoiser" && a.kind != "predictor" && a.kind != "upsampler")
        throw ConfigError("unknown architecture tag '" + tag + "'");
    std::string rest = tag.substr(pos);
    int c = 0, w = 0, T = 0;
    const int n = std::sscanf(rest.c_str(), "-c%d-w%d-T%d", &c, &w, &T);
    const bool want_T = a.kind != "upsampler";
    if ((want_T && n != 3) || (!want_T && n != 2) || c < 1 || w < 1 || (want_T && T < 1))
        throw ConfigError("malformed architecture tag '" + tag + "'");
    a.channels = c;
    a.width = w;
    a.T = T;
    if (format_arch(a) != tag) throw ConfigError("malformed architecture tag '" + tag + "'");
    return a;
}

Tensor uniform_init(std::vector<int> shape, int fan_in, Rng& rng) {
    Tensor t(std::move(shape));
    const double bound = std::sqrt(1.0 / fan_in);
    for (std::size_t i = 0; i < t.numel(); ++i)
        t.data()[i] = static_cast<float>(rng.uniform(-bound, bound));
    return t;
}

// Shared 3-layer stack: conv -> lrelu -> conv -> lrelu -> conv(zero-init).
Tensor run_stack(Tape* tape, const NetworkParams& p, const Tensor& input,
                 std::vector<float>* kink_probe) {
    auto probe = [kink_probe](const Tensor& pre) {
        if (kink_probe)
            kink_probe->insert(kink_probe->end(), pre.vec().begin(), pre.vec().end());
    };
    Tensor a1 = ops::conv2d(tape, input, p.at("conv1.w"), p.at("conv1.b"));
    probe(a1);
    Tensor h1 = ops::leaky_relu(tape, a1);
    Tensor a2 = ops::conv2d(tape, h1, p.at("conv2.w"), p.at("conv2.b"));
    probe(a2);
    Tensor h2 = ops::leaky_relu(tape, a2);
    return ops::conv2d(tape, h2, p.at("conv3.w"), p.at("conv3.b"));
}

// One channel per step index: at step t the channel for step j carries the
// learned scalar theta_j when j == t and zero otherwise (one-hot lookup
// broadcast to spatial dims). Gives every step its own first-layer weights.
Tensor embed_block(Tape* tape, const NetworkParams& p, const ArchSpec& a, const Tensor& like, int t) {
    std::vector<Tensor> chans;
    Tensor zeros({like.dim(0), 1, like.dim(2), like.dim(3)});
    for (int j = a.embed_lo(); j <= a.T; ++j) {
        if (j == t)
            chans.push_back(ops::add(tape, zeros, p.at("embed.t" + std::to_string(j))));
        else
            chans.push_back(zeros);
    }
    return ops::concat_channels(tape, chans);
}

}  // namespace

std::string denoiser_arch(int channels, int width, int T) {
    return format_arch({"denoiser", channels, width, T});
}

std::string predictor_arch(int channels, int width, int T) {
    return format_arch({"predictor", channels, width, T});
}

std::string upsampler_arch(int channels, int width) {
    return format_arch({"upsampler", channels, width, 0});
}

NetworkParams init_params(const std::string& arch, std::uint64_t seed) {
    const ArchSpec a = parse_arch(arch);
    Rng rng(Rng::derive(seed, "init/" + arch, 0));

    NetworkParams p;
    p.arch = arch;
    const int cin = a.cin();
    p.entries.emplace_back("conv1.w", uniform_init({a.width, cin, 3, 3}, cin * 9, rng));
    p.entries.emplace_back("conv1.b", Tensor({a.width}));
    p.entries.emplace_back("conv2.w", uniform_init({a.width, a.width, 3, 3}, a.width * 9, rng));
    p.entries.emplace_back("conv2.b", Tensor({a.width}));
    p.entries.emplace_back("conv3.w", Tensor({a.channels, a.width, 3, 3}));
    p.entries.emplace_back("conv3.b", Tensor({a.channels}));
    if (a.has_embed())
        for (int t = a.embed_lo(); t <= a.T; ++t)
            p.entries.emplace_back("embed.t" + std::to_string(t), Tensor::full({1}, 1.0f));
    p.set_trainable(true);
    return p;
}

Tensor denoiser_forward(Tape* tape, const NetworkParams& params, const Tensor& x_t,
                        const Tensor& y0, int t, std::vector<float>* kink_probe) {
    const ArchSpec a = parse_arch(params.arch);
    if (a.kind != "denoiser") throw ConfigError("denoiser_forward: wrong network '" + params.arch + "'");
    if (!x_t.same_shape(y0)) throw DimensionError("denoiser_forward: x_t and y0 shapes differ");
    if (t < 1 || t > a.T) throw DomainError("denoiser_forward: step out of range 1..T");
    Tensor input = ops::concat_channels(tape, {x_t, y0, embed_block(tape, params, a, x_t, t)});
    return ops::add(tape, x_t, run_stack(tape, params, input, kink_probe));
}

Tensor predictor_forward(Tape* tape, const NetworkParams& params, const Tensor& x_t,
                         const Tensor& x0_pred, const Tensor& y0, int t,
                         std::vector<float>* kink_probe) {
    const ArchSpec a = parse_arch(params.arch);
    if (a.kind != "predictor") throw ConfigError("predictor_forward: wrong network '" + params.arch + "'");
    if (!x_t.same_shape(x0_pred) || !x_t.same_shape(y0))
        throw DimensionError("predictor_forward: input shapes differ");
    if (t < 2 || t > a.T)
        throw DomainError("predictor_forward: step must be in 2..T (never used at t=1)");
    Tensor input = ops::concat_channels(tape, {x_t, x0_pred, y0, embed_block(tape, params, a, x_t, t)});
    return run_stack(tape, params, input, kink_probe);
}

Tensor upsampler_forward(Tape* tape, const NetworkParams& params, const Tensor& y_lr,
                         std::vector<float>* kink_probe) {
    const ArchSpec a = parse_arch(params.arch);
    if (a.kind != "upsampler") throw ConfigError("upsampler_forward: wrong network '" + params.arch + "'");
    if (y_lr.dim(1) != a.channels) throw DimensionError("upsampler_forward: channel mismatch");
    Tensor base = ops::bicubic_up(tape, y_lr, 4);
    return ops::add(tape, base, run_stack(tape, params, base, kink_probe));
}

DenoiserFn make_denoiser(const NetworkParams& params) {
    return [&params](Tape* tape, const Tensor& x_t, const Tensor& y0, int t) {
        return denoiser_forward(tape, params, x_t, y0, t);
    };
}

DenoiserFn make_oracle_denoiser(const Tensor& x0) {
    Tensor truth = x0;
    return [truth](Tape*, const Tensor& x_t, const Tensor&, int) {
        if (!x_t.same_shape(truth)) throw DimensionError("oracle denoiser: shape mismatch");
        return truth;
    };
}

}  // namespace lpnsr
