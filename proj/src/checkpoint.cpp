#include "lpnsr/checkpoint.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace lpnsr {

namespace {

void write_u32(std::ofstream& f, std::uint32_t v) {
    f.write(reinterpret_cast<const char*>(&v), 4);
}

void write_u16(std::ofstream& f, std::uint16_t v) {
    f.write(reinterpret_cast<const char*>(&v), 2);
}

std::uint32_t read_u32(std::ifstream& f, const std::string& path) {
    std::uint32_t v = 0;
    f.read(reinterpret_cast<char*>(&v), 4);
    if (!f) throw FormatError("truncated checkpoint: " + path);
    return v;
}

std::uint16_t read_u16(std::ifstream& f, const std::string& path) {
    std::uint16_t v = 0;
    f.read(reinterpret_cast<char*>(&v), 2);
    if (!f) throw FormatError("truncated checkpoint: " + path);
    return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const NetworkParams& params,
                     const DiffusionSchedule& sched) {
    {
        std::ofstream f(path, std::ios::binary);
        if (!f) throw IoError("cannot open for writing: " + path);
        f.write("LPNW", 4);
        write_u32(f, 1);
        write_u32(f, static_cast<std::uint32_t>(params.entries.size()));
        for (const auto& [name, t] : params.entries) {
            write_u16(f, static_cast<std::uint16_t>(name.size()));
            f.write(name.data(), static_cast<std::streamsize>(name.size()));
            write_u32(f, static_cast<std::uint32_t>(t.ndim()));
            for (int d : t.shape()) write_u32(f, static_cast<std::uint32_t>(d));
            f.write(reinterpret_cast<const char*>(t.data()),
                    static_cast<std::streamsize>(t.numel() * 4));
        }
        if (!f) throw IoError("write failed: " + path);
    }
    std::ofstream m(path + ".manifest");
    if (!m) throw IoError("cannot open for writing: " + path + ".manifest");
    m << "arch = " << params.arch << "\n";
    m << "schedule.T = " << sched.T << "\n";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", sched.kappa);
    m << "schedule.kappa = " << buf << "\n";
    for (int t = 1; t <= sched.T; ++t) {
        std::snprintf(buf, sizeof(buf), "%.17g", sched.eta[t]);
        m << "schedule.eta." << t << " = " << buf << "\n";
    }
}

NetworkParams load_checkpoint(const std::string& path, const std::string& expected_kind,
                              const DiffusionSchedule& expected_sched) {
    // Manifest first: cheap rejects before payload parsing.
    {
        std::ifstream m(path + ".manifest");
        if (!m) throw IoError("checkpoint manifest not found: " + path + ".manifest");
        std::string line;
        std::string arch;
        int T = -1;
        double kappa = NAN;
        std::vector<double> eta_read;
        while (std::getline(m, line)) {
            const auto eq = line.find('=');
            if (eq == std::string::npos) continue;
            auto trim = [](std::string s) {
                const auto a = s.find_first_not_of(" \t\r");
                const auto b = s.find_last_not_of(" \t\r");
                return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
            };
            const std::string key = trim(line.substr(0, eq));
            const std::string value = trim(line.substr(eq + 1));
            if (key == "arch") arch = value;
            else if (key == "schedule.T") T = std::stoi(value);
            else if (key == "schedule.kappa") kappa = std::stod(value);
            else if (key.rfind("schedule.eta.", 0) == 0) eta_read.push_back(std::stod(value));
        }
        if (arch.rfind(expected_kind + "-", 0) != 0)
            throw ConfigError("checkpoint architecture mismatch: expected a " + expected_kind +
                              ", manifest says '" + arch + "' (" + path + ")");
        if (T != expected_sched.T)
            throw ConfigError("checkpoint schedule mismatch: trained with T=" + std::to_string(T) +
                              ", run uses T=" + std::to_string(expected_sched.T) + " (" + path + ")");
        if (!(kappa == expected_sched.kappa))
            throw ConfigError("checkpoint schedule mismatch: kappa differs (" + path + ")");
        if (eta_read.size() != static_cast<std::size_t>(expected_sched.T))
            throw ConfigError("checkpoint schedule mismatch: eta count differs (" + path + ")");
        for (int t = 1; t <= expected_sched.T; ++t)
            if (eta_read[t - 1] != expected_sched.eta[t])
                throw ConfigError("checkpoint schedule mismatch: eta_" + std::to_string(t) +
                                  " differs (" + path + ")");
    }

    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for reading: " + path);
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, "LPNW", 4) != 0)
        throw FormatError("bad magic in checkpoint: " + path);
    const std::uint32_t version = read_u32(f, path);
    if (version != 1)
        throw FormatError("unsupported checkpoint version " + std::to_string(version) + ": " + path);
    const std::uint32_t count = read_u32(f, path);
    if (count > 4096) throw FormatError("implausible tensor count in checkpoint: " + path);

    NetworkParams params;
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint16_t name_len = read_u16(f, path);
        std::string name(name_len, '\0');
        f.read(name.data(), name_len);
        if (!f) throw FormatError("truncated checkpoint: " + path);
        const std::uint32_t ndim = read_u32(f, path);
        if (ndim == 0 || ndim > 8) throw FormatError("implausible tensor rank in checkpoint: " + path);
        std::vector<int> shape(ndim);
        for (auto& d : shape) d = static_cast<int>(read_u32(f, path));
        Tensor t(shape);
        f.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.numel() * 4));
        if (!f) throw FormatError("truncated checkpoint: " + path);
        params.entries.emplace_back(std::move(name), std::move(t));
    }

    // Rebuild the tag from the manifest (payload stores only tensors).
    std::ifstream m(path + ".manifest");
    std::string line;
    while (std::getline(m, line)) {
        if (line.rfind("arch = ", 0) == 0) {
            params.arch = line.substr(7);
            break;
        }
    }
    return params;
}

}  // namespace lpnsr
