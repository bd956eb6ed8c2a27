#include "lpnsr/finite_diff.hpp"

#include <cmath>
#include <sstream>

namespace lpnsr {

FiniteDiffReport finite_diff_check(const ScalarFn& f, const Tensor& x,
                                   double tol_rel, double tol_abs) {
    constexpr double kStep = 1e-3;
    FiniteDiffReport rep;

    Tensor probe = x.clone();
    probe.set_requires_grad(true);
    Tape tape;
    Tensor root = f(tape, probe);
    if (root.numel() != 1) throw DimensionError("finite_diff_check: f must be scalar-valued");
    backward(root, tape);
    const std::vector<float> g_ad = probe.grad();

    std::ostringstream bad;
    for (std::size_t i = 0; i < x.numel(); ++i) {
        Tensor xp = x.clone();
        xp.data()[i] += static_cast<float>(kStep);
        Tensor xm = x.clone();
        xm.data()[i] -= static_cast<float>(kStep);
        Tape t1, t2;
        const double fp = f(t1, xp).item();
        const double fm = f(t2, xm).item();
        const double g_fd = (fp - fm) / (2.0 * kStep);
        const double abs_err = std::fabs(g_ad[i] - g_fd);
        const double rel_err = abs_err / std::max(std::fabs(g_fd), 1e-12);
        rep.max_abs_err = std::max(rep.max_abs_err, abs_err);
        rep.max_rel_err = std::max(rep.max_rel_err, rel_err);
        ++rep.checked;
        if (abs_err > tol_abs + tol_rel * std::fabs(g_fd)) {
            rep.pass = false;
            if (bad.tellp() < 400)
                bad << "[" << i << "] ad=" << g_ad[i] << " fd=" << g_fd << " ";
        }
    }
    rep.detail = bad.str();
    return rep;
}

ProbedFiniteDiffReport finite_diff_check_probed(const ProbedScalarFn& f, const Tensor& x,
                                                double tol_rel, double tol_abs) {
    constexpr double kStep = 1e-3;
    ProbedFiniteDiffReport rep;

    Tensor probe_x = x.clone();
    probe_x.set_requires_grad(true);
    Tape tape;
    Tensor root = f(tape, probe_x, nullptr);
    if (root.numel() != 1) throw DimensionError("finite_diff_check_probed: f must be scalar-valued");
    backward(root, tape);
    const std::vector<float> g_ad = probe_x.grad();

    std::ostringstream bad;
    for (std::size_t i = 0; i < x.numel(); ++i) {
        Tensor xp = x.clone();
        xp.data()[i] += static_cast<float>(kStep);
        Tensor xm = x.clone();
        xm.data()[i] -= static_cast<float>(kStep);
        std::vector<float> pre_p, pre_m;
        Tape t1, t2;
        const double fp = f(t1, xp, &pre_p).item();
        const double fm = f(t2, xm, &pre_m).item();

        bool crossed = pre_p.size() != pre_m.size();
        if (!crossed)
            for (std::size_t k = 0; k < pre_p.size(); ++k) {
                const bool sp = pre_p[k] > 0.0f, sm = pre_m[k] > 0.0f;
                if (sp != sm || std::fabs(pre_p[k]) < 1e-7f || std::fabs(pre_m[k]) < 1e-7f) {
                    crossed = true;
                    break;
                }
            }
        if (crossed) {
            ++rep.skipped;
            continue;
        }

        const double g_fd = (fp - fm) / (2.0 * kStep);
        const double abs_err = std::fabs(g_ad[i] - g_fd);
        rep.max_abs_err = std::max(rep.max_abs_err, abs_err);
        rep.max_rel_err = std::max(rep.max_rel_err, abs_err / std::max(std::fabs(g_fd), 1e-12));
        ++rep.checked;
        if (abs_err > tol_abs + tol_rel * std::fabs(g_fd)) {
            rep.pass = false;
            if (bad.tellp() < 400)
                bad << "[" << i << "] ad=" << g_ad[i] << " fd=" << g_fd << " ";
        }
    }
    rep.detail = bad.str();
    return rep;
}

Tensor nudge_from_kinks(const Tensor& x, const std::vector<float>& kinks, float margin) {
    Tensor y = x.clone();
    for (std::size_t i = 0; i < y.numel(); ++i) {
        float& v = y.data()[i];
        for (float k : kinks) {
            const float d = v - k;
            if (std::fabs(d) < margin) v = k + (d >= 0.0f ? margin : -margin);
        }
    }
    return y;
}

}  // namespace lpnsr
