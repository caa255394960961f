#include "sinkhorn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <stdexcept>

namespace transcap::oracle {
namespace {

constexpr std::size_t kMaxDim = 3;

inline float fast_exp(float x) {
    x = x < -87.0f ? -87.0f : x;
    x = x > 88.0f ? 88.0f : x;
    const float k = std::floor(x * 1.44269504088896341f + 0.5f);
    float r = x - k * 0.693359375f;
    r = r + k * 2.12194440e-4f;
    float p = 1.9875691500e-4f;
    p = p * r + 1.3981999507e-3f;
    p = p * r + 8.3334519073e-3f;
    p = p * r + 4.1665795894e-2f;
    p = p * r + 1.6666665459e-1f;
    p = p * r + 5.0000001201e-1f;
    p = p * r * r + r + 1.0f;
    std::int32_t bits;
    std::memcpy(&bits, &p, sizeof bits);
    bits += static_cast<std::int32_t>(k) << 23;
    float out;
    std::memcpy(&out, &bits, sizeof out);
    return out;
}

struct Cloud {
    std::size_t n = 0;
    std::size_t d = 0;
    std::vector<float> c[kMaxDim];
};

Cloud to_cloud(const PointCloud& p, std::size_t n) {
    if (p.d == 0 || p.d > kMaxDim) throw std::invalid_argument("oracle supports 1 <= d <= 3");
    if (p.x.size() != p.n * p.d) throw std::invalid_argument("point cloud size mismatch");
    Cloud out;
    out.n = std::min(n, p.n);
    out.d = p.d;
    for (std::size_t k = 0; k < kMaxDim; ++k) {
        out.c[k].assign(out.n, 0.0f);
        if (k >= p.d) continue;
        for (std::size_t i = 0; i < out.n; ++i) out.c[k][i] = static_cast<float>(p.x[i * p.d + k]);
    }
    return out;
}

// out_j = -eps log( mean_i exp((h_i - C_ij) / eps) ), for j over dst.
// The row sum is shifted by shift_j; rows whose sum leaves a safe range are
// recomputed with the exact maximum as shift.
void c_transform(const Cloud& src, const std::vector<double>& h, const Cloud& dst, double eps,
                 const std::vector<double>& shift, std::vector<double>& out) {
    const std::size_t n = src.n;
    const float inv = static_cast<float>(1.0 / eps);
    const float* s0 = src.c[0].data();
    const float* s1 = src.c[1].data();
    const float* s2 = src.c[2].data();
    std::vector<float> hf(n);
    for (std::size_t i = 0; i < n; ++i) hf[i] = static_cast<float>(h[i]);
    const float* hp = hf.data();
    out.resize(dst.n);
    const double log_n = std::log(static_cast<double>(n));
    for (std::size_t j = 0; j < dst.n; ++j) {
        const float y0 = dst.c[0][j], y1 = dst.c[1][j], y2 = dst.c[2][j];
        auto sum_with = [&](float sh) {
            double total = 0.0;
            for (std::size_t start = 0; start < n; start += 2048) {
                const std::size_t stop = std::min(n, start + 2048);
                float acc = 0.0f;
                for (std::size_t i = start; i < stop; ++i) {
                    const float t0 = s0[i] - y0, t1 = s1[i] - y1, t2 = s2[i] - y2;
                    const float cost = t0 * t0 + t1 * t1 + t2 * t2;
                    acc += fast_exp((hp[i] - cost + sh) * inv);
                }
                total += acc;
            }
            return total;
        };
        double sh = shift.empty() ? std::numeric_limits<double>::quiet_NaN() : shift[j];
        double total = std::isfinite(sh) ? sum_with(static_cast<float>(sh)) : 0.0;
        if (!(total > 1e-20 && total < 1e20)) {
            float best = -std::numeric_limits<float>::infinity();
            for (std::size_t i = 0; i < n; ++i) {
                const float t0 = s0[i] - y0, t1 = s1[i] - y1, t2 = s2[i] - y2;
                best = std::max(best, hp[i] - (t0 * t0 + t1 * t1 + t2 * t2));
            }
            sh = -static_cast<double>(best);
            total = sum_with(static_cast<float>(sh));
        }
        out[j] = sh - eps * (std::log(total) - log_n);
    }
}

double marginal_error(const std::vector<double>& old_value, const std::vector<double>& new_value, double eps) {
    double err = 0.0;
    for (std::size_t j = 0; j < old_value.size(); ++j) err += std::abs(std::expm1((old_value[j] - new_value[j]) / eps));
    return err / static_cast<double>(old_value.size());
}

double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double squared_diameter_bound(const Cloud& a, const Cloud& b) {
    double total = 0.0;
    for (std::size_t k = 0; k < kMaxDim; ++k) {
        float lo = std::numeric_limits<float>::infinity(), hi = -lo;
        for (const Cloud* c : {&a, &b})
            for (float v : c->c[k]) {
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
        if (hi >= lo) total += static_cast<double>(hi - lo) * (hi - lo);
    }
    return total;
}

std::vector<std::size_t> level_sizes(const SinkhornOptions& opt, std::size_t n) {
    std::vector<std::size_t> out;
    for (std::size_t l : opt.levels)
        if (l < n && (out.empty() || l > out.back())) out.push_back(l);
    out.push_back(n);
    return out;
}

std::vector<double> eps_schedule(double diam2, double eps) {
    std::vector<double> out;
    for (double e = std::max(diam2, eps); e > eps; e *= 0.5) out.push_back(e);
    out.push_back(eps);
    return out;
}

} // namespace

SinkhornResult entropic_ot(const PointCloud& a, const PointCloud& b, const SinkhornOptions& opt) {
    if (a.d != b.d) throw std::invalid_argument("dimension mismatch");
    const std::size_t n_full = std::max(a.n, b.n);
    const auto sizes = level_sizes(opt, n_full);
    std::vector<double> f, g, f_new, g_new, none;
    Cloud pa, pb;
    SinkhornResult res;
    for (std::size_t level = 0; level < sizes.size(); ++level) {
        Cloud ca = to_cloud(a, sizes[level]);
        Cloud cb = to_cloud(b, sizes[level]);
        std::vector<double> epss{opt.eps};
        if (level == 0) {
            epss = eps_schedule(squared_diameter_bound(ca, cb), opt.eps);
            f.assign(ca.n, 0.0);
            c_transform(ca, f, cb, epss.front(), none, g);
        } else {
            std::vector<double> g_ext;
            c_transform(pa, f, cb, opt.eps, none, g_ext);
            g = std::move(g_ext);
        }
        for (std::size_t s = 0; s < epss.size(); ++s) {
            const double eps = epss[s];
            const bool final_eps = s + 1 == epss.size();
            const int limit = final_eps ? opt.max_iterations : 3;
            int it = 0;
            for (;; ++it) {
                const double w = final_eps ? opt.relaxation : 1.0;
                if (f.size() == ca.n) {
                    c_transform(cb, g, ca, eps, f, f_new);
                    for (std::size_t i = 0; i < f.size(); ++i) f[i] += w * (f_new[i] - f[i]);
                } else {
                    c_transform(cb, g, ca, eps, none, f);
                }
                c_transform(ca, f, cb, eps, g, g_new);
                res.marginal_error = marginal_error(g, g_new, eps);
                for (std::size_t j = 0; j < g.size(); ++j) g[j] += w * (g_new[j] - g[j]);
                if (!std::isfinite(res.marginal_error)) throw std::runtime_error("sinkhorn diverged");
                if (res.marginal_error < opt.tolerance || it + 1 >= limit) break;
            }
            if (final_eps && level + 1 == sizes.size()) res.iterations = it + 1;
        }
        pa = std::move(ca);
        pb = std::move(cb);
    }
    if (res.marginal_error >= opt.tolerance) throw std::runtime_error("sinkhorn did not converge");
    c_transform(pb, g, pa, opt.eps, f, f);
    res.value = mean(f) + mean(g);
    return res;
}

SinkhornResult entropic_ot_self(const PointCloud& a, const SinkhornOptions& opt) {
    const auto sizes = level_sizes(opt, a.n);
    std::vector<double> f, t, none;
    Cloud prev;
    SinkhornResult res;
    for (std::size_t level = 0; level < sizes.size(); ++level) {
        Cloud ca = to_cloud(a, sizes[level]);
        std::vector<double> epss{opt.eps};
        if (level == 0) {
            epss = eps_schedule(squared_diameter_bound(ca, ca), opt.eps);
            f.assign(ca.n, 0.0);
        } else {
            std::vector<double> ext;
            c_transform(prev, f, ca, opt.eps, none, ext);
            f = std::move(ext);
        }
        for (std::size_t s = 0; s < epss.size(); ++s) {
            const double eps = epss[s];
            const bool final_eps = s + 1 == epss.size();
            const int limit = final_eps ? opt.max_iterations : 3;
            int it = 0;
            for (;; ++it) {
                c_transform(ca, f, ca, eps, f, t);
                res.marginal_error = marginal_error(f, t, eps);
                for (std::size_t i = 0; i < f.size(); ++i) f[i] = 0.5 * (f[i] + t[i]);
                if (!std::isfinite(res.marginal_error)) throw std::runtime_error("sinkhorn diverged");
                if (res.marginal_error < opt.tolerance || it + 1 >= limit) break;
            }
            if (final_eps && level + 1 == sizes.size()) res.iterations = it + 1;
        }
        prev = std::move(ca);
    }
    if (res.marginal_error >= opt.tolerance) throw std::runtime_error("sinkhorn did not converge");
    c_transform(prev, f, prev, opt.eps, f, t);
    res.value = mean(f) + mean(t);
    return res;
}

double sinkhorn_divergence(const PointCloud& a, const PointCloud& b, const SinkhornOptions& opt) {
    const double ab = entropic_ot(a, b, opt).value;
    const double aa = entropic_ot_self(a, opt).value;
    const double bb = entropic_ot_self(b, opt).value;
    return ab - 0.5 * (aa + bb);
}

} // namespace transcap::oracle
