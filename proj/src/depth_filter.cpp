#include "leafarea/depth_filter.hpp"

#include <algorithm>
#include <cmath>

namespace leafarea {

void BilateralParams::validate() const {
    require(diameter >= 1, "bilateral: diameter must be >= 1");
    require(sigma_color > 0, "bilateral: sigma_color must be > 0");
    require(sigma_space > 0, "bilateral: sigma_space must be > 0");
}

DepthRaster bilateral_filter(const DepthRaster& depth, const BilateralParams& params) {
    params.validate();
    const int radius = params.normalized_diameter() / 2;
    const int w = depth.width(), h = depth.height();

    struct Tap {
        int du, dv;
        double weight;
    };
    std::vector<Tap> taps;
    for (int dv = -radius; dv <= radius; ++dv)
        for (int du = -radius; du <= radius; ++du)
            if (du * du + dv * dv <= radius * radius)
                taps.push_back({du, dv,
                                std::exp(-(du * du + dv * dv) /
                                         (2.0 * params.sigma_space * params.sigma_space))});

    // range weights indexed by |difference|; beyond the table the weight underflows
    const double inv2sc = 1.0 / (2.0 * params.sigma_color * params.sigma_color);
    std::vector<double> range_lut;
    for (int diff = 0; diff <= 65535; ++diff) {
        const double wgt = std::exp(-static_cast<double>(diff) * diff * inv2sc);
        if (wgt == 0.0) break;
        range_lut.push_back(wgt);
    }

    DepthRaster out(w, h, 0);
    for (int v = 0; v < h; ++v) {
        for (int u = 0; u < w; ++u) {
            const int center = depth(u, v);
            if (center == 0) continue;
            double sum = 0, norm = 0;
            for (const Tap& t : taps) {
                const int qu = u + t.du, qv = v + t.dv;
                if (qu < 0 || qv < 0 || qu >= w || qv >= h) continue;
                const int q = depth(qu, qv);
                if (q == 0) continue;
                const std::size_t diff = static_cast<std::size_t>(std::abs(q - center));
                if (diff >= range_lut.size()) continue;
                const double wgt = t.weight * range_lut[diff];
                sum += wgt * q;
                norm += wgt;
            }
            // the center tap always carries weight 1
            out(u, v) = static_cast<std::uint16_t>(std::lround(sum / norm));
        }
    }
    return out;
}

DepthRaster median_filter(const DepthRaster& depth, int kernel) {
    require(kernel >= 1 && kernel % 2 == 1, "median: kernel must be odd and >= 1");
    const int radius = kernel / 2;
    const int w = depth.width(), h = depth.height();
    DepthRaster out(w, h, 0);
    std::vector<std::uint16_t> window;
    window.reserve(static_cast<std::size_t>(kernel) * kernel);
    for (int v = 0; v < h; ++v) {
        const int v0 = std::max(0, v - radius), v1 = std::min(h - 1, v + radius);
        for (int u = 0; u < w; ++u) {
            const int u0 = std::max(0, u - radius), u1 = std::min(w - 1, u + radius);
            window.clear();
            for (int qv = v0; qv <= v1; ++qv)
                for (int qu = u0; qu <= u1; ++qu)
                    if (const auto q = depth(qu, qv); q != 0) window.push_back(q);
            if (window.empty()) continue;
            auto mid = window.begin() + static_cast<std::ptrdiff_t>((window.size() - 1) / 2);
            std::nth_element(window.begin(), mid, window.end());
            out(u, v) = *mid;
        }
    }
    return out;
}

}  // namespace leafarea
