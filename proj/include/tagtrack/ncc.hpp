#pragma once

#include <cmath>
#include <vector>

#include "tagtrack/parallel.hpp"
#include "tagtrack/types.hpp"

// Windowed normalized local cross-correlation, summed over all pixels:
//
//   ncc(I,J) = sum_p  c(p)^2 / (a(p) * b(p))
//
// with c the window covariance sum and a, b the window variance sums of I
// and J around p. Windows are w x w boxes clipped at the borders (true
// counts, no padding values); each variance factor carries a +1e-5
// stabilizer so constant windows stay finite. Box sums use a summed-area
// table, so the cost is independent of w.

namespace tagtrack {

constexpr double kNccEps = 1e-5;

namespace detail {

// summed-area table, (H+1) x (W+1), S(y,x) = sum over [0,y) x [0,x)
inline std::vector<double> integral_image(const ScalarImage& img) {
    const int H = img.height, W = img.width;
    std::vector<double> S(static_cast<size_t>(H + 1) * (W + 1), 0.0);
    for (int y = 0; y < H; ++y) {
        double row = 0.0;
        for (int x = 0; x < W; ++x) {
            row += img.at(y, x);
            S[static_cast<size_t>(y + 1) * (W + 1) + (x + 1)] =
                S[static_cast<size_t>(y) * (W + 1) + (x + 1)] + row;
        }
    }
    return S;
}

// sum of src over the clipped (2r+1)^2 window centred at each pixel
inline ScalarImage box_sum(const ScalarImage& src, int r) {
    const int H = src.height, W = src.width;
    std::vector<double> S = integral_image(src);
    ScalarImage out(H, W);
    for (int y = 0; y < H; ++y) {
        int y0 = std::max(y - r, 0), y1 = std::min(y + r, H - 1);
        for (int x = 0; x < W; ++x) {
            int x0 = std::max(x - r, 0), x1 = std::min(x + r, W - 1);
            out.at(y, x) = S[static_cast<size_t>(y1 + 1) * (W + 1) + (x1 + 1)] -
                           S[static_cast<size_t>(y0) * (W + 1) + (x1 + 1)] -
                           S[static_cast<size_t>(y1 + 1) * (W + 1) + x0] +
                           S[static_cast<size_t>(y0) * (W + 1) + x0];
        }
    }
    return out;
}

inline ScalarImage window_counts(int H, int W, int r) {
    ScalarImage n(H, W);
    for (int y = 0; y < H; ++y) {
        double cy = std::min(y + r, H - 1) - std::max(y - r, 0) + 1;
        for (int x = 0; x < W; ++x) {
            double cx = std::min(x + r, W - 1) - std::max(x - r, 0) + 1;
            n.at(y, x) = cx * cy;
        }
    }
    return n;
}

}  // namespace detail

// per-pixel factors kept for the backward pass
struct NccCache {
    int window = 0;
    ScalarImage A;           // 2c/(ab)
    ScalarImage BI, BJ;      // 2c^2/(a^2 b), 2c^2/(a b^2)
    ScalarImage Ibar, Jbar;  // window means
};

inline double ncc_cached(const ScalarImage& I, const ScalarImage& J, int w, NccCache* cache) {
    require(I.same_shape(J), "ncc: shape mismatch");
    require(w >= 3 && w % 2 == 1, "ncc: window must be odd and >= 3");
    require(all_finite(I) && all_finite(J), "ncc: non-finite input");
    const int H = I.height, W = I.width, r = w / 2;

    ScalarImage II(H, W), JJ(H, W), IJ(H, W);
    for (size_t i = 0; i < I.size(); ++i) {
        II.data[i] = I.data[i] * I.data[i];
        JJ.data[i] = J.data[i] * J.data[i];
        IJ.data[i] = I.data[i] * J.data[i];
    }
    ScalarImage SI = detail::box_sum(I, r), SJ = detail::box_sum(J, r);
    ScalarImage SII = detail::box_sum(II, r), SJJ = detail::box_sum(JJ, r);
    ScalarImage SIJ = detail::box_sum(IJ, r);
    ScalarImage n = detail::window_counts(H, W, r);

    if (cache) {
        cache->window = w;
        cache->A = ScalarImage(H, W);
        cache->BI = ScalarImage(H, W);
        cache->BJ = ScalarImage(H, W);
        cache->Ibar = ScalarImage(H, W);
        cache->Jbar = ScalarImage(H, W);
    }
    double total = 0.0;
    for (size_t i = 0; i < I.size(); ++i) {
        double cnt = n.data[i];
        double c = SIJ.data[i] - SI.data[i] * SJ.data[i] / cnt;
        double a = SII.data[i] - SI.data[i] * SI.data[i] / cnt + kNccEps;
        double b = SJJ.data[i] - SJ.data[i] * SJ.data[i] / cnt + kNccEps;
        total += c * c / (a * b);
        if (cache) {
            cache->A.data[i] = 2.0 * c / (a * b);
            cache->BI.data[i] = 2.0 * c * c / (a * a * b);
            cache->BJ.data[i] = 2.0 * c * c / (a * b * b);
            cache->Ibar.data[i] = SI.data[i] / cnt;
            cache->Jbar.data[i] = SJ.data[i] / cnt;
        }
    }
    return total;
}

inline double ncc(const ScalarImage& I, const ScalarImage& J, int w) {
    return ncc_cached(I, J, w, nullptr);
}

// d(ncc)/dI and d(ncc)/dJ, scaled by `adj` and accumulated. Derivation:
// d(cc_p)/dJ(q) = A(p)(I(q)-Ibar(p)) - BJ(p)(J(q)-Jbar(p)) for q in the
// window of p; summing over p turns into box filters of the cached factors
// (the clipped window relation is symmetric, q in W(p) iff p in W(q)).
inline void ncc_backward(const ScalarImage& I, const ScalarImage& J, const NccCache& cache,
                         double adj, ScalarImage* adj_I, ScalarImage* adj_J) {
    const int r = cache.window / 2;
    if (adj_J) {
        ScalarImage AIbar(I.height, I.width), BJJbar(I.height, I.width);
        for (size_t i = 0; i < I.size(); ++i) {
            AIbar.data[i] = cache.A.data[i] * cache.Ibar.data[i];
            BJJbar.data[i] = cache.BJ.data[i] * cache.Jbar.data[i];
        }
        ScalarImage bA = detail::box_sum(cache.A, r);
        ScalarImage bAI = detail::box_sum(AIbar, r);
        ScalarImage bB = detail::box_sum(cache.BJ, r);
        ScalarImage bBJ = detail::box_sum(BJJbar, r);
        for (size_t i = 0; i < I.size(); ++i)
            adj_J->data[i] += adj * (I.data[i] * bA.data[i] - bAI.data[i] -
                                     J.data[i] * bB.data[i] + bBJ.data[i]);
    }
    if (adj_I) {
        ScalarImage AJbar(I.height, I.width), BIIbar(I.height, I.width);
        for (size_t i = 0; i < I.size(); ++i) {
            AJbar.data[i] = cache.A.data[i] * cache.Jbar.data[i];
            BIIbar.data[i] = cache.BI.data[i] * cache.Ibar.data[i];
        }
        ScalarImage bA = detail::box_sum(cache.A, r);
        ScalarImage bAJ = detail::box_sum(AJbar, r);
        ScalarImage bB = detail::box_sum(cache.BI, r);
        ScalarImage bBI = detail::box_sum(BIIbar, r);
        for (size_t i = 0; i < I.size(); ++i)
            adj_I->data[i] += adj * (J.data[i] * bA.data[i] - bAJ.data[i] -
                                     I.data[i] * bB.data[i] + bBI.data[i]);
    }
}

}  // namespace tagtrack
