#pragma once

// Deliberately naive reference implementations used as test oracles.
// They share no code with the library: plain nested loops, direct
// formulas without log-domain tricks, and different algorithms where one
// exists (union-find components instead of DFS, explicit PR sweeps).

#include "cream/cam.hpp"
#include "cream/localization.hpp"
#include "cream/maps.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <vector>

namespace oracle {

using Grid = std::vector<std::vector<double>>;        // [i][j]
using Tensor = std::vector<std::vector<std::vector<double>>>; // [k][i][j]

inline Tensor tensor_of(const cream::FeatureMap& f)
{
    Tensor t(f.channels(), Grid(f.height(), std::vector<double>(f.width())));
    for (int k = 0; k < f.channels(); ++k) {
        for (int i = 0; i < f.height(); ++i) {
            for (int j = 0; j < f.width(); ++j) {
                t[k][i][j] = f.at(k, i, j);
            }
        }
    }
    return t;
}

inline Grid grid_of(const cream::ActivationMap& m)
{
    Grid g(m.height(), std::vector<double>(m.width()));
    for (int i = 0; i < m.height(); ++i) {
        for (int j = 0; j < m.width(); ++j) {
            g[i][j] = m.at(i, j);
        }
    }
    return g;
}

inline double dot_at(const Tensor& f, const std::vector<double>& v, int i, int j)
{
    double s = 0;
    for (std::size_t k = 0; k < v.size(); ++k) {
        s += v[k] * f[k][i][j];
    }
    return s;
}

inline Grid cam(const Tensor& f, const std::vector<double>& w)
{
    const int h = static_cast<int>(f[0].size());
    const int wd = static_cast<int>(f[0][0].size());
    Grid g(h, std::vector<double>(wd, 0.0));
    for (int i = 0; i < h; ++i) {
        for (int j = 0; j < wd; ++j) {
            g[i][j] = dot_at(f, w, i, j);
        }
    }
    return g;
}

inline Grid normalize(const Grid& g)
{
    double lo = g[0][0], hi = g[0][0];
    for (const auto& row : g) {
        for (double v : row) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    Grid out = g;
    for (auto& row : out) {
        for (auto& v : row) {
            v = hi == lo ? 0.0 : (v - lo) / (hi - lo);
        }
    }
    return out;
}

/// Masked spatial mean of every channel.
inline std::vector<double> masked_mean(const Tensor& f, const std::vector<std::vector<bool>>& mask)
{
    std::vector<double> m(f.size(), 0.0);
    double n = 0;
    for (std::size_t i = 0; i < mask.size(); ++i) {
        for (std::size_t j = 0; j < mask[i].size(); ++j) {
            if (mask[i][j]) {
                n += 1;
                for (std::size_t k = 0; k < f.size(); ++k) {
                    m[k] += f[k][i][j];
                }
            }
        }
    }
    for (auto& v : m) {
        v /= n;
    }
    return m;
}

struct Posterior {
    Grid fg;
    Grid bg;
};

/// Direct a p / (a_fg p_fg + a_bg p_bg); callers keep activations small.
inline Posterior e_step(const Tensor& f, double a_fg, const std::vector<double>& v_fg, double a_bg,
                        const std::vector<double>& v_bg, double sigma)
{
    const std::size_t h = f[0].size(), w = f[0][0].size();
    Posterior z{Grid(h, std::vector<double>(w)), Grid(h, std::vector<double>(w))};
    for (std::size_t i = 0; i < h; ++i) {
        for (std::size_t j = 0; j < w; ++j) {
            const double pf = a_fg * std::exp(dot_at(f, v_fg, int(i), int(j)) / sigma);
            const double pb = a_bg * std::exp(dot_at(f, v_bg, int(i), int(j)) / sigma);
            z.fg[i][j] = pf / (pf + pb);
            z.bg[i][j] = pb / (pf + pb);
        }
    }
    return z;
}

struct Params {
    double a_fg, a_bg;
    std::vector<double> v_fg, v_bg;
};

inline Params m_step(const Tensor& f, const Posterior& z)
{
    const std::size_t d = f.size(), h = f[0].size(), w = f[0][0].size();
    Params p{0, 0, std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)};
    double sf = 0, sb = 0;
    for (std::size_t i = 0; i < h; ++i) {
        for (std::size_t j = 0; j < w; ++j) {
            sf += z.fg[i][j];
            sb += z.bg[i][j];
            for (std::size_t k = 0; k < d; ++k) {
                p.v_fg[k] += z.fg[i][j] * f[k][i][j];
                p.v_bg[k] += z.bg[i][j] * f[k][i][j];
            }
        }
    }
    for (std::size_t k = 0; k < d; ++k) {
        p.v_fg[k] /= sf;
        p.v_bg[k] /= sb;
    }
    p.a_fg = sf / double(h * w);
    p.a_bg = sb / double(h * w);
    return p;
}

inline double log_likelihood(const Tensor& f, const Params& p, double sigma)
{
    double ll = 0;
    for (std::size_t i = 0; i < f[0].size(); ++i) {
        for (std::size_t j = 0; j < f[0][0].size(); ++j) {
            ll += std::log(p.a_fg * std::exp(dot_at(f, p.v_fg, int(i), int(j)) / sigma) +
                           p.a_bg * std::exp(dot_at(f, p.v_bg, int(i), int(j)) / sigma));
        }
    }
    return ll;
}

/// Components by union-find over 8-neighbours, as sorted pixel lists
/// ordered by their smallest index.
inline std::vector<std::vector<std::size_t>> components(const cream::BinaryMask& m)
{
    const int h = m.height(), w = m.width();
    std::vector<std::size_t> parent(static_cast<std::size_t>(h) * w);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::size_t x) {
        while (parent[x] != x) {
            x = parent[x] = parent[parent[x]];
        }
        return x;
    };
    for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
            if (!m.at(i, j)) {
                continue;
            }
            for (int di = -1; di <= 1; ++di) {
                for (int dj = -1; dj <= 1; ++dj) {
                    const int a = i + di, b = j + dj;
                    if (a >= 0 && a < h && b >= 0 && b < w && m.at(a, b)) {
                        parent[find(std::size_t(i) * w + j)] = find(std::size_t(a) * w + b);
                    }
                }
            }
        }
    }
    std::map<std::size_t, std::vector<std::size_t>> groups;
    for (std::size_t p = 0; p < parent.size(); ++p) {
        if (m[p]) {
            groups[find(p)].push_back(p);
        }
    }
    std::vector<std::vector<std::size_t>> out;
    for (auto& [root, pixels] : groups) {
        out.push_back(pixels);
    }
    std::sort(out.begin(), out.end(),
              [](const auto& a, const auto& b) { return a.front() < b.front(); });
    return out;
}

inline std::optional<cream::BoundingBox> largest_box(const cream::ActivationMap& m, double tau)
{
    cream::BinaryMask mask(m.height(), m.width());
    for (int i = 0; i < m.height(); ++i) {
        for (int j = 0; j < m.width(); ++j) {
            mask.set(i, j, m.at(i, j) >= tau);
        }
    }
    const auto comps = components(mask);
    if (comps.empty()) {
        return std::nullopt;
    }
    std::size_t best = 0;
    for (std::size_t c = 1; c < comps.size(); ++c) {
        if (comps[c].size() > comps[best].size()) {
            best = c;
        }
    }
    int x0 = m.width(), y0 = m.height(), x1 = 0, y1 = 0;
    for (auto p : comps[best]) {
        const int i = int(p / m.width()), j = int(p % m.width());
        x0 = std::min(x0, j);
        y0 = std::min(y0, i);
        x1 = std::max(x1, j + 1);
        y1 = std::max(y1, i + 1);
    }
    return cream::BoundingBox{x0, y0, x1, y1};
}

/// IoU by counting covered pixels.
inline double iou(const cream::BoundingBox& a, const cream::BoundingBox& b)
{
    const int lo_x = std::min(a.x0, b.x0), hi_x = std::max(a.x1, b.x1);
    const int lo_y = std::min(a.y0, b.y0), hi_y = std::max(a.y1, b.y1);
    long inter = 0, uni = 0;
    for (int y = lo_y; y < hi_y; ++y) {
        for (int x = lo_x; x < hi_x; ++x) {
            const bool in_a = x >= a.x0 && x < a.x1 && y >= a.y0 && y < a.y1;
            const bool in_b = x >= b.x0 && x < b.x1 && y >= b.y0 && y < b.y1;
            inter += in_a && in_b;
            uni += in_a || in_b;
        }
    }
    return uni == 0 ? 0.0 : double(inter) / double(uni);
}

/// Average precision by sweeping every distinct score from high to low
/// and accumulating precision times the recall increment.
inline double average_precision(const std::vector<double>& scores, const std::vector<bool>& labels)
{
    std::set<double, std::greater<>> thresholds(scores.begin(), scores.end());
    double positives = 0;
    for (bool l : labels) {
        positives += l;
    }
    double ap = 0, prev_recall = 0;
    for (double t : thresholds) {
        double tp = 0, fp = 0;
        for (std::size_t n = 0; n < scores.size(); ++n) {
            if (scores[n] >= t) {
                (labels[n] ? tp : fp) += 1;
            }
        }
        const double recall = tp / positives;
        ap += (recall - prev_recall) * (tp / (tp + fp));
        prev_recall = recall;
    }
    return ap;
}

inline cream::FeatureMap random_features(std::mt19937_64& rng, int d, int h, int w, double scale = 1.0)
{
    std::normal_distribution<float> n(0.0f, static_cast<float>(scale));
    std::vector<float> v(static_cast<std::size_t>(d) * h * w);
    for (auto& x : v) {
        x = n(rng);
    }
    return cream::FeatureMap(d, h, w, std::move(v));
}

inline cream::ActivationMap random_map(std::mt19937_64& rng, int h, int w)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> v(static_cast<std::size_t>(h) * w);
    for (auto& x : v) {
        x = u(rng);
    }
    return cream::ActivationMap(h, w, std::move(v));
}

inline cream::BinaryMask random_mask(std::mt19937_64& rng, int h, int w, double p = 0.5)
{
    std::bernoulli_distribution b(p);
    cream::BinaryMask m(h, w);
    for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
            m.set(i, j, b(rng));
        }
    }
    return m;
}

inline std::vector<double> random_vector(std::mt19937_64& rng, int d, double scale = 1.0)
{
    std::normal_distribution<double> n(0.0, scale);
    std::vector<double> v(d);
    for (auto& x : v) {
        x = n(rng);
    }
    return v;
}

inline cream::ClassifierHead random_head(std::mt19937_64& rng, int c, int d, bool bias = false)
{
    std::normal_distribution<float> n;
    std::vector<float> w(static_cast<std::size_t>(c) * d);
    for (auto& x : w) {
        x = n(rng);
    }
    std::optional<std::vector<float>> b;
    if (bias) {
        b.emplace(c);
        for (auto& x : *b) {
            x = n(rng);
        }
    }
    return cream::ClassifierHead(c, d, std::move(w), std::move(b));
}

} // namespace oracle
