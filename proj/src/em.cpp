#include "cream/em.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace cream {

namespace {

constexpr double kDegenerateWeight = 1e-8;

void check_dim(std::span<const double> v, const FeatureMap& features)
{
    if (v.size() != static_cast<std::size_t>(features.channels())) {
        throw std::invalid_argument("embedding length " + std::to_string(v.size()) +
                                    " does not match feature channels " +
                                    std::to_string(features.channels()));
    }
}

void check_sigma(double sigma)
{
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
        throw std::invalid_argument("sigma must be a positive finite scale");
    }
}

/// v . x_ij for every pixel, accumulated channel by channel.
std::vector<double> dot_map(std::span<const double> v, const FeatureMap& features)
{
    std::vector<double> out(features.pixels(), 0.0);
    for (int k = 0; k < features.channels(); ++k) {
        const double vk = v[k];
        const auto plane = features.channel(k);
        for (std::size_t p = 0; p < out.size(); ++p) {
            out[p] += vk * plane[p];
        }
    }
    return out;
}

double log_weight(double a)
{
    return a > 0.0 ? std::log(a) : -std::numeric_limits<double>::infinity();
}

void check_params(const MixtureParams& params, const FeatureMap& features)
{
    check_dim(params.v_fg, features);
    check_dim(params.v_bg, features);
    if (!(params.a_fg >= 0.0 && params.a_bg >= 0.0 && params.a_fg + params.a_bg > 0.0)) {
        throw std::invalid_argument("mixture weights must be non-negative and not both zero");
    }
}

std::vector<double> unit(std::vector<double> v)
{
    double n2 = 0.0;
    for (double x : v) {
        n2 += x * x;
    }
    if (n2 > 0.0) {
        const double inv = 1.0 / std::sqrt(n2);
        for (double& x : v) {
            x *= inv;
        }
    }
    return v;
}

} // namespace

void EmConfig::validate() const
{
    check_sigma(sigma);
    if (iterations < 0) {
        throw std::invalid_argument("EM iteration count must be non-negative");
    }
    if (!(a_init > 0.0 && a_init < 1.0)) {
        throw std::invalid_argument("initial mixture weight must lie in (0, 1)");
    }
}

ActivationMap base_similarity(std::span<const double> v, const FeatureMap& features, double sigma)
{
    check_sigma(sigma);
    check_dim(v, features);
    std::vector<double> dots = dot_map(v, features);
    for (double& x : dots) {
        x = std::exp(x / sigma);
    }
    return ActivationMap(features.height(), features.width(), std::move(dots));
}

LatentMaps e_step(const FeatureMap& features, const MixtureParams& params, double sigma)
{
    check_sigma(sigma);
    check_params(params, features);

    std::vector<double> fg = dot_map(params.v_fg, features);
    std::vector<double> bg = dot_map(params.v_bg, features);
    const double log_a_fg = log_weight(params.a_fg);
    const double log_a_bg = log_weight(params.a_bg);
    for (std::size_t p = 0; p < fg.size(); ++p) {
        const double l_fg = log_a_fg + fg[p] / sigma;
        const double l_bg = log_a_bg + bg[p] / sigma;
        const double top = std::max(l_fg, l_bg);
        const double e_fg = std::exp(l_fg - top);
        const double e_bg = std::exp(l_bg - top);
        const double total = e_fg + e_bg;
        fg[p] = e_fg / total;
        bg[p] = e_bg / total;
    }
    const int h = features.height();
    const int w = features.width();
    return {ActivationMap(h, w, std::move(fg)), ActivationMap(h, w, std::move(bg))};
}

MixtureParams m_step(const FeatureMap& features, const LatentMaps& latent,
                     const MixtureParams& previous)
{
    if (latent.fg.height() != features.height() || latent.fg.width() != features.width() ||
        !latent.fg.same_shape(latent.bg)) {
        throw std::invalid_argument("latent maps and feature map extents differ");
    }
    check_params(previous, features);

    const int d = features.channels();
    MixtureParams next;
    next.v_fg.assign(d, 0.0);
    next.v_bg.assign(d, 0.0);

    double mass_fg = 0.0;
    double mass_bg = 0.0;
    const auto z_fg = latent.fg.values();
    const auto z_bg = latent.bg.values();
    for (std::size_t p = 0; p < z_fg.size(); ++p) {
        mass_fg += z_fg[p];
        mass_bg += z_bg[p];
    }
    for (int k = 0; k < d; ++k) {
        const auto plane = features.channel(k);
        double s_fg = 0.0;
        double s_bg = 0.0;
        for (std::size_t p = 0; p < plane.size(); ++p) {
            s_fg += z_fg[p] * plane[p];
            s_bg += z_bg[p] * plane[p];
        }
        next.v_fg[k] = mass_fg > 0.0 ? s_fg / mass_fg : previous.v_fg[k];
        next.v_bg[k] = mass_bg > 0.0 ? s_bg / mass_bg : previous.v_bg[k];
    }

    const double n = static_cast<double>(features.pixels());
    double a_fg = mass_fg > 0.0 ? mass_fg / n : kDegenerateWeight;
    double a_bg = mass_bg > 0.0 ? mass_bg / n : kDegenerateWeight;
    const double total = a_fg + a_bg;
    next.a_fg = a_fg / total;
    next.a_bg = a_bg / total;
    return next;
}

double log_likelihood(const FeatureMap& features, const MixtureParams& params, double sigma)
{
    check_sigma(sigma);
    check_params(params, features);

    const std::vector<double> fg = dot_map(params.v_fg, features);
    const std::vector<double> bg = dot_map(params.v_bg, features);
    const double log_a_fg = log_weight(params.a_fg);
    const double log_a_bg = log_weight(params.a_bg);
    double total = 0.0;
    for (std::size_t p = 0; p < fg.size(); ++p) {
        const double l_fg = log_a_fg + fg[p] / sigma;
        const double l_bg = log_a_bg + bg[p] / sigma;
        const double top = std::max(l_fg, l_bg);
        total += top + std::log(std::exp(l_fg - top) + std::exp(l_bg - top));
    }
    return total;
}

FeatureMap l2_normalize_pixels(const FeatureMap& features)
{
    const int d = features.channels();
    std::vector<double> norm2(features.pixels(), 0.0);
    for (int k = 0; k < d; ++k) {
        const auto plane = features.channel(k);
        for (std::size_t p = 0; p < plane.size(); ++p) {
            norm2[p] += static_cast<double>(plane[p]) * plane[p];
        }
    }
    std::vector<float> values(features.values().begin(), features.values().end());
    for (int k = 0; k < d; ++k) {
        for (std::size_t p = 0; p < norm2.size(); ++p) {
            if (norm2[p] > 0.0) {
                float& v = values[static_cast<std::size_t>(k) * norm2.size() + p];
                v = static_cast<float>(v / std::sqrt(norm2[p]));
            }
        }
    }
    return FeatureMap(d, features.height(), features.width(), std::move(values));
}

std::optional<EmResult> run_em(const FeatureMap& features, MixtureParams init, const EmConfig& cfg)
{
    cfg.validate();
    check_params(init, features);
    if (cfg.iterations == 0) {
        return std::nullopt;
    }

    std::optional<FeatureMap> normalized;
    if (cfg.l2_normalize_features) {
        normalized = l2_normalize_pixels(features);
    }
    const FeatureMap& x = normalized ? *normalized : features;

    EmResult result;
    MixtureParams params = std::move(init);
    if (cfg.record_trace) {
        result.trace.push_back(log_likelihood(x, params, cfg.sigma));
    }
    for (int t = 0; t < cfg.iterations; ++t) {
        if (cfg.l2_normalize_features) {
            params.v_fg = unit(std::move(params.v_fg));
            params.v_bg = unit(std::move(params.v_bg));
        }
        result.latent = e_step(x, params, cfg.sigma);
        params = m_step(x, result.latent, params);
        if (cfg.record_trace) {
            result.trace.push_back(log_likelihood(x, params, cfg.sigma));
        }
    }
    result.params = std::move(params);
    return result;
}

std::optional<EmResult> run_em(const FeatureMap& features, const ContextStore& store, int c,
                               const EmConfig& cfg)
{
    if (c < 0 || c >= store.num_classes()) {
        throw std::out_of_range("class index " + std::to_string(c) + " outside [0, " +
                                std::to_string(store.num_classes()) + ")");
    }
    MixtureParams init;
    init.a_fg = cfg.a_init;
    init.a_bg = 1.0 - cfg.a_init;
    init.v_fg.assign(store.fg(c).begin(), store.fg(c).end());
    init.v_bg.assign(store.bg(c).begin(), store.bg(c).end());
    return run_em(features, std::move(init), cfg);
}

} // namespace cream
