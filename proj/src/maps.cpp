#include "cream/maps.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace cream {

namespace {

void check_extents(int height, int width)
{
    if (height < 1 || width < 1) {
        throw std::invalid_argument("map extents must be positive, got " + std::to_string(height) +
                                    "x" + std::to_string(width));
    }
}

} // namespace

FeatureMap::FeatureMap(int channels, int height, int width)
    : channels_(channels), height_(height), width_(width)
{
    if (channels < 1) {
        throw std::invalid_argument("feature map needs at least one channel");
    }
    check_extents(height, width);
    values_.assign(static_cast<std::size_t>(channels) * height * width, 0.0f);
}

FeatureMap::FeatureMap(int channels, int height, int width, std::vector<float> values)
    : FeatureMap(channels, height, width)
{
    if (values.size() != values_.size()) {
        throw std::invalid_argument("feature map expects " + std::to_string(values_.size()) +
                                    " values, got " + std::to_string(values.size()));
    }
    for (float v : values) {
        if (!std::isfinite(v)) {
            throw std::invalid_argument("feature map contains a non-finite value");
        }
    }
    values_ = std::move(values);
}

void FeatureMap::set(int k, int i, int j, float v)
{
    if (!std::isfinite(v)) {
        throw std::invalid_argument("feature map contains a non-finite value");
    }
    values_[index(k, i, j)] = v;
}

std::span<const float> FeatureMap::channel(int k) const
{
    return std::span<const float>(values_).subspan(static_cast<std::size_t>(k) * pixels(), pixels());
}

void FeatureMap::pixel(int i, int j, std::span<double> out) const
{
    const std::size_t p = static_cast<std::size_t>(i) * width_ + j;
    for (int k = 0; k < channels_; ++k) {
        out[k] = values_[static_cast<std::size_t>(k) * pixels() + p];
    }
}

ActivationMap::ActivationMap(int height, int width, double fill) : height_(height), width_(width)
{
    check_extents(height, width);
    values_.assign(static_cast<std::size_t>(height) * width, fill);
}

ActivationMap::ActivationMap(int height, int width, std::vector<double> values)
    : height_(height), width_(width)
{
    check_extents(height, width);
    if (values.size() != static_cast<std::size_t>(height) * width) {
        throw std::invalid_argument("activation map size does not match its extents");
    }
    for (double v : values) {
        if (!std::isfinite(v)) {
            throw std::invalid_argument("activation map contains a non-finite value");
        }
    }
    values_ = std::move(values);
}

double ActivationMap::min() const { return *std::min_element(values_.begin(), values_.end()); }

double ActivationMap::max() const { return *std::max_element(values_.begin(), values_.end()); }

BinaryMask::BinaryMask(int height, int width, bool fill) : height_(height), width_(width)
{
    check_extents(height, width);
    values_.assign(static_cast<std::size_t>(height) * width, fill ? 1 : 0);
}

BinaryMask::BinaryMask(int height, int width, std::vector<std::uint8_t> values)
    : height_(height), width_(width)
{
    check_extents(height, width);
    if (values.size() != static_cast<std::size_t>(height) * width) {
        throw std::invalid_argument("mask size does not match its extents");
    }
    if (std::any_of(values.begin(), values.end(), [](std::uint8_t v) { return v > 1; })) {
        throw std::invalid_argument("mask values must be 0 or 1");
    }
    values_ = std::move(values);
}

std::size_t BinaryMask::count() const
{
    return static_cast<std::size_t>(std::count(values_.begin(), values_.end(), std::uint8_t{1}));
}

ActivationMap min_max_normalize(const ActivationMap& m)
{
    const double lo = m.min();
    const double hi = m.max();
    ActivationMap out(m.height(), m.width(), 0.0);
    if (!(hi > lo)) {
        return out;
    }
    const double scale = 1.0 / (hi - lo);
    for (std::size_t p = 0; p < m.size(); ++p) {
        out[p] = (m[p] - lo) * scale;
    }
    // The extremes are pinned so idempotence and exact [0, 1] bounds hold
    // despite rounding in the scale factor.
    for (std::size_t p = 0; p < m.size(); ++p) {
        if (m[p] == hi) {
            out[p] = 1.0;
        }
        out[p] = std::clamp(out[p], 0.0, 1.0);
    }
    return out;
}

MaskPair threshold_fg_bg(const ActivationMap& m, double delta)
{
    std::vector<std::uint8_t> fg(m.size());
    std::vector<std::uint8_t> bg(m.size());
    for (std::size_t p = 0; p < m.size(); ++p) {
        const bool on = m[p] >= delta;
        fg[p] = on ? 1 : 0;
        bg[p] = on ? 0 : 1;
    }
    return {BinaryMask(m.height(), m.width(), std::move(fg)),
            BinaryMask(m.height(), m.width(), std::move(bg))};
}

MaskPair cam_guided_masks(const ActivationMap& raw_map, double delta_fraction)
{
    const ActivationMap normalized = min_max_normalize(raw_map);
    return threshold_fg_bg(normalized, delta_fraction * normalized.max());
}

ActivationMap add_maps(const ActivationMap& a, const ActivationMap& b)
{
    if (!a.same_shape(b)) {
        throw std::invalid_argument("add_maps: shape mismatch " + std::to_string(a.height()) + "x" +
                                    std::to_string(a.width()) + " vs " + std::to_string(b.height()) +
                                    "x" + std::to_string(b.width()));
    }
    ActivationMap out(a.height(), a.width());
    for (std::size_t p = 0; p < a.size(); ++p) {
        out[p] = a[p] + b[p];
    }
    return out;
}

ActivationMap quantize_f32(const ActivationMap& m)
{
    ActivationMap out(m.height(), m.width());
    for (std::size_t p = 0; p < m.size(); ++p) {
        out[p] = static_cast<double>(static_cast<float>(m[p]));
    }
    return out;
}

} // namespace cream
