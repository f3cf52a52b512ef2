#pragma once

// Dense grid types shared by every stage: per-pixel feature tensors,
// real-valued activation maps and binary masks, plus the handful of map
// operations (min-max normalization, thresholding, addition) the
// pipeline is built from.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace cream {

/// Last-conv feature tensor of one image, channel-major (d x h x w).
///
/// Values are kept as 32-bit floats, which is also the on-disk
/// representation, so a dump round-trips bit-exactly. Consumers promote
/// to double for arithmetic.
class FeatureMap {
public:
    FeatureMap() = default;
    /// Zero-filled tensor. Throws std::invalid_argument on non-positive extents.
    FeatureMap(int channels, int height, int width);
    /// Throws std::invalid_argument on bad extents, size mismatch or
    /// non-finite values.
    FeatureMap(int channels, int height, int width, std::vector<float> values);

    int channels() const { return channels_; }
    int height() const { return height_; }
    int width() const { return width_; }
    std::size_t pixels() const { return static_cast<std::size_t>(height_) * width_; }

    float at(int k, int i, int j) const { return values_[index(k, i, j)]; }
    void set(int k, int i, int j, float v);

    /// Contiguous h*w plane of channel k.
    std::span<const float> channel(int k) const;
    std::span<const float> values() const { return values_; }

    /// Copies the d-vector at pixel (i, j) into out (size must be d).
    void pixel(int i, int j, std::span<double> out) const;

    friend bool operator==(const FeatureMap&, const FeatureMap&) = default;

private:
    std::size_t index(int k, int i, int j) const
    {
        return (static_cast<std::size_t>(k) * height_ + i) * width_ + j;
    }

    int channels_ = 0;
    int height_ = 0;
    int width_ = 0;
    std::vector<float> values_;
};

/// Real-valued h x w map (CAM, latent posterior, final re-activation map).
class ActivationMap {
public:
    ActivationMap() = default;
    ActivationMap(int height, int width, double fill = 0.0);
    /// Throws std::invalid_argument on bad extents, size mismatch or
    /// non-finite values.
    ActivationMap(int height, int width, std::vector<double> values);

    int height() const { return height_; }
    int width() const { return width_; }
    std::size_t size() const { return values_.size(); }

    double at(int i, int j) const { return values_[static_cast<std::size_t>(i) * width_ + j]; }
    double& at(int i, int j) { return values_[static_cast<std::size_t>(i) * width_ + j]; }
    double operator[](std::size_t p) const { return values_[p]; }
    double& operator[](std::size_t p) { return values_[p]; }

    std::span<const double> values() const { return values_; }
    std::span<double> values() { return values_; }

    double min() const;
    double max() const;

    bool same_shape(const ActivationMap& other) const
    {
        return height_ == other.height_ && width_ == other.width_;
    }

    friend bool operator==(const ActivationMap&, const ActivationMap&) = default;

private:
    int height_ = 0;
    int width_ = 0;
    std::vector<double> values_;
};

/// h x w mask with values exactly 0 or 1.
class BinaryMask {
public:
    BinaryMask() = default;
    BinaryMask(int height, int width, bool fill = false);
    /// Throws std::invalid_argument if any value is not 0 or 1.
    BinaryMask(int height, int width, std::vector<std::uint8_t> values);

    int height() const { return height_; }
    int width() const { return width_; }
    std::size_t size() const { return values_.size(); }

    bool at(int i, int j) const { return values_[static_cast<std::size_t>(i) * width_ + j] != 0; }
    void set(int i, int j, bool v) { values_[static_cast<std::size_t>(i) * width_ + j] = v ? 1 : 0; }
    bool operator[](std::size_t p) const { return values_[p] != 0; }

    std::span<const std::uint8_t> values() const { return values_; }

    /// Number of set pixels (the L0 norm).
    std::size_t count() const;
    bool empty() const { return count() == 0; }

    friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

private:
    int height_ = 0;
    int width_ = 0;
    std::vector<std::uint8_t> values_;
};

/// Complementary foreground/background masks; fg + bg = 1 everywhere.
struct MaskPair {
    BinaryMask fg;
    BinaryMask bg;
};

/// Affine rescale to [0, 1]. A constant map becomes all zeros.
ActivationMap min_max_normalize(const ActivationMap& m);

/// fg = 1 where m >= delta, bg = 1 - fg.
MaskPair threshold_fg_bg(const ActivationMap& m, double delta);

/// Foreground/background split used during embedding learning and
/// calibration: normalize the raw map, then threshold at
/// delta_fraction * max(normalized map).
MaskPair cam_guided_masks(const ActivationMap& raw_map, double delta_fraction);

/// Elementwise sum. Throws std::invalid_argument on shape mismatch.
ActivationMap add_maps(const ActivationMap& a, const ActivationMap& b);

/// Rounds every value through float, matching what the interchange
/// format stores.
ActivationMap quantize_f32(const ActivationMap& m);

} // namespace cream
