#pragma once

#include "cream/maps.hpp"

#include <optional>
#include <vector>

namespace cream {

/// Final linear layer of a GAP classifier: one d-vector of channel weights
/// per class, plus an optional per-class bias.
class ClassifierHead {
public:
    ClassifierHead() = default;
    /// weights is row-major C x d. Throws std::invalid_argument on size
    /// mismatch or non-finite values.
    ClassifierHead(int num_classes, int channels, std::vector<float> weights,
                   std::optional<std::vector<float>> bias = std::nullopt);

    int num_classes() const { return num_classes_; }
    int channels() const { return channels_; }

    std::span<const float> weights(int c) const;
    std::span<const float> weights() const { return weights_; }
    const std::optional<std::vector<float>>& bias() const { return bias_; }

    friend bool operator==(const ClassifierHead&, const ClassifierHead&) = default;

private:
    int num_classes_ = 0;
    int channels_ = 0;
    std::vector<float> weights_;
    std::optional<std::vector<float>> bias_;
};

using ClassScores = std::vector<double>;

/// Channel-weighted sum of the feature planes for class c. Signed and
/// unnormalized; bias is ignored.
///
/// Throws std::out_of_range for a bad class index and std::invalid_argument
/// when the head and feature channel counts differ.
ActivationMap compute_cam(const FeatureMap& features, const ClassifierHead& head, int c);

/// GAP-then-linear scores: S_c = mean_ij CAM_c(i, j) + bias_c. The spatial
/// sum of the CAM equals (S_c - bias_c) * h * w.
ClassScores class_scores(const FeatureMap& features, const ClassifierHead& head);

/// Indices of the k largest scores, descending, ties to the lower index.
std::vector<int> top_k_classes(const ClassScores& scores, int k);

} // namespace cream
