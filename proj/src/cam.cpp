#include "cream/cam.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace cream {

namespace {

void check_channels(const FeatureMap& features, const ClassifierHead& head)
{
    if (features.channels() != head.channels()) {
        throw std::invalid_argument("channel mismatch: features have " +
                                    std::to_string(features.channels()) + ", head expects " +
                                    std::to_string(head.channels()));
    }
}

} // namespace

ClassifierHead::ClassifierHead(int num_classes, int channels, std::vector<float> weights,
                               std::optional<std::vector<float>> bias)
    : num_classes_(num_classes), channels_(channels), weights_(std::move(weights)),
      bias_(std::move(bias))
{
    if (num_classes < 1 || channels < 1) {
        throw std::invalid_argument("classifier head needs at least one class and one channel");
    }
    if (weights_.size() != static_cast<std::size_t>(num_classes) * channels) {
        throw std::invalid_argument("classifier weights must be C x d");
    }
    if (bias_ && bias_->size() != static_cast<std::size_t>(num_classes)) {
        throw std::invalid_argument("classifier bias must have one entry per class");
    }
    auto finite = [](float v) { return std::isfinite(v); };
    if (!std::all_of(weights_.begin(), weights_.end(), finite) ||
        (bias_ && !std::all_of(bias_->begin(), bias_->end(), finite))) {
        throw std::invalid_argument("classifier head contains a non-finite value");
    }
}

std::span<const float> ClassifierHead::weights(int c) const
{
    return std::span<const float>(weights_).subspan(static_cast<std::size_t>(c) * channels_,
                                                    channels_);
}

ActivationMap compute_cam(const FeatureMap& features, const ClassifierHead& head, int c)
{
    if (c < 0 || c >= head.num_classes()) {
        throw std::out_of_range("class index " + std::to_string(c) + " outside [0, " +
                                std::to_string(head.num_classes()) + ")");
    }
    check_channels(features, head);

    ActivationMap cam(features.height(), features.width(), 0.0);
    auto out = cam.values();
    const auto w = head.weights(c);
    for (int k = 0; k < features.channels(); ++k) {
        const double wk = w[k];
        const auto plane = features.channel(k);
        for (std::size_t p = 0; p < plane.size(); ++p) {
            out[p] += wk * plane[p];
        }
    }
    return cam;
}

ClassScores class_scores(const FeatureMap& features, const ClassifierHead& head)
{
    check_channels(features, head);

    // GAP first, then the linear layer.
    std::vector<double> pooled(features.channels());
    for (int k = 0; k < features.channels(); ++k) {
        const auto plane = features.channel(k);
        double sum = 0.0;
        for (float v : plane) {
            sum += v;
        }
        pooled[k] = sum / static_cast<double>(plane.size());
    }

    ClassScores scores(head.num_classes());
    for (int c = 0; c < head.num_classes(); ++c) {
        const auto w = head.weights(c);
        double s = 0.0;
        for (int k = 0; k < head.channels(); ++k) {
            s += w[k] * pooled[k];
        }
        if (head.bias()) {
            s += (*head.bias())[c];
        }
        scores[c] = s;
    }
    return scores;
}

std::vector<int> top_k_classes(const ClassScores& scores, int k)
{
    if (k < 1 || k > static_cast<int>(scores.size())) {
        throw std::out_of_range("top_k_classes: k=" + std::to_string(k) + " outside [1, " +
                                std::to_string(scores.size()) + "]");
    }
    std::vector<int> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return scores[a] > scores[b]; });
    order.resize(k);
    return order;
}

} // namespace cream
