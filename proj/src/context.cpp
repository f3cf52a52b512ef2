#include "cream/context.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace cream {

namespace {

void check_lambda(float lambda)
{
    if (!(lambda >= 0.0f && lambda <= 1.0f)) {
        throw std::invalid_argument("momentum coefficient must lie in [0, 1]");
    }
}

} // namespace

ContextStore::ContextStore(int num_classes, int dim, float lambda, std::uint64_t seed,
                           std::vector<float> fg, std::vector<float> bg)
    : num_classes_(num_classes), dim_(dim), lambda_(lambda), seed_(seed), fg_(std::move(fg)),
      bg_(std::move(bg))
{
    if (num_classes < 1 || dim < 1) {
        throw std::invalid_argument("context store needs C >= 1 and d >= 1");
    }
    check_lambda(lambda);
    const auto expected = static_cast<std::size_t>(num_classes) * dim;
    if (fg_.size() != expected || bg_.size() != expected) {
        throw std::invalid_argument("context embeddings must be C x d");
    }
    for (const auto* side : {&fg_, &bg_}) {
        for (float v : *side) {
            if (!std::isfinite(v)) {
                throw std::invalid_argument("context embedding contains a non-finite value");
            }
        }
    }
}

std::span<const float> ContextStore::fg(int c) const
{
    return std::span<const float>(fg_).subspan(static_cast<std::size_t>(c) * dim_, dim_);
}

std::span<const float> ContextStore::bg(int c) const
{
    return std::span<const float>(bg_).subspan(static_cast<std::size_t>(c) * dim_, dim_);
}

void ContextStore::set_lambda(float lambda)
{
    check_lambda(lambda);
    lambda_ = lambda;
}

void ContextStore::update(int c, const FeatureMap& features, const MaskPair& masks)
{
    if (c < 0 || c >= num_classes_) {
        throw std::out_of_range("class index " + std::to_string(c) + " outside [0, " +
                                std::to_string(num_classes_) + ")");
    }
    if (features.channels() != dim_) {
        throw std::invalid_argument("feature channels do not match embedding dim");
    }
    auto row = [&](std::vector<float>& side) {
        return std::span<float>(side).subspan(static_cast<std::size_t>(c) * dim_, dim_);
    };
    update_side(row(fg_), features, masks.fg);
    update_side(row(bg_), features, masks.bg);
}

void ContextStore::update_side(std::span<float> embedding, const FeatureMap& features,
                               const BinaryMask& mask) const
{
    if (mask.height() != features.height() || mask.width() != features.width()) {
        throw std::invalid_argument("mask and feature map extents differ");
    }
    const std::size_t n = mask.count();
    if (n == 0) {
        return;
    }
    const double lambda = lambda_;
    for (int k = 0; k < dim_; ++k) {
        const auto plane = features.channel(k);
        double sum = 0.0;
        for (std::size_t p = 0; p < plane.size(); ++p) {
            if (mask[p]) {
                sum += plane[p];
            }
        }
        const double mean = sum / static_cast<double>(n);
        embedding[k] = static_cast<float>(lambda * embedding[k] + (1.0 - lambda) * mean);
    }
}

ContextStore init_store(int num_classes, int dim, std::uint64_t seed, float lambda)
{
    if (num_classes < 1 || dim < 1) {
        throw std::invalid_argument("context store needs C >= 1 and d >= 1");
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<float> normal(0.0f, 1.0f);
    const auto n = static_cast<std::size_t>(num_classes) * dim;
    std::vector<float> fg(n);
    std::vector<float> bg(n);
    for (auto& v : fg) {
        v = normal(rng);
    }
    for (auto& v : bg) {
        v = normal(rng);
    }
    return ContextStore(num_classes, dim, lambda, seed, std::move(fg), std::move(bg));
}

ContextStore update_embeddings(ContextStore store, const FeatureMap& features, const MaskPair& masks,
                               int c)
{
    store.update(c, features, masks);
    return store;
}

ContextStore embedding_pass(ContextStore store, std::span<const LabeledFeatures> samples,
                            const ClassifierHead& head, const EmbeddingPassOptions& options)
{
    if (options.epochs < 0) {
        throw std::invalid_argument("epochs must be non-negative");
    }
    for (int epoch = 0; epoch < options.epochs; ++epoch) {
        for (std::size_t s = 0; s < samples.size(); ++s) {
            const auto& sample = samples[s];
            try {
                if (sample.features == nullptr) {
                    throw std::invalid_argument("missing feature map");
                }
                const ActivationMap cam = compute_cam(*sample.features, head, sample.label);
                store.update(sample.label, *sample.features,
                             cam_guided_masks(cam, options.delta_fraction));
            } catch (const std::exception& e) {
                throw std::runtime_error("sample " + std::to_string(s) + " ('" + sample.image_id +
                                         "'): " + e.what());
            }
        }
    }
    return store;
}

} // namespace cream
