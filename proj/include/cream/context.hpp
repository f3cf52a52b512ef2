#pragma once

// Class-specific foreground/background context embeddings and their
// CAM-guided momentum update.

#include "cream/cam.hpp"
#include "cream/maps.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace cream {

/// Per-class foreground and background embeddings (C x d each) with the
/// momentum coefficient used to update them.
///
/// Embeddings are stored as floats, the same precision as the serialized
/// store, so an in-memory store and one read back from disk are identical.
class ContextStore {
public:
    ContextStore() = default;
    ContextStore(int num_classes, int dim, float lambda, std::uint64_t seed,
                 std::vector<float> fg, std::vector<float> bg);

    int num_classes() const { return num_classes_; }
    int dim() const { return dim_; }
    float lambda() const { return lambda_; }
    std::uint64_t seed() const { return seed_; }

    std::span<const float> fg(int c) const;
    std::span<const float> bg(int c) const;
    std::span<const float> fg() const { return fg_; }
    std::span<const float> bg() const { return bg_; }

    void set_lambda(float lambda);

    /// Momentum update of class c from one sample:
    ///   V_m <- lambda * V_m + (1 - lambda) * masked spatial mean of F, m in {fg, bg}.
    /// A side whose mask is empty is left untouched.
    void update(int c, const FeatureMap& features, const MaskPair& masks);

    friend bool operator==(const ContextStore&, const ContextStore&) = default;

private:
    void update_side(std::span<float> embedding, const FeatureMap& features,
                     const BinaryMask& mask) const;

    int num_classes_ = 0;
    int dim_ = 0;
    float lambda_ = 0.8f;
    std::uint64_t seed_ = 0;
    std::vector<float> fg_;
    std::vector<float> bg_;
};

/// Standard-normal embeddings, reproducible from seed.
ContextStore init_store(int num_classes, int dim, std::uint64_t seed, float lambda = 0.8f);

/// Same as store.update(c, ...) but returns the updated copy.
ContextStore update_embeddings(ContextStore store, const FeatureMap& features, const MaskPair& masks,
                               int c);

struct LabeledFeatures {
    std::string image_id;
    const FeatureMap* features = nullptr;
    int label = 0;
};

struct EmbeddingPassOptions {
    /// Foreground threshold as a fraction of the normalized CAM's max.
    double delta_fraction = 0.2;
    int epochs = 1;
};

/// Runs the update over the samples in order: CAM for the ground-truth
/// label, normalize, split at delta_fraction * max, update.
///
/// Per-sample failures are rethrown as std::runtime_error naming the
/// sample index and image id.
ContextStore embedding_pass(ContextStore store, std::span<const LabeledFeatures> samples,
                            const ClassifierHead& head, const EmbeddingPassOptions& options = {});

} // namespace cream
