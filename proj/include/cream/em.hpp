#pragma once

// Inference-time re-activation: per-image EM soft clustering of pixel
// features into foreground/background, initialized from the learned
// context embeddings.
//
// Each pixel x is modelled as a two-component mixture
//     p(x) = a_fg exp(v_fg . x / sigma) + a_bg exp(v_bg . x / sigma)
// and the image log-likelihood is the sum of log p(x) over pixels. All
// evaluation happens in the log domain with per-pixel max-logit
// subtraction, so large activations do not overflow.

#include "cream/context.hpp"
#include "cream/maps.hpp"

#include <optional>
#include <span>
#include <vector>

namespace cream {

struct EmConfig {
    double sigma = 8.0;
    /// Number of (E, M) rounds. Zero disables re-activation.
    int iterations = 2;
    /// Initial foreground mixture weight; background gets 1 - a_init.
    double a_init = 0.5;
    /// Cosine reading of the base model: L2-normalize pixel features and
    /// embeddings before every E-step.
    bool l2_normalize_features = false;
    /// Record the log-likelihood at the initial parameters and after
    /// every M-step.
    bool record_trace = false;

    /// Throws std::invalid_argument when a field is out of range.
    void validate() const;
};

struct MixtureParams {
    double a_fg = 0.5;
    double a_bg = 0.5;
    std::vector<double> v_fg;
    std::vector<double> v_bg;
};

/// Per-pixel posteriors; fg + bg = 1 at every pixel.
struct LatentMaps {
    ActivationMap fg;
    ActivationMap bg;
};

/// exp(v . x_ij / sigma) at every pixel.
ActivationMap base_similarity(std::span<const double> v, const FeatureMap& features, double sigma);

/// Posterior responsibilities under the current parameters.
LatentMaps e_step(const FeatureMap& features, const MixtureParams& params, double sigma);

/// Responsibility-weighted means and effective pixel fractions.
///
/// A side with zero total responsibility keeps previous's embedding and
/// gets weight 1e-8 before the weights are renormalized.
MixtureParams m_step(const FeatureMap& features, const LatentMaps& latent,
                     const MixtureParams& previous);

/// Sum over pixels of log sum_m a_m exp(v_m . x / sigma).
double log_likelihood(const FeatureMap& features, const MixtureParams& params, double sigma);

struct EmResult {
    /// Posteriors from the final E-step.
    LatentMaps latent;
    /// Parameters after the final M-step.
    MixtureParams params;
    /// Log-likelihood at the initial parameters followed by one entry per
    /// M-step; empty unless EmConfig::record_trace is set.
    std::vector<double> trace;
};

/// Alternates E and M steps for cfg.iterations rounds starting from init.
/// Returns std::nullopt when cfg.iterations == 0.
std::optional<EmResult> run_em(const FeatureMap& features, MixtureParams init, const EmConfig& cfg);

/// Starts from the class-c embeddings of the store and cfg.a_init.
/// Throws std::out_of_range for a bad class index.
std::optional<EmResult> run_em(const FeatureMap& features, const ContextStore& store, int c,
                               const EmConfig& cfg);

/// Copy of features with every pixel vector scaled to unit length (zero
/// pixels stay zero).
FeatureMap l2_normalize_pixels(const FeatureMap& features);

} // namespace cream
