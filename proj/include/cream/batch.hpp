#pragma once

// Whole-dataset stages over a FeatureDump: embedding learning,
// re-activation of every record, evaluation of a map set against the
// dump's annotations and pseudo-box generation. The CLI is a thin layer
// over these.

#include "cream/io.hpp"
#include "cream/metrics.hpp"
#include "cream/pipeline.hpp"

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace cream {

/// Calls fn(i) for every i < n on up to jobs threads. Every index runs;
/// if any throw, the exception of the lowest failing index is rethrown.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

/// Throws std::invalid_argument if head and dump disagree on C or d.
void check_compatible(const FeatureDump& dump, const ClassifierHead& head);

/// Embedding pass over the dump in record order, from init_store(seed, lambda).
ContextStore learn_embeddings(const FeatureDump& dump, const ClassifierHead& head, std::uint64_t seed,
                              float lambda, const EmbeddingPassOptions& options = {});

/// Class re-activated for a record: its label (gt) or the top-ranked
/// prediction (top1, from the stored ranking when present, else from the
/// head's scores).
int policy_class(const DumpRecord& record, const ClassifierHead& head, ClassPolicy policy);

/// Final map of every record, sorted by image_id.
MapSet reactivate_dump(const FeatureDump& dump, const ClassifierHead& head, const ContextStore& store,
                       const ReactivationConfig& config, ClassPolicy policy, int jobs = 1);

/// Ground truth of a record. Throws std::invalid_argument if it has no boxes.
GroundTruth ground_truth(const DumpRecord& record);

/// Feature-grid to image geometry: explicit image size wins, else
/// height * stride, else the EvalGeometry default.
EvalGeometry resolve_geometry(const FeatureDump& dump, std::optional<int> image_size,
                              std::optional<int> stride, UpsampleMode upsample, BoxMode box_mode);

/// Evaluates maps against the dump's annotations, matched by image_id.
/// Throws std::invalid_argument if a map has no record or ids repeat.
EvalReport evaluate_maps(const MapSet& maps, const FeatureDump& dump, const EvalOptions& options);

struct PseudoBox {
    std::string image_id;
    BoundingBox box;
};

/// One box per record from the ground-truth-class re-activation map, in
/// image coordinates, sorted by image_id. A map with nothing above tau
/// yields the whole image.
std::vector<PseudoBox> pseudo_boxes(const FeatureDump& dump, const ClassifierHead& head,
                                    const ContextStore& store, const ReactivationConfig& config,
                                    double tau, const EvalGeometry& geometry, int jobs = 1);

} // namespace cream
