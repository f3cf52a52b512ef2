#include "cream/batch.hpp"

#include <algorithm>
#include <exception>
#include <map>
#include <stdexcept>
#include <thread>

namespace cream {

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn)
{
    std::vector<std::exception_ptr> errors(n);
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), n);
    auto run_stripe = [&](std::size_t first) {
        for (std::size_t i = first; i < n; i += workers) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    if (workers <= 1) {
        run_stripe(0);
    } else {
        std::vector<std::thread> threads;
        for (std::size_t w = 0; w < workers; ++w) {
            threads.emplace_back(run_stripe, w);
        }
        for (auto& t : threads) {
            t.join();
        }
    }
    for (auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

void check_compatible(const FeatureDump& dump, const ClassifierHead& head)
{
    if (dump.num_classes != head.num_classes() || dump.channels != head.channels()) {
        throw std::invalid_argument("head is " + std::to_string(head.num_classes()) + "x" +
                                    std::to_string(head.channels()) + " but dump has C=" +
                                    std::to_string(dump.num_classes) +
                                    ", d=" + std::to_string(dump.channels));
    }
}

ContextStore learn_embeddings(const FeatureDump& dump, const ClassifierHead& head, std::uint64_t seed,
                              float lambda, const EmbeddingPassOptions& options)
{
    check_compatible(dump, head);
    std::vector<LabeledFeatures> samples;
    samples.reserve(dump.records.size());
    for (const auto& r : dump.records) {
        samples.push_back({r.image_id, &r.features, static_cast<int>(r.label)});
    }
    return embedding_pass(init_store(dump.num_classes, dump.channels, seed, lambda), samples, head,
                          options);
}

int policy_class(const DumpRecord& record, const ClassifierHead& head, ClassPolicy policy)
{
    if (policy == ClassPolicy::gt) {
        return static_cast<int>(record.label);
    }
    if (record.predictions && !record.predictions->empty()) {
        return static_cast<int>(record.predictions->front());
    }
    return top_k_classes(class_scores(record.features, head), 1).front();
}

namespace {

std::vector<std::size_t> order_by_id(const FeatureDump& dump)
{
    std::vector<std::size_t> order(dump.records.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        order[i] = i;
    }
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return dump.records[a].image_id < dump.records[b].image_id;
    });
    return order;
}

} // namespace

MapSet reactivate_dump(const FeatureDump& dump, const ClassifierHead& head, const ContextStore& store,
                       const ReactivationConfig& config, ClassPolicy policy, int jobs)
{
    check_compatible(dump, head);
    config.em.validate();
    const auto order = order_by_id(dump);
    MapSet maps;
    maps.policy = policy;
    maps.records.resize(order.size());
    parallel_for(order.size(), jobs, [&](std::size_t n) {
        const auto& r = dump.records[order[n]];
        const int c = policy_class(r, head, policy);
        try {
            maps.records[n] = {r.image_id, c, reactivate(r.features, head, store, c, config).final};
        } catch (const std::exception& e) {
            throw std::runtime_error("record '" + r.image_id + "': " + e.what());
        }
    });
    return maps;
}

GroundTruth ground_truth(const DumpRecord& record)
{
    if (!record.boxes || record.boxes->empty()) {
        throw std::invalid_argument("record '" + record.image_id + "' has no ground-truth boxes");
    }
    return {record.image_id, static_cast<int>(record.label), *record.boxes, record.mask};
}

EvalGeometry resolve_geometry(const FeatureDump& dump, std::optional<int> image_size,
                              std::optional<int> stride, UpsampleMode upsample, BoxMode box_mode)
{
    EvalGeometry g;
    g.upsample = upsample;
    g.box_mode = box_mode;
    if (image_size) {
        if (*image_size <= 0) {
            throw std::invalid_argument("image size must be positive");
        }
        g.image_height = g.image_width = *image_size;
    } else if (stride) {
        if (*stride <= 0) {
            throw std::invalid_argument("stride must be positive");
        }
        g.image_height = dump.height * *stride;
        g.image_width = dump.width * *stride;
    }
    return g;
}

EvalReport evaluate_maps(const MapSet& maps, const FeatureDump& dump, const EvalOptions& options)
{
    std::map<std::string, const DumpRecord*> by_id;
    for (const auto& r : dump.records) {
        if (!by_id.emplace(r.image_id, &r).second) {
            throw std::invalid_argument("duplicate image id '" + r.image_id + "' in dump");
        }
    }
    std::vector<const MapRecord*> sorted;
    for (const auto& m : maps.records) {
        sorted.push_back(&m);
    }
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const MapRecord* a, const MapRecord* b) { return a->image_id < b->image_id; });

    std::vector<ActivationMap> activation;
    std::vector<GroundTruth> gts;
    std::vector<RankedPredictions> predictions;
    bool all_ranked = true;
    for (std::size_t n = 0; n < sorted.size(); ++n) {
        const auto& m = *sorted[n];
        if (n > 0 && sorted[n - 1]->image_id == m.image_id) {
            throw std::invalid_argument("duplicate image id '" + m.image_id + "' in maps");
        }
        const auto it = by_id.find(m.image_id);
        if (it == by_id.end()) {
            throw std::invalid_argument("map '" + m.image_id + "' has no record in the dump");
        }
        activation.push_back(m.map);
        gts.push_back(ground_truth(*it->second));
        if (it->second->predictions) {
            predictions.emplace_back(it->second->predictions->begin(), it->second->predictions->end());
        } else {
            all_ranked = false;
        }
    }
    if (!all_ranked) {
        predictions.clear();
    }
    return evaluate(activation, gts, predictions, options);
}

std::vector<PseudoBox> pseudo_boxes(const FeatureDump& dump, const ClassifierHead& head,
                                    const ContextStore& store, const ReactivationConfig& config,
                                    double tau, const EvalGeometry& geometry, int jobs)
{
    const auto maps = reactivate_dump(dump, head, store, config, ClassPolicy::gt, jobs);
    std::vector<PseudoBox> out;
    out.reserve(maps.records.size());
    for (const auto& m : maps.records) {
        const auto box = predict_box(m.map, tau, geometry);
        out.push_back({m.image_id, box.value_or(BoundingBox{0, 0, geometry.image_width,
                                                            geometry.image_height})});
    }
    return out;
}

} // namespace cream
