#include "cream/batch.hpp"
#include "cream/fixtures.hpp"

#include <doctest.h>

#include <atomic>

using namespace cream;

namespace {

struct Small {
    FixtureSpec spec;
    FixtureSet set;
    FeatureDump dump;
    ContextStore store;

    Small()
        : spec([] {
              FixtureSpec s;
              s.num_classes = 3;
              return s;
          }()),
          set(generate(spec, 4)), dump(to_dump(set, spec)),
          store(learn_embeddings(to_dump(generate(spec, 4, Split::train), spec), set.head, 17, 0.8f))
    {
    }
};

} // namespace

TEST_CASE("parallel_for visits every index once and reports the first failure")
{
    for (int jobs : {1, 3, 16}) {
        std::vector<std::atomic<int>> hits(50);
        parallel_for(50, jobs, [&](std::size_t i) { hits[i] += 1; });
        for (auto& h : hits) {
            CHECK(h == 1);
        }
        try {
            parallel_for(50, jobs, [](std::size_t i) {
                if (i == 7 || i == 31) {
                    throw std::runtime_error("at " + std::to_string(i));
                }
            });
            FAIL("expected an exception");
        } catch (const std::runtime_error& e) {
            CHECK(std::string(e.what()) == "at 7");
        }
    }
    CHECK_NOTHROW(parallel_for(0, 4, [](std::size_t) { throw 1; }));
}

TEST_CASE("learned store equals a direct embedding pass")
{
    Small s;
    const auto train = generate(s.spec, 4, Split::train);
    std::vector<LabeledFeatures> samples;
    for (const auto& fx : train.fixtures) {
        samples.push_back({fx.image_id, &fx.features, fx.label});
    }
    CHECK(s.store == embedding_pass(init_store(3, s.spec.dim, 17, 0.8f), samples, s.set.head));
}

TEST_CASE("reactivation is independent of the job count and sorted by id")
{
    Small s;
    std::reverse(s.dump.records.begin(), s.dump.records.end());
    const auto a = reactivate_dump(s.dump, s.set.head, s.store, {}, ClassPolicy::gt, 1);
    const auto b = reactivate_dump(s.dump, s.set.head, s.store, {}, ClassPolicy::gt, 4);
    REQUIRE(a.records.size() == 12);
    for (std::size_t n = 0; n < 12; ++n) {
        CHECK(a.records[n].image_id == b.records[n].image_id);
        CHECK(a.records[n].map == b.records[n].map);
        if (n > 0) {
            CHECK(a.records[n - 1].image_id < a.records[n].image_id);
        }
    }
    const auto& fx = s.set.fixtures[0];
    const auto direct = reactivate(fx.features, s.set.head, s.store, fx.label, {});
    CHECK(a.records[0].image_id == fx.image_id);
    CHECK(a.records[0].map == direct.final);
}

TEST_CASE("class policies")
{
    Small s;
    auto r = s.dump.records[0];
    r.predictions = std::vector<std::uint32_t>{2, 1};
    CHECK(policy_class(r, s.set.head, ClassPolicy::gt) == int(r.label));
    CHECK(policy_class(r, s.set.head, ClassPolicy::top1) == 2);
    r.predictions.reset();
    CHECK(policy_class(r, s.set.head, ClassPolicy::top1) ==
          top_k_classes(class_scores(r.features, s.set.head), 1)[0]);
}

TEST_CASE("evaluation matches maps to records by id")
{
    Small s;
    const auto maps = reactivate_dump(s.dump, s.set.head, s.store, {}, ClassPolicy::gt);
    EvalOptions opts;
    opts.geometry = resolve_geometry(s.dump, std::nullopt, 8, UpsampleMode::nearest, BoxMode::largest_cc);
    CHECK(opts.geometry.image_height == 224);
    const auto report = evaluate_maps(maps, s.dump, opts);
    CHECK(report.images == 12);
    CHECK(report.top1_loc.has_value());
    CHECK(report.px_ap.has_value());

    auto missing = maps;
    missing.records[0].image_id = "nope";
    CHECK_THROWS_AS(evaluate_maps(missing, s.dump, opts), std::invalid_argument);
    auto dup = maps;
    dup.records[1].image_id = dup.records[0].image_id;
    CHECK_THROWS_AS(evaluate_maps(dup, s.dump, opts), std::invalid_argument);

    CHECK(resolve_geometry(s.dump, 100, 8, UpsampleMode::nearest, BoxMode::largest_cc).image_width == 100);
    CHECK(resolve_geometry(s.dump, std::nullopt, std::nullopt, UpsampleMode::nearest, BoxMode::largest_cc)
              .image_width == 224);
}

TEST_CASE("pseudo boxes")
{
    Small s;
    const auto geom = resolve_geometry(s.dump, std::nullopt, 8, UpsampleMode::nearest, BoxMode::largest_cc);
    const auto boxes = pseudo_boxes(s.dump, s.set.head, s.store, {}, 0.2, geom, 2);
    REQUIRE(boxes.size() == 12);
    for (const auto& b : boxes) {
        CHECK(b.box.valid());
        CHECK(b.box.x1 <= 224);
    }
    // A map with no pixel above tau falls back to the whole image.
    const auto none = pseudo_boxes(s.dump, s.set.head, s.store, {}, 1.5, geom);
    CHECK(none[0].box == BoundingBox{0, 0, 224, 224});
}

TEST_CASE("incompatible inputs")
{
    Small s;
    CHECK_THROWS_AS(check_compatible(s.dump, ClassifierHead(4, s.spec.dim, std::vector<float>(4 * 16))),
                    std::invalid_argument);
    auto no_box = s.dump.records[0];
    no_box.boxes.reset();
    CHECK_THROWS_AS(ground_truth(no_box), std::invalid_argument);
}
