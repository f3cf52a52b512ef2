#include "cream/cli.hpp"

#include "cream/batch.hpp"
#include "cream/format.hpp"
#include "cream/io.hpp"
#include "cream/manifest.hpp"
#include "cream/suite.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <memory>
#include <sstream>

namespace cream {

namespace {

namespace fs = std::filesystem;

// Everything any subcommand may read from the command line. Unset
// optionals fall through to the manifest, then to built-in defaults.
struct Flags {
    std::optional<std::string> manifest;
    std::optional<std::string> dump;
    std::optional<std::string> head;
    std::optional<std::string> store;
    std::optional<std::string> maps;
    std::string out;
    std::optional<std::string> curve;
    std::string image_id;

    std::optional<double> sigma;
    std::optional<int> iters;
    std::optional<double> lambda;
    std::optional<double> delta_frac;
    std::optional<double> tau;
    std::optional<std::string> tau_grid;
    std::optional<std::string> box_mode;
    std::optional<std::string> upsample;
    std::optional<int> image_size;
    std::optional<int> stride;
    std::optional<std::string> class_policy;
    std::optional<std::uint64_t> seed;
    std::optional<int> jobs;
    std::optional<int> epochs;
    double curve_delta = 0.5;

    // synth
    int per_class = suite::kPerClass;
    std::optional<int> train_per_class;
    int classes = suite::default_spec().num_classes;
    int dim = suite::default_spec().dim;
    int size = suite::default_spec().height;
    double noise = suite::default_spec().noise;
    double part_fraction = suite::default_spec().part_fraction;
    std::string shape = "mixed";
    int top_k = 5;
};

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

template <typename T>
T pick(const std::optional<T>& flag, const std::optional<T>& manifest, T fallback)
{
    if (flag) {
        return *flag;
    }
    if (manifest) {
        return *manifest;
    }
    return fallback;
}

template <typename T>
std::optional<T> pick_opt(const std::optional<T>& flag, const std::optional<T>& manifest)
{
    return flag ? flag : manifest;
}

fs::path pick_path(const std::optional<std::string>& flag, const std::optional<fs::path>& manifest,
                   const char* name)
{
    if (flag) {
        return *flag;
    }
    if (manifest) {
        return *manifest;
    }
    throw UsageError(std::string("missing --") + name + " (and no manifest entry)");
}

struct Context {
    const Flags& flags;
    Manifest manifest;
    std::ostream& out;

    const ManifestConfig& cfg() const { return manifest.config; }

    int jobs() const
    {
        const int j = pick(flags.jobs, cfg().jobs, 1);
        if (j < 1) {
            throw std::invalid_argument("jobs must be at least 1");
        }
        return j;
    }

    ReactivationConfig reactivation() const
    {
        ReactivationConfig rc;
        rc.em.sigma = pick(flags.sigma, cfg().sigma, rc.em.sigma);
        rc.em.iterations = pick(flags.iters, cfg().iters, rc.em.iterations);
        rc.delta_fraction = pick(flags.delta_frac, cfg().delta_frac, rc.delta_fraction);
        rc.em.validate();
        return rc;
    }

    EvalGeometry geometry(const FeatureDump& dump) const
    {
        return resolve_geometry(
            dump, pick_opt(flags.image_size, cfg().image_size), pick_opt(flags.stride, cfg().stride),
            parse_upsample_mode(pick(flags.upsample, cfg().upsample, std::string("nearest"))),
            parse_box_mode(pick(flags.box_mode, cfg().box_mode, std::string("largest_cc"))));
    }

    double tau() const { return pick(flags.tau, cfg().tau, 0.2); }
};

void cmd_synth(const Context& ctx)
{
    const Flags& f = ctx.flags;
    FixtureSpec spec = suite::default_spec();
    spec.num_classes = f.classes;
    spec.dim = f.dim;
    spec.height = spec.width = f.size;
    spec.noise = f.noise;
    spec.part_fraction = f.part_fraction;
    spec.shape = parse_object_shape(f.shape);
    spec.seed = pick(f.seed, ctx.cfg().seed, spec.seed);
    spec.stride = pick(f.stride, ctx.cfg().stride, spec.stride);
    spec.validate();
    if (f.per_class < 1 || f.train_per_class.value_or(1) < 1) {
        throw std::invalid_argument("per-class counts must be positive");
    }

    const auto train = generate(spec, f.train_per_class.value_or(f.per_class), Split::train);
    const auto eval = generate(spec, f.per_class, Split::eval);

    Manifest m;
    m.train_dump = "train.crmf";
    m.dump = "eval.crmf";
    m.head = "head.crmh";
    m.config.stride = spec.stride;
    m.config.image_size = spec.height * spec.stride;
    m.config.seed = suite::kStoreSeed;
    const std::string manifest_text = manifest_json(m);

    const fs::path dir = f.out;
    fs::create_directories(dir);
    AtomicOutput train_out(dir / "train.crmf");
    AtomicOutput eval_out(dir / "eval.crmf");
    AtomicOutput head_out(dir / "head.crmh");
    AtomicOutput manifest_out(dir / "manifest.json");
    train_out.write(encode_dump(to_dump(train, spec, f.top_k)));
    eval_out.write(encode_dump(to_dump(eval, spec, f.top_k)));
    head_out.write(encode_head(eval.head));
    manifest_out.stream() << manifest_text;
    train_out.commit();
    eval_out.commit();
    head_out.commit();
    manifest_out.commit();
}

void cmd_embed_learn(const Context& ctx)
{
    const Flags& f = ctx.flags;
    const auto dump_path =
        pick_path(f.dump, ctx.manifest.train_dump ? ctx.manifest.train_dump : ctx.manifest.dump, "dump");
    AtomicOutput out(f.out);
    const auto dump = read_dump(dump_path);
    const auto head = read_head(pick_path(f.head, ctx.manifest.head, "head"));
    EmbeddingPassOptions opts;
    opts.delta_fraction = pick(f.delta_frac, ctx.cfg().delta_frac, opts.delta_fraction);
    opts.epochs = pick(f.epochs, ctx.cfg().epochs, opts.epochs);
    const auto seed = pick(f.seed, ctx.cfg().seed, suite::kStoreSeed);
    const auto lambda = static_cast<float>(pick(f.lambda, ctx.cfg().lambda, double{suite::kLambda}));
    out.write(encode_store(learn_embeddings(dump, head, seed, lambda, opts)));
    out.commit();
}

void cmd_reactivate(const Context& ctx)
{
    const Flags& f = ctx.flags;
    AtomicOutput out(f.out);
    const auto dump = read_dump(pick_path(f.dump, ctx.manifest.dump, "dump"));
    const auto head = read_head(pick_path(f.head, ctx.manifest.head, "head"));
    const auto store = read_store(pick_path(f.store, ctx.manifest.store, "store"));
    const auto policy = parse_class_policy(pick(f.class_policy, ctx.cfg().class_policy, std::string("gt")));
    out.write(encode_maps(reactivate_dump(dump, head, store, ctx.reactivation(), policy, ctx.jobs())));
    out.commit();
}

void cmd_eval(const Context& ctx)
{
    const Flags& f = ctx.flags;
    AtomicOutput report_out(f.out);
    std::unique_ptr<AtomicOutput> curve_out;
    if (f.curve) {
        curve_out = std::make_unique<AtomicOutput>(*f.curve);
    }
    const auto maps = read_maps(pick_path(f.maps, ctx.manifest.maps, "maps"));
    const auto dump = read_dump(pick_path(f.dump, ctx.manifest.dump, "dump"));
    EvalOptions opts;
    opts.tau = ctx.tau();
    if (const auto grid = pick_opt(f.tau_grid, ctx.cfg().tau_grid)) {
        opts.grid = ThresholdGrid::parse(*grid);
    }
    opts.curve_delta = f.curve_delta;
    opts.geometry = ctx.geometry(dump);
    const auto report = evaluate_maps(maps, dump, opts);
    write_report(report_out.stream(), report);
    if (curve_out) {
        write_curve(curve_out->stream(), report.curve);
        curve_out->commit();
    }
    report_out.commit();
}

void cmd_pseudo_boxes(const Context& ctx)
{
    const Flags& f = ctx.flags;
    const auto dump_path =
        pick_path(f.dump, ctx.manifest.train_dump ? ctx.manifest.train_dump : ctx.manifest.dump, "dump");
    AtomicOutput out(f.out);
    const auto dump = read_dump(dump_path);
    const auto head = read_head(pick_path(f.head, ctx.manifest.head, "head"));
    const auto store = read_store(pick_path(f.store, ctx.manifest.store, "store"));
    for (const auto& b : pseudo_boxes(dump, head, store, ctx.reactivation(), ctx.tau(), ctx.geometry(dump),
                                      ctx.jobs())) {
        out.stream() << b.image_id << ' ' << b.box.x0 << ' ' << b.box.y0 << ' ' << b.box.x1 << ' '
                     << b.box.y1 << '\n';
    }
    out.commit();
}

void cmd_export_heatmap(const Context& ctx)
{
    const Flags& f = ctx.flags;
    AtomicOutput out(f.out);
    const auto maps = read_maps(pick_path(f.maps, ctx.manifest.maps, "maps"));
    const auto it = std::find_if(maps.records.begin(), maps.records.end(),
                                 [&](const MapRecord& r) { return r.image_id == f.image_id; });
    if (it == maps.records.end()) {
        throw std::invalid_argument("no map for image id '" + f.image_id + "'");
    }
    out.write(encode_pgm(it->map));
    out.commit();
}

std::string one_line(std::string s)
{
    std::replace(s.begin(), s.end(), '\n', ' ');
    std::string quoted;
    for (char c : s) {
        if (c == '"' || c == '\\') {
            quoted += '\\';
        }
        quoted += c;
    }
    return '"' + quoted + '"';
}

void add_config_flags(CLI::App* cmd, Flags& f, std::initializer_list<std::string_view> which)
{
    auto has = [&](std::string_view name) {
        return std::find(which.begin(), which.end(), name) != which.end();
    };
    if (has("em")) {
        cmd->add_option("--sigma", f.sigma, "EM temperature (default 8)");
        cmd->add_option("--iters", f.iters, "EM iterations T; 0 disables re-activation (default 2)");
    }
    if (has("delta")) {
        cmd->add_option("--delta-frac", f.delta_frac, "CAM foreground threshold fraction (default 0.2)");
    }
    if (has("jobs")) {
        cmd->add_option("--jobs", f.jobs, "worker threads (default 1)");
    }
    if (has("geometry")) {
        cmd->add_option("--tau", f.tau, "box threshold on the normalized map (default 0.2)");
        cmd->add_option("--box-mode", f.box_mode, "largest_cc | union (default largest_cc)");
        cmd->add_option("--upsample", f.upsample, "nearest | bilinear (default nearest)");
        cmd->add_option("--image-size", f.image_size, "input resolution (default 224)");
        cmd->add_option("--stride", f.stride, "feature stride; image size = grid * stride");
    }
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    Flags f;
    CLI::App app{"Class re-activation maps for weakly supervised localization", "cream"};
    app.require_subcommand(1);
    app.fallthrough();
    app.add_option("--manifest", f.manifest, "JSON manifest with paths and config overrides");

    auto* synth = app.add_subcommand("synth", "generate a synthetic train/eval fixture suite");
    synth->add_option("--out-dir", f.out, "output directory")->required();
    synth->add_option("--per-class", f.per_class, "eval images per class");
    synth->add_option("--train-per-class", f.train_per_class, "train images per class");
    synth->add_option("--classes", f.classes, "number of classes");
    synth->add_option("--dim", f.dim, "feature channels");
    synth->add_option("--size", f.size, "feature grid side");
    synth->add_option("--noise", f.noise, "noise as a fraction of prototype separation");
    synth->add_option("--part-fraction", f.part_fraction, "discriminative part fraction");
    synth->add_option("--shape", f.shape, "rectangle | ellipse | mixed");
    synth->add_option("--seed", f.seed, "fixture seed");
    synth->add_option("--stride", f.stride, "feature stride for image coordinates");
    synth->add_option("--top-k", f.top_k, "ranked predictions stored per record");

    auto* embed = app.add_subcommand("embed-learn", "learn context embeddings from a training dump");
    embed->add_option("--dump", f.dump, "training feature dump");
    embed->add_option("--head", f.head, "classifier head");
    embed->add_option("--out", f.out, "output store")->required();
    embed->add_option("--lambda", f.lambda, "momentum coefficient (default 0.8)");
    embed->add_option("--seed", f.seed, "embedding initialization seed");
    embed->add_option("--epochs", f.epochs, "passes over the dump (default 1)");
    add_config_flags(embed, f, {"delta"});

    auto* react = app.add_subcommand("reactivate", "write re-activation maps for every record");
    react->add_option("--dump", f.dump, "feature dump");
    react->add_option("--head", f.head, "classifier head");
    react->add_option("--store", f.store, "context store");
    react->add_option("--out", f.out, "output map set")->required();
    react->add_option("--class-policy", f.class_policy, "gt | top1 (default gt)");
    add_config_flags(react, f, {"em", "delta", "jobs"});

    auto* eval = app.add_subcommand("eval", "evaluate a map set against dump annotations");
    eval->add_option("--maps", f.maps, "map set");
    eval->add_option("--dump", f.dump, "annotated feature dump");
    eval->add_option("--out", f.out, "report path")->required();
    eval->add_option("--curve", f.curve, "optional BoxAcc-over-tau curve path");
    eval->add_option("--curve-delta", f.curve_delta, "IoU level of the curve (default 0.5)");
    eval->add_option("--tau-grid", f.tau_grid, "start:stop:step or comma list (default 0:1:0.01)");
    add_config_flags(eval, f, {"geometry"});

    auto* boxes = app.add_subcommand("pseudo-boxes", "one box per training image for regressor training");
    boxes->add_option("--dump", f.dump, "training feature dump");
    boxes->add_option("--head", f.head, "classifier head");
    boxes->add_option("--store", f.store, "context store");
    boxes->add_option("--out", f.out, "output text file")->required();
    add_config_flags(boxes, f, {"em", "delta", "jobs", "geometry"});

    auto* heat = app.add_subcommand("export-heatmap", "render one map as an 8-bit PGM");
    heat->add_option("--maps", f.maps, "map set");
    heat->add_option("--image-id", f.image_id, "record to render")->required();
    heat->add_option("--out", f.out, "output .pgm")->required();

    std::vector<std::string> argv_store{"cream"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& a : argv_store) {
        argv.push_back(a.c_str());
    }
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: kind=usage message=" << one_line(e.what()) << '\n';
        return 2;
    }

    try {
        Context ctx{f, f.manifest ? read_manifest(*f.manifest) : Manifest{}, out};
        if (synth->parsed()) {
            cmd_synth(ctx);
        } else if (embed->parsed()) {
            cmd_embed_learn(ctx);
        } else if (react->parsed()) {
            cmd_reactivate(ctx);
        } else if (eval->parsed()) {
            cmd_eval(ctx);
        } else if (boxes->parsed()) {
            cmd_pseudo_boxes(ctx);
        } else if (heat->parsed()) {
            cmd_export_heatmap(ctx);
        }
        return 0;
    } catch (const UsageError& e) {
        err << "error: kind=usage message=" << one_line(e.what()) << '\n';
        return 2;
    } catch (const FormatError& e) {
        err << "error: kind=format code=" << to_string(e.kind()) << " offset=" << e.offset()
            << " record=" << e.record() << " message=" << one_line(e.what()) << '\n';
        return 1;
    } catch (const std::invalid_argument& e) {
        err << "error: kind=invalid_argument message=" << one_line(e.what()) << '\n';
        return 1;
    } catch (const std::exception& e) {
        err << "error: kind=runtime message=" << one_line(e.what()) << '\n';
        return 1;
    }
}

} // namespace cream
