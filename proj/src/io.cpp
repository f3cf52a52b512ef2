#include "cream/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <iterator>

namespace cream {

namespace {

constexpr std::uint32_t kHasBoxes = 1u << 0;
constexpr std::uint32_t kHasMask = 1u << 1;
constexpr std::uint32_t kHasPredictions = 1u << 2;
constexpr std::uint32_t kKnownFlags = kHasBoxes | kHasMask | kHasPredictions;

class ByteWriter {
public:
    void magic(std::string_view m) { bytes_.insert(bytes_.end(), m.begin(), m.end()); }

    void u32(std::uint32_t v)
    {
        for (int b = 0; b < 4; ++b) {
            bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
        }
    }

    void u64(std::uint64_t v)
    {
        for (int b = 0; b < 8; ++b) {
            bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
        }
    }

    void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

    void text(std::string_view s)
    {
        u32(static_cast<std::uint32_t>(s.size()));
        bytes_.insert(bytes_.end(), s.begin(), s.end());
    }

    std::vector<std::uint8_t> take() { return std::move(bytes_); }

private:
    std::vector<std::uint8_t> bytes_;
};

class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    void set_record(long record) { record_ = record; }
    long record() const { return record_; }
    std::size_t offset() const { return pos_; }
    bool done() const { return pos_ == bytes_.size(); }

    [[noreturn]] void fail(FormatErrorKind kind, const std::string& detail, std::size_t at) const
    {
        throw FormatError(kind, at, record_, detail);
    }

    void magic(std::string_view expected)
    {
        const std::size_t at = pos_;
        need(expected.size(), "magic");
        if (std::memcmp(bytes_.data() + pos_, expected.data(), expected.size()) != 0) {
            fail(FormatErrorKind::bad_magic, "expected magic '" + std::string(expected) + "'", at);
        }
        pos_ += expected.size();
    }

    void version()
    {
        const std::size_t at = pos_;
        const std::uint32_t v = u32("version");
        if (v != kFormatVersion) {
            fail(FormatErrorKind::bad_version, "unsupported version " + std::to_string(v), at);
        }
    }

    std::uint32_t u32(const char* what)
    {
        need(4, what);
        std::uint32_t v = 0;
        for (int b = 0; b < 4; ++b) {
            v |= static_cast<std::uint32_t>(bytes_[pos_ + b]) << (8 * b);
        }
        pos_ += 4;
        return v;
    }

    std::uint64_t u64(const char* what)
    {
        need(8, what);
        std::uint64_t v = 0;
        for (int b = 0; b < 8; ++b) {
            v |= static_cast<std::uint64_t>(bytes_[pos_ + b]) << (8 * b);
        }
        pos_ += 8;
        return v;
    }

    std::int32_t i32(const char* what) { return static_cast<std::int32_t>(u32(what)); }
    float f32(const char* what) { return std::bit_cast<float>(u32(what)); }

    /// A positive count no larger than limit.
    int extent(const char* what, std::uint32_t limit = 1u << 20)
    {
        const std::size_t at = pos_;
        const std::uint32_t v = u32(what);
        if (v == 0 || v > limit) {
            fail(FormatErrorKind::invalid_record,
                 std::string(what) + " out of range: " + std::to_string(v), at);
        }
        return static_cast<int>(v);
    }

    std::string text(const char* what)
    {
        const std::uint32_t n = u32(what);
        need(n, what);
        std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
        pos_ += n;
        return s;
    }

    std::vector<float> f32_array(std::size_t n, const char* what)
    {
        if (n > (bytes_.size() - pos_) / 4) {
            need(n * 4, what);
        }
        std::vector<float> out(n);
        for (auto& v : out) {
            v = f32(what);
        }
        return out;
    }

private:
    void need(std::size_t n, const char* what) const
    {
        if (bytes_.size() - pos_ < n) {
            fail(FormatErrorKind::truncated,
                 std::string("truncated while reading ") + what + " (need " + std::to_string(n) +
                     " bytes, " + std::to_string(bytes_.size() - pos_) + " left)",
                 pos_);
        }
    }

    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
    long record_ = -1;
};

// Runs of alternating values, starting with a (possibly empty) run of zeros.
std::vector<std::uint32_t> encode_runs(const BinaryMask& mask)
{
    std::vector<std::uint32_t> runs;
    std::uint8_t current = 0;
    std::uint32_t length = 0;
    for (std::uint8_t v : mask.values()) {
        if (v != current) {
            runs.push_back(length);
            current = v;
            length = 0;
        }
        ++length;
    }
    runs.push_back(length);
    return runs;
}

BinaryMask decode_mask(ByteReader& in)
{
    const int h = in.extent("mask height");
    const int w = in.extent("mask width");
    const std::size_t runs_at = in.offset();
    const std::uint32_t runs = in.u32("mask run count");
    const std::size_t total = static_cast<std::size_t>(h) * w;
    if (runs > total + 1) {
        in.fail(FormatErrorKind::invalid_record, "mask run count exceeds pixel count", runs_at);
    }
    std::vector<std::uint8_t> values;
    values.reserve(total);
    std::uint8_t current = 0;
    for (std::uint32_t r = 0; r < runs; ++r) {
        const std::size_t at = in.offset();
        const std::uint32_t length = in.u32("mask run");
        if (length > total - values.size()) {
            in.fail(FormatErrorKind::invalid_record, "mask runs overflow the mask", at);
        }
        values.insert(values.end(), length, current);
        current ^= 1;
    }
    if (values.size() != total) {
        in.fail(FormatErrorKind::invalid_record, "mask runs do not cover the mask", in.offset());
    }
    return BinaryMask(h, w, std::move(values));
}

template <typename Decode>
auto decode_with_context(std::span<const std::uint8_t> bytes, Decode&& decode)
{
    ByteReader in(bytes);
    try {
        auto result = decode(in);
        if (!in.done()) {
            in.fail(FormatErrorKind::invalid_record, "trailing bytes after last record", in.offset());
        }
        return result;
    } catch (const std::invalid_argument& e) {
        // Value-level validation (non-finite floats, bad extents) from the
        // domain types.
        throw FormatError(FormatErrorKind::invalid_record, in.offset(), in.record(), e.what());
    }
}

} // namespace

std::string_view to_string(FormatErrorKind kind)
{
    switch (kind) {
    case FormatErrorKind::bad_magic:
        return "bad_magic";
    case FormatErrorKind::bad_version:
        return "bad_version";
    case FormatErrorKind::truncated:
        return "truncated";
    case FormatErrorKind::label_overflow:
        return "label_overflow";
    case FormatErrorKind::invalid_record:
        return "invalid_record";
    case FormatErrorKind::io:
        return "io";
    }
    return "unknown";
}

FormatError::FormatError(FormatErrorKind kind, std::size_t offset, long record,
                         const std::string& detail)
    : std::runtime_error(std::string(to_string(kind)) + " at byte " + std::to_string(offset) +
                         (record >= 0 ? " in record " + std::to_string(record) : std::string{}) +
                         ": " + detail),
      kind_(kind), offset_(offset), record_(record)
{
}

std::vector<std::uint8_t> encode_dump(const FeatureDump& dump)
{
    ByteWriter out;
    out.magic("CRMF");
    out.u32(kFormatVersion);
    out.u32(static_cast<std::uint32_t>(dump.num_classes));
    out.u32(static_cast<std::uint32_t>(dump.channels));
    out.u32(static_cast<std::uint32_t>(dump.height));
    out.u32(static_cast<std::uint32_t>(dump.width));
    out.u32(static_cast<std::uint32_t>(dump.records.size()));
    for (const auto& r : dump.records) {
        if (r.features.channels() != dump.channels || r.features.height() != dump.height ||
            r.features.width() != dump.width) {
            throw std::invalid_argument("record '" + r.image_id +
                                        "' does not match the dump's feature shape");
        }
        if (r.label >= static_cast<std::uint32_t>(dump.num_classes)) {
            throw std::invalid_argument("record '" + r.image_id + "' has label outside [0, C)");
        }
        out.text(r.image_id);
        out.u32(r.label);
        for (float v : r.features.values()) {
            out.f32(v);
        }
        const std::uint32_t flags = (r.boxes ? kHasBoxes : 0) | (r.mask ? kHasMask : 0) |
                                    (r.predictions ? kHasPredictions : 0);
        out.u32(flags);
        if (r.boxes) {
            out.u32(static_cast<std::uint32_t>(r.boxes->size()));
            for (const auto& b : *r.boxes) {
                out.i32(b.x0);
                out.i32(b.y0);
                out.i32(b.x1);
                out.i32(b.y1);
            }
        }
        if (r.mask) {
            out.u32(static_cast<std::uint32_t>(r.mask->height()));
            out.u32(static_cast<std::uint32_t>(r.mask->width()));
            const auto runs = encode_runs(*r.mask);
            out.u32(static_cast<std::uint32_t>(runs.size()));
            for (auto run : runs) {
                out.u32(run);
            }
        }
        if (r.predictions) {
            out.u32(static_cast<std::uint32_t>(r.predictions->size()));
            for (auto c : *r.predictions) {
                out.u32(c);
            }
        }
    }
    return out.take();
}

FeatureDump decode_dump(std::span<const std::uint8_t> bytes)
{
    return decode_with_context(bytes, [](ByteReader& in) {
        in.magic("CRMF");
        in.version();
        FeatureDump dump;
        dump.num_classes = in.extent("class count");
        dump.channels = in.extent("channel count");
        dump.height = in.extent("height");
        dump.width = in.extent("width");
        const std::uint32_t count = in.u32("record count");
        const std::size_t values = static_cast<std::size_t>(dump.channels) * dump.height * dump.width;
        for (std::uint32_t n = 0; n < count; ++n) {
            in.set_record(static_cast<long>(n));
            DumpRecord r;
            r.image_id = in.text("image id");
            const std::size_t label_at = in.offset();
            r.label = in.u32("label");
            if (r.label >= static_cast<std::uint32_t>(dump.num_classes)) {
                in.fail(FormatErrorKind::label_overflow,
                        "label " + std::to_string(r.label) + " >= class count " +
                            std::to_string(dump.num_classes),
                        label_at);
            }
            r.features = FeatureMap(dump.channels, dump.height, dump.width,
                                    in.f32_array(values, "features"));
            const std::size_t flags_at = in.offset();
            const std::uint32_t flags = in.u32("flags");
            if ((flags & ~kKnownFlags) != 0) {
                in.fail(FormatErrorKind::invalid_record, "unknown flag bits", flags_at);
            }
            if (flags & kHasBoxes) {
                const std::uint32_t n_boxes = in.u32("box count");
                std::vector<BoundingBox> boxes;
                for (std::uint32_t b = 0; b < n_boxes; ++b) {
                    const std::size_t at = in.offset();
                    BoundingBox box;
                    box.x0 = in.i32("box");
                    box.y0 = in.i32("box");
                    box.x1 = in.i32("box");
                    box.y1 = in.i32("box");
                    if (!box.valid()) {
                        in.fail(FormatErrorKind::invalid_record, "degenerate ground-truth box", at);
                    }
                    boxes.push_back(box);
                }
                r.boxes = std::move(boxes);
            }
            if (flags & kHasMask) {
                r.mask = decode_mask(in);
            }
            if (flags & kHasPredictions) {
                const std::uint32_t k = in.u32("prediction count");
                std::vector<std::uint32_t> ranked;
                for (std::uint32_t i = 0; i < k; ++i) {
                    const std::size_t at = in.offset();
                    const std::uint32_t c = in.u32("prediction");
                    if (c >= static_cast<std::uint32_t>(dump.num_classes)) {
                        in.fail(FormatErrorKind::label_overflow, "predicted class out of range", at);
                    }
                    ranked.push_back(c);
                }
                r.predictions = std::move(ranked);
            }
            dump.records.push_back(std::move(r));
        }
        in.set_record(-1);
        return dump;
    });
}

std::vector<std::uint8_t> encode_head(const ClassifierHead& head)
{
    ByteWriter out;
    out.magic("CRMH");
    out.u32(kFormatVersion);
    out.u32(static_cast<std::uint32_t>(head.num_classes()));
    out.u32(static_cast<std::uint32_t>(head.channels()));
    out.u32(head.bias() ? 1 : 0);
    for (float v : head.weights()) {
        out.f32(v);
    }
    if (head.bias()) {
        for (float v : *head.bias()) {
            out.f32(v);
        }
    }
    return out.take();
}

ClassifierHead decode_head(std::span<const std::uint8_t> bytes)
{
    return decode_with_context(bytes, [](ByteReader& in) {
        in.magic("CRMH");
        in.version();
        const int c = in.extent("class count");
        const int d = in.extent("channel count");
        const std::size_t flag_at = in.offset();
        const std::uint32_t has_bias = in.u32("bias flag");
        if (has_bias > 1) {
            in.fail(FormatErrorKind::invalid_record, "bias flag must be 0 or 1", flag_at);
        }
        auto weights = in.f32_array(static_cast<std::size_t>(c) * d, "weights");
        std::optional<std::vector<float>> bias;
        if (has_bias) {
            bias = in.f32_array(static_cast<std::size_t>(c), "bias");
        }
        return ClassifierHead(c, d, std::move(weights), std::move(bias));
    });
}

std::vector<std::uint8_t> encode_store(const ContextStore& store)
{
    ByteWriter out;
    out.magic("CRMS");
    out.u32(kFormatVersion);
    out.u32(static_cast<std::uint32_t>(store.num_classes()));
    out.u32(static_cast<std::uint32_t>(store.dim()));
    out.f32(store.lambda());
    out.u64(store.seed());
    for (float v : store.fg()) {
        out.f32(v);
    }
    for (float v : store.bg()) {
        out.f32(v);
    }
    return out.take();
}

ContextStore decode_store(std::span<const std::uint8_t> bytes)
{
    return decode_with_context(bytes, [](ByteReader& in) {
        in.magic("CRMS");
        in.version();
        const int c = in.extent("class count");
        const int d = in.extent("embedding dim");
        const float lambda = in.f32("lambda");
        const std::uint64_t seed = in.u64("seed");
        const auto n = static_cast<std::size_t>(c) * d;
        auto fg = in.f32_array(n, "foreground embeddings");
        auto bg = in.f32_array(n, "background embeddings");
        return ContextStore(c, d, lambda, seed, std::move(fg), std::move(bg));
    });
}

ClassPolicy parse_class_policy(std::string_view name)
{
    if (name == "gt") {
        return ClassPolicy::gt;
    }
    if (name == "top1") {
        return ClassPolicy::top1;
    }
    throw std::invalid_argument("unknown class policy '" + std::string(name) +
                                "' (expected gt or top1)");
}

std::string_view to_string(ClassPolicy policy)
{
    return policy == ClassPolicy::gt ? "gt" : "top1";
}

std::vector<std::uint8_t> encode_maps(const MapSet& maps)
{
    ByteWriter out;
    out.magic("CRMM");
    out.u32(kFormatVersion);
    out.u32(maps.policy == ClassPolicy::gt ? 0 : 1);
    out.u32(static_cast<std::uint32_t>(maps.records.size()));
    for (const auto& r : maps.records) {
        out.text(r.image_id);
        out.u32(static_cast<std::uint32_t>(r.class_index));
        out.u32(static_cast<std::uint32_t>(r.map.height()));
        out.u32(static_cast<std::uint32_t>(r.map.width()));
        for (double v : r.map.values()) {
            out.f32(static_cast<float>(v));
        }
    }
    return out.take();
}

MapSet decode_maps(std::span<const std::uint8_t> bytes)
{
    return decode_with_context(bytes, [](ByteReader& in) {
        in.magic("CRMM");
        in.version();
        MapSet maps;
        const std::size_t policy_at = in.offset();
        const std::uint32_t policy = in.u32("class policy");
        if (policy > 1) {
            in.fail(FormatErrorKind::invalid_record, "unknown class policy", policy_at);
        }
        maps.policy = policy == 0 ? ClassPolicy::gt : ClassPolicy::top1;
        const std::uint32_t count = in.u32("record count");
        for (std::uint32_t n = 0; n < count; ++n) {
            in.set_record(static_cast<long>(n));
            MapRecord r;
            r.image_id = in.text("image id");
            r.class_index = static_cast<int>(in.u32("class"));
            const int h = in.extent("map height");
            const int w = in.extent("map width");
            const auto raw = in.f32_array(static_cast<std::size_t>(h) * w, "map values");
            r.map = ActivationMap(h, w, std::vector<double>(raw.begin(), raw.end()));
            maps.records.push_back(std::move(r));
        }
        in.set_record(-1);
        return maps;
    });
}

std::vector<std::uint8_t> encode_pgm(const ActivationMap& map)
{
    const std::string header =
        "P5\n" + std::to_string(map.width()) + " " + std::to_string(map.height()) + "\n255\n";
    std::vector<std::uint8_t> bytes(header.begin(), header.end());
    for (double v : map.values()) {
        bytes.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
    }
    return bytes;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw FormatError(FormatErrorKind::io, 0, -1, "cannot open '" + path.string() + "'");
    }
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in),
                                     std::istreambuf_iterator<char>());
}

AtomicOutput::AtomicOutput(std::filesystem::path path)
    : path_(std::move(path)), partial_(path_.string() + ".partial"),
      out_(partial_, std::ios::binary | std::ios::trunc)
{
    if (!out_) {
        throw FormatError(FormatErrorKind::io, 0, -1, "cannot write '" + partial_.string() + "'");
    }
}

AtomicOutput::~AtomicOutput()
{
    if (!committed_) {
        out_.close();
        std::error_code ec;
        std::filesystem::remove(partial_, ec);
    }
}

void AtomicOutput::write(std::span<const std::uint8_t> bytes)
{
    out_.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

void AtomicOutput::commit()
{
    out_.close();
    if (!out_) {
        throw FormatError(FormatErrorKind::io, 0, -1, "failed writing '" + partial_.string() + "'");
    }
    std::filesystem::rename(partial_, path_);
    committed_ = true;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes)
{
    AtomicOutput out(path);
    out.write(bytes);
    out.commit();
}

void write_dump(const std::filesystem::path& path, const FeatureDump& dump)
{
    write_file(path, encode_dump(dump));
}

FeatureDump read_dump(const std::filesystem::path& path) { return decode_dump(read_file(path)); }

void write_head(const std::filesystem::path& path, const ClassifierHead& head)
{
    write_file(path, encode_head(head));
}

ClassifierHead read_head(const std::filesystem::path& path) { return decode_head(read_file(path)); }

void write_store(const std::filesystem::path& path, const ContextStore& store)
{
    write_file(path, encode_store(store));
}

ContextStore read_store(const std::filesystem::path& path) { return decode_store(read_file(path)); }

void write_maps(const std::filesystem::path& path, const MapSet& maps)
{
    write_file(path, encode_maps(maps));
}

MapSet read_maps(const std::filesystem::path& path) { return decode_maps(read_file(path)); }

} // namespace cream
