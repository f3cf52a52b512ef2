#pragma once

// Binary interchange formats. All multi-byte integers are little-endian,
// all reals are IEEE-754 binary32.
//
// Feature dump ("CRMF"):
//   magic "CRMF" | version u32 | C u32 | d u32 | h u32 | w u32 | count u32
//   count x record:
//     id_len u32 | id bytes (UTF-8) | label u32 | features d*h*w f32 (channel-major)
//     flags u32 (bit0 boxes, bit1 mask, bit2 predictions)
//     [boxes]       n u32 | n x (x0 y0 x1 y1 as i32), image coordinates
//     [mask]        mask_h u32 | mask_w u32 | runs u32 | runs x u32
//                   (row-major run lengths alternating 0,1,0,... starting with 0)
//     [predictions] k u32 | k x u32 (ranked class indices)
//
// Classifier head ("CRMH"):
//   magic | version u32 | C u32 | d u32 | has_bias u32 | weights C*d f32 | [bias C f32]
//
// Context store ("CRMS"):
//   magic | version u32 | C u32 | d u32 | lambda f32 | seed u64 | fg C*d f32 | bg C*d f32
//
// Map set ("CRMM"), the output of re-activation:
//   magic | version u32 | policy u32 (0 gt, 1 top1) | count u32
//   count x record: id_len u32 | id | class u32 | h u32 | w u32 | h*w f32

#include "cream/cam.hpp"
#include "cream/context.hpp"
#include "cream/localization.hpp"
#include "cream/maps.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cream {

enum class FormatErrorKind { bad_magic, bad_version, truncated, label_overflow, invalid_record, io };

std::string_view to_string(FormatErrorKind kind);

/// Malformed or unreadable interchange file. offset is the byte position
/// of the failing field; record is the 0-based record index, or -1 for
/// the header.
class FormatError : public std::runtime_error {
public:
    FormatError(FormatErrorKind kind, std::size_t offset, long record, const std::string& detail);

    FormatErrorKind kind() const { return kind_; }
    std::size_t offset() const { return offset_; }
    long record() const { return record_; }

private:
    FormatErrorKind kind_;
    std::size_t offset_;
    long record_;
};

inline constexpr std::uint32_t kFormatVersion = 1;

struct DumpRecord {
    std::string image_id;
    std::uint32_t label = 0;
    FeatureMap features;
    std::optional<std::vector<BoundingBox>> boxes;
    std::optional<BinaryMask> mask;
    std::optional<std::vector<std::uint32_t>> predictions;

    friend bool operator==(const DumpRecord&, const DumpRecord&) = default;
};

struct FeatureDump {
    int num_classes = 0;
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<DumpRecord> records;

    friend bool operator==(const FeatureDump&, const FeatureDump&) = default;
};

std::vector<std::uint8_t> encode_dump(const FeatureDump& dump);
FeatureDump decode_dump(std::span<const std::uint8_t> bytes);
void write_dump(const std::filesystem::path& path, const FeatureDump& dump);
FeatureDump read_dump(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_head(const ClassifierHead& head);
ClassifierHead decode_head(std::span<const std::uint8_t> bytes);
void write_head(const std::filesystem::path& path, const ClassifierHead& head);
ClassifierHead read_head(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_store(const ContextStore& store);
ContextStore decode_store(std::span<const std::uint8_t> bytes);
void write_store(const std::filesystem::path& path, const ContextStore& store);
ContextStore read_store(const std::filesystem::path& path);

enum class ClassPolicy { gt, top1 };

ClassPolicy parse_class_policy(std::string_view name);
std::string_view to_string(ClassPolicy policy);

struct MapRecord {
    std::string image_id;
    int class_index = 0;
    ActivationMap map;
};

struct MapSet {
    ClassPolicy policy = ClassPolicy::gt;
    std::vector<MapRecord> records;
};

std::vector<std::uint8_t> encode_maps(const MapSet& maps);
MapSet decode_maps(std::span<const std::uint8_t> bytes);
void write_maps(const std::filesystem::path& path, const MapSet& maps);
MapSet read_maps(const std::filesystem::path& path);

/// 8-bit binary PGM of a [0, 1] map (values clamped, rounded to 0..255).
std::vector<std::uint8_t> encode_pgm(const ActivationMap& map);

/// Reads a whole file; throws FormatError(io) if it cannot be opened.
std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

/// Writes to "<path>.partial" and renames onto path on commit(). An
/// uncommitted file is removed on destruction, so failed runs leave no
/// partial outputs behind.
class AtomicOutput {
public:
    explicit AtomicOutput(std::filesystem::path path);
    AtomicOutput(const AtomicOutput&) = delete;
    AtomicOutput& operator=(const AtomicOutput&) = delete;
    ~AtomicOutput();

    std::ostream& stream() { return out_; }
    void write(std::span<const std::uint8_t> bytes);
    void commit();

private:
    std::filesystem::path path_;
    std::filesystem::path partial_;
    std::ofstream out_;
    bool committed_ = false;
};

/// Writes bytes to path through an AtomicOutput.
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

} // namespace cream
