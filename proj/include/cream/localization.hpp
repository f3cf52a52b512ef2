#pragma once

#include "cream/maps.hpp"

#include <optional>
#include <string_view>
#include <vector>

namespace cream {

/// Half-open pixel box [x0, x1) x [y0, y1); x is the column, y the row.
struct BoundingBox {
    int x0 = 0;
    int y0 = 0;
    int x1 = 0;
    int y1 = 0;

    long long area() const { return static_cast<long long>(x1 - x0) * (y1 - y0); }
    bool valid() const { return x0 < x1 && y0 < y1; }

    friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

/// Row-major pixel indices of one 8-connected component, ascending.
using Component = std::vector<std::size_t>;

/// 8-connected components of the set pixels, ordered by their first pixel
/// in row-major order.
std::vector<Component> connected_components(const BinaryMask& mask);

/// Tight box around a set of row-major pixel indices of a width-w grid.
BoundingBox component_box(const Component& component, int width);

enum class BoxMode { largest_cc, union_all };

BoxMode parse_box_mode(std::string_view name);
std::string_view to_string(BoxMode mode);

/// Thresholds the normalized map at >= tau and boxes the largest
/// component (ties to the earliest) or, in union mode, all set pixels.
std::optional<BoundingBox> extract_box(const ActivationMap& map, double tau,
                                       BoxMode mode = BoxMode::largest_cc);

double iou(const BoundingBox& a, const BoundingBox& b);

/// Maps a box from a from_h x from_w grid to a to_h x to_w grid so that it
/// covers exactly the pixels a nearest-neighbour upsampling assigns to
/// the source box.
BoundingBox scale_box(const BoundingBox& box, int from_h, int from_w, int to_h, int to_w);

} // namespace cream
