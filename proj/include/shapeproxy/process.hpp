#pragma once

#include <cstdint>

#include "shapeproxy/frame.hpp"
#include "shapeproxy/image.hpp"
#include "shapeproxy/proxy.hpp"

namespace shapeproxy {

/// Per-pixel proxy ownership for one frame: proxy id, or 0 for no proxy.
using InlierMarks = Image<std::uint32_t>;

struct FilterParams {
    NoiseModel noise;
    bool cross_bilateral = false;  // optional pass guided by proxy ids
    double cross_sigma = 1.5;       // pixels
};

/// Replaces each marked pixel by its proxy-based estimate:
/// unimodal flat cells snap to the shape along the camera ray, unimodal offset
/// cells land at the shape plus d_c along the normal, multimodal cells and
/// unmarked pixels are left untouched.
RgbdFrame filter_frame(const RgbdFrame& frame, const SceneState& state, const InlierMarks& marks,
                       const FilterParams& params = {});

/// Smoothing restricted to pixels of the same proxy. Pixels without a proxy are untouched.
RgbdFrame cross_bilateral(const RgbdFrame& frame, const InlierMarks& marks, double spatial_sigma);

struct HoleFillParams {
    bool extrapolate = true;
    double min_dihedral = 1.0471975511965976;  // 60 deg
    double max_dihedral = 2.0943951023931953;  // 120 deg
    double max_gap = 1.0;                      // meters
    int closing_size = 7;                      // cells, odd
};

struct HoleFillReport {
    std::size_t extrapolated = 0;
    std::size_t closed = 0;
};

/// Marks cells as filled: extrapolation toward plane-plane intersections,
/// then a square binary closing of every activation mask.
HoleFillReport fill_holes(SceneState& state, const HoleFillParams& params = {});

/// Binary closing (dilate then erode) of a mask with a size x size square.
/// Cells outside the image count as empty; with `wrap_cols` the columns are periodic.
Image<std::uint8_t> binary_closing(const Image<std::uint8_t>& mask, int size, bool wrap_cols = false);

/// density^2 points per emitting cell, displaced by d_c for unimodal cells.
/// Positions and normals are in world space.
OrientedPointCloud resample(const SceneState& state, int density);

}  // namespace shapeproxy
