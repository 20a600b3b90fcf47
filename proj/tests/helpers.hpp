#pragma once

#include <random>

#include "shapeproxy/frame.hpp"
#include "shapeproxy/proxy.hpp"
#include "shapeproxy/stats.hpp"

namespace testing_helpers {

using namespace shapeproxy;

inline CameraIntrinsics small_camera(int w = 80, int h = 60) {
    CameraIntrinsics k;
    k.res_h = w;
    k.res_v = h;
    return k;
}

inline RgbdFrame constant_frame(double z, const CameraIntrinsics& k = {}, const CameraPose& pose = {}) {
    RgbdFrame f(k, pose);
    for (auto& d : f.depth.pixels()) d = z;
    for (auto& c : f.color.pixels()) c = Rgb{100, 150, 200};
    return f;
}

/// Cell with `visits` accepted samples at distance d and an activated window.
inline Cell flat_cell(int side, double d = 0.0, bool active = true, int samples = 30) {
    Cell c;
    c.colors = ColorGrid(side);
    for (int i = 0; i < samples; ++i) c.hist.insert(d, 0.003);
    c.hist.update_modes();
    if (active)
        for (int i = 0; i < 25; ++i) c.visit.push(true);
    return c;
}

/// Plane proxy with a rectangle of activated cells [i0, i1] x [j0, j1].
inline Proxy plane_proxy(std::uint32_t id, const ShapeModel& shape, int i0, int i1, int j0, int j1,
                         double d = 0.0) {
    Proxy p;
    p.id = id;
    p.shape = shape;
    p.spec = GridSpec::for_shape(shape);
    for (int j = j0; j <= j1; ++j)
        for (int i = i0; i <= i1; ++i) {
            p.spec.include({i, j});
            p.cells[{i, j}] = flat_cell(p.spec.color_side(), d);
        }
    return p;
}

/// Proxy of any kind with every cell of its fixed domain activated.
inline Proxy full_proxy(std::uint32_t id, const ShapeModel& shape, double v_min = 0.0, double v_max = 0.0) {
    Proxy p;
    p.id = id;
    p.shape = shape;
    p.spec = GridSpec::for_shape(shape);
    if (shape.kind == ShapeKind::Cylinder) {
        p.spec.v_min = v_min;
        p.spec.v_max = v_max;
    }
    for (int j = p.spec.j_lo(); j <= p.spec.j_hi(); ++j)
        for (int i = p.spec.i_lo(); i <= p.spec.i_hi(); ++i) p.cells[{i, j}] = flat_cell(p.spec.color_side());
    return p;
}

}  // namespace testing_helpers
