#include "shapeproxy/process.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <unordered_map>

namespace shapeproxy {

namespace {

std::unordered_map<std::uint32_t, const Proxy*> index_by_id(const SceneState& state) {
    std::unordered_map<std::uint32_t, const Proxy*> out;
    for (const auto& p : state.proxies) out[p.id] = &p;
    return out;
}

const Cell* find_cell(const Proxy& proxy, const CellKey& key) {
    auto it = proxy.cells.find(key);
    return it == proxy.cells.end() ? nullptr : &it->second;
}

bool is_emitting(const Proxy& proxy, const CellKey& key) {
    const Cell* c = find_cell(proxy, key);
    return c && c->emitting();
}

Cell& filled_cell(Proxy& proxy, const CellKey& key) {
    proxy.spec.include(key);
    auto [it, inserted] = proxy.cells.try_emplace(key);
    if (inserted) it->second.colors = ColorGrid(proxy.spec.color_side());
    it->second.filled = true;
    return it->second;
}

/// Fills the inactive cells of `a` between its activated region and the line
/// where it meets `b`. Returns the number of newly filled cells.
std::size_t extrapolate_towards(Proxy& a, const Proxy& b, const HoleFillParams& params) {
    const Vec3 na = a.shape.axis();
    const Vec3 nb = b.shape.axis();
    const double angle = std::acos(std::clamp(na.dot(nb), -1.0, 1.0));
    if (angle < params.min_dihedral || angle > params.max_dihedral) return 0;
    const Vec3 line = na.cross(nb);
    const double l2 = line.squaredNorm();
    if (l2 < 1e-12) return 0;
    const double da = na.dot(a.shape.origin);
    const double db = nb.dot(b.shape.origin);
    const Vec3 p0 = (da * nb.cross(line) + db * line.cross(na)) / l2;
    const Vec3 dir3 = line / std::sqrt(l2);

    const Vec2 q0 = parameterize(a.shape, p0);
    const Vec2 dir(dir3.dot(a.shape.axis_x), dir3.dot(a.shape.axis_y));
    const Vec2 across(-dir.y(), dir.x());
    const double w = a.spec.cell_size;

    auto b_supports = [&](const Vec3& p) {
        const Vec2 uv = parameterize(b.shape, p);
        const CellKey k = b.spec.cell_of(uv.x(), uv.y());
        for (int dj = -1; dj <= 1; ++dj)
            for (int di = -1; di <= 1; ++di)
                if (is_emitting(b, {k.i + di, k.j + dj})) return true;
        return false;
    };

    std::vector<CellKey> seeds;
    for (const auto& [key, cell] : a.cells)
        if (cell.visit.activated()) seeds.push_back(key);
    std::sort(seeds.begin(), seeds.end());

    std::vector<CellKey> to_fill;
    for (const auto& key : seeds) {
        const Vec2 c = a.spec.cell_center(key);
        const double s = (c - q0).dot(across);
        if (std::abs(s) > params.max_gap) continue;
        const Vec2 foot = c - s * across;
        if (!b_supports(unparameterize(a.shape, foot.x(), foot.y()).point)) continue;
        const double step = 0.5 * w;
        const double sign = s > 0.0 ? 1.0 : -1.0;
        // Stop just short of the line so cells beyond it are never touched.
        const double reach = std::abs(s) - 1e-9;
        for (double t = step; t - step < reach; t += step) {
            const Vec2 x = c - sign * std::min(t, reach) * across;
            const CellKey k = a.spec.cell_of(x.x(), x.y());
            if (!is_emitting(a, k)) to_fill.push_back(k);
        }
    }
    std::sort(to_fill.begin(), to_fill.end());
    to_fill.erase(std::unique(to_fill.begin(), to_fill.end()), to_fill.end());
    std::size_t added = 0;
    for (const auto& k : to_fill) {
        if (is_emitting(a, k)) continue;
        filled_cell(a, k);
        ++added;
    }
    return added;
}

std::size_t close_proxy(Proxy& proxy, int size) {
    const GridSpec& spec = proxy.spec;
    if (spec.u_max <= spec.u_min || spec.v_max <= spec.v_min) return 0;
    const bool periodic = spec.u_period > 0.0;
    const int pad = size;
    const int pad_u = periodic ? 0 : pad;
    const int i0 = spec.i_lo() - pad_u;
    const int j0 = spec.j_lo() - pad;
    const int cols = spec.columns() + 2 * pad_u;
    const int rows = spec.rows() + 2 * pad;
    Image<std::uint8_t> mask(cols, rows, 0);
    for (const auto& [key, cell] : proxy.cells) {
        if (!cell.emitting()) continue;
        const int c = key.i - i0;
        const int r = key.j - j0;
        if (mask.contains(r, c)) mask(r, c) = 1;
    }
    const Image<std::uint8_t> closed = binary_closing(mask, size, periodic);
    std::size_t added = 0;
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            if (!closed(r, c) || mask(r, c)) continue;
            const CellKey key{c + i0, r + j0};
            if ((spec.fixed_u || spec.fixed_v) && !spec.contains(key)) continue;
            filled_cell(proxy, key);
            ++added;
        }
    }
    return added;
}

}  // namespace

RgbdFrame filter_frame(const RgbdFrame& frame, const SceneState& state, const InlierMarks& marks,
                       const FilterParams& params) {
    if (marks.width() != frame.depth.width() || marks.height() != frame.depth.height())
        throw std::invalid_argument("filter_frame: marks do not match the frame size");
    RgbdFrame out = frame;
    const auto proxies = index_by_id(state);
    const Vec3 cam = frame.pose.origin();
    const int rows = frame.depth.height();
    const int cols = frame.depth.width();

#pragma omp parallel for schedule(static)
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            const std::uint32_t id = marks(r, c);
            if (id == 0) continue;
            const double z = frame.depth(r, c);
            if (!(z > 0.0)) continue;
            auto it = proxies.find(id);
            if (it == proxies.end()) continue;
            const Proxy& proxy = *it->second;
            const Vec3 pw = frame.pose.to_world(frame.intrinsics.unproject(r, c, z));
            const auto q = project_along_ray(proxy.shape, cam, pw);
            if (!q) continue;
            if (proxy.shape.kind == ShapeKind::Sphere && (*q - proxy.shape.origin).norm() == 0.0) continue;
            const Vec2 uv = parameterize(proxy.shape, *q);
            const Cell* cell = find_cell(proxy, proxy.spec.cell_of(uv.x(), uv.y()));
            if (!cell || cell->modes() != 1) continue;
            const double d = cell->distance();
            Vec3 pf = *q;
            if (std::abs(d) > params.noise.sigma(z)) pf += d * proxy.shape.normal_at(*q);
            const double zf = frame.pose.to_camera(pf).z();
            if (zf > 0.0) out.depth(r, c) = zf;
        }
    }
    if (params.cross_bilateral) out = cross_bilateral(out, marks, params.cross_sigma);
    return out;
}

RgbdFrame cross_bilateral(const RgbdFrame& frame, const InlierMarks& marks, double spatial_sigma) {
    if (!(spatial_sigma > 0.0)) throw std::invalid_argument("spatial_sigma must be positive");
    const int radius = static_cast<int>(std::ceil(2.0 * spatial_sigma));
    RgbdFrame out = frame;
    const int rows = frame.depth.height();
    const int cols = frame.depth.width();
#pragma omp parallel for schedule(static)
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            const std::uint32_t id = marks(r, c);
            if (id == 0 || !(frame.depth(r, c) > 0.0)) continue;
            double sum = 0.0, wsum = 0.0;
            for (int dr = -radius; dr <= radius; ++dr) {
                for (int dc = -radius; dc <= radius; ++dc) {
                    const int rr = r + dr, cc = c + dc;
                    if (!frame.depth.contains(rr, cc) || marks(rr, cc) != id) continue;
                    const double d = frame.depth(rr, cc);
                    if (!(d > 0.0)) continue;
                    const double w = std::exp(-(dr * dr + dc * dc) / (2.0 * spatial_sigma * spatial_sigma));
                    sum += w * d;
                    wsum += w;
                }
            }
            out.depth(r, c) = sum / wsum;
        }
    }
    return out;
}

Image<std::uint8_t> binary_closing(const Image<std::uint8_t>& mask, int size, bool wrap_cols) {
    if (size < 1 || size % 2 == 0) throw std::invalid_argument("closing size must be odd and positive");
    const int r = size / 2;
    const int rows = mask.height();
    const int cols = mask.width();
    auto col_at = [&](int c, bool& inside) {
        if (wrap_cols && cols > 0) {
            inside = true;
            return ((c % cols) + cols) % cols;
        }
        inside = c >= 0 && c < cols;
        return c;
    };
    // Separable passes: horizontal then vertical. `outside` is the value of cells beyond the image.
    auto pass = [&](const Image<std::uint8_t>& in, bool take_max, std::uint8_t outside) {
        Image<std::uint8_t> tmp(cols, rows, 0), res(cols, rows, 0);
        for (int y = 0; y < rows; ++y) {
            for (int x = 0; x < cols; ++x) {
                std::uint8_t v = take_max ? 0 : 1;
                for (int k = -r; k <= r; ++k) {
                    bool inside;
                    const int cx = col_at(x + k, inside);
                    const std::uint8_t s = inside ? in(y, cx) : outside;
                    v = take_max ? std::max(v, s) : std::min(v, s);
                }
                tmp(y, x) = v;
            }
        }
        for (int y = 0; y < rows; ++y) {
            for (int x = 0; x < cols; ++x) {
                std::uint8_t v = take_max ? 0 : 1;
                for (int k = -r; k <= r; ++k) {
                    const int yy = y + k;
                    const std::uint8_t s = (yy >= 0 && yy < rows) ? tmp(yy, x) : outside;
                    v = take_max ? std::max(v, s) : std::min(v, s);
                }
                res(y, x) = v;
            }
        }
        return res;
    };
    const Image<std::uint8_t> dilated = pass(mask, true, 0);
    Image<std::uint8_t> closed = pass(dilated, false, 0);
    // Closing is extensive; keep the input set regardless of border effects.
    for (int y = 0; y < rows; ++y)
        for (int x = 0; x < cols; ++x) closed(y, x) = closed(y, x) || mask(y, x);
    return closed;
}

HoleFillReport fill_holes(SceneState& state, const HoleFillParams& params) {
    HoleFillReport report;
    if (params.extrapolate) {
        // Snapshot of the activation state so the pass order does not matter.
        const std::vector<Proxy> snapshot = state.proxies;
        for (std::size_t a = 0; a < state.proxies.size(); ++a) {
            if (state.proxies[a].shape.kind != ShapeKind::Plane) continue;
            for (std::size_t b = 0; b < snapshot.size(); ++b) {
                if (a == b || snapshot[b].shape.kind != ShapeKind::Plane) continue;
                report.extrapolated += extrapolate_towards(state.proxies[a], snapshot[b], params);
            }
        }
    }
    for (auto& proxy : state.proxies) report.closed += close_proxy(proxy, params.closing_size);
    return report;
}

OrientedPointCloud resample(const SceneState& state, int density) {
    if (density < 1) throw std::invalid_argument("resample: density must be >= 1");
    OrientedPointCloud out;
    for (const auto& proxy : state.proxies) {
        std::vector<CellKey> keys;
        for (const auto& [key, cell] : proxy.cells)
            if (cell.emitting()) keys.push_back(key);
        std::sort(keys.begin(), keys.end());
        const double w = proxy.spec.cell_size;
        const int side = proxy.spec.color_side();
        for (const auto& key : keys) {
            const Cell& cell = proxy.cells.at(key);
            const bool unimodal = cell.modes() == 1;
            const double d = unimodal ? cell.distance() : 0.0;
            for (int b = 0; b < density; ++b) {
                for (int a = 0; a < density; ++a) {
                    const double fu = (a + 0.5) / density;
                    const double fv = (b + 0.5) / density;
                    const Vec2 uv = proxy.spec.clamp((key.i + fu) * w, (key.j + fv) * w);
                    const SurfacePoint sp = unparameterize(proxy.shape, uv.x(), uv.y());
                    Rgb color{};
                    if (!cell.colors.empty()) {
                        const int ca = std::min(side - 1, static_cast<int>(fu * side));
                        const int cb = std::min(side - 1, static_cast<int>(fv * side));
                        if (cell.colors.observed(ca, cb)) color = cell.colors.color(ca, cb);
                    }
                    out.push_back(sp.point + d * sp.normal, sp.normal, color, -1);
                }
            }
        }
    }
    return out;
}

}  // namespace shapeproxy
