#include "shapeproxy/codec.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>

#include <zlib.h>

namespace shapeproxy {

namespace {

constexpr char kMagic[4] = {'P', 'R', 'X', 'Y'};
constexpr std::uint16_t kFlagDeflate = 1;

class Writer {
public:
    std::vector<std::uint8_t> bytes;

    template <typename T>
    void put(T value) {
        static_assert(std::is_trivially_copyable_v<T>);
        std::uint8_t buf[sizeof(T)];
        std::memcpy(buf, &value, sizeof(T));
        if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
        bytes.insert(bytes.end(), buf, buf + sizeof(T));
    }
    void put_vec(const Vec3& v) {
        put(v.x());
        put(v.y());
        put(v.z());
    }
};

class Reader {
public:
    Reader(const std::uint8_t* data, std::size_t size, std::size_t base) : data_(data), size_(size), base_(base) {}

    template <typename T>
    T get() {
        need(sizeof(T));
        std::uint8_t buf[sizeof(T)];
        std::memcpy(buf, data_ + pos_, sizeof(T));
        if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
        pos_ += sizeof(T);
        T value;
        std::memcpy(&value, buf, sizeof(T));
        return value;
    }
    Vec3 get_vec() {
        const double x = get<double>();
        const double y = get<double>();
        const double z = get<double>();
        return {x, y, z};
    }
    void need(std::size_t n) const {
        if (pos_ + n > size_) throw DecodeError("truncated archive", base_ + pos_);
    }
    std::size_t offset() const { return base_ + pos_; }
    bool done() const { return pos_ == size_; }

private:
    const std::uint8_t* data_;
    std::size_t size_;
    std::size_t base_;
    std::size_t pos_ = 0;
};

void write_payload(Writer& w, const SceneState& state, const EncodeOptions& options) {
    const auto& k = state.intrinsics;
    w.put(k.fov_h);
    w.put(k.fov_v);
    w.put(static_cast<std::uint32_t>(k.res_h));
    w.put(static_cast<std::uint32_t>(k.res_v));
    w.put(k.depth_scale);
    w.put(static_cast<std::uint32_t>(state.frame_index));
    for (int c = 0; c < 3; ++c) w.put_vec(state.manhattan.axes.col(c));
    w.put(static_cast<std::uint8_t>(state.manhattan.fallback ? 1 : 0));
    w.put(state.next_id);

    std::vector<const Proxy*> proxies;
    for (const auto& p : state.proxies)
        if (options.only.empty() || options.only.count(p.id)) proxies.push_back(&p);
    std::sort(proxies.begin(), proxies.end(), [](const Proxy* a, const Proxy* b) { return a->id < b->id; });
    w.put(static_cast<std::uint32_t>(proxies.size()));

    for (const Proxy* p : proxies) {
        w.put(p->id);
        w.put(static_cast<std::uint8_t>(p->shape.kind));
        w.put(static_cast<std::uint8_t>(p->status));
        w.put(static_cast<std::uint32_t>(std::max(p->frames_seen, 0)));
        w.put(static_cast<std::uint32_t>(std::max(p->frames_since_support, 0)));
        w.put_vec(p->shape.origin);
        w.put_vec(p->shape.axis_x);
        w.put_vec(p->shape.axis_y);
        w.put(p->shape.radius);
        const GridSpec& s = p->spec;
        w.put(s.cell_size);
        w.put(s.u_min);
        w.put(s.u_max);
        w.put(s.v_min);
        w.put(s.v_max);
        w.put(s.u_period);
        w.put(static_cast<std::uint8_t>(s.color_res_log2));
        w.put(static_cast<std::uint8_t>((s.fixed_u ? 1 : 0) | (s.fixed_v ? 2 : 0)));
        w.put(p->view_distance);

        std::vector<CellKey> keys;
        for (const auto& [key, cell] : p->cells)
            if (cell.emitting()) keys.push_back(key);
        std::sort(keys.begin(), keys.end());
        w.put(static_cast<std::uint32_t>(keys.size()));
        const int side = s.color_side();
        for (const auto& key : keys) {
            const Cell& cell = p->cells.at(key);
            w.put(static_cast<std::int32_t>(key.i));
            w.put(static_cast<std::int32_t>(key.j));
            w.put(static_cast<std::uint8_t>((cell.visit.activated() ? 1 : 0) | (cell.filled ? 2 : 0)));
            const double q = std::round(cell.distance() / kDistanceStep);
            w.put(static_cast<std::int16_t>(std::clamp(q, -32768.0, 32767.0)));
            w.put(static_cast<std::uint8_t>(std::clamp(cell.modes(), 0, 255)));
            for (int b = 0; b < side; ++b) {
                for (int a = 0; a < side; ++a) {
                    Rgb c{};
                    if (!cell.colors.empty() && cell.colors.side == side && cell.colors.observed(a, b))
                        c = cell.colors.color(a, b);
                    w.put(c.r);
                    w.put(c.g);
                    w.put(c.b);
                }
            }
        }
    }
}

SceneState read_payload(Reader& r) {
    SceneState state;
    auto& k = state.intrinsics;
    k.fov_h = r.get<double>();
    k.fov_v = r.get<double>();
    k.res_h = static_cast<int>(r.get<std::uint32_t>());
    k.res_v = static_cast<int>(r.get<std::uint32_t>());
    k.depth_scale = r.get<double>();
    state.frame_index = static_cast<int>(r.get<std::uint32_t>());
    for (int c = 0; c < 3; ++c) state.manhattan.axes.col(c) = r.get_vec();
    state.manhattan.fallback = r.get<std::uint8_t>() != 0;
    state.next_id = r.get<std::uint32_t>();

    const std::uint32_t count = r.get<std::uint32_t>();
    for (std::uint32_t n = 0; n < count; ++n) {
        Proxy p;
        const std::size_t record_start = r.offset();
        p.id = r.get<std::uint32_t>();
        const auto kind = r.get<std::uint8_t>();
        if (kind > 2) throw DecodeError("unknown shape kind", record_start + 4);
        p.shape.kind = static_cast<ShapeKind>(kind);
        const auto status = r.get<std::uint8_t>();
        if (status > 1) throw DecodeError("unknown proxy status", record_start + 5);
        p.status = static_cast<ProxyStatus>(status);
        p.frames_seen = static_cast<int>(r.get<std::uint32_t>());
        p.frames_since_support = static_cast<int>(r.get<std::uint32_t>());
        p.shape.origin = r.get_vec();
        p.shape.axis_x = r.get_vec();
        p.shape.axis_y = r.get_vec();
        p.shape.radius = r.get<double>();
        GridSpec& s = p.spec;
        const std::size_t spec_at = r.offset();
        s.cell_size = r.get<double>();
        s.u_min = r.get<double>();
        s.u_max = r.get<double>();
        s.v_min = r.get<double>();
        s.v_max = r.get<double>();
        s.u_period = r.get<double>();
        s.color_res_log2 = r.get<std::uint8_t>();
        const auto fixed = r.get<std::uint8_t>();
        s.fixed_u = fixed & 1;
        s.fixed_v = fixed & 2;
        if (!(s.cell_size > 0.0) || s.color_res_log2 > 8) throw DecodeError("invalid grid spec", spec_at);
        p.view_distance = r.get<double>();
        p.view_samples = 1;
        p.stats.add(shape_params(p.shape));

        const std::uint32_t cells = r.get<std::uint32_t>();
        const int side = s.color_side();
        const std::size_t cell_bytes = 4 + 4 + 1 + 2 + 1 + static_cast<std::size_t>(side) * side * 3;
        r.need(static_cast<std::size_t>(cells) * cell_bytes);
        p.cells.reserve(cells);
        for (std::uint32_t c = 0; c < cells; ++c) {
            CellKey key;
            key.i = r.get<std::int32_t>();
            key.j = r.get<std::int32_t>();
            const auto flags = r.get<std::uint8_t>();
            const auto q = r.get<std::int16_t>();
            const auto modes = r.get<std::uint8_t>();
            Cell cell;
            cell.visit.set_activated(flags & 1);
            cell.filled = flags & 2;
            cell.hist.set_summary(q * kDistanceStep, modes);
            cell.colors = ColorGrid(side);
            for (int b = 0; b < side; ++b) {
                for (int a = 0; a < side; ++a) {
                    const auto cr = r.get<std::uint8_t>();
                    const auto cg = r.get<std::uint8_t>();
                    const auto cb = r.get<std::uint8_t>();
                    if (cr || cg || cb) cell.colors.fold(a, b, {cr, cg, cb}, 1.0);
                }
            }
            p.cells.emplace(key, std::move(cell));
        }
        state.proxies.push_back(std::move(p));
    }
    if (!r.done()) throw DecodeError("trailing bytes after last record", r.offset());
    return state;
}

struct Hit {
    double depth = 0.0;
    std::uint32_t id = 0;
};

Hit cast_ray(const SceneState& state, const Vec3& origin, const Vec3& dir, const CameraPose& pose) {
    Hit best;
    double best_t = std::numeric_limits<double>::infinity();
    const Cell* best_cell = nullptr;
    const Proxy* best_proxy = nullptr;
    Vec3 best_point;
    for (const auto& proxy : state.proxies) {
        double t[2];
        const int n = ray_intersections(proxy.shape, origin, dir, t);
        for (int h = 0; h < n; ++h) {
            if (t[h] >= best_t) break;
            const Vec3 p = origin + t[h] * dir;
            if (proxy.shape.kind == ShapeKind::Sphere && (p - proxy.shape.origin).norm() == 0.0) continue;
            const Vec2 uv = parameterize(proxy.shape, p);
            const CellKey key = proxy.spec.cell_of(uv.x(), uv.y());
            auto it = proxy.cells.find(key);
            if (it == proxy.cells.end() || !it->second.emitting()) continue;
            best_t = t[h];
            best_cell = &it->second;
            best_proxy = &proxy;
            best_point = p;
            break;
        }
    }
    if (!best_cell) return best;
    Vec3 p = best_point;
    if (best_cell->modes() == 1) p += best_cell->distance() * best_proxy->shape.normal_at(best_point);
    best.depth = std::max(0.0, pose.to_camera(p).z());
    best.id = best_proxy->id;
    return best;
}

template <typename F>
void for_each_ray(const CameraIntrinsics& k, const CameraPose& pose, F&& f) {
#pragma omp parallel for schedule(static)
    for (int r = 0; r < k.res_v; ++r) {
        for (int c = 0; c < k.res_h; ++c) {
            const Vec3 dir = pose.direction_to_world(k.unproject(r, c, 1.0));
            f(r, c, dir);
        }
    }
}

}  // namespace

std::vector<std::uint8_t> encode(const SceneState& state, const EncodeOptions& options) {
    Writer payload;
    write_payload(payload, state, options);

    std::vector<std::uint8_t> body;
    if (options.deflate) {
        uLongf bound = compressBound(static_cast<uLong>(payload.bytes.size()));
        body.resize(bound);
        if (compress2(body.data(), &bound, payload.bytes.data(), static_cast<uLong>(payload.bytes.size()), 9) != Z_OK)
            throw std::runtime_error("encode: deflate failed");
        body.resize(bound);
    } else {
        body = payload.bytes;
    }

    Writer out;
    out.bytes.insert(out.bytes.end(), kMagic, kMagic + 4);
    out.put(kArchiveVersion);
    out.put(static_cast<std::uint16_t>(options.deflate ? kFlagDeflate : 0));
    out.put(static_cast<std::uint32_t>(payload.bytes.size()));
    out.put(static_cast<std::uint32_t>(body.size()));
    out.bytes.insert(out.bytes.end(), body.begin(), body.end());
    return out.bytes;
}

SceneState decode(const std::vector<std::uint8_t>& bytes) {
    Reader header(bytes.data(), bytes.size(), 0);
    header.need(4);
    for (int i = 0; i < 4; ++i)
        if (bytes[i] != static_cast<std::uint8_t>(kMagic[i])) throw DecodeError("bad magic", 0);
    header.get<std::uint32_t>();
    const auto version = header.get<std::uint16_t>();
    if (version != kArchiveVersion)
        throw DecodeError("unsupported archive version " + std::to_string(version), 4);
    const auto flags = header.get<std::uint16_t>();
    if (flags & ~kFlagDeflate) throw DecodeError("unknown flags", 6);
    const auto raw_size = header.get<std::uint32_t>();
    const auto stored_size = header.get<std::uint32_t>();
    if (bytes.size() - kArchiveHeaderSize < stored_size)
        throw DecodeError("truncated archive body", bytes.size());
    if (bytes.size() - kArchiveHeaderSize > stored_size)
        throw DecodeError("trailing bytes after archive body", kArchiveHeaderSize + stored_size);

    const std::uint8_t* body = bytes.data() + kArchiveHeaderSize;
    std::vector<std::uint8_t> inflated;
    if (flags & kFlagDeflate) {
        inflated.resize(raw_size);
        uLongf len = raw_size;
        const int rc = uncompress(inflated.data(), &len, body, stored_size);
        if (rc != Z_OK || len != raw_size) throw DecodeError("corrupt deflate stream", kArchiveHeaderSize);
        Reader r(inflated.data(), inflated.size(), kArchiveHeaderSize);
        return read_payload(r);
    }
    if (raw_size != stored_size) throw DecodeError("size mismatch for stored payload", 8);
    Reader r(body, stored_size, kArchiveHeaderSize);
    return read_payload(r);
}

Image<double> decompress_frame(const SceneState& state, const CameraIntrinsics& intrinsics,
                               const CameraPose& pose) {
    Image<double> depth(intrinsics.res_h, intrinsics.res_v, 0.0);
    const Vec3 origin = pose.origin();
    for_each_ray(intrinsics, pose, [&](int r, int c, const Vec3& dir) {
        depth(r, c) = cast_ray(state, origin, dir, pose).depth;
    });
    return depth;
}

Image<std::uint32_t> visible_proxies(const SceneState& state, const CameraIntrinsics& intrinsics,
                                     const CameraPose& pose) {
    Image<std::uint32_t> ids(intrinsics.res_h, intrinsics.res_v, 0);
    const Vec3 origin = pose.origin();
    for_each_ray(intrinsics, pose, [&](int r, int c, const Vec3& dir) {
        ids(r, c) = cast_ray(state, origin, dir, pose).id;
    });
    return ids;
}

QualityMetrics psnr(const Image<double>& raw, const Image<double>& reconstructed, double peak,
                    const Image<std::uint8_t>* mask) {
    if (raw.width() != reconstructed.width() || raw.height() != reconstructed.height())
        throw std::invalid_argument("psnr: depth maps differ in size");
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        if (!(raw[i] > 0.0) || !(reconstructed[i] > 0.0)) continue;
        if (mask && !(*mask)[i]) continue;
        const double e = raw[i] - reconstructed[i];
        sum += e * e;
        ++n;
    }
    if (n == 0) throw std::domain_error("psnr: no pixel is valid in both depth maps");
    QualityMetrics m;
    m.count = n;
    m.rmse = std::sqrt(sum / static_cast<double>(n));
    m.psnr = m.rmse > 0.0 ? 20.0 * std::log10(peak / m.rmse) : std::numeric_limits<double>::infinity();
    return m;
}

double scene_ratio(std::size_t frames, std::size_t archive_bytes, std::size_t raw_frame_bytes) {
    if (archive_bytes == 0) return 0.0;
    return static_cast<double>(frames) * static_cast<double>(raw_frame_bytes) / static_cast<double>(archive_bytes);
}

double frame_ratio(const SceneState& state, const CameraIntrinsics& intrinsics, const CameraPose& pose,
                   std::size_t raw_frame_bytes) {
    const Image<std::uint32_t> ids = visible_proxies(state, intrinsics, pose);
    EncodeOptions options;
    for (std::uint32_t id : ids.pixels())
        if (id) options.only.insert(id);
    if (options.only.empty()) return 0.0;
    const auto bytes = encode(state, options);
    return static_cast<double>(raw_frame_bytes) / static_cast<double>(bytes.size());
}

}  // namespace shapeproxy
