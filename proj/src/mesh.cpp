#include "shapeproxy/mesh.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>

#include "shapeproxy/io.hpp"

namespace shapeproxy {

namespace fs = std::filesystem;

namespace {

struct LatticeKey {
    int a = 0;
    int b = 0;
    friend auto operator<=>(const LatticeKey&, const LatticeKey&) = default;
};

Vec3 closest_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
    const Vec3 ab = b - a, ac = c - a, ap = p - a;
    const double d1 = ab.dot(ap), d2 = ac.dot(ap);
    if (d1 <= 0.0 && d2 <= 0.0) return a;
    const Vec3 bp = p - b;
    const double d3 = ab.dot(bp), d4 = ac.dot(bp);
    if (d3 >= 0.0 && d4 <= d3) return b;
    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return a + (d1 / (d1 - d3)) * ab;
    const Vec3 cp = p - c;
    const double d5 = ab.dot(cp), d6 = ac.dot(cp);
    if (d6 >= 0.0 && d5 <= d6) return c;
    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return a + (d2 / (d2 - d6)) * ac;
    const double va = d3 * d6 - d5 * d4;
    if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0)
        return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);
    const double denom = 1.0 / (va + vb + vc);
    return a + ab * (vb * denom) + ac * (vc * denom);
}

std::uint64_t edge_key(int a, int b) {
    const auto lo = static_cast<std::uint32_t>(std::min(a, b));
    const auto hi = static_cast<std::uint32_t>(std::max(a, b));
    return (static_cast<std::uint64_t>(lo) << 32) | hi;
}

std::map<std::uint64_t, int> edge_use(const Mesh& mesh) {
    std::map<std::uint64_t, int> use;
    for (const auto& f : mesh.faces)
        for (std::size_t k = 0; k < f.v.size(); ++k) ++use[edge_key(f.v[k], f.v[(k + 1) % f.v.size()])];
    return use;
}

}  // namespace

std::size_t Mesh::triangle_count() const {
    return static_cast<std::size_t>(std::count_if(faces.begin(), faces.end(), [](const Face& f) { return f.v.size() == 3; }));
}

std::size_t Mesh::quad_count() const {
    return static_cast<std::size_t>(std::count_if(faces.begin(), faces.end(), [](const Face& f) { return f.v.size() == 4; }));
}

std::size_t Mesh::boundary_edges() const {
    std::size_t n = 0;
    for (const auto& [key, count] : edge_use(*this))
        if (count == 1) ++n;
    return n;
}

long Mesh::euler_characteristic() const {
    std::set<int> used;
    for (const auto& f : faces) used.insert(f.v.begin(), f.v.end());
    const long e = static_cast<long>(edge_use(*this).size());
    return static_cast<long>(used.size()) - e + static_cast<long>(faces.size());
}

std::vector<int> weld_vertices(Mesh& mesh, double tolerance) {
    const std::size_t n = mesh.vertices.size();
    std::vector<int> remap(n, -1);
    const double cell = std::max(tolerance, 1e-12) * 4.0;
    std::unordered_map<std::uint64_t, std::vector<int>> buckets;
    auto bucket_of = [&](const Vec3& p, int dx, int dy, int dz) {
        const auto ix = static_cast<std::int64_t>(std::floor(p.x() / cell)) + dx;
        const auto iy = static_cast<std::int64_t>(std::floor(p.y() / cell)) + dy;
        const auto iz = static_cast<std::int64_t>(std::floor(p.z() / cell)) + dz;
        return static_cast<std::uint64_t>(ix * 73856093) ^ static_cast<std::uint64_t>(iy * 19349663) ^
               static_cast<std::uint64_t>(iz * 83492791);
    };
    std::vector<Vec3> kept;
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3& p = mesh.vertices[i];
        int found = -1;
        for (int dx = -1; dx <= 1 && found < 0; ++dx)
            for (int dy = -1; dy <= 1 && found < 0; ++dy)
                for (int dz = -1; dz <= 1 && found < 0; ++dz) {
                    auto it = buckets.find(bucket_of(p, dx, dy, dz));
                    if (it == buckets.end()) continue;
                    for (int j : it->second)
                        if ((kept[j] - p).norm() <= tolerance) {
                            found = j;
                            break;
                        }
                }
        if (found < 0) {
            found = static_cast<int>(kept.size());
            kept.push_back(p);
            buckets[bucket_of(p, 0, 0, 0)].push_back(found);
        }
        remap[i] = found;
    }
    mesh.vertices = std::move(kept);
    std::vector<Mesh::Face> faces;
    faces.reserve(mesh.faces.size());
    for (auto& f : mesh.faces) {
        Mesh::Face g;
        for (std::size_t k = 0; k < f.v.size(); ++k) {
            const int v = remap[f.v[k]];
            if (std::find(g.v.begin(), g.v.end(), v) != g.v.end()) continue;
            g.v.push_back(v);
            g.vt.push_back(f.vt[k]);
        }
        if (g.v.size() >= 3) faces.push_back(std::move(g));
    }
    mesh.faces = std::move(faces);
    return remap;
}

std::vector<int> close_periodic(const Proxy& proxy, Mesh& mesh) {
    if (proxy.shape.kind == ShapeKind::Plane) {
        std::vector<int> identity(mesh.vertices.size());
        for (std::size_t i = 0; i < identity.size(); ++i) identity[i] = static_cast<int>(i);
        return identity;
    }
    return weld_vertices(mesh, 1e-6 * proxy.shape.radius);
}

MeshedProxy mesh_proxy(const Proxy& proxy) {
    MeshedProxy out;
    out.id = proxy.id;
    const GridSpec& spec = proxy.spec;
    const int side = spec.color_side();
    const int cols = spec.columns();
    const int rows = spec.rows();
    out.texture_width = std::max(cols, 0) * side;
    out.texture_height = std::max(rows, 0) * side;

    std::vector<CellKey> active;
    for (const auto& [key, cell] : proxy.cells)
        if (cell.emitting()) active.push_back(key);
    std::sort(active.begin(), active.end());
    if (active.empty()) return out;

    const bool periodic = spec.u_period > 0.0 && cols > 0;
    auto wrap_i = [&](int i) { return periodic ? ((i - spec.i_lo()) % cols + cols) % cols + spec.i_lo() : i; };
    auto cell_at = [&](int i, int j) -> const Cell* {
        auto it = proxy.cells.find({wrap_i(i), j});
        return it != proxy.cells.end() && it->second.emitting() ? &it->second : nullptr;
    };

    Mesh& mesh = out.mesh;
    std::map<LatticeKey, int> lattice;
    std::vector<Vec3> normals;
    std::vector<double> d_sum;
    std::vector<int> d_count;
    const double w = spec.cell_size;

    auto vertex = [&](int a, int b) {
        const LatticeKey key{a, b};
        auto it = lattice.find(key);
        if (it != lattice.end()) return it->second;
        const Vec2 uv = spec.clamp(a * w, b * w);
        const SurfacePoint sp = unparameterize(proxy.shape, uv.x(), uv.y());
        const int idx = static_cast<int>(mesh.vertices.size());
        mesh.vertices.push_back(sp.point);
        normals.push_back(sp.normal);
        mesh.texcoords.push_back({cols > 0 ? double(a - spec.i_lo()) / cols : 0.0,
                                  rows > 0 ? double(b - spec.j_lo()) / rows : 0.0});
        // Corner height from the incident emitting cells; multimodal ones count as 0.
        double s = 0.0;
        int n = 0;
        for (int dj = -1; dj <= 0; ++dj)
            for (int di = -1; di <= 0; ++di)
                if (const Cell* c = cell_at(a + di, b + dj)) {
                    if (c->modes() == 1) s += c->distance();
                    ++n;
                }
        d_sum.push_back(s);
        d_count.push_back(n);
        lattice.emplace(key, idx);
        return idx;
    };
    auto add_face = [&](std::initializer_list<LatticeKey> corners) {
        Mesh::Face f;
        for (const auto& c : corners) {
            const int v = vertex(c.a, c.b);
            f.v.push_back(v);
            f.vt.push_back(v);
        }
        mesh.faces.push_back(std::move(f));
    };

    for (const auto& k : active)
        add_face({{k.i, k.j}, {k.i + 1, k.j}, {k.i + 1, k.j + 1}, {k.i, k.j + 1}});

    // Chamfer triangles in the missing cell of every three-cell corner.
    std::set<LatticeKey> corners;
    for (const auto& k : active)
        for (int db = 0; db <= 1; ++db)
            for (int da = 0; da <= 1; ++da) {
                int a = k.i + da;
                if (periodic && a == spec.i_hi() + 1) a = spec.i_lo();
                corners.insert({a, k.j + db});
            }
    for (const auto& c : corners) {
        int present = 0;
        int mdx = 0, mdy = 0;
        for (int dy = -1; dy <= 0; ++dy)
            for (int dx = -1; dx <= 0; ++dx) {
                if (cell_at(c.a + dx, c.b + dy)) ++present;
                else {
                    mdx = dx;
                    mdy = dy;
                }
            }
        if (present != 3) continue;
        int mi = c.a + mdx;
        const int mj = c.b + mdy;
        if (periodic) mi = wrap_i(mi);
        else if (spec.fixed_u && (mi < spec.i_lo() || mi > spec.i_hi())) continue;
        if (spec.fixed_v && (mj < spec.j_lo() || mj > spec.j_hi())) continue;
        const LatticeKey corner{mi - mdx, mj - mdy};
        LatticeKey e1{mi + 1 + mdx, mj - mdy};
        LatticeKey e2{mi - mdx, mj + 1 + mdy};
        const long cross = static_cast<long>(e1.a - corner.a) * (e2.b - corner.b) -
                           static_cast<long>(e1.b - corner.b) * (e2.a - corner.a);
        if (cross < 0) std::swap(e1, e2);
        add_face({corner, e1, e2});
    }

    const std::size_t before = mesh.vertices.size();
    const std::vector<Vec3> base_normals = normals;
    const std::vector<int> remap = close_periodic(proxy, mesh);
    std::vector<double> sum(mesh.vertices.size(), 0.0);
    std::vector<int> count(mesh.vertices.size(), 0);
    std::vector<Vec3> normal(mesh.vertices.size(), Vec3::Zero());
    for (std::size_t i = 0; i < before; ++i) {
        sum[remap[i]] += d_sum[i];
        count[remap[i]] += d_count[i];
        normal[remap[i]] = base_normals[i];
    }
    for (std::size_t v = 0; v < mesh.vertices.size(); ++v)
        if (count[v] > 0) mesh.vertices[v] += (sum[v] / count[v]) * normal[v];
    return out;
}

Image<Rgb> proxy_texture(const Proxy& proxy) {
    const GridSpec& spec = proxy.spec;
    const int side = spec.color_side();
    const int cols = std::max(spec.columns(), 0);
    const int rows = std::max(spec.rows(), 0);
    Image<Rgb> tex(std::max(cols * side, 1), std::max(rows * side, 1));
    for (const auto& [key, cell] : proxy.cells) {
        if (!cell.emitting() || cell.colors.empty() || cell.colors.side != side) continue;
        if (!spec.contains(key)) continue;
        for (int b = 0; b < side; ++b)
            for (int a = 0; a < side; ++a) {
                if (!cell.colors.observed(a, b)) continue;
                const int col = (key.i - spec.i_lo()) * side + a;
                const int row = (spec.j_hi() - key.j) * side + (side - 1 - b);
                tex(row, col) = cell.colors.color(a, b);
            }
    }
    return tex;
}

ExportReport export_scene(const SceneState& state, const fs::path& dir, const std::string& stem) {
    fs::create_directories(dir);
    ExportReport report;
    report.obj = dir / (stem + ".obj");
    report.mtl = dir / (stem + ".mtl");

    const auto t0 = std::chrono::steady_clock::now();
    std::vector<MeshedProxy> meshes;
    for (const auto& p : state.proxies) {
        MeshedProxy m = mesh_proxy(p);
        if (!m.mesh.faces.empty()) meshes.push_back(std::move(m));
    }
    report.mesh_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();

    std::ofstream obj(report.obj);
    std::ofstream mtl(report.mtl);
    if (!obj) throw std::runtime_error("cannot write " + report.obj.string());
    if (!mtl) throw std::runtime_error("cannot write " + report.mtl.string());
    obj << "mtllib " << report.mtl.filename().string() << '\n' << std::setprecision(9);
    std::size_t v_base = 1, vt_base = 1;
    for (const auto& m : meshes) {
        const std::string name = "proxy_" + std::to_string(m.id);
        const fs::path tex = dir / (stem + "_" + name + ".png");
        write_png_rgb(tex, proxy_texture(*state.find(m.id)));
        report.textures.push_back(tex);
        mtl << "newmtl " << name << "\nKa 1 1 1\nKd 1 1 1\nKs 0 0 0\nd 1\nillum 1\nmap_Kd "
            << tex.filename().string() << "\n\n";

        obj << "o " << name << '\n';
        for (const auto& v : m.mesh.vertices) obj << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
        for (const auto& t : m.mesh.texcoords) obj << "vt " << t.x() << ' ' << t.y() << '\n';
        obj << "usemtl " << name << '\n';
        for (const auto& f : m.mesh.faces) {
            obj << 'f';
            for (std::size_t k = 0; k < f.v.size(); ++k) obj << ' ' << f.v[k] + v_base << '/' << f.vt[k] + vt_base;
            obj << '\n';
        }
        v_base += m.mesh.vertices.size();
        vt_base += m.mesh.texcoords.size();
        report.vertices += m.mesh.vertices.size();
        report.faces += m.mesh.faces.size();
    }
    return report;
}

Mesh read_obj(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    Mesh mesh;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag)) continue;
        if (tag == "v") {
            Vec3 p;
            if (!(ls >> p.x() >> p.y() >> p.z()))
                throw std::runtime_error("bad vertex on line " + std::to_string(lineno) + " of " + path.string());
            mesh.vertices.push_back(p);
        } else if (tag == "vt") {
            Vec2 t;
            if (!(ls >> t.x() >> t.y()))
                throw std::runtime_error("bad texcoord on line " + std::to_string(lineno) + " of " + path.string());
            mesh.texcoords.push_back(t);
        } else if (tag == "f") {
            Mesh::Face f;
            std::string tok;
            while (ls >> tok) {
                const auto slash = tok.find('/');
                const long v = std::stol(tok.substr(0, slash));
                long vt = 0;
                if (slash != std::string::npos) {
                    const auto rest = tok.substr(slash + 1);
                    const auto slash2 = rest.find('/');
                    const auto vt_str = rest.substr(0, slash2);
                    if (!vt_str.empty()) vt = std::stol(vt_str);
                }
                const long nv = static_cast<long>(mesh.vertices.size());
                const long nt = static_cast<long>(mesh.texcoords.size());
                f.v.push_back(static_cast<int>(v > 0 ? v - 1 : nv + v));
                f.vt.push_back(static_cast<int>(vt > 0 ? vt - 1 : (vt < 0 ? nt + vt : -1)));
            }
            if (f.v.size() < 3)
                throw std::runtime_error("face with fewer than 3 vertices on line " + std::to_string(lineno));
            mesh.faces.push_back(std::move(f));
        }
    }
    return mesh;
}

std::vector<std::array<Vec3, 3>> triangulate(const Mesh& mesh) {
    std::vector<std::array<Vec3, 3>> tris;
    for (const auto& f : mesh.faces)
        for (std::size_t k = 1; k + 1 < f.v.size(); ++k)
            tris.push_back({mesh.vertices[f.v[0]], mesh.vertices[f.v[k]], mesh.vertices[f.v[k + 1]]});
    return tris;
}

namespace {

double directed_mean_square(const Mesh& mesh, const Mesh& reference, std::size_t samples, std::uint64_t seed) {
    const auto tris = triangulate(mesh);
    const auto ref = triangulate(reference);
    if (tris.empty() || ref.empty()) throw std::invalid_argument("mesh_rmse: empty mesh");
    std::vector<double> cdf;
    cdf.reserve(tris.size());
    double total = 0.0;
    for (const auto& t : tris) {
        total += 0.5 * (t[1] - t[0]).cross(t[2] - t[0]).norm();
        cdf.push_back(total);
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    double sum = 0.0;
    for (std::size_t s = 0; s < samples; ++s) {
        const double x = uni(rng) * total;
        const auto it = std::lower_bound(cdf.begin(), cdf.end(), x);
        const auto& t = tris[std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), tris.size() - 1)];
        double r1 = uni(rng), r2 = uni(rng);
        if (r1 + r2 > 1.0) {
            r1 = 1.0 - r1;
            r2 = 1.0 - r2;
        }
        const Vec3 p = t[0] + r1 * (t[1] - t[0]) + r2 * (t[2] - t[0]);
        double best = std::numeric_limits<double>::infinity();
        for (const auto& q : ref) best = std::min(best, (closest_on_triangle(p, q[0], q[1], q[2]) - p).squaredNorm());
        sum += best;
    }
    return sum / static_cast<double>(samples);
}

}  // namespace

double mesh_rmse(const Mesh& mesh, const Mesh& reference, std::size_t samples, std::uint64_t seed) {
    return std::sqrt(directed_mean_square(mesh, reference, samples, seed));
}

double symmetric_mesh_rmse(const Mesh& a, const Mesh& b, std::size_t samples, std::uint64_t seed) {
    return std::sqrt(0.5 * (directed_mean_square(a, b, samples, seed) + directed_mean_square(b, a, samples, seed + 1)));
}

}  // namespace shapeproxy
