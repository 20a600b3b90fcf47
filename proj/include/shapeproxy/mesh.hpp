#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "shapeproxy/proxy.hpp"

namespace shapeproxy {

/// Polygon mesh with per-corner texture coordinates. Faces are quads or
/// triangles listed counter-clockwise when seen from outside.
struct Mesh {
    std::vector<Vec3> vertices;
    std::vector<Vec2> texcoords;
    struct Face {
        std::vector<int> v;   // vertex indices
        std::vector<int> vt;  // texcoord indices, same length as v
    };
    std::vector<Face> faces;

    std::size_t triangle_count() const;
    std::size_t quad_count() const;
    /// Edges used by exactly one face.
    std::size_t boundary_edges() const;
    /// V - E + F over the polygon faces.
    long euler_characteristic() const;
};

struct MeshedProxy {
    std::uint32_t id = 0;
    Mesh mesh;
    int texture_width = 0;   // cells_u * 2^r
    int texture_height = 0;  // cells_v * 2^r
};

/// One quad per emitting cell over its corner lattice vertices, plus a
/// triangle in each missing cell of an L-shaped three-cell junction. Corners
/// are displaced by the mean d_c of their incident unimodal cells.
/// Revolution shapes are welded with close_periodic before displacement.
MeshedProxy mesh_proxy(const Proxy& proxy);

/// Welds vertices whose undisplaced positions coincide within 1e-6 * scale.
/// Returns the old-to-new vertex index map.
std::vector<int> weld_vertices(Mesh& mesh, double tolerance);

/// Welds the parameter-domain seams of a cylinder or sphere mesh built on the
/// undisplaced surface. Returns the old-to-new vertex map (identity for planes).
std::vector<int> close_periodic(const Proxy& proxy, Mesh& mesh);

/// RGB texture of a proxy's color points: (cells_u * 2^r) x (cells_v * 2^r),
/// black where nothing was observed. Row 0 is the largest v.
Image<Rgb> proxy_texture(const Proxy& proxy);

struct ExportReport {
    std::filesystem::path obj;
    std::filesystem::path mtl;
    std::vector<std::filesystem::path> textures;
    std::size_t vertices = 0;
    std::size_t faces = 0;
    double mesh_ms = 0.0;
};

/// Writes <stem>.obj, <stem>.mtl and one PNG per proxy into `dir`.
ExportReport export_scene(const SceneState& state, const std::filesystem::path& dir,
                          const std::string& stem = "scene");

/// Minimal OBJ reader (v, vt, f). Throws std::runtime_error on parse errors.
Mesh read_obj(const std::filesystem::path& path);

/// Triangle fan split of all faces.
std::vector<std::array<Vec3, 3>> triangulate(const Mesh& mesh);

/// Sampled point-to-surface RMSE from `mesh` to `reference` (one direction).
double mesh_rmse(const Mesh& mesh, const Mesh& reference, std::size_t samples = 5000,
                 std::uint64_t seed = 1);
/// Symmetric version: sqrt of the mean of both directed mean squares.
double symmetric_mesh_rmse(const Mesh& a, const Mesh& b, std::size_t samples = 5000,
                           std::uint64_t seed = 1);

}  // namespace shapeproxy
