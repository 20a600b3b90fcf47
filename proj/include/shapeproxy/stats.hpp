#pragma once

#include <bitset>
#include <cstdint>
#include <functional>
#include <vector>

#include "shapeproxy/frame.hpp"
#include "shapeproxy/shape.hpp"

namespace shapeproxy {

/// Smoothed local histogram of signed sample-to-shape distances.
///
/// Kept as a short list of Gaussian kernels. A sample is folded into the
/// nearest kernel when it lies within merge_width * sigma of it, otherwise it
/// starts a new kernel. Kernels that drift closer than merge_width * sigma are
/// combined so the list stays bounded by the observed distance span.
class SmoothedHistogram {
public:
    struct Kernel {
        double mean = 0.0;
        double sigma = 0.0;
        double weight = 0.0;
    };

    double merge_width = 2.0;

    /// Adds one sample with bandwidth `sigma`. Non-finite values are rejected
    /// (returns false). The mode count is not refreshed; call update_modes().
    bool insert(double d, double sigma);
    /// Recomputes m_c from the kernel list.
    int update_modes();

    /// Absorbs another histogram (used when proxies merge).
    void absorb(const SmoothedHistogram& other);

    const std::vector<Kernel>& kernels() const { return kernels_; }
    double total_weight() const;

    /// d_c: weighted mean of the kernel means.
    double mean_distance() const { return mean_; }
    /// m_c: number of local maxima of the kernel sum.
    int mode_count() const { return modes_; }

    /// Overrides the summary without kernels (decoded archives, filled cells).
    void set_summary(double mean_distance, int mode_count);

    /// Per-insert hook: receives d_c after each accepted sample.
    std::function<void(double)> on_insert;

private:
    void compact();
    void refresh_mean();

    std::vector<Kernel> kernels_;
    double mean_ = 0.0;
    int modes_ = 0;
};

/// Local maxima of sum_k w_k N(x; mu_k, sigma_k), located by sign changes of
/// the analytic derivative sampled every min(sigma) / 8.
int slh_mode_count(const std::vector<SmoothedHistogram::Kernel>& kernels);

/// 2^r x 2^r running color means of one cell.
struct ColorGrid {
    int side = 0;
    std::vector<float> rgb;     // 3 floats per point, row-major over (a, b)
    std::vector<float> weight;  // accumulated weight per point

    ColorGrid() = default;
    explicit ColorGrid(int side_) : side(side_), rgb(3 * side_ * side_, 0.0f), weight(side_ * side_, 0.0f) {}

    bool empty() const { return side == 0; }
    /// a indexes u, b indexes v.
    std::size_t index(int a, int b) const { return static_cast<std::size_t>(b) * side + a; }
    void fold(int a, int b, const Rgb& c, double w);
    void absorb(const ColorGrid& other);
    Rgb color(int a, int b) const;
    bool observed(int a, int b) const { return weight[index(a, b)] > 0.0f; }
};

/// Occupancy of the last 100 frames in which a cell was in view.
///
/// Activation happens once the visited fraction reaches the threshold and is
/// never undone.
class VisitWindow {
public:
    static constexpr int kLength = 100;

    /// Pushes one frame. Returns true when this push activated the window.
    bool push(bool visited, double threshold = 0.25);
    int visits() const { return visits_; }
    int frames() const { return frames_; }
    bool activated() const { return activated_; }
    void set_activated(bool a) { activated_ = activated_ || a; }
    /// Union used when cells merge.
    void absorb(const VisitWindow& other);

private:
    std::bitset<kLength> ring_;
    int head_ = 0;
    int frames_ = 0;
    int visits_ = 0;
    bool activated_ = false;
};

VisitWindow visit_and_activate(VisitWindow window, bool visited, double threshold = 0.25);

struct Cell {
    VisitWindow visit;
    SmoothedHistogram hist;
    ColorGrid colors;
    bool filled = false;        // set by hole filling; implies m_c = 1, d_c = 0
    int last_frame_visited = -1;

    bool emitting() const { return visit.activated() || filled; }
    /// Effective (d_c, m_c) used by processing; filled cells without data read as flat.
    double distance() const;
    int modes() const;
};

struct ColorNeighborhood {
    double rho = 0.0;  // meters
    int n = 0;         // color points
};

/// Influence radius of a sample seen at depth z: rho = (z/2) tan(fov_h/res_h),
/// n = floor(rho * 2^r / w).
ColorNeighborhood color_neighborhood(double z, const GridSpec& spec, const CameraIntrinsics& k);

/// Weight of a color point at integer offset (du, dv) for neighborhood n:
/// exp(-(du^2 + dv^2) / (2 sigma^2)) / (1 + 2 n^2), sigma = alpha * 2^r.
double color_weight(int du, int dv, int n, int color_res_log2, double alpha = 3.0);

/// Folds `c` into every color point within Chebyshev radius n of the point
/// containing (u, v). Points in other cells are reached through `grid_of`,
/// which returns nullptr for cells that do not exist.
void color_update(const std::function<ColorGrid*(const CellKey&)>& grid_of, const GridSpec& spec,
                  double u, double v, const Rgb& c, int n, double alpha = 3.0);

}  // namespace shapeproxy
