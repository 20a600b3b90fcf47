#include "shapeproxy/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace shapeproxy {

bool SmoothedHistogram::insert(double d, double sigma) {
    if (!std::isfinite(d) || !(sigma > 0.0)) return false;
    Kernel* nearest = nullptr;
    double best = std::numeric_limits<double>::infinity();
    for (auto& k : kernels_) {
        const double gap = std::abs(d - k.mean);
        if (gap < best) {
            best = gap;
            nearest = &k;
        }
    }
    if (nearest && best <= merge_width * nearest->sigma) {
        nearest->weight += 1.0;
        nearest->mean += (d - nearest->mean) / nearest->weight;
        compact();
    } else {
        kernels_.push_back({d, sigma, 1.0});
        std::sort(kernels_.begin(), kernels_.end(),
                  [](const Kernel& a, const Kernel& b) { return a.mean < b.mean; });
    }
    refresh_mean();
    if (on_insert) on_insert(mean_);
    return true;
}

void SmoothedHistogram::compact() {
    // Kernels are sorted by mean; merge neighbors that came too close.
    bool merged = true;
    while (merged && kernels_.size() > 1) {
        merged = false;
        for (std::size_t i = 0; i + 1 < kernels_.size(); ++i) {
            Kernel& a = kernels_[i];
            const Kernel& b = kernels_[i + 1];
            if (b.mean - a.mean < merge_width * std::min(a.sigma, b.sigma)) {
                const double w = a.weight + b.weight;
                a.mean = (a.mean * a.weight + b.mean * b.weight) / w;
                a.sigma = (a.sigma * a.weight + b.sigma * b.weight) / w;
                a.weight = w;
                kernels_.erase(kernels_.begin() + static_cast<std::ptrdiff_t>(i) + 1);
                merged = true;
                break;
            }
        }
    }
}

void SmoothedHistogram::refresh_mean() {
    double sum = 0.0, w = 0.0;
    for (const auto& k : kernels_) {
        sum += k.mean * k.weight;
        w += k.weight;
    }
    mean_ = w > 0.0 ? sum / w : 0.0;
}

int SmoothedHistogram::update_modes() {
    if (!kernels_.empty()) modes_ = slh_mode_count(kernels_);
    return modes_;
}

void SmoothedHistogram::absorb(const SmoothedHistogram& other) {
    if (other.kernels_.empty()) {
        if (kernels_.empty()) {
            // Both are summaries only; keep the stronger claim of structure.
            modes_ = std::max(modes_, other.modes_);
        }
        return;
    }
    kernels_.insert(kernels_.end(), other.kernels_.begin(), other.kernels_.end());
    std::sort(kernels_.begin(), kernels_.end(),
              [](const Kernel& a, const Kernel& b) { return a.mean < b.mean; });
    compact();
    refresh_mean();
    update_modes();
}

double SmoothedHistogram::total_weight() const {
    double w = 0.0;
    for (const auto& k : kernels_) w += k.weight;
    return w;
}

void SmoothedHistogram::set_summary(double mean_distance, int mode_count) {
    kernels_.clear();
    mean_ = mean_distance;
    modes_ = mode_count;
}

int slh_mode_count(const std::vector<SmoothedHistogram::Kernel>& kernels) {
    if (kernels.empty()) return 0;
    if (kernels.size() == 1) return 1;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    double min_sigma = lo;
    for (const auto& k : kernels) {
        lo = std::min(lo, k.mean - 4.0 * k.sigma);
        hi = std::max(hi, k.mean + 4.0 * k.sigma);
        min_sigma = std::min(min_sigma, k.sigma);
    }
    const double step = min_sigma / 8.0;
    auto derivative = [&](double x) {
        double s = 0.0;
        for (const auto& k : kernels) {
            const double t = (x - k.mean) / k.sigma;
            s += -k.weight * t / (k.sigma * k.sigma) * std::exp(-0.5 * t * t);
        }
        return s;
    };
    int modes = 0;
    int last_sign = 0;
    const auto steps = static_cast<long>(std::ceil((hi - lo) / step));
    for (long i = 0; i <= steps; ++i) {
        const double g = derivative(lo + static_cast<double>(i) * step);
        const int sign = g > 0.0 ? 1 : (g < 0.0 ? -1 : 0);
        if (sign == 0) continue;
        if (last_sign > 0 && sign < 0) ++modes;
        last_sign = sign;
    }
    return std::max(modes, 1);
}

void ColorGrid::fold(int a, int b, const Rgb& c, double w) {
    if (!(w > 0.0)) return;
    const std::size_t i = index(a, b);
    const float wn = weight[i] + static_cast<float>(w);
    const float f = static_cast<float>(w) / wn;
    rgb[3 * i + 0] += (c.r - rgb[3 * i + 0]) * f;
    rgb[3 * i + 1] += (c.g - rgb[3 * i + 1]) * f;
    rgb[3 * i + 2] += (c.b - rgb[3 * i + 2]) * f;
    weight[i] = wn;
}

void ColorGrid::absorb(const ColorGrid& other) {
    if (other.empty()) return;
    if (empty()) {
        *this = other;
        return;
    }
    for (std::size_t i = 0; i < weight.size() && i < other.weight.size(); ++i) {
        const float w = weight[i] + other.weight[i];
        if (w <= 0.0f) continue;
        for (int ch = 0; ch < 3; ++ch)
            rgb[3 * i + ch] = (rgb[3 * i + ch] * weight[i] + other.rgb[3 * i + ch] * other.weight[i]) / w;
        weight[i] = w;
    }
}

Rgb ColorGrid::color(int a, int b) const {
    const std::size_t i = index(a, b);
    auto q = [](float x) { return static_cast<std::uint8_t>(std::clamp(std::lround(x), 0L, 255L)); };
    return {q(rgb[3 * i]), q(rgb[3 * i + 1]), q(rgb[3 * i + 2])};
}

bool VisitWindow::push(bool visited, double threshold) {
    if (frames_ == kLength) {
        if (ring_[head_]) --visits_;
    } else {
        ++frames_;
    }
    ring_[head_] = visited;
    if (visited) ++visits_;
    head_ = (head_ + 1) % kLength;
    if (!activated_ && visits_ >= static_cast<int>(std::ceil(threshold * kLength - 1e-9))) {
        activated_ = true;
        return true;
    }
    return false;
}

void VisitWindow::absorb(const VisitWindow& other) {
    // Align both rings on their most recent frame and OR the flags.
    std::bitset<kLength> merged;
    const int n = std::max(frames_, other.frames_);
    for (int age = 0; age < n; ++age) {
        const int ia = ((head_ - 1 - age) % kLength + kLength) % kLength;
        const int ib = ((other.head_ - 1 - age) % kLength + kLength) % kLength;
        const bool fa = age < frames_ && ring_[ia];
        const bool fb = age < other.frames_ && other.ring_[ib];
        merged[(kLength - 1 - age)] = fa || fb;
    }
    ring_ = merged;
    head_ = 0;
    frames_ = n;
    visits_ = static_cast<int>(merged.count());
    activated_ = activated_ || other.activated_;
}

VisitWindow visit_and_activate(VisitWindow window, bool visited, double threshold) {
    window.push(visited, threshold);
    return window;
}

double Cell::distance() const {
    if (filled && hist.kernels().empty() && hist.mode_count() == 0) return 0.0;
    return hist.mean_distance();
}

int Cell::modes() const {
    if (filled && hist.kernels().empty() && hist.mode_count() == 0) return 1;
    return hist.mode_count();
}

ColorNeighborhood color_neighborhood(double z, const GridSpec& spec, const CameraIntrinsics& k) {
    ColorNeighborhood out;
    if (!(z > 0.0)) return out;
    out.rho = 0.5 * z * std::tan(k.fov_h / k.res_h);
    out.n = static_cast<int>(std::floor(out.rho * spec.color_side() / spec.cell_size));
    return out;
}

double color_weight(int du, int dv, int n, int color_res_log2, double alpha) {
    const double sigma = alpha * static_cast<double>(1 << color_res_log2);
    const double d2 = static_cast<double>(du * du + dv * dv);
    return std::exp(-d2 / (2.0 * sigma * sigma)) / (1.0 + 2.0 * n * n);
}

void color_update(const std::function<ColorGrid*(const CellKey&)>& grid_of, const GridSpec& spec,
                  double u, double v, const Rgb& c, int n, double alpha) {
    const int side = spec.color_side();
    const CellKey home = spec.cell_of(u, v);
    const Vec2 origin(home.i * spec.cell_size, home.j * spec.cell_size);
    double du = u;
    if (spec.u_period > 0.0) du -= spec.u_period * std::floor(u / spec.u_period);
    const int a0 = std::clamp(static_cast<int>(std::floor((du - origin.x()) / spec.cell_size * side)), 0, side - 1);
    const int b0 = std::clamp(static_cast<int>(std::floor((v - origin.y()) / spec.cell_size * side)), 0, side - 1);
    const long gu = static_cast<long>(home.i) * side + a0;
    const long gv = static_cast<long>(home.j) * side + b0;
    const int columns = spec.columns();

    for (int dv = -n; dv <= n; ++dv) {
        for (int dx = -n; dx <= n; ++dx) {
            const long pu = gu + dx;
            const long pv = gv + dv;
            auto floor_div = [](long a, long b) { return a >= 0 ? a / b : -((-a + b - 1) / b); };
            CellKey key{static_cast<int>(floor_div(pu, side)), static_cast<int>(floor_div(pv, side))};
            const int a = static_cast<int>(pu - static_cast<long>(key.i) * side);
            const int b = static_cast<int>(pv - static_cast<long>(key.j) * side);
            if (spec.u_period > 0.0 && columns > 0) {
                key.i = ((key.i - spec.i_lo()) % columns + columns) % columns + spec.i_lo();
            }
            ColorGrid* grid = grid_of(key);
            if (!grid || grid->empty()) continue;
            grid->fold(a, b, c, color_weight(dx, dv, n, spec.color_res_log2, alpha));
        }
    }
}

}  // namespace shapeproxy
