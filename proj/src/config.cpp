#include "shapeproxy/config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>

namespace shapeproxy {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

struct Entry {
    std::string key;
    std::function<void(PipelineConfig&, const std::string&)> set;
    std::function<std::string(const PipelineConfig&)> get;
};

double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const double x = std::stod(value, &used);
        if (used == value.size() && std::isfinite(x)) return x;
    } catch (const std::exception&) {
    }
    throw ConfigError("invalid number for " + key + ": '" + value + "'");
}

long parse_long(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const long x = std::stol(value, &used);
        if (used == value.size()) return x;
    } catch (const std::exception&) {
    }
    throw ConfigError("invalid integer for " + key + ": '" + value + "'");
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "1" || value == "true" || value == "on" || value == "yes") return true;
    if (value == "0" || value == "false" || value == "off" || value == "no") return false;
    throw ConfigError("invalid boolean for " + key + ": '" + value + "'");
}

std::string show(double x) {
    std::ostringstream os;
    os.precision(10);
    os << x;
    return os.str();
}

// Accessors that write the same value into every module that carries it.
Entry real(std::string key, std::function<void(PipelineConfig&, double)> set,
           std::function<double(const PipelineConfig&)> get, double scale = 1.0) {
    return {key,
            [=](PipelineConfig& c, const std::string& v) { set(c, parse_double(key, v) * scale); },
            [=](const PipelineConfig& c) { return show(get(c) / scale); }};
}

Entry integer(std::string key, std::function<void(PipelineConfig&, long)> set,
              std::function<long(const PipelineConfig&)> get) {
    return {key,
            [=](PipelineConfig& c, const std::string& v) { set(c, parse_long(key, v)); },
            [=](const PipelineConfig& c) { return std::to_string(get(c)); }};
}

Entry boolean(std::string key, std::function<void(PipelineConfig&, bool)> set,
              std::function<bool(const PipelineConfig&)> get) {
    return {key,
            [=](PipelineConfig& c, const std::string& v) { set(c, parse_bool(key, v)); },
            [=](const PipelineConfig& c) { return std::string(get(c) ? "true" : "false"); }};
}

const std::vector<Entry>& table() {
    static const std::vector<Entry> entries = {
        integer("seed", [](auto& c, long v) { c.seed = static_cast<std::uint64_t>(v); },
                [](const auto& c) { return static_cast<long>(c.seed); }),
        integer("threads", [](auto& c, long v) { c.threads = static_cast<int>(v); },
                [](const auto& c) { return static_cast<long>(c.threads); }),

        boolean("prefilter", [](auto& c, bool v) { c.prefilter = v; }, [](const auto& c) { return c.prefilter; }),
        real("prefilter_sigma", [](auto& c, double v) { c.prefilter_sigma = v; },
             [](const auto& c) { return c.prefilter_sigma; }),
        real("prefilter_range", [](auto& c, double v) { c.prefilter_range = v; },
             [](const auto& c) { return c.prefilter_range; }),
        real("max_depth_jump", [](auto& c, double v) { c.max_depth_jump = v; },
             [](const auto& c) { return c.max_depth_jump; }),

        real("noise_base",
             [](auto& c, double v) { c.proxy.inlier.noise.base = c.detection.inlier.noise.base = c.filter.noise.base = v; },
             [](const auto& c) { return c.proxy.inlier.noise.base; }),
        real("noise_scale",
             [](auto& c, double v) { c.proxy.inlier.noise.scale = c.detection.inlier.noise.scale = c.filter.noise.scale = v; },
             [](const auto& c) { return c.proxy.inlier.noise.scale; }),
        real("noise_vertex",
             [](auto& c, double v) { c.proxy.inlier.noise.vertex = c.detection.inlier.noise.vertex = c.filter.noise.vertex = v; },
             [](const auto& c) { return c.proxy.inlier.noise.vertex; }),
        real("dist_epsilon", [](auto& c, double v) { c.proxy.inlier.dist_epsilon = c.detection.inlier.dist_epsilon = v; },
             [](const auto& c) { return c.proxy.inlier.dist_epsilon; }),
        real("normal_epsilon_deg",
             [](auto& c, double v) { c.proxy.inlier.normal_epsilon = c.detection.inlier.normal_epsilon = v; },
             [](const auto& c) { return c.proxy.inlier.normal_epsilon; }, kDeg),
        boolean("noise_modulation",
                [](auto& c, bool v) { c.proxy.inlier.modulate_by_noise = c.detection.inlier.modulate_by_noise = v; },
                [](const auto& c) { return c.proxy.inlier.modulate_by_noise; }),
        real("noise_factor", [](auto& c, double v) { c.proxy.inlier.noise_factor = c.detection.inlier.noise_factor = v; },
             [](const auto& c) { return c.proxy.inlier.noise_factor; }),

        real("min_inlier_fraction",
             [](auto& c, double v) { c.detection.min_inlier_fraction = c.residual_fraction = v; },
             [](const auto& c) { return c.residual_fraction; }),
        real("success_probability", [](auto& c, double v) { c.detection.success_probability = v; },
             [](const auto& c) { return c.detection.success_probability; }),
        integer("subset_count", [](auto& c, long v) { c.detection.subset_count = static_cast<std::size_t>(v); },
                [](const auto& c) { return static_cast<long>(c.detection.subset_count); }),
        integer("candidates_per_round", [](auto& c, long v) { c.detection.candidates_per_round = static_cast<int>(v); },
                [](const auto& c) { return static_cast<long>(c.detection.candidates_per_round); }),
        integer("octree_levels", [](auto& c, long v) { c.detection.octree_levels = static_cast<int>(v); },
                [](const auto& c) { return static_cast<long>(c.detection.octree_levels); }),
        integer("max_candidates", [](auto& c, long v) { c.detection.max_candidates = static_cast<std::size_t>(v); },
                [](const auto& c) { return static_cast<long>(c.detection.max_candidates); }),
        real("min_radius", [](auto& c, double v) { c.detection.min_radius = v; },
             [](const auto& c) { return c.detection.min_radius; }),
        real("max_radius", [](auto& c, double v) { c.detection.max_radius = v; },
             [](const auto& c) { return c.detection.max_radius; }),
        boolean("detect_planes", [](auto& c, bool v) { c.detection.planes = v; },
                [](const auto& c) { return c.detection.planes; }),
        boolean("detect_cylinders", [](auto& c, bool v) { c.detection.cylinders = v; },
                [](const auto& c) { return c.detection.cylinders; }),
        boolean("detect_spheres", [](auto& c, bool v) { c.detection.spheres = v; },
                [](const auto& c) { return c.detection.spheres; }),
        integer("manhattan_warmup", [](auto& c, long v) { c.manhattan_warmup = static_cast<int>(v); },
                [](const auto& c) { return static_cast<long>(c.manhattan_warmup); }),

        real("cell_size", [](auto& c, double v) { c.proxy.cell_size = v; }, [](const auto& c) { return c.proxy.cell_size; }),
        integer("color_res_log2", [](auto& c, long v) { c.proxy.color_res_log2 = static_cast<int>(v); },
                [](const auto& c) { return static_cast<long>(c.proxy.color_res_log2); }),
        integer("keep_threshold", [](auto& c, long v) { c.proxy.keep_threshold = static_cast<int>(v); },
                [](const auto& c) { return static_cast<long>(c.proxy.keep_threshold); }),
        integer("purge_after", [](auto& c, long v) { c.proxy.purge_after = static_cast<int>(v); },
                [](const auto& c) { return static_cast<long>(c.proxy.purge_after); }),
        integer("veteran_after", [](auto& c, long v) { c.proxy.veteran_after = static_cast<int>(v); },
                [](const auto& c) { return static_cast<long>(c.proxy.veteran_after); }),
        real("visit_threshold", [](auto& c, double v) { c.proxy.visit_threshold = v; },
             [](const auto& c) { return c.proxy.visit_threshold; }),
        real("slh_merge_width", [](auto& c, double v) { c.proxy.slh_merge_width = v; },
             [](const auto& c) { return c.proxy.slh_merge_width; }),
        real("slh_min_sigma", [](auto& c, double v) { c.proxy.slh_min_sigma = v; },
             [](const auto& c) { return c.proxy.slh_min_sigma; }),
        real("color_alpha", [](auto& c, double v) { c.proxy.color_alpha = v; },
             [](const auto& c) { return c.proxy.color_alpha; }),
        real("merge_angle_deg", [](auto& c, double v) { c.proxy.merge_angle = v; },
             [](const auto& c) { return c.proxy.merge_angle; }, kDeg),
        real("merge_offset", [](auto& c, double v) { c.proxy.merge_offset = v; },
             [](const auto& c) { return c.proxy.merge_offset; }),
        real("merge_radius", [](auto& c, double v) { c.proxy.merge_radius = v; },
             [](const auto& c) { return c.proxy.merge_radius; }),
        real("merge_bounds_margin", [](auto& c, double v) { c.proxy.merge_bounds_margin = v; },
             [](const auto& c) { return c.proxy.merge_bounds_margin; }),
        real("occlusion_margin", [](auto& c, double v) { c.proxy.occlusion_margin = v; },
             [](const auto& c) { return c.proxy.occlusion_margin; }),
        integer("refit_samples", [](auto& c, long v) { c.proxy.refit_samples = static_cast<std::size_t>(v); },
                [](const auto& c) { return static_cast<long>(c.proxy.refit_samples); }),
        boolean("merge", [](auto& c, bool v) { c.merge = v; }, [](const auto& c) { return c.merge; }),

        boolean("cross_bilateral", [](auto& c, bool v) { c.filter.cross_bilateral = v; },
                [](const auto& c) { return c.filter.cross_bilateral; }),
        real("cross_sigma", [](auto& c, double v) { c.filter.cross_sigma = v; },
             [](const auto& c) { return c.filter.cross_sigma; }),

        boolean("extrapolate", [](auto& c, bool v) { c.holes.extrapolate = v; },
                [](const auto& c) { return c.holes.extrapolate; }),
        real("min_dihedral_deg", [](auto& c, double v) { c.holes.min_dihedral = v; },
             [](const auto& c) { return c.holes.min_dihedral; }, kDeg),
        real("max_dihedral_deg", [](auto& c, double v) { c.holes.max_dihedral = v; },
             [](const auto& c) { return c.holes.max_dihedral; }, kDeg),
        real("max_gap", [](auto& c, double v) { c.holes.max_gap = v; }, [](const auto& c) { return c.holes.max_gap; }),
        integer("closing_size", [](auto& c, long v) { c.holes.closing_size = static_cast<int>(v); },
                [](const auto& c) { return static_cast<long>(c.holes.closing_size); }),
    };
    return entries;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

void apply_setting(PipelineConfig& config, const std::string& key, const std::string& value) {
    for (const auto& e : table())
        if (e.key == key) {
            e.set(config, trim(value));
            return;
        }
    throw ConfigError("unknown config key '" + key + "'");
}

void load_config(PipelineConfig& config, const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
        try {
            apply_setting(config, trim(line.substr(0, eq)), line.substr(eq + 1));
        } catch (const ConfigError& e) {
            throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
}

void apply_overrides(PipelineConfig& config, const std::vector<std::string>& overrides) {
    for (const auto& o : overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos) throw ConfigError("override '" + o + "' is not key=value");
        apply_setting(config, trim(o.substr(0, eq)), o.substr(eq + 1));
    }
}

std::string dump_config(const PipelineConfig& config) {
    std::string out;
    for (const auto& e : table()) out += e.key + " = " + e.get(config) + "\n";
    return out;
}

std::vector<std::string> config_keys() {
    std::vector<std::string> keys;
    for (const auto& e : table()) keys.push_back(e.key);
    return keys;
}

}  // namespace shapeproxy
