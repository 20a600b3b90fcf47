#pragma once

#include <cstdint>
#include <vector>

#include "shapeproxy/detect.hpp"
#include "shapeproxy/frame.hpp"
#include "shapeproxy/process.hpp"
#include "shapeproxy/proxy.hpp"

namespace shapeproxy {

struct PipelineConfig {
    ProxyParams proxy;
    DetectionParams detection;
    FilterParams filter;
    HoleFillParams holes;
    bool prefilter = true;
    double prefilter_sigma = 2.0;   // pixels
    double prefilter_range = 0.20;  // meters
    double max_depth_jump = 0.10;   // meters, normal estimation
    /// Detection runs on the residual once it holds this fraction of the valid samples.
    double residual_fraction = 0.025;
    int manhattan_warmup = 10;  // frames allowed to find a floor and a wall
    bool merge = true;
    std::uint64_t seed = 0;
    int threads = 0;  // 0 keeps the OpenMP default
};

/// Wall time per stage in milliseconds.
struct StageTimes {
    double prefilter = 0.0;
    double track = 0.0;
    double detect = 0.0;
    double update = 0.0;
    double processing = 0.0;
    double total = 0.0;
};

struct FrameResult {
    InlierMarks marks;  // proxy id per pixel after the frame
    StageTimes times;
    std::size_t samples = 0;
    std::size_t residual = 0;
    std::size_t detected = 0;
    int merged = 0;
    std::size_t proxies = 0;
};

/// Causal per-frame driver: prefilter, normals, track, update, detect on the
/// residual, register, merge, visits, lifecycle.
class Pipeline {
public:
    Pipeline(PipelineConfig config, const CameraIntrinsics& intrinsics);

    FrameResult process(const RgbdFrame& frame);

    const SceneState& state() const { return state_; }
    SceneState& state() { return state_; }
    const PipelineConfig& config() const { return config_; }

    /// Proxy-based enhancement of a frame already passed to process().
    RgbdFrame filter(const RgbdFrame& frame, const InlierMarks& marks) const;

private:
    PipelineConfig config_;
    SceneState state_;
    int frames_ = 0;
    Vec3 up_hint_ = Vec3::UnitZ();
};

/// Runs the pipeline over a static-camera or posed sequence and returns each
/// frame filtered against the statistics accumulated up to it.
std::vector<RgbdFrame> deflicker(const std::vector<RgbdFrame>& frames, const PipelineConfig& config = {});

/// Proxy id owning each pixel, from the current proxies and inlier criteria.
InlierMarks mark_inliers(const SceneState& state, const RgbdFrame& frame, const ProxyParams& params,
                         double max_depth_jump = 0.10);

}  // namespace shapeproxy
