#include "shapeproxy/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <set>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace shapeproxy {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t).count();
}

std::uint64_t frame_seed(std::uint64_t seed, int frame) {
    std::uint64_t x = seed ^ (0x9E3779B97F4A7C15ull * static_cast<std::uint64_t>(frame + 1));
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

InlierMarks marks_from(const SceneState& state, const WorldSamples& samples, const ProxyParams& params,
                       const CameraIntrinsics& k) {
    InlierMarks marks(k.res_h, k.res_v, 0u);
    const TrackResult t = track(state, samples, params);
    for (std::size_t i = 0; i < samples.size(); ++i)
        if (t.owner[i] >= 0 && samples.pixel_of[i] >= 0)
            marks[static_cast<std::size_t>(samples.pixel_of[i])] = state.proxies[t.owner[i]].id;
    return marks;
}

}  // namespace

Pipeline::Pipeline(PipelineConfig config, const CameraIntrinsics& intrinsics) : config_(std::move(config)) {
    intrinsics.validate();
    config_.detection.validate();
    state_.intrinsics = intrinsics;
#ifdef _OPENMP
    if (config_.threads > 0) omp_set_num_threads(config_.threads);
#endif
}

FrameResult Pipeline::process(const RgbdFrame& frame) {
    frame.validate();
    if (frame.intrinsics != state_.intrinsics) throw std::invalid_argument("frame intrinsics differ from the stream");
    FrameResult result;
    const auto start = Clock::now();
    const ProxyParams& params = config_.proxy;
    const int index = frames_;
    state_.frame_index = index;
    if (frames_ == 0) up_hint_ = -(frame.pose.rotation * Vec3::UnitY());

    auto t = Clock::now();
    const RgbdFrame work = config_.prefilter
                               ? bilateral_prefilter(frame, config_.prefilter_sigma, config_.prefilter_range)
                               : frame;
    const OrientedPointCloud cloud = estimate_normals(work, config_.max_depth_jump);
    const WorldSamples samples = WorldSamples::from_cloud(cloud, frame.pose);
    result.samples = samples.size();
    result.times.prefilter = ms_since(t);

    t = Clock::now();
    const TrackResult tracked = track(state_, samples, params);
    result.times.track = ms_since(t);

    t = Clock::now();
    std::vector<std::vector<std::size_t>> voters(state_.proxies.size());
    std::vector<std::size_t> residual;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (tracked.owner[i] >= 0) voters[tracked.owner[i]].push_back(i);
        else residual.push_back(i);
    }
    std::set<std::uint32_t> supported;
    for (std::size_t k = 0; k < state_.proxies.size(); ++k) {
        if (!tracked.supported[k]) continue;
        update_proxy(state_.proxies[k], samples, voters[k], frame.pose, state_, params, index);
        supported.insert(state_.proxies[k].id);
    }
    result.times.update = ms_since(t);
    result.residual = residual.size();

    t = Clock::now();
    const double needed = config_.residual_fraction * static_cast<double>(samples.size());
    if (residual.size() >= 3 && static_cast<double>(residual.size()) >= needed) {
        OrientedPointCloud rest;
        rest.reserve(residual.size());
        for (std::size_t i : residual)
            rest.push_back(cloud.positions[i], cloud.normals[i], cloud.colors[i], cloud.pixel_of[i]);
        DetectionParams dp = config_.detection;
        dp.min_inliers = std::max<std::size_t>(3, static_cast<std::size_t>(std::ceil(needed)));
        dp.seed = frame_seed(config_.seed, index);
        std::vector<DetectedShape> found = detect_shapes(rest, dp);
        for (auto& d : found) {
            d.shape = d.shape.transformed(frame.pose);
            for (auto& i : d.inliers) i = residual[i];
        }
        result.detected = found.size();

        if (state_.manhattan.fallback && frames_ < config_.manhattan_warmup) {
            std::vector<DetectedShape> planes;
            for (const auto& p : state_.proxies)
                if (p.shape.kind == ShapeKind::Plane)
                    planes.push_back({p.shape, std::vector<std::size_t>(static_cast<std::size_t>(std::max(p.last_votes, 1)))});
            for (const auto& d : found)
                if (d.shape.kind == ShapeKind::Plane) planes.push_back(d);
            state_.manhattan = manhattan_from_planes(planes, up_hint_);
        }
        for (const auto& d : found) {
            Proxy p = register_candidate(state_, d.shape, samples, d.inliers, frame.pose, params);
            supported.insert(p.id);
            state_.proxies.push_back(std::move(p));
        }
    }
    result.times.detect = ms_since(t);

    t = Clock::now();
    if (config_.merge) result.merged = merge_similar(state_, params);
    for (auto& p : state_.proxies) update_visits(p, frame, params, index);
    std::vector<bool> flags(state_.proxies.size());
    for (std::size_t k = 0; k < flags.size(); ++k) flags[k] = supported.count(state_.proxies[k].id) > 0;
    lifecycle_step(state_, flags, params);
    result.times.update += ms_since(t);

    t = Clock::now();
    result.marks = marks_from(state_, samples, params, state_.intrinsics);
    result.times.processing = ms_since(t);

    result.proxies = state_.proxies.size();
    result.times.total = ms_since(start);
    ++frames_;
    return result;
}

RgbdFrame Pipeline::filter(const RgbdFrame& frame, const InlierMarks& marks) const {
    RgbdFrame out = filter_frame(frame, state_, marks, config_.filter);
    if (config_.filter.cross_bilateral) out = cross_bilateral(out, marks, config_.filter.cross_sigma);
    return out;
}

std::vector<RgbdFrame> deflicker(const std::vector<RgbdFrame>& frames, const PipelineConfig& config) {
    std::vector<RgbdFrame> out;
    if (frames.empty()) return out;
    out.reserve(frames.size());
    Pipeline pipeline(config, frames.front().intrinsics);
    for (const auto& f : frames) {
        const FrameResult r = pipeline.process(f);
        out.push_back(pipeline.filter(f, r.marks));
    }
    return out;
}

InlierMarks mark_inliers(const SceneState& state, const RgbdFrame& frame, const ProxyParams& params,
                         double max_depth_jump) {
    const WorldSamples samples = WorldSamples::from_cloud(estimate_normals(frame, max_depth_jump), frame.pose);
    return marks_from(state, samples, params, frame.intrinsics);
}

}  // namespace shapeproxy
