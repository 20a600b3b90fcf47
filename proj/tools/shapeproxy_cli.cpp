#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "shapeproxy/codec.hpp"
#include "shapeproxy/config.hpp"
#include "shapeproxy/io.hpp"
#include "shapeproxy/mesh.hpp"
#include "shapeproxy/pipeline.hpp"
#include "shapeproxy/process.hpp"
#include "shapeproxy/synth.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace shapeproxy;

namespace {

void emit(const json& record) { std::cout << record.dump() << '\n' << std::flush; }

/// Recorded dataset or synthetic scene behind one interface.
class FrameSource {
public:
    static FrameSource open(const std::string& dataset, const std::string& synth, int frames) {
        FrameSource s;
        if (!dataset.empty() && !synth.empty()) throw std::invalid_argument("use either --dataset or --synth");
        if (!dataset.empty()) {
            s.dataset_ = std::make_unique<Dataset>(dataset);
            s.count_ = s.dataset_->size();
        } else if (!synth.empty()) {
            if (synth == "room" && !fs::exists(synth)) s.scene_ = room_scene(frames > 0 ? frames : 100);
            else s.scene_ = load_scene(synth);
            if (frames >= 0) s.scene_->path.frames = frames;
            s.count_ = static_cast<std::size_t>(s.scene_->frames());
        } else {
            throw std::invalid_argument("an input is required: --dataset DIR or --synth SCENE");
        }
        if (frames >= 0) s.count_ = std::min(s.count_, static_cast<std::size_t>(frames));
        return s;
    }

    std::size_t size() const { return count_; }
    CameraIntrinsics intrinsics() const { return dataset_ ? dataset_->intrinsics() : scene_->intrinsics; }
    RgbdFrame load(std::size_t i) const {
        return dataset_ ? dataset_->load(i) : render(*scene_, static_cast<int>(i)).frame;
    }
    CameraPose pose(std::size_t i) const {
        return dataset_ ? dataset_->poses().at(i) : scene_->path.pose(static_cast<int>(i));
    }
    const SyntheticScene* scene() const { return scene_ ? &*scene_ : nullptr; }

private:
    std::unique_ptr<Dataset> dataset_;
    std::optional<SyntheticScene> scene_;
    std::size_t count_ = 0;
};

struct Common {
    std::string config_path;
    std::vector<std::string> overrides;
    std::uint64_t seed = 0;
    int threads = 0;
    bool seed_set = false;
    bool verbose = false;

    PipelineConfig build() const {
        PipelineConfig c;
        if (!config_path.empty()) load_config(c, config_path);
        apply_overrides(c, overrides);
        if (seed_set) c.seed = seed;
        if (threads > 0) c.threads = threads;
        return c;
    }
};

struct Input {
    std::string dataset;
    std::string synth;
    int frames = -1;

    void add_to(CLI::App* app) {
        app->add_option("--dataset", dataset, "Recorded dataset directory");
        app->add_option("--synth", synth, "Scene file, or 'room' for the built-in room");
        app->add_option("--frames", frames, "Limit the number of frames");
    }
};

json times_json(const StageTimes& t) {
    return {{"prefilter_ms", t.prefilter}, {"track_ms", t.track},       {"detect_ms", t.detect},
            {"update_ms", t.update},       {"processing_ms", t.processing}, {"total_ms", t.total}};
}

json summarize(std::vector<double> v) {
    if (v.empty()) return json::object();
    std::sort(v.begin(), v.end());
    double sum = 0.0;
    for (double x : v) sum += x;
    const auto at = [&](double q) {
        const auto i = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size()))) - 1;
        return v[std::min(i, v.size() - 1)];
    };
    const std::size_t n = v.size();
    const double median = n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    return {{"mean", sum / static_cast<double>(n)}, {"median", median}, {"p95", at(0.95)}};
}

struct RunOutputs {
    std::string mesh_dir;
    std::string archive;
    std::string enhanced_dir;
    std::string resample_path;
    int density = 2;
    bool fill = false;
    bool metrics = false;
    bool quiet_frames = false;
};

struct RunResult {
    std::vector<StageTimes> times;
    std::unique_ptr<Pipeline> pipeline;
};

RunResult run_stream(const FrameSource& source, const PipelineConfig& config, const RunOutputs& out) {
    RunResult rr;
    rr.pipeline = std::make_unique<Pipeline>(config, source.intrinsics());
    Pipeline& p = *rr.pipeline;
    for (std::size_t i = 0; i < source.size(); ++i) {
        const RgbdFrame frame = source.load(i);
        FrameResult r = p.process(frame);
        if (!out.enhanced_dir.empty()) {
            const auto t = std::chrono::steady_clock::now();
            RgbdFrame enhanced = p.filter(frame, r.marks);
            write_frame_images(out.enhanced_dir, enhanced, i);
            const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t).count();
            r.times.processing += ms;
            r.times.total += ms;
        }
        rr.times.push_back(r.times);
        spdlog::debug("frame {}: {} samples, {} residual, {} detected, {} merged, {} proxies, {:.1f} ms", i, r.samples,
                      r.residual, r.detected, r.merged, r.proxies, r.times.total);
        if (!out.quiet_frames) {
            json rec = {{"record", "frame"},       {"frame", i},         {"samples", r.samples},
                        {"residual", r.residual},  {"detected", r.detected}, {"merged", r.merged},
                        {"proxies", r.proxies}};
            rec.update(times_json(r.times));
            emit(rec);
        }
    }
    if (!out.enhanced_dir.empty()) {
        write_intrinsics(fs::path(out.enhanced_dir) / "intrinsics.txt", source.intrinsics());
        std::vector<CameraPose> poses;
        for (std::size_t i = 0; i < source.size(); ++i) poses.push_back(source.pose(i));
        write_poses(fs::path(out.enhanced_dir) / "poses.txt", poses);
    }
    if (out.fill) {
        const HoleFillReport h = fill_holes(p.state(), config.holes);
        emit({{"record", "fill_holes"}, {"extrapolated", h.extrapolated}, {"closed", h.closed}});
    }
    return rr;
}

json metrics_table(const SceneState& state, const FrameSource& source, std::size_t archive_bytes) {
    std::vector<double> psnr_values, frame_ratios;
    for (std::size_t i = 0; i < source.size(); ++i) {
        const RgbdFrame raw = source.load(i);
        const Image<double> rec = decompress_frame(state, state.intrinsics, raw.pose);
        try {
            const QualityMetrics q = psnr(raw.depth, rec);
            if (std::isfinite(q.psnr)) psnr_values.push_back(q.psnr);
        } catch (const std::domain_error&) {
        }
        frame_ratios.push_back(frame_ratio(state, state.intrinsics, raw.pose));
    }
    double psnr_mean = 0.0, ratio_mean = 0.0;
    for (double x : psnr_values) psnr_mean += x;
    for (double x : frame_ratios) ratio_mean += x;
    if (!psnr_values.empty()) psnr_mean /= static_cast<double>(psnr_values.size());
    if (!frame_ratios.empty()) ratio_mean /= static_cast<double>(frame_ratios.size());
    return {{"record", "metrics"},
            {"frames", source.size()},
            {"proxies", state.proxies.size()},
            {"archive_bytes", archive_bytes},
            {"scene_ratio", source.size() ? scene_ratio(source.size(), archive_bytes) : 0.0},
            {"frame_ratio", ratio_mean},
            {"psnr_db", psnr_mean},
            {"psnr_frames", psnr_values.size()}};
}

std::vector<CameraPose> poses_for(const std::string& poses_file, const Input& in) {
    if (!poses_file.empty()) return read_poses(poses_file);
    const FrameSource src = FrameSource::open(in.dataset, in.synth, in.frames);
    std::vector<CameraPose> poses;
    for (std::size_t i = 0; i < src.size(); ++i) poses.push_back(src.pose(i));
    return poses;
}

}  // namespace

int main(int argc, char** argv) {
    auto logger = spdlog::stderr_color_mt("shapeproxy");
    spdlog::set_default_logger(logger);

    CLI::App app{"Shape-proxy RGB-D stream engine"};
    app.require_subcommand(1);
    Common common;
    app.add_option("--config", common.config_path, "key = value configuration file");
    app.add_option("--set", common.overrides, "Override a configuration key (key=value)");
    auto* seed_opt = app.add_option("--seed", common.seed, "Random seed for detection");
    app.add_option("--threads", common.threads, "Worker threads (0 = default)");
    app.add_flag("-v,--verbose", common.verbose, "Debug logging");

    // run
    auto* run = app.add_subcommand("run", "Process a stream and write the enabled outputs");
    Input run_in;
    run_in.add_to(run);
    RunOutputs run_out;
    run->add_option("--mesh", run_out.mesh_dir, "Export textured meshes into this directory");
    run->add_option("--compress", run_out.archive, "Write the proxy archive");
    run->add_option("--enhance", run_out.enhanced_dir, "Write filtered frames in dataset layout");
    run->add_option("--resample", run_out.resample_path, "Write a resampled PLY point cloud");
    run->add_option("--density", run_out.density, "Resampling points per cell side")->check(CLI::PositiveNumber);
    run->add_flag("--fill-holes", run_out.fill, "Extrapolate and close holes before export");
    run->add_flag("--metrics", run_out.metrics, "Report PSNR and compression ratios");
    run->add_flag("--quiet-frames", run_out.quiet_frames, "Omit per-frame records");

    // synth
    auto* synth = app.add_subcommand("synth", "Render a synthetic scene to a dataset");
    std::string synth_scene = "room", synth_out;
    int synth_frames = -1;
    bool synth_labels = false;
    synth->add_option("--scene", synth_scene, "Scene file, or 'room'");
    synth->add_option("--out", synth_out, "Output dataset directory")->required();
    synth->add_option("--frames", synth_frames, "Number of frames");
    synth->add_flag("--labels", synth_labels, "Also write label images (labels/%06d.png)");

    // compress
    auto* compress = app.add_subcommand("compress", "Build proxies from a stream and write the archive");
    Input comp_in;
    comp_in.add_to(compress);
    std::string comp_out;
    bool comp_fill = false;
    compress->add_option("--out", comp_out, "Archive path")->required();
    compress->add_flag("--fill-holes", comp_fill, "Fill holes before encoding");

    // decompress
    auto* decompress = app.add_subcommand("decompress", "Re-synthesize a depth map from an archive");
    std::string dec_archive, dec_out, dec_poses;
    Input dec_in;
    int dec_frame = 0;
    decompress->add_option("--archive", dec_archive, "Archive path")->required();
    decompress->add_option("--frame", dec_frame, "Frame index")->required();
    decompress->add_option("--out", dec_out, "16-bit depth PNG to write")->required();
    decompress->add_option("--poses", dec_poses, "poses.txt with the camera path");
    dec_in.add_to(decompress);

    // mesh
    auto* mesh = app.add_subcommand("mesh", "Export textured meshes from an archive");
    std::string mesh_archive, mesh_dir, mesh_stem = "scene";
    mesh->add_option("--archive", mesh_archive, "Archive path")->required();
    mesh->add_option("--out", mesh_dir, "Output directory")->required();
    mesh->add_option("--stem", mesh_stem, "Base name of the OBJ and MTL files");

    // metrics
    auto* metrics = app.add_subcommand("metrics", "PSNR and compression ratios of an archive against a stream");
    std::string met_archive;
    Input met_in;
    metrics->add_option("--archive", met_archive, "Archive path")->required();
    met_in.add_to(metrics);

    // bench
    auto* bench = app.add_subcommand("bench", "Per-stage timing statistics");
    Input bench_in;
    bench_in.add_to(bench);

    CLI11_PARSE(app, argc, argv);
    common.seed_set = seed_opt->count() > 0;
    spdlog::set_level(common.verbose ? spdlog::level::debug : spdlog::level::info);

    try {
        const PipelineConfig config = common.build();

        if (*run) {
            const FrameSource src = FrameSource::open(run_in.dataset, run_in.synth, run_in.frames);
            spdlog::info("processing {} frames", src.size());
            RunResult rr = run_stream(src, config, run_out);
            const SceneState& state = rr.pipeline->state();
            std::vector<std::uint8_t> archive;
            if (!run_out.archive.empty() || run_out.metrics) archive = encode(state);
            if (!run_out.archive.empty()) {
                write_file(run_out.archive, archive);
                emit({{"record", "archive"}, {"path", run_out.archive}, {"bytes", archive.size()}});
            }
            if (!run_out.mesh_dir.empty()) {
                const ExportReport rep = export_scene(state, run_out.mesh_dir);
                emit({{"record", "mesh"}, {"obj", rep.obj.string()}, {"vertices", rep.vertices},
                      {"faces", rep.faces}, {"textures", rep.textures.size()}, {"mesh_ms", rep.mesh_ms}});
            }
            if (!run_out.resample_path.empty()) {
                const OrientedPointCloud cloud = resample(state, run_out.density);
                write_point_cloud(run_out.resample_path, cloud);
                emit({{"record", "resample"}, {"path", run_out.resample_path}, {"points", cloud.size()}});
            }
            if (run_out.metrics) emit(metrics_table(state, src, archive.size()));
            if (const SyntheticScene* scene = src.scene()) {
                std::vector<int> frames;
                for (std::size_t i = 0; i < src.size(); i += std::max<std::size_t>(1, src.size() / 5))
                    frames.push_back(static_cast<int>(i));
                for (const ShapeReport& r : evaluate(state, *scene, frames))
                    emit({{"record", "shape"},          {"shape", r.shape_id},
                          {"kind", std::string(to_string(r.kind))}, {"detected", r.detected},
                          {"proxy", r.proxy_id},        {"normal_error_deg", r.normal_error * 180.0 / M_PI},
                          {"center_error", r.center_error}, {"radius_error", r.radius_error},
                          {"coverage", r.coverage},     {"depth_rmse", r.depth_rmse}});
            }
            std::vector<double> totals;
            for (const auto& t : rr.times) totals.push_back(t.total);
            emit({{"record", "summary"}, {"frames", src.size()}, {"proxies", state.proxies.size()},
                  {"frame_ms", summarize(totals)}});
        } else if (*synth) {
            SyntheticScene scene = synth_scene == "room" && !fs::exists(synth_scene)
                                       ? room_scene(synth_frames > 0 ? synth_frames : 100)
                                       : load_scene(synth_scene);
            if (synth_frames >= 0) scene.path.frames = synth_frames;
            std::vector<RgbdFrame> frames;
            const fs::path root = synth_out;
            for (int i = 0; i < scene.frames(); ++i) {
                RenderedFrame r = render(scene, i);
                if (synth_labels) {
                    Image<std::uint16_t> labels(r.labels.width(), r.labels.height());
                    for (std::size_t k = 0; k < labels.size(); ++k)
                        labels[k] = static_cast<std::uint16_t>(std::min<std::uint32_t>(r.labels[k], 65535u));
                    char name[32];
                    std::snprintf(name, sizeof(name), "%06d.png", i);
                    fs::create_directories(root / "labels");
                    write_png16(root / "labels" / name, labels);
                }
                frames.push_back(std::move(r.frame));
            }
            write_dataset(root, frames);
            emit({{"record", "synth"}, {"path", root.string()}, {"frames", frames.size()},
                  {"shapes", scene.shapes.size()}});
        } else if (*compress) {
            const FrameSource src = FrameSource::open(comp_in.dataset, comp_in.synth, comp_in.frames);
            RunOutputs out;
            out.fill = comp_fill;
            out.quiet_frames = true;
            RunResult rr = run_stream(src, config, out);
            const auto bytes = encode(rr.pipeline->state());
            write_file(comp_out, bytes);
            emit({{"record", "archive"}, {"path", comp_out}, {"bytes", bytes.size()},
                  {"frames", src.size()}, {"proxies", rr.pipeline->state().proxies.size()},
                  {"scene_ratio", src.size() ? scene_ratio(src.size(), bytes.size()) : 0.0}});
        } else if (*decompress) {
            const SceneState state = decode(read_file(dec_archive));
            const auto poses = poses_for(dec_poses, dec_in);
            if (dec_frame < 0 || static_cast<std::size_t>(dec_frame) >= poses.size())
                throw std::out_of_range("frame " + std::to_string(dec_frame) + " is outside the camera path");
            const Image<double> depth = decompress_frame(state, state.intrinsics, poses[dec_frame]);
            write_png16(dec_out, quantize_depth(depth, state.intrinsics.depth_scale));
            std::size_t covered = 0;
            for (double z : depth.pixels()) covered += z > 0.0;
            emit({{"record", "decompress"}, {"frame", dec_frame}, {"path", dec_out}, {"covered_pixels", covered}});
        } else if (*mesh) {
            const SceneState state = decode(read_file(mesh_archive));
            const ExportReport rep = export_scene(state, mesh_dir, mesh_stem);
            emit({{"record", "mesh"}, {"obj", rep.obj.string()}, {"mtl", rep.mtl.string()},
                  {"vertices", rep.vertices}, {"faces", rep.faces}, {"textures", rep.textures.size()},
                  {"mesh_ms", rep.mesh_ms}});
        } else if (*metrics) {
            const auto bytes = read_file(met_archive);
            const SceneState state = decode(bytes);
            const FrameSource src = FrameSource::open(met_in.dataset, met_in.synth, met_in.frames);
            emit(metrics_table(state, src, bytes.size()));
        } else if (*bench) {
            const FrameSource src = FrameSource::open(bench_in.dataset, bench_in.synth, bench_in.frames);
            RunOutputs out;
            out.quiet_frames = true;
            const RunResult rr = run_stream(src, config, out);
            std::vector<double> pre, trk, det, upd, proc, tot;
            for (const auto& t : rr.times) {
                pre.push_back(t.prefilter);
                trk.push_back(t.track);
                det.push_back(t.detect);
                upd.push_back(t.update);
                proc.push_back(t.processing);
                tot.push_back(t.total);
            }
            emit({{"record", "bench"},
                  {"frames", src.size()},
                  {"resolution", {src.intrinsics().res_h, src.intrinsics().res_v}},
                  {"proxies", rr.pipeline->state().proxies.size()},
                  {"prefilter_ms", summarize(pre)},
                  {"track_ms", summarize(trk)},
                  {"detect_ms", summarize(det)},
                  {"update_ms", summarize(upd)},
                  {"processing_ms", summarize(proc)},
                  {"total_ms", summarize(tot)}});
        }
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return 1;
    }
    return 0;
}
