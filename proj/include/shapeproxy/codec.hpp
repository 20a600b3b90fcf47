#pragma once

#include <cstdint>
#include <limits>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "shapeproxy/frame.hpp"
#include "shapeproxy/proxy.hpp"

namespace shapeproxy {

/// Malformed archive. `offset` is the byte position in the file where decoding
/// stopped; payload positions are reported after the header.
class DecodeError : public std::runtime_error {
public:
    DecodeError(const std::string& what, std::size_t offset)
        : std::runtime_error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}
    std::size_t offset() const { return offset_; }

private:
    std::size_t offset_;
};

constexpr std::uint16_t kArchiveVersion = 1;
constexpr std::size_t kArchiveHeaderSize = 16;
constexpr double kDistanceStep = 0.0005;  // d_c quantization, meters
/// 320 x 240 16-bit depth map.
constexpr std::size_t kRawFrameBytes = 320 * 240 * 2;

struct EncodeOptions {
    bool deflate = true;
    /// Restrict the archive to these proxy ids (empty = all).
    std::set<std::uint32_t> only;
};

/// Serializes the emitting cells of every proxy. Deterministic for a given state.
std::vector<std::uint8_t> encode(const SceneState& state, const EncodeOptions& options = {});
/// Inverse of encode; cells carry only (d_c, m_c), colors and activation.
SceneState decode(const std::vector<std::uint8_t>& bytes);

/// Ray casts every proxy; the nearest hit on an emitting cell gives the depth,
/// offset by d_c along the normal for unimodal cells. 0 where nothing is hit.
Image<double> decompress_frame(const SceneState& state, const CameraIntrinsics& intrinsics,
                               const CameraPose& pose);

/// Proxy id seen at each pixel by decompress_frame (0 = none).
Image<std::uint32_t> visible_proxies(const SceneState& state, const CameraIntrinsics& intrinsics,
                                     const CameraPose& pose);

struct QualityMetrics {
    double psnr = 0.0;  // dB, +inf when identical
    double rmse = 0.0;  // meters
    std::size_t count = 0;
};

/// PSNR over pixels valid in both maps (and in `mask` when given).
/// Throws std::domain_error when no pixel qualifies.
QualityMetrics psnr(const Image<double>& raw, const Image<double>& reconstructed, double peak = 8.0,
                    const Image<std::uint8_t>* mask = nullptr);

double scene_ratio(std::size_t frames, std::size_t archive_bytes, std::size_t raw_frame_bytes = kRawFrameBytes);
/// Raw frame size over the archive restricted to proxies visible from `pose`.
double frame_ratio(const SceneState& state, const CameraIntrinsics& intrinsics, const CameraPose& pose,
                   std::size_t raw_frame_bytes = kRawFrameBytes);

}  // namespace shapeproxy
