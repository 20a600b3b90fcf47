#pragma once

#include <cassert>
#include <cstdint>
#include <span>
#include <vector>

namespace shapeproxy {

struct Rgb {
    std::uint8_t r = 0;
    std::uint8_t g = 0;
    std::uint8_t b = 0;

    friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// Row-major 2D raster. Indexed as (row, col).
template <typename T>
class Image {
public:
    Image() = default;
    Image(int width, int height, T fill = T{})
        : width_(width), height_(height),
          data_(static_cast<std::size_t>(width) * height, fill) {}

    int width() const { return width_; }
    int height() const { return height_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    bool contains(int row, int col) const {
        return row >= 0 && col >= 0 && row < height_ && col < width_;
    }

    T& operator()(int row, int col) {
        assert(contains(row, col));
        return data_[static_cast<std::size_t>(row) * width_ + col];
    }
    const T& operator()(int row, int col) const {
        assert(contains(row, col));
        return data_[static_cast<std::size_t>(row) * width_ + col];
    }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    std::span<T> pixels() & { return data_; }
    std::span<const T> pixels() const& { return data_; }
    void pixels() && = delete;

    friend bool operator==(const Image&, const Image&) = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<T> data_;
};

}  // namespace shapeproxy
