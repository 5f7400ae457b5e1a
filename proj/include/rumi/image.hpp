#pragma once

#include <cstddef>
#include <vector>

#include "rumi/errors.hpp"

namespace rumi::img {

enum class Interp { Bilinear, Nearest };

// One decoded frame. Pixels are row-major, channels interleaved
// ([y][x][c]), every value in [0, 1]. 8-bit integers exist only at file
// boundaries; all transforms work on the normalized values.
struct Frame {
    int width = 0;
    int height = 0;
    int channels = 1;  // 1 = gray, 3 = RGB
    std::vector<double> pixels;

    Frame() = default;
    Frame(int w, int h, int c);
    static Frame filled(int w, int h, int c, double value);

    std::size_t size() const { return pixels.size(); }
    bool same_shape(const Frame& o) const {
        return width == o.width && height == o.height && channels == o.channels;
    }

    double at(int x, int y, int c) const {
        return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    double& at(int x, int y, int c) {
        return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
};

struct CropRect {
    int x = 0;
    int y = 0;
    int w = 0;
    int h = 0;
};

// Extracts the rectangle r; output pixel (i,j) = input pixel (r.x+i, r.y+j).
Frame crop(const Frame& f, const CropRect& r);

// Corner-aligned resampling; bilinear by default, nearest-neighbor for
// oracle tests. Output values stay in [0, 1].
Frame resize(const Frame& f, int out_w, int out_h, Interp interp = Interp::Bilinear);

// p -> clamp(p * factor, 0, 1). factor must be positive.
Frame adjust_brightness(const Frame& f, double factor);

// p -> 1 - p.
Frame negative(const Frame& f);

// p -> p^gamma. gamma must be positive; gamma < 1 brightens.
Frame gamma_correct(const Frame& f, double gamma);

}  // namespace rumi::img
