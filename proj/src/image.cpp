#include "rumi/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rumi/kernels.hpp"

namespace rumi::img {

namespace {

void check_channels(int c) {
    if (c != 1 && c != 3) {
        throw ParamError("channel count must be 1 or 3, got " + std::to_string(c));
    }
}

}  // namespace

Frame::Frame(int w, int h, int c) : width(w), height(h), channels(c) {
    if (w < 1 || h < 1) {
        throw ParamError("frame dimensions must be positive, got " + std::to_string(w) + "x" +
                         std::to_string(h));
    }
    check_channels(c);
    pixels.assign(static_cast<std::size_t>(w) * h * c, 0.0);
}

Frame Frame::filled(int w, int h, int c, double value) {
    Frame f(w, h, c);
    for (auto& p : f.pixels) p = value;
    return f;
}

Frame crop(const Frame& f, const CropRect& r) {
    if (r.w < 1 || r.h < 1) {
        throw BoundsError("crop extent must be at least 1x1");
    }
    if (r.x < 0 || r.y < 0 || r.x + r.w > f.width || r.y + r.h > f.height) {
        throw BoundsError("crop rect (" + std::to_string(r.x) + "," + std::to_string(r.y) + "," +
                          std::to_string(r.w) + "," + std::to_string(r.h) +
                          ") exceeds frame " + std::to_string(f.width) + "x" +
                          std::to_string(f.height));
    }
    Frame out(r.w, r.h, f.channels);
    const std::size_t row_bytes = static_cast<std::size_t>(r.w) * f.channels;
    for (int j = 0; j < r.h; ++j) {
        const double* src = &f.pixels[(static_cast<std::size_t>(r.y + j) * f.width + r.x) * f.channels];
        double* dst = &out.pixels[static_cast<std::size_t>(j) * row_bytes];
        std::copy(src, src + row_bytes, dst);
    }
    return out;
}

Frame resize(const Frame& f, int out_w, int out_h, Interp interp) {
    if (out_w < 1 || out_h < 1) {
        throw ParamError("resize target must be at least 1x1");
    }
    if (out_w == f.width && out_h == f.height) {
        return f;
    }
    Frame out(out_w, out_h, f.channels);
    // Corner-aligned: output corner samples map exactly onto input corners.
    const double sx = out_w > 1 ? static_cast<double>(f.width - 1) / (out_w - 1) : 0.0;
    const double sy = out_h > 1 ? static_cast<double>(f.height - 1) / (out_h - 1) : 0.0;
    const int c = f.channels;
    for (int j = 0; j < out_h; ++j) {
        const double fy = j * sy;
        int y0 = static_cast<int>(fy);
        if (y0 > f.height - 1) y0 = f.height - 1;
        const int y1 = y0 + 1 < f.height ? y0 + 1 : y0;
        const double ty = fy - y0;
        for (int i = 0; i < out_w; ++i) {
            const double fx = i * sx;
            int x0 = static_cast<int>(fx);
            if (x0 > f.width - 1) x0 = f.width - 1;
            const int x1 = x0 + 1 < f.width ? x0 + 1 : x0;
            const double tx = fx - x0;
            for (int ch = 0; ch < c; ++ch) {
                if (interp == Interp::Nearest) {
                    const int xn = tx < 0.5 ? x0 : x1;
                    const int yn = ty < 0.5 ? y0 : y1;
                    out.at(i, j, ch) = f.at(xn, yn, ch);
                } else {
                    // lerp form a + t*(b-a): exact at t = 0 and on constant input.
                    const double top = f.at(x0, y0, ch) + tx * (f.at(x1, y0, ch) - f.at(x0, y0, ch));
                    const double bot = f.at(x0, y1, ch) + tx * (f.at(x1, y1, ch) - f.at(x0, y1, ch));
                    out.at(i, j, ch) = top + ty * (bot - top);
                }
            }
        }
    }
    return out;
}

Frame adjust_brightness(const Frame& f, double factor) {
    if (!(factor > 0.0)) {
        throw ParamError("brightness factor must be positive, got " + std::to_string(factor));
    }
    Frame out(f.width, f.height, f.channels);
    kern::affine_clamp01(out.pixels.data(), f.pixels.data(), factor, 0.0, f.size());
    return out;
}

Frame negative(const Frame& f) {
    Frame out(f.width, f.height, f.channels);
    kern::affine_clamp01(out.pixels.data(), f.pixels.data(), -1.0, 1.0, f.size());
    return out;
}

Frame gamma_correct(const Frame& f, double gamma) {
    if (!(gamma > 0.0)) {
        throw ParamError("gamma must be positive, got " + std::to_string(gamma));
    }
    Frame out(f.width, f.height, f.channels);
    for (std::size_t i = 0; i < f.size(); ++i) {
        out.pixels[i] = std::pow(f.pixels[i], gamma);
    }
    return out;
}

}  // namespace rumi::img
