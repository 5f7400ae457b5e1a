#include "rumi/image_io.hpp"

#include <zlib.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace rumi::img {

namespace {

std::uint8_t quantize(double p) {
    if (p <= 0.0) return 0;
    if (p >= 1.0) return 255;
    return static_cast<std::uint8_t>(std::lround(p * 255.0));
}

// ---- PGM / PPM (binary P5 / P6) ----

class NetpbmReader {
public:
    NetpbmReader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}

    std::size_t pos() const { return pos_; }

    std::uint8_t byte() {
        if (pos_ >= size_) throw DecodeError("netpbm: truncated header", pos_);
        return data_[pos_++];
    }

    // Skips whitespace and '#' comments, then reads a decimal integer.
    int integer() {
        skip_space();
        if (pos_ >= size_) throw DecodeError("netpbm: missing header field", pos_);
        if (data_[pos_] < '0' || data_[pos_] > '9') {
            throw DecodeError("netpbm: expected digit", pos_);
        }
        long v = 0;
        while (pos_ < size_ && data_[pos_] >= '0' && data_[pos_] <= '9') {
            v = v * 10 + (data_[pos_] - '0');
            if (v > 1000000000L) throw DecodeError("netpbm: header value out of range", pos_);
            ++pos_;
        }
        return static_cast<int>(v);
    }

    const std::uint8_t* payload(std::size_t need) {
        // Exactly one whitespace byte separates maxval from the raster.
        if (pos_ >= size_ || !is_space(data_[pos_])) {
            throw DecodeError("netpbm: missing raster separator", pos_);
        }
        ++pos_;
        if (size_ - pos_ < need) {
            throw DecodeError("netpbm: truncated pixel data, need " + std::to_string(need) +
                                  " bytes, have " + std::to_string(size_ - pos_),
                              size_);
        }
        return data_ + pos_;
    }

private:
    static bool is_space(std::uint8_t c) {
        return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
    }

    void skip_space() {
        while (pos_ < size_) {
            if (is_space(data_[pos_])) {
                ++pos_;
            } else if (data_[pos_] == '#') {
                while (pos_ < size_ && data_[pos_] != '\n') ++pos_;
            } else {
                break;
            }
        }
    }

    const std::uint8_t* data_;
    std::size_t size_;
    std::size_t pos_ = 0;
};

Frame decode_netpbm(const std::uint8_t* data, std::size_t size, bool color) {
    NetpbmReader r(data, size);
    const char magic1 = static_cast<char>(r.byte());
    const char magic2 = static_cast<char>(r.byte());
    const char expected = color ? '6' : '5';
    if (magic1 != 'P' || magic2 != expected) {
        throw DecodeError(std::string("netpbm: bad magic, expected P") + expected, 0);
    }
    const int w = r.integer();
    const int h = r.integer();
    const int maxval = r.integer();
    if (w < 1 || h < 1) throw DecodeError("netpbm: non-positive dimensions", r.pos());
    if (maxval != 255) {
        throw DecodeError("netpbm: only 8-bit maxval 255 supported, got " + std::to_string(maxval),
                          r.pos());
    }
    const int c = color ? 3 : 1;
    const std::size_t need = static_cast<std::size_t>(w) * h * c;
    const std::uint8_t* px = r.payload(need);
    Frame f(w, h, c);
    for (std::size_t i = 0; i < need; ++i) {
        f.pixels[i] = px[i] / 255.0;
    }
    return f;
}

std::vector<std::uint8_t> encode_netpbm(const Frame& f, bool color) {
    const int want = color ? 3 : 1;
    if (f.channels != want) {
        throw ShapeError(std::string(color ? "PPM" : "PGM") + " requires " +
                         std::to_string(want) + " channel(s), frame has " +
                         std::to_string(f.channels));
    }
    std::string header = std::string("P") + (color ? "6" : "5") + "\n" + std::to_string(f.width) +
                         " " + std::to_string(f.height) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.reserve(out.size() + f.size());
    for (double p : f.pixels) out.push_back(quantize(p));
    return out;
}

// ---- PNG (8-bit grayscale or truecolor, non-interlaced) ----

constexpr std::uint8_t kPngSig[8] = {137, 80, 78, 71, 13, 10, 26, 10};

std::uint32_t read_u32be(const std::uint8_t* p) {
    return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) | (std::uint32_t(p[2]) << 8) |
           std::uint32_t(p[3]);
}

void push_u32be(std::vector<std::uint8_t>& v, std::uint32_t x) {
    v.push_back(static_cast<std::uint8_t>(x >> 24));
    v.push_back(static_cast<std::uint8_t>(x >> 16));
    v.push_back(static_cast<std::uint8_t>(x >> 8));
    v.push_back(static_cast<std::uint8_t>(x));
}

std::uint8_t paeth(int a, int b, int c) {
    const int p = a + b - c;
    const int pa = std::abs(p - a);
    const int pb = std::abs(p - b);
    const int pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return static_cast<std::uint8_t>(a);
    if (pb <= pc) return static_cast<std::uint8_t>(b);
    return static_cast<std::uint8_t>(c);
}

Frame decode_png(const std::uint8_t* data, std::size_t size) {
    if (size < 8 || std::memcmp(data, kPngSig, 8) != 0) {
        throw DecodeError("png: bad signature", 0);
    }
    std::size_t pos = 8;
    bool have_ihdr = false;
    bool have_iend = false;
    std::uint32_t w = 0, h = 0;
    int channels = 0;
    std::vector<std::uint8_t> idat;
    std::size_t idat_offset = 0;

    while (!have_iend) {
        if (size - pos < 12) throw DecodeError("png: truncated chunk header", pos);
        const std::uint32_t len = read_u32be(data + pos);
        if (len > 0x7fffffffu) throw DecodeError("png: chunk length out of range", pos);
        if (size - pos < 12 + static_cast<std::size_t>(len)) {
            throw DecodeError("png: truncated chunk payload", pos + 8);
        }
        char type[5] = {};
        std::memcpy(type, data + pos + 4, 4);
        const std::uint8_t* payload = data + pos + 8;
        const std::uint32_t stored_crc = read_u32be(payload + len);
        const std::uint32_t crc =
            static_cast<std::uint32_t>(::crc32(::crc32(0L, data + pos + 4, 4), payload, len));
        if (crc != stored_crc) throw DecodeError("png: chunk crc mismatch", pos + 8 + len);

        if (std::strcmp(type, "IHDR") == 0) {
            if (len != 13) throw DecodeError("png: IHDR length must be 13", pos + 8);
            w = read_u32be(payload);
            h = read_u32be(payload + 4);
            const int depth = payload[8];
            const int color = payload[9];
            const int compression = payload[10];
            const int filter = payload[11];
            const int interlace = payload[12];
            if (w == 0 || h == 0) throw DecodeError("png: zero dimension", pos + 8);
            if (depth != 8) {
                throw DecodeError("png: only 8-bit depth supported, got " + std::to_string(depth),
                                  pos + 16);
            }
            if (color == 0) {
                channels = 1;
            } else if (color == 2) {
                channels = 3;
            } else {
                throw DecodeError("png: unsupported color type " + std::to_string(color), pos + 17);
            }
            if (compression != 0) throw DecodeError("png: unknown compression method", pos + 18);
            if (filter != 0) throw DecodeError("png: unknown filter method", pos + 19);
            if (interlace != 0) throw DecodeError("png: interlaced images unsupported", pos + 20);
            have_ihdr = true;
        } else if (std::strcmp(type, "IDAT") == 0) {
            if (!have_ihdr) throw DecodeError("png: IDAT before IHDR", pos + 4);
            if (idat.empty()) idat_offset = pos + 8;
            idat.insert(idat.end(), payload, payload + len);
        } else if (std::strcmp(type, "IEND") == 0) {
            have_iend = true;
        }
        // Other chunks (tEXt, gAMA, ...) carry no pixel data here; skip.
        pos += 12 + len;
    }
    if (!have_ihdr) throw DecodeError("png: missing IHDR", pos);
    if (idat.empty()) throw DecodeError("png: missing IDAT", pos);

    const std::size_t stride = static_cast<std::size_t>(w) * channels;
    const std::size_t raw_size = (stride + 1) * h;
    std::vector<std::uint8_t> raw(raw_size);
    uLongf dest_len = raw_size;
    const int zrc = ::uncompress(raw.data(), &dest_len, idat.data(),
                                 static_cast<uLong>(idat.size()));
    if (zrc != Z_OK || dest_len != raw_size) {
        throw DecodeError("png: IDAT inflate failed (zlib rc " + std::to_string(zrc) + ")",
                          idat_offset);
    }

    // Undo per-scanline filtering.
    const int bpp = channels;
    std::vector<std::uint8_t> recon(stride * h);
    for (std::uint32_t y = 0; y < h; ++y) {
        const std::uint8_t filter = raw[y * (stride + 1)];
        const std::uint8_t* src = &raw[y * (stride + 1) + 1];
        std::uint8_t* cur = &recon[y * stride];
        const std::uint8_t* up = y > 0 ? &recon[(y - 1) * stride] : nullptr;
        for (std::size_t i = 0; i < stride; ++i) {
            const int left = i >= static_cast<std::size_t>(bpp) ? cur[i - bpp] : 0;
            const int above = up ? up[i] : 0;
            const int upleft = (up && i >= static_cast<std::size_t>(bpp)) ? up[i - bpp] : 0;
            int v = src[i];
            switch (filter) {
                case 0: break;
                case 1: v += left; break;
                case 2: v += above; break;
                case 3: v += (left + above) / 2; break;
                case 4: v += paeth(left, above, upleft); break;
                default:
                    throw DecodeError("png: bad filter byte " + std::to_string(filter),
                                      idat_offset);
            }
            cur[i] = static_cast<std::uint8_t>(v & 0xff);
        }
    }

    Frame f(static_cast<int>(w), static_cast<int>(h), channels);
    for (std::size_t i = 0; i < recon.size(); ++i) {
        f.pixels[i] = recon[i] / 255.0;
    }
    return f;
}

void push_chunk(std::vector<std::uint8_t>& out, const char* type,
                const std::vector<std::uint8_t>& payload) {
    push_u32be(out, static_cast<std::uint32_t>(payload.size()));
    const std::size_t type_at = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), payload.begin(), payload.end());
    const std::uint32_t crc = static_cast<std::uint32_t>(
        ::crc32(0L, out.data() + type_at, static_cast<uInt>(4 + payload.size())));
    push_u32be(out, crc);
}

std::vector<std::uint8_t> encode_png(const Frame& f) {
    const int channels = f.channels;
    const std::size_t stride = static_cast<std::size_t>(f.width) * channels;

    std::vector<std::uint8_t> raw((stride + 1) * f.height);
    std::size_t at = 0;
    std::size_t px = 0;
    for (int y = 0; y < f.height; ++y) {
        raw[at++] = 0;  // filter: none
        for (std::size_t i = 0; i < stride; ++i) {
            raw[at++] = quantize(f.pixels[px++]);
        }
    }

    uLongf bound = ::compressBound(static_cast<uLong>(raw.size()));
    std::vector<std::uint8_t> compressed(bound);
    if (::compress2(compressed.data(), &bound, raw.data(), static_cast<uLong>(raw.size()),
                    Z_DEFAULT_COMPRESSION) != Z_OK) {
        throw IoError("png: deflate failed");
    }
    compressed.resize(bound);

    std::vector<std::uint8_t> ihdr;
    push_u32be(ihdr, static_cast<std::uint32_t>(f.width));
    push_u32be(ihdr, static_cast<std::uint32_t>(f.height));
    ihdr.push_back(8);                                // bit depth
    ihdr.push_back(channels == 1 ? 0 : 2);            // color type
    ihdr.push_back(0);                                // compression
    ihdr.push_back(0);                                // filter
    ihdr.push_back(0);                                // interlace

    std::vector<std::uint8_t> out(kPngSig, kPngSig + 8);
    push_chunk(out, "IHDR", ihdr);
    push_chunk(out, "IDAT", compressed);
    push_chunk(out, "IEND", {});
    return out;
}

}  // namespace

Frame decode(const std::uint8_t* data, std::size_t size, ImageFormat format) {
    if (data == nullptr || size == 0) throw DecodeError("empty image payload", 0);
    switch (format) {
        case ImageFormat::Pgm: return decode_netpbm(data, size, false);
        case ImageFormat::Ppm: return decode_netpbm(data, size, true);
        case ImageFormat::Png: return decode_png(data, size);
    }
    throw ParamError("unknown image format");
}

Frame decode(const std::vector<std::uint8_t>& data, ImageFormat format) {
    return decode(data.data(), data.size(), format);
}

std::vector<std::uint8_t> encode(const Frame& f, ImageFormat format) {
    if (f.width < 1 || f.height < 1 || f.size() == 0) {
        throw ShapeError("cannot encode empty frame");
    }
    switch (format) {
        case ImageFormat::Pgm: return encode_netpbm(f, false);
        case ImageFormat::Ppm: return encode_netpbm(f, true);
        case ImageFormat::Png: return encode_png(f);
    }
    throw ParamError("unknown image format");
}

ImageFormat sniff_format(const std::uint8_t* data, std::size_t size) {
    if (size >= 8 && std::memcmp(data, kPngSig, 8) == 0) return ImageFormat::Png;
    if (size >= 2 && data[0] == 'P' && data[1] == '5') return ImageFormat::Pgm;
    if (size >= 2 && data[0] == 'P' && data[1] == '6') return ImageFormat::Ppm;
    throw DecodeError("unrecognized image magic", 0);
}

std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for reading: " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("read failed: " + path);
    return bytes;
}

void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + path);
}

Frame load(const std::string& path) {
    const auto bytes = read_file(path);
    return decode(bytes.data(), bytes.size(), sniff_format(bytes.data(), bytes.size()));
}

void save(const Frame& f, const std::string& path) {
    const auto ext = std::filesystem::path(path).extension().string();
    ImageFormat fmt;
    if (ext == ".png") {
        fmt = ImageFormat::Png;
    } else if (ext == ".pgm") {
        fmt = ImageFormat::Pgm;
    } else if (ext == ".ppm") {
        fmt = ImageFormat::Ppm;
    } else {
        throw ParamError("unsupported image extension: " + path);
    }
    write_file(path, encode(f, fmt));
}

}  // namespace rumi::img
