#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rumi/image.hpp"

namespace rumi::img {

enum class ImageFormat { Png, Pgm, Ppm };

// Decodes an 8-bit image. PGM yields 1 channel, PPM 3; PNG yields 1 or 3
// depending on its color type. Malformed input raises DecodeError with the
// byte offset at which parsing stopped.
Frame decode(const std::uint8_t* data, std::size_t size, ImageFormat format);
Frame decode(const std::vector<std::uint8_t>& data, ImageFormat format);

// Encodes to 8-bit. Pixel values are clamped to [0,1] and rounded to the
// nearest of 256 levels. PGM requires 1 channel, PPM 3; PNG takes either.
std::vector<std::uint8_t> encode(const Frame& f, ImageFormat format);

// Format detection from the leading magic bytes.
ImageFormat sniff_format(const std::uint8_t* data, std::size_t size);

// File convenience wrappers; `save` picks the format from the extension
// (.png/.pgm/.ppm), `load` sniffs content.
Frame load(const std::string& path);
void save(const Frame& f, const std::string& path);

std::vector<std::uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes);

}  // namespace rumi::img
