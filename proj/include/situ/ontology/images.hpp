#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace situ::onto {

// 8-bit interleaved H x W x C raster; channel values map to [0, 1] as v / 255.
struct Image {
    std::string id;
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 0;
    std::vector<std::uint8_t> pixels;

    std::uint8_t at(std::size_t y, std::size_t x, std::size_t c) const { return pixels[(y * width + x) * channels + c]; }
    std::uint8_t& at(std::size_t y, std::size_t x, std::size_t c) { return pixels[(y * width + x) * channels + c]; }
    double value(std::size_t y, std::size_t x, std::size_t c) const { return at(y, x, c) / 255.0; }

    bool operator==(const Image&) const = default;
};

// Binary image bundle ("SITUIMG1"); layout in docs/FORMAT.md.
void write_images(const std::filesystem::path& path, const std::vector<Image>& images);
std::vector<Image> read_images(const std::filesystem::path& path);

}  // namespace situ::onto
