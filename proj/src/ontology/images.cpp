#include "situ/ontology/images.hpp"

#include <array>
#include <cstring>
#include <fstream>

#include "situ/common/error.hpp"

namespace situ::onto {
namespace {

constexpr std::array<char, 8> kMagic = {'S', 'I', 'T', 'U', 'I', 'M', 'G', '1'};

void put_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) throw SchemaError("truncated image bundle");
    return b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void write_images(const std::filesystem::path& path, const std::vector<Image>& images) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(kMagic.data(), kMagic.size());
    put_u32(out, static_cast<std::uint32_t>(images.size()));
    for (const auto& img : images) {
        if (img.pixels.size() != img.height * img.width * img.channels) throw SchemaError("image " + img.id + ": bad size");
        put_u32(out, static_cast<std::uint32_t>(img.id.size()));
        out.write(img.id.data(), static_cast<std::streamsize>(img.id.size()));
        put_u32(out, static_cast<std::uint32_t>(img.height));
        put_u32(out, static_cast<std::uint32_t>(img.width));
        put_u32(out, static_cast<std::uint32_t>(img.channels));
        out.write(reinterpret_cast<const char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
    }
    if (!out) throw IoError("write failed for " + path.string());
}

std::vector<Image> read_images(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::array<char, 8> magic{};
    if (!in.read(magic.data(), magic.size()) || magic != kMagic) throw SchemaError(path.string() + ": not an image bundle");
    const std::uint32_t count = get_u32(in);
    std::vector<Image> images(count);
    for (auto& img : images) {
        const std::uint32_t id_len = get_u32(in);
        img.id.resize(id_len);
        if (!in.read(img.id.data(), id_len)) throw SchemaError("truncated image bundle");
        img.height = get_u32(in);
        img.width = get_u32(in);
        img.channels = get_u32(in);
        img.pixels.resize(img.height * img.width * img.channels);
        if (!in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()))) {
            throw SchemaError("truncated image bundle");
        }
    }
    return images;
}

}  // namespace situ::onto
