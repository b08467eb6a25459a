#pragma once

// Small binary-file helpers: float32 blobs, PFM (portable float map,
// little-endian), and PGM (16-bit) used for depth/shaded/mask exports.

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

namespace artgrasp {

inline void write_f32_blob(const std::string& path, const std::vector<float>& data) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    f.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(float)));
}

inline std::vector<float> read_f32_blob(const std::string& path) {
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    if (!f) throw std::runtime_error("cannot read " + path);
    std::streamsize bytes = f.tellg();
    if (bytes % sizeof(float) != 0)
        throw std::runtime_error("blob size is not a multiple of 4: " + path);
    f.seekg(0);
    std::vector<float> data(static_cast<std::size_t>(bytes) / sizeof(float));
    f.read(reinterpret_cast<char*>(data.data()), bytes);
    return data;
}

// single-channel PFM; negative scale marks little-endian per the format
inline void write_pfm(const std::string& path, const std::vector<float>& data,
                      int width, int height) {
    if (static_cast<int>(data.size()) != width * height)
        throw std::invalid_argument("pfm size mismatch");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << "Pf\n" << width << " " << height << "\n-1.0\n";
    // PFM stores rows bottom-up
    for (int r = height - 1; r >= 0; --r)
        f.write(reinterpret_cast<const char*>(&data[static_cast<std::size_t>(r) * width]),
                static_cast<std::streamsize>(width * sizeof(float)));
}

inline std::vector<float> read_pfm(const std::string& path, int& width, int& height) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read " + path);
    std::string magic;
    double scale;
    f >> magic >> width >> height >> scale;
    if (magic != "Pf" || scale >= 0)
        throw std::runtime_error("unsupported pfm header in " + path);
    f.get();  // single whitespace after the header
    std::vector<float> data(static_cast<std::size_t>(width) * height);
    for (int r = height - 1; r >= 0; --r)
        f.read(reinterpret_cast<char*>(&data[static_cast<std::size_t>(r) * width]),
               static_cast<std::streamsize>(width * sizeof(float)));
    if (!f) throw std::runtime_error("truncated pfm: " + path);
    return data;
}

inline void write_pgm16(const std::string& path, const std::vector<std::uint16_t>& data,
                        int width, int height) {
    if (static_cast<int>(data.size()) != width * height)
        throw std::invalid_argument("pgm size mismatch");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << "P5\n" << width << " " << height << "\n65535\n";
    for (std::uint16_t v : data) {
        unsigned char hi = static_cast<unsigned char>(v >> 8);
        unsigned char lo = static_cast<unsigned char>(v & 0xff);
        f.put(static_cast<char>(hi));
        f.put(static_cast<char>(lo));
    }
}

inline std::vector<std::uint16_t> read_pgm16(const std::string& path, int& width,
                                             int& height) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read " + path);
    std::string magic;
    int maxval;
    f >> magic >> width >> height >> maxval;
    if (magic != "P5" || maxval != 65535)
        throw std::runtime_error("unsupported pgm header in " + path);
    f.get();
    std::vector<std::uint16_t> data(static_cast<std::size_t>(width) * height);
    for (auto& v : data) {
        int hi = f.get(), lo = f.get();
        v = static_cast<std::uint16_t>((hi << 8) | lo);
    }
    if (!f) throw std::runtime_error("truncated pgm: " + path);
    return data;
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    f.write(text.data(), static_cast<std::streamsize>(text.size()));
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    if (!f) throw std::runtime_error("cannot read " + path);
    std::string s(static_cast<std::size_t>(f.tellg()), '\0');
    f.seekg(0);
    f.read(s.data(), static_cast<std::streamsize>(s.size()));
    return s;
}

// FNV-1a, used for config hashes and determinism checks
inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

} // namespace artgrasp
