#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

#include "common.hpp"
#include "fsio.hpp"

namespace phaseloom {

enum class WavFormat { Pcm16, Float32 };

namespace detail {

inline std::uint16_t rd_u16(const std::string& b, std::size_t off) {
    if (off + 2 > b.size()) throw std::runtime_error("wav: truncated file");
    return std::uint16_t(std::uint8_t(b[off])) | std::uint16_t(std::uint8_t(b[off + 1])) << 8;
}

inline std::uint32_t rd_u32(const std::string& b, std::size_t off) {
    if (off + 4 > b.size()) throw std::runtime_error("wav: truncated file");
    return std::uint32_t(std::uint8_t(b[off])) | std::uint32_t(std::uint8_t(b[off + 1])) << 8 |
           std::uint32_t(std::uint8_t(b[off + 2])) << 16 | std::uint32_t(std::uint8_t(b[off + 3])) << 24;
}

inline void wr_u16(std::string& b, std::uint16_t v) {
    b.push_back(char(v & 0xff));
    b.push_back(char(v >> 8));
}

inline void wr_u32(std::string& b, std::uint32_t v) {
    b.push_back(char(v & 0xff));
    b.push_back(char((v >> 8) & 0xff));
    b.push_back(char((v >> 16) & 0xff));
    b.push_back(char(v >> 24));
}

} // namespace detail

/// Read a RIFF/WAVE file. Accepts 16-bit PCM and 32-bit IEEE float, mono or
/// multi-channel (channels are averaged to mono). Malformed or unsupported
/// files raise std::runtime_error.
inline Signal read_wav(const std::string& path) {
    const std::string b = read_file(path);
    if (b.size() < 12 || b.compare(0, 4, "RIFF") != 0 || b.compare(8, 4, "WAVE") != 0)
        throw std::runtime_error("wav: not a RIFF/WAVE file: " + path);

    std::uint16_t format = 0, channels = 0, bits = 0;
    std::uint32_t rate = 0;
    bool have_fmt = false;
    std::size_t data_off = 0, data_len = 0;

    std::size_t off = 12;
    while (off + 8 <= b.size()) {
        const std::string id = b.substr(off, 4);
        const std::uint32_t sz = detail::rd_u32(b, off + 4);
        const std::size_t body = off + 8;
        if (body + sz > b.size()) throw std::runtime_error("wav: truncated chunk: " + path);
        if (id == "fmt ") {
            if (sz < 16) throw std::runtime_error("wav: malformed fmt chunk: " + path);
            format = detail::rd_u16(b, body);
            channels = detail::rd_u16(b, body + 2);
            rate = detail::rd_u32(b, body + 4);
            bits = detail::rd_u16(b, body + 14);
            if (format == 0xFFFE && sz >= 40) format = detail::rd_u16(b, body + 24);
            have_fmt = true;
        } else if (id == "data") {
            data_off = body;
            data_len = sz;
        }
        off = body + sz + (sz & 1);
    }

    if (!have_fmt || data_off == 0) throw std::runtime_error("wav: missing fmt or data chunk: " + path);
    if (channels == 0 || rate == 0) throw std::runtime_error("wav: malformed fmt chunk: " + path);

    std::size_t bytes_per_sample;
    if (format == 1 && bits == 16) {
        bytes_per_sample = 2;
    } else if (format == 3 && bits == 32) {
        bytes_per_sample = 4;
    } else {
        throw std::runtime_error("wav: unsupported format (want 16-bit PCM or 32-bit float): " + path);
    }

    const std::size_t frame_bytes = bytes_per_sample * channels;
    const std::size_t n_frames = data_len / frame_bytes;
    Signal s;
    s.sample_rate = int(rate);
    s.samples.resize(n_frames);
    for (std::size_t i = 0; i < n_frames; ++i) {
        double acc = 0.0;
        for (std::size_t c = 0; c < channels; ++c) {
            const std::size_t p = data_off + i * frame_bytes + c * bytes_per_sample;
            if (bytes_per_sample == 2) {
                const auto u = detail::rd_u16(b, p);
                acc += double(std::int16_t(u)) / 32768.0;
            } else {
                std::uint32_t u = detail::rd_u32(b, p);
                float f;
                std::memcpy(&f, &u, 4);
                acc += double(f);
            }
        }
        s.samples[i] = acc / double(channels);
    }
    return s;
}

/// Write a mono RIFF/WAVE file atomically. Samples must be finite; PCM output
/// is clamped to full scale.
inline void write_wav(const std::string& path, const Signal& s, WavFormat fmt = WavFormat::Pcm16) {
    if (s.sample_rate <= 0) throw std::invalid_argument("write_wav: sample rate must be positive");
    for (double v : s.samples)
        if (!std::isfinite(v)) throw std::invalid_argument("write_wav: samples must be finite");

    std::string data;
    if (fmt == WavFormat::Pcm16) {
        data.reserve(s.samples.size() * 2);
        for (double v : s.samples) {
            double q = std::round(v * 32767.0);
            q = std::min(32767.0, std::max(-32768.0, q));
            detail::wr_u16(data, std::uint16_t(std::int16_t(q)));
        }
    } else {
        data.reserve(s.samples.size() * 4);
        for (double v : s.samples) {
            const float f = float(v);
            std::uint32_t u;
            std::memcpy(&u, &f, 4);
            detail::wr_u32(data, u);
        }
    }

    const std::uint16_t tag = fmt == WavFormat::Pcm16 ? 1 : 3;
    const std::uint16_t bits = fmt == WavFormat::Pcm16 ? 16 : 32;
    const std::uint32_t rate = std::uint32_t(s.sample_rate);
    const std::uint16_t block = std::uint16_t(bits / 8);
    const bool fact = fmt == WavFormat::Float32;
    const std::uint32_t fmt_sz = fact ? 18 : 16;

    std::string out;
    out.reserve(data.size() + 64);
    out += "RIFF";
    detail::wr_u32(out, std::uint32_t(4 + 8 + fmt_sz + (fact ? 12 : 0) + 8 + data.size()));
    out += "WAVE";
    out += "fmt ";
    detail::wr_u32(out, fmt_sz);
    detail::wr_u16(out, tag);
    detail::wr_u16(out, 1);
    detail::wr_u32(out, rate);
    detail::wr_u32(out, rate * block);
    detail::wr_u16(out, block);
    detail::wr_u16(out, bits);
    if (fact) {
        detail::wr_u16(out, 0);
        out += "fact";
        detail::wr_u32(out, 4);
        detail::wr_u32(out, std::uint32_t(s.samples.size()));
    }
    out += "data";
    detail::wr_u32(out, std::uint32_t(data.size()));
    out += data;
    write_file_atomic(path, out);
}

} // namespace phaseloom
