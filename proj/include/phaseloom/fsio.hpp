#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>

namespace phaseloom {

/// Write a whole file atomically: the content goes to a sibling temporary
/// file which is renamed over the destination, so readers never observe a
/// partially written file.
inline void write_file_atomic(const std::string& path, const std::string& contents) {
    namespace fs = std::filesystem;
    fs::path dst(path);
    fs::path tmp = dst;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open for writing: " + tmp.string());
        out.write(contents.data(), std::streamsize(contents.size()));
        out.flush();
        if (!out) throw std::runtime_error("write failed: " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, dst, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw std::runtime_error("cannot replace " + path + ": " + ec.message());
    }
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::string contents((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw std::runtime_error("read failed: " + path);
    return contents;
}

} // namespace phaseloom
