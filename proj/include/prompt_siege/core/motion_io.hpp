#pragma once

#include <bit>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "prompt_siege/core/types.hpp"

namespace prompt_siege {

// Flat clip container:
//   prompt-siege-clip/1 T=<T> J=<J> fps=<fps> layout=TJ3-row-major\n
// followed by T*J*3 little-endian IEEE-754 doubles.
inline constexpr std::string_view kClipMagic = "prompt-siege-clip/1";

inline std::string shortest_repr(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc{}) throw Error("cannot format double");
    return std::string(buf, end);
}

inline void write_clip(std::ostream& out, const MotionClip& clip) {
    out << kClipMagic << " T=" << clip.frame_count() << " J=" << clip.joint_count()
        << " fps=" << shortest_repr(clip.fps()) << " layout=TJ3-row-major\n";
    for (double v : clip.data()) {
        auto bits = std::bit_cast<std::uint64_t>(v);
        char le[8];
        for (int i = 0; i < 8; ++i) le[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
        out.write(le, 8);
    }
    if (!out) throw Error("failed to write motion clip");
}

inline MotionClip read_clip(std::istream& in) {
    std::string header;
    if (!std::getline(in, header)) throw ValidationError("motion clip: missing header");
    std::istringstream hs(header);
    std::string magic, t_field, j_field, fps_field, layout_field;
    hs >> magic >> t_field >> j_field >> fps_field >> layout_field;
    if (magic != kClipMagic) throw ValidationError("motion clip: bad magic '" + magic + "'");
    if (layout_field != "layout=TJ3-row-major") throw ValidationError("motion clip: unsupported layout");
    auto field = [](const std::string& f, std::string_view key) -> std::string {
        if (f.rfind(key, 0) != 0) throw ValidationError("motion clip: expected " + std::string(key));
        return f.substr(key.size());
    };
    std::size_t T = 0, J = 0;
    double fps = 0;
    try {
        T = std::stoull(field(t_field, "T="));
        J = std::stoull(field(j_field, "J="));
        fps = std::stod(field(fps_field, "fps="));
    } catch (const std::logic_error&) {
        throw ValidationError("motion clip: malformed header");
    }
    if (T > (std::size_t{1} << 24) || J > (std::size_t{1} << 12)) {
        throw ValidationError("motion clip: implausible dimensions");
    }
    std::vector<double> data(T * J * 3);
    for (auto& v : data) {
        unsigned char le[8];
        if (!in.read(reinterpret_cast<char*>(le), 8)) throw ValidationError("motion clip: truncated data");
        std::uint64_t bits = 0;
        for (int i = 7; i >= 0; --i) bits = (bits << 8) | le[i];
        v = std::bit_cast<double>(bits);
    }
    return MotionClip(T, J, fps, std::move(data));
}

inline void save_clip(const std::string& path, const MotionClip& clip) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path + " for writing");
    write_clip(out, clip);
}

inline MotionClip load_clip(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    return read_clip(in);
}

}  // namespace prompt_siege
