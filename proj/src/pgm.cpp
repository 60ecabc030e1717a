#include "fabfix/pgm.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

namespace fabfix {

namespace {

class PgmParser {
public:
    explicit PgmParser(const std::string& path) : path_(path), in_(path, std::ios::binary) {
        if (!in_) throw FormatError("cannot open '" + path + "' for reading");
    }

    [[noreturn]] void fail(const std::string& msg) {
        throw FormatError(path_ + ": " + msg + " at byte " + std::to_string(offset_));
    }

    int get() {
        int c = in_.get();
        if (c != EOF) ++offset_;
        return c;
    }

    // Skips whitespace and '#' comment lines between header tokens.
    void skip_separators() {
        for (;;) {
            int c = in_.peek();
            if (c == '#') {
                while (c != EOF && c != '\n') c = get();
            } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
                get();
            } else {
                return;
            }
        }
    }

    int read_header_int(const char* what) {
        skip_separators();
        int c = in_.peek();
        if (c < '0' || c > '9') fail(std::string("expected ") + what);
        long v = 0;
        while (c >= '0' && c <= '9') {
            v = v * 10 + (get() - '0');
            if (v > std::numeric_limits<int>::max()) fail(std::string(what) + " out of range");
            c = in_.peek();
        }
        return static_cast<int>(v);
    }

    std::vector<std::uint8_t> parse(int& width, int& height) {
        char m0 = static_cast<char>(get());
        char m1 = static_cast<char>(get());
        if (m0 != 'P' || m1 != '5') {
            fail(std::string("unsupported magic '") + m0 + m1 + "' (only binary P5 is accepted)");
        }
        width = read_header_int("width");
        height = read_header_int("height");
        int maxval = read_header_int("maxval");
        if (width < 1 || height < 1) fail("dimensions must be >= 1");
        if (maxval != 255) fail("maxval must be 255, got " + std::to_string(maxval));
        int c = get();
        if (c != ' ' && c != '\t' && c != '\r' && c != '\n') fail("expected single whitespace after maxval");

        std::vector<std::uint8_t> bytes(static_cast<std::size_t>(width) * height);
        in_.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        std::size_t got = static_cast<std::size_t>(in_.gcount());
        offset_ += got;
        if (got != bytes.size()) fail("truncated payload (read " + std::to_string(got) + " of " +
                                      std::to_string(bytes.size()) + " bytes)");
        return bytes;
    }

private:
    std::string path_;
    std::ifstream in_;
    std::size_t offset_ = 0;
};

void write_p5(const std::string& path, int width, int height, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open '" + path + "' for writing");
    out << "P5\n" << width << " " << height << "\n255\n";
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("short write to '" + path + "'");
}

} // namespace

Bitmap read_pgm(const std::string& path) {
    PgmParser parser(path);
    int w = 0, h = 0;
    std::vector<std::uint8_t> bytes = parser.parse(w, h);
    Bitmap out(w, h);
    for (std::size_t i = 0; i < bytes.size(); ++i) out.values[i] = bytes[i] >= 128 ? 1 : 0;
    return out;
}

Field read_pgm_field(const std::string& path) {
    PgmParser parser(path);
    int w = 0, h = 0;
    std::vector<std::uint8_t> bytes = parser.parse(w, h);
    Field out(w, h);
    for (std::size_t i = 0; i < bytes.size(); ++i) out.values[i] = static_cast<float>(bytes[i]) / 255.0f;
    return out;
}

void write_pgm(const Bitmap& image, const std::string& path) {
    std::vector<std::uint8_t> bytes(image.pixel_count());
    for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = image.values[i] ? 255 : 0;
    write_p5(path, image.width, image.height, bytes);
}

void write_pgm(const Field& image, const std::string& path) {
    std::vector<std::uint8_t> bytes(image.pixel_count());
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        float v = image.values[i];
        v = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
        bytes[i] = static_cast<std::uint8_t>(std::floor(v * 255.0f + 0.5f));
    }
    write_p5(path, image.width, image.height, bytes);
}

} // namespace fabfix
