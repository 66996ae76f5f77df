#include "adamat/netpbm.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

namespace adamat::io {

namespace {

class HeaderReader {
   public:
    explicit HeaderReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    void skip_space_and_comments() {
        while (pos_ < bytes_.size()) {
            const auto c = bytes_[pos_];
            if (c == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n' && bytes_[pos_] != '\r') ++pos_;
            } else if (std::isspace(c)) {
                ++pos_;
            } else {
                break;
            }
        }
    }

    unsigned long number(const char* what) {
        skip_space_and_comments();
        const std::size_t start = pos_;
        unsigned long v = 0;
        while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
            v = v * 10 + (bytes_[pos_] - '0');
            if (v > 0xFFFFFFul) throw DataError(std::string("NetPBM header: ") + what + " too large");
            ++pos_;
        }
        if (pos_ == start) throw DataError(std::string("NetPBM header: missing ") + what);
        return v;
    }

    std::size_t pos() const { return pos_; }
    void advance(std::size_t n) { pos_ += n; }
    std::size_t remaining() const { return bytes_.size() - pos_; }
    std::uint8_t peek() const { return bytes_[pos_]; }

   private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

std::uint16_t quantize(float v, int maxval) {
    const double q = std::nearbyint(std::clamp(double(v), 0.0, 1.0) * maxval);
    return static_cast<std::uint16_t>(q);
}

void require_gray(const PnmImage& image, const char* what) {
    if (image.channels != 1) throw DataError(std::string(what) + " must be a grayscale (P5) image");
}

}  // namespace

PnmImage decode_pnm(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
        throw DataError("not a binary NetPBM file (expected P5 or P6 magic)");
    }
    PnmImage img;
    img.channels = bytes[1] == '5' ? 1 : 3;
    HeaderReader r(bytes);
    r.advance(2);
    img.width = r.number("width");
    img.height = r.number("height");
    const unsigned long maxval = r.number("maxval");
    if (img.width == 0 || img.height == 0) throw DataError("NetPBM header: zero extent");
    if (maxval == 0 || maxval > 65535) throw DataError("NetPBM header: maxval must be in [1, 65535]");
    img.maxval = int(maxval);
    if (r.remaining() == 0 || !std::isspace(r.peek())) throw DataError("NetPBM header: missing separator after maxval");
    r.advance(1);

    const std::size_t count = img.width * img.height * std::size_t(img.channels);
    const std::size_t bps = img.maxval > 255 ? 2 : 1;
    if (r.remaining() < count * bps) throw DataError("NetPBM raster truncated");
    if (r.remaining() > count * bps) throw DataError("NetPBM raster has trailing bytes");
    img.samples.resize(count);
    const std::uint8_t* p = bytes.data() + r.pos();
    for (std::size_t i = 0; i < count; ++i) {
        const std::uint16_t v = bps == 2 ? std::uint16_t((p[2 * i] << 8) | p[2 * i + 1]) : p[i];
        if (v > img.maxval) throw DataError("NetPBM sample exceeds maxval");
        img.samples[i] = v;
    }
    return img;
}

std::vector<std::uint8_t> encode_pnm(const PnmImage& img) {
    if (img.channels != 1 && img.channels != 3) throw DataError("NetPBM: channels must be 1 or 3");
    if (img.maxval < 1 || img.maxval > 65535) throw DataError("NetPBM: maxval must be in [1, 65535]");
    if (img.samples.size() != img.width * img.height * std::size_t(img.channels)) {
        throw DataError("NetPBM: sample count does not match extent");
    }
    const std::string header = std::string(img.channels == 1 ? "P5" : "P6") + "\n" + std::to_string(img.width) + " " +
                               std::to_string(img.height) + "\n" + std::to_string(img.maxval) + "\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    const bool wide = img.maxval > 255;
    out.reserve(out.size() + img.samples.size() * (wide ? 2 : 1));
    for (auto v : img.samples) {
        if (v > img.maxval) throw DataError("NetPBM: sample exceeds maxval");
        if (wide) out.push_back(std::uint8_t(v >> 8));
        out.push_back(std::uint8_t(v & 0xFF));
    }
    return out;
}

PnmImage read_pnm(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    try {
        return decode_pnm(bytes);
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

void write_pnm(const std::filesystem::path& path, const PnmImage& image) {
    const auto bytes = encode_pnm(image);
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot write " + path.string());
    os.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!os) throw DataError("write failed for " + path.string());
}

AlphaMatte alpha_from_pnm(const PnmImage& image) {
    require_gray(image, "alpha matte");
    AlphaMatte a(image.height, image.width);
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = float(image.samples[i]) / float(image.maxval);
    return a;
}

PnmImage alpha_to_pnm(const AlphaMatte& alpha, int maxval) {
    PnmImage img{alpha.width(), alpha.height(), 1, maxval, {}};
    img.samples.resize(alpha.size());
    for (std::size_t i = 0; i < alpha.size(); ++i) img.samples[i] = quantize(alpha[i], maxval);
    return img;
}

ImageRGB rgb_from_pnm(const PnmImage& image) {
    if (image.channels != 3) throw DataError("color image must be a P6 image");
    ImageRGB out(image.height, image.width);
    for (std::size_t y = 0; y < image.height; ++y) {
        for (std::size_t x = 0; x < image.width; ++x) {
            for (std::size_t c = 0; c < 3; ++c) {
                out.at(c, y, x) = float(image.samples[(y * image.width + x) * 3 + c]) / float(image.maxval);
            }
        }
    }
    return out;
}

PnmImage rgb_to_pnm(const ImageRGB& image, int maxval) {
    PnmImage img{image.width(), image.height(), 3, maxval, {}};
    img.samples.resize(image.width() * image.height() * 3);
    for (std::size_t y = 0; y < image.height(); ++y) {
        for (std::size_t x = 0; x < image.width(); ++x) {
            for (std::size_t c = 0; c < 3; ++c) {
                img.samples[(y * image.width() + x) * 3 + c] = quantize(image.at(c, y, x), maxval);
            }
        }
    }
    return img;
}

Trimap trimap_from_pnm(const PnmImage& image, bool snap) {
    require_gray(image, "trimap");
    if (image.maxval != 255) throw DataError("trimap must be an 8-bit image (maxval 255)");
    Trimap t(image.height, image.width);
    for (std::size_t i = 0; i < t.size(); ++i) {
        const auto v = image.samples[i];
        if (v == kTrimapBackground) {
            t[i] = Label::kBackground;
        } else if (v == kTrimapUnknown) {
            t[i] = Label::kUnknown;
        } else if (v == kTrimapForeground) {
            t[i] = Label::kForeground;
        } else if (!snap) {
            throw DataError("trimap gray level " + std::to_string(v) + " is not one of 0/128/255 (use --snap)");
        } else {
            t[i] = v < 64 ? Label::kBackground : (v <= 191 ? Label::kUnknown : Label::kForeground);
        }
    }
    return t;
}

PnmImage trimap_to_pnm(const Trimap& trimap) {
    PnmImage img{trimap.width(), trimap.height(), 1, 255, {}};
    img.samples.resize(trimap.size());
    for (std::size_t i = 0; i < trimap.size(); ++i) {
        switch (trimap[i]) {
            case Label::kBackground: img.samples[i] = kTrimapBackground; break;
            case Label::kUnknown: img.samples[i] = kTrimapUnknown; break;
            case Label::kForeground: img.samples[i] = kTrimapForeground; break;
        }
    }
    return img;
}

AlphaMatte read_alpha(const std::filesystem::path& path) { return alpha_from_pnm(read_pnm(path)); }
ImageRGB read_rgb(const std::filesystem::path& path) { return rgb_from_pnm(read_pnm(path)); }
Trimap read_trimap(const std::filesystem::path& path, bool snap) {
    try {
        return trimap_from_pnm(read_pnm(path), snap);
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

}  // namespace adamat::io
