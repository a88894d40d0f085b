#include "core/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "core/errors.hpp"

namespace seglab::imaging {

namespace {

void check_dims(int height, int width, int channels) {
    if (height <= 0 || width <= 0) throw DomainError("raster dimensions must be positive");
    if (channels != 1 && channels != 3) throw DomainError("channels must be 1 or 3");
}

} // namespace

Image make_image(int height, int width, int channels, double fill) {
    check_dims(height, width, channels);
    Image img;
    img.height = height;
    img.width = width;
    img.channels = channels;
    img.data.assign(static_cast<std::size_t>(height) * width * channels, fill);
    return img;
}

LabelMap make_label_map(int height, int width, int num_classes, std::int32_t fill) {
    check_dims(height, width, 1);
    if (num_classes < 2) throw DomainError("num_classes must be >= 2");
    if (fill < 0 || fill >= num_classes) throw DomainError("fill label out of range");
    LabelMap lm;
    lm.height = height;
    lm.width = width;
    lm.num_classes = num_classes;
    lm.data.assign(static_cast<std::size_t>(height) * width, fill);
    return lm;
}

ProbMap make_prob_map(int num_classes, int height, int width, double fill) {
    check_dims(height, width, 1);
    if (num_classes < 2) throw DomainError("num_classes must be >= 2");
    ProbMap pm;
    pm.num_classes = num_classes;
    pm.height = height;
    pm.width = width;
    pm.data.assign(static_cast<std::size_t>(num_classes) * height * width, fill);
    return pm;
}

// --- PGM plumbing -----------------------------------------------------------

namespace {

constexpr const char* kColorHeader = "#seglab-pgm channels=3";

int read_pnm_token(std::istream& in, const std::string& path) {
    // Skips whitespace and '#' comment lines, then reads one ASCII integer.
    int ch = in.get();
    for (;;) {
        while (ch != EOF && std::isspace(ch)) ch = in.get();
        if (ch == '#') {
            while (ch != EOF && ch != '\n') ch = in.get();
            continue;
        }
        break;
    }
    if (ch == EOF) throw TruncationError(path + ": header ended early");
    if (!std::isdigit(ch)) throw FormatError(path + ": expected integer in header");
    long value = 0;
    while (ch != EOF && std::isdigit(ch)) {
        value = value * 10 + (ch - '0');
        if (value > 1 << 30) throw FormatError(path + ": header value out of range");
        ch = in.get();
    }
    if (ch != EOF) in.unget();
    return static_cast<int>(value);
}

struct PgmHeader {
    int width = 0;
    int height = 0;
    int maxval = 0;
};

PgmHeader read_p5_header(std::istream& in, const std::string& path) {
    char m0 = 0, m1 = 0;
    in.get(m0);
    in.get(m1);
    if (!in || m0 != 'P' || m1 != '5') throw FormatError(path + ": not a binary PGM (P5) file");
    PgmHeader h;
    h.width = read_pnm_token(in, path);
    h.height = read_pnm_token(in, path);
    h.maxval = read_pnm_token(in, path);
    if (h.width <= 0 || h.height <= 0) throw FormatError(path + ": non-positive dimensions");
    if (h.maxval <= 0 || h.maxval > 65535) throw FormatError(path + ": maxval out of range");
    int sep = in.get();
    if (sep == EOF) throw TruncationError(path + ": missing payload");
    if (!std::isspace(sep)) throw FormatError(path + ": malformed header separator");
    return h;
}

std::vector<std::uint32_t> read_p5_payload(std::istream& in, const PgmHeader& h, const std::string& path) {
    std::size_t n = static_cast<std::size_t>(h.width) * h.height;
    std::size_t bytes_per = h.maxval > 255 ? 2 : 1;
    std::vector<unsigned char> raw(n * bytes_per);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(in.gcount()) != raw.size())
        throw TruncationError(path + ": payload shorter than header-declared size");
    std::vector<std::uint32_t> out(n);
    if (bytes_per == 1) {
        for (std::size_t i = 0; i < n; ++i) out[i] = raw[i];
    } else {
        for (std::size_t i = 0; i < n; ++i)
            out[i] = (static_cast<std::uint32_t>(raw[2 * i]) << 8) | raw[2 * i + 1];
    }
    for (std::size_t i = 0; i < n; ++i)
        if (out[i] > static_cast<std::uint32_t>(h.maxval))
            throw FormatError(path + ": sample exceeds maxval");
    return out;
}

void write_p5(std::ostream& out, int width, int height, int maxval,
              const std::vector<std::uint32_t>& samples) {
    out << "P5\n" << width << " " << height << "\n" << maxval << "\n";
    if (maxval > 255) {
        for (std::uint32_t v : samples) {
            unsigned char hi = static_cast<unsigned char>((v >> 8) & 0xff);
            unsigned char lo = static_cast<unsigned char>(v & 0xff);
            out.put(static_cast<char>(hi));
            out.put(static_cast<char>(lo));
        }
    } else {
        for (std::uint32_t v : samples) out.put(static_cast<char>(v & 0xff));
    }
}

std::ofstream open_out(const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    return f;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for reading: " + path);
    return f;
}

std::uint32_t quantize(double v, int maxval) {
    // Round half up per the file-format contract.
    double q = std::floor(v * maxval + 0.5);
    if (q < 0.0) q = 0.0;
    if (q > maxval) q = maxval;
    return static_cast<std::uint32_t>(q);
}

} // namespace

void save_image_pgm(const Image& img, const std::string& path) {
    check_dims(img.height, img.width, img.channels);
    std::ofstream f = open_out(path);
    std::size_t plane = static_cast<std::size_t>(img.pixels());
    std::vector<std::uint32_t> samples(plane);
    if (img.channels == 3) f << kColorHeader << "\n";
    for (int c = 0; c < img.channels; ++c) {
        for (std::size_t j = 0; j < plane; ++j) samples[j] = quantize(img.data[c * plane + j], 255);
        write_p5(f, img.width, img.height, 255, samples);
    }
    if (!f) throw IoError("write failed: " + path);
}

Image load_image_pgm(const std::string& path) {
    std::ifstream f = open_in(path);
    int channels = 1;
    if (f.peek() == '#') {
        std::string line;
        std::getline(f, line);
        if (line != kColorHeader) throw FormatError(path + ": unknown extension header");
        channels = 3;
    }
    Image img;
    for (int c = 0; c < channels; ++c) {
        PgmHeader h = read_p5_header(f, path);
        if (c == 0) {
            img = make_image(h.height, h.width, channels);
        } else if (h.width != img.width || h.height != img.height) {
            throw FormatError(path + ": plane dimensions differ");
        }
        std::vector<std::uint32_t> samples = read_p5_payload(f, h, path);
        std::size_t plane = static_cast<std::size_t>(img.pixels());
        for (std::size_t j = 0; j < plane; ++j)
            img.data[c * plane + j] = static_cast<double>(samples[j]) / h.maxval;
    }
    return img;
}

void save_label_pgm(const LabelMap& labels, const std::string& path) {
    if (labels.num_classes < 2) throw DomainError("label map num_classes must be >= 2");
    int maxval = labels.num_classes - 1;
    if (maxval > 65535) throw DomainError("num_classes too large for PGM");
    std::vector<std::uint32_t> samples(labels.data.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (labels.data[i] < 0 || labels.data[i] >= labels.num_classes)
            throw DomainError("label value out of range");
        samples[i] = static_cast<std::uint32_t>(labels.data[i]);
    }
    std::ofstream f = open_out(path);
    write_p5(f, labels.width, labels.height, maxval, samples);
    if (!f) throw IoError("write failed: " + path);
}

LabelMap load_label_pgm(const std::string& path, int num_classes) {
    if (num_classes < 2) throw DomainError("num_classes must be >= 2");
    std::ifstream f = open_in(path);
    PgmHeader h = read_p5_header(f, path);
    std::vector<std::uint32_t> samples = read_p5_payload(f, h, path);
    LabelMap lm = make_label_map(h.height, h.width, num_classes);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (samples[i] >= static_cast<std::uint32_t>(num_classes))
            throw DomainError(path + ": label value >= num_classes");
        lm.data[i] = static_cast<std::int32_t>(samples[i]);
    }
    return lm;
}

void save_superpixel_pgm(const SuperpixelMap& sp, const std::string& path) {
    if (sp.num_superpixels < 1) throw DomainError("superpixel map is empty");
    if (sp.num_superpixels > 65535) throw DomainError("more than 65535 superpixels cannot be saved as PGM");
    std::vector<std::uint32_t> samples(sp.ids.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (sp.ids[i] < 1 || sp.ids[i] > sp.num_superpixels)
            throw DomainError("superpixel id out of range");
        samples[i] = static_cast<std::uint32_t>(sp.ids[i]);
    }
    std::ofstream f = open_out(path);
    write_p5(f, sp.width, sp.height, sp.num_superpixels, samples);
    if (!f) throw IoError("write failed: " + path);
}

SuperpixelMap load_superpixel_pgm(const std::string& path) {
    std::ifstream f = open_in(path);
    PgmHeader h = read_p5_header(f, path);
    std::vector<std::uint32_t> samples = read_p5_payload(f, h, path);
    SuperpixelMap sp;
    sp.height = h.height;
    sp.width = h.width;
    sp.num_superpixels = h.maxval;
    sp.ids.resize(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (samples[i] < 1) throw FormatError(path + ": superpixel id 0 is reserved");
        sp.ids[i] = static_cast<std::int32_t>(samples[i]);
    }
    return sp;
}

// --- Color conversion -------------------------------------------------------

namespace {

double srgb_to_linear(double c) {
    return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

double lab_f(double t) {
    constexpr double delta = 6.0 / 29.0;
    return t > delta * delta * delta ? std::cbrt(t) : t / (3.0 * delta * delta) + 4.0 / 29.0;
}

} // namespace

Image rgb_to_cielab(const Image& img) {
    if (img.channels != 3) throw DomainError("rgb_to_cielab requires a 3-channel image");
    Image out = make_image(img.height, img.width, 3);
    // D65 reference white.
    constexpr double xn = 0.95047, yn = 1.0, zn = 1.08883;
    std::size_t plane = static_cast<std::size_t>(img.pixels());
    for (std::size_t j = 0; j < plane; ++j) {
        double r = srgb_to_linear(img.data[j]);
        double g = srgb_to_linear(img.data[plane + j]);
        double b = srgb_to_linear(img.data[2 * plane + j]);
        double x = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b;
        double y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
        double z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b;
        double fx = lab_f(x / xn), fy = lab_f(y / yn), fz = lab_f(z / zn);
        double l_star = 116.0 * fy - 16.0;
        double a_star = 500.0 * (fx - fy);
        double b_star = 200.0 * (fy - fz);
        out.data[j] = std::clamp(l_star / 100.0, 0.0, 1.0);
        out.data[plane + j] = std::clamp((a_star + 110.0) / 220.0, 0.0, 1.0);
        out.data[2 * plane + j] = std::clamp((b_star + 110.0) / 220.0, 0.0, 1.0);
    }
    return out;
}

// --- Metrics ----------------------------------------------------------------

double dice(const LabelMap& pred, const LabelMap& gt, int cls) {
    if (pred.height != gt.height || pred.width != gt.width)
        throw DomainError("dice: shape mismatch");
    if (cls < 0 || (cls >= pred.num_classes && cls >= gt.num_classes))
        throw DomainError("dice: class index out of range");
    long a = 0, b = 0, both = 0;
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
        bool in_a = pred.data[i] == cls;
        bool in_b = gt.data[i] == cls;
        a += in_a;
        b += in_b;
        both += in_a && in_b;
    }
    if (a + b == 0) return 1.0; // class absent from both: perfectly segmented
    return 2.0 * static_cast<double>(both) / static_cast<double>(a + b);
}

double mean_dice(const LabelMap& pred, const LabelMap& gt, const std::vector<int>& classes) {
    if (classes.empty()) throw DomainError("mean_dice: empty class list");
    double sum = 0.0;
    for (int c : classes) sum += dice(pred, gt, c);
    return sum / static_cast<double>(classes.size());
}

std::vector<int> foreground_classes(int num_classes) {
    std::vector<int> out;
    for (int c = 1; c < num_classes; ++c) out.push_back(c);
    return out;
}

} // namespace seglab::imaging
