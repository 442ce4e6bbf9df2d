#include "nevo/dataset.hpp"

#include <algorithm>
#include <cstddef>
#include <fstream>

#include "nevo/errors.hpp"
#include "nevo/rng.hpp"

namespace nevo {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::uint32_t read_u32_be(std::istream& in, const std::string& path) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) {
        throw DataError(path + ": truncated IDX header");
    }
    return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) |
           (std::uint32_t{b[2]} << 8) | std::uint32_t{b[3]};
}

void write_u32_be(std::ostream& out, std::uint32_t v) {
    const unsigned char b[4] = {
        static_cast<unsigned char>(v >> 24),
        static_cast<unsigned char>(v >> 16),
        static_cast<unsigned char>(v >> 8),
        static_cast<unsigned char>(v),
    };
    out.write(reinterpret_cast<const char*>(b), 4);
}

void read_exact(std::istream& in, std::vector<std::uint8_t>& buf,
                const std::string& path) {
    if (!in.read(reinterpret_cast<char*>(buf.data()),
                 static_cast<std::streamsize>(buf.size()))) {
        throw DataError(path + ": truncated IDX payload");
    }
    in.peek();
    if (!in.eof()) throw DataError(path + ": trailing bytes after IDX payload");
}

} // namespace

Dataset load_idx(const std::string& images_path,
                 const std::string& labels_path) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img) throw DataError(images_path + ": cannot open");
    if (read_u32_be(img, images_path) != kImageMagic) {
        throw DataError(images_path + ": not an IDX image file");
    }
    const std::uint32_t count = read_u32_be(img, images_path);
    const std::uint32_t rows = read_u32_be(img, images_path);
    const std::uint32_t cols = read_u32_be(img, images_path);
    if (rows == 0 || cols == 0 || rows > 4096 || cols > 4096) {
        throw DataError(images_path + ": implausible image dimensions");
    }

    Dataset d;
    d.size_y = static_cast<int>(rows);
    d.size_x = static_cast<int>(cols);
    d.pixels.resize(static_cast<std::size_t>(count) * rows * cols);
    read_exact(img, d.pixels, images_path);

    std::ifstream lab(labels_path, std::ios::binary);
    if (!lab) throw DataError(labels_path + ": cannot open");
    if (read_u32_be(lab, labels_path) != kLabelMagic) {
        throw DataError(labels_path + ": not an IDX label file");
    }
    const std::uint32_t label_count = read_u32_be(lab, labels_path);
    if (label_count != count) {
        throw DataError(labels_path + ": label count does not match images");
    }
    d.labels.resize(count);
    read_exact(lab, d.labels, labels_path);
    return d;
}

void save_idx(const Dataset& d, const std::string& images_path,
              const std::string& labels_path) {
    std::ofstream img(images_path, std::ios::binary | std::ios::trunc);
    if (!img) throw DataError(images_path + ": cannot open for writing");
    write_u32_be(img, kImageMagic);
    write_u32_be(img, static_cast<std::uint32_t>(d.count()));
    write_u32_be(img, static_cast<std::uint32_t>(d.size_y));
    write_u32_be(img, static_cast<std::uint32_t>(d.size_x));
    img.write(reinterpret_cast<const char*>(d.pixels.data()),
              static_cast<std::streamsize>(d.pixels.size()));
    if (!img) throw DataError(images_path + ": write failed");

    std::ofstream lab(labels_path, std::ios::binary | std::ios::trunc);
    if (!lab) throw DataError(labels_path + ": cannot open for writing");
    write_u32_be(lab, kLabelMagic);
    write_u32_be(lab, static_cast<std::uint32_t>(d.count()));
    lab.write(reinterpret_cast<const char*>(d.labels.data()),
              static_cast<std::streamsize>(d.labels.size()));
    if (!lab) throw DataError(labels_path + ": write failed");
}

std::pair<Dataset, Dataset> split(const Dataset& d, int train_count,
                                  std::uint64_t seed) {
    if (train_count < 0 || train_count > d.count()) {
        throw DataError("split: train_count outside [0, count]");
    }
    std::vector<int> order(static_cast<std::size_t>(d.count()));
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    Rng rng(seed);
    for (int i = d.count() - 1; i > 0; --i) {
        std::swap(order[static_cast<std::size_t>(i)],
                  order[static_cast<std::size_t>(rng.uniform_int(i + 1))]);
    }

    const std::size_t elems = static_cast<std::size_t>(d.size_y) * d.size_x;
    auto gather = [&](int from, int to) {
        Dataset out;
        out.size_x = d.size_x;
        out.size_y = d.size_y;
        out.pixels.reserve(static_cast<std::size_t>(to - from) * elems);
        out.labels.reserve(static_cast<std::size_t>(to - from));
        for (int i = from; i < to; ++i) {
            const int src = order[static_cast<std::size_t>(i)];
            const auto* base = d.pixels.data() + src * elems;
            out.pixels.insert(out.pixels.end(), base, base + elems);
            out.labels.push_back(d.labels[static_cast<std::size_t>(src)]);
        }
        return out;
    };
    return {gather(0, train_count), gather(train_count, d.count())};
}

Dataset take(const Dataset& d, int n) {
    if (n < 0 || n > d.count()) throw DataError("take: n outside [0, count]");
    Dataset out;
    out.size_x = d.size_x;
    out.size_y = d.size_y;
    const std::size_t elems = static_cast<std::size_t>(d.size_y) * d.size_x;
    out.pixels.assign(d.pixels.begin(),
                      d.pixels.begin() + static_cast<std::ptrdiff_t>(n * elems));
    out.labels.assign(d.labels.begin(), d.labels.begin() + n);
    return out;
}

Dataset pad_to(const Dataset& d, int size_x, int size_y) {
    if (size_x < d.size_x || size_y < d.size_y) {
        throw DataError("pad_to: target smaller than source");
    }
    Dataset out;
    out.size_x = size_x;
    out.size_y = size_y;
    out.labels = d.labels;
    out.pixels.assign(
        static_cast<std::size_t>(d.count()) * size_y * size_x, 0);
    const int off_y = (size_y - d.size_y) / 2;
    const int off_x = (size_x - d.size_x) / 2;
    for (int s = 0; s < d.count(); ++s) {
        for (int y = 0; y < d.size_y; ++y) {
            const auto* src =
                d.pixels.data() +
                (static_cast<std::size_t>(s) * d.size_y + y) * d.size_x;
            auto* dst = out.pixels.data() +
                        (static_cast<std::size_t>(s) * size_y + off_y + y) *
                            size_x +
                        off_x;
            std::copy(src, src + d.size_x, dst);
        }
    }
    return out;
}

std::uint64_t fingerprint(const Dataset& d) {
    std::uint64_t h = 14695981039346656037ULL;
    auto mix = [&h](std::uint8_t byte) {
        h ^= byte;
        h *= 1099511628211ULL;
    };
    auto mix_u32 = [&mix](std::uint32_t v) {
        mix(static_cast<std::uint8_t>(v >> 24));
        mix(static_cast<std::uint8_t>(v >> 16));
        mix(static_cast<std::uint8_t>(v >> 8));
        mix(static_cast<std::uint8_t>(v));
    };
    mix_u32(static_cast<std::uint32_t>(d.size_x));
    mix_u32(static_cast<std::uint32_t>(d.size_y));
    mix_u32(static_cast<std::uint32_t>(d.count()));
    for (std::uint8_t b : d.pixels) mix(b);
    for (std::uint8_t b : d.labels) mix(b);
    return h;
}

DenseData materialize(const Dataset& d) {
    DenseData out;
    out.size_x = d.size_x;
    out.size_y = d.size_y;
    out.images.resize(d.pixels.size());
    for (std::size_t i = 0; i < d.pixels.size(); ++i) {
        out.images[i] = d.pixels[i] / 255.0;
    }
    out.labels.assign(d.labels.begin(), d.labels.end());
    return out;
}

} // namespace nevo
