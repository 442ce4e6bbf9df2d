#ifndef NEVO_DATASET_HPP
#define NEVO_DATASET_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "nevo/train.hpp"

namespace nevo {

// A labeled image set in IDX byte form.
struct Dataset {
    int size_x = 0;
    int size_y = 0;
    std::vector<std::uint8_t> pixels;   // count * size_y * size_x
    std::vector<std::uint8_t> labels;

    int count() const { return static_cast<int>(labels.size()); }
    double pixel(int sample, int y, int x) const {
        return pixels[(static_cast<std::size_t>(sample) * size_y + y) * size_x +
                      x] /
               255.0;
    }
    int label(int sample) const { return labels[static_cast<std::size_t>(sample)]; }

    bool operator==(const Dataset&) const = default;
};

// IDX codecs: 0x00000803 image files, 0x00000801 label files, big-endian
// headers. load_idx throws DataError on malformed or mismatched files.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);
void save_idx(const Dataset& d, const std::string& images_path,
              const std::string& labels_path);

// Shuffles with the seed, then cuts: first train_count samples versus the
// rest. Throws DataError when train_count is outside [0, count].
std::pair<Dataset, Dataset> split(const Dataset& d, int train_count,
                                  std::uint64_t seed);

// First n samples in order.
Dataset take(const Dataset& d, int n);

// Zero-pad onto a larger centered canvas (e.g. 28 -> 32). Off by default
// everywhere; kept for experiments with pooling-heavy nets.
Dataset pad_to(const Dataset& d, int size_x, int size_y);

// FNV-1a over dimensions, pixels, and labels; workers compare this against
// the master's value during the handshake.
std::uint64_t fingerprint(const Dataset& d);

// Image bytes scaled to [0, 1] doubles for the trainer.
struct DenseData {
    std::vector<double> images;
    std::vector<int> labels;
    int size_x = 0;
    int size_y = 0;

    DataView view() const {
        return {images.data(), labels.data(), static_cast<int>(labels.size()),
                size_x, size_y};
    }
};
DenseData materialize(const Dataset& d);

} // namespace nevo

#endif
