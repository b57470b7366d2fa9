#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "byzsim/matrix.hpp"

namespace byzsim {

// Supervised classification data. Inputs are row-per-sample with values in
// [0, 1]; image_width locates pixels for the pattern backdoor.
struct Dataset {
    Matrix inputs;
    std::vector<int> labels;
    std::size_t class_count = 0;
    std::size_t image_width = 0;

    std::size_t size() const { return inputs.rows; }
    std::size_t feature_count() const { return inputs.cols; }
};

// Disjoint per-worker sample indices; sizes differ by at most one.
struct DataSplit {
    std::vector<std::vector<std::size_t>> chunks;
};

// Reads an IDX image/label file pair (the MNIST container format: big-endian
// magic 0x00000803 / 0x00000801, dimension sizes, then unsigned bytes).
// Pixels are scaled to [0, 1] by /255. Throws FormatError with the byte
// offset on bad magic, truncation, or image/label count mismatch.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

// Gaussian blobs around fixed per-class lattice centers, clipped to [0, 1].
// Deterministic in the seed. image_width is set to sqrt(dim) when dim is a
// perfect square (so pattern backdoors have somewhere to live), else dim.
Dataset synth_blobs(std::size_t class_count, std::size_t dim,
                    std::size_t samples_per_class, double spread,
                    std::uint64_t seed);

// The lattice: class signal lives in the last quarter of the features (the
// bottom rows of the image, keeping the top-left corner uninformative the
// way digit-image corners are), at 0.8 against a 0.2 background. When the
// last quarter cannot host one dimension per class the signal spans the
// whole range instead.
double blob_center(std::size_t class_count, std::size_t dim, std::size_t label,
                   std::size_t feature);

// Seeded global shuffle followed by round-robin assignment into n chunks.
// Requires n <= dataset size.
DataSplit split_iid(const Dataset& dataset, std::size_t n, std::uint64_t seed);

// Copies the selected rows into a standalone inputs/labels pair.
Dataset gather(const Dataset& dataset, const std::vector<std::size_t>& indices);

} // namespace byzsim
