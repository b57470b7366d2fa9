#include "byzsim/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "byzsim/errors.hpp"
#include "byzsim/rng.hpp"

namespace byzsim {

namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

std::vector<unsigned char> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    return bytes;
}

std::uint32_t read_be32(const std::vector<unsigned char>& bytes,
                        std::size_t offset, const std::string& path) {
    if (offset + 4 > bytes.size()) {
        throw FormatError(path + ": truncated header", offset);
    }
    return (std::uint32_t(bytes[offset]) << 24) |
           (std::uint32_t(bytes[offset + 1]) << 16) |
           (std::uint32_t(bytes[offset + 2]) << 8) |
           std::uint32_t(bytes[offset + 3]);
}

} // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    const auto img = read_file(images_path);
    const auto lab = read_file(labels_path);

    if (read_be32(img, 0, images_path) != kImagesMagic) {
        throw FormatError(images_path + ": bad image magic", 0);
    }
    const std::size_t count = read_be32(img, 4, images_path);
    const std::size_t rows = read_be32(img, 8, images_path);
    const std::size_t cols = read_be32(img, 12, images_path);
    const std::size_t pixels = rows * cols;
    if (img.size() < 16 + count * pixels) {
        throw FormatError(images_path + ": truncated pixel data", img.size());
    }

    if (read_be32(lab, 0, labels_path) != kLabelsMagic) {
        throw FormatError(labels_path + ": bad label magic", 0);
    }
    const std::size_t label_count = read_be32(lab, 4, labels_path);
    if (label_count != count) {
        throw FormatError(labels_path + ": label count " +
                              std::to_string(label_count) +
                              " does not match image count " + std::to_string(count),
                          4);
    }
    if (lab.size() < 8 + label_count) {
        throw FormatError(labels_path + ": truncated label data", lab.size());
    }

    Dataset data;
    data.inputs = Matrix(count, pixels);
    data.labels.resize(count);
    for (std::size_t i = 0; i < count * pixels; ++i) {
        data.inputs.data[i] = img[16 + i] / 255.0;
    }
    int max_label = 0;
    for (std::size_t i = 0; i < count; ++i) {
        data.labels[i] = lab[8 + i];
        max_label = std::max(max_label, data.labels[i]);
    }
    data.class_count = static_cast<std::size_t>(max_label) + 1;
    data.image_width = cols;
    return data;
}

double blob_center(std::size_t class_count, std::size_t dim, std::size_t label,
                   std::size_t feature) {
    const std::size_t signal_start = dim - dim / 4;
    if (dim - signal_start >= class_count) {
        return feature == signal_start + label ? 0.8 : 0.0;
    }
    return feature % class_count == label ? 0.8 : 0.0;
}

Dataset synth_blobs(std::size_t class_count, std::size_t dim,
                    std::size_t samples_per_class, double spread,
                    std::uint64_t seed) {
    if (class_count == 0 || dim == 0 || samples_per_class == 0) {
        throw ConfigError("synth_blobs: all counts must be positive");
    }
    const std::size_t total = class_count * samples_per_class;
    Dataset data;
    data.inputs = Matrix(total, dim);
    data.labels.resize(total);
    data.class_count = class_count;
    const std::size_t width = static_cast<std::size_t>(std::lround(std::sqrt(double(dim))));
    data.image_width = width * width == dim ? width : dim;

    Rng rng(seed);
    std::size_t row = 0;
    for (std::size_t c = 0; c < class_count; ++c) {
        for (std::size_t s = 0; s < samples_per_class; ++s, ++row) {
            double* out = data.inputs.row(row);
            for (std::size_t j = 0; j < dim; ++j) {
                const double center = blob_center(class_count, dim, c, j);
                const double v = spread > 0.0 ? rng.normal(center, spread) : center;
                out[j] = std::clamp(v, 0.0, 1.0);
            }
            data.labels[row] = static_cast<int>(c);
        }
    }
    return data;
}

DataSplit split_iid(const Dataset& dataset, std::size_t n, std::uint64_t seed) {
    if (n == 0 || n > dataset.size()) {
        throw ConfigError("split_iid: need 1 <= n <= sample count, got n=" +
                          std::to_string(n) + " with " +
                          std::to_string(dataset.size()) + " samples");
    }
    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    rng.shuffle(order);

    DataSplit split;
    split.chunks.resize(n);
    for (std::size_t i = 0; i < order.size(); ++i) {
        split.chunks[i % n].push_back(order[i]);
    }
    return split;
}

Dataset gather(const Dataset& dataset, const std::vector<std::size_t>& indices) {
    Dataset out;
    out.inputs = Matrix(indices.size(), dataset.feature_count());
    out.labels.resize(indices.size());
    out.class_count = dataset.class_count;
    out.image_width = dataset.image_width;
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const std::size_t src = indices[i];
        std::copy(dataset.inputs.row(src),
                  dataset.inputs.row(src) + dataset.feature_count(),
                  out.inputs.row(i));
        out.labels[i] = dataset.labels[src];
    }
    return out;
}

} // namespace byzsim
