#include "sll/data.hpp"

#include <cstdlib>
#include <fstream>

#include "sll/error.hpp"

namespace sll {

namespace {

std::vector<unsigned char> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw IoError("cannot open '" + path + "'");
    const auto size = in.tellg();
    in.seekg(0);
    std::vector<unsigned char> bytes(static_cast<std::size_t>(size));
    if (!in.read(reinterpret_cast<char*>(bytes.data()), size))
        throw IoError("short read on '" + path + "'");
    return bytes;
}

std::uint32_t be32(const std::vector<unsigned char>& b, std::size_t off, const std::string& path) {
    if (off + 4 > b.size())
        throw FormatError(path + ": truncated at byte offset " + std::to_string(off) +
                          " (need 4 bytes)");
    return (std::uint32_t(b[off]) << 24) | (std::uint32_t(b[off + 1]) << 16) |
           (std::uint32_t(b[off + 2]) << 8) | std::uint32_t(b[off + 3]);
}

struct IdxImages {
    std::size_t n, h, w;
    const unsigned char* pixels;
};

IdxImages parse_idx_images(const std::vector<unsigned char>& b, const std::string& path) {
    const std::uint32_t magic = be32(b, 0, path);
    if (magic != 0x00000803)
        throw FormatError(path + ": bad image magic 0x" + std::to_string(magic) +
                          " at byte offset 0");
    IdxImages img;
    img.n = be32(b, 4, path);
    img.h = be32(b, 8, path);
    img.w = be32(b, 12, path);
    const std::size_t need = 16 + img.n * img.h * img.w;
    if (b.size() != need)
        throw FormatError(path + ": expected " + std::to_string(need) + " bytes, found " +
                          std::to_string(b.size()) + " (payload starts at byte offset 16)");
    img.pixels = b.data() + 16;
    return img;
}

std::vector<int> parse_idx_labels(const std::vector<unsigned char>& b, const std::string& path,
                                  std::size_t expect_n) {
    const std::uint32_t magic = be32(b, 0, path);
    if (magic != 0x00000801)
        throw FormatError(path + ": bad label magic 0x" + std::to_string(magic) +
                          " at byte offset 0");
    const std::size_t n = be32(b, 4, path);
    if (n != expect_n)
        throw FormatError(path + ": " + std::to_string(n) + " labels for " +
                          std::to_string(expect_n) + " images");
    if (b.size() != 8 + n)
        throw FormatError(path + ": expected " + std::to_string(8 + n) + " bytes, found " +
                          std::to_string(b.size()));
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        const unsigned char y = b[8 + i];
        if (y > 9)
            throw FormatError(path + ": label " + std::to_string(int(y)) + " at byte offset " +
                              std::to_string(8 + i) + " out of range");
        labels[i] = y;
    }
    return labels;
}

// Appends the records of one label+pixels binary file.
void parse_pixel_records(const std::string& path, std::size_t label_bytes,
                         std::size_t label_index, std::size_t n_classes, Matrix& x,
                         std::vector<int>& labels, std::size_t& row) {
    const auto bytes = read_file(path);
    const std::size_t record = label_bytes + 3072;
    if (bytes.size() % record != 0)
        throw FormatError(path + ": size " + std::to_string(bytes.size()) +
                          " is not a multiple of the " + std::to_string(record) +
                          "-byte record (first partial record at byte offset " +
                          std::to_string(bytes.size() - bytes.size() % record) + ")");
    const std::size_t n = bytes.size() / record;
    for (std::size_t i = 0; i < n; ++i, ++row) {
        const std::size_t off = i * record;
        if (row >= x.rows)
            throw FormatError(path + ": more than " + std::to_string(x.rows) +
                              " records (surplus record at byte offset " + std::to_string(off) +
                              ")");
        const unsigned char y = bytes[off + label_index];
        if (y >= n_classes)
            throw FormatError(path + ": label " + std::to_string(int(y)) + " at byte offset " +
                              std::to_string(off + label_index) + " out of range (expected < " +
                              std::to_string(n_classes) + ")");
        labels[row] = y;
        double* dst = x.data.data() + row * 3072;
        const unsigned char* src = bytes.data() + off + label_bytes;
        for (std::size_t j = 0; j < 3072; ++j) dst[j] = src[j] / 255.0;
    }
}

void standardize_channels(Matrix& x, std::size_t channels, const double* mean, const double* sd) {
    const std::size_t plane = x.cols / channels;
    for (std::size_t i = 0; i < x.rows; ++i) {
        double* row = x.data.data() + i * x.cols;
        for (std::size_t c = 0; c < channels; ++c)
            for (std::size_t j = 0; j < plane; ++j)
                row[c * plane + j] = (row[c * plane + j] - mean[c]) / sd[c];
    }
}

}  // namespace

Dataset load_mnist(const std::string& dir, Split split) {
    const std::string img_path =
        dir + (split == Split::train ? "/train-images-idx3-ubyte" : "/t10k-images-idx3-ubyte");
    const std::string lbl_path =
        dir + (split == Split::train ? "/train-labels-idx1-ubyte" : "/t10k-labels-idx1-ubyte");
    const auto img_bytes = read_file(img_path);
    const auto img = parse_idx_images(img_bytes, img_path);
    const auto lbl_bytes = read_file(lbl_path);

    Dataset ds;
    ds.labels = parse_idx_labels(lbl_bytes, lbl_path, img.n);
    ds.n_classes = 10;
    ds.channels = 1;
    ds.height = img.h;
    ds.width = img.w;
    ds.x = Matrix(img.n, img.h * img.w);
    const double mean = 0.1307, sd = 0.3081;
    for (std::size_t i = 0; i < ds.x.data.size(); ++i)
        ds.x.data[i] = (img.pixels[i] / 255.0 - mean) / sd;
    return ds;
}

Dataset load_cifar10(const std::string& dir, Split split) {
    std::vector<std::string> files;
    if (split == Split::train)
        for (int i = 1; i <= 5; ++i) files.push_back(dir + "/data_batch_" + std::to_string(i) + ".bin");
    else
        files.push_back(dir + "/test_batch.bin");

    const std::size_t n = split == Split::train ? 50000 : 10000;
    Dataset ds;
    ds.n_classes = 10;
    ds.channels = 3;
    ds.height = ds.width = 32;
    ds.x = Matrix(n, 3072);
    ds.labels.resize(n);
    std::size_t row = 0;
    for (const auto& f : files) parse_pixel_records(f, 1, 0, 10, ds.x, ds.labels, row);
    if (row != n)
        throw FormatError(dir + ": expected " + std::to_string(n) + " records, found " +
                          std::to_string(row));
    static const double mean[3] = {0.4914, 0.4822, 0.4465};
    static const double sd[3] = {0.2470, 0.2435, 0.2616};
    standardize_channels(ds.x, 3, mean, sd);
    return ds;
}

Dataset load_cifar100(const std::string& dir, Split split) {
    const std::string file = dir + (split == Split::train ? "/train.bin" : "/test.bin");
    const std::size_t n = split == Split::train ? 50000 : 10000;
    Dataset ds;
    ds.n_classes = 100;
    ds.channels = 3;
    ds.height = ds.width = 32;
    ds.x = Matrix(n, 3072);
    ds.labels.resize(n);
    std::size_t row = 0;
    // records: coarse label byte, fine label byte, pixels -> keep the fine one
    parse_pixel_records(file, 2, 1, 100, ds.x, ds.labels, row);
    if (row != n)
        throw FormatError(file + ": expected " + std::to_string(n) + " records, found " +
                          std::to_string(row));
    static const double mean[3] = {0.5071, 0.4865, 0.4409};
    static const double sd[3] = {0.2673, 0.2564, 0.2762};
    standardize_channels(ds.x, 3, mean, sd);
    return ds;
}

Dataset make_blobs(std::size_t n, std::size_t dim, std::size_t k, double spread,
                   std::uint64_t seed) {
    if (n == 0 || dim == 0 || k == 0) throw InvalidInputError("make_blobs: zero size");
    if (!(spread > 0.0)) throw InvalidInputError("make_blobs: spread must be positive");
    SeededRng rng(seed);
    Matrix centers(k, dim);
    for (double& c : centers.data) c = 3.0 * rng.normal();
    Dataset ds;
    ds.n_classes = k;
    ds.x = Matrix(n, dim);
    ds.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t y = i % k;  // balanced classes
        ds.labels[i] = static_cast<int>(y);
        for (std::size_t j = 0; j < dim; ++j)
            ds.x(i, j) = centers(y, j) + spread * rng.normal();
    }
    return ds;
}

void flip_horizontal_inplace(std::span<double> row, std::size_t channels, std::size_t height,
                             std::size_t width) {
    if (row.size() != channels * height * width)
        throw ShapeError("flip_horizontal_inplace: row of " + std::to_string(row.size()) +
                         " vs geometry " + std::to_string(channels) + "x" +
                         std::to_string(height) + "x" + std::to_string(width));
    for (std::size_t c = 0; c < channels; ++c)
        for (std::size_t y = 0; y < height; ++y) {
            double* line = row.data() + (c * height + y) * width;
            for (std::size_t x = 0; x < width / 2; ++x)
                std::swap(line[x], line[width - 1 - x]);
        }
}

std::string resolve_data_root(const std::string& cli_value) {
    if (!cli_value.empty()) return cli_value;
    if (const char* env = std::getenv("SLL_DATA_ROOT"); env && *env) return env;
    throw InvalidInputError("no dataset root: pass --data-root or set SLL_DATA_ROOT");
}

}  // namespace sll
