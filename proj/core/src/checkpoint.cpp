#include "sll/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "sll/error.hpp"

namespace sll {

namespace {

constexpr char kMagic[8] = {'S', 'L', 'L', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kVersion = 1;

class Writer {
public:
    explicit Writer(const std::string& path) : out_(path, std::ios::binary), path_(path) {
        if (!out_) throw IoError("cannot open '" + path + "' for writing");
    }
    void bytes(const void* p, std::size_t n) {
        out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
    }
    void u8(std::uint8_t v) { bytes(&v, 1); }
    void u32(std::uint32_t v) {
        std::uint8_t b[4];
        for (int i = 0; i < 4; ++i) b[i] = static_cast<std::uint8_t>(v >> (8 * i));
        bytes(b, 4);
    }
    void u64(std::uint64_t v) {
        std::uint8_t b[8];
        for (int i = 0; i < 8; ++i) b[i] = static_cast<std::uint8_t>(v >> (8 * i));
        bytes(b, 8);
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void f64s(const std::vector<double>& v) {
        for (double x : v) f64(x);
    }
    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        bytes(s.data(), s.size());
    }
    void close() {
        out_.flush();
        if (!out_) throw IoError("write failed on '" + path_ + "'");
    }

private:
    std::ofstream out_;
    std::string path_;
};

class Reader {
public:
    explicit Reader(const std::string& path) : path_(path) {
        std::ifstream in(path, std::ios::binary | std::ios::ate);
        if (!in) throw IoError("cannot open '" + path + "'");
        const auto size = in.tellg();
        in.seekg(0);
        buf_.resize(static_cast<std::size_t>(size));
        if (!in.read(reinterpret_cast<char*>(buf_.data()), size))
            throw IoError("short read on '" + path + "'");
    }
    [[noreturn]] void fail(const std::string& what) const {
        throw FormatError(path_ + ": " + what + " at byte offset " + std::to_string(pos_));
    }
    void need(std::size_t n) const {
        if (pos_ + n > buf_.size())
            throw FormatError(path_ + ": truncated at byte offset " + std::to_string(pos_) +
                              " (need " + std::to_string(n) + " more bytes of " +
                              std::to_string(buf_.size()) + ")");
    }
    void bytes(void* p, std::size_t n) {
        need(n);
        std::memcpy(p, buf_.data() + pos_, n);
        pos_ += n;
    }
    std::uint8_t u8() {
        need(1);
        return buf_[pos_++];
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t(buf_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t(buf_[pos_ + i]) << (8 * i);
        pos_ += 8;
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    void f64s(std::vector<double>& v) {
        for (double& x : v) x = f64();
    }
    std::string str() {
        const std::uint32_t n = u32();
        if (n > 4096) fail("string of " + std::to_string(n) + " bytes");
        need(n);
        std::string s(reinterpret_cast<const char*>(buf_.data() + pos_), n);
        pos_ += n;
        return s;
    }
    std::size_t pos() const { return pos_; }
    bool at_end() const { return pos_ == buf_.size(); }

private:
    std::string path_;
    std::vector<std::uint8_t> buf_;
    std::size_t pos_ = 0;
};

void write_dense(Writer& w, const DenseLayer& layer) {
    w.u32(static_cast<std::uint32_t>(layer.w.cols));
    w.u32(static_cast<std::uint32_t>(layer.w.rows));
    w.u8(layer.activation == Activation::relu ? 0 : 1);
    w.f64s(layer.w.data);
    w.f64s(layer.b);
}

void read_dense_into(Reader& r, DenseLayer& layer) {
    const std::uint32_t in = r.u32();
    const std::uint32_t out = r.u32();
    const std::uint8_t act = r.u8();
    if (act > 1) r.fail("unknown activation code " + std::to_string(int(act)));
    if (in != layer.w.cols || out != layer.w.rows)
        r.fail("dense layer is " + std::to_string(out) + "x" + std::to_string(in) +
               ", expected " + shape_string(layer.w));
    if ((act == 0) != (layer.activation == Activation::relu)) r.fail("activation mismatch");
    r.f64s(layer.w.data);
    r.f64s(layer.b);
    for (double v : layer.w.data)
        if (!std::isfinite(v)) r.fail("non-finite weight");
}

}  // namespace

void save_checkpoint(const std::string& path, const Model& model, const HeadSet& heads) {
    Writer w(path);
    w.bytes(kMagic, sizeof kMagic);
    w.u32(kVersion);
    w.str(model.arch.text());
    w.u64(model.seed);
    w.u32(static_cast<std::uint32_t>(model.input_dim));
    w.u32(static_cast<std::uint32_t>(model.input_shape.c));
    w.u32(static_cast<std::uint32_t>(model.input_shape.h));
    w.u32(static_cast<std::uint32_t>(model.input_shape.w));
    w.u32(static_cast<std::uint32_t>(model.n_classes));
    w.u32(static_cast<std::uint32_t>(model.blocks.size()));
    for (const auto& block : model.blocks) {
        if (const auto* d = std::get_if<DenseBlock>(&block)) {
            w.u8(0);
            write_dense(w, d->layer);
        } else {
            const auto& c = std::get<ConvBlock>(block);
            w.u8(1);
            w.u32(static_cast<std::uint32_t>(c.conv.in_c));
            w.u32(static_cast<std::uint32_t>(c.conv.out_c));
            w.u32(static_cast<std::uint32_t>(c.conv.kh));
            w.u32(static_cast<std::uint32_t>(c.conv.kw));
            w.u32(static_cast<std::uint32_t>(c.conv.stride));
            w.u32(static_cast<std::uint32_t>(c.conv.pad));
            w.u8(c.pool ? 1 : 0);
            w.f64s(c.conv.kernels.data);
            w.f64s(c.conv.bias);
        }
    }
    write_dense(w, model.classifier);
    w.u8(heads.label_concat ? 1 : 0);
    w.u32(static_cast<std::uint32_t>(heads.pool_dim));
    w.u32(static_cast<std::uint32_t>(heads.heads.size()));
    for (const auto& head : heads.heads) {
        w.u64(head.seed);
        w.u32(static_cast<std::uint32_t>(head.in_dim));
        w.u32(static_cast<std::uint32_t>(head.out_dim));
        w.f64(head.keep_prob);
    }
    w.close();
}

CheckpointBundle load_checkpoint(const std::string& path) {
    Reader r(path);
    char magic[8];
    r.bytes(magic, sizeof magic);
    if (std::memcmp(magic, kMagic, sizeof kMagic) != 0)
        throw FormatError(path + ": bad magic at byte offset 0");
    const std::uint32_t version = r.u32();
    if (version != kVersion)
        throw FormatError(path + ": unsupported version " + std::to_string(version) +
                          " at byte offset 8");
    const std::string arch_text = r.str();
    ArchSpec arch;
    try {
        arch = ArchSpec::parse(arch_text);
    } catch (const InvalidInputError& e) {
        throw FormatError(path + ": " + e.what());
    }
    const std::uint64_t seed = r.u64();
    const std::uint32_t input_dim = r.u32();
    ConvShape input_shape{r.u32(), r.u32(), r.u32()};
    const std::uint32_t n_classes = r.u32();
    if (n_classes < 2 || n_classes > 100000) r.fail("implausible class count");

    CheckpointBundle bundle;
    // Rebuild the skeleton (shapes, activations, head layout), then overwrite
    // every parameter from the file.
    bundle.model = make_model(arch, input_dim, input_shape, n_classes, seed);

    const std::uint32_t n_blocks = r.u32();
    if (n_blocks != bundle.model.blocks.size())
        r.fail(std::to_string(n_blocks) + " blocks for arch '" + arch_text + "' (expected " +
               std::to_string(bundle.model.blocks.size()) + ")");
    for (auto& block : bundle.model.blocks) {
        const std::uint8_t kind = r.u8();
        if (auto* d = std::get_if<DenseBlock>(&block)) {
            if (kind != 0) r.fail("block kind mismatch (expected dense)");
            read_dense_into(r, d->layer);
        } else {
            if (kind != 1) r.fail("block kind mismatch (expected conv)");
            auto& c = std::get<ConvBlock>(block);
            const std::uint32_t in_c = r.u32(), out_c = r.u32();
            const std::uint32_t kh = r.u32(), kw = r.u32();
            const std::uint32_t stride = r.u32(), pad = r.u32();
            const std::uint8_t pool = r.u8();
            if (in_c != c.conv.in_c || out_c != c.conv.out_c || kh != c.conv.kh ||
                kw != c.conv.kw || stride != c.conv.stride || pad != c.conv.pad ||
                (pool != 0) != c.pool)
                r.fail("conv geometry mismatch");
            r.f64s(c.conv.kernels.data);
            r.f64s(c.conv.bias);
        }
    }
    read_dense_into(r, bundle.model.classifier);

    bundle.heads.label_concat = r.u8() != 0;
    bundle.heads.pool_dim = r.u32();
    bundle.heads.n_classes = n_classes;
    const std::uint32_t n_heads = r.u32();
    if (n_heads != bundle.model.depth())
        r.fail(std::to_string(n_heads) + " heads for depth " +
               std::to_string(bundle.model.depth()));
    for (std::uint32_t i = 0; i < n_heads; ++i) {
        const std::uint64_t head_seed = r.u64();
        const std::uint32_t in = r.u32();
        const std::uint32_t out = r.u32();
        const double keep = r.f64();
        if (!(keep > 0.0 && keep <= 1.0)) r.fail("keep_prob out of range");
        const std::size_t base = bundle.model.feature_dim(i);
        const std::size_t pooled =
            (bundle.heads.pool_dim > 0 && base > bundle.heads.pool_dim) ? bundle.heads.pool_dim
                                                                        : base;
        const std::size_t expect_in = pooled + (bundle.heads.label_concat ? n_classes : 0);
        if (in != expect_in || out != n_classes)
            r.fail("head " + std::to_string(i) + " is " + std::to_string(out) + "x" +
                   std::to_string(in) + ", expected " + std::to_string(n_classes) + "x" +
                   std::to_string(expect_in));
        bundle.heads.heads.push_back(make_projection_head(in, out, keep, head_seed));
    }
    if (!r.at_end())
        throw FormatError(path + ": " + std::to_string(r.pos()) +
                          " bytes consumed but file continues (trailing garbage at byte offset " +
                          std::to_string(r.pos()) + ")");
    return bundle;
}

}  // namespace sll
