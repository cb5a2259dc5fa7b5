#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <vector>

#include "helpers.hpp"
#include "sll/checkpoint.hpp"
#include "sll/data.hpp"
#include "sll/error.hpp"
#include "sll/trainer.hpp"

using namespace sll;
namespace fs = std::filesystem;

namespace {

struct TempFile {
    fs::path path;
    explicit TempFile(const std::string& name) {
        path = fs::temp_directory_path() / ("sll-ckpt-" + std::to_string(counter++) + "-" + name);
    }
    ~TempFile() { fs::remove(path); }
    std::string str() const { return path.string(); }
    static inline int counter = 0;
};

// Train a small model a little so the checkpoint holds non-initial weights.
std::pair<Model, HeadSet> trained_toy() {
    const auto ds = make_blobs(128, 10, 4, 0.8, 17);
    ArchSpec arch = ArchSpec::parse("mlp:14,12");
    Model model = make_model(arch, 10, {}, 4, 23);
    HeadSet heads = make_heads(model, 0.8, false, 0, 29);
    TrainConfig cfg;
    cfg.opt = {OptKind::adam, 0.01};
    cfg.epochs = 3;
    cfg.batch_size = 32;
    train_run(model, heads, ds, ds, cfg, nullptr, nullptr);
    return {std::move(model), std::move(heads)};
}

std::vector<unsigned char> slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return std::vector<unsigned char>(std::istreambuf_iterator<char>(in),
                                      std::istreambuf_iterator<char>());
}

void spit(const std::string& path, const std::vector<unsigned char>& bytes) {
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_CASE("checkpoints round-trip to bitwise-identical behavior") {
    auto [model, heads] = trained_toy();
    TempFile file("roundtrip.bin");
    save_checkpoint(file.str(), model, heads);
    const auto bundle = load_checkpoint(file.str());

    // parameters byte for byte
    CHECK(bundle.model.classifier.w.data == model.classifier.w.data);
    CHECK(bundle.model.classifier.b == model.classifier.b);
    for (std::size_t i = 0; i < model.blocks.size(); ++i) {
        const auto& a = std::get<DenseBlock>(model.blocks[i]).layer;
        const auto& b = std::get<DenseBlock>(bundle.model.blocks[i]).layer;
        CHECK(a.w.data == b.w.data);
        CHECK(a.b == b.b);
    }
    // heads regenerate to the same matrices
    REQUIRE(bundle.heads.heads.size() == heads.heads.size());
    for (std::size_t i = 0; i < heads.heads.size(); ++i) {
        CHECK(bundle.heads.heads[i].weights.data == heads.heads[i].weights.data);
        CHECK(bundle.heads.heads[i].keep_prob == heads.heads[i].keep_prob);
    }
    // optimizer state intentionally does not survive
    CHECK(bundle.model.classifier.opt.t == 0);
    CHECK(bundle.model.classifier.opt.w_state.m.empty());

    // identical evaluation on fresh data
    const auto probe = make_blobs(64, 10, 4, 0.8, 99);
    const auto e1 = evaluate(model, probe);
    const auto e2 = evaluate(bundle.model, probe);
    CHECK(e1.accuracy == e2.accuracy);
    CHECK(e1.mean_loss == e2.mean_loss);

    // and identical per-layer probes (heads included)
    const auto p1 = per_layer_probe(model, heads, probe);
    const auto p2 = per_layer_probe(bundle.model, bundle.heads, probe);
    REQUIRE(p1.size() == p2.size());
    for (std::size_t i = 0; i < p1.size(); ++i) {
        CHECK(p1[i].pred_loss == p2[i].pred_loss);
        CHECK(p1[i].bc_loss == p2[i].bc_loss);
        CHECK(p1[i].head_acc == p2[i].head_acc);
    }
}

TEST_CASE("a loaded checkpoint can keep training deterministically") {
    auto [model, heads] = trained_toy();
    TempFile file("resume.bin");
    save_checkpoint(file.str(), model, heads);
    auto bundle = load_checkpoint(file.str());

    const auto ds = make_blobs(64, 10, 4, 0.8, 55);
    Matrix x(32, 10);
    std::vector<int> y(32);
    for (std::size_t i = 0; i < 32; ++i) {
        std::copy(ds.x.row(i).begin(), ds.x.row(i).end(), x.row(i).begin());
        y[i] = ds.labels[i];
    }
    TrainConfig cfg;
    cfg.opt = {OptKind::sgd, 0.05};
    cfg.seed = 3;
    MemoryLedger l1, l2;
    // sgd carries no optimizer state, so original and resumed runs align exactly
    const auto r1 = sll_train_step(model, heads, x, y, cfg, l1, 7);
    const auto r2 = sll_train_step(bundle.model, bundle.heads, x, y, cfg, l2, 7);
    for (std::size_t l = 0; l < r1.per_layer.size(); ++l)
        CHECK(r1.per_layer[l].total_loss == r2.per_layer[l].total_loss);
    CHECK(model.classifier.w.data == bundle.model.classifier.w.data);
}

TEST_CASE("pooled and label-concat head layouts survive the trip") {
    ArchSpec arch = ArchSpec::parse("mlp:20,16");
    Model model = make_model(arch, 12, {}, 5, 31);
    HeadSet heads = make_heads(model, 0.7, true, 8, 37);
    TempFile file("headcfg.bin");
    save_checkpoint(file.str(), model, heads);
    const auto bundle = load_checkpoint(file.str());
    CHECK(bundle.heads.label_concat);
    CHECK(bundle.heads.pool_dim == 8);
    CHECK(bundle.heads.n_classes == 5);
    REQUIRE(bundle.heads.heads.size() == 3);
    CHECK(bundle.heads.heads[0].in_dim == 8 + 5);   // 12 pooled to 8, plus labels
    CHECK(bundle.heads.heads[1].in_dim == 8 + 5);   // 20 pooled to 8
    CHECK(bundle.heads.heads[2].in_dim == 8 + 5);   // 16 pooled to 8
    CHECK(bundle.heads.heads[0].keep_prob == 0.7);
}

TEST_CASE("the conv stack checkpoints too") {
    ArchSpec arch = ArchSpec::parse("cnn3");
    Model model = make_model(arch, 0, ConvShape{3, 32, 32}, 10, 3);
    HeadSet heads = make_heads(model, 0.9, false, 2048, 5);
    TempFile file("conv.bin");
    save_checkpoint(file.str(), model, heads);
    const auto bundle = load_checkpoint(file.str());
    const auto& a = std::get<ConvBlock>(model.blocks[1]);
    const auto& b = std::get<ConvBlock>(bundle.model.blocks[1]);
    CHECK(a.conv.kernels.data == b.conv.kernels.data);
    CHECK(a.conv.bias == b.conv.bias);
    CHECK(b.out_shape == a.out_shape);
}

TEST_CASE("corrupt checkpoints fail loudly with byte offsets") {
    auto [model, heads] = trained_toy();
    TempFile file("corrupt.bin");
    save_checkpoint(file.str(), model, heads);
    const auto good = slurp(file.str());

    SUBCASE("bad magic") {
        auto bad = good;
        bad[0] ^= 0xFF;
        spit(file.str(), bad);
        try {
            load_checkpoint(file.str());
            FAIL("expected a format error");
        } catch (const FormatError& e) {
            CHECK(std::string(e.what()).find("bad magic") != std::string::npos);
        }
    }

    SUBCASE("unsupported version") {
        auto bad = good;
        bad[8] = 0x7F;  // little-endian version field directly after the magic
        spit(file.str(), bad);
        try {
            load_checkpoint(file.str());
            FAIL("expected a format error");
        } catch (const FormatError& e) {
            CHECK(std::string(e.what()).find("unsupported version") != std::string::npos);
            CHECK(std::string(e.what()).find("byte offset 8") != std::string::npos);
        }
    }

    SUBCASE("truncation") {
        auto bad = good;
        bad.resize(bad.size() / 2);
        spit(file.str(), bad);
        try {
            load_checkpoint(file.str());
            FAIL("expected a format error");
        } catch (const FormatError& e) {
            CHECK(std::string(e.what()).find("truncated at byte offset") != std::string::npos);
        }
    }

    SUBCASE("trailing garbage") {
        auto bad = good;
        bad.push_back(0x00);
        spit(file.str(), bad);
        try {
            load_checkpoint(file.str());
            FAIL("expected a format error");
        } catch (const FormatError& e) {
            CHECK(std::string(e.what()).find("trailing garbage") != std::string::npos);
        }
    }

    SUBCASE("non-finite weight") {
        auto bad = good;
        // find the first block's weight region by corrupting a double inside
        // the payload with an exponent pattern that decodes to +inf
        // (little-endian 0x7FF0...0).  Weight doubles are not 8-aligned in
        // the file (they follow a 9-byte block descriptor), so slide the
        // pattern one byte at a time until the loader objects.
        bool hit = false;
        for (std::size_t off = 64; off + 8 <= std::min<std::size_t>(bad.size(), 640) && !hit;
             ++off) {
            auto trial = good;
            trial[off] = 0x00;
            trial[off + 1] = 0x00;
            trial[off + 2] = 0x00;
            trial[off + 3] = 0x00;
            trial[off + 4] = 0x00;
            trial[off + 5] = 0x00;
            trial[off + 6] = 0xF0;
            trial[off + 7] = 0x7F;
            spit(file.str(), trial);
            try {
                load_checkpoint(file.str());
            } catch (const FormatError& e) {
                if (std::string(e.what()).find("non-finite weight") != std::string::npos)
                    hit = true;
            }
        }
        CHECK(hit);
    }

    SUBCASE("missing file") {
        CHECK_THROWS_AS(load_checkpoint("/nonexistent/sll-nowhere.bin"), IoError);
    }
}

TEST_CASE("head metadata is validated against the architecture") {
    auto [model, heads] = trained_toy();
    TempFile file("headmeta.bin");

    SUBCASE("tampered keep_prob") {
        save_checkpoint(file.str(), model, heads);
        auto bad = slurp(file.str());
        // keep_prob doubles sit at the end of the file: head records are
        // (u64 seed, u32 in, u32 out, f64 keep) = 24 bytes each, 3 heads.
        const std::size_t rec = 8 + 4 + 4 + 8;
        const std::size_t keep_off = bad.size() - rec + 16;
        for (int i = 0; i < 8; ++i) bad[keep_off + i] = 0xFF;  // NaN, certainly not in (0,1]
        spit(file.str(), bad);
        try {
            load_checkpoint(file.str());
            FAIL("expected a format error");
        } catch (const FormatError& e) {
            CHECK(std::string(e.what()).find("keep_prob out of range") != std::string::npos);
        }
    }

    SUBCASE("tampered head width") {
        save_checkpoint(file.str(), model, heads);
        auto bad = slurp(file.str());
        const std::size_t rec = 8 + 4 + 4 + 8;
        const std::size_t in_off = bad.size() - rec + 8;
        bad[in_off] = 0xEE;  // in_dim no longer matches the final feature width
        spit(file.str(), bad);
        try {
            load_checkpoint(file.str());
            FAIL("expected a format error");
        } catch (const FormatError& e) {
            CHECK(std::string(e.what()).find("head") != std::string::npos);
            CHECK(std::string(e.what()).find("expected") != std::string::npos);
        }
    }
}
