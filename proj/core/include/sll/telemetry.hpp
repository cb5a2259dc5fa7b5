#pragma once

#include <array>
#include <cstdint>
#include <fstream>
#include <string>

namespace sll {

enum class Tag : int { activation = 0, cache = 1, parameter = 2, optimizer = 3 };
constexpr int kTagCount = 4;
const char* tag_name(Tag tag);

// Counts LOGICAL tensor bytes (elements x 8) by tag.  Frees must match
// allocs; going negative is an accounting bug and throws immediately.
class MemoryLedger {
public:
    void on_alloc(Tag tag, std::size_t bytes);
    void on_free(Tag tag, std::size_t bytes);

    std::size_t live(Tag tag) const { return live_[static_cast<int>(tag)]; }
    std::size_t live_total() const;
    // Live activation + cache bytes: the depth-dependent part of a step.
    std::size_t live_transient() const;

    std::size_t peak_total() const { return peak_total_; }
    std::size_t peak_transient() const { return peak_transient_; }
    std::size_t peak(Tag tag) const { return peak_[static_cast<int>(tag)]; }

    void reset_peaks();

private:
    void bump_peaks();
    std::array<std::size_t, kTagCount> live_{};
    std::array<std::size_t, kTagCount> peak_{};
    std::size_t peak_total_ = 0;
    std::size_t peak_transient_ = 0;
};

// One row of the training metrics table.  layer == -1 marks the per-epoch
// summary row (test_acc and peak_bytes live there).
struct MetricsRow {
    std::string run_id;
    int epoch = 0;
    int layer = -1;
    double pred_loss = 0.0;
    double bc_loss = 0.0;
    double total_loss = 0.0;
    double head_acc = 0.0;
    double test_acc = 0.0;
    std::size_t peak_bytes = 0;
    double wall_ms = 0.0;
};

// Appends rows in a fixed 10-column CSV schema.
class MetricsWriter {
public:
    static const char* header();  // "run_id,epoch,layer,..."
    explicit MetricsWriter(const std::string& path);
    void write(const MetricsRow& row);
    static std::string format_row(const MetricsRow& row);

private:
    std::ofstream out_;
};

}  // namespace sll
