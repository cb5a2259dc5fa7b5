#include "sll/telemetry.hpp"

#include <algorithm>
#include <cstdio>

#include "sll/error.hpp"

namespace sll {

const char* tag_name(Tag tag) {
    switch (tag) {
        case Tag::activation: return "activation";
        case Tag::cache: return "cache";
        case Tag::parameter: return "parameter";
        case Tag::optimizer: return "optimizer";
    }
    return "?";
}

void MemoryLedger::on_alloc(Tag tag, std::size_t bytes) {
    live_[static_cast<int>(tag)] += bytes;
    bump_peaks();
}

void MemoryLedger::on_free(Tag tag, std::size_t bytes) {
    auto& slot = live_[static_cast<int>(tag)];
    if (bytes > slot)
        throw AccountingError(std::string("MemoryLedger: freeing ") + std::to_string(bytes) +
                              " bytes of '" + tag_name(tag) + "' with only " +
                              std::to_string(slot) + " live");
    slot -= bytes;
}

std::size_t MemoryLedger::live_total() const {
    std::size_t sum = 0;
    for (auto v : live_) sum += v;
    return sum;
}

std::size_t MemoryLedger::live_transient() const {
    return live_[static_cast<int>(Tag::activation)] + live_[static_cast<int>(Tag::cache)];
}

void MemoryLedger::reset_peaks() {
    peak_total_ = live_total();
    peak_transient_ = live_transient();
    for (int i = 0; i < kTagCount; ++i) peak_[i] = live_[i];
}

void MemoryLedger::bump_peaks() {
    peak_total_ = std::max(peak_total_, live_total());
    peak_transient_ = std::max(peak_transient_, live_transient());
    for (int i = 0; i < kTagCount; ++i) peak_[i] = std::max(peak_[i], live_[i]);
}

const char* MetricsWriter::header() {
    return "run_id,epoch,layer,pred_loss,bc_loss,total_loss,head_acc,test_acc,peak_bytes,wall_ms";
}

MetricsWriter::MetricsWriter(const std::string& path) : out_(path) {
    if (!out_) throw IoError("MetricsWriter: cannot open '" + path + "' for writing");
    out_ << header() << "\n";
}

std::string MetricsWriter::format_row(const MetricsRow& row) {
    char buf[320];
    std::snprintf(buf, sizeof(buf), "%s,%d,%d,%.9g,%.9g,%.9g,%.9g,%.9g,%zu,%.3f",
                  row.run_id.c_str(), row.epoch, row.layer, row.pred_loss, row.bc_loss,
                  row.total_loss, row.head_acc, row.test_acc, row.peak_bytes, row.wall_ms);
    return buf;
}

void MetricsWriter::write(const MetricsRow& row) {
    out_ << format_row(row) << "\n";
    if (!out_) throw IoError("MetricsWriter: write failed");
}

}  // namespace sll
