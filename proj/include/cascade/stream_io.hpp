#ifndef CASCADE_STREAM_IO_HPP
#define CASCADE_STREAM_IO_HPP

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "cascade/cascade_engine.hpp"
#include "cascade/core_types.hpp"

namespace cascade {

/// JSON-lines: one object per line with id, text, and optional label/category.
std::vector<StreamRecord> parse_stream(std::istream& in);
std::vector<StreamRecord> load_stream(const std::filesystem::path& path);
void write_stream(std::ostream& out, const std::vector<StreamRecord>& records);
void save_stream(const std::filesystem::path& path, const std::vector<StreamRecord>& records);

/// Sorted distinct labels present in the stream.
std::vector<std::string> stream_labels(const std::vector<StreamRecord>& records);

// Reordering transforms. All are permutations of the input.

/// Stable sort by length_chars.
std::vector<StreamRecord> reorder_length_ascending(std::vector<StreamRecord> records);

/// Stable partition moving `category` records to the end. When nothing
/// matches, the input is returned unchanged and `matched` is set false.
std::vector<StreamRecord> reorder_category_last(std::vector<StreamRecord> records, const std::string& category,
                                                bool* matched = nullptr);

/// Seeded Fisher-Yates.
std::vector<StreamRecord> shuffle(std::vector<StreamRecord> records, std::uint64_t seed);

struct ReorderSpec {
    enum class Kind { None, Length, Category, Shuffle };
    Kind kind = Kind::None;
    std::string category;

    static ReorderSpec parse(const std::string& text);
};

/// Applies `spec`; writes a warning to `diag` when a category filter matches nothing.
std::vector<StreamRecord> apply_reorder(std::vector<StreamRecord> records, const ReorderSpec& spec,
                                        std::uint64_t seed, std::ostream& diag);

/// Writes the per-episode metrics CSV:
/// t,level_used,prediction,correct,expert_called,cum_expert_calls,cum_accuracy,running_J
class MetricsCsvWriter final : public MetricsSink {
public:
    MetricsCsvWriter(std::ostream& out, const LabelSet& labels);

    void on_step(const StepMetrics& metrics, const EpisodeTrace& trace) override;
    void flush() override;

    static constexpr const char* kHeader =
        "t,level_used,prediction,correct,expert_called,cum_expert_calls,cum_accuracy,running_J";

private:
    std::ostream& out_;
    const LabelSet& labels_;
};

/// Quotes a CSV field when it contains a comma, quote or newline.
std::string csv_field(const std::string& value);

} // namespace cascade

#endif // CASCADE_STREAM_IO_HPP
