#include "cascade/stream_io.hpp"

#include <algorithm>
#include <fstream>
#include <ostream>
#include <set>
#include <unordered_set>

#include <json.hpp>

#include "cascade/format.hpp"
#include "cascade/random.hpp"

namespace cascade {

namespace {

std::optional<std::string> optional_string(const nlohmann::json& obj, const char* key, std::size_t line)
{
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return std::nullopt;
    if (!it->is_string())
        throw ParseError("line " + std::to_string(line) + ": field '" + key + "' must be a string");
    return it->get<std::string>();
}

} // namespace

std::vector<StreamRecord> parse_stream(std::istream& in)
{
    std::vector<StreamRecord> records;
    std::unordered_set<std::string> ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError("line " + std::to_string(line_no) + ": malformed JSON (" + e.what() + ")");
        }
        if (!obj.is_object()) throw ParseError("line " + std::to_string(line_no) + ": expected a JSON object");
        auto id = optional_string(obj, "id", line_no);
        auto text = optional_string(obj, "text", line_no);
        if (!id) throw ParseError("line " + std::to_string(line_no) + ": missing string field 'id'");
        if (!text) throw ParseError("line " + std::to_string(line_no) + ": missing string field 'text'");
        if (!ids.insert(*id).second)
            throw ParseError("line " + std::to_string(line_no) + ": duplicate id '" + *id + "'");
        records.push_back(make_record(std::move(*id), std::move(*text), optional_string(obj, "label", line_no),
                                      optional_string(obj, "category", line_no)));
    }
    return records;
}

std::vector<StreamRecord> load_stream(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open stream file '" + path.string() + "'");
    return parse_stream(in);
}

void write_stream(std::ostream& out, const std::vector<StreamRecord>& records)
{
    for (const auto& r : records) {
        nlohmann::ordered_json obj;
        obj["id"] = r.id;
        obj["text"] = r.text;
        if (r.label) obj["label"] = *r.label;
        if (r.category) obj["category"] = *r.category;
        out << obj.dump() << '\n';
    }
}

void save_stream(const std::filesystem::path& path, const std::vector<StreamRecord>& records)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot write stream file '" + path.string() + "'");
    write_stream(out, records);
}

std::vector<std::string> stream_labels(const std::vector<StreamRecord>& records)
{
    std::set<std::string> labels;
    for (const auto& r : records)
        if (r.label) labels.insert(*r.label);
    return {labels.begin(), labels.end()};
}

std::vector<StreamRecord> reorder_length_ascending(std::vector<StreamRecord> records)
{
    std::stable_sort(records.begin(), records.end(),
                     [](const StreamRecord& a, const StreamRecord& b) { return a.length_chars < b.length_chars; });
    return records;
}

std::vector<StreamRecord> reorder_category_last(std::vector<StreamRecord> records, const std::string& category,
                                                bool* matched)
{
    const auto is_target = [&category](const StreamRecord& r) { return r.category && *r.category == category; };
    const bool any = std::any_of(records.begin(), records.end(), is_target);
    if (matched) *matched = any;
    if (!any) return records;
    std::stable_partition(records.begin(), records.end(), [&](const StreamRecord& r) { return !is_target(r); });
    return records;
}

std::vector<StreamRecord> shuffle(std::vector<StreamRecord> records, std::uint64_t seed)
{
    Rng rng(seed);
    for (std::size_t i = records.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(uniform_index(rng, i));
        std::swap(records[i - 1], records[j]);
    }
    return records;
}

ReorderSpec ReorderSpec::parse(const std::string& text)
{
    ReorderSpec spec;
    if (text.empty() || text == "none") return spec;
    if (text == "length") {
        spec.kind = Kind::Length;
    } else if (text == "shuffle") {
        spec.kind = Kind::Shuffle;
    } else if (text.rfind("category:", 0) == 0 && text.size() > 9) {
        spec.kind = Kind::Category;
        spec.category = text.substr(9);
    } else {
        throw ConfigError("unknown reorder '" + text + "' (expected none, length, category:<name> or shuffle)");
    }
    return spec;
}

std::vector<StreamRecord> apply_reorder(std::vector<StreamRecord> records, const ReorderSpec& spec,
                                        std::uint64_t seed, std::ostream& diag)
{
    switch (spec.kind) {
    case ReorderSpec::Kind::None:
        return records;
    case ReorderSpec::Kind::Length:
        return reorder_length_ascending(std::move(records));
    case ReorderSpec::Kind::Shuffle:
        return shuffle(std::move(records), seed);
    case ReorderSpec::Kind::Category: {
        bool matched = false;
        auto out = reorder_category_last(std::move(records), spec.category, &matched);
        if (!matched) diag << "warning: category '" << spec.category << "' matches no record; order unchanged\n";
        return out;
    }
    }
    return records;
}

std::string csv_field(const std::string& value)
{
    if (value.find_first_of(",\"\n\r") == std::string::npos) return value;
    std::string quoted = "\"";
    for (char c : value) {
        if (c == '"') quoted.push_back('"');
        quoted.push_back(c);
    }
    quoted.push_back('"');
    return quoted;
}

MetricsCsvWriter::MetricsCsvWriter(std::ostream& out, const LabelSet& labels) : out_(out), labels_(labels)
{
    out_ << kHeader << '\n';
}

void MetricsCsvWriter::on_step(const StepMetrics& m, const EpisodeTrace&)
{
    out_ << m.t << ',' << m.level_used << ',' << csv_field(labels_.name(m.prediction)) << ',';
    if (m.correct) out_ << (*m.correct ? '1' : '0');
    out_ << ',' << (m.expert_called ? '1' : '0') << ',' << m.cum_expert_calls << ',';
    if (m.running_accuracy) out_ << format_double(*m.running_accuracy);
    out_ << ',' << format_double(m.running_J) << '\n';
}

void MetricsCsvWriter::flush()
{
    out_.flush();
}

} // namespace cascade
