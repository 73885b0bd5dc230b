#ifndef CASCADE_SNAPSHOT_HPP
#define CASCADE_SNAPSHOT_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace cascade {

enum class ModelKind : std::uint32_t {
    SoftmaxRegression = 1,
    Mlp = 2,
    Calibrator = 3,
};

/// Parameters of one trainable component.
///
/// Wire layout (all little-endian):
///   "CSNP" | u32 version=1 | u32 kind | u32 ndims | u64 dims[ndims]
///   | u64 step_count | u64 count | f64 params[count]
struct ParameterSnapshot {
    ModelKind kind = ModelKind::SoftmaxRegression;
    std::vector<std::uint64_t> dims;
    std::uint64_t step_count = 0;
    std::vector<double> params;

    bool operator==(const ParameterSnapshot&) const = default;
};

void write_snapshot(std::ostream& out, const ParameterSnapshot& snap);
ParameterSnapshot read_snapshot(std::istream& in);

std::string to_bytes(const ParameterSnapshot& snap);
ParameterSnapshot from_bytes(const std::string& bytes);

} // namespace cascade

#endif // CASCADE_SNAPSHOT_HPP
