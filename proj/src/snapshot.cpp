#include "cascade/snapshot.hpp"

#include <bit>
#include <cstring>
#include <istream>
#include <ostream>
#include <sstream>

#include "cascade/errors.hpp"

namespace cascade {

namespace {

constexpr char kMagic[4] = {'C', 'S', 'N', 'P'};
constexpr std::uint32_t kVersion = 1;

template <typename UInt>
void put_le(std::ostream& out, UInt v)
{
    unsigned char buf[sizeof(UInt)];
    for (std::size_t i = 0; i < sizeof(UInt); ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(buf), sizeof(UInt));
}

template <typename UInt>
UInt get_le(std::istream& in)
{
    unsigned char buf[sizeof(UInt)];
    if (!in.read(reinterpret_cast<char*>(buf), sizeof(UInt))) throw ParseError("snapshot truncated");
    UInt v = 0;
    for (std::size_t i = 0; i < sizeof(UInt); ++i) v |= static_cast<UInt>(buf[i]) << (8 * i);
    return v;
}

} // namespace

void write_snapshot(std::ostream& out, const ParameterSnapshot& snap)
{
    out.write(kMagic, 4);
    put_le<std::uint32_t>(out, kVersion);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(snap.kind));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(snap.dims.size()));
    for (auto d : snap.dims) put_le<std::uint64_t>(out, d);
    put_le<std::uint64_t>(out, snap.step_count);
    put_le<std::uint64_t>(out, snap.params.size());
    for (double p : snap.params) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(p));
}

ParameterSnapshot read_snapshot(std::istream& in)
{
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw ParseError("not a parameter snapshot");
    if (get_le<std::uint32_t>(in) != kVersion) throw ParseError("unsupported snapshot version");
    ParameterSnapshot snap;
    const auto kind = get_le<std::uint32_t>(in);
    if (kind < 1 || kind > 3) throw ParseError("unknown model kind in snapshot");
    snap.kind = static_cast<ModelKind>(kind);
    const auto ndims = get_le<std::uint32_t>(in);
    for (std::uint32_t i = 0; i < ndims; ++i) snap.dims.push_back(get_le<std::uint64_t>(in));
    snap.step_count = get_le<std::uint64_t>(in);
    const auto count = get_le<std::uint64_t>(in);
    snap.params.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) snap.params.push_back(std::bit_cast<double>(get_le<std::uint64_t>(in)));
    return snap;
}

std::string to_bytes(const ParameterSnapshot& snap)
{
    std::ostringstream out(std::ios::binary);
    write_snapshot(out, snap);
    return out.str();
}

ParameterSnapshot from_bytes(const std::string& bytes)
{
    std::istringstream in(bytes, std::ios::binary);
    return read_snapshot(in);
}

} // namespace cascade
