#include "frames/model/weights.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "frames/error.hpp"

namespace frames::model {

namespace {

constexpr char kMagic[4] = {'F', 'R', 'M', 'W'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 34;

static_assert(std::endian::native == std::endian::little,
              "tensor files are little-endian; add byte swapping for big-endian hosts");

template <typename T>
void put(std::ofstream& out, T value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof value);
}

template <typename T>
T get(std::ifstream& in, const std::filesystem::path& path) {
    T value{};
    if (!in.read(reinterpret_cast<char*>(&value), sizeof value)) {
        throw LoadError("'" + path.string() + "' is truncated");
    }
    return value;
}

}  // namespace

void save_tensors(const std::filesystem::path& path, std::span<const NamedTensor> tensors) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out.write(kMagic, sizeof kMagic);
    put<std::uint32_t>(out, kVersion);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& t : tensors) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(t.name.size()));
        out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
        put<std::uint32_t>(out, static_cast<std::uint32_t>(t.shape.size()));
        for (auto d : t.shape) put<std::uint64_t>(out, static_cast<std::uint64_t>(d));
        out.write(reinterpret_cast<const char*>(t.data.data()),
                  static_cast<std::streamsize>(t.data.size() * sizeof(float)));
    }
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

std::vector<NamedTensor> load_tensors(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError("cannot read weights '" + path.string() + "'");
    char magic[4];
    if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0) {
        throw LoadError("'" + path.string() + "' is not a tensor file");
    }
    const auto version = get<std::uint32_t>(in, path);
    if (version != kVersion) {
        throw LoadError("'" + path.string() + "' has unsupported version " + std::to_string(version));
    }
    const auto count = get<std::uint32_t>(in, path);
    std::vector<NamedTensor> tensors;
    tensors.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        NamedTensor t;
        const auto name_len = get<std::uint32_t>(in, path);
        if (name_len > 4096) throw LoadError("'" + path.string() + "' has a corrupt tensor name");
        t.name.resize(name_len);
        if (!in.read(t.name.data(), name_len)) throw LoadError("'" + path.string() + "' is truncated");
        const auto ndim = get<std::uint32_t>(in, path);
        if (ndim > 8) throw LoadError("'" + path.string() + "' has a corrupt tensor rank");
        std::uint64_t elements = 1;
        for (std::uint32_t d = 0; d < ndim; ++d) {
            const auto dim = get<std::uint64_t>(in, path);
            elements *= dim;
            if (elements > kMaxElements) throw LoadError("'" + path.string() + "' has a corrupt shape");
            t.shape.push_back(static_cast<std::int64_t>(dim));
        }
        t.data.resize(elements);
        if (!in.read(reinterpret_cast<char*>(t.data.data()),
                     static_cast<std::streamsize>(elements * sizeof(float)))) {
            throw LoadError("'" + path.string() + "' is truncated in tensor '" + t.name + "'");
        }
        tensors.push_back(std::move(t));
    }
    return tensors;
}

}  // namespace frames::model
