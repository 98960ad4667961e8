#include "uasrl/grad/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace uasrl::grad {

namespace {

constexpr char kMagic[8] = {'U', 'A', 'S', 'R', 'L', 'C', 'K', '1'};
constexpr std::uint32_t kEndianTag = 0x01020304u;

void write_u32(std::ostream& os, std::uint32_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void write_u64(std::ostream& os, std::uint64_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t read_u32(std::istream& is) {
    std::uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}

std::uint64_t read_u64(std::istream& is) {
    std::uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}

} // namespace

void save_checkpoint(const std::string& path, const ParameterSet& params,
                     const nlohmann::json& metadata) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw ConfigError("save_checkpoint: cannot open '" + path + "' for writing");
    os.write(kMagic, sizeof(kMagic));
    write_u32(os, kEndianTag);
    const std::string meta = metadata.dump();
    write_u32(os, static_cast<std::uint32_t>(meta.size()));
    os.write(meta.data(), static_cast<std::streamsize>(meta.size()));
    write_u32(os, static_cast<std::uint32_t>(params.size()));
    for (const auto& [name, t] : params.items()) {
        write_u32(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_u32(os, static_cast<std::uint32_t>(t.rank()));
        for (std::size_t d : t.shape()) write_u64(os, static_cast<std::uint64_t>(d));
        os.write(reinterpret_cast<const char*>(t.data().data()),
                 static_cast<std::streamsize>(t.numel() * sizeof(double)));
    }
    if (!os) throw ConfigError("save_checkpoint: write failed for '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("load_checkpoint: cannot open '" + path + "'");
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw ConfigError("load_checkpoint: bad magic in '" + path + "'");
    }
    if (read_u32(is) != kEndianTag) {
        throw ConfigError("load_checkpoint: endianness mismatch in '" + path + "'");
    }
    const std::uint32_t meta_len = read_u32(is);
    std::string meta(meta_len, '\0');
    is.read(meta.data(), meta_len);
    Checkpoint out;
    out.metadata = meta.empty() ? nlohmann::json::object() : nlohmann::json::parse(meta);
    const std::uint32_t count = read_u32(is);
    for (std::uint32_t p = 0; p < count; ++p) {
        const std::uint32_t name_len = read_u32(is);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        const std::uint32_t rank = read_u32(is);
        Shape shape(rank);
        for (auto& d : shape) d = static_cast<std::size_t>(read_u64(is));
        std::vector<double> data(shape_numel(shape));
        is.read(reinterpret_cast<char*>(data.data()),
                static_cast<std::streamsize>(data.size() * sizeof(double)));
        if (!is) throw ConfigError("load_checkpoint: truncated file '" + path + "'");
        out.params.add(std::move(name), Tensor::from_vector(std::move(shape), std::move(data)));
    }
    return out;
}

} // namespace uasrl::grad
