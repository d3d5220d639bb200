#include "dslnet/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace dslnet {

namespace {

constexpr const char* kMagic = "DSLNET-CKPT v1\n";

void write_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = (unsigned char)((v >> (8 * i)) & 0xff);
    out.write((const char*)b, 4);
}

std::uint32_t read_u32(std::istream& in) {
    unsigned char b[4];
    in.read((char*)b, 4);
    if (!in) throw FormatError("checkpoint: truncated u32");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= (std::uint32_t)b[i] << (8 * i);
    return v;
}

void write_i64(std::ostream& out, std::int64_t v) {
    unsigned char b[8];
    auto u = (std::uint64_t)v;
    for (int i = 0; i < 8; ++i) b[i] = (unsigned char)((u >> (8 * i)) & 0xff);
    out.write((const char*)b, 8);
}

std::int64_t read_i64(std::istream& in) {
    unsigned char b[8];
    in.read((char*)b, 8);
    if (!in) throw FormatError("checkpoint: truncated i64");
    std::uint64_t u = 0;
    for (int i = 0; i < 8; ++i) u |= (std::uint64_t)b[i] << (8 * i);
    return (std::int64_t)u;
}

void write_doubles(std::ostream& out, const std::vector<double>& v) {
    static_assert(sizeof(double) == 8);
    // doubles are IEEE754; x86 is little-endian, write raw
    out.write((const char*)v.data(), (std::streamsize)(v.size() * 8));
}

void read_doubles(std::istream& in, std::vector<double>& v) {
    in.read((char*)v.data(), (std::streamsize)(v.size() * 8));
    if (!in) throw FormatError("checkpoint: truncated payload");
}

}  // namespace

void save_checkpoint(const nn::ParamStore& store, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint " + path.string());
    out.write(kMagic, (std::streamsize)std::strlen(kMagic));
    write_u32(out, (std::uint32_t)store.params().size());
    for (const auto& [name, p] : store.params()) {
        write_u32(out, (std::uint32_t)name.size());
        out.write(name.data(), (std::streamsize)name.size());
        write_u32(out, (std::uint32_t)p->value.rows());
        write_u32(out, (std::uint32_t)p->value.cols());
        write_doubles(out, p->value.vec());
    }
    write_i64(out, store.step_count);
    for (const auto& [name, p] : store.params()) {
        const auto& st = store.opt_state().at(name);
        write_doubles(out, st.m.vec());
        write_doubles(out, st.v.vec());
    }
    if (!out) throw IoError("checkpoint write failed: " + path.string());
}

nn::ParamStore load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint " + path.string());
    std::string magic(std::strlen(kMagic), '\0');
    in.read(magic.data(), (std::streamsize)magic.size());
    if (!in || magic != kMagic) throw FormatError("checkpoint: bad magic");
    std::uint32_t n = read_u32(in);
    nn::ParamStore store;
    std::vector<std::string> order;
    for (std::uint32_t i = 0; i < n; ++i) {
        std::uint32_t len = read_u32(in);
        std::string name(len, '\0');
        in.read(name.data(), len);
        if (!in) throw FormatError("checkpoint: truncated name");
        std::uint32_t rows = read_u32(in), cols = read_u32(in);
        Tensor t(rows, cols);
        read_doubles(in, t.vec());
        store.add(name, std::move(t));
        order.push_back(std::move(name));
    }
    store.step_count = read_i64(in);
    for (const auto& name : order) {
        auto& st = store.opt_state().at(name);
        read_doubles(in, st.m.vec());
        read_doubles(in, st.v.vec());
    }
    return store;
}

}  // namespace dslnet
