#include "dcdm/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

#include "dcdm/rng.hpp"

namespace dcdm {

namespace {

constexpr char kMagic[4] = {'D', 'C', 'K', 'P'};

void put_u32(std::string& buf, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& buf, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_str(std::string& buf, const std::string& s) {
    put_u32(buf, static_cast<std::uint32_t>(s.size()));
    buf.append(s);
}

struct Reader {
    const std::string& buf;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        if (pos + n > buf.size()) throw std::runtime_error("checkpoint: truncated file");
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
        pos += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
        pos += 8;
        return v;
    }
    std::string str() {
        const std::uint32_t n = u32();
        need(n);
        std::string s = buf.substr(pos, n);
        pos += n;
        return s;
    }
};

}  // namespace

void Checkpoint::save(const std::string& path) {
    std::string buf;
    buf.append(kMagic, 4);
    put_u32(buf, kFormatVersion);
    put_str(buf, kind);
    put_u32(buf, static_cast<std::uint32_t>(meta.size()));
    for (const auto& [k, v] : meta) {
        put_str(buf, k);
        put_str(buf, v);
    }
    put_u32(buf, static_cast<std::uint32_t>(params.size()));
    for (const auto& [name, t] : params) {
        put_str(buf, name);
        put_u32(buf, static_cast<std::uint32_t>(t.rank()));
        for (int i = 0; i < t.rank(); ++i) put_u32(buf, static_cast<std::uint32_t>(t.dim(i)));
        put_u64(buf, static_cast<std::uint64_t>(t.size()));
        const std::size_t bytes = static_cast<std::size_t>(t.size()) * sizeof(real);
        const std::size_t off = buf.size();
        buf.resize(off + bytes);
        std::memcpy(buf.data() + off, t.data(), bytes);
    }
    content_hash = fnv1a64(buf.data(), buf.size());
    put_u64(buf, content_hash);

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw std::runtime_error("checkpoint: short write to " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (buf.size() < 16 || std::memcmp(buf.data(), kMagic, 4) != 0)
        throw std::runtime_error("checkpoint: " + path + " is not a DCKP container");

    const std::uint64_t stored_hash = [&] {
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[buf.size() - 8 + i])) << (8 * i);
        return v;
    }();
    const std::uint64_t actual = fnv1a64(buf.data(), buf.size() - 8);
    if (stored_hash != actual)
        throw std::runtime_error("checkpoint: content hash mismatch in " + path + " (corrupt or tampered)");

    Reader r{buf};
    r.pos = 4;
    Checkpoint ckpt;
    const std::uint32_t version = r.u32();
    if (version != kFormatVersion)
        throw std::runtime_error("checkpoint: unsupported format version " + std::to_string(version));
    ckpt.kind = r.str();
    const std::uint32_t n_meta = r.u32();
    for (std::uint32_t i = 0; i < n_meta; ++i) {
        std::string k = r.str();
        ckpt.meta[k] = r.str();
    }
    const std::uint32_t n_params = r.u32();
    for (std::uint32_t i = 0; i < n_params; ++i) {
        std::string name = r.str();
        const std::uint32_t rank = r.u32();
        std::vector<int> shape(rank);
        for (auto& d : shape) d = static_cast<int>(r.u32());
        const std::uint64_t count = r.u64();
        if (shape_numel(shape) != static_cast<std::int64_t>(count))
            throw std::runtime_error("checkpoint: shape metadata inconsistent for parameter " + name);
        Tensor t(shape);
        const std::size_t bytes = static_cast<std::size_t>(count) * sizeof(real);
        r.need(bytes);
        std::memcpy(t.data(), buf.data() + r.pos, bytes);
        r.pos += bytes;
        ckpt.params.emplace_back(std::move(name), std::move(t));
    }
    ckpt.content_hash = stored_hash;
    return ckpt;
}

const Tensor& Checkpoint::param(const std::string& name) const {
    for (const auto& [n, t] : params)
        if (n == name) return t;
    throw std::runtime_error("checkpoint: missing parameter '" + name + "'");
}

std::string Checkpoint::meta_at(const std::string& key) const {
    auto it = meta.find(key);
    if (it == meta.end()) throw std::runtime_error("checkpoint: missing metadata '" + key + "'");
    return it->second;
}

std::int64_t Checkpoint::meta_int(const std::string& key) const { return std::stoll(meta_at(key)); }
double Checkpoint::meta_real(const std::string& key) const { return std::stod(meta_at(key)); }

}  // namespace dcdm
