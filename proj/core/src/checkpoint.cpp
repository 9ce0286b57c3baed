#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "rangan/gan.hpp"

namespace rangan {
namespace {

constexpr char kMagic[8] = {'R', 'A', 'N', 'G', 'A', 'N', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

std::uint32_t crc32(const std::uint8_t* data, std::size_t len) {
    static const auto table = [] {
        std::array<std::uint32_t, 256> t{};
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = c & 1 ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    std::uint32_t c = 0xFFFFFFFFu;
    for (std::size_t i = 0; i < len; ++i) c = table[(c ^ data[i]) & 0xFF] ^ (c >> 8);
    return c ^ 0xFFFFFFFFu;
}

class Writer {
public:
    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u16(std::uint16_t v) { le(v); }
    void u32(std::uint32_t v) { le(v); }
    void u64(std::uint64_t v) { le(v); }
    void i32(std::int32_t v) { le(static_cast<std::uint32_t>(v)); }
    void f64(double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        le(bits);
    }
    void bytes(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        buf_.insert(buf_.end(), b, b + n);
    }
    std::vector<std::uint8_t>& buf() { return buf_; }

private:
    template <typename T>
    void le(T v) {
        for (std::size_t i = 0; i < sizeof(T); ++i)
            buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    std::vector<std::uint8_t> buf_;
};

class Reader {
public:
    Reader(const std::uint8_t* p, std::size_t n) : p_(p), end_(p + n) {}
    std::uint8_t u8() { return take(1)[0]; }
    std::uint16_t u16() { return le<std::uint16_t>(); }
    std::uint32_t u32() { return le<std::uint32_t>(); }
    std::uint64_t u64() { return le<std::uint64_t>(); }
    std::int32_t i32() { return static_cast<std::int32_t>(le<std::uint32_t>()); }
    double f64() {
        std::uint64_t bits = le<std::uint64_t>();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
    const std::uint8_t* take(std::size_t n) {
        if (p_ + n > end_) throw ParseError("checkpoint: truncated file");
        const std::uint8_t* r = p_;
        p_ += n;
        return r;
    }

private:
    template <typename T>
    T le() {
        const std::uint8_t* b = take(sizeof(T));
        T v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(b[i]) << (8 * i);
        return v;
    }
    const std::uint8_t* p_;
    const std::uint8_t* end_;
};

}  // namespace

void save_model(const GanModel& model, const std::string& path) {
    Writer w;
    w.bytes(kMagic, sizeof kMagic);
    w.u32(kVersion);
    const ModelConfig& c = model.config();
    w.i32(c.window_size);
    w.i32(c.feature_count);
    w.i32(c.latent_dim);
    w.i32(c.model_dim);
    w.i32(c.attention_heads);
    w.i32(c.blocks_per_net);
    w.i32(c.feedforward_dim);
    w.f64(c.dropout_rate);

    NamedParams params = model.all_params();
    w.u32(static_cast<std::uint32_t>(params.size()));
    for (const auto& [name, t] : params) {
        w.u16(static_cast<std::uint16_t>(name.size()));
        w.bytes(name.data(), name.size());
        w.u8(static_cast<std::uint8_t>(t.rank()));
        for (int dim : t.shape()) w.u32(static_cast<std::uint32_t>(dim));
        w.u64(t.numel());
        for (double v : t.data()) w.f64(v);
    }
    w.u32(crc32(w.buf().data(), w.buf().size()));

    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot write checkpoint '" + path + "'");
    out.write(reinterpret_cast<const char*>(w.buf().data()),
              static_cast<std::streamsize>(w.buf().size()));
    if (!out) throw ParseError("short write to checkpoint '" + path + "'");
}

GanModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open checkpoint '" + path + "'");
    std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
    if (buf.size() < sizeof(kMagic) + 8) throw ParseError("checkpoint: file too small");

    const std::uint32_t stored = Reader(buf.data() + buf.size() - 4, 4).u32();
    if (crc32(buf.data(), buf.size() - 4) != stored)
        throw ParseError("checkpoint: checksum mismatch in '" + path + "'");

    Reader r(buf.data(), buf.size() - 4);
    if (std::memcmp(r.take(sizeof kMagic), kMagic, sizeof kMagic) != 0)
        throw ParseError("checkpoint: bad magic in '" + path + "'");
    if (r.u32() != kVersion) throw ParseError("checkpoint: unsupported version");

    ModelConfig c;
    c.window_size = r.i32();
    c.feature_count = r.i32();
    c.latent_dim = r.i32();
    c.model_dim = r.i32();
    c.attention_heads = r.i32();
    c.blocks_per_net = r.i32();
    c.feedforward_dim = r.i32();
    c.dropout_rate = r.f64();

    GanModel model(c, 0);
    NamedParams params = model.all_params();
    const std::uint32_t count = r.u32();
    if (count != params.size())
        throw ParseError("checkpoint: expected " + std::to_string(params.size()) +
                         " parameters, found " + std::to_string(count));
    for (auto& [name, t] : params) {
        const std::uint16_t len = r.u16();
        std::string stored_name(reinterpret_cast<const char*>(r.take(len)), len);
        if (stored_name != name)
            throw ParseError("checkpoint: parameter '" + stored_name + "' where '" + name +
                             "' was expected");
        const std::uint8_t rank = r.u8();
        if (rank != t.rank()) throw ParseError("checkpoint: rank mismatch for '" + name + "'");
        for (int dim : t.shape())
            if (r.u32() != static_cast<std::uint32_t>(dim))
                throw ParseError("checkpoint: shape mismatch for '" + name + "'");
        const std::uint64_t n = r.u64();
        if (n != t.numel()) throw ParseError("checkpoint: size mismatch for '" + name + "'");
        auto dst = t.data_mut();
        for (std::uint64_t i = 0; i < n; ++i) dst[i] = r.f64();
    }
    return model;
}

}  // namespace rangan
