#include "dsal/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "dsal/common.hpp"

namespace dsal {

namespace {

constexpr char kMagic[4] = {'D', 'S', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& s, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& s, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_i32(std::string& s, std::int32_t v) { put_u32(s, static_cast<std::uint32_t>(v)); }

void put_f64(std::string& s, double v) { put_u64(s, std::bit_cast<std::uint64_t>(v)); }

void put_str(std::string& s, const std::string& v) {
    put_u32(s, static_cast<std::uint32_t>(v.size()));
    s.append(v);
}

class Reader {
public:
    Reader(const std::string& buf, std::string path) : buf_(buf), path_(std::move(path)) {}

    std::uint8_t u8() {
        need(1);
        return static_cast<unsigned char>(buf_[pos_++]);
    }

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
        pos_ += 4;
        return v;
    }

    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
        pos_ += 8;
        return v;
    }

    std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
    double f64() { return std::bit_cast<double>(u64()); }

    std::string str() {
        const std::uint32_t n = u32();
        need(n);
        std::string v = buf_.substr(pos_, n);
        pos_ += n;
        return v;
    }

    bool done() const { return pos_ == buf_.size(); }

private:
    void need(size_t n) {
        if (pos_ + n > buf_.size()) throw DataError("checkpoint truncated: " + path_);
    }
    const std::string& buf_;
    std::string path_;
    size_t pos_ = 0;
};

std::string encode_payload(const Checkpoint& ck) {
    std::string p;
    p.push_back(static_cast<char>(ck.kind));
    p.push_back(ck.config.use_akt ? 1 : 0);
    p.push_back(ck.config.use_bfd ? 1 : 0);
    p.push_back(ck.config.use_pretrained_general ? 1 : 0);
    p.push_back(static_cast<char>(ck.config.encoder_scale));
    put_i32(p, ck.config.input_height);
    put_i32(p, ck.config.input_width);
    put_i32(p, ck.config.decoder_channels);
    put_u64(p, ck.seed);
    put_u64(p, ck.blobs.size());
    for (const auto& [name, t] : ck.blobs) {
        put_str(p, name);
        put_i32(p, t.n());
        put_i32(p, t.c());
        put_i32(p, t.h());
        put_i32(p, t.w());
        for (size_t i = 0; i < t.size(); ++i) put_f64(p, t[i]);
    }
    return p;
}

Checkpoint decode_payload(const std::string& payload, const std::string& path) {
    Reader r(payload, path);
    Checkpoint ck;
    const std::uint8_t kind = r.u8();
    const std::uint8_t akt = r.u8();
    const std::uint8_t bfd = r.u8();
    const std::uint8_t pre = r.u8();
    const std::uint8_t scale = r.u8();
    if (kind > 1 || akt > 1 || bfd > 1 || pre > 1 || scale > 1)
        throw DataError("checkpoint header flags corrupt: " + path);
    ck.kind = static_cast<CheckpointKind>(kind);
    ck.config.use_akt = akt != 0;
    ck.config.use_bfd = bfd != 0;
    ck.config.use_pretrained_general = pre != 0;
    ck.config.encoder_scale = static_cast<EncoderScale>(scale);
    ck.config.input_height = r.i32();
    ck.config.input_width = r.i32();
    ck.config.decoder_channels = r.i32();
    ck.seed = r.u64();
    const std::uint64_t count = r.u64();
    ck.blobs.reserve(count);
    for (std::uint64_t b = 0; b < count; ++b) {
        std::string name = r.str();
        const int n = r.i32(), c = r.i32(), h = r.i32(), w = r.i32();
        if (n < 1 || c < 1 || h < 1 || w < 1)
            throw DataError("checkpoint blob '" + name + "' has corrupt dimensions: " + path);
        Tensor t(n, c, h, w);
        for (size_t i = 0; i < t.size(); ++i) t[i] = r.f64();
        ck.blobs.emplace_back(std::move(name), std::move(t));
    }
    if (!r.done()) throw DataError("checkpoint has trailing bytes: " + path);
    return ck;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
    const std::string payload = encode_payload(ck);
    std::string head;
    head.append(kMagic, 4);
    put_u32(head, kVersion);
    put_u64(head, fnv1a64(payload.data(), payload.size()));
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot open checkpoint for writing: " + path);
    f.write(head.data(), static_cast<std::streamsize>(head.size()));
    f.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!f) throw DataError("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open checkpoint: " + path);
    std::string all((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (all.size() < 16 || std::memcmp(all.data(), kMagic, 4) != 0)
        throw DataError("not a checkpoint file: " + path);
    std::uint32_t version = 0;
    for (int i = 0; i < 4; ++i)
        version |= static_cast<std::uint32_t>(static_cast<unsigned char>(all[4 + i])) << (8 * i);
    if (version != kVersion)
        throw DataError("unsupported checkpoint version " + std::to_string(version) + ": " +
                        path);
    std::uint64_t want = 0;
    for (int i = 0; i < 8; ++i)
        want |= static_cast<std::uint64_t>(static_cast<unsigned char>(all[8 + i])) << (8 * i);
    const std::string payload = all.substr(16);
    if (fnv1a64(payload.data(), payload.size()) != want)
        throw DataError("checkpoint checksum mismatch: " + path);
    return decode_payload(payload, path);
}

Checkpoint snapshot_model(const Model& m, CheckpointKind kind) {
    Checkpoint ck;
    ck.kind = kind;
    ck.config = m.config();
    ck.seed = m.seed();
    if (kind == CheckpointKind::General) {
        for (const auto& [name, var] : m.params().items("general/"))
            ck.blobs.emplace_back(name, var.value());
        for (const auto& [name, var] : m.params().items("general_head/"))
            ck.blobs.emplace_back(name, var.value());
    } else {
        for (const auto& [name, var] : m.params().items(""))
            ck.blobs.emplace_back(name, var.value());
    }
    return ck;
}

void save_model(const std::string& path, const Model& m, CheckpointKind kind) {
    save_checkpoint(path, snapshot_model(m, kind));
}

void load_into_model(const std::string& path, Model& m) {
    Checkpoint ck = load_checkpoint(path);
    if (ck.kind == CheckpointKind::Full) {
        if (!(ck.config == m.config()))
            throw DataError("checkpoint configuration echo does not match the model: " + path);
        auto want = m.params().items("");
        if (want.size() != ck.blobs.size())
            throw DataError("checkpoint parameter set differs from the model: " + path);
        for (size_t i = 0; i < want.size(); ++i) {
            if (ck.blobs[i].first != want[i].first)
                throw DataError("checkpoint parameter name mismatch at '" + ck.blobs[i].first +
                                "': " + path);
            Tensor& dst = want[i].second.value();
            const Tensor& src = ck.blobs[i].second;
            if (!dst.same_shape(src))
                throw DataError("checkpoint shape mismatch at '" + ck.blobs[i].first +
                                "': " + path);
            dst = src;
        }
    } else {
        if (ck.config.encoder_scale != m.config().encoder_scale)
            throw DataError("general checkpoint encoder scale does not match the model: " +
                            path);
        for (const auto& [name, src] : ck.blobs) {
            if (!m.params().has(name))
                throw DataError("general checkpoint carries unknown parameter '" + name +
                                "': " + path);
            Tensor& dst = m.params().at(name).value();
            if (!dst.same_shape(src))
                throw DataError("checkpoint shape mismatch at '" + name + "': " + path);
            dst = src;
        }
    }
}

}  // namespace dsal
