#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "net.hpp"
#include "qlearn.hpp"
#include "util.hpp"

namespace gridtalk {

struct CheckpointError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Little-endian binary buffer. Doubles travel as their IEEE bit patterns, so
// save and load round-trip values exactly.
class BinaryWriter {
public:
    void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
    void f64(double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        u64(bits);
    }
    void str(std::string_view s) {
        u64(s.size());
        buf_.append(s);
    }
    void doubles(const std::vector<double>& v) {
        u64(v.size());
        for (double d : v) f64(d);
    }
    void ints(const std::vector<int>& v) {
        u64(v.size());
        for (int d : v) u32(static_cast<std::uint32_t>(d));
    }
    const std::string& buffer() const { return buf_; }

private:
    std::string buf_;
};

class BinaryReader {
public:
    explicit BinaryReader(std::string_view data) : data_(data) {}

    std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)[0]); }
    std::uint32_t u32() {
        auto b = take(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b[i])) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        auto b = take(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b[i])) << (8 * i);
        return v;
    }
    std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
    double f64() {
        std::uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
    std::string str() {
        std::uint64_t n = u64();
        return std::string(take(n));
    }
    std::vector<double> doubles() {
        std::uint64_t n = u64();
        std::vector<double> v(n);
        for (auto& d : v) d = f64();
        return v;
    }
    std::vector<int> ints() {
        std::uint64_t n = u64();
        std::vector<int> v(n);
        for (auto& d : v) d = static_cast<int>(u32());
        return v;
    }
    bool at_end() const { return pos_ == data_.size(); }

private:
    std::string_view take(std::uint64_t n) {
        if (n > data_.size() - pos_) throw CheckpointError("checkpoint: truncated data");
        std::string_view s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    std::string_view data_;
    std::size_t pos_ = 0;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr char kCheckpointMagic[4] = {'G', 'T', 'C', 'K'};

// File envelope: magic, version, payload, FNV-1a checksum of the payload.
// Any truncation or bit flip fails the size or checksum test on load.
inline void write_checkpoint_file(const std::filesystem::path& path, const std::string& payload) {
    std::string out;
    out.append(kCheckpointMagic, 4);
    BinaryWriter head;
    head.u32(kCheckpointVersion);
    head.u64(payload.size());
    out += head.buffer();
    out += payload;
    BinaryWriter sum;
    sum.u64(fnv1a64(payload));
    out += sum.buffer();
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw CheckpointError("checkpoint: cannot open for write: " + path.string());
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw CheckpointError("checkpoint: write failed: " + path.string());
}

inline std::string read_checkpoint_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw CheckpointError("checkpoint: cannot open: " + path.string());
    std::string data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (data.size() < 4 + 4 + 8 + 8) throw CheckpointError("checkpoint: file too short");
    if (std::memcmp(data.data(), kCheckpointMagic, 4) != 0)
        throw CheckpointError("checkpoint: bad magic");
    BinaryReader head(std::string_view(data).substr(4, 12));
    const std::uint32_t version = head.u32();
    if (version != kCheckpointVersion)
        throw CheckpointError("checkpoint: unsupported version " + std::to_string(version));
    const std::uint64_t payload_size = head.u64();
    if (data.size() != 4 + 12 + payload_size + 8)
        throw CheckpointError("checkpoint: size mismatch (truncated or padded)");
    std::string_view payload = std::string_view(data).substr(16, payload_size);
    BinaryReader tail(std::string_view(data).substr(16 + payload_size, 8));
    if (tail.u64() != fnv1a64(payload)) throw CheckpointError("checkpoint: checksum mismatch");
    return std::string(payload);
}

// --- network and agent blobs -------------------------------------------------

inline void write_network_spec(BinaryWriter& w, const NetworkSpec& s) {
    w.u8(static_cast<std::uint8_t>(s.encoder));
    w.u32(static_cast<std::uint32_t>(s.input_width));
    w.u32(static_cast<std::uint32_t>(s.map_side));
    w.u32(static_cast<std::uint32_t>(s.conv1_channels));
    w.u32(static_cast<std::uint32_t>(s.rep_size));
    w.u8(s.has_memory ? 1 : 0);
    w.u32(static_cast<std::uint32_t>(s.action_count));
}

inline NetworkSpec read_network_spec(BinaryReader& r) {
    NetworkSpec s;
    s.encoder = static_cast<EncoderKind>(r.u8());
    s.input_width = static_cast<int>(r.u32());
    s.map_side = static_cast<int>(r.u32());
    s.conv1_channels = static_cast<int>(r.u32());
    s.rep_size = static_cast<int>(r.u32());
    s.has_memory = r.u8() != 0;
    s.action_count = static_cast<int>(r.u32());
    s.validate();
    return s;
}

inline void write_params(BinaryWriter& w, const ParamSet& p) {
    w.i64(p.adam_step_count);
    w.u32(static_cast<std::uint32_t>(p.tensors.size()));
    for (const auto& t : p.tensors) {
        w.str(t.name);
        w.ints(t.shape);
        w.doubles(t.value);
        w.doubles(t.m);
        w.doubles(t.v);
    }
}

inline ParamSet read_params(BinaryReader& r) {
    ParamSet p;
    p.adam_step_count = r.i64();
    const std::uint32_t n = r.u32();
    for (std::uint32_t i = 0; i < n; ++i) {
        ParamTensor t;
        t.name = r.str();
        t.shape = r.ints();
        t.value = r.doubles();
        t.m = r.doubles();
        t.v = r.doubles();
        std::size_t expect = 1;
        for (int d : t.shape) expect *= static_cast<std::size_t>(d);
        if (t.value.size() != expect)
            throw CheckpointError("checkpoint: tensor shape mismatch for " + t.name);
        p.tensors.push_back(std::move(t));
    }
    return p;
}

inline void write_agent_config(BinaryWriter& w, const AgentConfig& c) {
    w.u8(static_cast<std::uint8_t>(c.role));
    w.u8(static_cast<std::uint8_t>(c.visibility));
    w.u8(c.has_memory ? 1 : 0);
    w.u32(static_cast<std::uint32_t>(c.rep_size));
    w.f64(c.alpha);
    w.f64(c.epsilon);
    w.f64(c.gamma);
    w.f64(c.lambda);
}

inline AgentConfig read_agent_config(BinaryReader& r) {
    AgentConfig c;
    c.role = static_cast<Role>(r.u8());
    c.visibility = static_cast<Visibility>(r.u8());
    c.has_memory = r.u8() != 0;
    c.rep_size = static_cast<int>(r.u32());
    c.alpha = r.f64();
    c.epsilon = r.f64();
    c.gamma = r.f64();
    c.lambda = r.f64();
    return c;
}

inline void write_agent(BinaryWriter& w, const Agent& a) {
    write_agent_config(w, a.cfg);
    write_network_spec(w, a.spec);
    write_params(w, a.params);
}

inline Agent read_agent(BinaryReader& r) {
    Agent a;
    a.cfg = read_agent_config(r);
    a.spec = read_network_spec(r);
    a.params = read_params(r);
    // the stored tensors must be exactly what this architecture allocates
    RngStream probe(0);
    ParamSet expect = init_params(a.spec, probe);
    if (expect.tensors.size() != a.params.tensors.size())
        throw CheckpointError("checkpoint: agent tensor set does not match spec");
    for (std::size_t i = 0; i < expect.tensors.size(); ++i) {
        if (expect.tensors[i].name != a.params.tensors[i].name ||
            expect.tensors[i].shape != a.params.tensors[i].shape)
            throw CheckpointError("checkpoint: agent tensor layout does not match spec");
    }
    return a;
}

}  // namespace gridtalk
