#include "spectra/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>

#include "spectra/error.hpp"
#include "spectra/rng.hpp"

namespace spectra {

namespace {

constexpr char kMagic[6] = {'D', 'C', 'K', 'P', 'T', '1'};
constexpr char kOptMagic[5] = {'O', 'P', 'T', 'S', '1'};

void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xFF));
    out.push_back(static_cast<char>((v >> 8) & 0xFF));
}

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f32(std::string& out, float f) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32(out, bits);
}

class Reader {
public:
    Reader(std::string bytes, std::string path) : bytes_(std::move(bytes)), path_(std::move(path)) {}

    bool at_end() const { return pos_ >= bytes_.size(); }
    std::size_t remaining() const { return bytes_.size() - pos_; }

    void raw(void* dst, std::size_t n, const char* what) {
        if (remaining() < n) {
            fail_format("checkpoint '" + path_ + "': truncated while reading " + std::string(what));
        }
        std::memcpy(dst, bytes_.data() + pos_, n);
        pos_ += n;
    }

    std::uint16_t u16(const char* what) {
        unsigned char b[2];
        raw(b, 2, what);
        return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
    }

    std::uint32_t u32(const char* what) {
        unsigned char b[4];
        raw(b, 4, what);
        return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
               (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
    }

    std::uint64_t u64(const char* what) {
        std::uint64_t lo = u32(what), hi = u32(what);
        return lo | (hi << 32);
    }

    float f32(const char* what) {
        std::uint32_t bits = u32(what);
        float f;
        std::memcpy(&f, &bits, 4);
        return f;
    }

    std::string str(std::size_t n, const char* what) {
        std::string s(n, '\0');
        raw(s.data(), n, what);
        return s;
    }

    const std::string& path() const { return path_; }

private:
    std::string bytes_;
    std::string path_;
    std::size_t pos_ = 0;
};

void append_record_payload(std::string& out, const std::string& name,
                           const std::vector<int>& shape, const std::vector<double>& data) {
    if (name.size() > 0xFFFF) fail_config("parameter name too long: " + name);
    if (shape.size() > 0xFF) fail_config("parameter rank too large: " + name);
    put_u16(out, static_cast<std::uint16_t>(name.size()));
    out.append(name);
    out.push_back(static_cast<char>(shape.size()));
    std::size_t numel = 1;
    for (int d : shape) {
        put_u32(out, static_cast<std::uint32_t>(d));
        numel *= static_cast<std::size_t>(d);
    }
    if (numel != data.size()) fail_config("record '" + name + "': data/shape mismatch");
    for (double v : data) put_f32(out, static_cast<float>(v));
}

struct RawRecord {
    std::string name;
    std::vector<int> shape;
    std::vector<double> data;
};

RawRecord read_record_payload(Reader& r) {
    RawRecord rec;
    const std::uint16_t name_len = r.u16("name length");
    rec.name = r.str(name_len, "name");
    unsigned char rank;
    r.raw(&rank, 1, "rank");
    std::size_t numel = 1;
    rec.shape.resize(rank);
    for (int i = 0; i < rank; ++i) {
        const std::uint32_t d = r.u32("dim");
        if (d > 1u << 28) fail_format("checkpoint '" + r.path() + "': absurd dim in '" + rec.name + "'");
        rec.shape[static_cast<std::size_t>(i)] = static_cast<int>(d);
        numel *= d;
    }
    rec.data.resize(numel);
    for (std::size_t i = 0; i < numel; ++i) rec.data[i] = static_cast<double>(r.f32("payload"));
    return rec;
}

}  // namespace

const CheckpointRecord* Checkpoint::find(const std::string& name) const {
    for (const auto& r : records) {
        if (r.name == name) return &r;
    }
    return nullptr;
}

Checkpoint checkpoint_from_store(const ParameterStore& store) {
    Checkpoint ckpt;
    for (const auto& e : store.entries()) {
        CheckpointRecord rec;
        rec.name = e.name;
        rec.shape = e.value.shape();
        rec.data = e.value.raw();
        ckpt.records.push_back(std::move(rec));
    }
    return ckpt;
}

void load_into_store(const Checkpoint& ckpt, ParameterStore& store) {
    if (ckpt.records.size() != store.size()) {
        fail_config("checkpoint has " + std::to_string(ckpt.records.size()) +
                    " records but model has " + std::to_string(store.size()) + " parameters");
    }
    for (const auto& rec : ckpt.records) {
        if (!store.has(rec.name)) fail_config("checkpoint record '" + rec.name + "' unknown to model");
        Tensor& value = store.value(rec.name);
        if (value.shape() != rec.shape) {
            fail_config("checkpoint record '" + rec.name + "' shape " + shape_str(rec.shape) +
                        " does not match model shape " + shape_str(value.shape()));
        }
        std::copy(rec.data.begin(), rec.data.end(), value.data());
    }
}

void quantize_store_to_f32(ParameterStore& store) {
    for (auto& e : store.entries()) {
        for (std::size_t i = 0; i < e.value.numel(); ++i) {
            e.value[i] = static_cast<double>(static_cast<float>(e.value[i]));
        }
    }
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    std::string out;
    out.append(kMagic, sizeof(kMagic));
    put_u32(out, static_cast<std::uint32_t>(ckpt.records.size()));
    for (const auto& rec : ckpt.records) append_record_payload(out, rec.name, rec.shape, rec.data);

    if (ckpt.has_trailer) {
        out.append(kOptMagic, sizeof(kOptMagic));
        put_u64(out, ckpt.config_hash);
        put_u64(out, ckpt.step);
        out.push_back(ckpt.has_moments ? 1 : 0);
        if (ckpt.has_moments) {
            put_u64(out, ckpt.adam_step);
            put_u32(out, static_cast<std::uint32_t>(ckpt.moments.size()));
            for (const auto& mom : ckpt.moments) {
                append_record_payload(out, mom.name, mom.shape, mom.m);
                for (double v : mom.v) put_f32(out, static_cast<float>(v));
            }
        }
    }

    std::ofstream os(path, std::ios::binary);
    if (!os) fail_io("cannot write checkpoint '" + path + "'");
    os.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!os) fail_io("short write on checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) fail_io("cannot open checkpoint '" + path + "'");
    std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    Reader r(std::move(bytes), path);

    char magic[6];
    r.raw(magic, 6, "magic");
    if (std::memcmp(magic, kMagic, 6) != 0) fail_format("checkpoint '" + path + "': bad magic");

    Checkpoint ckpt;
    const std::uint32_t count = r.u32("record count");
    ckpt.records.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        RawRecord raw = read_record_payload(r);
        ckpt.records.push_back({std::move(raw.name), std::move(raw.shape), std::move(raw.data)});
    }

    if (r.at_end()) {
        ckpt.has_trailer = false;
        return ckpt;
    }
    char opt_magic[5];
    r.raw(opt_magic, 5, "trailer magic");
    if (std::memcmp(opt_magic, kOptMagic, 5) != 0) {
        fail_format("checkpoint '" + path + "': bad optimizer-section magic");
    }
    ckpt.has_trailer = true;
    ckpt.config_hash = r.u64("config hash");
    ckpt.step = r.u64("step");
    unsigned char has_moments;
    r.raw(&has_moments, 1, "moments flag");
    ckpt.has_moments = has_moments != 0;
    if (ckpt.has_moments) {
        ckpt.adam_step = r.u64("adam step");
        const std::uint32_t n = r.u32("moment count");
        for (std::uint32_t i = 0; i < n; ++i) {
            RawRecord raw = read_record_payload(r);
            MomentRecord mom;
            mom.name = std::move(raw.name);
            mom.shape = std::move(raw.shape);
            mom.m = std::move(raw.data);
            mom.v.resize(mom.m.size());
            for (std::size_t k = 0; k < mom.v.size(); ++k) {
                mom.v[k] = static_cast<double>(r.f32("second moment"));
            }
            ckpt.moments.push_back(std::move(mom));
        }
    }
    if (!r.at_end()) fail_format("checkpoint '" + path + "': trailing garbage");
    return ckpt;
}

std::string checkpoint_content_hash(const Checkpoint& ckpt) {
    std::string payload;
    for (const auto& rec : ckpt.records) append_record_payload(payload, rec.name, rec.shape, rec.data);
    const std::uint64_t h = fnv1a64(payload);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace spectra
