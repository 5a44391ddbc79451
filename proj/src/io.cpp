#include "latvsr/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace latvsr::io {

namespace fs = std::filesystem;

namespace {

constexpr char kTensorMagic[6] = {'L', 'V', 'T', 'E', 'N', '\n'};
constexpr char kCkptMagic[7] = {'L', 'V', 'C', 'K', 'P', 'T', '\n'};

template <typename T>
void put(std::string& out, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

template <typename T>
T get(const std::string& in, size_t& pos) {
    if (pos + sizeof(T) > in.size()) throw std::runtime_error("truncated file");
    T v;
    std::memcpy(&v, in.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
}

std::string encode_tensor_body(const Tensor& t) {
    std::string out;
    put<uint32_t>(out, 1);
    put<uint32_t>(out, static_cast<uint32_t>(t.ndim()));
    for (int i = 0; i < t.ndim(); ++i) put<int64_t>(out, t.dim(i));
    out.append(reinterpret_cast<const char*>(t.data()),
               static_cast<size_t>(t.numel()) * sizeof(double));
    return out;
}

Tensor decode_tensor_body(const std::string& in, size_t& pos) {
    uint32_t version = get<uint32_t>(in, pos);
    if (version != 1) throw std::runtime_error("unsupported tensor version " + std::to_string(version));
    uint32_t ndim = get<uint32_t>(in, pos);
    std::vector<int64_t> shape;
    for (uint32_t i = 0; i < ndim; ++i) shape.push_back(get<int64_t>(in, pos));
    Tensor t(shape);
    size_t bytes = static_cast<size_t>(t.numel()) * sizeof(double);
    if (pos + bytes > in.size()) throw std::runtime_error("truncated tensor payload");
    std::memcpy(t.data(), in.data() + pos, bytes);
    pos += bytes;
    return t;
}

}  // namespace

void atomic_write(const fs::path& path, const std::string& bytes) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw std::runtime_error("cannot open for writing: " + tmp.string());
        f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!f) throw std::runtime_error("write failed: " + tmp.string());
    }
    fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open: " + path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void save_tensor(const fs::path& path, const Tensor& t) {
    std::string out(kTensorMagic, sizeof(kTensorMagic));
    out += encode_tensor_body(t);
    atomic_write(path, out);
}

Tensor load_tensor(const fs::path& path) {
    std::string in = read_file(path);
    if (in.size() < sizeof(kTensorMagic) ||
        std::memcmp(in.data(), kTensorMagic, sizeof(kTensorMagic)) != 0)
        throw std::runtime_error("not a tensor file: " + path.string());
    size_t pos = sizeof(kTensorMagic);
    return decode_tensor_body(in, pos);
}

void save_checkpoint(const fs::path& path, const Checkpoint& ckpt) {
    json header;
    header["format_version"] = kCheckpointVersion;
    header["kind"] = ckpt.kind;
    header["meta"] = ckpt.meta;
    json table = json::array();
    uint64_t offset = 0;
    for (const auto& [name, t] : ckpt.tensors) {
        json entry;
        entry["name"] = name;
        entry["shape"] = t.shape();
        entry["offset"] = offset;
        table.push_back(entry);
        offset += static_cast<uint64_t>(t.numel()) * sizeof(double);
    }
    header["tensors"] = table;
    std::string hs = header.dump();
    std::string out(kCkptMagic, sizeof(kCkptMagic));
    put<uint32_t>(out, kCheckpointVersion);
    put<uint64_t>(out, static_cast<uint64_t>(hs.size()));
    out += hs;
    for (const auto& [name, t] : ckpt.tensors)
        out.append(reinterpret_cast<const char*>(t.data()),
                   static_cast<size_t>(t.numel()) * sizeof(double));
    atomic_write(path, out);
}

Checkpoint load_checkpoint(const fs::path& path) {
    std::string in = read_file(path);
    if (in.size() < sizeof(kCkptMagic) || std::memcmp(in.data(), kCkptMagic, sizeof(kCkptMagic)) != 0)
        throw std::runtime_error("not a checkpoint file: " + path.string());
    size_t pos = sizeof(kCkptMagic);
    uint32_t version = get<uint32_t>(in, pos);
    if (version != kCheckpointVersion)
        throw std::runtime_error("checkpoint version mismatch: file has " + std::to_string(version) +
                                 ", reader supports " + std::to_string(kCheckpointVersion));
    uint64_t hlen = get<uint64_t>(in, pos);
    if (pos + hlen > in.size()) throw std::runtime_error("truncated checkpoint header");
    json header = json::parse(in.substr(pos, hlen));
    pos += hlen;
    Checkpoint ckpt;
    ckpt.kind = header.at("kind").get<std::string>();
    ckpt.meta = header.at("meta");
    size_t payload = pos;
    for (const auto& entry : header.at("tensors")) {
        std::string name = entry.at("name").get<std::string>();
        std::vector<int64_t> shape = entry.at("shape").get<std::vector<int64_t>>();
        uint64_t offset = entry.at("offset").get<uint64_t>();
        Tensor t(shape);
        size_t bytes = static_cast<size_t>(t.numel()) * sizeof(double);
        if (payload + offset + bytes > in.size()) throw std::runtime_error("truncated checkpoint payload");
        std::memcpy(t.data(), in.data() + payload + offset, bytes);
        ckpt.tensors[name] = std::move(t);
    }
    return ckpt;
}

void write_json(const fs::path& path, const json& j) { atomic_write(path, j.dump(2) + "\n"); }

json read_json(const fs::path& path) { return json::parse(read_file(path)); }

uint64_t fnv1a64(const void* data, size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    uint64_t h = 1469598103934665603ull;
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

uint64_t hash_string(const std::string& s) { return fnv1a64(s.data(), s.size()); }

uint64_t hash_file(const fs::path& path) {
    std::string in = read_file(path);
    return fnv1a64(in.data(), in.size());
}

std::string hash_hex(uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

namespace {
unsigned char to_byte(double v) {
    double c = std::min(1.0, std::max(0.0, v));
    return static_cast<unsigned char>(std::lround(c * 255.0));
}
}  // namespace

void save_pgm(const fs::path& path, const Tensor& img) {
    if (img.ndim() != 2) throw std::invalid_argument("save_pgm: need (H,W)");
    int64_t H = img.dim(0), W = img.dim(1);
    std::string out = "P5\n" + std::to_string(W) + " " + std::to_string(H) + "\n255\n";
    for (int64_t i = 0; i < H * W; ++i) out.push_back(static_cast<char>(to_byte(img[i])));
    atomic_write(path, out);
}

void save_ppm_frame(const fs::path& path, const Tensor& clip, int64_t frame) {
    if (clip.ndim() != 4 || clip.dim(1) != 3) throw std::invalid_argument("save_ppm_frame: need (T,3,H,W)");
    if (frame < 0 || frame >= clip.dim(0)) throw std::invalid_argument("save_ppm_frame: frame out of range");
    int64_t H = clip.dim(2), W = clip.dim(3);
    std::string out = "P6\n" + std::to_string(W) + " " + std::to_string(H) + "\n255\n";
    for (int64_t y = 0; y < H; ++y)
        for (int64_t x = 0; x < W; ++x)
            for (int64_t c = 0; c < 3; ++c)
                out.push_back(static_cast<char>(to_byte(clip.at4(frame, c, y, x))));
    atomic_write(path, out);
}

}  // namespace latvsr::io
