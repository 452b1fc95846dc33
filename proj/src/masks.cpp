#include "ss/masks.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <sstream>

#include "ss/rng.hpp"

namespace ss {

void ParamSpace::add_block(const std::string& name, std::vector<int> shape,
                           bool prunable, int layer) {
    if (find(name)) throw StructuralError("duplicate block name: " + name);
    ParamBlock b;
    b.name = name;
    b.shape = std::move(shape);
    b.prunable = prunable;
    b.layer = layer;
    b.size = 1;
    for (int d : b.shape) b.size *= size_t(d);
    b.offset_total = total_count_;
    b.offset_prunable = prunable ? prunable_count_ : size_t(-1);
    total_count_ += b.size;
    if (prunable) prunable_count_ += b.size;
    num_layers_ = std::max(num_layers_, layer);
    blocks_.push_back(std::move(b));
}

const ParamBlock* ParamSpace::find(const std::string& name) const {
    for (const auto& b : blocks_)
        if (b.name == name) return &b;
    return nullptr;
}

std::array<uint8_t, 32> ParamSpace::layout_hash() const {
    std::ostringstream os;
    for (const auto& b : blocks_) {
        os << b.name << '|';
        for (int d : b.shape) os << d << ',';
        os << '|' << (b.prunable ? 1 : 0) << '|' << b.layer << ';';
    }
    const std::string s = os.str();
    std::array<uint8_t, 32> out{};
    static const uint64_t bases[4] = {1469598103934665603ull, 0x2b992ddfa23249d6ull,
                                      0x9e3779b97f4a7c15ull, 0xc2b2ae3d27d4eb4full};
    for (int k = 0; k < 4; ++k) {
        uint64_t h = mix64(fnv1a64(s, bases[k]));
        std::memcpy(out.data() + k * 8, &h, 8);
    }
    return out;
}

size_t MaskMatrix::kept() const {
    size_t n = 0;
    for (uint8_t b : bits) n += b ? 1 : 0;
    return n;
}

double sparsity(const MaskMatrix& m, const ParamSpace& space) {
    if (m.bits.size() != space.prunable_count())
        throw StructuralError("mask length does not match ParamSpace");
    if (space.total_count() == 0) throw StructuralError("empty ParamSpace");
    const size_t non_prunable = space.total_count() - space.prunable_count();
    return double(m.kept() + non_prunable) / double(space.total_count());
}

double overlap_ratio(const std::vector<MaskMatrix>& ms) {
    if (ms.size() < 2) throw StructuralError("overlap_ratio needs at least 2 masks");
    const size_t n = ms[0].bits.size();
    for (const auto& m : ms)
        if (m.bits.size() != n) throw StructuralError("overlap_ratio: length mismatch");
    size_t inter = 0, uni = 0;
    for (size_t i = 0; i < n; ++i) {
        bool all = true, any = false;
        for (const auto& m : ms) {
            all = all && m.bits[i];
            any = any || m.bits[i];
        }
        inter += all ? 1 : 0;
        uni += any ? 1 : 0;
    }
    if (uni == 0) throw StructuralError("overlap_ratio: empty union");
    return double(inter) / double(uni);
}

std::vector<MaskMatrix> hard_sharing_masks(const ParamSpace& space, int num_tasks) {
    std::vector<MaskMatrix> out;
    for (int t = 0; t < num_tasks; ++t) {
        MaskMatrix m;
        m.task_id = "task" + std::to_string(t);
        m.iteration = 0;
        m.bits.assign(space.prunable_count(), 1);
        out.push_back(std::move(m));
    }
    return out;
}

std::vector<MaskMatrix> hierarchical_masks(const ParamSpace& space,
                                           const std::vector<int>& task_layers) {
    std::vector<MaskMatrix> out;
    for (size_t t = 0; t < task_layers.size(); ++t) {
        const int l = task_layers[t];
        if (l < 1 || l > space.num_layers())
            throw ConfigError("hierarchical_masks: layer out of range");
        MaskMatrix m;
        m.task_id = "task" + std::to_string(t);
        m.bits.assign(space.prunable_count(), 0);
        for (const auto& b : space.blocks()) {
            if (!b.prunable) continue;
            // layer-0 prunable blocks (embedding stage extras) stay shared
            if (b.layer <= l)
                std::fill(m.bits.begin() + b.offset_prunable,
                          m.bits.begin() + b.offset_prunable + b.size, uint8_t(1));
        }
        out.push_back(std::move(m));
    }
    return out;
}

uint32_t crc32(const uint8_t* data, size_t len) {
    static uint32_t table[256];
    static bool init = false;
    if (!init) {
        for (uint32_t i = 0; i < 256; ++i) {
            uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            table[i] = c;
        }
        init = true;
    }
    uint32_t c = 0xFFFFFFFFu;
    for (size_t i = 0; i < len; ++i) c = table[(c ^ data[i]) & 0xFF] ^ (c >> 8);
    return c ^ 0xFFFFFFFFu;
}

namespace {

constexpr char kMagic[4] = {'S', 'S', 'M', 'K'};
constexpr uint16_t kVersion = 1;

template <typename T>
void put(std::vector<uint8_t>& buf, T v) {
    uint8_t tmp[sizeof(T)];
    std::memcpy(tmp, &v, sizeof(T));
    buf.insert(buf.end(), tmp, tmp + sizeof(T));
}

template <typename T>
T take(const std::vector<uint8_t>& buf, size_t& pos) {
    if (pos + sizeof(T) > buf.size()) throw FormatError("mask file truncated");
    T v;
    std::memcpy(&v, buf.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
}

}  // namespace

void save_mask(const MaskMatrix& m, const ParamSpace& space, const std::string& path) {
    if (m.bits.size() != space.prunable_count())
        throw StructuralError("mask length does not match ParamSpace");
    std::vector<uint8_t> buf;
    buf.insert(buf.end(), kMagic, kMagic + 4);
    put(buf, kVersion);
    const auto hash = space.layout_hash();
    buf.insert(buf.end(), hash.begin(), hash.end());
    put(buf, uint32_t(m.task_id.size()));
    buf.insert(buf.end(), m.task_id.begin(), m.task_id.end());
    put(buf, m.iteration);
    put(buf, uint64_t(m.bits.size()));
    uint8_t acc = 0;
    for (size_t i = 0; i < m.bits.size(); ++i) {
        if (m.bits[i]) acc |= uint8_t(1u << (i & 7));
        if ((i & 7) == 7 || i + 1 == m.bits.size()) {
            buf.push_back(acc);
            acc = 0;
        }
    }
    put(buf, crc32(buf.data(), buf.size()));
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot open mask file for writing: " + path);
    os.write(reinterpret_cast<const char*>(buf.data()), std::streamsize(buf.size()));
}

MaskMatrix load_mask(const std::string& path, const ParamSpace& space) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot open mask file: " + path);
    std::vector<uint8_t> buf((std::istreambuf_iterator<char>(is)),
                             std::istreambuf_iterator<char>());
    size_t pos = 0;
    if (buf.size() < 4 || std::memcmp(buf.data(), kMagic, 4) != 0)
        throw FormatError("bad mask file magic: " + path);
    pos = 4;
    if (take<uint16_t>(buf, pos) != kVersion)
        throw FormatError("unsupported mask file version: " + path);
    if (pos + 32 > buf.size()) throw FormatError("mask file truncated");
    const auto hash = space.layout_hash();
    if (std::memcmp(buf.data() + pos, hash.data(), 32) != 0)
        throw StructuralError("mask file ParamSpace hash mismatch: " + path);
    pos += 32;
    const uint32_t tlen = take<uint32_t>(buf, pos);
    if (pos + tlen > buf.size()) throw FormatError("mask file truncated");
    MaskMatrix m;
    m.task_id.assign(reinterpret_cast<const char*>(buf.data() + pos), tlen);
    pos += tlen;
    m.iteration = take<uint32_t>(buf, pos);
    const uint64_t nbits = take<uint64_t>(buf, pos);
    if (nbits != space.prunable_count())
        throw StructuralError("mask bit count does not match ParamSpace: " + path);
    const size_t nbytes = size_t((nbits + 7) / 8);
    if (pos + nbytes + 4 > buf.size()) throw FormatError("mask file truncated");
    m.bits.resize(nbits);
    for (size_t i = 0; i < nbits; ++i)
        m.bits[i] = (buf[pos + (i >> 3)] >> (i & 7)) & 1;
    pos += nbytes;
    const uint32_t want = crc32(buf.data(), pos);
    if (take<uint32_t>(buf, pos) != want)
        throw FormatError("mask file CRC mismatch: " + path);
    return m;
}

}  // namespace ss
