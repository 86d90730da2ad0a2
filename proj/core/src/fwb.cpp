#include "facecap/fwb.hpp"

#include "facecap/errors.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

static_assert(std::endian::native == std::endian::little, "FWB1 I/O assumes a little-endian host");

namespace facecap::fwb {

namespace {

constexpr char kMagic[4] = {'F', 'W', 'B', '1'};

template <typename T>
void append(std::vector<std::byte>& out, T value) {
    const auto* p = reinterpret_cast<const std::byte*>(&value);
    out.insert(out.end(), p, p + sizeof(T));
}

class Reader {
public:
    explicit Reader(std::span<const std::byte> bytes) : bytes_(bytes) {}

    bool done() const { return pos_ == bytes_.size(); }

    template <typename T>
    T take() {
        T v;
        std::memcpy(&v, need(sizeof(T)), sizeof(T));
        pos_ += sizeof(T);
        return v;
    }

    std::span<const std::byte> take_bytes(std::size_t n) {
        const std::byte* p = need(n);
        pos_ += n;
        return {p, n};
    }

private:
    const std::byte* need(std::size_t n) const {
        if (bytes_.size() - pos_ < n)
            throw ParseError("FWB1: truncated chunk at byte offset " + std::to_string(pos_));
        return bytes_.data() + pos_;
    }

    std::span<const std::byte> bytes_;
    std::size_t pos_ = 0;
};

} // namespace

std::size_t dtype_size(DType t) {
    switch (t) {
    case DType::F64: return 8;
    case DType::F32: return 4;
    case DType::U32: return 4;
    case DType::U8: return 1;
    }
    throw ParseError("FWB1: unknown dtype code " + std::to_string(static_cast<int>(t)));
}

const char* dtype_name(DType t) {
    switch (t) {
    case DType::F64: return "f64";
    case DType::F32: return "f32";
    case DType::U32: return "u32";
    case DType::U8: return "u8";
    }
    return "?";
}

std::uint64_t Chunk::element_count() const {
    std::uint64_t n = 1;
    for (auto d : dims) n *= d;
    return n;
}

void Container::check_size(const Chunk& c) {
    if (c.name.empty() || c.name.size() > 0xFFFF)
        throw ValidationError("FWB1: chunk name must be 1..65535 bytes");
    if (c.dims.size() > 0xFF) throw ValidationError("FWB1: rank exceeds 255 in chunk '" + c.name + "'");
    if (c.element_count() * dtype_size(c.dtype) != c.payload.size())
        throw ValidationError("FWB1: payload size does not match dims in chunk '" + c.name + "'");
}

void Container::put(Chunk chunk) {
    check_size(chunk);
    auto it = std::find_if(chunks_.begin(), chunks_.end(), [&](const Chunk& c) { return c.name == chunk.name; });
    if (it != chunks_.end())
        *it = std::move(chunk);
    else
        chunks_.push_back(std::move(chunk));
}

void Container::put_text(std::string name, std::string_view text) {
    Chunk c;
    c.name = std::move(name);
    c.dtype = DType::U8;
    c.dims = {text.size()};
    c.payload.resize(text.size());
    std::memcpy(c.payload.data(), text.data(), text.size());
    put(std::move(c));
}

bool Container::has(std::string_view name) const {
    return std::any_of(chunks_.begin(), chunks_.end(), [&](const Chunk& c) { return c.name == name; });
}

const Chunk& Container::chunk(std::string_view name) const {
    for (const auto& c : chunks_)
        if (c.name == name) return c;
    throw ParseError("FWB1: missing chunk '" + std::string(name) + "'");
}

const Chunk& Container::typed_chunk(std::string_view name, DType t) const {
    const Chunk& c = chunk(name);
    if (c.dtype != t)
        throw ParseError("FWB1: chunk '" + c.name + "' has dtype " + dtype_name(c.dtype) + ", expected " +
                         dtype_name(t));
    return c;
}

std::string Container::get_text(std::string_view name) const {
    const Chunk& c = typed_chunk(name, DType::U8);
    return {reinterpret_cast<const char*>(c.payload.data()), c.payload.size()};
}

std::vector<std::byte> Container::encode() const {
    std::vector<std::byte> out;
    for (char ch : kMagic) out.push_back(static_cast<std::byte>(ch));
    for (const auto& c : chunks_) {
        append<std::uint16_t>(out, static_cast<std::uint16_t>(c.name.size()));
        const auto* np = reinterpret_cast<const std::byte*>(c.name.data());
        out.insert(out.end(), np, np + c.name.size());
        append<std::uint8_t>(out, static_cast<std::uint8_t>(c.dtype));
        append<std::uint8_t>(out, static_cast<std::uint8_t>(c.dims.size()));
        for (auto d : c.dims) append<std::uint64_t>(out, d);
        out.insert(out.end(), c.payload.begin(), c.payload.end());
    }
    return out;
}

Container Container::decode(std::span<const std::byte> bytes) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw ParseError("FWB1: bad magic bytes");
    Reader r(bytes.subspan(4));
    Container out;
    while (!r.done()) {
        Chunk c;
        const auto name_len = r.take<std::uint16_t>();
        auto name = r.take_bytes(name_len);
        c.name.assign(reinterpret_cast<const char*>(name.data()), name.size());
        const auto code = r.take<std::uint8_t>();
        if (code < 1 || code > 4) throw ParseError("FWB1: unknown dtype code " + std::to_string(code) + " in chunk '" + c.name + "'");
        c.dtype = static_cast<DType>(code);
        const auto rank = r.take<std::uint8_t>();
        for (int i = 0; i < rank; ++i) c.dims.push_back(r.take<std::uint64_t>());
        const std::uint64_t n = c.element_count() * dtype_size(c.dtype);
        auto payload = r.take_bytes(static_cast<std::size_t>(n));
        c.payload.assign(payload.begin(), payload.end());
        if (out.has(c.name)) throw ParseError("FWB1: duplicate chunk '" + c.name + "'");
        out.chunks_.push_back(std::move(c));
    }
    return out;
}

void Container::write(const std::filesystem::path& path) const {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open for writing: " + path.string());
    const auto bytes = encode();
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("write failed: " + path.string());
}

Container Container::read(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for reading: " + path.string());
    std::vector<char> raw((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return decode(std::as_bytes(std::span(raw)));
}

} // namespace facecap::fwb
