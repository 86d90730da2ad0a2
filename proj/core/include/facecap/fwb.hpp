#pragma once

// FWB1 binary container.
//
// Layout: the four magic bytes "FWB1", then chunks until end of file. Each
// chunk is
//   u16 name length | UTF-8 name | u8 dtype | u8 rank | rank x u64 dims | payload
// with every integer and payload element little-endian. Payload size is the
// product of dims times the element width of dtype.

#include <cstddef>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace facecap::fwb {

enum class DType : std::uint8_t { F64 = 1, F32 = 2, U32 = 3, U8 = 4 };

std::size_t dtype_size(DType t);
const char* dtype_name(DType t);

template <typename T> struct dtype_of;
template <> struct dtype_of<double> { static constexpr DType value = DType::F64; };
template <> struct dtype_of<float> { static constexpr DType value = DType::F32; };
template <> struct dtype_of<std::uint32_t> { static constexpr DType value = DType::U32; };
template <> struct dtype_of<std::uint8_t> { static constexpr DType value = DType::U8; };

struct Chunk {
    std::string name;
    DType dtype = DType::U8;
    std::vector<std::uint64_t> dims;
    std::vector<std::byte> payload;

    std::uint64_t element_count() const;
};

class Container {
public:
    /// Inserts or replaces a chunk. Replacement keeps the original position.
    void put(Chunk chunk);

    template <typename T>
    void put_array(std::string name, std::vector<std::uint64_t> dims, std::span<const T> values) {
        Chunk c;
        c.name = std::move(name);
        c.dtype = dtype_of<T>::value;
        c.dims = std::move(dims);
        c.payload.resize(values.size_bytes());
        if (!values.empty()) std::memcpy(c.payload.data(), values.data(), values.size_bytes());
        check_size(c);
        put(std::move(c));
    }

    void put_text(std::string name, std::string_view text);

    bool has(std::string_view name) const;
    const Chunk& chunk(std::string_view name) const;
    const std::vector<Chunk>& chunks() const { return chunks_; }

    /// Copies a chunk's payload out; throws ParseError when the dtype differs.
    template <typename T>
    std::vector<T> get_array(std::string_view name) const {
        const Chunk& c = typed_chunk(name, dtype_of<T>::value);
        std::vector<T> out(c.element_count());
        if (!out.empty()) std::memcpy(out.data(), c.payload.data(), c.payload.size());
        return out;
    }

    std::string get_text(std::string_view name) const;

    std::vector<std::byte> encode() const;
    static Container decode(std::span<const std::byte> bytes);

    void write(const std::filesystem::path& path) const;
    static Container read(const std::filesystem::path& path);

private:
    const Chunk& typed_chunk(std::string_view name, DType t) const;
    static void check_size(const Chunk& c);

    std::vector<Chunk> chunks_;
};

} // namespace facecap::fwb
