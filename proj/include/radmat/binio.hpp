#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>

#include "radmat/error.hpp"

namespace radmat::binio {

template <class T>
    requires std::is_arithmetic_v<T>
void write_le(std::ostream& out, T value) {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint8_t>>;
    static_assert(sizeof(T) == sizeof(U));
    auto bits = std::bit_cast<U>(value);
    char bytes[sizeof(U)];
    for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xFFu);
    out.write(bytes, sizeof bytes);
}

template <class T>
    requires std::is_arithmetic_v<T>
T read_le(std::istream& in) {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint8_t>>;
    unsigned char bytes[sizeof(U)];
    if (!in.read(reinterpret_cast<char*>(bytes), sizeof bytes)) throw Error(ErrorKind::Format, "unexpected end of file");
    U bits = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) bits |= static_cast<U>(bytes[i]) << (8 * i);
    return std::bit_cast<T>(bits);
}

inline void write_bytes(std::ostream& out, const std::string& s) {
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_bytes(std::istream& in, std::uint32_t max_len = 1u << 28) {
    const auto n = read_le<std::uint32_t>(in);
    if (n > max_len) throw Error(ErrorKind::Format, "length prefix too large");
    std::string s(n, '\0');
    if (n > 0 && !in.read(s.data(), n)) throw Error(ErrorKind::Format, "unexpected end of file");
    return s;
}

inline void expect_magic(std::istream& in, std::string_view magic) {
    std::string got(magic.size(), '\0');
    if (!in.read(got.data(), static_cast<std::streamsize>(got.size())) || got != magic)
        throw Error(ErrorKind::Format, "bad magic, expected '" + std::string(magic) + "'");
}

} // namespace radmat::binio
