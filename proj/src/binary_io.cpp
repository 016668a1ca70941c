// SPDX-License-Identifier: Apache-2.0
//
// rispa: channel estimation with reduced RIS phase allocations

#include "rispa/binary_io.hpp"

#include <bit>
#include <cstring>

#include "rispa/errors.hpp"

namespace rispa::binio {

namespace {

template <typename T>
void to_le(T v, unsigned char* out)
{
    for (std::size_t i = 0; i < sizeof(T); ++i)
        out[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
}

template <typename T>
T from_le(const unsigned char* in)
{
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
        v |= static_cast<T>(in[i]) << (8 * i);
    return v;
}

} // namespace

Writer::Writer(const std::filesystem::path& path) : path_(path), out_(path, std::ios::binary | std::ios::trunc)
{
    if (!out_)
        throw IoError("cannot open '" + path.string() + "' for writing");
}

void Writer::bytes(const unsigned char* p, std::size_t n)
{
    out_.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void Writer::magic(std::string_view tag)
{
    bytes(reinterpret_cast<const unsigned char*>(tag.data()), tag.size());
}

void Writer::u8(std::uint8_t v) { bytes(&v, 1); }

void Writer::u16(std::uint16_t v)
{
    unsigned char b[2];
    to_le(v, b);
    bytes(b, 2);
}

void Writer::u32(std::uint32_t v)
{
    unsigned char b[4];
    to_le(v, b);
    bytes(b, 4);
}

void Writer::u64(std::uint64_t v)
{
    unsigned char b[8];
    to_le(v, b);
    bytes(b, 8);
}

void Writer::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void Writer::c128(cplx v)
{
    f64(v.real());
    f64(v.imag());
}

void Writer::finish()
{
    out_.flush();
    if (!out_)
        throw IoError("write to '" + path_.string() + "' failed");
}

Reader::Reader(const std::filesystem::path& path) : path_(path), in_(path, std::ios::binary)
{
    if (!in_)
        throw IoError("cannot open '" + path.string() + "' for reading");
    std::error_code ec;
    size_ = std::filesystem::file_size(path, ec);
    if (ec)
        throw IoError("cannot stat '" + path.string() + "'");
}

void Reader::bytes(unsigned char* p, std::size_t n)
{
    in_.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n)
        throw FormatError(FormatError::Kind::truncated, "'" + path_.string() + "' ends prematurely");
}

void Reader::expect_magic(std::string_view tag)
{
    std::string got(tag.size(), '\0');
    in_.read(got.data(), static_cast<std::streamsize>(got.size()));
    if (static_cast<std::size_t>(in_.gcount()) != tag.size() || got != tag)
        throw FormatError(FormatError::Kind::bad_magic,
                          "'" + path_.string() + "' is not a " + std::string(tag) + " file (bad magic)");
}

std::uint8_t Reader::u8()
{
    unsigned char b;
    bytes(&b, 1);
    return b;
}

std::uint16_t Reader::u16()
{
    unsigned char b[2];
    bytes(b, 2);
    return from_le<std::uint16_t>(b);
}

std::uint32_t Reader::u32()
{
    unsigned char b[4];
    bytes(b, 4);
    return from_le<std::uint32_t>(b);
}

std::uint64_t Reader::u64()
{
    unsigned char b[8];
    bytes(b, 8);
    return from_le<std::uint64_t>(b);
}

double Reader::f64() { return std::bit_cast<double>(u64()); }

cplx Reader::c128()
{
    const double re = f64();
    const double im = f64();
    return {re, im};
}

std::uint64_t Reader::remaining()
{
    const auto pos = in_.tellg();
    if (pos < 0)
        return 0;
    return size_ - static_cast<std::uint64_t>(pos);
}

} // namespace rispa::binio
