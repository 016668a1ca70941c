// SPDX-License-Identifier: Apache-2.0
//
// rispa: channel estimation with reduced RIS phase allocations

#ifndef RISPA_BINARY_IO_HPP
#define RISPA_BINARY_IO_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>

#include "rispa/model.hpp"

namespace rispa::binio {

// Little-endian primitive writer over an ofstream.
class Writer {
public:
    explicit Writer(const std::filesystem::path& path);

    void magic(std::string_view tag);
    void u8(std::uint8_t v);
    void u16(std::uint16_t v);
    void u32(std::uint32_t v);
    void u64(std::uint64_t v);
    void f64(double v);
    void c128(cplx v);

    // Flushes and throws IoError if any write failed.
    void finish();

private:
    void bytes(const unsigned char* p, std::size_t n);

    std::filesystem::path path_;
    std::ofstream out_;
};

// Counterpart of Writer. Short reads raise FormatError(truncated).
class Reader {
public:
    explicit Reader(const std::filesystem::path& path);

    void expect_magic(std::string_view tag);
    std::uint8_t u8();
    std::uint16_t u16();
    std::uint32_t u32();
    std::uint64_t u64();
    double f64();
    cplx c128();

    // Bytes left between the cursor and end of file.
    std::uint64_t remaining();
    bool at_end() { return remaining() == 0; }

private:
    void bytes(unsigned char* p, std::size_t n);

    std::filesystem::path path_;
    std::ifstream in_;
    std::uint64_t size_ = 0;
};

} // namespace rispa::binio

#endif
