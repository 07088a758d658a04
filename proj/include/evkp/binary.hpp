#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "evkp/error.hpp"

namespace evkp {

/// Appends fixed-width little-endian values to a byte buffer.
class ByteWriter {
 public:
  void magic(std::string_view tag) {
    for (char c : tag) bytes_.push_back(static_cast<std::uint8_t>(c));
  }

  template <typename T>
    requires std::is_arithmetic_v<T>
  void put(T value) {
    using U = std::conditional_t<sizeof(T) == 1, std::uint8_t,
              std::conditional_t<sizeof(T) == 2, std::uint16_t,
              std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>>>;
    const U bits = std::bit_cast<U>(value);
    for (std::size_t i = 0; i < sizeof(T); ++i)
      bytes_.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
  }

  const std::vector<std::uint8_t>& bytes() const { return bytes_; }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

/// Reads fixed-width little-endian values; every failure names the byte offset.
class ByteReader {
 public:
  ByteReader(std::span<const std::uint8_t> bytes, std::string context)
      : bytes_(bytes), context_(std::move(context)) {}

  void expect_magic(std::string_view tag) {
    require(tag.size(), "magic");
    if (std::memcmp(bytes_.data() + pos_, tag.data(), tag.size()) != 0)
      fail("bad magic, expected '" + std::string(tag) + "'");
    pos_ += tag.size();
  }

  template <typename T>
    requires std::is_arithmetic_v<T>
  T get(std::string_view what) {
    using U = std::conditional_t<sizeof(T) == 1, std::uint8_t,
              std::conditional_t<sizeof(T) == 2, std::uint16_t,
              std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>>>;
    require(sizeof(T), what);
    U bits = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
      bits |= static_cast<U>(static_cast<U>(bytes_[pos_ + i]) << (8 * i));
    pos_ += sizeof(T);
    return std::bit_cast<T>(bits);
  }

  /// Checks that `count` records of `record_size` bytes remain.
  void require_records(std::uint64_t count, std::size_t record_size, std::string_view what) {
    const std::uint64_t left = bytes_.size() - pos_;
    if (record_size != 0 && count > left / record_size)
      fail("truncated " + std::string(what) + ": need " + std::to_string(count) +
           " records of " + std::to_string(record_size) + " bytes, have " +
           std::to_string(left) + " bytes");
  }

  void expect_end() const {
    if (pos_ != bytes_.size())
      fail(std::to_string(bytes_.size() - pos_) + " trailing bytes");
  }

  std::size_t offset() const { return pos_; }

  [[noreturn]] void fail(const std::string& message) const {
    throw FormatError(context_ + ": offset " + std::to_string(pos_) + ": " + message);
  }

 private:
  void require(std::size_t n, std::string_view what) const {
    if (bytes_.size() - pos_ < n) fail("truncated while reading " + std::string(what));
  }

  std::span<const std::uint8_t> bytes_;
  std::string context_;
  std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
std::string read_file_text(const std::filesystem::path& path);
void write_file_text(const std::filesystem::path& path, std::string_view text);

}  // namespace evkp
