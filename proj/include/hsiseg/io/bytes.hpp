#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <vector>

namespace hsiseg::bytes {

template <class T>
T byteswap(T value) noexcept {
  auto raw = std::bit_cast<std::array<std::uint8_t, sizeof(T)>>(value);
  std::reverse(raw.begin(), raw.end());
  return std::bit_cast<T>(raw);
}

template <class T>
T read_le(const std::uint8_t* p) noexcept {
  T value;
  std::memcpy(&value, p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) value = byteswap(value);
  return value;
}

template <class T>
void append_le(std::vector<std::uint8_t>& out, T value) {
  if constexpr (std::endian::native == std::endian::big) value = byteswap(value);
  const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
  out.insert(out.end(), p, p + sizeof(T));
}

}  // namespace hsiseg::bytes
