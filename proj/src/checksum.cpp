#include <fstream>
#include <iterator>

#include <fmt/format.h>
#include <openssl/evp.h>

#include "tvkd/errors.hpp"
#include "tvkd/synthetic_data.hpp"

namespace tvkd {

Sha256 sha256(std::string_view bytes) {
  Sha256 out{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), out.data(), &len, EVP_sha256(), nullptr) != 1 || len != out.size()) {
    throw Error("SHA-256 computation failed");
  }
  return out;
}

Sha256 sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open {}", path.string()));
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError(fmt::format("read from {} failed", path.string()));
  return sha256(bytes);
}

std::string to_hex(const Sha256& digest) {
  std::string s;
  s.reserve(64);
  for (auto b : digest) s += fmt::format("{:02x}", b);
  return s;
}

Sha256 sha256_from_hex(std::string_view hex) {
  if (hex.size() != 64) throw InvalidArgument("checksum must be 64 hex digits");
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    throw InvalidArgument("checksum contains a non-hex character");
  };
  Sha256 out{};
  for (std::size_t i = 0; i < 32; ++i) {
    out[i] = static_cast<std::uint8_t>(nibble(hex[2 * i]) * 16 + nibble(hex[2 * i + 1]));
  }
  return out;
}

}  // namespace tvkd
