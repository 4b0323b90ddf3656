#pragma once

#include <span>
#include <string>
#include <string_view>

namespace mila {

/// Lowercase hex SHA-256 of the given bytes.
std::string sha256_hex(std::string_view bytes);
std::string sha256_hex(std::span<const double> values);

}  // namespace mila
