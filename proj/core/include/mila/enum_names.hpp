#pragma once

#include <cstddef>
#include <optional>
#include <string_view>

namespace mila {

/// Specialize with `static constexpr std::array names` listing the
/// enumerators in declaration order.
template <typename E>
struct EnumTraits;

template <typename E>
constexpr std::string_view enum_name(E e) {
    return EnumTraits<E>::names[static_cast<std::size_t>(e)];
}

template <typename E>
constexpr std::optional<E> enum_parse(std::string_view text) {
    const auto& names = EnumTraits<E>::names;
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i] == text) return static_cast<E>(i);
    }
    return std::nullopt;
}

}  // namespace mila
