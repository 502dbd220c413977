#pragma once

// Thin UTF-8 helpers over ICU.

#include <string>
#include <string_view>

namespace vc::unicode {

// Canonical composition (NFC).
std::string nfc(std::string_view utf8);

// Full Unicode lowercasing (root locale).
std::string to_lower(std::string_view utf8);

std::u32string to_utf32(std::string_view utf8);
std::string to_utf8(std::u32string_view text);

bool is_whitespace(char32_t cp) noexcept;
// General category P* (connector, dash, open/close, quotes, other).
bool is_punctuation(char32_t cp) noexcept;

// Byte length of the UTF-8 sequence starting with lead byte `lead`.
std::size_t sequence_length(unsigned char lead) noexcept;

}  // namespace vc::unicode
