#ifndef CREDSCORE_UTF8_HPP
#define CREDSCORE_UTF8_HPP

#include <optional>
#include <string>
#include <string_view>

namespace credscore::utf8 {

// Strict decoder: rejects overlong forms, surrogates and values above U+10FFFF.
// Returns std::nullopt on malformed input; error_offset receives the byte offset.
std::optional<std::u32string> try_decode(std::string_view bytes,
                                         std::size_t* error_offset = nullptr);

// Throws Error(Errc::decode) on malformed input.
std::u32string decode(std::string_view bytes);

std::string encode(std::u32string_view codepoints);
void append(std::string& out, char32_t cp);

std::size_t codepoint_length(std::string_view bytes);

}  // namespace credscore::utf8

#endif
