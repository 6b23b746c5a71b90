#include "credscore/utf8.hpp"

#include "credscore/error.hpp"

namespace credscore {

const char* errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::decode: return "decode";
    case Errc::empty_lexicon: return "empty_lexicon";
    case Errc::parse: return "parse";
    case Errc::duplicate_key: return "duplicate_key";
    case Errc::unknown_id: return "unknown_id";
    case Errc::empty_corpus: return "empty_corpus";
    case Errc::out_of_range: return "out_of_range";
    case Errc::zero_mention: return "zero_mention";
    case Errc::shape_mismatch: return "shape_mismatch";
    case Errc::degenerate_normalization: return "degenerate_normalization";
    case Errc::disjoint_sets: return "disjoint_sets";
    case Errc::invalid_argument: return "invalid_argument";
    case Errc::io: return "io";
    case Errc::config: return "config";
    case Errc::missing_artifact: return "missing_artifact";
    case Errc::hash_mismatch: return "hash_mismatch";
    case Errc::format: return "format";
    case Errc::locked: return "locked";
  }
  return "unknown";
}

namespace utf8 {

std::optional<std::u32string> try_decode(std::string_view bytes, std::size_t* error_offset) {
  std::u32string out;
  out.reserve(bytes.size());
  std::size_t i = 0;
  const std::size_t n = bytes.size();
  auto fail = [&](std::size_t at) -> std::optional<std::u32string> {
    if (error_offset) *error_offset = at;
    return std::nullopt;
  };
  while (i < n) {
    const auto b0 = static_cast<unsigned char>(bytes[i]);
    if (b0 < 0x80) {
      out.push_back(b0);
      ++i;
      continue;
    }
    std::size_t len;
    char32_t cp;
    char32_t min;
    if ((b0 & 0xE0) == 0xC0) {
      len = 2; cp = b0 & 0x1F; min = 0x80;
    } else if ((b0 & 0xF0) == 0xE0) {
      len = 3; cp = b0 & 0x0F; min = 0x800;
    } else if ((b0 & 0xF8) == 0xF0) {
      len = 4; cp = b0 & 0x07; min = 0x10000;
    } else {
      return fail(i);
    }
    if (i + len > n) return fail(i);
    for (std::size_t k = 1; k < len; ++k) {
      const auto b = static_cast<unsigned char>(bytes[i + k]);
      if ((b & 0xC0) != 0x80) return fail(i);
      cp = (cp << 6) | (b & 0x3F);
    }
    if (cp < min || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return fail(i);
    out.push_back(cp);
    i += len;
  }
  return out;
}

std::u32string decode(std::string_view bytes) {
  std::size_t at = 0;
  auto r = try_decode(bytes, &at);
  if (!r) {
    throw Error(Errc::decode, "invalid UTF-8 at byte offset " + std::to_string(at));
  }
  return std::move(*r);
}

void append(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

std::string encode(std::u32string_view codepoints) {
  std::string out;
  out.reserve(codepoints.size() * 3);
  for (char32_t cp : codepoints) append(out, cp);
  return out;
}

std::size_t codepoint_length(std::string_view bytes) {
  std::size_t n = 0;
  for (char c : bytes) {
    if ((static_cast<unsigned char>(c) & 0xC0) != 0x80) ++n;
  }
  return n;
}

}  // namespace utf8
}  // namespace credscore
