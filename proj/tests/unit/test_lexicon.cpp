#include "doctest.h"

#include <functional>
#include <sstream>

#include "credscore/error.hpp"
#include "credscore/lexicon.hpp"
#include "credscore/utf8.hpp"

using namespace credscore;

namespace {

Lexicon lex_of(const std::string& text) {
  std::istringstream in(text);
  return load_lexicon(in);
}

Errc errc_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return Errc::io;
}

}  // namespace

TEST_CASE("utf8 round trip and strict decoding") {
  const std::string s = "银行A\xF0\x9F\x98\x80";
  const auto cps = utf8::decode(s);
  REQUIRE(cps.size() == 4);
  CHECK(cps[0] == U'银');
  CHECK(cps[2] == U'A');
  CHECK(cps[3] == 0x1F600);
  CHECK(utf8::encode(cps) == s);
  CHECK(utf8::codepoint_length(s) == 4);

  CHECK_FALSE(utf8::try_decode("\xC0\x80").has_value());      // overlong
  CHECK_FALSE(utf8::try_decode("\xED\xA0\x80").has_value());  // surrogate
  CHECK_FALSE(utf8::try_decode("\xE4\xB8").has_value());      // truncated
  CHECK_FALSE(utf8::try_decode("\x80").has_value());
  CHECK(errc_of([] { utf8::decode("\xFF"); }) == Errc::decode);
}

TEST_CASE("load_lexicon") {
  SUBCASE("four terms") {
    const auto lex = lex_of("银行\n保险\n金融\n市场\n");
    CHECK(lex.size() == 4);
    CHECK(lex.max_term_len() == 2);
    CHECK(lex.contains("保险"));
    CHECK_FALSE(lex.contains("保"));
  }
  SUBCASE("duplicates collapse") {
    CHECK(lex_of("银行\n银行\n").size() == 1);
  }
  SUBCASE("whitespace, CRLF and blank lines") {
    const auto lex = lex_of("  银行 \r\n\n\t保险\r\n");
    CHECK(lex.terms() == std::vector<std::string>{"保险", "银行"});
  }
  SUBCASE("empty stream") {
    CHECK(errc_of([] { lex_of(""); }) == Errc::empty_lexicon);
    CHECK(errc_of([] { lex_of("\n  \n"); }) == Errc::empty_lexicon);
  }
  SUBCASE("invalid utf-8 reports its line") {
    try {
      lex_of("银行\n保险\n\xE4\xB8\n");
      FAIL("expected decode error");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::decode);
      CHECK(e.line() == 3);
    }
  }
  SUBCASE("terms sorted by byte order") {
    const auto lex = Lexicon::from_terms({"b", "a", "ab", ""});
    CHECK(lex.terms() == std::vector<std::string>{"a", "ab", "b"});
    CHECK(lex.max_term_len() == 2);
  }
}

TEST_CASE("extract_bag") {
  const auto lex = lex_of("银行\n保险\n金融\n市场\n");

  SUBCASE("interleaved with other characters") {
    const auto bag = extract_bag("银行和保险，银行的金融与市场。银行保险在市场上", lex);
    CHECK(bag.count("银行") == 3);
    CHECK(bag.count("保险") == 2);
    CHECK(bag.count("金融") == 1);
    CHECK(bag.count("市场") == 2);
    CHECK(bag.total == 8);
    CHECK(bag.counts.size() == 4);
  }
  SUBCASE("no lexicon terms") {
    const auto bag = extract_bag("今天天气很好", lex);
    CHECK(bag.total == 0);
    CHECK(bag.counts.empty());
  }
  SUBCASE("longest match wins") {
    const auto ab = Lexicon::from_terms({"AB", "ABC"});
    const auto bag = extract_bag("ABCAB", ab);
    CHECK(bag.count("ABC") == 1);
    CHECK(bag.count("AB") == 1);
    CHECK(bag.total == 2);
  }
  SUBCASE("a term repeated twice") {
    CHECK(extract_bag("金融金融", lex).count("金融") == 2);
  }
  SUBCASE("match jumps past the consumed term") {
    // "AB" then "BC" would overlap; forward matching takes AB and then C alone.
    const auto l = Lexicon::from_terms({"AB", "BC"});
    const auto bag = extract_bag("ABC", l);
    CHECK(bag.count("AB") == 1);
    CHECK(bag.count("BC") == 0);
  }
  SUBCASE("codepoint and byte overloads agree") {
    const std::string text = "市场银行X保险";
    CHECK(extract_bag(text, lex) == extract_bag(utf8::decode(text), lex));
  }
  SUBCASE("invalid text") {
    CHECK(errc_of([&] { extract_bag("银\xFF", lex); }) == Errc::decode);
  }
}

TEST_CASE("extract_bag invariants on pseudo-random text") {
  const auto lex = Lexicon::from_terms({"甲", "甲乙", "乙丙丁", "丁", "丙丁甲乙"});
  const std::u32string alphabet = U"甲乙丙丁戊";
  std::uint64_t state = 12345;
  for (int trial = 0; trial < 200; ++trial) {
    std::u32string text;
    const int len = static_cast<int>(trial % 30);
    for (int i = 0; i < len; ++i) {
      state = state * 6364136223846793005ULL + 1442695040888963407ULL;
      text.push_back(alphabet[(state >> 33) % alphabet.size()]);
    }
    const auto bag = extract_bag(text, lex);
    std::int64_t sum = 0;
    for (const auto& [term, count] : bag.counts) {
      CHECK(lex.contains(term));
      CHECK(count >= 1);
      sum += count;
    }
    CHECK(sum == bag.total);
    CHECK(bag.total <= static_cast<std::int64_t>(text.size()));

    // independent oracle: naive forward maximum matching by string compare
    BagOfWords oracle;
    std::size_t pos = 0;
    while (pos < text.size()) {
      std::size_t best = 0;
      for (const auto& t : lex.terms()) {
        const auto cps = utf8::decode(t);
        if (cps.size() > best && text.compare(pos, cps.size(), cps) == 0) best = cps.size();
      }
      if (best == 0) {
        ++pos;
      } else {
        oracle.add(utf8::encode(text.substr(pos, best)));
        pos += best;
      }
    }
    CHECK(bag == oracle);
  }
}
