#ifndef CREDSCORE_ERROR_HPP
#define CREDSCORE_ERROR_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace credscore {

enum class Errc {
  decode,
  empty_lexicon,
  parse,
  duplicate_key,
  unknown_id,
  empty_corpus,
  out_of_range,
  zero_mention,
  shape_mismatch,
  degenerate_normalization,
  disjoint_sets,
  invalid_argument,
  io,
  config,
  missing_artifact,
  hash_mismatch,
  format,
  locked,
};

const char* errc_name(Errc code) noexcept;

// Every failure the library reports on bad input surfaces as an Error.
// line() is 1-based when the failure is tied to a line of input, else 0.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what, std::size_t line = 0)
      : std::runtime_error(what), code_(code), line_(line) {}

  Errc code() const noexcept { return code_; }
  std::size_t line() const noexcept { return line_; }

 private:
  Errc code_;
  std::size_t line_;
};

}  // namespace credscore

#endif
