#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "voicecorpus/error.hpp"

namespace vc {

// ---------------------------------------------------------------------------
// Number dictionaries
//
// File format (UTF-8, '#' starts a comment line):
//
//   @language luo
//   3<TAB>adek
//   10<TAB>apar
//   @rule scale 10 count-after omit-one
//   @rule join 1 0 \sgi\s
//   @rule joiner \s
//
// Joiner strings use "\s" for a space and "\\" for a backslash.
// ---------------------------------------------------------------------------

// A multiplicative scale word (hundred, thousand, ...). Values that are
// multiples of the scale are spoken as count + scale word.
struct ScaleRule {
  std::uint64_t value = 0;
  bool count_after = false;  // "mia tatu" (scale then count) vs "three hundred"
  bool omit_one = false;     // "hundred" rather than "one hundred"

  bool operator==(const ScaleRule&) const = default;
};

// Joiner placed between two adjacent parts whose leading magnitudes
// (floor(log10 value)) are `left_magnitude` and `right_magnitude`.
struct JoinRule {
  int left_magnitude = 0;
  int right_magnitude = 0;
  std::string joiner;

  bool operator==(const JoinRule&) const = default;
};

// Joiner used when no JoinRule matches (a single space unless overridden).
struct DefaultJoinerRule {
  std::string joiner;

  bool operator==(const DefaultJoinerRule&) const = default;
};

using NumberRule = std::variant<ScaleRule, JoinRule, DefaultJoinerRule>;

struct NumberDictionary {
  std::string language;
  std::map<std::uint64_t, std::string> atoms;
  std::vector<NumberRule> rules;

  bool operator==(const NumberDictionary&) const = default;

  // Throws Error{Invalid} when an invariant is violated.
  void validate() const;

  // Spoken form of `value`; throws Error{Range} if it cannot be composed.
  std::string expand(std::uint64_t value) const;

  static NumberDictionary parse(std::string_view text, std::string_view source_name = "<memory>");
  static NumberDictionary load(const std::filesystem::path& path);
  std::string to_text() const;
};

class NumberRangeError : public Error {
 public:
  NumberRangeError(std::size_t offset, std::string digits, const std::string& message)
      : Error(ErrorKind::Range, message), offset_(offset), digits_(std::move(digits)) {}

  std::size_t offset() const noexcept { return offset_; }
  const std::string& digits() const noexcept { return digits_; }

 private:
  std::size_t offset_;
  std::string digits_;
};

// Replaces every maximal run of ASCII digits by its spoken form. Throws
// NumberRangeError (with byte offset and digit string) for a run the
// dictionary cannot express.
std::string normalize_numbers(std::string_view text, const NumberDictionary& dict);

// ---------------------------------------------------------------------------
// Mechanical text cleanup
// ---------------------------------------------------------------------------

struct CleanProfile {
  bool strip_punctuation = true;
  bool lowercase = false;
  std::string keep_punctuation = "'";  // kept even when stripping (e.g. ang'wen)
};

// NFC, optional punctuation stripping (punctuation becomes a space), optional
// lowercasing, whitespace runs collapsed to one space and trimmed.
std::string clean_text(std::string_view text, const CleanProfile& profile = {});

// ---------------------------------------------------------------------------
// Rule-based grapheme-to-phone conversion
//
// File format: `grapheme<TAB>phone phone ...` per line, '#' comments,
// optional `@language xx` and `@phones p1 p2 ...` (declared inventory).
// An empty phone list deletes the grapheme.
// ---------------------------------------------------------------------------

inline constexpr std::string_view kWordBoundary = "#";

struct G2pRule {
  std::string grapheme;
  std::vector<std::string> phones;

  bool operator==(const G2pRule&) const = default;
};

class G2pTable {
 public:
  G2pTable() = default;
  G2pTable(std::string language, std::vector<G2pRule> rules, std::vector<std::string> declared_inventory = {});

  static G2pTable parse(std::string_view text, std::string_view source_name = "<memory>");
  static G2pTable load(const std::filesystem::path& path);
  std::string to_text() const;

  const std::string& language() const noexcept { return language_; }
  const std::vector<G2pRule>& rules() const noexcept { return rules_; }
  // Phones produced by the explicit rules plus any declared ones, sorted.
  const std::vector<std::string>& inventory() const noexcept { return inventory_; }

  // Rule whose grapheme is the longest prefix of `text`, or nullptr.
  const G2pRule* longest_match(std::string_view text) const;

 private:
  std::string language_;
  std::vector<G2pRule> rules_;
  std::vector<std::string> inventory_;
  std::map<std::string, std::size_t, std::less<>> by_grapheme_;
  std::size_t max_grapheme_codepoints_ = 0;
};

// Longest-match-first conversion of lowercased text. Characters without a rule
// map to themselves; whitespace runs between words emit kWordBoundary.
std::vector<std::string> g2p(std::string_view text, const G2pTable& table);

// Phones without word-boundary markers.
std::vector<std::string> strip_boundaries(const std::vector<std::string>& phones);

struct NormalizedText {
  std::string original;
  std::string normalized;
  std::vector<std::string> phones;
  std::vector<std::pair<std::size_t, std::size_t>> token_spans;  // byte [begin, end) in `normalized`
};

// clean_text(normalize_numbers(text)) followed by g2p. `numbers` may be null
// when the language has no dictionary; digits are then an error.
NormalizedText prepare_text(std::string_view text, const NumberDictionary* numbers, const G2pTable& table,
                            const CleanProfile& profile = {});

bool contains_ascii_digit(std::string_view text) noexcept;

}  // namespace vc
