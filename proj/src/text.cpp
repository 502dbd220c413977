#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "voicecorpus/textnorm.hpp"
#include "voicecorpus/unicode.hpp"

namespace vc {
namespace {

char32_t codepoint_at(std::string_view text, std::size_t pos, std::size_t& length) {
  length = std::min(unicode::sequence_length(static_cast<unsigned char>(text[pos])), text.size() - pos);
  const auto decoded = unicode::to_utf32(text.substr(pos, length));
  return decoded.empty() ? U'\uFFFD' : decoded.front();
}

std::size_t codepoint_count(std::string_view text) {
  std::size_t count = 0;
  for (std::size_t i = 0; i < text.size(); i += unicode::sequence_length(static_cast<unsigned char>(text[i]))) ++count;
  return count;
}

std::string canonical_grapheme(std::string_view grapheme) { return unicode::to_lower(unicode::nfc(grapheme)); }

}  // namespace

std::string clean_text(std::string_view text, const CleanProfile& profile) {
  std::string composed = unicode::nfc(text);
  if (profile.lowercase) composed = unicode::to_lower(composed);
  const std::u32string keep = unicode::to_utf32(profile.keep_punctuation);

  std::u32string out;
  bool pending_space = false;
  for (char32_t cp : unicode::to_utf32(composed)) {
    const bool strip = profile.strip_punctuation && unicode::is_punctuation(cp) &&
                       keep.find(cp) == std::u32string::npos;
    if (unicode::is_whitespace(cp) || strip) {
      pending_space = true;
      continue;
    }
    if (pending_space && !out.empty()) out.push_back(U' ');
    pending_space = false;
    out.push_back(cp);
  }
  return unicode::nfc(unicode::to_utf8(out));
}

G2pTable::G2pTable(std::string language, std::vector<G2pRule> rules, std::vector<std::string> declared_inventory)
    : language_(std::move(language)), rules_(std::move(rules)) {
  std::set<std::string> inventory(declared_inventory.begin(), declared_inventory.end());
  for (std::size_t i = 0; i < rules_.size(); ++i) {
    auto& rule = rules_[i];
    if (rule.grapheme.empty()) throw Error(ErrorKind::Invalid, "g2p rule with empty grapheme");
    rule.grapheme = canonical_grapheme(rule.grapheme);
    for (const auto& phone : rule.phones) {
      if (phone.empty() || phone == kWordBoundary) {
        throw Error(ErrorKind::Invalid, "g2p rule '" + rule.grapheme + "' produces an invalid phone symbol");
      }
      if (!declared_inventory.empty() && !inventory.contains(phone)) {
        throw Error(ErrorKind::Invalid, "g2p rule '" + rule.grapheme + "' produces phone '" + phone +
                                            "' outside the declared inventory");
      }
      inventory.insert(phone);
    }
    if (!by_grapheme_.emplace(rule.grapheme, i).second) {
      throw Error(ErrorKind::Invalid, "duplicate g2p rule for '" + rule.grapheme + "'");
    }
    max_grapheme_codepoints_ = std::max(max_grapheme_codepoints_, codepoint_count(rule.grapheme));
  }
  inventory_.assign(inventory.begin(), inventory.end());
}

G2pTable G2pTable::parse(std::string_view text, std::string_view source_name) {
  std::string language;
  std::vector<G2pRule> rules;
  std::vector<std::string> declared;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const std::string where = std::string(source_name) + ":" + std::to_string(line_no);
    if (line.front() == '@') {
      std::istringstream tokens(line);
      std::string directive;
      tokens >> directive;
      if (directive == "@language") {
        tokens >> language;
      } else if (directive == "@phones") {
        for (std::string phone; tokens >> phone;) declared.push_back(phone);
      } else {
        throw Error(ErrorKind::Format, where + ": unknown directive " + directive);
      }
      continue;
    }
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) throw Error(ErrorKind::Format, where + ": expected grapheme<TAB>phones");
    G2pRule rule{line.substr(0, tab), {}};
    std::istringstream phones(line.substr(tab + 1));
    for (std::string phone; phones >> phone;) rule.phones.push_back(phone);
    rules.push_back(std::move(rule));
  }
  try {
    return G2pTable(std::move(language), std::move(rules), std::move(declared));
  } catch (const Error& e) {
    throw Error(e.kind(), std::string(source_name) + ": " + e.what());
  }
}

G2pTable G2pTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot read g2p table: " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str(), path.string());
}

std::string G2pTable::to_text() const {
  std::ostringstream out;
  if (!language_.empty()) out << "@language " << language_ << '\n';
  for (const auto& rule : rules_) {
    out << rule.grapheme << '\t';
    for (std::size_t i = 0; i < rule.phones.size(); ++i) out << (i ? " " : "") << rule.phones[i];
    out << '\n';
  }
  return out.str();
}

const G2pRule* G2pTable::longest_match(std::string_view text) const {
  // Byte offsets of the first max_grapheme_codepoints_ code point boundaries.
  std::vector<std::size_t> ends;
  std::size_t pos = 0;
  while (pos < text.size() && ends.size() < max_grapheme_codepoints_) {
    pos = std::min(text.size(), pos + unicode::sequence_length(static_cast<unsigned char>(text[pos])));
    ends.push_back(pos);
  }
  for (auto it = ends.rbegin(); it != ends.rend(); ++it) {
    if (auto found = by_grapheme_.find(text.substr(0, *it)); found != by_grapheme_.end()) {
      return &rules_[found->second];
    }
  }
  return nullptr;
}

std::vector<std::string> g2p(std::string_view text, const G2pTable& table) {
  const std::string lowered = unicode::to_lower(unicode::nfc(text));
  const std::string_view view(lowered);
  std::vector<std::string> phones;
  bool pending_boundary = false;
  auto emit = [&](const std::string& phone) {
    if (pending_boundary && !phones.empty() && phones.back() != kWordBoundary) phones.emplace_back(kWordBoundary);
    pending_boundary = false;
    phones.push_back(phone);
  };

  std::size_t pos = 0;
  while (pos < view.size()) {
    std::size_t length = 0;
    const char32_t cp = codepoint_at(view, pos, length);
    if (unicode::is_whitespace(cp)) {
      pending_boundary = true;
      pos += length;
      continue;
    }
    if (const G2pRule* rule = table.longest_match(view.substr(pos))) {
      for (const auto& phone : rule->phones) emit(phone);
      pos += rule->grapheme.size();
    } else {
      emit(std::string(view.substr(pos, length)));
      pos += length;
    }
  }
  return phones;
}

std::vector<std::string> strip_boundaries(const std::vector<std::string>& phones) {
  std::vector<std::string> out;
  out.reserve(phones.size());
  std::copy_if(phones.begin(), phones.end(), std::back_inserter(out),
               [](const std::string& p) { return p != kWordBoundary; });
  return out;
}

NormalizedText prepare_text(std::string_view text, const NumberDictionary* numbers, const G2pTable& table,
                            const CleanProfile& profile) {
  NormalizedText result;
  result.original = std::string(text);
  std::string expanded;
  if (numbers != nullptr) {
    expanded = normalize_numbers(text, *numbers);
  } else if (contains_ascii_digit(text)) {
    throw Error(ErrorKind::Invalid, "text contains digits but no number dictionary is configured");
  } else {
    expanded = std::string(text);
  }
  result.normalized = clean_text(expanded, profile);
  result.phones = g2p(result.normalized, table);

  std::size_t begin = 0;
  const std::string& norm = result.normalized;
  while (begin < norm.size()) {
    std::size_t end = norm.find(' ', begin);
    if (end == std::string::npos) end = norm.size();
    if (end > begin) result.token_spans.emplace_back(begin, end);
    begin = end + 1;
  }
  return result;
}

}  // namespace vc
