#include <algorithm>
#include <fstream>
#include <limits>
#include <sstream>

#include "voicecorpus/textnorm.hpp"

namespace vc {
namespace {

int magnitude(std::uint64_t value) noexcept {
  int m = 0;
  while (value >= 10) {
    value /= 10;
    ++m;
  }
  return m;
}

std::string decode_joiner(std::string_view encoded, const std::string& where) {
  std::string out;
  for (std::size_t i = 0; i < encoded.size(); ++i) {
    if (encoded[i] != '\\') {
      out.push_back(encoded[i]);
      continue;
    }
    if (i + 1 >= encoded.size()) throw Error(ErrorKind::Format, where + ": dangling escape in joiner");
    switch (encoded[++i]) {
      case 's': out.push_back(' '); break;
      case '\\': out.push_back('\\'); break;
      case 'e': break;
      default: throw Error(ErrorKind::Format, where + ": unknown escape in joiner");
    }
  }
  return out;
}

std::string encode_joiner(std::string_view joiner) {
  if (joiner.empty()) return "\\e";
  std::string out;
  for (char c : joiner) {
    if (c == ' ') out += "\\s";
    else if (c == '\\') out += "\\\\";
    else out.push_back(c);
  }
  return out;
}

std::vector<std::string> split_spaces(std::string_view line) {
  std::vector<std::string> out;
  std::istringstream in{std::string(line)};
  for (std::string token; in >> token;) out.push_back(token);
  return out;
}

struct Chunk {
  int magnitude;
  std::string words;
};

class Expander {
 public:
  explicit Expander(const NumberDictionary& dict) : dict_(dict) {
    for (const auto& rule : dict.rules) {
      if (const auto* scale = std::get_if<ScaleRule>(&rule)) scales_[scale->value] = scale;
      if (const auto* joiner = std::get_if<DefaultJoinerRule>(&rule)) default_joiner_ = joiner->joiner;
    }
  }

  std::string expand(std::uint64_t value) const {
    std::vector<Chunk> chunks;
    append_chunks(value, chunks);
    std::string out = chunks.front().words;
    for (std::size_t i = 1; i < chunks.size(); ++i) {
      out += joiner_between(chunks[i - 1].magnitude, chunks[i].magnitude);
      out += chunks[i].words;
    }
    return out;
  }

 private:
  void append_chunks(std::uint64_t value, std::vector<Chunk>& out) const {
    if (auto exact = dict_.atoms.find(value); exact != dict_.atoms.end()) {
      out.push_back({magnitude(value), exact->second});
      return;
    }
    auto it = dict_.atoms.upper_bound(value);
    if (it == dict_.atoms.begin() || value == 0) {
      throw Error(ErrorKind::Range, "no dictionary atom can express " + std::to_string(value));
    }
    --it;
    const auto [atom, word] = *it;
    if (atom == 0) throw Error(ErrorKind::Range, "no dictionary atom can express " + std::to_string(value));

    if (auto scale = scales_.find(atom); scale != scales_.end()) {
      const std::uint64_t count = value / atom;
      const std::uint64_t rest = value % atom;
      std::string head;
      if (count == 1 && scale->second->omit_one) {
        head = word;
      } else {
        const std::string spoken_count = expand(count);
        head = scale->second->count_after ? word + default_joiner_ + spoken_count
                                          : spoken_count + default_joiner_ + word;
      }
      out.push_back({magnitude(atom), std::move(head)});
      if (rest > 0) append_chunks(rest, out);
      return;
    }
    out.push_back({magnitude(atom), word});
    append_chunks(value - atom, out);
  }

  std::string joiner_between(int left, int right) const {
    for (const auto& rule : dict_.rules) {
      if (const auto* join = std::get_if<JoinRule>(&rule)) {
        if (join->left_magnitude == left && join->right_magnitude == right) return join->joiner;
      }
    }
    return default_joiner_;
  }

  const NumberDictionary& dict_;
  std::map<std::uint64_t, const ScaleRule*> scales_;
  std::string default_joiner_ = " ";
};

}  // namespace

bool contains_ascii_digit(std::string_view text) noexcept {
  return std::any_of(text.begin(), text.end(), [](char c) { return c >= '0' && c <= '9'; });
}

void NumberDictionary::validate() const {
  std::vector<int> magnitudes;
  for (const auto& [value, word] : atoms) {
    if (word.empty()) throw Error(ErrorKind::Invalid, "number atom " + std::to_string(value) + " has an empty word");
    if (contains_ascii_digit(word)) {
      throw Error(ErrorKind::Invalid, "number atom " + std::to_string(value) + " word contains digits");
    }
    if (word.find_first_of("\t\n\r") != std::string::npos) {
      throw Error(ErrorKind::Invalid, "number atom " + std::to_string(value) + " word contains a tab or newline");
    }
    magnitudes.push_back(magnitude(value));
  }
  int max_scale_magnitude = -1;
  for (const auto& rule : rules) {
    if (const auto* scale = std::get_if<ScaleRule>(&rule)) {
      if (scale->value < 2) throw Error(ErrorKind::Invalid, "scale rule value must be at least 2");
      if (!atoms.contains(scale->value)) {
        throw Error(ErrorKind::Invalid, "scale rule " + std::to_string(scale->value) + " has no atom word");
      }
      max_scale_magnitude = std::max(max_scale_magnitude, magnitude(scale->value));
    }
  }
  auto known = [&](int m) {
    return std::find(magnitudes.begin(), magnitudes.end(), m) != magnitudes.end() ||
           (max_scale_magnitude >= 0 && m >= max_scale_magnitude);
  };
  for (const auto& rule : rules) {
    if (const auto* join = std::get_if<JoinRule>(&rule)) {
      if (!known(join->left_magnitude) || !known(join->right_magnitude)) {
        throw Error(ErrorKind::Invalid, "join rule references magnitude not present in the dictionary");
      }
    }
  }
}

std::string NumberDictionary::expand(std::uint64_t value) const { return Expander(*this).expand(value); }

NumberDictionary NumberDictionary::parse(std::string_view text, std::string_view source_name) {
  NumberDictionary dict;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string where = std::string(source_name) + ":" + std::to_string(line_no);
    if (line.empty() || line.front() == '#') continue;
    if (line.front() == '@') {
      const auto tokens = split_spaces(line);
      if (tokens[0] == "@language" && tokens.size() == 2) {
        dict.language = tokens[1];
      } else if (tokens[0] == "@rule" && tokens.size() >= 2) {
        const std::string& kind = tokens[1];
        try {
          if (kind == "scale" && tokens.size() >= 3) {
            ScaleRule rule;
            rule.value = std::stoull(tokens[2]);
            for (std::size_t i = 3; i < tokens.size(); ++i) {
              if (tokens[i] == "count-after") rule.count_after = true;
              else if (tokens[i] == "count-before") rule.count_after = false;
              else if (tokens[i] == "omit-one") rule.omit_one = true;
              else throw Error(ErrorKind::Format, where + ": unknown scale option '" + tokens[i] + "'");
            }
            dict.rules.emplace_back(rule);
          } else if (kind == "join" && tokens.size() == 5) {
            dict.rules.emplace_back(JoinRule{std::stoi(tokens[2]), std::stoi(tokens[3]), decode_joiner(tokens[4], where)});
          } else if (kind == "joiner" && tokens.size() == 3) {
            dict.rules.emplace_back(DefaultJoinerRule{decode_joiner(tokens[2], where)});
          } else {
            throw Error(ErrorKind::Format, where + ": malformed rule line");
          }
        } catch (const std::logic_error&) {
          throw Error(ErrorKind::Format, where + ": malformed number in rule line");
        }
      } else {
        throw Error(ErrorKind::Format, where + ": unknown directive");
      }
      continue;
    }
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) throw Error(ErrorKind::Format, where + ": expected value<TAB>word");
    const std::string value_text = line.substr(0, tab);
    if (!std::all_of(value_text.begin(), value_text.end(), [](char c) { return c >= '0' && c <= '9'; }) ||
        value_text.size() > 19) {
      throw Error(ErrorKind::Format, where + ": atom value must be a non-negative integer");
    }
    const std::uint64_t value = std::stoull(value_text);
    if (!dict.atoms.emplace(value, line.substr(tab + 1)).second) {
      throw Error(ErrorKind::Invalid, where + ": duplicate atom value " + value_text);
    }
  }
  dict.validate();
  return dict;
}

NumberDictionary NumberDictionary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot read number dictionary: " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str(), path.string());
}

std::string NumberDictionary::to_text() const {
  std::ostringstream out;
  if (!language.empty()) out << "@language " << language << '\n';
  for (const auto& [value, word] : atoms) out << value << '\t' << word << '\n';
  for (const auto& rule : rules) {
    std::visit(
        [&out](const auto& r) {
          using T = std::decay_t<decltype(r)>;
          if constexpr (std::is_same_v<T, ScaleRule>) {
            out << "@rule scale " << r.value << (r.count_after ? " count-after" : " count-before")
                << (r.omit_one ? " omit-one" : "") << '\n';
          } else if constexpr (std::is_same_v<T, JoinRule>) {
            out << "@rule join " << r.left_magnitude << ' ' << r.right_magnitude << ' ' << encode_joiner(r.joiner)
                << '\n';
          } else {
            out << "@rule joiner " << encode_joiner(r.joiner) << '\n';
          }
        },
        rule);
  }
  return out.str();
}

std::string normalize_numbers(std::string_view text, const NumberDictionary& dict) {
  const Expander expander(dict);
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] < '0' || text[i] > '9') {
      out.push_back(text[i++]);
      continue;
    }
    const std::size_t begin = i;
    while (i < text.size() && text[i] >= '0' && text[i] <= '9') ++i;
    const std::string digits(text.substr(begin, i - begin));

    std::uint64_t value = 0;
    bool overflow = false;
    for (char c : digits) {
      const auto d = static_cast<std::uint64_t>(c - '0');
      if (value > (std::numeric_limits<std::uint64_t>::max() - d) / 10) {
        overflow = true;
        break;
      }
      value = value * 10 + d;
    }
    if (overflow) {
      throw NumberRangeError(begin, digits, "number " + digits + " at offset " + std::to_string(begin) +
                                                " exceeds the representable range");
    }
    try {
      out += expander.expand(value);
    } catch (const Error& e) {
      throw NumberRangeError(begin, digits, "number " + digits + " at offset " + std::to_string(begin) +
                                                " is outside the dictionary range: " + e.what());
    }
  }
  return out;
}

}  // namespace vc
