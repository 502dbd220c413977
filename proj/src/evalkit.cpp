#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <set>
#include <sstream>

#include "voicecorpus/dtw.hpp"
#include "voicecorpus/evalkit.hpp"
#include "voicecorpus/parallel.hpp"
#include "voicecorpus/unicode.hpp"

namespace vc {
namespace {

constexpr double kMcdScale = 10.0 / std::numbers::ln10;

std::span<const double> cepstra(const FeatureTrack& t, std::size_t i) {
  auto f = t.frame(i);
  return t.includes_c0 ? f.subspan(1) : f;
}

struct McdSum {
  double total = 0.0;
  std::size_t pairs = 0;
};

McdSum mcd_sum(const FeatureTrack& a, const FeatureTrack& b, bool align) {
  if (a.empty() || b.empty()) throw Error(ErrorKind::Invalid, "mcd: empty feature track");
  if (a.dim != b.dim || a.includes_c0 != b.includes_c0) {
    throw Error(ErrorKind::Invalid, "mcd: feature layouts differ (" + std::to_string(a.dim) + " vs " +
                                        std::to_string(b.dim) + " coefficients)");
  }
  McdSum s;
  if (align) {
    const AlignmentPath path = dtw_with_cost(a.frame_count(), b.frame_count(), [&](std::size_t i, std::size_t j) {
      return frame_mcd(cepstra(a, i), cepstra(b, j));
    });
    s.total = path.total_cost;
    s.pairs = path.pairs.size();
  } else {
    s.pairs = std::min(a.frame_count(), b.frame_count());
    for (std::size_t i = 0; i < s.pairs; ++i) s.total += frame_mcd(cepstra(a, i), cepstra(b, i));
  }
  return s;
}

bool is_vowel(char32_t c) { return c == U'a' || c == U'e' || c == U'i' || c == U'o' || c == U'u'; }

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s + " " : s + std::string(width - s.size(), ' ');
}

}  // namespace

double frame_mcd(std::span<const double> a, std::span<const double> b) noexcept {
  double sum = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) {
    const double diff = a[d] - b[d];
    sum += diff * diff;
  }
  return kMcdScale * std::sqrt(2.0 * sum);
}

McdResult mcd(const FeatureTrack& a, const FeatureTrack& b, bool align) {
  const McdSum s = mcd_sum(a, b, align);
  McdResult r;
  r.aligned = align;
  r.frame_pair_count = s.pairs;
  r.mean_mcd = s.total / static_cast<double>(s.pairs);
  r.per_utterance.push_back({"", r.mean_mcd, s.pairs});
  return r;
}

bool mcd_difference_significant(double mcd_a, double mcd_b, double threshold) noexcept {
  return std::abs(mcd_a - mcd_b) >= threshold - 1e-9;
}

McdResult mcd_testset(const Manifest& reference, const std::filesystem::path& reference_dir,
                      const Manifest& synthesized, const std::filesystem::path& synthesized_dir,
                      const MfccConfig& config, unsigned jobs) {
  McdResult r;
  std::vector<std::pair<const Utterance*, const Utterance*>> shared;
  for (const auto& u : reference.utterances) {
    if (const Utterance* s = synthesized.find(u.id)) shared.emplace_back(&u, s);
    else r.missing_in_synthesized.push_back(u.id);
  }
  for (const auto& u : synthesized.utterances) {
    if (!reference.find(u.id)) r.missing_in_reference.push_back(u.id);
  }
  if (shared.empty()) throw Error(ErrorKind::Invalid, "mcd: the manifests share no utterance ids");

  std::vector<McdSum> sums(shared.size());
  parallel_for(shared.size(), jobs, [&](std::size_t i) {
    const FeatureTrack a = mfcc(load_utterance_audio(*shared[i].first, reference_dir), config);
    const FeatureTrack b = mfcc(load_utterance_audio(*shared[i].second, synthesized_dir), config);
    sums[i] = mcd_sum(a, b, true);
  });
  double total = 0.0;
  for (std::size_t i = 0; i < shared.size(); ++i) {
    total += sums[i].total;
    r.frame_pair_count += sums[i].pairs;
    r.per_utterance.push_back({shared[i].first->id, sums[i].total / static_cast<double>(sums[i].pairs), sums[i].pairs});
  }
  r.mean_mcd = total / static_cast<double>(r.frame_pair_count);
  return r;
}

std::u32string cer_normalize(std::string_view text, const CerProfile& profile) {
  std::string s(text);
  if (profile.nfc) s = unicode::nfc(s);
  if (profile.lowercase) s = unicode::to_lower(s);
  std::u32string in = unicode::to_utf32(s);
  std::u32string out;
  out.reserve(in.size());
  for (char32_t c : in) {
    if (profile.strip_punctuation && unicode::is_punctuation(c)) continue;
    if (profile.map_w_to_u) {
      if (c == U'w') c = U'u';
      else if (c == U'W') c = U'U';
    }
    if (unicode::is_whitespace(c)) {
      if (profile.remove_spaces) continue;
      if (profile.collapse_whitespace) {
        if (out.empty() || out.back() == U' ') continue;
        c = U' ';
      }
    }
    if (profile.collapse_doubled_vowels && is_vowel(c) && !out.empty() && out.back() == c) continue;
    out.push_back(c);
  }
  if (profile.collapse_whitespace && !out.empty() && out.back() == U' ') out.pop_back();
  return out;
}

std::size_t levenshtein(std::u32string_view a, std::u32string_view b) {
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({up + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[b.size()];
}

CerResult cer(std::string_view reference, std::string_view hypothesis, const CerProfile& profile) {
  const std::u32string ref = cer_normalize(reference, profile);
  if (ref.empty()) throw Error(ErrorKind::Invalid, "cer: reference is empty after normalization");
  const std::u32string hyp = cer_normalize(hypothesis, profile);
  CerResult r;
  r.distance = levenshtein(ref, hyp);
  r.reference_length = ref.size();
  r.cer = static_cast<double>(r.distance) / static_cast<double>(r.reference_length);
  return r;
}

PreferenceTally tally_preferences(const std::vector<PreferenceItem>& items,
                                  const std::vector<PreferenceResponse>& responses) {
  PreferenceTally t;
  std::map<std::string, const PreferenceItem*> by_id;
  for (const auto& item : items) {
    by_id.emplace(item.id, &item);
    for (const auto* system : {&item.system_1, &item.system_2}) {
      if (std::find(t.systems.begin(), t.systems.end(), *system) == t.systems.end()) t.systems.push_back(*system);
    }
  }
  for (const auto& s : t.systems) t.counts[s] = 0;

  std::map<std::string, PreferenceRow> rows;
  for (const auto& r : responses) {
    auto it = by_id.find(r.item_id);
    if (it == by_id.end()) throw Error(ErrorKind::NotFound, "response refers to unknown item " + r.item_id);
    PreferenceRow& row = rows[r.evaluator];
    if (row.evaluator.empty()) {
      row.evaluator = r.evaluator;
      for (const auto& s : t.systems) row.counts[s] = 0;
    }
    ++row.total;
    ++t.responses;
    if (r.answer == PreferenceAnswer::Same) {
      ++row.same;
      ++t.same;
      continue;
    }
    const bool chose_first = (r.answer == PreferenceAnswer::A) == r.first_shown_as_a;
    const std::string& system = chose_first ? it->second->system_1 : it->second->system_2;
    ++row.counts[system];
    ++t.counts[system];
  }
  for (auto& [name, row] : rows) t.evaluators.push_back(std::move(row));

  if (t.responses > 0 && !t.systems.empty()) {
    std::size_t best = 0;
    std::vector<std::string> leaders;
    for (const auto& s : t.systems) {
      const std::size_t c = t.counts[s];
      if (c > best) {
        best = c;
        leaders = {s};
      } else if (c == best) {
        leaders.push_back(s);
      }
    }
    if (leaders.size() == 1) t.winner = leaders.front();
    else t.tie = true;
  }
  return t;
}

std::string format_preference_table(const PreferenceTally& tally) {
  std::size_t width = 10;
  for (const auto& row : tally.evaluators) width = std::max(width, row.evaluator.size() + 2);
  for (const auto& s : tally.systems) width = std::max(width, s.size() + 2);
  std::ostringstream out;
  out << pad("Evaluator", width);
  for (const auto& s : tally.systems) out << pad(s, width);
  out << "Same\n";
  auto line = [&](const std::string& name, const std::map<std::string, std::size_t>& counts, std::size_t same) {
    out << pad(name, width);
    for (const auto& s : tally.systems) {
      auto it = counts.find(s);
      out << pad(std::to_string(it == counts.end() ? 0 : it->second), width);
    }
    out << same << '\n';
  };
  for (const auto& row : tally.evaluators) line(row.evaluator, row.counts, row.same);
  line("Total", tally.counts, tally.same);
  if (tally.winner) out << "Winner: " << *tally.winner << '\n';
  else if (tally.tie) out << "Winner: tie\n";
  else out << "Winner: none (no responses)\n";
  return out.str();
}

std::string format_mcd_table(const McdResult& result) {
  std::size_t width = 12;
  for (const auto& u : result.per_utterance) width = std::max(width, u.id.size() + 2);
  std::ostringstream out;
  out << std::fixed << std::setprecision(2);
  out << pad("Utterance", width) << pad("MCD", 10) << "Frames\n";
  for (const auto& u : result.per_utterance) {
    std::ostringstream v;
    v << std::fixed << std::setprecision(2) << u.mcd;
    out << pad(u.id.empty() ? "-" : u.id, width) << pad(v.str(), 10) << u.frame_pairs << '\n';
  }
  out << "Mean MCD: " << result.mean_mcd << " dB over " << result.frame_pair_count << " frame pairs\n";
  for (const auto& id : result.missing_in_synthesized) out << "missing in synthesized: " << id << '\n';
  for (const auto& id : result.missing_in_reference) out << "missing in reference: " << id << '\n';
  return out.str();
}

}  // namespace vc
