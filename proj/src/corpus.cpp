#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <set>
#include <sstream>

#include "voicecorpus/corpus.hpp"
#include "voicecorpus/parallel.hpp"
#include "voicecorpus/textnorm.hpp"

namespace vc {
namespace {

constexpr std::size_t kNoIndex = static_cast<std::size_t>(-1);

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t begin = 0;
  while (true) {
    const std::size_t tab = line.find('\t', begin);
    fields.push_back(line.substr(begin, tab == std::string::npos ? std::string::npos : tab - begin));
    if (tab == std::string::npos) break;
    begin = tab + 1;
  }
  return fields;
}

double parse_number(const std::string& text, const std::string& where, const char* field) {
  try {
    std::size_t used = 0;
    const double value = std::stod(text, &used);
    if (used != text.size() || !std::isfinite(value)) throw std::invalid_argument(text);
    return value;
  } catch (const std::logic_error&) {
    throw Error(ErrorKind::Format, where + ": invalid " + field + " '" + text + "'");
  }
}

std::string format_seconds(double value) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(6) << value;
  return out.str();
}

std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t n) {
  const std::uint64_t limit = std::mt19937_64::max() - std::mt19937_64::max() % n;
  std::uint64_t x = rng();
  while (x >= limit) x = rng();
  return x % n;
}

}  // namespace

double Manifest::total_duration() const noexcept {
  double total = 0.0;
  for (const auto& u : utterances) total += u.duration();
  return total;
}

const Utterance* Manifest::find(const std::string& id) const noexcept {
  for (const auto& u : utterances) {
    if (u.id == id) return &u;
  }
  return nullptr;
}

Manifest parse_manifest(std::istream& in, const std::string& source_name) {
  Manifest manifest;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = source_name + ":" + std::to_string(line_no);
    if (line.front() == '#') {
      const auto colon = line.find(':');
      if (colon == std::string::npos) continue;
      const std::string key = line.substr(1, colon - 1);
      std::string value = line.substr(colon + 1);
      value.erase(0, value.find_first_not_of(' '));
      if (key == "language") manifest.language = value;
      else if (key == "source") manifest.source = value;
      else if (key == "license") manifest.license = value;
      continue;
    }
    const auto fields = split_tabs(line);
    if (fields.size() != 6 && fields.size() != 7) {
      throw Error(ErrorKind::Format, where + ": expected 6 or 7 tab-separated fields, got " +
                                         std::to_string(fields.size()));
    }
    Utterance utt;
    utt.id = fields[0];
    utt.audio_path = fields[1];
    utt.start = parse_number(fields[2], where, "start time");
    utt.end = parse_number(fields[3], where, "end time");
    utt.speaker = fields[4];
    utt.text = fields[5];
    if (fields.size() == 7 && !fields[6].empty()) utt.score = parse_number(fields[6], where, "score");
    manifest.utterances.push_back(std::move(utt));
  }
  return manifest;
}

Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot read manifest: " + path.string());
  return parse_manifest(in, path.string());
}

void write_manifest(std::ostream& out, const Manifest& manifest) {
  out << "#language: " << manifest.language << '\n';
  out << "#source: " << manifest.source << '\n';
  out << "#license: " << manifest.license << '\n';
  for (const auto& u : manifest.utterances) {
    out << u.id << '\t' << u.audio_path << '\t' << format_seconds(u.start) << '\t' << format_seconds(u.end) << '\t'
        << u.speaker << '\t' << u.text;
    if (u.score) out << '\t' << format_seconds(*u.score);
    out << '\n';
  }
}

void write_manifest(const std::filesystem::path& path, const Manifest& manifest) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write manifest: " + path.string());
  write_manifest(out, manifest);
  if (!out) throw Error(ErrorKind::Io, "short write: " + path.string());
}

void resolve_durations(Manifest& manifest, const std::filesystem::path& base_dir) {
  for (auto& u : manifest.utterances) {
    if (u.whole_file()) u.end = probe_wav(base_dir / u.audio_path).duration_seconds();
  }
}

AudioClip load_utterance_audio(const Utterance& utt, const std::filesystem::path& base_dir) {
  AudioClip clip = load_wav(base_dir / utt.audio_path);
  if (utt.whole_file()) return clip;
  if (utt.end > clip.duration_seconds() + 1.0 / clip.sample_rate) {
    throw Error(ErrorKind::Range, "utterance " + utt.id + " ends after its audio file");
  }
  return slice_seconds(clip, utt.start, utt.end);
}

bool is_filesystem_safe_id(const std::string& id) noexcept {
  if (id.empty() || id == "." || id == "..") return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '-' ||
           c == '.';
  });
}

std::vector<Violation> validate(const Manifest& manifest, const std::filesystem::path& base_dir) {
  std::vector<Violation> out;
  if (manifest.license.empty()) {
    out.push_back({kNoIndex, "", "no-license", "manifest has no license tag"});
  }
  std::set<std::string> ids;
  for (std::size_t i = 0; i < manifest.utterances.size(); ++i) {
    const Utterance& u = manifest.utterances[i];
    if (!ids.insert(u.id).second) out.push_back({i, u.id, "duplicate-id", "duplicate utterance id " + u.id});
    if (!is_filesystem_safe_id(u.id)) out.push_back({i, u.id, "unsafe-id", "id is not filesystem-safe: " + u.id});
    const auto audio = base_dir / u.audio_path;
    std::error_code ec;
    const bool exists = std::filesystem::is_regular_file(audio, ec);
    if (!exists) out.push_back({i, u.id, "missing-audio", "audio file not found: " + audio.string()});
    if (u.whole_file()) {
      if (exists) {
        try {
          if (probe_wav(audio).frame_count == 0) out.push_back({i, u.id, "bad-duration", "audio file is empty"});
        } catch (const Error& e) {
          out.push_back({i, u.id, "bad-audio", e.what()});
        }
      }
    } else if (u.start < 0.0 || u.end <= u.start) {
      out.push_back({i, u.id, "bad-duration",
                     "non-positive duration [" + format_seconds(u.start) + ", " + format_seconds(u.end) + ")"});
    }
    if (u.text.empty()) out.push_back({i, u.id, "empty-text", "utterance text is empty"});
    if (contains_ascii_digit(u.text)) {
      out.push_back({i, u.id, "digits", "text contains digits (numbers not normalized): " + u.text});
    }
  }
  return out;
}

CorpusStats stats(const Manifest& manifest) {
  CorpusStats s;
  s.utterance_count = manifest.utterances.size();
  s.total_seconds = manifest.total_duration();
  if (s.utterance_count > 0) s.mean_seconds = s.total_seconds / static_cast<double>(s.utterance_count);
  return s;
}

PhoneAlignments read_phone_alignments(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot read phone alignments: " + path.string());
  PhoneAlignments out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    const auto fields = split_tabs(line);
    if (fields.size() != 4) throw Error(ErrorKind::Format, where + ": expected id<TAB>phone<TAB>start<TAB>end");
    out[fields[0]].push_back(
        {fields[1], parse_number(fields[2], where, "start time"), parse_number(fields[3], where, "end time")});
  }
  return out;
}

void write_phone_alignments(const std::filesystem::path& path, const PhoneAlignments& phones,
                            const std::vector<std::string>& order) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write phone alignments: " + path.string());
  auto emit = [&](const std::string& id, const std::vector<TimedPhone>& list) {
    for (const auto& p : list) {
      out << id << '\t' << p.phone << '\t' << format_seconds(p.start) << '\t' << format_seconds(p.end) << '\n';
    }
  };
  if (order.empty()) {
    for (const auto& [id, list] : phones) emit(id, list);
  } else {
    for (const auto& id : order) {
      if (auto it = phones.find(id); it != phones.end()) emit(id, it->second);
    }
  }
}

CutResult cut_audio(const ChapterAlignment& alignment, const AudioClip& audio, const std::filesystem::path& out_dir,
                    const CutOptions& options) {
  const double duration = audio.duration_seconds();
  const double tolerance = 1.0 / audio.sample_rate;
  for (const auto& u : alignment.utterances) {
    if (u.start_time < 0.0 || u.end_time > duration + tolerance || u.end_time <= u.start_time) {
      throw Error(ErrorKind::Range, "utterance " + u.verse_id + " [" + format_seconds(u.start_time) + ", " +
                                        format_seconds(u.end_time) + ") lies outside the audio (" +
                                        format_seconds(duration) + " s)");
    }
  }
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create output directory " + out_dir.string() + ": " + ec.message());

  const std::size_t n = alignment.utterances.size();
  CutResult result;
  result.manifest.language = options.language;
  result.manifest.source = options.source;
  result.manifest.license = options.license;
  result.manifest.utterances.resize(n);
  std::vector<std::vector<TimedPhone>> phones(n);

  parallel_for(n, options.jobs, [&](std::size_t i) {
    const UtteranceAlignment& u = alignment.utterances[i];
    const auto begin = static_cast<std::size_t>(std::llround(u.start_time * audio.sample_rate));
    const auto end = std::min(audio.samples.size(), static_cast<std::size_t>(std::llround(u.end_time * audio.sample_rate)));
    AudioClip clip = slice(audio, begin, end);
    if (options.power_normalize) {
      try {
        clip = power_normalize(clip, options.target_level_dbfs).clip;
      } catch (const Error&) {
        // Silent region: written unscaled; its score already marks it.
      }
    }
    Utterance& out = result.manifest.utterances[i];
    out.id = options.id_prefix + u.verse_id;
    out.audio_path = out.id + ".wav";
    out.start = 0.0;
    out.end = clip.duration_seconds();
    out.speaker = options.speaker;
    out.text = u.text;
    out.score = u.score;
    write_wav(out_dir / out.audio_path, clip);

    const double offset = static_cast<double>(begin) / audio.sample_rate;
    const double length = out.end;
    auto& list = phones[i];
    for (const auto& p : u.phones) {
      list.push_back({p.phone, std::clamp(p.start - offset, 0.0, length), std::clamp(p.end - offset, 0.0, length)});
    }
    if (!list.empty() && list.front().start > 1e-6) {
      list.insert(list.begin(), {options.pause_phone, 0.0, list.front().start});
    }
    if (!list.empty() && list.back().end < length - 1e-6) list.push_back({options.pause_phone, list.back().end, length});
  });

  for (std::size_t i = 0; i < n; ++i) result.phones[result.manifest.utterances[i].id] = std::move(phones[i]);
  return result;
}

ChapterAlignment alignment_from_manifest(const Manifest& manifest, const PhoneAlignments& phones) {
  ChapterAlignment out;
  for (const auto& u : manifest.utterances) {
    UtteranceAlignment a;
    a.verse_id = u.id;
    a.text = u.text;
    a.start_time = u.start;
    a.end_time = u.end;
    a.score = u.score.value_or(0.0);
    if (auto it = phones.find(u.id); it != phones.end()) a.phones = it->second;
    out.utterances.push_back(std::move(a));
  }
  return out;
}

std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[bounded(rng, i)]);
  return order;
}

std::string split_suffix(double minutes) {
  std::ostringstream out;
  if (std::abs(minutes - std::round(minutes)) < 1e-9) out << static_cast<long long>(std::llround(minutes));
  else out << minutes;
  return "_" + out.str() + "min";
}

std::vector<Manifest> make_splits(const Manifest& manifest, const SplitSpec& spec) {
  if (spec.minutes.empty()) throw Error(ErrorKind::Invalid, "no split targets given");
  const double total = manifest.total_duration();
  for (std::size_t k = 0; k < spec.minutes.size(); ++k) {
    if (!(spec.minutes[k] > 0.0)) throw Error(ErrorKind::Invalid, "split targets must be positive");
    if (k > 0 && spec.minutes[k] <= spec.minutes[k - 1]) {
      throw Error(ErrorKind::Invalid, "split targets must be strictly increasing");
    }
    if (spec.minutes[k] * 60.0 > total + 1e-6) {
      throw Error(ErrorKind::Infeasible, "split target of " + format_seconds(spec.minutes[k]) +
                                             " min exceeds the corpus duration of " + format_seconds(total / 60.0) +
                                             " min");
    }
  }

  const std::size_t n = manifest.utterances.size();
  auto order_for = [&](std::size_t k) {
    if (!spec.seed) {
      std::vector<std::size_t> order(n);
      for (std::size_t i = 0; i < n; ++i) order[i] = i;
      return order;
    }
    return seeded_permutation(n, spec.nested ? *spec.seed : *spec.seed + k);
  };

  std::vector<Manifest> splits;
  for (std::size_t k = 0; k < spec.minutes.size(); ++k) {
    const auto order = order_for(k);
    const double target = spec.minutes[k] * 60.0;
    Manifest split;
    split.language = manifest.language;
    split.source = manifest.source;
    split.license = manifest.license;
    double accumulated = 0.0;
    for (std::size_t i : order) {
      if (accumulated >= target - 1e-9) break;
      split.utterances.push_back(manifest.utterances[i]);
      accumulated += manifest.utterances[i].duration();
    }
    splits.push_back(std::move(split));
  }
  return splits;
}

}  // namespace vc
