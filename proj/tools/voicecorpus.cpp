#include <cmath>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

#include <pthread.h>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "voicecorpus/aligner.hpp"
#include "voicecorpus/corpus.hpp"
#include "voicecorpus/evalkit.hpp"
#include "voicecorpus/fixture.hpp"
#include "voicecorpus/listen.hpp"
#include "voicecorpus/parallel.hpp"
#include "voicecorpus/prompt_select.hpp"
#include "voicecorpus/synth.hpp"
#include "voicecorpus/textnorm.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace vc;

namespace {

constexpr const char* kGuide = R"(Pipeline:
  1. make-fixture     (optional) write a synthetic chapter to try the tools on
  2. normalize        expand numbers and clean verse or prompt text
  3. select-prompts   pick a recording script with good diphone coverage
  4. align            segment a long chapter WAV into verse-level utterances
  5. cut              write one power-normalized WAV per utterance
  6. split            duration-based training subsets (25/50/101 minutes)
  7. validate, stats  check a manifest and report its size
  8. build-voice      index diphone units of a cut corpus
  9. synth            synthesize prompts with the unit-selection voice
 10. mcd, cer         objective scores
 11. serve            listening-test service for preference/transcription tests

Audio must be PCM WAV; convert compressed chapters first, for example
  ffmpeg -i chapter.mp3 -ac 1 -ar 16000 chapter.wav
Per-language resources can be listed in a key=value config file
(numbers, g2p, language, license, source, speaker); flags override it.)";

struct Globals {
  std::string format = "text";
  unsigned jobs = default_jobs();
  std::optional<std::uint64_t> seed;
  std::string config_path;
  std::map<std::string, std::string> config;
  fs::path config_dir;

  bool records() const { return format == "records"; }

  std::string setting(const std::string& flag_value, const std::string& key) const {
    if (!flag_value.empty()) return flag_value;
    auto it = config.find(key);
    return it == config.end() ? std::string() : it->second;
  }

  // Config paths are relative to the config file.
  std::string path_setting(const std::string& flag_value, const std::string& key) const {
    if (!flag_value.empty()) return flag_value;
    auto it = config.find(key);
    if (it == config.end() || it->second.empty()) return {};
    const fs::path p(it->second);
    return (p.is_absolute() ? p : config_dir / p).string();
  }
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

void load_config(Globals& g) {
  if (g.config_path.empty()) return;
  std::ifstream in(g.config_path);
  if (!in) throw Error(ErrorKind::Io, "cannot read config " + g.config_path);
  g.config_dir = fs::path(g.config_path).parent_path();
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::Format, g.config_path + ":" + std::to_string(n) + ": expected key = value");
    }
    g.config[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
}

struct IdText {
  std::string id;
  std::string text;
  std::size_t line = 0;
};

std::vector<IdText> read_id_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot read " + path.string());
  std::vector<IdText> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw Error(ErrorKind::Format, path.string() + ":" + std::to_string(n) + ": expected id<TAB>text");
    }
    out.push_back({line.substr(0, tab), line.substr(tab + 1), n});
  }
  return out;
}

class Output {
 public:
  explicit Output(const std::string& path) {
    if (path.empty() || path == "-") return;
    if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
    file_ = std::make_unique<std::ofstream>(path, std::ios::trunc);
    if (!*file_) throw Error(ErrorKind::Io, "cannot write " + path);
  }
  std::ostream& operator*() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

std::string fixed(double v, int digits) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(digits) << v;
  return out.str();
}

std::optional<NumberDictionary> maybe_numbers(const Globals& g, const std::string& flag) {
  const std::string path = g.path_setting(flag, "numbers");
  if (path.empty()) return std::nullopt;
  return NumberDictionary::load(path);
}

G2pTable require_g2p(const Globals& g, const std::string& flag) {
  const std::string path = g.path_setting(flag, "g2p");
  if (path.empty()) throw Error(ErrorKind::Invalid, "a G2P table is required (--g2p or g2p= in the config)");
  return G2pTable::load(path);
}

std::string normalize_line(const IdText& item, const std::optional<NumberDictionary>& numbers, const std::string& source) {
  std::string text = item.text;
  if (numbers) {
    try {
      text = normalize_numbers(text, *numbers);
    } catch (const NumberRangeError& e) {
      throw NumberRangeError(e.offset(), e.digits(),
                             source + ":" + std::to_string(item.line) + ": byte " + std::to_string(e.offset()) + ": " +
                                 e.what());
    }
  } else if (contains_ascii_digit(text)) {
    throw Error(ErrorKind::Invalid, source + ":" + std::to_string(item.line) +
                                        ": text contains digits but no number dictionary is configured");
  }
  return clean_text(text);
}

fs::path relative_to(const fs::path& target, const fs::path& dir) {
  return fs::absolute(target).lexically_normal().lexically_proximate(fs::absolute(dir).lexically_normal());
}

fs::path dir_of(const fs::path& file) { return file.has_parent_path() ? file.parent_path() : fs::path("."); }

// ---------------------------------------------------------------------------

struct NormalizeArgs {
  std::string input, output, numbers;
  bool lowercase = false;
};

void run_normalize(const Globals& g, const NormalizeArgs& a) {
  const auto numbers = maybe_numbers(g, a.numbers);
  Output out(a.output);
  for (const auto& item : read_id_text(a.input)) {
    std::string text = normalize_line(item, numbers, a.input);
    if (a.lowercase) text = clean_text(text, {true, true, "'"});
    if (g.records()) *out << json{{"id", item.id}, {"original", item.text}, {"normalized", text}}.dump() << '\n';
    else *out << item.id << '\t' << text << '\n';
  }
}

struct G2pArgs {
  std::string input, output, table;
};

void run_g2p(const Globals& g, const G2pArgs& a) {
  const G2pTable table = require_g2p(g, a.table);
  Output out(a.output);
  for (const auto& item : read_id_text(a.input)) {
    const auto phones = g2p(item.text, table);
    if (g.records()) {
      *out << json{{"id", item.id}, {"phones", phones}}.dump() << '\n';
      continue;
    }
    *out << item.id << '\t';
    for (std::size_t i = 0; i < phones.size(); ++i) *out << (i ? " " : "") << phones[i];
    *out << '\n';
  }
}

struct SelectArgs {
  std::string candidates, output, report, table, numbers;
  std::size_t count = kDefaultPromptCount;
  double alpha = kDefaultLengthPenalty;
};

void run_select(const Globals& g, const SelectArgs& a) {
  const G2pTable table = require_g2p(g, a.table);
  const auto numbers = maybe_numbers(g, a.numbers);
  const auto items = read_id_text(a.candidates);
  std::vector<CandidateUtterance> pool(items.size());
  parallel_for(items.size(), g.jobs, [&](std::size_t i) {
    pool[i] = extract_units(items[i].id, normalize_line(items[i], numbers, a.candidates), table);
  });
  const SelectionResult r = select_prompts(pool, a.count, a.alpha);
  std::map<std::string, const CandidateUtterance*> by_id;
  for (const auto& c : pool) by_id[c.id] = &c;

  Output out(a.output);
  for (std::size_t i = 0; i < r.selected_ids.size(); ++i) {
    const auto& id = r.selected_ids[i];
    if (g.records()) {
      *out << json{{"rank", i + 1}, {"id", id}, {"text", by_id[id]->text}, {"new_diphones", r.marginal_gains[i]},
                   {"coverage", r.coverage_after_step[i]}}
                  .dump()
           << '\n';
    } else {
      *out << id << '\t' << by_id[id]->text << '\n';
    }
  }
  const CoverageReport cov = coverage_report(r.selected_ids, pool);
  std::ostream& summary = a.output.empty() || a.output == "-" ? std::cerr : std::cout;
  if (g.records()) {
    summary << json{{"summary", true}, {"selected", cov.selected}, {"candidates", pool.size()},
                    {"covered_diphones", cov.covered_types}, {"pool_diphones", cov.pool_types},
                    {"coverage", cov.coverage_ratio}, {"phones", cov.phone_total}, {"shortfall", r.shortfall}}
                   .dump()
            << '\n';
  } else {
    summary << "selected " << cov.selected << " of " << pool.size() << " candidates; diphone coverage "
            << cov.covered_types << "/" << cov.pool_types << " (" << fixed(cov.coverage_ratio * 100.0, 2) << "%), "
            << cov.phone_total << " phones\n";
    if (r.shortfall) summary << "note: requested " << a.count << " prompts but the pool has only " << pool.size() << '\n';
  }
  if (!a.report.empty()) {
    Output rep(a.report);
    *rep << "selected\t" << cov.selected << "\ncovered\t" << cov.covered_types << "\npool\t" << cov.pool_types
         << "\ncoverage\t" << fixed(cov.coverage_ratio, 6) << "\nphones\t" << cov.phone_total << '\n';
    for (const auto& m : cov.missing) *rep << "missing\t" << m << '\n';
  }
}

struct AlignArgs {
  std::vector<std::string> audio, verses;
  std::string manifest = "chapter_manifest.tsv";
  std::string phones;
  std::string table, numbers, speaker, language, license, source;
  double keep_fraction = 1.0;
  std::size_t min_duration = kDefaultMinDuration;
  int max_iterations = 10;
  bool no_pauses = false;
  bool flat_start = false;
  bool pool_models = false;
};

void run_align(const Globals& g, const AlignArgs& a) {
  if (a.audio.size() != a.verses.size() || a.audio.empty()) {
    throw Error(ErrorKind::Invalid, "give one --verses file per --audio file");
  }
  const G2pTable table = require_g2p(g, a.table);
  const auto numbers = maybe_numbers(g, a.numbers);
  AlignerConfig cfg;
  cfg.min_duration = a.min_duration;
  cfg.max_iterations = a.max_iterations;
  cfg.insert_pauses = !a.no_pauses;
  cfg.energy_start = !a.flat_start;

  std::vector<AudioClip> clips;
  std::vector<ChapterInput> chapters;
  for (std::size_t c = 0; c < a.audio.size(); ++c) {
    clips.push_back(load_wav(a.audio[c]));
  }
  const bool prefix = a.audio.size() > 1;
  for (std::size_t c = 0; c < a.audio.size(); ++c) {
    ChapterInput in;
    in.audio = &clips[c];
    const std::string stem = fs::path(a.audio[c]).stem().string();
    for (const auto& item : read_id_text(a.verses[c])) {
      in.verses.push_back({prefix ? stem + "_" + item.id : item.id, normalize_line(item, numbers, a.verses[c])});
    }
    chapters.push_back(std::move(in));
  }
  const auto results = align_corpus(chapters, table, cfg, a.pool_models, g.jobs);

  const fs::path manifest_path(a.manifest);
  const fs::path base = dir_of(manifest_path);
  Manifest m;
  m.language = g.setting(a.language, "language");
  m.license = g.setting(a.license, "license");
  m.source = g.setting(a.source, "source");
  PhoneAlignments phones;
  std::vector<std::string> order;
  const std::string speaker = g.setting(a.speaker, "speaker").empty() ? "spk0" : g.setting(a.speaker, "speaker");
  for (std::size_t c = 0; c < results.size(); ++c) {
    const ChapterAlignment kept = filter_by_score(results[c], a.keep_fraction);
    const std::string audio_rel = relative_to(a.audio[c], base).generic_string();
    for (const auto& u : kept.utterances) {
      m.utterances.push_back({u.verse_id, audio_rel, u.start_time, u.end_time, speaker, u.text, u.score});
      phones[u.verse_id] = u.phones;
      order.push_back(u.verse_id);
    }
    if (g.records()) {
      std::cout << json{{"chapter", a.audio[c]}, {"iterations", results[c].iterations},
                        {"converged", results[c].converged}, {"iteration_costs", results[c].iteration_costs},
                        {"utterances", results[c].utterances.size()}, {"kept", kept.utterances.size()}}
                       .dump()
                << '\n';
    } else {
      std::cout << a.audio[c] << ": " << results[c].utterances.size() << " utterances, kept "
                << kept.utterances.size() << ", " << results[c].iterations << " iterations"
                << (results[c].converged ? "" : " (not converged)") << '\n';
    }
  }
  write_manifest(manifest_path, m);
  const fs::path phones_path = a.phones.empty() ? fs::path(manifest_path).replace_extension(".phones.tsv") : fs::path(a.phones);
  write_phone_alignments(phones_path, phones, order);
}

struct CutArgs {
  std::string manifest, phones, out_dir, id_prefix, speaker;
  bool no_normalize = false;
  double target_dbfs = kDefaultTargetDbfs;
};

void run_cut(const Globals& g, const CutArgs& a) {
  const Manifest m = read_manifest(a.manifest);
  const fs::path base = dir_of(a.manifest);
  const std::string phones_path =
      a.phones.empty() ? fs::path(a.manifest).replace_extension(".phones.tsv").string() : a.phones;
  const PhoneAlignments phones = read_phone_alignments(phones_path);

  std::vector<std::string> audio_order;
  std::map<std::string, Manifest> by_audio;
  for (const auto& u : m.utterances) {
    if (!by_audio.contains(u.audio_path)) audio_order.push_back(u.audio_path);
    by_audio[u.audio_path].utterances.push_back(u);
  }
  CutOptions opt;
  opt.id_prefix = a.id_prefix;
  opt.speaker = g.setting(a.speaker, "speaker").empty() ? (m.utterances.empty() ? "spk0" : m.utterances[0].speaker)
                                                        : g.setting(a.speaker, "speaker");
  opt.language = m.language;
  opt.source = m.source;
  opt.license = m.license;
  opt.power_normalize = !a.no_normalize;
  opt.target_level_dbfs = a.target_dbfs;
  opt.jobs = g.jobs;

  Manifest out;
  out.language = m.language;
  out.source = m.source;
  out.license = m.license;
  PhoneAlignments out_phones;
  std::vector<std::string> order;
  for (const auto& audio_path : audio_order) {
    const AudioClip audio = load_wav(base / audio_path);
    const CutResult r = cut_audio(alignment_from_manifest(by_audio[audio_path], phones), audio, a.out_dir, opt);
    for (const auto& u : r.manifest.utterances) {
      out.utterances.push_back(u);
      order.push_back(u.id);
    }
    out_phones.insert(r.phones.begin(), r.phones.end());
  }
  write_manifest(fs::path(a.out_dir) / "manifest.tsv", out);
  write_phone_alignments(fs::path(a.out_dir) / "phones.tsv", out_phones, order);
  if (g.records()) {
    std::cout << json{{"utterances", out.utterances.size()}, {"out_dir", a.out_dir}}.dump() << '\n';
  } else {
    std::cout << "cut " << out.utterances.size() << " utterances into " << a.out_dir << '\n';
  }
}

struct SplitArgs {
  std::string manifest, out_dir;
  std::vector<double> minutes{25.0, 50.0, 101.0};
  bool independent = false;
  bool shuffle = false;
};

void run_split(const Globals& g, const SplitArgs& a) {
  Manifest m = read_manifest(a.manifest);
  const fs::path base = dir_of(a.manifest);
  resolve_durations(m, base);
  SplitSpec spec;
  spec.minutes = a.minutes;
  spec.nested = !a.independent;
  if (a.shuffle || a.independent) spec.seed = g.seed.value_or(0);
  const auto splits = make_splits(m, spec);
  const fs::path out_dir = a.out_dir.empty() ? base : fs::path(a.out_dir);
  const std::string stem = fs::path(a.manifest).stem().string();
  for (std::size_t k = 0; k < splits.size(); ++k) {
    Manifest s = splits[k];
    for (auto& u : s.utterances) u.audio_path = relative_to(base / u.audio_path, out_dir).generic_string();
    const fs::path path = out_dir / (stem + split_suffix(a.minutes[k]) + ".tsv");
    write_manifest(path, s);
    const CorpusStats st = stats(s);
    if (g.records()) {
      std::cout << json{{"split", path.string()}, {"target_minutes", a.minutes[k]},
                        {"utterances", st.utterance_count}, {"minutes", st.total_seconds / 60.0}}
                       .dump()
                << '\n';
    } else {
      std::cout << path.string() << ": " << st.utterance_count << " utterances, " << fixed(st.total_seconds / 60.0, 2)
                << " min (target " << a.minutes[k] << ")\n";
    }
  }
}

struct ManifestArgs {
  std::vector<std::string> manifests;
  bool strict = false;
};

int run_validate(const Globals& g, const ManifestArgs& a) {
  std::size_t findings = 0;
  for (const auto& path : a.manifests) {
    const Manifest m = read_manifest(path);
    for (const auto& v : validate(m, dir_of(path))) {
      ++findings;
      if (g.records()) {
        std::cout << json{{"manifest", path}, {"kind", v.kind}, {"utterance", v.utterance_id}, {"message", v.message}}
                         .dump()
                  << '\n';
      } else {
        std::cout << path << ": " << (v.utterance_id.empty() ? "" : v.utterance_id + ": ") << v.kind << ": "
                  << v.message << '\n';
      }
    }
  }
  if (!g.records()) std::cout << findings << (findings == 1 ? " finding\n" : " findings\n");
  return a.strict && findings ? exit_code(ErrorKind::Invalid) : 0;
}

void run_stats(const Globals& g, const ManifestArgs& a) {
  for (const auto& path : a.manifests) {
    Manifest m = read_manifest(path);
    resolve_durations(m, dir_of(path));
    const CorpusStats s = stats(m);
    if (g.records()) {
      std::cout << json{{"manifest", path}, {"language", m.language}, {"utterances", s.utterance_count},
                        {"seconds", s.total_seconds}, {"hours", s.total_hours()},
                        {"mean_seconds", s.mean_seconds ? json(*s.mean_seconds) : json(nullptr)}}
                       .dump()
                << '\n';
    } else {
      std::cout << path << ": " << s.utterance_count << " utterances, " << fixed(s.total_hours(), 2) << " hrs, mean "
                << (s.mean_seconds ? fixed(*s.mean_seconds, 2) + " s" : std::string("n/a")) << '\n';
    }
  }
}

struct VoiceArgs {
  std::string manifest, phones, output = "voice.json";
};

void run_build_voice(const Globals& g, const VoiceArgs& a) {
  const Manifest m = read_manifest(a.manifest);
  const std::string phones_path = a.phones.empty() ? (dir_of(a.manifest) / "phones.tsv").string() : a.phones;
  const UnitIndex index =
      build_unit_index(m, read_phone_alignments(phones_path), dir_of(a.manifest), dir_of(a.output), {}, g.jobs);
  save_unit_index(a.output, index);
  if (g.records()) {
    std::cout << json{{"voice", a.output}, {"diphone_types", index.diphones.size()},
                      {"diphone_units", index.diphone_unit_count()}}
                     .dump()
              << '\n';
  } else {
    std::cout << a.output << ": " << index.diphones.size() << " diphone types, " << index.diphone_unit_count()
              << " units\n";
  }
}

struct SynthArgs {
  std::string voice, table, numbers, text, output, prompts, out_dir;
  SynthOptions options;
};

int run_synth(const Globals& g, const SynthArgs& a) {
  const G2pTable table = require_g2p(g, a.table);
  const Voice voice = load_voice(a.voice);
  const auto numbers = maybe_numbers(g, a.numbers);
  if (!a.text.empty()) {
    if (a.output.empty()) throw Error(ErrorKind::Invalid, "--out is required with --text");
    const SynthOutput r = synthesize(normalize_line({"-", a.text, 1}, numbers, "--text"), table, voice, a.options);
    write_wav(a.output, r.audio);
    if (g.records()) {
      std::cout << json{{"out", a.output}, {"seconds", r.audio.duration_seconds()}, {"cost", r.plan.total_cost}}.dump()
                << '\n';
    } else {
      std::cout << a.output << ": " << fixed(r.audio.duration_seconds(), 2) << " s, plan cost "
                << fixed(r.plan.total_cost, 3) << '\n';
    }
    return 0;
  }
  if (a.prompts.empty() || a.out_dir.empty()) {
    throw Error(ErrorKind::Invalid, "give --text and --out, or --prompts and --out-dir");
  }
  std::vector<Prompt> prompts;
  for (const auto& item : read_id_text(a.prompts)) prompts.push_back({item.id, normalize_line(item, numbers, a.prompts)});
  const BatchResult batch = batch_synthesize(prompts, table, voice, a.out_dir, a.options, g.jobs);
  write_manifest(fs::path(a.out_dir) / "manifest.tsv", batch.manifest);
  for (const auto& [id, message] : batch.failures) {
    if (g.records()) std::cout << json{{"id", id}, {"error", message}}.dump() << '\n';
    else std::cerr << id << ": " << message << '\n';
  }
  if (g.records()) {
    std::cout << json{{"synthesized", batch.manifest.utterances.size()}, {"failed", batch.failures.size()}}.dump() << '\n';
  } else {
    std::cout << "synthesized " << batch.manifest.utterances.size() << " of " << prompts.size() << " prompts into "
              << a.out_dir << '\n';
  }
  return 0;
}

struct McdArgs {
  std::string reference, synthesized, self;
  std::optional<double> baseline;
};

void run_mcd(const Globals& g, const McdArgs& a) {
  std::string ref = a.reference, syn = a.synthesized;
  if (!a.self.empty()) ref = syn = a.self;
  if (ref.empty() || syn.empty()) throw Error(ErrorKind::Invalid, "give --ref and --synth, or --self");
  const McdResult r =
      mcd_testset(read_manifest(ref), dir_of(ref), read_manifest(syn), dir_of(syn), MfccConfig{}, g.jobs);
  if (g.records()) {
    for (const auto& u : r.per_utterance) {
      std::cout << json{{"id", u.id}, {"mcd", u.mcd}, {"frame_pairs", u.frame_pairs}}.dump() << '\n';
    }
    json summary = {{"mean_mcd", r.mean_mcd}, {"frame_pairs", r.frame_pair_count},
                    {"missing_in_synthesized", r.missing_in_synthesized}, {"missing_in_reference", r.missing_in_reference}};
    if (a.baseline) {
      summary["baseline"] = *a.baseline;
      summary["significant"] = mcd_difference_significant(r.mean_mcd, *a.baseline);
    }
    std::cout << summary.dump() << '\n';
    return;
  }
  std::cout << format_mcd_table(r);
  if (a.baseline) {
    std::cout << "Difference from baseline " << fixed(*a.baseline, 2) << ": " << fixed(r.mean_mcd - *a.baseline, 2)
              << " dB ("
              << (mcd_difference_significant(r.mean_mcd, *a.baseline) ? "significant" : "not significant") << ")\n";
  }
}

struct CerArgs {
  std::string reference, hypothesis, reference_file, hypothesis_file;
};

void run_cer(const Globals& g, const CerArgs& a) {
  std::vector<std::tuple<std::string, std::string, std::string>> pairs;
  if (!a.reference_file.empty() || !a.hypothesis_file.empty()) {
    std::map<std::string, std::string> hyps;
    for (const auto& h : read_id_text(a.hypothesis_file)) hyps[h.id] = h.text;
    for (const auto& r : read_id_text(a.reference_file)) {
      auto it = hyps.find(r.id);
      if (it == hyps.end()) throw Error(ErrorKind::NotFound, "no hypothesis for " + r.id);
      pairs.emplace_back(r.id, r.text, it->second);
    }
  } else {
    pairs.emplace_back("-", a.reference, a.hypothesis);
  }
  std::size_t dist = 0, len = 0, dist_l = 0, len_l = 0;
  for (const auto& [id, ref, hyp] : pairs) {
    const CerResult s = cer(ref, hyp, CerProfile::strict());
    const CerResult l = cer(ref, hyp, CerProfile::lenient());
    dist += s.distance;
    len += s.reference_length;
    dist_l += l.distance;
    len_l += l.reference_length;
    if (g.records()) {
      std::cout << json{{"id", id}, {"distance", s.distance}, {"reference_length", s.reference_length},
                        {"cer", s.cer}, {"cer_lenient", l.cer}}
                       .dump()
                << '\n';
    } else {
      std::cout << id << "\tCER " << fixed(s.percent(), 2) << "\tlenient " << fixed(l.percent(), 2) << '\n';
    }
  }
  const double total = static_cast<double>(dist) / static_cast<double>(len);
  const double total_l = static_cast<double>(dist_l) / static_cast<double>(len_l);
  if (g.records()) std::cout << json{{"cer", total}, {"cer_lenient", total_l}, {"pairs", pairs.size()}}.dump() << '\n';
  else std::cout << "overall\tCER " << fixed(total * 100.0, 2) << "\tlenient " << fixed(total_l * 100.0, 2) << '\n';
}

struct ServeArgs {
  std::string host, data_dir, audio_dir, static_dir;
  int port = -1;
};

void run_serve(const Globals&, const ServeArgs& a) {
  fs::path data_dir = "listen-data";
  listen::ServerConfig cfg = listen::config_from_environment({}, &data_dir);
  if (!a.host.empty()) cfg.host = a.host;
  if (a.port >= 0) cfg.port = a.port;
  if (!a.data_dir.empty()) data_dir = a.data_dir;
  if (!a.audio_dir.empty()) cfg.audio_dir = a.audio_dir;
  if (!a.static_dir.empty()) cfg.static_dir = a.static_dir;
  listen::ListenStore store(data_dir, cfg.audio_dir);
  listen::ListenServer server(store, cfg);
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);
  const int port = server.start();
  std::cout << "listening on " << cfg.host << ":" << port << " (data " << data_dir.string() << ")" << std::endl;
  int received = 0;
  sigwait(&signals, &received);
  server.stop();
}

struct FixtureArgs {
  std::string out_dir = "fixture";
  double seconds = 300.0;
  std::optional<double> snr;
  std::size_t prompts = 300;
};

void run_fixture(const Globals& g, const FixtureArgs& a) {
  FixtureOptions o;
  o.seed = g.seed.value_or(1);
  o.target_seconds = a.seconds;
  o.snr_db = a.snr;
  o.prompt_count = a.prompts;
  const Fixture fx = make_fixture(o);
  write_fixture(fx, a.out_dir);
  if (g.records()) {
    std::cout << json{{"out_dir", a.out_dir}, {"verses", fx.verses.size()}, {"seconds", fx.audio.duration_seconds()}}.dump()
              << '\n';
  } else {
    std::cout << a.out_dir << ": " << fx.verses.size() << " verses, " << fixed(fx.audio.duration_seconds(), 1) << " s\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Build, check and evaluate single-speaker speech corpora.", "voicecorpus"};
  app.footer(kGuide);
  app.require_subcommand(1);
  Globals g;
  std::uint64_t seed = 0;
  app.add_option("--format", g.format, "Output style")->check(CLI::IsMember({"text", "records"}));
  app.add_option("--jobs", g.jobs, "Worker threads for per-file stages")->check(CLI::Range(1u, 1024u));
  auto* seed_opt = app.add_option("--seed", seed, "Seed for every randomized step");
  app.add_option("--config", g.config_path, "key=value resource file")->check(CLI::ExistingFile);

  NormalizeArgs na;
  auto* normalize = app.add_subcommand("normalize", "Expand numbers and clean id<TAB>text lines");
  normalize->add_option("input", na.input, "id<TAB>text file")->required()->check(CLI::ExistingFile);
  normalize->add_option("-o,--out", na.output, "Output file (default stdout)");
  normalize->add_option("--numbers", na.numbers, "Number dictionary");
  normalize->add_flag("--lowercase", na.lowercase, "Also lowercase");

  G2pArgs ga;
  auto* g2p_cmd = app.add_subcommand("g2p", "Convert id<TAB>text lines to phones");
  g2p_cmd->add_option("input", ga.input)->required()->check(CLI::ExistingFile);
  g2p_cmd->add_option("-o,--out", ga.output);
  g2p_cmd->add_option("--g2p", ga.table, "G2P table");

  SelectArgs sa;
  auto* select = app.add_subcommand("select-prompts", "Greedy diphone-coverage prompt selection");
  select->add_option("candidates", sa.candidates, "id<TAB>text candidate pool")->required()->check(CLI::ExistingFile);
  select->add_option("-n,--count", sa.count, "Prompts to select")->check(CLI::PositiveNumber);
  select->add_option("--alpha", sa.alpha, "Length penalty exponent")->check(CLI::NonNegativeNumber);
  select->add_option("-o,--out", sa.output);
  select->add_option("--report", sa.report, "Coverage report file");
  select->add_option("--g2p", sa.table);
  select->add_option("--numbers", sa.numbers);

  AlignArgs aa;
  auto* align = app.add_subcommand("align", "Segment chapter audio into verse utterances");
  align->add_option("--audio", aa.audio, "Chapter WAV (repeatable)")->required()->check(CLI::ExistingFile);
  align->add_option("--verses", aa.verses, "verse_id<TAB>text file per chapter")->required()->check(CLI::ExistingFile);
  align->add_option("-o,--manifest", aa.manifest, "Chapter manifest to write");
  align->add_option("--phones", aa.phones, "Phone timings to write (default <manifest>.phones.tsv)");
  align->add_option("--g2p", aa.table);
  align->add_option("--numbers", aa.numbers);
  align->add_option("--speaker", aa.speaker);
  align->add_option("--language", aa.language);
  align->add_option("--license", aa.license);
  align->add_option("--source", aa.source);
  align->add_option("--keep-fraction", aa.keep_fraction, "Keep the best-scoring fraction")->check(CLI::Range(1e-9, 1.0));
  align->add_option("--min-duration", aa.min_duration, "Minimum phone length in frames")->check(CLI::PositiveNumber);
  align->add_option("--max-iterations", aa.max_iterations)->check(CLI::PositiveNumber);
  align->add_flag("--no-pauses", aa.no_pauses, "Do not model pauses between verses");
  align->add_flag("--flat-start", aa.flat_start, "Start from a plain flat segmentation");
  align->add_flag("--pool-models", aa.pool_models, "Realign every chapter with models pooled over all chapters");

  CutArgs ca;
  auto* cut = app.add_subcommand("cut", "Write one WAV per aligned utterance");
  cut->add_option("manifest", ca.manifest, "Chapter manifest from align")->required()->check(CLI::ExistingFile);
  cut->add_option("--phones", ca.phones);
  cut->add_option("-o,--out-dir", ca.out_dir)->required();
  cut->add_option("--id-prefix", ca.id_prefix);
  cut->add_option("--speaker", ca.speaker);
  cut->add_flag("--no-normalize", ca.no_normalize, "Keep the original level");
  cut->add_option("--target-dbfs", ca.target_dbfs, "Active-speech RMS level");

  SplitArgs spa;
  auto* split = app.add_subcommand("split", "Duration-based subsets written as sibling manifests");
  split->add_option("manifest", spa.manifest)->required()->check(CLI::ExistingFile);
  split->add_option("--minutes", spa.minutes, "Targets in minutes")->delimiter(',');
  split->add_option("-o,--out-dir", spa.out_dir);
  split->add_flag("--independent", spa.independent, "Draw each split separately instead of nesting");
  split->add_flag("--shuffle", spa.shuffle, "Seeded random order instead of corpus order");

  ManifestArgs va;
  auto* validate_cmd = app.add_subcommand("validate", "Check manifests");
  validate_cmd->add_option("manifests", va.manifests)->required()->check(CLI::ExistingFile);
  validate_cmd->add_flag("--strict", va.strict, "Exit non-zero when there are findings");

  ManifestArgs sta;
  auto* stats_cmd = app.add_subcommand("stats", "Utterance count and duration");
  stats_cmd->add_option("manifests", sta.manifests)->required()->check(CLI::ExistingFile);

  VoiceArgs voa;
  auto* voice = app.add_subcommand("build-voice", "Index diphone units of a cut corpus");
  voice->add_option("manifest", voa.manifest)->required()->check(CLI::ExistingFile);
  voice->add_option("--phones", voa.phones, "Phone timings (default phones.tsv next to the manifest)");
  voice->add_option("-o,--out", voa.output);

  SynthArgs sya;
  auto* synth = app.add_subcommand("synth", "Unit-selection synthesis");
  synth->add_option("--voice", sya.voice)->required()->check(CLI::ExistingFile);
  synth->add_option("--g2p", sya.table);
  synth->add_option("--numbers", sya.numbers);
  synth->add_option("--text", sya.text);
  synth->add_option("-o,--out", sya.output, "WAV for --text");
  synth->add_option("--prompts", sya.prompts, "id<TAB>text batch")->check(CLI::ExistingFile);
  synth->add_option("--out-dir", sya.out_dir, "Batch output directory");
  synth->add_option("--join-weight", sya.options.join_weight)->check(CLI::NonNegativeNumber);
  synth->add_option("--target-weight", sya.options.target_weight)->check(CLI::NonNegativeNumber);
  synth->add_option("--crossfade-ms", sya.options.crossfade_ms)->check(CLI::NonNegativeNumber);

  McdArgs ma;
  auto* mcd_cmd = app.add_subcommand("mcd", "Mel cepstral distortion between manifests");
  mcd_cmd->add_option("--ref", ma.reference)->check(CLI::ExistingFile);
  mcd_cmd->add_option("--synth", ma.synthesized)->check(CLI::ExistingFile);
  mcd_cmd->add_option("--self", ma.self, "Compare a manifest with itself")->check(CLI::ExistingFile);
  mcd_cmd->add_option("--baseline", ma.baseline, "Report whether the mean differs significantly from this MCD");

  CerArgs cea;
  auto* cer_cmd = app.add_subcommand("cer", "Character error rate (strict and lenient)");
  cer_cmd->add_option("--ref", cea.reference);
  cer_cmd->add_option("--hyp", cea.hypothesis);
  cer_cmd->add_option("--ref-file", cea.reference_file)->check(CLI::ExistingFile);
  cer_cmd->add_option("--hyp-file", cea.hypothesis_file)->check(CLI::ExistingFile);

  ServeArgs sva;
  auto* serve = app.add_subcommand("serve", "Listening-test HTTP service");
  serve->add_option("--host", sva.host, "Bind address (VC_LISTEN_HOST)");
  serve->add_option("--port", sva.port, "Port (VC_LISTEN_PORT)");
  serve->add_option("--data-dir", sva.data_dir, "Store directory (VC_DATA_DIR)");
  serve->add_option("--audio-dir", sva.audio_dir, "Audio served under /audio (VC_AUDIO_DIR)");
  serve->add_option("--static-dir", sva.static_dir, "Evaluator UI assets");

  FixtureArgs fa;
  auto* fixture = app.add_subcommand("make-fixture", "Write the synthetic chapter fixture");
  fixture->add_option("-o,--out-dir", fa.out_dir);
  fixture->add_option("--seconds", fa.seconds)->check(CLI::PositiveNumber);
  fixture->add_option("--snr", fa.snr, "Additive noise level in dB");
  fixture->add_option("--prompts", fa.prompts, "Candidate prompts to write");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (seed_opt->count()) g.seed = seed;
    load_config(g);
    if (*normalize) run_normalize(g, na);
    else if (*g2p_cmd) run_g2p(g, ga);
    else if (*select) run_select(g, sa);
    else if (*align) run_align(g, aa);
    else if (*cut) run_cut(g, ca);
    else if (*split) run_split(g, spa);
    else if (*validate_cmd) return run_validate(g, va);
    else if (*stats_cmd) run_stats(g, sta);
    else if (*voice) run_build_voice(g, voa);
    else if (*synth) return run_synth(g, sya);
    else if (*mcd_cmd) run_mcd(g, ma);
    else if (*cer_cmd) run_cer(g, cea);
    else if (*serve) run_serve(g, sva);
    else if (*fixture) run_fixture(g, fa);
  } catch (const Error& e) {
    std::cerr << "voicecorpus: " << to_string(e.kind()) << ": " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "voicecorpus: internal: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
