#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <optional>

#include <nlohmann/json.hpp>

#include "voicecorpus/dtw.hpp"
#include "voicecorpus/parallel.hpp"
#include "voicecorpus/prompt_select.hpp"
#include "voicecorpus/synth.hpp"

namespace vc {
namespace {

using nlohmann::json;

std::size_t boundary_frame(std::size_t sample, std::size_t frames, std::size_t hop, std::size_t length) {
  if (frames == 0) return 0;
  const double centre = (static_cast<double>(sample) - static_cast<double>(length) / 2.0) / static_cast<double>(hop);
  const double f = std::clamp(std::round(centre), 0.0, static_cast<double>(frames - 1));
  return static_cast<std::size_t>(f);
}

struct Cutter {
  const FeatureTrack& track;
  std::size_t hop;
  std::size_t length;

  Unit make(const std::string& id, std::size_t begin, std::size_t end) const {
    Unit u;
    u.utterance_id = id;
    u.start_sample = begin;
    u.end_sample = end;
    const std::size_t frames = track.frame_count();
    u.start_frame = std::min(frames, begin / hop);
    u.end_frame = std::clamp(end / hop, u.start_frame, frames);
    const auto left = track.frame(boundary_frame(begin, frames, hop, length));
    const auto right = track.frame(boundary_frame(end, frames, hop, length));
    u.left_mfcc.assign(left.begin(), left.end());
    u.right_mfcc.assign(right.begin(), right.end());
    return u;
  }
};

struct UtteranceUnits {
  std::vector<std::pair<std::string, Unit>> diphones;
  std::vector<std::pair<std::string, Unit>> first_halves;
  std::vector<std::pair<std::string, Unit>> second_halves;
  std::vector<std::pair<std::string, double>> durations;
};

UtteranceUnits cut_units(const IndexInput& input, const MfccConfig& config, std::size_t hop) {
  const AudioClip& audio = *input.audio;
  const FeatureTrack track = mfcc(audio, config);
  const Cutter cutter{track, hop, frame_length_samples(config, audio.sample_rate)};

  struct Span {
    const std::string* phone;
    std::size_t begin, mid, end;
  };
  std::vector<Span> spans;
  for (const auto& p : input.phones) {
    const auto begin = static_cast<std::size_t>(std::max(0.0, std::round(p.start * audio.sample_rate)));
    const auto end = std::min(audio.samples.size(),
                              static_cast<std::size_t>(std::max(0.0, std::round(p.end * audio.sample_rate))));
    if (end <= begin) continue;
    spans.push_back({&p.phone, begin, begin + (end - begin) / 2, end});
  }

  UtteranceUnits out;
  for (std::size_t i = 0; i < spans.size(); ++i) {
    const Span& s = spans[i];
    out.durations.emplace_back(*s.phone, static_cast<double>(s.end - s.begin) / static_cast<double>(hop));
    if (s.mid > s.begin) out.first_halves.emplace_back(*s.phone, cutter.make(input.id, s.begin, s.mid));
    if (s.end > s.mid) out.second_halves.emplace_back(*s.phone, cutter.make(input.id, s.mid, s.end));
    if (i + 1 < spans.size()) {
      const Span& n = spans[i + 1];
      if (n.mid > s.mid) {
        out.diphones.emplace_back(diphone_label(*s.phone, *n.phone), cutter.make(input.id, s.mid, n.mid));
      }
    }
  }
  return out;
}

UnitIndex merge_units(std::vector<UtteranceUnits>& parts, int sample_rate, std::size_t dim, std::size_t hop) {
  UnitIndex index;
  index.sample_rate = sample_rate;
  index.feature_dim = dim;
  index.hop_samples = hop;
  std::map<std::string, std::pair<double, std::size_t>> totals;
  for (auto& part : parts) {
    for (auto& [label, unit] : part.diphones) index.diphones[label].push_back(std::move(unit));
    for (auto& [label, unit] : part.first_halves) index.first_halves[label].push_back(std::move(unit));
    for (auto& [label, unit] : part.second_halves) index.second_halves[label].push_back(std::move(unit));
    for (const auto& [phone, frames] : part.durations) {
      auto& t = totals[phone];
      t.first += frames;
      ++t.second;
    }
  }
  for (const auto& [phone, t] : totals) index.duration_means[phone] = t.first / static_cast<double>(t.second);
  return index;
}

json unit_to_json(const Unit& u) {
  return {{"utt", u.utterance_id},
          {"samples", {u.start_sample, u.end_sample}},
          {"frames", {u.start_frame, u.end_frame}},
          {"left", u.left_mfcc},
          {"right", u.right_mfcc}};
}

Unit unit_from_json(const json& j) {
  Unit u;
  u.utterance_id = j.at("utt").get<std::string>();
  u.start_sample = j.at("samples").at(0).get<std::size_t>();
  u.end_sample = j.at("samples").at(1).get<std::size_t>();
  u.start_frame = j.at("frames").at(0).get<std::size_t>();
  u.end_frame = j.at("frames").at(1).get<std::size_t>();
  u.left_mfcc = j.at("left").get<std::vector<double>>();
  u.right_mfcc = j.at("right").get<std::vector<double>>();
  return u;
}

json units_to_json(const std::map<std::string, std::vector<Unit>>& units) {
  json out = json::object();
  for (const auto& [label, list] : units) {
    json arr = json::array();
    for (const auto& u : list) arr.push_back(unit_to_json(u));
    out[label] = std::move(arr);
  }
  return out;
}

std::map<std::string, std::vector<Unit>> units_from_json(const json& j) {
  std::map<std::string, std::vector<Unit>> out;
  for (const auto& [label, arr] : j.items()) {
    auto& list = out[label];
    for (const auto& u : arr) list.push_back(unit_from_json(u));
  }
  return out;
}

struct Slot {
  UnitKind kind;
  std::string label;
  double expected_frames;
  std::size_t position;
};

}  // namespace

std::size_t UnitIndex::diphone_unit_count() const noexcept {
  std::size_t n = 0;
  for (const auto& [label, list] : diphones) n += list.size();
  return n;
}

const std::vector<Unit>* UnitIndex::find(UnitKind kind, const std::string& label) const noexcept {
  const auto& table = kind == UnitKind::Diphone ? diphones : kind == UnitKind::FirstHalf ? first_halves : second_halves;
  auto it = table.find(label);
  return it == table.end() || it->second.empty() ? nullptr : &it->second;
}

UnitIndex build_unit_index(const std::vector<IndexInput>& inputs, const MfccConfig& mfcc_config) {
  mfcc_config.validate();
  int rate = 16000;
  if (!inputs.empty()) rate = inputs.front().audio->sample_rate;
  for (const auto& in : inputs) {
    if (in.audio->sample_rate != rate) {
      throw Error(ErrorKind::Invalid, "utterance " + in.id + " has sample rate " +
                                          std::to_string(in.audio->sample_rate) + ", expected " + std::to_string(rate));
    }
  }
  const std::size_t hop = frame_shift_samples(mfcc_config, rate);
  std::vector<UtteranceUnits> parts;
  parts.reserve(inputs.size());
  for (const auto& in : inputs) parts.push_back(cut_units(in, mfcc_config, hop));
  return merge_units(parts, rate, mfcc_config.dim(), hop);
}

UnitIndex build_unit_index(const Manifest& manifest, const PhoneAlignments& phones,
                           const std::filesystem::path& base_dir, const std::filesystem::path& index_dir,
                           const MfccConfig& mfcc_config, unsigned jobs) {
  mfcc_config.validate();
  for (const auto& u : manifest.utterances) {
    if (u.start != 0.0) {
      throw Error(ErrorKind::Invalid, "utterance " + u.id + " is a region of a longer file; cut the corpus first");
    }
    if (!phones.contains(u.id)) throw Error(ErrorKind::NotFound, "no phone alignment for utterance " + u.id);
  }
  const std::size_t n = manifest.utterances.size();
  std::vector<UtteranceUnits> parts(n);
  std::vector<int> rates(n, 16000);
  parallel_for(n, jobs, [&](std::size_t i) {
    const Utterance& u = manifest.utterances[i];
    const AudioClip clip = load_wav(base_dir / u.audio_path);
    if (!u.whole_file() && std::abs(u.end - clip.duration_seconds()) > 1.0 / clip.sample_rate + 1e-6) {
      throw Error(ErrorKind::Invalid, "utterance " + u.id + " is a region of a longer file; cut the corpus first");
    }
    rates[i] = clip.sample_rate;
    parts[i] = cut_units({u.id, &clip, phones.at(u.id)}, mfcc_config, frame_shift_samples(mfcc_config, clip.sample_rate));
  });
  for (std::size_t i = 1; i < n; ++i) {
    if (rates[i] != rates[0]) throw Error(ErrorKind::Invalid, "utterance " + manifest.utterances[i].id + " has a different sample rate");
  }
  const int rate = n ? rates[0] : 16000;
  UnitIndex index = merge_units(parts, rate, mfcc_config.dim(), frame_shift_samples(mfcc_config, rate));
  index.language = manifest.language;
  index.license = manifest.license;
  const auto anchor = std::filesystem::absolute(index_dir);
  for (const auto& u : manifest.utterances) {
    index.audio_paths[u.id] = std::filesystem::absolute(base_dir / u.audio_path).lexically_proximate(anchor).generic_string();
  }
  return index;
}

void save_unit_index(const std::filesystem::path& path, const UnitIndex& index) {
  json j = {{"format", "voicecorpus-unit-index"},
            {"version", UnitIndex::kVersion},
            {"sample_rate", index.sample_rate},
            {"feature_dim", index.feature_dim},
            {"hop_samples", index.hop_samples},
            {"language", index.language},
            {"license", index.license},
            {"audio", index.audio_paths},
            {"duration_means", index.duration_means},
            {"diphones", units_to_json(index.diphones)},
            {"first_halves", units_to_json(index.first_halves)},
            {"second_halves", units_to_json(index.second_halves)}};
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write unit index: " + path.string());
  out << j.dump() << '\n';
  if (!out) throw Error(ErrorKind::Io, "short write: " + path.string());
}

UnitIndex load_unit_index(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot read unit index: " + path.string());
  try {
    const json j = json::parse(in);
    if (j.at("format").get<std::string>() != "voicecorpus-unit-index") {
      throw Error(ErrorKind::Format, path.string() + ": not a unit index");
    }
    if (j.at("version").get<int>() != UnitIndex::kVersion) {
      throw Error(ErrorKind::Format, path.string() + ": unsupported unit index version " + j.at("version").dump());
    }
    UnitIndex index;
    index.sample_rate = j.at("sample_rate").get<int>();
    index.feature_dim = j.at("feature_dim").get<std::size_t>();
    index.hop_samples = j.at("hop_samples").get<std::size_t>();
    index.language = j.at("language").get<std::string>();
    index.license = j.at("license").get<std::string>();
    index.audio_paths = j.at("audio").get<std::map<std::string, std::string>>();
    index.duration_means = j.at("duration_means").get<std::map<std::string, double>>();
    index.diphones = units_from_json(j.at("diphones"));
    index.first_halves = units_from_json(j.at("first_halves"));
    index.second_halves = units_from_json(j.at("second_halves"));
    return index;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Format, path.string() + ": " + e.what());
  }
}

Voice load_voice(const std::filesystem::path& index_path) {
  Voice voice;
  voice.index = load_unit_index(index_path);
  const auto dir = index_path.parent_path();
  for (const auto& [id, rel] : voice.index.audio_paths) {
    AudioClip clip = load_wav(dir / rel);
    if (clip.sample_rate != voice.index.sample_rate) {
      throw Error(ErrorKind::Format, "audio for " + id + " is at " + std::to_string(clip.sample_rate) +
                                         " Hz, index expects " + std::to_string(voice.index.sample_rate));
    }
    voice.audio.emplace(id, std::move(clip));
  }
  return voice;
}

SynthPlan plan_units(const std::vector<std::string>& phones_in, const UnitIndex& index, const SynthOptions& options) {
  if (phones_in.empty()) throw Error(ErrorKind::Invalid, "nothing to synthesize: empty phone sequence");
  SynthPlan plan;
  plan.phones = phones_in;
  if (options.pad_silence && index.duration_means.contains(options.pause_phone)) {
    if (plan.phones.front() != options.pause_phone) plan.phones.insert(plan.phones.begin(), options.pause_phone);
    if (plan.phones.back() != options.pause_phone) plan.phones.push_back(options.pause_phone);
  }
  const auto& ph = plan.phones;
  auto mean = [&](const std::string& p) {
    auto it = index.duration_means.find(p);
    return it == index.duration_means.end() ? 0.0 : it->second;
  };

  std::vector<std::string> missing;
  std::vector<Slot> slots;
  auto add_half = [&](UnitKind kind, const std::string& p, std::size_t position) {
    if (!index.find(kind, p)) {
      missing.push_back((kind == UnitKind::FirstHalf ? "first half of " : "second half of ") + p);
      return;
    }
    slots.push_back({kind, p, mean(p) / 2.0, position});
    plan.positions[position].units.push_back({kind, p, 0, 0.0, 0.0});
  };

  plan.positions.push_back({ph.front(), UnitKind::FirstHalf, false, {}});
  add_half(UnitKind::FirstHalf, ph.front(), 0);
  for (std::size_t i = 0; i + 1 < ph.size(); ++i) {
    const std::string label = diphone_label(ph[i], ph[i + 1]);
    const std::size_t position = plan.positions.size();
    plan.positions.push_back({label, UnitKind::Diphone, false, {}});
    if (index.find(UnitKind::Diphone, label)) {
      slots.push_back({UnitKind::Diphone, label, (mean(ph[i]) + mean(ph[i + 1])) / 2.0, position});
      plan.positions[position].units.push_back({UnitKind::Diphone, label, 0, 0.0, 0.0});
      continue;
    }
    plan.positions[position].backoff = true;
    const std::size_t before = missing.size();
    add_half(UnitKind::SecondHalf, ph[i], position);
    add_half(UnitKind::FirstHalf, ph[i + 1], position);
    if (missing.size() != before) missing.insert(missing.begin() + static_cast<std::ptrdiff_t>(before), "diphone " + label);
  }
  plan.positions.push_back({ph.back(), UnitKind::SecondHalf, false, {}});
  add_half(UnitKind::SecondHalf, ph.back(), plan.positions.size() - 1);

  if (!missing.empty()) {
    std::sort(missing.begin(), missing.end());
    missing.erase(std::unique(missing.begin(), missing.end()), missing.end());
    std::string message = "cannot synthesize; the voice lacks:";
    for (const auto& m : missing) message += " [" + m + "]";
    throw Error(ErrorKind::Infeasible, message);
  }

  const double hop = static_cast<double>(index.hop_samples);
  auto target_cost = [&](const Slot& s, const Unit& u) {
    return options.target_weight * std::abs(static_cast<double>(u.sample_count()) / hop - s.expected_frames);
  };
  auto join_cost = [&](const Unit& a, const Unit& b) {
    if (a.utterance_id == b.utterance_id && a.end_sample == b.start_sample) return 0.0;
    return options.join_weight * euclidean(a.right_mfcc, b.left_mfcc);
  };

  // Viterbi over slots; accumulation order matches a forward sum of
  // (join, target) pairs so the optimum equals an exhaustive search exactly.
  const std::size_t n = slots.size();
  std::vector<const std::vector<Unit>*> cands(n);
  for (std::size_t s = 0; s < n; ++s) cands[s] = index.find(slots[s].kind, slots[s].label);
  std::vector<std::vector<double>> acc(n);
  std::vector<std::vector<std::size_t>> back(n);
  for (std::size_t s = 0; s < n; ++s) {
    const auto& units = *cands[s];
    acc[s].resize(units.size());
    back[s].resize(units.size(), 0);
    for (std::size_t c = 0; c < units.size(); ++c) {
      const double t = target_cost(slots[s], units[c]);
      if (s == 0) {
        acc[s][c] = 0.0 + 0.0 + t;
        continue;
      }
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t p = 0; p < cands[s - 1]->size(); ++p) {
        const double v = acc[s - 1][p] + join_cost((*cands[s - 1])[p], units[c]);
        if (v < best) {
          best = v;
          back[s][c] = p;
        }
      }
      acc[s][c] = best + t;
    }
  }
  std::vector<std::size_t> choice(n);
  choice[n - 1] = static_cast<std::size_t>(std::min_element(acc[n - 1].begin(), acc[n - 1].end()) - acc[n - 1].begin());
  for (std::size_t s = n - 1; s > 0; --s) choice[s - 1] = back[s][choice[s]];

  std::size_t s = 0;
  plan.total_cost = 0.0;
  const Unit* previous = nullptr;
  for (auto& position : plan.positions) {
    for (auto& chosen : position.units) {
      const Unit& unit = (*cands[s])[choice[s]];
      chosen.candidate = choice[s];
      chosen.join_cost = previous ? join_cost(*previous, unit) : 0.0;
      chosen.target_cost = target_cost(slots[s], unit);
      plan.total_cost += chosen.join_cost;
      plan.total_cost += chosen.target_cost;
      previous = &unit;
      ++s;
    }
  }
  return plan;
}

AudioClip render_plan(const SynthPlan& plan, const Voice& voice, const SynthOptions& options) {
  std::vector<const Unit*> units;
  for (const auto& position : plan.positions) {
    for (const auto& chosen : position.units) {
      const auto* list = voice.index.find(chosen.kind, chosen.label);
      if (!list || chosen.candidate >= list->size()) {
        throw Error(ErrorKind::NotFound, "plan refers to a unit the voice does not have: " + chosen.label);
      }
      units.push_back(&(*list)[chosen.candidate]);
    }
  }

  AudioClip out;
  out.sample_rate = voice.index.sample_rate;
  const auto half = static_cast<std::size_t>(std::llround(options.crossfade_ms * out.sample_rate / 1000.0 / 2.0));
  for (std::size_t k = 0; k < units.size(); ++k) {
    const Unit& u = *units[k];
    auto it = voice.audio.find(u.utterance_id);
    if (it == voice.audio.end()) throw Error(ErrorKind::NotFound, "voice has no audio for " + u.utterance_id);
    const auto& src = it->second.samples;
    const std::size_t lead = k > 0 ? half : 0;
    const std::size_t tail = k + 1 < units.size() ? half : 0;
    std::vector<float> seg;
    seg.reserve(u.sample_count() + lead + tail);
    for (std::size_t i = 0; i < u.sample_count() + lead + tail; ++i) {
      const auto at = static_cast<std::ptrdiff_t>(u.start_sample + i) - static_cast<std::ptrdiff_t>(lead);
      seg.push_back(at >= 0 && static_cast<std::size_t>(at) < src.size() ? src[static_cast<std::size_t>(at)] : 0.0f);
    }
    const std::size_t overlap = std::min({2 * lead, out.samples.size(), seg.size()});
    const std::size_t base = out.samples.size() - overlap;
    for (std::size_t t = 0; t < overlap; ++t) {
      const double fade_out = 0.5 * (1.0 + std::cos(std::numbers::pi * (static_cast<double>(t) + 0.5) / static_cast<double>(overlap)));
      const double mixed = static_cast<double>(out.samples[base + t]) * fade_out + static_cast<double>(seg[t]) * (1.0 - fade_out);
      out.samples[base + t] = static_cast<float>(mixed);
    }
    out.samples.insert(out.samples.end(), seg.begin() + static_cast<std::ptrdiff_t>(overlap), seg.end());
  }
  return out;
}

SynthOutput synthesize_phones(std::vector<std::string> phones, const Voice& voice, const SynthOptions& options) {
  SynthOutput out;
  out.plan = plan_units(phones, voice.index, options);
  out.audio = render_plan(out.plan, voice, options);
  return out;
}

SynthOutput synthesize(std::string_view text, const G2pTable& table, const Voice& voice, const SynthOptions& options) {
  return synthesize_phones(strip_boundaries(g2p(clean_text(text), table)), voice, options);
}

BatchResult batch_synthesize(const std::vector<Prompt>& prompts, const G2pTable& table, const Voice& voice,
                             const std::filesystem::path& out_dir, const SynthOptions& options, unsigned jobs) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create output directory " + out_dir.string() + ": " + ec.message());

  const std::size_t n = prompts.size();
  std::vector<std::optional<Utterance>> made(n);
  std::vector<std::string> errors(n);
  parallel_for(n, jobs, [&](std::size_t i) {
    const Prompt& p = prompts[i];
    try {
      if (!is_filesystem_safe_id(p.id)) throw Error(ErrorKind::Invalid, "id is not filesystem-safe");
      const SynthOutput result = synthesize(p.text, table, voice, options);
      Utterance u;
      u.id = p.id;
      u.audio_path = p.id + ".wav";
      u.end = result.audio.duration_seconds();
      u.speaker = "synth";
      u.text = clean_text(p.text);
      write_wav(out_dir / u.audio_path, result.audio);
      made[i] = std::move(u);
    } catch (const Error& e) {
      errors[i] = e.what();
    }
  });

  BatchResult batch;
  batch.manifest.language = voice.index.language;
  batch.manifest.source = "synth-mini";
  batch.manifest.license = voice.index.license;
  for (std::size_t i = 0; i < n; ++i) {
    if (made[i]) batch.manifest.utterances.push_back(std::move(*made[i]));
    else batch.failures.emplace_back(prompts[i].id, errors[i]);
  }
  return batch;
}

}  // namespace vc
