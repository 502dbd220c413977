#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>

#include "voicecorpus/aligner.hpp"
#include "voicecorpus/parallel.hpp"

namespace vc {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::size_t kSkipped = static_cast<std::size_t>(-1);

DiagGaussian fit(const FeatureTrack& features, const std::vector<std::size_t>& frames, double floor) {
  const std::size_t dim = features.dim;
  DiagGaussian g{std::vector<double>(dim, 0.0), std::vector<double>(dim, floor)};
  if (frames.empty()) return g;
  for (std::size_t f : frames) {
    const auto x = features.frame(f);
    for (std::size_t d = 0; d < dim; ++d) g.mean[d] += x[d];
  }
  const auto n = static_cast<double>(frames.size());
  for (double& m : g.mean) m /= n;
  std::vector<double> spread(dim, 0.0);
  for (std::size_t f : frames) {
    const auto x = features.frame(f);
    for (std::size_t d = 0; d < dim; ++d) spread[d] += (x[d] - g.mean[d]) * (x[d] - g.mean[d]);
  }
  for (std::size_t d = 0; d < dim; ++d) g.variance[d] = std::max(spread[d] / n, floor);
  return g;
}

double frame_time(std::size_t frame, std::size_t frame_count, double hop_s, double offset_s, double duration) {
  if (frame == 0) return 0.0;
  if (frame >= frame_count) return duration;
  return std::clamp(static_cast<double>(frame) * hop_s + offset_s, 0.0, duration);
}

struct ChapterPlan {
  std::vector<PhoneSlot> slots;
  // Inclusive range of mandatory slot positions belonging to each verse.
  std::vector<std::pair<std::size_t, std::size_t>> verse_slots;
  std::size_t mandatory = 0;
};

ChapterPlan plan_chapter(std::span<const Verse> verses, const G2pTable& table, const AlignerConfig& config) {
  if (verses.empty()) throw Error(ErrorKind::Invalid, "align_chapter: no verses");
  ChapterPlan plan;
  for (const Verse& verse : verses) {
    const auto phones = strip_boundaries(g2p(verse.text, table));
    if (phones.empty()) throw Error(ErrorKind::Invalid, "verse " + verse.id + " has no phones");
    if (config.insert_pauses) plan.slots.push_back({config.pause_phone, true});
    const std::size_t first = plan.slots.size();
    for (const auto& p : phones) plan.slots.push_back({p, false});
    plan.verse_slots.emplace_back(first, plan.slots.size() - 1);
    plan.mandatory += phones.size();
  }
  if (config.insert_pauses) plan.slots.push_back({config.pause_phone, true});
  return plan;
}

std::vector<std::size_t> mandatory_starts(const Segmentation& seg, const std::vector<PhoneSlot>& slots) {
  std::vector<std::size_t> starts;
  for (std::size_t k = 0; k < slots.size(); ++k) {
    if (!slots[k].optional) starts.push_back(seg.segments[seg.position_segment[k]].start_frame);
  }
  return starts;
}

// Flat start over every slot when the track is long enough, otherwise over
// the mandatory slots only (pauses skipped).
Segmentation flat_start(const ChapterPlan& plan, std::size_t frames, std::size_t min_duration) {
  std::vector<std::string> phones;
  std::vector<std::size_t> positions;
  const bool use_all = frames >= plan.slots.size() * min_duration;
  for (std::size_t k = 0; k < plan.slots.size(); ++k) {
    if (use_all || !plan.slots[k].optional) {
      phones.push_back(plan.slots[k].phone);
      positions.push_back(k);
    }
  }
  Segmentation flat = flat_segment(phones, frames, min_duration);
  flat.position_segment.assign(plan.slots.size(), kSkipped);
  for (std::size_t i = 0; i < positions.size(); ++i) flat.position_segment[positions[i]] = i;
  return flat;
}

std::vector<double> frame_energies_db(const AudioClip& audio, std::size_t frames, const MfccConfig& mfcc) {
  const std::size_t hop = frame_shift_samples(mfcc, audio.sample_rate);
  const std::size_t len = frame_length_samples(mfcc, audio.sample_rate);
  std::vector<double> e(frames);
  for (std::size_t t = 0; t < frames; ++t) {
    const std::size_t begin = t * hop;
    const std::size_t end = std::min(audio.samples.size(), begin + len);
    double sum = 0.0;
    for (std::size_t i = begin; i < end; ++i) sum += static_cast<double>(audio.samples[i]) * audio.samples[i];
    e[t] = 10.0 * std::log10(sum / static_cast<double>(len) + 1e-12);
  }
  return e;
}

// Two-means split of frame energies; empty when the classes are not apart.
std::optional<std::vector<bool>> speech_frames(const std::vector<double>& e) {
  if (e.empty()) return std::nullopt;
  double lo = *std::min_element(e.begin(), e.end());
  double hi = *std::max_element(e.begin(), e.end());
  for (int it = 0; it < 100; ++it) {
    const double threshold = (lo + hi) / 2.0;
    double sum_lo = 0.0, sum_hi = 0.0;
    std::size_t n_lo = 0, n_hi = 0;
    for (double v : e) {
      if (v > threshold) {
        sum_hi += v;
        ++n_hi;
      } else {
        sum_lo += v;
        ++n_lo;
      }
    }
    if (n_lo == 0 || n_hi == 0) return std::nullopt;
    const double new_lo = sum_lo / static_cast<double>(n_lo);
    const double new_hi = sum_hi / static_cast<double>(n_hi);
    if (new_lo == lo && new_hi == hi) break;
    lo = new_lo;
    hi = new_hi;
  }
  if (hi - lo < 6.0) return std::nullopt;
  const double threshold = (lo + hi) / 2.0;
  std::vector<bool> speech(e.size());
  for (std::size_t t = 0; t < e.size(); ++t) speech[t] = e[t] > threshold;
  return speech;
}

std::optional<Segmentation> energy_start(const AudioClip& audio, std::size_t frames, const ChapterPlan& plan,
                                         const AlignerConfig& config) {
  const auto speech = speech_frames(frame_energies_db(audio, frames, config.mfcc));
  if (!speech) return std::nullopt;
  const auto first = std::find(speech->begin(), speech->end(), true);
  if (first == speech->end()) return std::nullopt;
  const auto fs = static_cast<std::size_t>(first - speech->begin());
  std::size_t ls = frames;
  while (!(*speech)[ls - 1]) --ls;

  struct Gap {
    std::size_t start, end;
  };
  std::vector<Gap> gaps;
  for (std::size_t t = fs; t < ls;) {
    if ((*speech)[t]) {
      ++t;
      continue;
    }
    const std::size_t start = t;
    while (t < ls && !(*speech)[t]) ++t;
    gaps.push_back({start, t});
  }
  const std::size_t verses = plan.verse_slots.size();
  if (gaps.size() < verses - 1) return std::nullopt;
  std::stable_sort(gaps.begin(), gaps.end(),
                   [](const Gap& a, const Gap& b) { return a.end - a.start > b.end - b.start; });
  gaps.resize(verses - 1);
  std::sort(gaps.begin(), gaps.end(), [](const Gap& a, const Gap& b) { return a.start < b.start; });

  // Extents of the pause before each verse (and after the last one).
  std::vector<Gap> pauses;
  pauses.push_back({0, fs});
  pauses.insert(pauses.end(), gaps.begin(), gaps.end());
  pauses.push_back({ls, frames});
  std::vector<Gap> regions(verses);
  std::vector<bool> pause_used(verses + 1);
  for (std::size_t v = 0; v < verses; ++v) regions[v] = {pauses[v].end, pauses[v + 1].start};
  for (std::size_t k = 0; k <= verses; ++k) {
    pause_used[k] = config.insert_pauses && pauses[k].end - pauses[k].start >= config.min_duration;
    if (pause_used[k]) continue;
    if (k == 0) regions[0].start = 0;
    else regions[k - 1].end = pauses[k].end;
  }

  Segmentation seg;
  seg.position_segment.assign(plan.slots.size(), kSkipped);
  auto add_pause = [&](std::size_t k, std::size_t slot) {
    if (!pause_used[k]) return;
    seg.position_segment[slot] = seg.segments.size();
    seg.segments.push_back({config.pause_phone, pauses[k].start, pauses[k].end, 0.0});
  };
  for (std::size_t v = 0; v < verses; ++v) {
    const auto [lo, hi] = plan.verse_slots[v];
    if (config.insert_pauses) add_pause(v, lo - 1);
    std::vector<std::string> phones;
    for (std::size_t k = lo; k <= hi; ++k) phones.push_back(plan.slots[k].phone);
    const std::size_t length = regions[v].end - regions[v].start;
    if (length < phones.size() * std::max<std::size_t>(config.min_duration, 1)) return std::nullopt;
    const Segmentation flat = flat_segment(phones, length, config.min_duration);
    for (std::size_t i = 0; i < phones.size(); ++i) {
      PhoneSegment s = flat.segments[i];
      s.start_frame += regions[v].start;
      s.end_frame += regions[v].start;
      seg.position_segment[lo + i] = seg.segments.size();
      seg.segments.push_back(std::move(s));
    }
  }
  if (config.insert_pauses) add_pause(verses, plan.slots.size() - 1);
  return seg;
}

ChapterAlignment build_utterances(const AudioClip& audio, const FeatureTrack& features, std::span<const Verse> verses,
                                  const ChapterPlan& plan, Segmentation seg, const AlignerConfig& config) {
  const std::size_t frames = features.frame_count();
  const double hop_s = static_cast<double>(frame_shift_samples(config.mfcc, audio.sample_rate)) / audio.sample_rate;
  const double len_s = static_cast<double>(frame_length_samples(config.mfcc, audio.sample_rate)) / audio.sample_rate;
  const double offset_s = (len_s - hop_s) / 2.0;
  const double duration = audio.duration_seconds();
  const auto vad = energy_vad(audio, config.mfcc.frame_shift_ms, config.vad_threshold_db);

  ChapterAlignment out;
  std::size_t previous_end = 0;
  for (std::size_t v = 0; v < verses.size(); ++v) {
    const auto [first, last] = plan.verse_slots[v];
    const PhoneSegment& head = seg.segments[seg.position_segment[first]];
    const PhoneSegment& tail = seg.segments[seg.position_segment[last]];

    UtteranceAlignment utt;
    utt.verse_id = verses[v].id;
    utt.text = verses[v].text;
    double cost = 0.0;
    std::size_t count = 0;
    for (std::size_t k = first; k <= last; ++k) {
      const PhoneSegment& s = seg.segments[seg.position_segment[k]];
      cost += s.cost;
      count += s.length();
      utt.phones.push_back({s.phone, frame_time(s.start_frame, frames, hop_s, offset_s, duration),
                            frame_time(s.end_frame, frames, hop_s, offset_s, duration)});
    }
    utt.score = cost / static_cast<double>(count);

    std::size_t start = snap_to_silence(head.start_frame, vad, config.snap_window);
    std::size_t end = snap_to_silence(tail.end_frame, vad, config.snap_window);
    // Snapping must not pull a verse across its neighbours or its own phones.
    start = std::clamp(start, previous_end, head.start_frame);
    end = std::max(end, tail.end_frame);
    if (v + 1 < verses.size()) {
      const PhoneSegment& next = seg.segments[seg.position_segment[plan.verse_slots[v + 1].first]];
      end = std::min(end, next.start_frame);
    }
    end = std::max(end, start + 1);
    previous_end = end;
    utt.start_time = frame_time(start, frames, hop_s, offset_s, duration);
    utt.end_time = frame_time(end, frames, hop_s, offset_s, duration);
    out.utterances.push_back(std::move(utt));
  }
  out.segmentation = std::move(seg);
  return out;
}

struct ChapterState {
  FeatureTrack features;
  ChapterPlan plan;
  ChapterAlignment alignment;
};

ChapterState run_chapter(const AudioClip& audio, std::span<const Verse> verses, const G2pTable& table,
                         const AlignerConfig& config) {
  ChapterState state;
  state.plan = plan_chapter(verses, table, config);
  state.features = mfcc(audio, config.mfcc);
  const std::size_t frames = state.features.frame_count();
  if (frames < state.plan.mandatory * config.min_duration) {
    throw Error(ErrorKind::Infeasible, "chapter audio (" + std::to_string(frames) + " frames) is too short for " +
                                           std::to_string(state.plan.mandatory) + " phones");
  }

  std::optional<Segmentation> guided;
  if (config.energy_start) guided = energy_start(audio, frames, state.plan, config);
  Segmentation seg = guided ? std::move(*guided) : flat_start(state.plan, frames, config.min_duration);
  PhoneModelSet models = estimate_models(state.features, seg, config.variance_floor);
  score_segmentation(state.features, models, seg);

  std::vector<double> costs{seg.total_cost};
  auto previous = mandatory_starts(seg, state.plan.slots);
  bool converged = false;
  int iterations = 0;
  while (iterations < config.max_iterations) {
    ++iterations;
    seg = viterbi_segment(state.features, state.plan.slots, models, config.min_duration);
    costs.push_back(seg.total_cost);
    const auto starts = mandatory_starts(seg, state.plan.slots);
    double movement = 0.0;
    for (std::size_t i = 0; i < starts.size(); ++i) {
      movement += std::abs(static_cast<double>(starts[i]) - static_cast<double>(previous[i]));
    }
    movement /= static_cast<double>(starts.size());
    previous = starts;
    if (movement < config.convergence_epsilon) {
      converged = true;
      break;
    }
    models = estimate_models(state.features, seg, config.variance_floor);
  }

  state.alignment = build_utterances(audio, state.features, verses, state.plan, std::move(seg), config);
  state.alignment.iterations = iterations;
  state.alignment.converged = converged;
  state.alignment.iteration_costs = std::move(costs);
  return state;
}

}  // namespace

const DiagGaussian& PhoneModelSet::model(const std::string& phone) const {
  auto it = phones.find(phone);
  return it == phones.end() ? global : it->second;
}

double PhoneModelSet::frame_cost(const std::string& phone, std::span<const double> frame) const {
  const DiagGaussian& g = model(phone);
  double cost = 0.0;
  for (std::size_t d = 0; d < frame.size(); ++d) {
    const double diff = frame[d] - g.mean[d];
    cost += std::log(2.0 * std::numbers::pi * g.variance[d]) + diff * diff / g.variance[d];
  }
  return 0.5 * cost;
}

Segmentation flat_segment(std::span<const std::string> phones, std::size_t frame_count, std::size_t min_duration) {
  if (phones.empty()) throw Error(ErrorKind::Invalid, "flat_segment: empty phone sequence");
  if (frame_count < phones.size() * std::max<std::size_t>(min_duration, 1)) {
    throw Error(ErrorKind::Infeasible, "audio too short: " + std::to_string(frame_count) + " frames for " +
                                           std::to_string(phones.size()) + " phones");
  }
  Segmentation seg;
  const std::size_t base = frame_count / phones.size();
  const std::size_t extra = frame_count % phones.size();
  std::size_t start = 0;
  for (std::size_t i = 0; i < phones.size(); ++i) {
    const std::size_t length = base + (i < extra ? 1 : 0);
    seg.segments.push_back({phones[i], start, start + length, 0.0});
    seg.position_segment.push_back(i);
    start += length;
  }
  return seg;
}

PhoneModelSet estimate_models(const FeatureTrack& features, const Segmentation& segmentation, double variance_floor) {
  if (variance_floor <= 0.0) throw Error(ErrorKind::Invalid, "variance floor must be positive");
  PhoneModelSet models;
  models.variance_floor = variance_floor;
  std::vector<std::size_t> all(features.frame_count());
  for (std::size_t f = 0; f < all.size(); ++f) all[f] = f;
  models.global = fit(features, all, variance_floor);

  std::map<std::string, std::vector<std::size_t>> assigned;
  for (const auto& s : segmentation.segments) {
    auto& frames = assigned[s.phone];
    for (std::size_t f = s.start_frame; f < s.end_frame && f < features.frame_count(); ++f) frames.push_back(f);
  }
  for (const auto& [phone, frames] : assigned) {
    if (!frames.empty()) models.phones[phone] = fit(features, frames, variance_floor);
  }
  return models;
}

void score_segmentation(const FeatureTrack& features, const PhoneModelSet& models, Segmentation& segmentation) {
  segmentation.total_cost = 0.0;
  for (auto& s : segmentation.segments) {
    s.cost = 0.0;
    for (std::size_t f = s.start_frame; f < s.end_frame; ++f) {
      const double c = models.frame_cost(s.phone, features.frame(f));
      s.cost += c;
      segmentation.total_cost += c;
    }
  }
}

Segmentation viterbi_segment(const FeatureTrack& features, std::span<const PhoneSlot> slots,
                             const PhoneModelSet& models, std::size_t min_duration) {
  const std::size_t frames = features.frame_count();
  const std::size_t slot_count = slots.size();
  const std::size_t states = std::max<std::size_t>(min_duration, 1);
  if (slot_count == 0) throw Error(ErrorKind::Invalid, "viterbi_segment: empty phone sequence");
  const auto mandatory = static_cast<std::size_t>(
      std::count_if(slots.begin(), slots.end(), [](const PhoneSlot& s) { return !s.optional; }));
  if (frames < mandatory * states || frames == 0) {
    throw Error(ErrorKind::Infeasible, "viterbi_segment: " + std::to_string(frames) + " frames cannot hold " +
                                           std::to_string(mandatory) + " phones of " + std::to_string(states) +
                                           " frames");
  }

  // Frame costs per distinct phone.
  std::map<std::string, std::size_t> phone_ids;
  std::vector<std::size_t> slot_phone(slot_count);
  for (std::size_t k = 0; k < slot_count; ++k) {
    slot_phone[k] = phone_ids.emplace(slots[k].phone, phone_ids.size()).first->second;
  }
  std::vector<double> cost(phone_ids.size() * frames);
  for (const auto& [phone, id] : phone_ids) {
    for (std::size_t t = 0; t < frames; ++t) cost[id * frames + t] = models.frame_cost(phone, features.frame(t));
  }

  // Each phone is a chain of `states` states; the last one self-loops.
  // stay[k][t]: last state of slot k at t was reached by staying.
  // skip[k][t]: entry into slot k at t bypassed optional slot k-1.
  std::vector<bool> stay(slot_count * frames, false);
  std::vector<bool> skip((slot_count + 1) * (frames + 1), false);
  std::vector<double> prev(slot_count * states, kInf);
  std::vector<double> cur(slot_count * states, kInf);
  std::vector<double> enter(slot_count + 1, kInf);

  auto compute_entries = [&](std::size_t t, std::size_t upto) {
    enter[0] = t == 0 ? 0.0 : kInf;
    for (std::size_t k = 1; k <= upto; ++k) {
      const double advance = t > 0 ? prev[(k - 1) * states + states - 1] : kInf;
      const double bypass = slots[k - 1].optional ? enter[k - 1] : kInf;
      if (bypass < advance) {
        enter[k] = bypass;
        skip[k * (frames + 1) + t] = true;
      } else {
        enter[k] = advance;
      }
    }
  };

  for (std::size_t t = 0; t < frames; ++t) {
    compute_entries(t, slot_count - 1);
    for (std::size_t k = 0; k < slot_count; ++k) {
      const double c = cost[slot_phone[k] * frames + t];
      double* s_cur = &cur[k * states];
      const double* s_prev = &prev[k * states];
      if (states == 1) {
        const double stay_value = t > 0 ? s_prev[0] : kInf;
        if (stay_value <= enter[k]) {
          s_cur[0] = stay_value + c;
          stay[k * frames + t] = stay_value < kInf;
        } else {
          s_cur[0] = enter[k] + c;
        }
        continue;
      }
      s_cur[0] = enter[k] + c;
      for (std::size_t j = 1; j + 1 < states; ++j) s_cur[j] = (t > 0 ? s_prev[j - 1] : kInf) + c;
      const double stay_value = t > 0 ? s_prev[states - 1] : kInf;
      const double arrive = t > 0 ? s_prev[states - 2] : kInf;
      if (stay_value <= arrive && stay_value < kInf) {
        s_cur[states - 1] = stay_value + c;
        stay[k * frames + t] = true;
      } else {
        s_cur[states - 1] = arrive + c;
      }
    }
    std::swap(prev, cur);
  }
  compute_entries(frames, slot_count);
  const double best = enter[slot_count];
  if (!(best < kInf)) throw Error(ErrorKind::Infeasible, "viterbi_segment: no feasible segmentation");

  // Backtrace.
  Segmentation seg;
  seg.position_segment.assign(slot_count, kSkipped);
  std::vector<PhoneSegment> reversed;
  std::vector<std::size_t> reversed_slot;
  std::size_t k = slot_count;
  std::size_t t = frames;
  while (true) {
    while (k > 0 && skip[k * (frames + 1) + t]) --k;  // bypassed optional slots
    if (k == 0) break;
    --k;  // slot k ends at frame t - 1
    std::size_t end = t;
    std::size_t last = t - 1;
    while (stay[k * frames + last]) --last;
    const std::size_t start = last + 1 - states;
    reversed.push_back({slots[k].phone, start, end, 0.0});
    reversed_slot.push_back(k);
    t = start;
    if (k == 0) break;
  }
  for (std::size_t i = reversed.size(); i-- > 0;) {
    seg.position_segment[reversed_slot[i]] = seg.segments.size();
    seg.segments.push_back(std::move(reversed[i]));
  }
  score_segmentation(features, models, seg);
  return seg;
}

Segmentation viterbi_segment(const FeatureTrack& features, std::span<const std::string> phones,
                             const PhoneModelSet& models, std::size_t min_duration) {
  std::vector<PhoneSlot> slots;
  slots.reserve(phones.size());
  for (const auto& p : phones) slots.push_back({p, false});
  return viterbi_segment(features, slots, models, min_duration);
}

std::size_t snap_to_silence(std::size_t boundary_frame, const std::vector<bool>& vad_mask, std::size_t window_frames) {
  const std::size_t n = vad_mask.size();
  if (boundary_frame >= n) return boundary_frame;
  if (!vad_mask[boundary_frame]) return boundary_frame;
  for (std::size_t d = 1; d <= window_frames; ++d) {
    if (d <= boundary_frame && !vad_mask[boundary_frame - d]) return boundary_frame - d;
    if (boundary_frame + d < n && !vad_mask[boundary_frame + d]) return boundary_frame + d;
  }
  return boundary_frame;
}

ChapterAlignment align_chapter(const AudioClip& audio, std::span<const Verse> verses, const G2pTable& table,
                               const AlignerConfig& config) {
  return run_chapter(audio, verses, table, config).alignment;
}

std::vector<ChapterAlignment> align_corpus(std::span<const ChapterInput> chapters, const G2pTable& table,
                                           const AlignerConfig& config, bool pool_models, unsigned jobs) {
  std::vector<ChapterState> states(chapters.size());
  parallel_for(chapters.size(), jobs, [&](std::size_t i) {
    states[i] = run_chapter(*chapters[i].audio, chapters[i].verses, table, config);
  });

  std::vector<ChapterAlignment> out;
  if (!pool_models || chapters.empty()) {
    for (auto& s : states) out.push_back(std::move(s.alignment));
    return out;
  }

  // Pool statistics over all chapters by concatenating tracks.
  FeatureTrack pooled;
  Segmentation pooled_seg;
  for (const auto& s : states) {
    const std::size_t offset = pooled.frame_count();
    pooled.dim = s.features.dim;
    pooled.values.insert(pooled.values.end(), s.features.values.begin(), s.features.values.end());
    for (auto segment : s.alignment.segmentation.segments) {
      segment.start_frame += offset;
      segment.end_frame += offset;
      pooled_seg.segments.push_back(std::move(segment));
    }
  }
  const PhoneModelSet models = estimate_models(pooled, pooled_seg, config.variance_floor);

  out.resize(chapters.size());
  parallel_for(chapters.size(), jobs, [&](std::size_t i) {
    ChapterState& s = states[i];
    Segmentation seg = viterbi_segment(s.features, s.plan.slots, models, config.min_duration);
    auto costs = s.alignment.iteration_costs;
    costs.push_back(seg.total_cost);
    out[i] = build_utterances(*chapters[i].audio, s.features, chapters[i].verses, s.plan, std::move(seg), config);
    out[i].iterations = s.alignment.iterations + 1;
    out[i].converged = s.alignment.converged;
    out[i].iteration_costs = std::move(costs);
  });
  return out;
}

ChapterAlignment filter_by_score(const ChapterAlignment& alignment, double keep_fraction) {
  if (!(keep_fraction > 0.0 && keep_fraction <= 1.0)) {
    throw Error(ErrorKind::Invalid, "keep fraction must be in (0, 1]");
  }
  const std::size_t n = alignment.utterances.size();
  const auto keep = std::min(n, static_cast<std::size_t>(std::ceil(static_cast<double>(n) * keep_fraction - 1e-9)));
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return alignment.utterances[a].score < alignment.utterances[b].score;
  });
  order.resize(keep);
  std::sort(order.begin(), order.end());

  ChapterAlignment out = alignment;
  out.utterances.clear();
  for (std::size_t i : order) out.utterances.push_back(alignment.utterances[i]);
  return out;
}

}  // namespace vc
