#include <algorithm>
#include <cmath>
#include <map>
#include <queue>

#include "voicecorpus/prompt_select.hpp"

namespace vc {
namespace {

std::set<std::string> type_set(const CandidateUtterance& c) { return {c.diphones.begin(), c.diphones.end()}; }

struct HeapEntry {
  double score;
  std::size_t phones;
  const std::string* id;
  std::size_t index;
};

// True when `a` ranks below `b` (priority_queue keeps the maximum on top).
struct RanksBelow {
  bool operator()(const HeapEntry& a, const HeapEntry& b) const {
    if (a.score != b.score) return a.score < b.score;
    if (a.phones != b.phones) return a.phones > b.phones;
    return *a.id > *b.id;
  }
};

}  // namespace

std::string diphone_label(std::string_view left, std::string_view right) {
  std::string label;
  label.reserve(left.size() + right.size() + 1);
  label.append(left).push_back('-');
  label.append(right);
  return label;
}

std::vector<std::string> diphones_of(const std::vector<std::string>& phones, bool include_edges) {
  std::vector<std::string> seq;
  seq.reserve(phones.size() + 2);
  if (include_edges) seq.emplace_back(kWordBoundary);
  seq.insert(seq.end(), phones.begin(), phones.end());
  if (include_edges) seq.emplace_back(kWordBoundary);
  std::vector<std::string> out;
  for (std::size_t i = 0; i + 1 < seq.size(); ++i) out.push_back(diphone_label(seq[i], seq[i + 1]));
  return out;
}

CandidateUtterance extract_units(std::string id, std::string_view text, const G2pTable& table) {
  CandidateUtterance c;
  c.id = std::move(id);
  c.text = std::string(text);
  c.phones = g2p(text, table);
  c.phone_count = static_cast<std::size_t>(std::count_if(c.phones.begin(), c.phones.end(),
                                                          [](const std::string& p) { return p != kWordBoundary; }));
  if (c.phone_count == 0) throw Error(ErrorKind::Invalid, "candidate " + c.id + " has no phones after normalization");
  c.diphones = diphones_of(c.phones, true);
  return c;
}

SelectionResult select_prompts(const std::vector<CandidateUtterance>& candidates, std::size_t target_count,
                               double length_penalty_alpha) {
  if (target_count < 1) throw Error(ErrorKind::Invalid, "select_prompts: target count must be at least 1");
  if (candidates.empty()) throw Error(ErrorKind::Invalid, "select_prompts: empty candidate pool");

  std::vector<std::set<std::string>> types(candidates.size());
  std::set<std::string> pool;
  std::set<std::string> seen_ids;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (!seen_ids.insert(candidates[i].id).second) {
      throw Error(ErrorKind::Invalid, "duplicate candidate id " + candidates[i].id);
    }
    types[i] = type_set(candidates[i]);
    pool.insert(types[i].begin(), types[i].end());
  }

  SelectionResult result;
  result.pool_types = pool.size();
  result.shortfall = target_count > candidates.size();
  const std::size_t target = std::min(target_count, candidates.size());

  auto gain_of = [&](std::size_t i) {
    return static_cast<std::size_t>(std::count_if(types[i].begin(), types[i].end(),
                                                  [&](const std::string& t) { return !result.covered.contains(t); }));
  };
  auto score_of = [&](std::size_t gain, std::size_t i) {
    const auto length = static_cast<double>(std::max<std::size_t>(candidates[i].phone_count, 1));
    return static_cast<double>(gain) / std::pow(length, length_penalty_alpha);
  };
  auto take = [&](std::size_t i, std::size_t gain) {
    result.selected_ids.push_back(candidates[i].id);
    result.covered.insert(types[i].begin(), types[i].end());
    result.marginal_gains.push_back(gain);
    result.coverage_after_step.push_back(
        pool.empty() ? 0.0 : static_cast<double>(result.covered.size()) / static_cast<double>(pool.size()));
  };

  // Lazy greedy: stored scores are upper bounds because gains only shrink.
  std::priority_queue<HeapEntry, std::vector<HeapEntry>, RanksBelow> heap;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    heap.push({score_of(types[i].size(), i), candidates[i].phone_count, &candidates[i].id, i});
  }
  std::vector<std::size_t> remaining;
  while (result.selected_ids.size() < target && !heap.empty()) {
    HeapEntry top = heap.top();
    heap.pop();
    const std::size_t gain = gain_of(top.index);
    const double fresh = score_of(gain, top.index);
    if (gain == 0) {
      remaining.push_back(top.index);
      continue;
    }
    if (fresh == top.score) {
      take(top.index, gain);
    } else {
      top.score = fresh;
      heap.push(top);
    }
  }

  // No candidate adds coverage any more: fill shortest-first.
  while (!heap.empty()) {
    remaining.push_back(heap.top().index);
    heap.pop();
  }
  std::sort(remaining.begin(), remaining.end(), [&](std::size_t a, std::size_t b) {
    if (candidates[a].phone_count != candidates[b].phone_count) {
      return candidates[a].phone_count < candidates[b].phone_count;
    }
    return candidates[a].id < candidates[b].id;
  });
  for (std::size_t i : remaining) {
    if (result.selected_ids.size() >= target) break;
    take(i, 0);
  }

  result.coverage_ratio =
      pool.empty() ? 0.0 : static_cast<double>(result.covered.size()) / static_cast<double>(pool.size());
  return result;
}

CoverageReport coverage_report(const std::vector<std::string>& selected_ids,
                               const std::vector<CandidateUtterance>& candidates) {
  std::map<std::string, const CandidateUtterance*> by_id;
  std::set<std::string> pool;
  for (const auto& c : candidates) {
    by_id.emplace(c.id, &c);
    pool.insert(c.diphones.begin(), c.diphones.end());
  }
  CoverageReport report;
  report.pool_types = pool.size();
  std::set<std::string> covered;
  for (const auto& id : selected_ids) {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw Error(ErrorKind::NotFound, "selected id " + id + " is not in the candidate pool");
    covered.insert(it->second->diphones.begin(), it->second->diphones.end());
    report.phone_total += it->second->phone_count;
  }
  report.selected = selected_ids.size();
  report.covered_types = covered.size();
  report.coverage_ratio =
      pool.empty() ? 0.0 : static_cast<double>(covered.size()) / static_cast<double>(pool.size());
  std::set_difference(pool.begin(), pool.end(), covered.begin(), covered.end(), std::back_inserter(report.missing));
  return report;
}

}  // namespace vc
