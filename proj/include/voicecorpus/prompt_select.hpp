#pragma once

#include <cstddef>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "voicecorpus/textnorm.hpp"

namespace vc {

// Diphone label "a-b"; word and utterance edges use kWordBoundary ("#-a").
std::string diphone_label(std::string_view left, std::string_view right);

// Adjacent pairs of `phones`. With `include_edges`, the sequence is padded
// with a boundary marker at both ends first.
std::vector<std::string> diphones_of(const std::vector<std::string>& phones, bool include_edges);

struct CandidateUtterance {
  std::string id;
  std::string text;
  std::vector<std::string> phones;    // g2p output incl. word-boundary markers
  std::vector<std::string> diphones;  // multiset, in order
  std::size_t phone_count = 0;        // duration proxy (markers excluded)
};

// Throws Error{Invalid} when the text yields no phones.
CandidateUtterance extract_units(std::string id, std::string_view text, const G2pTable& table);

struct SelectionResult {
  std::vector<std::string> selected_ids;
  std::set<std::string> covered;
  std::size_t pool_types = 0;
  double coverage_ratio = 0.0;
  std::vector<std::size_t> marginal_gains;  // new diphone types per pick
  std::vector<double> coverage_after_step;
  bool shortfall = false;  // target exceeded the candidate count
};

inline constexpr std::size_t kDefaultPromptCount = 1500;
inline constexpr double kDefaultLengthPenalty = 0.5;

// Greedy coverage: repeatedly take the candidate maximising
// new_types / phone_count^alpha (ties: fewer phones, then smaller id). Once
// no candidate adds a new type, the remainder is filled shortest-first.
SelectionResult select_prompts(const std::vector<CandidateUtterance>& candidates,
                               std::size_t target_count = kDefaultPromptCount,
                               double length_penalty_alpha = kDefaultLengthPenalty);

struct CoverageReport {
  std::size_t pool_types = 0;
  std::size_t covered_types = 0;
  double coverage_ratio = 0.0;
  std::vector<std::string> missing;  // sorted
  std::size_t phone_total = 0;       // duration proxy of the selection
  std::size_t selected = 0;
};

CoverageReport coverage_report(const std::vector<std::string>& selected_ids,
                               const std::vector<CandidateUtterance>& candidates);

}  // namespace vc
