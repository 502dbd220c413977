#include <algorithm>
#include <random>
#include <set>

#include <doctest.h>

#include "voicecorpus/prompt_select.hpp"

using namespace vc;

namespace {

const G2pTable kPlain("xx", {});

CandidateUtterance make(const std::string& id, const std::string& text) { return extract_units(id, text, kPlain); }

std::string random_text(std::mt19937_64& rng, std::size_t max_words) {
  const std::string letters = "abdeiklmo";
  std::string s;
  for (std::size_t w = 0, n = 1 + rng() % max_words; w < n; ++w) {
    if (w) s += ' ';
    for (std::size_t c = 0, m = 1 + rng() % 4; c < m; ++c) s += letters[rng() % letters.size()];
  }
  return s;
}

}  // namespace

TEST_CASE("diphones_of") {
  const std::vector<std::string> aba{"a", "b", "a"};
  CHECK(diphones_of(aba, false) == std::vector<std::string>{"a-b", "b-a"});
  CHECK(diphones_of(aba, true) == std::vector<std::string>{"#-a", "a-b", "b-a", "a-#"});
  CHECK(diphones_of({"a"}, true) == std::vector<std::string>{"#-a", "a-#"});
  CHECK(diphones_of({"a"}, false).empty());
}

TEST_CASE("extract_units matches a pairwise scan") {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 100; ++t) {
    const CandidateUtterance c = make("c", random_text(rng, 4));
    std::vector<std::string> padded{"#"};
    padded.insert(padded.end(), c.phones.begin(), c.phones.end());
    padded.push_back("#");
    std::vector<std::string> expect;
    for (std::size_t i = 0; i + 1 < padded.size(); ++i) expect.push_back(padded[i] + "-" + padded[i + 1]);
    CHECK(c.diphones == expect);
    CHECK(c.phone_count == strip_boundaries(c.phones).size());
  }
  CHECK_THROWS_AS(make("e", "   "), Error);
}

TEST_CASE("dominant candidate is picked first") {
  std::vector<CandidateUtterance> pool{make("x", "ab"), make("y", "abdeab ba ed de"), make("z", "de")};
  const SelectionResult r = select_prompts(pool, 1, 0.0);
  CHECK(r.selected_ids == std::vector<std::string>{"y"});
}

TEST_CASE("selection bookkeeping") {
  std::mt19937_64 rng(2);
  std::vector<CandidateUtterance> pool;
  for (int i = 0; i < 30; ++i) pool.push_back(make("c" + std::to_string(100 + i), random_text(rng, 5)));
  const SelectionResult r = select_prompts(pool, 10);
  CHECK(r.selected_ids.size() == 10);
  CHECK(std::set<std::string>(r.selected_ids.begin(), r.selected_ids.end()).size() == 10);
  CHECK(r.marginal_gains.size() == 10);
  CHECK(std::is_sorted(r.coverage_after_step.begin(), r.coverage_after_step.end()));
  CHECK(select_prompts(pool, 10).selected_ids == r.selected_ids);

  const SelectionResult all = select_prompts(pool, 40);
  CHECK(all.shortfall);
  CHECK(all.selected_ids.size() == 30);
  CHECK(all.coverage_ratio == 1.0);
}

TEST_CASE("coverage_report") {
  std::mt19937_64 rng(4);
  std::vector<CandidateUtterance> pool;
  for (int i = 0; i < 12; ++i) pool.push_back(make("c" + std::to_string(i), random_text(rng, 3)));
  std::vector<std::string> every;
  for (const auto& c : pool) every.push_back(c.id);
  CHECK(coverage_report(every, pool).missing.empty());
  CHECK(coverage_report({}, pool).coverage_ratio == 0.0);

  std::set<std::string> universe;
  for (const auto& c : pool) universe.insert(c.diphones.begin(), c.diphones.end());
  for (int t = 0; t < 20; ++t) {
    std::vector<std::string> pick;
    std::set<std::string> have;
    std::size_t phones = 0;
    for (const auto& c : pool) {
      if (rng() % 2) {
        pick.push_back(c.id);
        have.insert(c.diphones.begin(), c.diphones.end());
        phones += c.phone_count;
      }
    }
    const CoverageReport rep = coverage_report(pick, pool);
    CHECK(rep.pool_types == universe.size());
    CHECK(rep.covered_types == have.size());
    CHECK(rep.phone_total == phones);
    CHECK(rep.missing.size() == universe.size() - have.size());
  }
}
