#include <fstream>

#include <doctest.h>
#include <httplib.h>

#include "helpers.hpp"
#include "voicecorpus/error.hpp"
#include "voicecorpus/listen.hpp"

using namespace vc;
using namespace vc::listen;

namespace {

ListenStore::Clock fixed_clock() {
  return [n = 0]() mutable { return "2024-01-01T00:00:" + std::to_string(10 + n++) + "Z"; };
}

json preference_definition(std::size_t items, const std::string& id = "pref") {
  json def = {{"id", id}, {"type", "preference"}, {"seed", 7}, {"items", json::array()}};
  for (std::size_t i = 0; i < items; ++i) {
    const std::string n = std::to_string(i);
    def["items"].push_back({{"id", "i" + n},
                            {"systems", {{{"label", "Found"}, {"audio", "found/" + n + ".wav"}},
                                         {{"label", "Created"}, {"audio", "created/" + n + ".wav"}}}}});
  }
  return def;
}

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error thrown");
  return ErrorKind::Io;
}

}  // namespace

TEST_CASE("campaign creation") {
  testing::TempDir dir("listen");
  ListenStore store(dir.path(), {}, fixed_clock());
  CHECK(store.create_campaign(preference_definition(20)) == "pref");
  CHECK(store.campaign_view("pref")["items"].size() == 20);
  CHECK(store.campaign_view("pref")["instructions"] == kPreferenceInstructions);
  CHECK(kind_of([&] { store.create_campaign(preference_definition(2)); }) == ErrorKind::Conflict);

  json same = preference_definition(1, "same");
  same["items"][0]["systems"][1]["label"] = "Found";
  CHECK(kind_of([&] { store.create_campaign(same); }) == ErrorKind::Invalid);
  json dup = preference_definition(2, "dup");
  dup["items"][1]["id"] = "i0";
  CHECK(kind_of([&] { store.create_campaign(dup); }) == ErrorKind::Invalid);
  json unnamed = preference_definition(1);
  unnamed.erase("id");
  CHECK(store.create_campaign(unnamed) == "campaign-2");
}

TEST_CASE("audio references are checked against the audio directory") {
  testing::TempDir dir("listen");
  std::filesystem::create_directories(dir / "audio" / "found");
  std::ofstream(dir / "audio" / "found" / "0.wav") << "x";
  ListenStore store(dir / "data", dir / "audio", fixed_clock());
  try {
    store.create_campaign(preference_definition(1));
    FAIL("expected invalid");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Invalid);
    CHECK(std::string(e.what()).find("created/0.wav") != std::string::npos);
  }
}

TEST_CASE("task flow") {
  testing::TempDir dir("listen");
  ListenStore store(dir.path(), {}, fixed_clock());
  store.create_campaign(preference_definition(4));
  std::set<std::string> seen;
  for (int k = 0; k < 4; ++k) {
    const json t = store.next_task("pref", "s1");
    CHECK(t["done"] == false);
    CHECK(store.next_task("pref", "s1") == t);
    CHECK(t["clips"][0]["label"] == "A");
    CHECK(t.dump().find("Created") == std::string::npos);
    seen.insert(t["task"].get<std::string>());
    CHECK(store.submit_response({{"task", t["task"]}, {"session", "s1"}, {"answer", "No difference"}})["answer"] ==
          "same");
  }
  CHECK(seen.size() == 4);
  CHECK(store.next_task("pref", "s1")["done"] == true);
  const json r = store.results("pref");
  CHECK(r["same"] == 4);
  CHECK(r["winner"].is_null());
}

TEST_CASE("response errors") {
  testing::TempDir dir("listen");
  ListenStore store(dir.path(), {}, fixed_clock());
  store.create_campaign(preference_definition(2));
  const json t = store.next_task("pref", "s1");
  CHECK(kind_of([&] { store.submit_response({{"task", "nope"}, {"answer", "A"}}); }) == ErrorKind::NotFound);
  CHECK(kind_of([&] { store.submit_response({{"task", t["task"]}, {"answer", "kawuono"}}); }) == ErrorKind::Domain);
  store.submit_response({{"task", t["task"]}, {"answer", "A"}});
  const auto size = std::filesystem::file_size(store.events_path());
  CHECK(kind_of([&] { store.submit_response({{"task", t["task"]}, {"answer", "B"}}); }) == ErrorKind::Conflict);
  CHECK(std::filesystem::file_size(store.events_path()) == size);
  CHECK(kind_of([&] { store.next_task("missing", "s1"); }) == ErrorKind::NotFound);
  store.close_campaign("pref");
  CHECK(kind_of([&] { store.next_task("pref", "s2"); }) == ErrorKind::Conflict);
}

TEST_CASE("transcription results") {
  testing::TempDir dir("listen");
  ListenStore store(dir.path(), {}, fixed_clock());
  json def = {{"id", "tr"}, {"type", "transcription"}, {"items", json::array()}};
  const std::vector<std::string> refs{"kawuono ni", "dwe", "piny"};
  for (std::size_t i = 0; i < refs.size(); ++i) {
    def["items"].push_back({{"id", "t" + std::to_string(i)}, {"audio", std::to_string(i) + ".wav"}, {"reference", refs[i]}});
  }
  store.create_campaign(def);
  CHECK(store.results("tr")["mean_cer"].is_null());
  for (int k = 0; k < 3; ++k) {
    const json t = store.next_task("tr", "s");
    CHECK(t.dump().find("reference") == std::string::npos);
    const std::string url = t["clips"][0]["url"].get<std::string>();
    const std::string answer = refs[static_cast<std::size_t>(url[std::string("/audio/").size()] - '0')];
    store.submit_response({{"task", t["task"]}, {"answer", answer}});
  }
  CHECK(store.results("tr")["mean_cer"] == 0.0);
  const json pt = store.next_task("tr", "other");
  CHECK(store.submit_response({{"task", pt["task"]}, {"answer", "dwe"}})["ok"] == true);
}

TEST_CASE("replay after restart, including a torn last line") {
  testing::TempDir dir("listen");
  json before;
  {
    ListenStore store(dir.path(), {}, fixed_clock());
    store.create_campaign(preference_definition(3));
    for (const char* s : {"s1", "s2"}) {
      for (int k = 0; k < 3; ++k) {
        const json t = store.next_task("pref", s);
        store.submit_response({{"task", t["task"]}, {"answer", k == 1 ? "B" : "A"}});
      }
    }
    before = store.results("pref");
  }
  {
    std::ofstream torn(dir / "events.jsonl", std::ios::app);
    torn << R"({"type":"respo)";
  }
  ListenStore again(dir.path(), {}, fixed_clock());
  CHECK(again.results("pref").dump() == before.dump());
  CHECK(again.audit().empty());
  CHECK(again.next_task("pref", "s1")["done"] == true);
}

TEST_CASE("http api") {
  testing::TempDir dir("listen");
  std::filesystem::create_directories(dir / "audio");
  {
    std::ofstream(dir / "audio" / "x.wav") << "RIFF0000";
  }
  ListenStore store(dir / "data", {}, fixed_clock());
  ServerConfig cfg;
  cfg.port = 0;
  cfg.audio_dir = dir / "audio";
  ListenServer server(store, cfg);
  const int port = server.start();
  httplib::Client cli("127.0.0.1", port);

  auto created = cli.Post("/campaigns", preference_definition(3).dump(), "application/json");
  REQUIRE(created);
  CHECK(created->status == 201);
  CHECK(cli.Post("/campaigns", preference_definition(3).dump(), "application/json")->status == 409);
  CHECK(cli.Post("/campaigns", "{not json", "application/json")->status == 400);
  CHECK(cli.Post("/campaigns", R"({"type":"preference","items":[]})", "application/json")->status == 400);
  CHECK(cli.Get("/campaigns/unknown")->status == 404);

  const std::vector<std::string> answers{"A", "B", "No difference"};
  for (int k = 0; k < 3; ++k) {
    auto next = cli.Get("/campaigns/pref/next?session=web");
    REQUIRE(next);
    CHECK(next->status == 200);
    const json t = json::parse(next->body);
    CHECK(t["instructions"] == "Listen to the two audio clips below and select the one you prefer.");
    const json body = {{"task", t["task"]}, {"session", "web"}, {"answer", answers[k]}};
    CHECK(cli.Post("/responses", body.dump(), "application/json")->status == 200);
    CHECK(cli.Post("/responses", body.dump(), "application/json")->status == 409);
  }
  CHECK(json::parse(cli.Get("/campaigns/pref/next?session=web")->body)["done"] == true);
  const json t2 = json::parse(cli.Get("/campaigns/pref/next?session=other")->body);
  const json bad = {{"task", t2["task"]}, {"answer", "maybe"}};
  CHECK(cli.Post("/responses", bad.dump(), "application/json")->status == 422);

  const json results = json::parse(cli.Get("/campaigns/pref/results")->body);
  CHECK(results["responses"] == 3);
  CHECK(results["same"] == 1);
  CHECK(json::parse(cli.Get("/campaigns")->body).size() == 1);
  CHECK(cli.Get("/audio/x.wav")->body == "RIFF0000");
  CHECK(cli.Post("/campaigns/pref/close")->status == 200);
  CHECK(cli.Get("/campaigns/pref/next?session=late")->status == 409);
  server.stop();
}
