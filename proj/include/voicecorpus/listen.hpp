#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace vc::listen {

using nlohmann::json;

inline constexpr const char* kPreferenceInstructions =
    "Listen to the two audio clips below and select the one you prefer.";
inline constexpr const char* kTranscriptionInstructions = "Listen to the audio clip below and type what you hear.";

enum class CampaignType { Preference, Transcription };

struct SystemClip {
  std::string label;
  std::string audio;  // relative to the audio directory
};

struct CampaignItem {
  std::string id;
  std::vector<SystemClip> systems;  // preference: exactly two
  std::string audio;                // transcription
  std::string reference;            // transcription, never served
};

struct Campaign {
  std::string id;
  CampaignType type = CampaignType::Preference;
  std::string instructions;
  std::uint64_t seed = 0;
  std::vector<CampaignItem> items;
  bool open = true;
};

struct Task {
  std::string id;
  std::string campaign;
  std::size_t item = 0;
  std::string session;
  bool first_shown_as_a = true;
  std::size_t ordinal = 0;  // position in the session's sequence
  std::string issued;
  std::optional<std::string> answer;  // "A", "B", "same" or a transcription
  std::string received;
};

// Campaign state persisted as one append-only JSON-lines file
// (`events.jsonl` in the data directory). Opening a store replays it; a
// trailing partial line left by a crash is discarded.
class ListenStore {
 public:
  using Clock = std::function<std::string()>;

  // `audio_dir` is where campaign audio references must exist; empty skips
  // the check. `clock` stamps records (UTC ISO-8601 by default).
  explicit ListenStore(std::filesystem::path data_dir, std::filesystem::path audio_dir = {}, Clock clock = {});
  ~ListenStore();
  ListenStore(const ListenStore&) = delete;
  ListenStore& operator=(const ListenStore&) = delete;

  // Returns the campaign id. Error{Invalid} lists every field problem;
  // Error{Conflict} for an id already in use.
  std::string create_campaign(const json& definition);
  void close_campaign(const std::string& campaign_id);

  // Task view for the evaluator (no system labels, no reference text), or
  // {"done": true, ...} once the session has seen every item. An unanswered
  // task is re-issued unchanged.
  json next_task(const std::string& campaign_id, const std::string& session);

  // body: {"task": id, "session": s, "answer": ...}. Preference answers are
  // "A", "B", "same" or "No difference". Error{NotFound} unknown task,
  // Error{Domain} wrong answer type, Error{Conflict} already answered.
  json submit_response(const json& body);

  json results(const std::string& campaign_id) const;
  json campaign_view(const std::string& campaign_id) const;
  json list_campaigns() const;

  // Integrity findings: responses without a task, tasks pointing at unknown
  // campaigns or items. Empty when consistent.
  std::vector<std::string> audit() const;

  const std::filesystem::path& events_path() const noexcept { return events_path_; }

 private:
  struct SessionState {
    std::set<std::size_t> issued_items;
    std::optional<std::string> outstanding;
    std::size_t answered = 0;
  };
  struct CampaignState {
    Campaign campaign;
    std::map<std::string, SessionState> sessions;
    std::vector<std::string> tasks;  // in issue order
  };

  void replay();
  void apply(const json& record, std::size_t line_no);
  void append(const json& record);
  json task_view(const CampaignState& state, const Task& task) const;
  Campaign parse_definition(const json& definition) const;
  CampaignState& campaign_state(const std::string& id);
  const CampaignState& campaign_state(const std::string& id) const;

  std::filesystem::path data_dir_;
  std::filesystem::path audio_dir_;
  std::filesystem::path events_path_;
  Clock clock_;
  std::ofstream out_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, CampaignState> campaigns_;
  std::vector<std::string> campaign_order_;
  std::map<std::string, Task> tasks_;
  std::vector<std::string> orphans_;
};

json campaign_to_json(const Campaign& campaign);
Campaign campaign_from_json(const json& j);

struct ServerConfig {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::filesystem::path audio_dir;
  std::filesystem::path static_dir;  // optional evaluator UI assets
};

// HTTP front end:
//   POST /campaigns                  create (JSON definition)
//   GET  /campaigns                  list
//   GET  /campaigns/{id}             summary
//   POST /campaigns/{id}/close
//   GET  /campaigns/{id}/next?session=...
//   POST /responses
//   GET  /campaigns/{id}/results
//   GET  /audio/{ref}                audio files, byte ranges supported
class ListenServer {
 public:
  ListenServer(ListenStore& store, ServerConfig config);
  ~ListenServer();

  // Binds and serves on a background thread; returns the bound port.
  int start();
  // Binds and serves on the calling thread until stop().
  void run();
  void stop();
  int port() const noexcept { return port_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int port_ = 0;
};

// Host/port/data/audio settings from VC_LISTEN_HOST, VC_LISTEN_PORT,
// VC_DATA_DIR and VC_AUDIO_DIR, on top of `base`.
ServerConfig config_from_environment(ServerConfig base, std::filesystem::path* data_dir);

}  // namespace vc::listen
