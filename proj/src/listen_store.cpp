#include <algorithm>
#include <cctype>
#include <chrono>
#include <ctime>
#include <mutex>
#include <sstream>

#include "voicecorpus/corpus.hpp"
#include "voicecorpus/error.hpp"
#include "voicecorpus/evalkit.hpp"
#include "voicecorpus/listen.hpp"

namespace vc::listen {
namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  char out[48];
  std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms));
  return out;
}

std::string url_path(std::string_view ref) {
  static const char* hex = "0123456789ABCDEF";
  std::string out = "/audio/";
  for (unsigned char c : ref) {
    if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~' || c == '/') {
      out.push_back(static_cast<char>(c));
    } else {
      out.push_back('%');
      out.push_back(hex[c >> 4]);
      out.push_back(hex[c & 15]);
    }
  }
  return out;
}

std::string trim_lower(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  s = s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

const char* type_name(CampaignType t) { return t == CampaignType::Preference ? "preference" : "transcription"; }

json nullable(std::optional<double> v) { return v ? json(*v) : json(nullptr); }

struct CerMean {
  double strict = 0.0;
  double lenient = 0.0;
  std::size_t n = 0;

  void add(double s, double l) {
    strict += s;
    lenient += l;
    ++n;
  }
  json to_json(json base) const {
    base["responses"] = n;
    base["mean_cer"] = nullable(n ? std::optional(strict / static_cast<double>(n)) : std::nullopt);
    base["mean_cer_lenient"] = nullable(n ? std::optional(lenient / static_cast<double>(n)) : std::nullopt);
    return base;
  }
};

}  // namespace

json campaign_to_json(const Campaign& c) {
  json items = json::array();
  for (const auto& item : c.items) {
    json j = {{"id", item.id}};
    if (c.type == CampaignType::Preference) {
      j["systems"] = json::array();
      for (const auto& s : item.systems) j["systems"].push_back({{"label", s.label}, {"audio", s.audio}});
    } else {
      j["audio"] = item.audio;
      j["reference"] = item.reference;
    }
    items.push_back(std::move(j));
  }
  return {{"id", c.id},
          {"type", type_name(c.type)},
          {"instructions", c.instructions},
          {"seed", c.seed},
          {"items", std::move(items)}};
}

Campaign campaign_from_json(const json& j) {
  Campaign c;
  c.id = j.at("id").get<std::string>();
  c.type = j.at("type").get<std::string>() == "preference" ? CampaignType::Preference : CampaignType::Transcription;
  c.instructions = j.at("instructions").get<std::string>();
  c.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& ji : j.at("items")) {
    CampaignItem item;
    item.id = ji.at("id").get<std::string>();
    if (c.type == CampaignType::Preference) {
      for (const auto& s : ji.at("systems")) item.systems.push_back({s.at("label"), s.at("audio")});
    } else {
      item.audio = ji.at("audio").get<std::string>();
      item.reference = ji.at("reference").get<std::string>();
    }
    c.items.push_back(std::move(item));
  }
  return c;
}

ListenStore::ListenStore(std::filesystem::path data_dir, std::filesystem::path audio_dir, Clock clock)
    : data_dir_(std::move(data_dir)),
      audio_dir_(std::move(audio_dir)),
      events_path_(data_dir_ / "events.jsonl"),
      clock_(clock ? std::move(clock) : Clock(utc_now)) {
  std::error_code ec;
  std::filesystem::create_directories(data_dir_, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create data directory " + data_dir_.string() + ": " + ec.message());
  replay();
  out_.open(events_path_, std::ios::app | std::ios::binary);
  if (!out_) throw Error(ErrorKind::Io, "cannot open " + events_path_.string() + " for appending");
}

ListenStore::~ListenStore() = default;

void ListenStore::replay() {
  std::ifstream in(events_path_, std::ios::binary);
  if (!in) return;
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();
  const std::size_t complete = content.rfind('\n') == std::string::npos ? 0 : content.rfind('\n') + 1;
  if (complete < content.size()) std::filesystem::resize_file(events_path_, complete);

  std::size_t begin = 0;
  std::size_t line_no = 0;
  while (begin < complete) {
    const std::size_t end = content.find('\n', begin);
    ++line_no;
    const std::string_view line(content.data() + begin, end - begin);
    begin = end + 1;
    if (line.empty()) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::exception& e) {
      throw Error(ErrorKind::Format, events_path_.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    apply(record, line_no);
  }
}

void ListenStore::apply(const json& record, std::size_t line_no) {
  const std::string where = events_path_.string() + ":" + std::to_string(line_no);
  try {
    const std::string type = record.at("type").get<std::string>();
    if (type == "campaign") {
      Campaign c = campaign_from_json(record.at("campaign"));
      const std::string id = c.id;
      campaigns_[id].campaign = std::move(c);
      campaign_order_.push_back(id);
    } else if (type == "close") {
      auto it = campaigns_.find(record.at("campaign").get<std::string>());
      if (it == campaigns_.end()) orphans_.push_back(where + ": close of unknown campaign");
      else it->second.campaign.open = false;
    } else if (type == "task") {
      Task t;
      t.id = record.at("task").get<std::string>();
      t.campaign = record.at("campaign").get<std::string>();
      t.session = record.at("session").get<std::string>();
      t.first_shown_as_a = record.at("first_shown_as_a").get<bool>();
      t.ordinal = record.at("ordinal").get<std::size_t>();
      t.issued = record.at("issued").get<std::string>();
      auto it = campaigns_.find(t.campaign);
      if (it == campaigns_.end()) {
        orphans_.push_back(where + ": task " + t.id + " references unknown campaign " + t.campaign);
        return;
      }
      const std::string item_id = record.at("item").get<std::string>();
      const auto& items = it->second.campaign.items;
      auto item = std::find_if(items.begin(), items.end(), [&](const CampaignItem& x) { return x.id == item_id; });
      if (item == items.end()) {
        orphans_.push_back(where + ": task " + t.id + " references unknown item " + item_id);
        return;
      }
      t.item = static_cast<std::size_t>(item - items.begin());
      SessionState& ss = it->second.sessions[t.session];
      ss.issued_items.insert(t.item);
      ss.outstanding = t.id;
      it->second.tasks.push_back(t.id);
      tasks_[t.id] = std::move(t);
    } else if (type == "response") {
      const std::string task_id = record.at("task").get<std::string>();
      auto it = tasks_.find(task_id);
      if (it == tasks_.end() || it->second.answer) {
        orphans_.push_back(where + ": response for " + (it == tasks_.end() ? "unknown" : "already answered") +
                           " task " + task_id);
        return;
      }
      Task& t = it->second;
      t.answer = record.at("answer").get<std::string>();
      t.received = record.at("received").get<std::string>();
      SessionState& ss = campaigns_.at(t.campaign).sessions[t.session];
      if (ss.outstanding == t.id) ss.outstanding.reset();
      ++ss.answered;
    } else {
      throw Error(ErrorKind::Format, where + ": unknown record type " + type);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Format, where + ": " + e.what());
  }
}

void ListenStore::append(const json& record) {
  out_ << record.dump() << '\n';
  out_.flush();
  if (!out_) throw Error(ErrorKind::Io, "failed to append to " + events_path_.string());
}

ListenStore::CampaignState& ListenStore::campaign_state(const std::string& id) {
  auto it = campaigns_.find(id);
  if (it == campaigns_.end()) throw Error(ErrorKind::NotFound, "unknown campaign " + id);
  return it->second;
}

const ListenStore::CampaignState& ListenStore::campaign_state(const std::string& id) const {
  auto it = campaigns_.find(id);
  if (it == campaigns_.end()) throw Error(ErrorKind::NotFound, "unknown campaign " + id);
  return it->second;
}

Campaign ListenStore::parse_definition(const json& def) const {
  std::vector<std::string> problems;
  auto fail = [&](std::string m) { problems.push_back(std::move(m)); };
  if (!def.is_object()) throw Error(ErrorKind::Invalid, "campaign definition must be a JSON object");

  Campaign c;
  const auto type = def.find("type");
  if (type == def.end() || !type->is_string() || (*type != "preference" && *type != "transcription")) {
    fail("type: must be \"preference\" or \"transcription\"");
  } else {
    c.type = *type == "preference" ? CampaignType::Preference : CampaignType::Transcription;
  }
  if (auto id = def.find("id"); id != def.end()) {
    if (!id->is_string() || !is_filesystem_safe_id(id->get<std::string>())) {
      fail("id: must be a string of letters, digits, '.', '_' or '-'");
    } else {
      c.id = id->get<std::string>();
    }
  }
  if (auto ins = def.find("instructions"); ins != def.end()) {
    if (!ins->is_string() || ins->get<std::string>().empty()) fail("instructions: must be a non-empty string");
    else c.instructions = ins->get<std::string>();
  }
  if (auto seed = def.find("seed"); seed != def.end()) {
    const bool ok = seed->is_number_unsigned() || (seed->is_number_integer() && seed->get<std::int64_t>() >= 0);
    if (!ok) fail("seed: must be a non-negative integer");
    else c.seed = seed->get<std::uint64_t>();
  }

  auto check_audio = [&](const json& v, const std::string& field) -> std::string {
    if (!v.is_string() || v.get<std::string>().empty()) {
      fail(field + ": must be a non-empty string");
      return {};
    }
    const std::filesystem::path p(v.get<std::string>());
    const bool escapes = std::any_of(p.begin(), p.end(), [](const auto& part) { return part == ".."; });
    if (p.is_absolute() || escapes) {
      fail(field + ": must be a path inside the audio directory");
    } else if (!audio_dir_.empty() && !std::filesystem::is_regular_file(audio_dir_ / p)) {
      fail(field + ": audio file not found: " + p.generic_string());
    }
    return v.get<std::string>();
  };

  const auto items = def.find("items");
  if (items == def.end() || !items->is_array() || items->empty()) {
    fail("items: must be a non-empty array");
  } else {
    std::set<std::string> ids;
    for (std::size_t i = 0; i < items->size(); ++i) {
      const json& ji = (*items)[i];
      const std::string at = "items[" + std::to_string(i) + "]";
      if (!ji.is_object()) {
        fail(at + ": must be an object");
        continue;
      }
      CampaignItem item;
      if (!ji.contains("id") || !ji["id"].is_string() || ji["id"].get<std::string>().empty()) {
        fail(at + ".id: must be a non-empty string");
      } else {
        item.id = ji["id"].get<std::string>();
        if (!ids.insert(item.id).second) fail(at + ".id: duplicate item id " + item.id);
      }
      if (c.type == CampaignType::Preference) {
        const auto systems = ji.find("systems");
        if (systems == ji.end() || !systems->is_array() || systems->size() != 2) {
          fail(at + ".systems: must list exactly two systems");
        } else {
          for (std::size_t s = 0; s < 2; ++s) {
            const json& js = (*systems)[s];
            const std::string sat = at + ".systems[" + std::to_string(s) + "]";
            if (!js.is_object()) {
              fail(sat + ": must be an object");
              continue;
            }
            SystemClip clip;
            if (!js.contains("label") || !js["label"].is_string() || js["label"].get<std::string>().empty()) {
              fail(sat + ".label: must be a non-empty string");
            } else {
              clip.label = js["label"].get<std::string>();
            }
            clip.audio = check_audio(js.value("audio", json()), sat + ".audio");
            item.systems.push_back(std::move(clip));
          }
          if (item.systems.size() == 2 && !item.systems[0].label.empty() &&
              item.systems[0].label == item.systems[1].label) {
            fail(at + ".systems: the two system labels must differ");
          }
        }
      } else {
        item.audio = check_audio(ji.value("audio", json()), at + ".audio");
        const auto ref = ji.find("reference");
        if (ref == ji.end() || !ref->is_string() || cer_normalize(ref->get<std::string>(), CerProfile{}).empty()) {
          fail(at + ".reference: must be non-empty text");
        } else {
          item.reference = ref->get<std::string>();
        }
      }
      c.items.push_back(std::move(item));
    }
  }
  if (!problems.empty()) {
    std::string message = "invalid campaign definition:";
    for (const auto& p : problems) message += "\n  " + p;
    throw Error(ErrorKind::Invalid, message);
  }
  if (c.instructions.empty()) {
    c.instructions = c.type == CampaignType::Preference ? kPreferenceInstructions : kTranscriptionInstructions;
  }
  return c;
}

std::string ListenStore::create_campaign(const json& definition) {
  Campaign c = parse_definition(definition);
  std::unique_lock lock(mutex_);
  if (c.id.empty()) {
    std::size_t n = campaigns_.size() + 1;
    while (campaigns_.contains("campaign-" + std::to_string(n))) ++n;
    c.id = "campaign-" + std::to_string(n);
  } else if (campaigns_.contains(c.id)) {
    throw Error(ErrorKind::Conflict, "campaign " + c.id + " already exists");
  }
  if (!definition.contains("seed")) c.seed = fnv1a(c.id);
  const json record = {{"type", "campaign"}, {"campaign", campaign_to_json(c)}};
  append(record);
  apply(record, 0);
  return c.id;
}

void ListenStore::close_campaign(const std::string& campaign_id) {
  std::unique_lock lock(mutex_);
  CampaignState& state = campaign_state(campaign_id);
  if (!state.campaign.open) return;
  const json record = {{"type", "close"}, {"campaign", campaign_id}, {"at", clock_()}};
  append(record);
  apply(record, 0);
}

json ListenStore::task_view(const CampaignState& state, const Task& task) const {
  const Campaign& c = state.campaign;
  const CampaignItem& item = c.items[task.item];
  json clips = json::array();
  if (c.type == CampaignType::Preference) {
    const auto& first = item.systems[task.first_shown_as_a ? 0 : 1];
    const auto& second = item.systems[task.first_shown_as_a ? 1 : 0];
    clips.push_back({{"label", "A"}, {"url", url_path(first.audio)}});
    clips.push_back({{"label", "B"}, {"url", url_path(second.audio)}});
  } else {
    clips.push_back({{"label", "clip"}, {"url", url_path(item.audio)}});
  }
  const auto& ss = state.sessions.at(task.session);
  return {{"done", false},
          {"task", task.id},
          {"campaign", c.id},
          {"session", task.session},
          {"type", type_name(c.type)},
          {"instructions", c.instructions},
          {"clips", std::move(clips)},
          {"progress", {{"answered", ss.answered}, {"position", task.ordinal + 1}, {"total", c.items.size()}}}};
}

json ListenStore::next_task(const std::string& campaign_id, const std::string& session) {
  if (session.empty()) throw Error(ErrorKind::Invalid, "a session id is required");
  std::unique_lock lock(mutex_);
  CampaignState& state = campaign_state(campaign_id);
  if (!state.campaign.open) throw Error(ErrorKind::Conflict, "campaign " + campaign_id + " is closed");

  const std::size_t total = state.campaign.items.size();
  if (auto it = state.sessions.find(session); it != state.sessions.end()) {
    if (it->second.outstanding) return task_view(state, tasks_.at(*it->second.outstanding));
  }
  const SessionState* ss = nullptr;
  if (auto it = state.sessions.find(session); it != state.sessions.end()) ss = &it->second;
  std::vector<std::size_t> remaining;
  for (std::size_t i = 0; i < total; ++i) {
    if (!ss || !ss->issued_items.contains(i)) remaining.push_back(i);
  }
  if (remaining.empty()) {
    return {{"done", true},
            {"campaign", campaign_id},
            {"session", session},
            {"progress", {{"answered", ss ? ss->answered : 0}, {"position", total}, {"total", total}}}};
  }

  const std::size_t ordinal = total - remaining.size();
  const std::uint64_t draw =
      splitmix64(state.campaign.seed ^ fnv1a(session) ^ ((ordinal + 1) * 0x9e3779b97f4a7c15ULL));
  const std::size_t item = remaining[draw % remaining.size()];
  const bool first_as_a = (splitmix64(draw) >> 63) == 0;
  const std::string task_id = campaign_id + "-" + std::to_string(state.tasks.size() + 1);
  const json record = {{"type", "task"},
                       {"task", task_id},
                       {"campaign", campaign_id},
                       {"item", state.campaign.items[item].id},
                       {"session", session},
                       {"first_shown_as_a", first_as_a},
                       {"ordinal", ordinal},
                       {"issued", clock_()}};
  append(record);
  apply(record, 0);
  return task_view(state, tasks_.at(task_id));
}

json ListenStore::submit_response(const json& body) {
  if (!body.is_object() || !body.contains("task") || !body["task"].is_string()) {
    throw Error(ErrorKind::Invalid, "response must be an object with a \"task\" id");
  }
  const std::string task_id = body["task"].get<std::string>();
  std::unique_lock lock(mutex_);
  auto it = tasks_.find(task_id);
  if (it == tasks_.end()) throw Error(ErrorKind::NotFound, "unknown task " + task_id);
  Task& task = it->second;
  if (body.contains("session") && body["session"] != task.session) {
    throw Error(ErrorKind::NotFound, "task " + task_id + " was not issued to this session");
  }
  const CampaignState& state = campaign_state(task.campaign);
  if (!state.campaign.open) throw Error(ErrorKind::Conflict, "campaign " + task.campaign + " is closed");
  if (task.answer) throw Error(ErrorKind::Conflict, "task " + task_id + " already has a response");

  const auto answer = body.find("answer");
  if (answer == body.end() || !answer->is_string()) throw Error(ErrorKind::Domain, "answer must be a string");
  std::string stored;
  if (state.campaign.type == CampaignType::Preference) {
    const std::string a = trim_lower(answer->get<std::string>());
    if (a == "a") stored = "A";
    else if (a == "b") stored = "B";
    else if (a == "same" || a == "no difference" || a == "no-difference") stored = "same";
    else throw Error(ErrorKind::Domain, "preference answers are A, B or No difference");
  } else {
    stored = answer->get<std::string>();
    if (trim_lower(stored).empty()) throw Error(ErrorKind::Domain, "transcription must not be empty");
  }
  const json record = {{"type", "response"}, {"task", task_id}, {"answer", stored}, {"received", clock_()}};
  append(record);
  apply(record, 0);
  return {{"ok", true}, {"task", task_id}, {"answer", stored}};
}

json ListenStore::results(const std::string& campaign_id) const {
  std::shared_lock lock(mutex_);
  const CampaignState& state = campaign_state(campaign_id);
  const Campaign& c = state.campaign;
  json out = {{"campaign", c.id}, {"type", type_name(c.type)}, {"open", c.open}};

  if (c.type == CampaignType::Preference) {
    std::vector<PreferenceItem> items;
    for (const auto& item : c.items) items.push_back({item.id, item.systems[0].label, item.systems[1].label});
    std::vector<PreferenceResponse> responses;
    for (const auto& id : state.tasks) {
      const Task& t = tasks_.at(id);
      if (!t.answer) continue;
      const PreferenceAnswer a = *t.answer == "A"   ? PreferenceAnswer::A
                                 : *t.answer == "B" ? PreferenceAnswer::B
                                                    : PreferenceAnswer::Same;
      responses.push_back({t.session, c.items[t.item].id, t.first_shown_as_a, a});
    }
    const PreferenceTally tally = tally_preferences(items, responses);
    json evaluators = json::array();
    for (const auto& row : tally.evaluators) {
      evaluators.push_back({{"session", row.evaluator}, {"counts", row.counts}, {"same", row.same}, {"total", row.total}});
    }
    out["responses"] = tally.responses;
    out["systems"] = tally.systems;
    out["counts"] = tally.counts;
    out["same"] = tally.same;
    out["evaluators"] = std::move(evaluators);
    out["winner"] = tally.winner ? json(*tally.winner) : json(nullptr);
    out["tie"] = tally.tie;
    return out;
  }

  CerMean overall;
  std::map<std::string, CerMean> per_item;
  std::map<std::string, CerMean> per_session;
  for (const auto& id : state.tasks) {
    const Task& t = tasks_.at(id);
    if (!t.answer) continue;
    const auto& item = c.items[t.item];
    const double strict = cer(item.reference, *t.answer, CerProfile::strict()).cer;
    const double lenient = cer(item.reference, *t.answer, CerProfile::lenient()).cer;
    overall.add(strict, lenient);
    per_item[item.id].add(strict, lenient);
    per_session[t.session].add(strict, lenient);
  }
  out = overall.to_json(std::move(out));
  json items = json::array();
  for (const auto& item : c.items) {
    auto it = per_item.find(item.id);
    items.push_back((it == per_item.end() ? CerMean{} : it->second).to_json({{"item", item.id}}));
  }
  json sessions = json::array();
  for (const auto& [session, m] : per_session) sessions.push_back(m.to_json({{"session", session}}));
  out["items"] = std::move(items);
  out["evaluators"] = std::move(sessions);
  return out;
}

json ListenStore::campaign_view(const std::string& campaign_id) const {
  std::shared_lock lock(mutex_);
  const CampaignState& state = campaign_state(campaign_id);
  std::size_t answered = 0;
  for (const auto& id : state.tasks) answered += tasks_.at(id).answer ? 1 : 0;
  json items = json::array();
  for (const auto& item : state.campaign.items) items.push_back(item.id);
  return {{"id", state.campaign.id},
          {"type", type_name(state.campaign.type)},
          {"instructions", state.campaign.instructions},
          {"items", std::move(items)},
          {"open", state.campaign.open},
          {"tasks", state.tasks.size()},
          {"responses", answered}};
}

json ListenStore::list_campaigns() const {
  json out = json::array();
  std::vector<std::string> ids;
  {
    std::shared_lock lock(mutex_);
    ids = campaign_order_;
  }
  for (const auto& id : ids) out.push_back(campaign_view(id));
  return out;
}

std::vector<std::string> ListenStore::audit() const {
  std::shared_lock lock(mutex_);
  std::vector<std::string> findings = orphans_;
  for (const auto& [id, t] : tasks_) {
    auto it = campaigns_.find(t.campaign);
    if (it == campaigns_.end()) findings.push_back("task " + id + " references unknown campaign " + t.campaign);
    else if (std::find(it->second.tasks.begin(), it->second.tasks.end(), id) == it->second.tasks.end()) {
      findings.push_back("task " + id + " is not listed by its campaign");
    }
  }
  return findings;
}

}  // namespace vc::listen
