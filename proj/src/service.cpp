// Copyright (C) 2026 The LCT Authors
// SPDX-License-Identifier: Apache-2.0

#include "lct/service.hpp"

#include <atomic>
#include <cstring>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <random>
#include <thread>
#include <vector>

#include "json.hpp"
#include "lct/binary_io.hpp"
#include "lct/checkpoint.hpp"
#include "lct/config.hpp"
#include "lct/director.hpp"
#include "lct/latent_io.hpp"
#include "lct/prompt_json.hpp"
#include "lct/seeding.hpp"

// After Eigen: <resolv.h> (pulled in by httplib) defines a _res macro.
#include "httplib.h"

namespace lct {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// An error that maps directly onto an HTTP status.
struct HttpError : std::runtime_error {
  HttpError(int status, std::string code, const std::string& message)
      : std::runtime_error(message), status(status), code(std::move(code)) {}
  int status;
  std::string code;
};

[[noreturn]] void fail(int status, const std::string& code, const std::string& message) {
  throw HttpError(status, code, message);
}

json error_body(int status, const std::string& code, const std::string& message) {
  return {{"schema", "lct.error.v1"}, {"error", {{"status", status}, {"code", code}, {"message", message}}}};
}

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

std::string random_id(const char* prefix) {
  static std::mutex mu;
  static std::mt19937_64 rng(std::random_device{}());
  std::lock_guard lock(mu);
  char buf[40];
  std::snprintf(buf, sizeof buf, "%s%016llx", prefix, static_cast<unsigned long long>(rng()));
  return buf;
}

json parse_body(const httplib::Request& req) {
  json body;
  try {
    body = json::parse(req.body);
  } catch (const json::exception& e) {
    fail(400, "malformed_json", std::string("request body is not valid JSON: ") + e.what());
  }
  if (!body.is_object()) fail(400, "malformed_request", "request body must be a JSON object");
  return body;
}

void only_keys(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
  for (const auto& [k, v] : j.items()) {
    bool known = false;
    for (const char* key : keys) known = known || k == key;
    if (!known) fail(400, "malformed_request", where + " has unknown field \"" + k + "\"");
  }
}

std::uint64_t optional_seed(const json& body, std::uint64_t fallback) {
  const auto it = body.find("seed");
  if (it == body.end()) return fallback;
  if (!it->is_number_unsigned()) fail(400, "malformed_request", "seed must be a non-negative integer");
  return it->get<std::uint64_t>();
}

std::optional<int> optional_steps(const json& body, int max_steps) {
  const auto it = body.find("steps");
  if (it == body.end()) return std::nullopt;
  if (!it->is_number_integer()) fail(400, "malformed_request", "steps must be an integer");
  const auto s = it->get<long long>();
  if (s < 1 || s > max_steps) fail(422, "invalid_steps", "steps must be in [1, " + std::to_string(max_steps) + "]");
  return static_cast<int>(s);
}

json attributes_json(const Latent& z) {
  const auto attrs = extract_attributes(z);
  json characters = json::object();
  for (const auto& [id, r] : attrs.characters) {
    characters[std::to_string(id)] = {{"color", {r.color[0], r.color[1], r.color[2]}}, {"pixels", r.pixels}};
  }
  return {{"background", {attrs.background[0], attrs.background[1], attrs.background[2]}}, {"characters", characters}};
}

json entry_json(const PoolEntry& e) {
  return {{"entry_id", e.id},
          {"prompt", {{"global", to_json(e.global)}, {"shot", to_json(e.shot)}}},
          {"shot_cut", e.shot.shot_cut},
          {"grid", to_json(Grid{e.latent.height, e.latent.width, e.latent.frames})},
          {"frames", e.latent.frames},
          {"metadata", e.metadata},
          {"attributes", attributes_json(e.latent)}};
}

// ---------------------------------------------------------------------------
// Journal: framed records [u32 "LCTJ"][u32 json length][json][u32 latent
// length][latent file bytes][u64 FNV-1a of the record so far]. A torn final
// record (crash mid-append) is dropped on replay.

constexpr std::uint32_t kRecordMagic = 0x4a54434c;  // "LCTJ"

struct JournalRecord {
  json header;
  std::optional<Latent> latent;
};

void append_record(const fs::path& path, const json& header, const Latent* latent) {
  ByteWriter w;
  w.u32(kRecordMagic);
  w.string(header.dump());
  if (latent) {
    const auto bytes = serialize_latent(*latent);
    w.u32(static_cast<std::uint32_t>(bytes.size()));
    w.bytes(bytes.data(), bytes.size());
  } else {
    w.u32(0);
  }
  const auto& buf = w.buffer();
  w.u64(fnv1a(buf.data(), buf.size()));
  std::ofstream out(path, std::ios::binary | std::ios::app);
  out.write(w.buffer().data(), static_cast<std::streamsize>(w.buffer().size()));
  out.flush();
  if (!out) throw std::runtime_error("cannot append to journal " + path.string());
}

std::vector<JournalRecord> read_journal(const fs::path& path) {
  const auto bytes = read_file(path);
  std::vector<JournalRecord> records;
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    try {
      ByteReader r(bytes.data() + pos, bytes.size() - pos, path.string());
      if (r.u32() != kRecordMagic) break;
      JournalRecord rec;
      rec.header = json::parse(r.string());
      const auto n = r.u32();
      if (n > 0) {
        std::vector<char> latent(n);
        r.bytes(latent.data(), n);
        rec.latent = deserialize_latent(latent, path.string());
      }
      const std::size_t body = r.position();
      const auto stored = r.u64();
      if (fnv1a(bytes.data() + pos, body) != stored) break;
      pos += r.position();
      records.push_back(std::move(rec));
    } catch (const std::exception&) {
      break;
    }
  }
  return records;
}

json layout_json(const ShotDescriptor& s) {
  return {{"text_len", s.text_len}, {"h_tokens", s.h_tokens}, {"w_tokens", s.w_tokens}, {"f_tokens", s.f_tokens},
          {"shot_cut", s.shot_cut}};
}

ShotDescriptor layout_from(const json& j) {
  ShotDescriptor s;
  s.text_len = j.at("text_len").get<int>();
  s.h_tokens = j.at("h_tokens").get<int>();
  s.w_tokens = j.at("w_tokens").get<int>();
  s.f_tokens = j.at("f_tokens").get<int>();
  s.shot_cut = j.at("shot_cut").get<bool>();
  return s;
}

struct StoredResponse {
  std::string fingerprint;
  int status = 0;
  json body;
};

json stored_json(const std::string& key, const StoredResponse& r) {
  return {{"key", key}, {"fingerprint", r.fingerprint}, {"status", r.status}, {"body", r.body}};
}

std::string fingerprint(const std::string& route, const json& body) {
  const auto text = route + "\n" + body.dump();
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(text.data(), text.size())));
  return buf;
}

struct Job {
  std::string id;
  std::string state = "idle";  // idle | generating | failed
  std::string message;
};

struct Session {
  std::string id;
  std::string checkpoint;
  std::uint64_t seed = 0;
  std::unique_ptr<Director> director;
  Job job;
  std::map<std::string, StoredResponse> idempotency;
  fs::path journal;
  mutable std::mutex mu;
};

}  // namespace

struct Service::Impl {
  ServiceOptions options;
  httplib::Server server;

  mutable std::mutex mu;  // sessions map, checkpoints cache, create idempotency
  std::map<std::string, std::shared_ptr<Session>> sessions;
  std::map<std::string, std::shared_ptr<const Checkpoint>> checkpoints;
  std::map<std::string, StoredResponse> create_idempotency;

  std::mutex jobs_mu;
  std::vector<std::thread> jobs;
  std::atomic<bool> stopping{false};

  explicit Impl(ServiceOptions o) : options(std::move(o)) {
    if (!options.state_dir.empty()) {
      fs::create_directories(options.state_dir / "sessions");
      restore_sessions();
    }
    routes();
  }

  // -- checkpoints ----------------------------------------------------------

  fs::path checkpoint_path(const std::string& name) const {
    const fs::path rel(name);
    if (name.empty() || rel.is_absolute()) fail(404, "unknown_checkpoint", "unknown checkpoint '" + name + "'");
    for (const auto& part : rel)
      if (part == "..") fail(404, "unknown_checkpoint", "unknown checkpoint '" + name + "'");
    return options.checkpoint_dir / rel;
  }

  std::shared_ptr<const Checkpoint> checkpoint(const std::string& name) {
    {
      std::lock_guard lock(mu);
      if (const auto it = checkpoints.find(name); it != checkpoints.end()) return it->second;
    }
    const auto path = checkpoint_path(name);
    if (!fs::is_regular_file(path)) fail(404, "unknown_checkpoint", "unknown checkpoint '" + name + "'");
    std::shared_ptr<const Checkpoint> ckpt;
    try {
      ckpt = std::make_shared<const Checkpoint>(load_checkpoint(path));
    } catch (const std::exception& e) {
      fail(422, "unreadable_checkpoint", "checkpoint '" + name + "' cannot be loaded: " + e.what());
    }
    std::lock_guard lock(mu);
    return checkpoints.emplace(name, ckpt).first->second;
  }

  json list_checkpoints() {
    json out = json::array();
    if (!fs::is_directory(options.checkpoint_dir)) return out;
    std::vector<std::string> names;
    for (const auto& e : fs::recursive_directory_iterator(options.checkpoint_dir)) {
      if (e.is_regular_file() && e.path().extension() == ".lct" && e.path().parent_path().filename() != "corpus") {
        names.push_back(fs::relative(e.path(), options.checkpoint_dir).generic_string());
      }
    }
    std::sort(names.begin(), names.end());
    for (const auto& n : names) {
      try {
        const auto c = checkpoint(n);
        out.push_back({{"name", n},
                       {"mode", c->mode == AttentionMode::kBidirectional ? "bidirectional" : "context-causal"},
                       {"step", c->step}});
      } catch (const HttpError&) {
        // Not a checkpoint (e.g. a corpus shard); skip it.
      }
    }
    return out;
  }

  // -- sessions -------------------------------------------------------------

  std::shared_ptr<Session> session(const std::string& id) {
    std::lock_guard lock(mu);
    const auto it = sessions.find(id);
    if (it == sessions.end()) fail(404, "unknown_session", "unknown session '" + id + "'");
    return it->second;
  }

  json snapshot(const Session& s) const {
    std::lock_guard lock(s.mu);
    json pool = json::array();
    for (const auto& e : s.director->pool().entries()) pool.push_back(entry_json(e));
    json job{{"state", s.job.state}};
    if (s.job.state != "idle") job["job_id"] = s.job.id;
    if (s.job.state == "failed") job["message"] = s.job.message;
    return {{"schema", "lct.session.v1"},
            {"session_id", s.id},
            {"checkpoint", s.checkpoint},
            {"mode", to_string(s.director->mode())},
            {"job", job},
            {"pool", pool}};
  }

  void restore_sessions() {
    for (const auto& f : fs::directory_iterator(options.state_dir / "sessions")) {
      if (f.path().extension() != ".journal") continue;
      try {
        const auto records = read_journal(f.path());
        if (records.empty() || records.front().header.value("type", "") != "session") continue;
        const auto& h = records.front().header;
        auto s = std::make_shared<Session>();
        s->id = h.at("session_id").get<std::string>();
        s->checkpoint = h.at("checkpoint").get<std::string>();
        s->seed = h.at("seed").get<std::uint64_t>();
        s->journal = f.path();
        s->director = std::make_unique<Director>(checkpoint(s->checkpoint),
                                                 parse_sample_mode(h.at("mode").get<std::string>()));
        if (h.contains("idempotency")) {
          const auto& k = h.at("idempotency");
          create_idempotency[k.at("key").get<std::string>()] = {k.at("fingerprint").get<std::string>(),
                                                                 k.at("status").get<int>(), k.at("body")};
        }
        for (std::size_t i = 1; i < records.size(); ++i) {
          const auto& r = records[i].header;
          if (r.value("type", "") != "entry" || !records[i].latent) continue;
          const auto& e = r.at("entry");
          PoolEntry p;
          p.id = e.at("entry_id").get<int>();
          p.latent = *records[i].latent;
          p.global = global_prompt_from_json(e.at("global"));
          p.shot = shot_prompt_from_json(e.at("shot"));
          p.layout = layout_from(e.at("layout"));
          p.metadata = e.at("metadata");
          s->director->pool().restore(std::move(p));
          if (r.contains("idempotency")) {
            const auto& k = r.at("idempotency");
            s->idempotency[k.at("key").get<std::string>()] = {k.at("fingerprint").get<std::string>(),
                                                               k.at("status").get<int>(), k.at("body")};
          }
        }
        sessions[s->id] = s;
      } catch (const std::exception& e) {
        std::cerr << "lct serve: skipping session journal " << f.path() << ": " << e.what() << "\n";
      }
    }
  }

  json create_session(const json& body, const std::optional<std::string>& key, int& status) {
    only_keys(body, {"checkpoint", "mode", "seed"}, "session request");
    if (!body.contains("checkpoint") || !body.at("checkpoint").is_string()) {
      fail(400, "malformed_request", "\"checkpoint\" must be a string");
    }
    if (!body.contains("mode") || !body.at("mode").is_string()) {
      fail(400, "malformed_request", "\"mode\" must be one of joint, cond, ar");
    }
    SampleMode mode;
    try {
      mode = parse_sample_mode(body.at("mode").get<std::string>());
    } catch (const std::exception& e) {
      fail(400, "malformed_request", e.what());
    }
    const auto name = body.at("checkpoint").get<std::string>();
    auto ckpt = checkpoint(name);
    auto s = std::make_shared<Session>();
    s->id = random_id("s-");
    s->checkpoint = name;
    s->seed = optional_seed(body, std::random_device{}());
    try {
      s->director = std::make_unique<Director>(ckpt, mode);
    } catch (const ConfigError& e) {
      fail(409, "mode_mismatch", e.what());
    }
    status = 201;
    json response{{"schema", "lct.session_created.v1"}, {"session_id", s->id}, {"checkpoint", name},
                  {"mode", to_string(mode)}};
    if (!options.state_dir.empty()) {
      s->journal = options.state_dir / "sessions" / (s->id + ".journal");
      json header{{"type", "session"}, {"session_id", s->id}, {"checkpoint", name},
                  {"mode", to_string(mode)}, {"seed", s->seed}};
      if (key) header["idempotency"] = stored_json(*key, {fingerprint("POST /sessions", body), status, response});
      append_record(s->journal, header, nullptr);
    }
    std::lock_guard lock(mu);
    sessions[s->id] = s;
    return response;
  }

  // -- jobs -----------------------------------------------------------------

  ShotRequest shot_request(const Session& s, const json& body) {
    only_keys(body, {"prompt", "condition_entries", "shot_cut", "grid", "seed", "steps"}, "shot request");
    ShotRequest r;
    try {
      if (!body.contains("prompt") || !body.at("prompt").is_object()) {
        throw VocabularyError("\"prompt\" must be an object with \"global\" and \"shot\"");
      }
      const auto& p = body.at("prompt");
      for (const auto& [k, v] : p.items()) {
        if (k != "global" && k != "shot") throw VocabularyError("prompt has unknown field \"" + k + "\"");
      }
      if (!p.contains("global") || !p.contains("shot")) throw VocabularyError("prompt needs \"global\" and \"shot\"");
      r.global = global_prompt_from_json(p.at("global"));
      r.shot = shot_prompt_from_json(p.at("shot"));
    } catch (const VocabularyError& e) {
      fail(400, "malformed_prompt", e.what());
    }
    if (const auto it = body.find("shot_cut"); it != body.end()) {
      if (!it->is_boolean()) fail(400, "malformed_request", "shot_cut must be a boolean");
      r.shot.shot_cut = it->get<bool>();
    }
    if (const auto it = body.find("condition_entries"); it != body.end()) {
      if (!it->is_array()) fail(400, "malformed_request", "condition_entries must be an array");
      for (const auto& c : *it) {
        if (!c.is_object() || !c.contains("entry_id") || !c.at("entry_id").is_number_integer() ||
            !c.contains("t_c") || !c.at("t_c").is_number()) {
          fail(400, "malformed_request", "each condition entry needs an integer entry_id and a numeric t_c");
        }
        only_keys(c, {"entry_id", "t_c"}, "condition entry");
        r.conditions.push_back({c.at("entry_id").get<int>(), c.at("t_c").get<double>()});
      }
    }
    if (const auto it = body.find("grid"); it != body.end()) {
      if (!it->is_object() || !it->contains("height") || !it->contains("width") || !it->contains("frames") ||
          !it->at("height").is_number_integer() || !it->at("width").is_number_integer() ||
          !it->at("frames").is_number_integer()) {
        fail(400, "malformed_request", "grid must be {height, width, frames} integers");
      }
      only_keys(*it, {"height", "width", "frames"}, "grid");
      r.grid = Grid{it->at("height").get<int>(), it->at("width").get<int>(), it->at("frames").get<int>()};
      if (r.grid->height > 64 || r.grid->width > 64 || r.grid->frames > 64) {
        fail(422, "invalid_grid", "grid dimensions are limited to 64");
      }
    }
    r.steps = optional_steps(body, options.max_steps);
    r.seed = optional_seed(body, derive_seed({s.seed, static_cast<std::uint64_t>(s.director->pool().next_id())}));
    return r;
  }

  ShotRequest extend_request(const Session& s, int entry_id, const json& body) {
    only_keys(body, {"shot", "mode", "t_c", "seed", "steps"}, "extend request");
    ShotPrompt bridging;
    try {
      if (!body.contains("shot")) throw VocabularyError("extend request needs \"shot\"");
      bridging = shot_prompt_from_json(body.at("shot"));
    } catch (const VocabularyError& e) {
      fail(400, "malformed_prompt", e.what());
    }
    const auto mode_text = body.value("mode", std::string("without_cut"));
    if (mode_text != "with_cut" && mode_text != "without_cut") {
      fail(400, "malformed_request", "mode must be with_cut or without_cut");
    }
    double t_c = 0.1;
    if (const auto it = body.find("t_c"); it != body.end()) {
      if (!it->is_number()) fail(400, "malformed_request", "t_c must be a number");
      t_c = it->get<double>();
    }
    const auto seed = optional_seed(body, derive_seed({s.seed, static_cast<std::uint64_t>(s.director->pool().next_id())}));
    auto r = s.director->extension_request(entry_id, bridging,
                                           mode_text == "with_cut" ? ExtendMode::kWithCut : ExtendMode::kWithoutCut,
                                           seed, t_c);
    r.steps = optional_steps(body, options.max_steps);
    return r;
  }

  // Validates, marks the session busy and launches the job. Caller holds s.mu.
  json start_job(const std::shared_ptr<Session>& s, ShotRequest request, json extra,
                 const std::optional<std::string>& key, const std::string& print) {
    if (s->job.state == "generating") fail(409, "session_busy", "session " + s->id + " already has a job in flight");
    if (options.steps_override) request.steps = *options.steps_override;
    SampleRequest sample;
    try {
      sample = s->director->build_request(request);
    } catch (const SessionError& e) {
      fail(422, "unknown_entry", e.what());
    } catch (const DomainError& e) {
      fail(422, "invalid_t_c", e.what());
    } catch (const ShapeError& e) {
      fail(422, "invalid_grid", e.what());
    } catch (const VocabularyError& e) {
      fail(400, "malformed_prompt", e.what());
    }
    s->job = Job{random_id("j-"), "generating", ""};
    json response{{"schema", "lct.job_accepted.v1"}, {"session_id", s->id}, {"job_id", s->job.id},
                  {"state", "generating"}};
    std::optional<StoredResponse> stored;
    if (key) {
      stored = StoredResponse{print, 202, response};
      s->idempotency[*key] = *stored;
    }
    std::lock_guard lock(jobs_mu);
    jobs.emplace_back([this, s, request = std::move(request), sample = std::move(sample), extra = std::move(extra),
                       key, stored, job_id = s->job.id]() mutable {
      run_job(s, request, sample, extra, key, stored, job_id);
    });
    return response;
  }

  void run_job(const std::shared_ptr<Session>& s, const ShotRequest& request, const SampleRequest& sample,
               const json& extra, const std::optional<std::string>& key, const std::optional<StoredResponse>& stored,
               const std::string& job_id) {
    try {
      if (options.before_sample) options.before_sample();
      if (stopping) throw std::runtime_error("service is shutting down");
      auto latent = s->director->sample(sample);
      std::lock_guard lock(s->mu);
      const auto& e = s->director->commit(request, std::move(latent), extra);
      if (!s->journal.empty()) {
        json record{{"type", "entry"},
                    {"job_id", job_id},
                    {"entry",
                     {{"entry_id", e.id},
                      {"global", to_json(e.global)},
                      {"shot", to_json(e.shot)},
                      {"layout", layout_json(e.layout)},
                      {"metadata", e.metadata}}}};
        if (key && stored) record["idempotency"] = stored_json(*key, *stored);
        append_record(s->journal, record, &e.latent);
      }
      s->job = Job{job_id, "idle", ""};
    } catch (const std::exception& ex) {
      std::lock_guard lock(s->mu);
      s->job = Job{job_id, "failed", ex.what()};
    }
  }

  // -- HTTP -----------------------------------------------------------------

  template <typename Fn>
  httplib::Server::Handler guarded(Fn fn) {
    return [fn](const httplib::Request& req, httplib::Response& res) {
      try {
        fn(req, res);
      } catch (const HttpError& e) {
        send_json(res, e.status, error_body(e.status, e.code, e.what()));
      } catch (const std::exception& e) {
        send_json(res, 500, error_body(500, "internal", e.what()));
      }
    };
  }

  static std::optional<std::string> idempotency_key(const httplib::Request& req) {
    if (!req.has_header("Idempotency-Key")) return std::nullopt;
    auto key = req.get_header_value("Idempotency-Key");
    if (key.empty() || key.size() > 200) fail(400, "malformed_request", "Idempotency-Key must be 1..200 characters");
    return key;
  }

  // Returns true (and fills res) when a stored response answers this request.
  static bool replay(const std::map<std::string, StoredResponse>& store, const std::optional<std::string>& key,
                     const std::string& print, httplib::Response& res) {
    if (!key) return false;
    const auto it = store.find(*key);
    if (it == store.end()) return false;
    if (it->second.fingerprint != print) {
      fail(422, "idempotency_key_reuse", "Idempotency-Key was already used with a different request");
    }
    send_json(res, it->second.status, it->second.body);
    res.set_header("Idempotent-Replay", "true");
    return true;
  }

  static int path_int(const std::string& text, const char* what) {
    try {
      std::size_t used = 0;
      const long v = std::stol(text, &used);
      if (used == text.size() && v >= 0 && v <= std::numeric_limits<int>::max()) return static_cast<int>(v);
    } catch (const std::exception&) {
    }
    fail(404, std::string("unknown_") + what, std::string("unknown ") + what + " '" + text + "'");
  }

  void routes() {
    server.set_post_routing_handler([this](const httplib::Request&, httplib::Response& res) {
      res.set_header("Access-Control-Allow-Origin", options.cors_origin);
      res.set_header("Access-Control-Expose-Headers", "Location, Idempotent-Replay");
    });
    server.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) {
      res.status = 204;
      res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Content-Type, Idempotency-Key");
      res.set_header("Access-Control-Max-Age", "600");
    });

    server.Get("/health", guarded([](const httplib::Request&, httplib::Response& res) {
      send_json(res, 200, {{"schema", "lct.health.v1"}, {"status", "ok"}});
    }));

    server.Get("/checkpoints", guarded([this](const httplib::Request&, httplib::Response& res) {
      send_json(res, 200, {{"schema", "lct.checkpoints.v1"}, {"checkpoints", list_checkpoints()}});
    }));

    server.Post("/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto key = idempotency_key(req);
      const auto body = parse_body(req);
      const auto print = fingerprint("POST /sessions", body);
      {
        std::lock_guard lock(mu);
        if (replay(create_idempotency, key, print, res)) return;
      }
      int status = 201;
      const auto response = create_session(body, key, status);
      if (key) {
        std::lock_guard lock(mu);
        create_idempotency[*key] = {print, status, response};
      }
      send_json(res, status, response);
      res.set_header("Location", "/sessions/" + response.at("session_id").get<std::string>());
    }));

    server.Get(R"(/sessions/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
      send_json(res, 200, snapshot(*session(req.matches[1])));
    }));

    server.Post(R"(/sessions/([^/]+)/shots)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      auto s = session(req.matches[1]);
      const auto key = idempotency_key(req);
      const auto body = parse_body(req);
      const auto print = fingerprint("POST shots", body);
      std::lock_guard lock(s->mu);
      if (replay(s->idempotency, key, print, res)) return;
      auto request = shot_request(*s, body);
      send_json(res, 202, start_job(s, std::move(request), json::object(), key, print));
    }));

    server.Post(R"(/sessions/([^/]+)/entries/([^/]+)/extend)",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
                  auto s = session(req.matches[1]);
                  const int eid = path_int(req.matches[2], "entry");
                  const auto key = idempotency_key(req);
                  const auto body = parse_body(req);
                  const auto print = fingerprint("POST extend " + std::to_string(eid), body);
                  std::lock_guard lock(s->mu);
                  if (replay(s->idempotency, key, print, res)) return;
                  if (!s->director->pool().contains(eid)) {
                    fail(404, "unknown_entry", "unknown pool entry " + std::to_string(eid));
                  }
                  auto request = extend_request(*s, eid, body);
                  const json extra{{"extends", eid}, {"extend_mode", request.shot.shot_cut ? "with_cut" : "without_cut"}};
                  send_json(res, 202, start_job(s, std::move(request), extra, key, print));
                }));

    server.Get(R"(/sessions/([^/]+)/entries/([^/]+))",
               guarded([this](const httplib::Request& req, httplib::Response& res) {
                 auto s = session(req.matches[1]);
                 const int eid = path_int(req.matches[2], "entry");
                 std::lock_guard lock(s->mu);
                 if (!s->director->pool().contains(eid)) {
                   fail(404, "unknown_entry", "unknown pool entry " + std::to_string(eid));
                 }
                 json body = entry_json(s->director->pool().get(eid));
                 body["schema"] = "lct.entry.v1";
                 body["session_id"] = s->id;
                 send_json(res, 200, body);
               }));

    server.Get(R"(/sessions/([^/]+)/entries/([^/]+)/frames)",
               guarded([this](const httplib::Request& req, httplib::Response& res) {
                 auto s = session(req.matches[1]);
                 const int eid = path_int(req.matches[2], "entry");
                 Latent z;
                 {
                   std::lock_guard lock(s->mu);
                   if (!s->director->pool().contains(eid)) {
                     fail(404, "unknown_entry", "unknown pool entry " + std::to_string(eid));
                   }
                   z = s->director->pool().get(eid).latent;
                 }
                 auto int_param = [&](const char* name, int fallback) {
                   if (!req.has_param(name)) return fallback;
                   const auto text = req.get_param_value(name);
                   try {
                     std::size_t used = 0;
                     const long v = std::stol(text, &used);
                     if (used == text.size() && v >= std::numeric_limits<int>::min() &&
                         v <= std::numeric_limits<int>::max()) {
                       return static_cast<int>(v);
                     }
                   } catch (const std::exception&) {
                   }
                   fail(400, "malformed_request", std::string("query parameter ") + name + " must be an integer");
                 };
                 if (!req.has_param("frame")) fail(400, "malformed_request", "query parameter frame is required");
                 const int frame = int_param("frame", 0);
                 const int scale = int_param("scale", 1);
                 if (scale < 1 || scale > 64) fail(400, "malformed_request", "scale must be in [1, 64]");
                 if (frame < 0 || frame >= z.frames) {
                   res.set_header("Content-Range", "frames */" + std::to_string(z.frames));
                   fail(416, "frame_out_of_range",
                        "frame " + std::to_string(frame) + " outside [0, " + std::to_string(z.frames) + ")");
                 }
                 const auto bmp = encode_bmp(z, frame, scale);
                 res.status = 200;
                 res.set_content(std::string(bmp.begin(), bmp.end()), "image/bmp");
               }));

    server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (res.body.empty()) {
        const std::string code = res.status == 404 ? "not_found" : "http_error";
        send_json(res, res.status, error_body(res.status, code, httplib::status_message(res.status)));
      }
    });
  }

  void join_jobs() {
    std::vector<std::thread> running;
    {
      std::lock_guard lock(jobs_mu);
      running.swap(jobs);
    }
    for (auto& t : running)
      if (t.joinable()) t.join();
  }
};

Service::Service(ServiceOptions options) : impl_(std::make_unique<Impl>(std::move(options))) {}

Service::~Service() {
  stop();
  impl_->stopping = true;
  impl_->join_jobs();
}

int Service::bind(const std::string& host, int port) {
  if (port == 0) {
    const int p = impl_->server.bind_to_any_port(host);
    if (p < 0) throw std::runtime_error("cannot bind " + host);
    return p;
  }
  if (!impl_->server.bind_to_port(host, port)) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void Service::listen() { impl_->server.listen_after_bind(); }

void Service::stop() {
  if (impl_->server.is_running()) impl_->server.stop();
}

void Service::wait_idle() { impl_->join_jobs(); }

std::size_t Service::session_count() const {
  std::lock_guard lock(impl_->mu);
  return impl_->sessions.size();
}

int run_server(const ServiceOptions& options, const std::string& host, int port) {
  if (!fs::is_directory(options.checkpoint_dir)) {
    throw ConfigError("checkpoint directory not found: " + options.checkpoint_dir.string());
  }
  Service service(options);
  const int bound = service.bind(host, port);
  std::cerr << "lct serve: listening on http://" << host << ":" << bound << " (checkpoints: "
            << options.checkpoint_dir.string() << ", sessions restored: " << service.session_count() << ")\n";
  service.listen();
  return 0;
}

}  // namespace lct
