// Copyright (C) 2026 The LCT Authors
// SPDX-License-Identifier: Apache-2.0

// Session-oriented HTTP/JSON service over the director. Endpoints and
// payload schemas are documented in docs/api.md.
//
// Generation is asynchronous: a POST that starts a job answers 202 and the
// job's progress is observed through GET /sessions/{id}. Each session runs at
// most one job at a time. With a state directory, every session keeps an
// append-only journal and is restored when the service starts.

#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>

namespace lct {

struct ServiceOptions {
  std::filesystem::path checkpoint_dir;
  std::filesystem::path state_dir;  // empty: sessions live in memory only
  std::string cors_origin = "*";
  std::optional<int> steps_override;  // forces the Euler step count of every job
  int max_steps = 1000;
  // Called on the job thread before sampling starts (tests use it to hold a job).
  std::function<void()> before_sample;
};

class Service {
 public:
  explicit Service(ServiceOptions options);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Binds to host:port (port 0 picks a free port) and returns the port.
  int bind(const std::string& host, int port);
  // Serves on the bound socket until stop(); blocks.
  void listen();
  void stop();
  // Waits for all running jobs to finish.
  void wait_idle();
  std::size_t session_count() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Blocks serving on host:port. Returns a process exit code.
int run_server(const ServiceOptions& options, const std::string& host, int port);

}  // namespace lct
