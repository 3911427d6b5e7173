#pragma once

#include <memory>
#include <string>

#include "yarnlab/lm.hpp"

namespace yarnlab::lm {

struct StubServerOptions {
  std::string host = "127.0.0.1";
  int port = 0;                // 0 = pick a free port
  std::string bearer_token;    // empty = read YARNLAB_LM_TOKEN from the environment
  int inject_500 = 0;          // fail this many distribution requests with HTTP 500
  // Test hook: when set, /v1/distribution reports this fingerprint instead of
  // the model's real one.
  std::string fingerprint_override;
};

// Serves an NGramLm over the log-probability wire protocol. Used for client
// conformance tests and as a reference protocol implementation.
class StubServer {
 public:
  StubServer(std::shared_ptr<NGramLm> model, StubServerOptions options);
  ~StubServer();

  StubServer(const StubServer&) = delete;
  StubServer& operator=(const StubServer&) = delete;

  void start();  // binds, then serves on a background thread
  void stop();
  int port() const;
  std::string url() const;

  void inject_failures(int n);
  std::string last_request_body() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace yarnlab::lm
