#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "hgf/error.hpp"
#include "hgf/survey.hpp"

namespace hgf {

struct ServiceSettings {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string data_dir = "data";
  std::string admin_token;  // empty: admin endpoints refuse every request
  SurveyConfig survey;
};

using EnvLookup = std::function<std::optional<std::string>(const char*)>;
EnvLookup process_env();

// File values first, then HGF_LISTEN (host:port), HGF_DATA_DIR,
// HGF_STAGE_QUOTA, HGF_EPSILON, HGF_POOL_SIZE and HGF_ADMIN_TOKEN.
ServiceSettings settings_from_json(const Json& j);
void apply_env_overrides(ServiceSettings& settings, const EnvLookup& env);

int http_status(ErrorKind kind);

class HttpServer {
 public:
  HttpServer(SurveyService& service, std::string admin_token);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Port 0 picks a free port. Returns the bound port.
  int bind(const std::string& host, int port);
  void listen_after_bind();  // blocks until stop()
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace hgf
