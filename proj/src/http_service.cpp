#include "hgf/http_service.hpp"

#include <httplib.h>

#include <cstdlib>

namespace hgf {

EnvLookup process_env() {
  return [](const char* name) -> std::optional<std::string> {
    const char* v = std::getenv(name);
    if (!v) return std::nullopt;
    return std::string(v);
  };
}

ServiceSettings settings_from_json(const Json& j) {
  ServiceSettings s;
  try {
    s.host = j.value("host", s.host);
    s.port = j.value("port", s.port);
    s.data_dir = j.value("data_dir", s.data_dir);
    s.admin_token = j.value("admin_token", s.admin_token);
  } catch (const Json::exception& e) {
    fail(ErrorKind::kValidation, std::string("service config: ") + e.what());
  }
  if (j.contains("survey")) s.survey = survey_config_from_json(j["survey"]);
  return s;
}

namespace {

template <class T>
T parse_env_number(const char* name, const std::string& text) {
  try {
    std::size_t used = 0;
    T v;
    if constexpr (std::is_floating_point_v<T>) {
      v = static_cast<T>(std::stod(text, &used));
    } else {
      const long long n = std::stoll(text, &used);
      if (n < 0) throw std::out_of_range("negative");
      v = static_cast<T>(n);
    }
    if (used != text.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    fail(ErrorKind::kValidation, std::string(name) + ": cannot parse '" + text + "'");
  }
}

}  // namespace

void apply_env_overrides(ServiceSettings& s, const EnvLookup& env) {
  if (auto v = env("HGF_LISTEN")) {
    const auto colon = v->rfind(':');
    if (colon == std::string::npos) fail(ErrorKind::kValidation, "HGF_LISTEN must be host:port");
    s.host = v->substr(0, colon);
    s.port = parse_env_number<int>("HGF_LISTEN", v->substr(colon + 1));
  }
  if (auto v = env("HGF_DATA_DIR")) s.data_dir = *v;
  if (auto v = env("HGF_STAGE_QUOTA")) s.survey.stage_quota = parse_env_number<std::size_t>("HGF_STAGE_QUOTA", *v);
  if (auto v = env("HGF_EPSILON")) s.survey.policy.epsilon = parse_env_number<double>("HGF_EPSILON", *v);
  if (auto v = env("HGF_POOL_SIZE")) s.survey.policy.pool_size = parse_env_number<std::size_t>("HGF_POOL_SIZE", *v);
  if (auto v = env("HGF_ADMIN_TOKEN")) s.admin_token = *v;
  validate(s.survey.policy);
}

int http_status(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kValidation: return 422;
    case ErrorKind::kConflict:
    case ErrorKind::kState:
    case ErrorKind::kPrecondition: return 409;
    case ErrorKind::kNotFound: return 404;
    case ErrorKind::kLocked: return 423;
    case ErrorKind::kUnauthorized: return 401;
    case ErrorKind::kExhausted: return 410;
    case ErrorKind::kIo: return 500;
  }
  return 500;
}

struct HttpServer::Impl {
  SurveyService& service;
  std::string admin_token;
  httplib::Server server;

  void send_json(httplib::Response& res, int status, const Json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  void send_error(httplib::Response& res, ErrorKind kind, const std::string& message) {
    send_json(res, http_status(kind), {{"error", {{"kind", to_string(kind)}, {"message", message}}}});
  }

  static Json body_json(const httplib::Request& req) {
    if (req.body.empty()) return Json::object();
    try {
      Json j = Json::parse(req.body);
      if (!j.is_object()) fail(ErrorKind::kValidation, "request body must be a JSON object");
      return j;
    } catch (const Json::parse_error& e) {
      fail(ErrorKind::kValidation, std::string("malformed JSON body: ") + e.what());
    }
  }

  void require_admin(const httplib::Request& req) const {
    if (admin_token.empty()) fail(ErrorKind::kUnauthorized, "admin endpoints are disabled: no admin token configured");
    std::string given = req.get_header_value("X-Admin-Token");
    const std::string auth = req.get_header_value("Authorization");
    if (given.empty() && auth.rfind("Bearer ", 0) == 0) given = auth.substr(7);
    if (given != admin_token) fail(ErrorKind::kUnauthorized, "missing or wrong admin token");
  }

  // Wraps a handler so that hgf::Error maps onto a status code.
  template <class F>
  httplib::Server::Handler guarded(F f) {
    return [this, f](const httplib::Request& req, httplib::Response& res) {
      try {
        f(req, res);
      } catch (const Error& e) {
        send_error(res, e.kind(), e.what());
      } catch (const Json::exception& e) {
        send_error(res, ErrorKind::kValidation, e.what());
      } catch (const std::exception& e) {
        send_json(res, 500, {{"error", {{"kind", "internal"}, {"message", e.what()}}}});
      }
    };
  }

  void routes() {
    server.Get("/healthz", guarded([this](const httplib::Request&, httplib::Response& res) {
      send_json(res, 200, {{"status", "ok"}, {"stage", service.current_stage_index()}});
    }));

    server.Get("/comprehension", guarded([this](const httplib::Request&, httplib::Response& res) {
      Json items = Json::array();
      for (const auto& c : service.config().comprehension) {
        items.push_back({{"prompt", c.prompt}, {"choices", c.choices}});
      }
      send_json(res, 200, {{"items", items}});
    }));

    server.Post("/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const Json body = body_json(req);
      if (!body.contains("respondent_id") || !body["respondent_id"].is_string()) {
        fail(ErrorKind::kValidation, "respondent_id (string) is required");
      }
      send_json(res, 201, session_to_json(service.create_session(body["respondent_id"].get<std::string>())));
    }));

    server.Get(R"(/sessions/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
      send_json(res, 200, session_to_json(service.session(req.matches[1])));
    }));

    server.Post(R"(/sessions/([^/]+)/comprehension)",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
                  const Json body = body_json(req);
                  if (!body.contains("answers") || !body["answers"].is_array()) {
                    fail(ErrorKind::kValidation, "answers (array of strings) is required");
                  }
                  std::vector<std::string> answers;
                  for (const Json& a : body["answers"]) {
                    if (!a.is_string()) fail(ErrorKind::kValidation, "answers must be strings");
                    answers.push_back(a.get<std::string>());
                  }
                  const std::string id = req.matches[1];
                  const bool passed = service.submit_comprehension(id, answers);
                  send_json(res, 200, {{"passed", passed}, {"session", session_to_json(service.session(id))}});
                }));

    server.Get(R"(/sessions/([^/]+)/next)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      send_json(res, 200, service.next_item(req.matches[1]));
    }));

    server.Post(R"(/sessions/([^/]+)/beliefs)",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
                  const Json body = body_json(req);
                  if (!body.contains("value") || !body["value"].is_number_integer()) {
                    fail(ErrorKind::kValidation, "value must be an integer percent in [0,100]");
                  }
                  const long long v = body["value"].get<long long>();
                  if (v < 0 || v > 100) fail(ErrorKind::kValidation, "value must be an integer percent in [0,100]");
                  std::optional<std::string> explanation;
                  if (body.contains("explanation") && !body["explanation"].is_null()) {
                    if (!body["explanation"].is_string()) fail(ErrorKind::kValidation, "explanation must be a string");
                    explanation = body["explanation"].get<std::string>();
                  }
                  const BeliefResult r = service.record_belief(req.matches[1], static_cast<int>(v), explanation);
                  Json out = {{"phase", to_string(r.phase)}, {"state", to_string(r.state)}};
                  if (r.report) out["report"] = report_to_json(*r.report);
                  if (r.completion_code) out["completion_code"] = *r.completion_code;
                  send_json(res, 200, out);
                }));

    server.Get("/admin/stages/current", guarded([this](const httplib::Request& req, httplib::Response& res) {
      require_admin(req);
      send_json(res, 200, service.current_stage_json());
    }));

    server.Post("/admin/stages/advance", guarded([this](const httplib::Request& req, httplib::Response& res) {
      require_admin(req);
      Warnings warnings;
      const Stage s = service.advance_stage(&warnings);
      send_json(res, 200, {{"stage", s.index}, {"assignments", s.assignments.size()}, {"warnings", warnings}});
    }));

    server.Get("/admin/export", guarded([this](const httplib::Request& req, httplib::Response& res) {
      require_admin(req);
      ExportFilter filter;
      if (req.has_param("stage")) {
        const std::string s = req.get_param_value("stage");
        try {
          std::size_t used = 0;
          filter.stage = std::stoi(s, &used);
          if (used != s.size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
          fail(ErrorKind::kValidation, "stage must be an integer");
        }
      }
      if (req.has_param("respondent")) filter.respondent_id = req.get_param_value("respondent");
      res.status = 200;
      res.set_content(service.export_reports(filter), "application/x-ndjson");
    }));
  }
};

HttpServer::HttpServer(SurveyService& service, std::string admin_token)
    : impl_(new Impl{service, std::move(admin_token), {}}) {
  impl_->routes();
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int p = impl_->server.bind_to_any_port(host);
    if (p < 0) fail(ErrorKind::kIo, "cannot bind " + host);
    return p;
  }
  if (!impl_->server.bind_to_port(host, port)) {
    fail(ErrorKind::kIo, "cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

void HttpServer::listen_after_bind() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_) impl_->server.stop();
}

}  // namespace hgf
