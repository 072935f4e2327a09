#include "duct/http_service.hpp"

namespace duct {

namespace {

HttpReply error_reply(int status, const std::string& message,
                      const std::optional<std::string>& reason = std::nullopt) {
  nlohmann::ordered_json j;
  j["error"] = message;
  if (reason) j["reason"] = *reason;
  return {status, j.dump(2)};
}

HttpReply json_reply(const nlohmann::ordered_json& j) { return {200, j.dump(2)}; }

}  // namespace

HttpReply handle_request(const Session& session, const std::string& method,
                         const std::string& path, const std::map<std::string, std::string>& params,
                         const std::string& body) {
  try {
    if (path == "/health") {
      if (method != "GET") return error_reply(405, "method not allowed");
      nlohmann::ordered_json j;
      j["status"] = "ok";
      j["methods"] = session.program().methods.size();
      j["instructions"] = session.program().instruction_count();
      return json_reply(j);
    }
    if (path == "/program/files") {
      if (method != "GET") return error_reply(405, "method not allowed");
      return json_reply(session.files_json());
    }
    if (path == "/source") {
      if (method != "GET") return error_reply(405, "method not allowed");
      auto it = params.find("file");
      if (it == params.end() || it->second.empty()) return error_reply(400, "missing 'file' parameter");
      return json_reply(session.source_json(it->second));
    }
    if (path == "/query") {
      if (method != "POST") return error_reply(405, "method not allowed");
      auto parsed = nlohmann::json::parse(body, nullptr, false);
      if (parsed.is_discarded()) return error_reply(400, "request body is not valid JSON");
      auto request = parse_query_request(parsed);
      return json_reply(session.response_json(session.query(request)));
    }
    return error_reply(404, "no such endpoint");
  } catch (const RequestError& e) {
    return error_reply(400, e.what());
  } catch (const UnknownFileError& e) {
    return error_reply(404, e.what());
  } catch (const ResolveError& e) {
    return error_reply(422, e.what(), std::string(reason_code(e.reason())));
  }
}

std::unique_ptr<httplib::Server> make_server(const Session& session) {
  auto server = std::make_unique<httplib::Server>();
  auto dispatch = [&session](const httplib::Request& req, httplib::Response& res) {
    std::map<std::string, std::string> params;
    for (const auto& [k, v] : req.params) params.emplace(k, v);
    auto reply = handle_request(session, req.method, req.path, params, req.body);
    res.status = reply.status;
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_content(reply.body, "application/json");
  };
  for (const char* path : {"/health", "/program/files", "/source", "/query"}) {
    server->Get(path, dispatch);
    server->Post(path, dispatch);
  }
  server->Options(".*", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.status = 204;
  });
  server->set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty()) {
      res.set_content(error_reply(res.status, "no such endpoint").body, "application/json");
    }
  });
  return server;
}

}  // namespace duct
