// Query front end shared by the CLI and the HTTP service: one loaded program
// together with its source texts.

#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "duct/chain_engine.hpp"
#include "duct/mil.hpp"
#include "duct/program_index.hpp"

namespace duct {

struct QueryRequest {
  std::string file;
  std::uint32_t line = 0;
  std::string variable;
  std::optional<std::uint32_t> occurrence;
};

// Malformed request (HTTP 400).
class RequestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// File not part of the program (HTTP 404).
class UnknownFileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Throws RequestError unless the body is an object with a nonempty string
// "variable", a string "file", an integer "line" >= 1 and an optional
// non-negative integer "occurrence".
QueryRequest parse_query_request(const nlohmann::json& body);

std::string read_file(const std::string& path);  // throws std::runtime_error

class Session {
 public:
  // Parses the MiniIL text (LoadError propagates). Source files named by
  // .line directives are looked up relative to `source_dir`; missing ones have
  // no text.
  Session(const std::string& mil_text, const std::string& source_dir, EngineOptions options = {});
  static std::unique_ptr<Session> from_file(const std::string& mil_path, EngineOptions options = {});

  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  const Program& program() const { return *program_; }
  const ProgramIndex& index() const { return *index_; }
  const EngineOptions& options() const { return options_; }

  // Throws UnknownFileError or ResolveError.
  UseSite resolve(const QueryRequest& request) const;
  UDChain query(const QueryRequest& request) const;

  // UDChain JSON plus "context": one snippet of +-2 lines per definition.
  nlohmann::ordered_json response_json(const UDChain& chain) const;

  // {"files": [...]}
  nlohmann::ordered_json files_json() const;
  // {"file", "lines": [{"line", "text", "reads": [...]}]}. Throws
  // UnknownFileError.
  nlohmann::ordered_json source_json(const std::string& file) const;

  const std::vector<std::string>* source_lines(const std::string& file) const;

 private:
  std::unique_ptr<Program> program_;
  std::unique_ptr<ProgramIndex> index_;
  EngineOptions options_;
  std::vector<std::optional<std::vector<std::string>>> sources_;  // by file index
};

// Counters for --stats.
nlohmann::ordered_json stats_json(const Statistics& stats, std::size_t states_visited);

struct HttpReply {
  int status = 200;
  std::string body;  // JSON
};

// Routing without sockets:
//   GET  /health
//   GET  /program/files
//   GET  /source?file=F
//   POST /query
HttpReply handle_request(const Session& session, const std::string& method,
                         const std::string& path, const std::map<std::string, std::string>& params,
                         const std::string& body);

}  // namespace duct
