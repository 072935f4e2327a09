#include <filesystem>
#include <fstream>
#include <sstream>

#include "duct/chain_json.hpp"
#include "duct/frontdoor.hpp"

namespace duct {

namespace {

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

}  // namespace

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

QueryRequest parse_query_request(const nlohmann::json& body) {
  if (!body.is_object()) throw RequestError("request body must be a JSON object");
  QueryRequest r;
  auto file = body.find("file");
  if (file == body.end() || !file->is_string()) throw RequestError("'file' must be a string");
  r.file = file->get<std::string>();
  auto line = body.find("line");
  if (line == body.end() || !line->is_number_integer()) {
    throw RequestError("'line' must be an integer");
  }
  auto n = line->get<std::int64_t>();
  if (n < 1 || n > 0xffffffffLL) throw RequestError("'line' must be >= 1");
  r.line = static_cast<std::uint32_t>(n);
  auto var = body.find("variable");
  if (var == body.end() || !var->is_string() || var->get<std::string>().empty()) {
    throw RequestError("'variable' must be a nonempty string");
  }
  r.variable = var->get<std::string>();
  if (auto occ = body.find("occurrence"); occ != body.end() && !occ->is_null()) {
    if (!occ->is_number_integer() || occ->get<std::int64_t>() < 0) {
      throw RequestError("'occurrence' must be a non-negative integer");
    }
    r.occurrence = static_cast<std::uint32_t>(occ->get<std::int64_t>());
  }
  return r;
}

Session::Session(const std::string& mil_text, const std::string& source_dir, EngineOptions options)
    : program_(std::make_unique<Program>(parse_program(mil_text))),
      index_(std::make_unique<ProgramIndex>(*program_)),
      options_(options) {
  for (const auto& name : program_->source_files) {
    auto path = std::filesystem::path(source_dir) / name;
    std::error_code ec;
    if (std::filesystem::is_regular_file(path, ec)) {
      sources_.emplace_back(split_lines(read_file(path.string())));
    } else {
      sources_.emplace_back(std::nullopt);
    }
  }
}

std::unique_ptr<Session> Session::from_file(const std::string& mil_path, EngineOptions options) {
  auto dir = std::filesystem::path(mil_path).parent_path().string();
  return std::make_unique<Session>(read_file(mil_path), dir.empty() ? "." : dir, options);
}

UseSite Session::resolve(const QueryRequest& request) const {
  if (!program_->find_source_file(request.file)) {
    throw UnknownFileError("unknown file '" + request.file + "'");
  }
  return resolve_use_site(*program_, request.file, request.line, request.variable,
                          request.occurrence);
}

UDChain Session::query(const QueryRequest& request) const {
  return compute_ud_chain(*index_, resolve(request), options_);
}

const std::vector<std::string>* Session::source_lines(const std::string& file) const {
  auto idx = program_->find_source_file(file);
  if (!idx || !sources_[*idx]) return nullptr;
  return &*sources_[*idx];
}

nlohmann::ordered_json Session::response_json(const UDChain& chain) const {
  auto out = chain_json(*program_, chain);
  auto context = nlohmann::ordered_json::array();
  for (const auto& d : chain.definitions) {
    const auto& file = program_->source_files.at(d.source.file);
    nlohmann::ordered_json snippet;
    snippet["file"] = file;
    snippet["line"] = d.source.line;
    auto lines = nlohmann::ordered_json::array();
    if (const auto* text = source_lines(file)) {
      auto first = d.source.line > 2 ? d.source.line - 2 : 1;
      auto last = std::min<std::uint32_t>(d.source.line + 2, static_cast<std::uint32_t>(text->size()));
      for (auto n = first; n <= last; ++n) {
        nlohmann::ordered_json l;
        l["line"] = n;
        l["text"] = (*text)[n - 1];
        lines.push_back(std::move(l));
      }
    }
    snippet["lines"] = std::move(lines);
    context.push_back(std::move(snippet));
  }
  out["context"] = std::move(context);
  return out;
}

nlohmann::ordered_json Session::files_json() const {
  nlohmann::ordered_json out;
  out["files"] = program_->source_files;
  return out;
}

nlohmann::ordered_json Session::source_json(const std::string& file) const {
  auto idx = program_->find_source_file(file);
  if (!idx) throw UnknownFileError("unknown file '" + file + "'");
  const auto* text = source_lines(file);
  if (!text) throw UnknownFileError("no source text for '" + file + "'");
  nlohmann::ordered_json out;
  out["file"] = file;
  auto lines = nlohmann::ordered_json::array();
  for (std::uint32_t n = 1; n <= text->size(); ++n) {
    nlohmann::ordered_json l;
    l["line"] = n;
    l["text"] = (*text)[n - 1];
    l["reads"] = variables_read_on_line(*program_, *idx, n);
    lines.push_back(std::move(l));
  }
  out["lines"] = std::move(lines);
  return out;
}

nlohmann::ordered_json stats_json(const Statistics& stats, std::size_t states_visited) {
  nlohmann::ordered_json out;
  out["instructions_visited"] = stats.instructions_visited;
  out["methods_scanned"] = stats.methods_scanned;
  out["blocks_visited"] = stats.blocks_visited;
  out["cache_hits"] = stats.cache_hits;
  out["cfgs_built"] = stats.cfgs_built;
  out["chain_entries"] = stats.chain_entries;
  out["states_visited"] = states_visited;
  return out;
}

}  // namespace duct
