// duct: use-define chain queries over MiniIL programs.
//
//   duct query --program P --file F --line N --var V [--occurrence K] [--json] [--stats]
//   duct query --program P --dump-cfg Class::method
//   duct serve --program P [--port 8080]
//   duct oracle-check --seed-range A..B [--limits JSON]
//
// Exit status of query: 0 definitions found, 3 none, 1 load/usage error,
// 2 resolve error, 4 budget exhausted.

#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "duct/chain_engine.hpp"
#include "duct/flowgraph.hpp"
#include "duct/frontdoor.hpp"
#include "duct/http_service.hpp"
#include "duct/oracle.hpp"

namespace {

constexpr int kExitFound = 0;
constexpr int kExitError = 1;
constexpr int kExitResolve = 2;
constexpr int kExitEmpty = 3;
constexpr int kExitTruncated = 4;

std::size_t budget_from(std::optional<std::size_t> flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("DUCT_BUDGET")) {
    char* end = nullptr;
    auto v = std::strtoull(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
    std::cerr << "duct: ignoring invalid DUCT_BUDGET '" << env << "'\n";
  }
  return duct::EngineOptions{}.budget;
}

void print_table(const duct::Program& p, const duct::UDChain& chain) {
  const auto& q = chain.query;
  const auto& loc = p.method(q.method).line_map.at(q.instr);
  std::cout << "use of " << p.describe(q.variable) << " at " << p.source_files.at(loc.file) << ":"
            << loc.line << " (" << p.method_name(q.method) << ", instr " << q.instr << ")\n";
  for (const auto& d : chain.definitions) {
    std::ostringstream where;
    where << p.source_files.at(d.source.file) << ":" << d.source.line;
    std::cout << "  " << std::left << std::setw(16) << where.str() << std::setw(28)
              << p.method_name(d.method) << "instr " << std::setw(5) << d.instr
              << duct::kind_name(d.kind);
    if (!d.note.empty()) std::cout << "  (" << d.note << ")";
    std::cout << "\n";
  }
  std::cout << chain.definitions.size()
            << (chain.definitions.size() == 1 ? " definition" : " definitions");
  if (chain.truncated) std::cout << " (search budget exhausted, answer incomplete)";
  std::cout << "\n";
}

struct QueryArgs {
  std::string program;
  std::string file;
  std::uint32_t line = 0;
  std::string var;
  std::optional<std::uint32_t> occurrence;
  bool json = false;
  bool stats = false;
  std::optional<std::size_t> budget;
  std::string dump_cfg;
};

int run_query(const QueryArgs& a) {
  std::unique_ptr<duct::Session> session;
  try {
    session = duct::Session::from_file(a.program, {budget_from(a.budget), true});
  } catch (const duct::LoadError& e) {
    std::cerr << a.program << ":" << e.line() << ":" << e.column() << ": " << e.what() << "\n";
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "duct: " << e.what() << "\n";
    return kExitError;
  }
  const auto& program = session->program();

  if (!a.dump_cfg.empty()) {
    auto m = program.find_method(a.dump_cfg);
    if (!m) {
      std::cerr << "duct: no method '" << a.dump_cfg << "'\n";
      return kExitResolve;
    }
    try {
      std::cout << duct::dump_cfg(program, duct::build_cfg(program, *m));
    } catch (const duct::CfgError& e) {
      std::cerr << "duct: " << e.what() << "\n";
      return kExitError;
    }
    return kExitFound;
  }
  if (a.file.empty() || a.line == 0 || a.var.empty()) {
    std::cerr << "duct: query needs --file, --line and --var (or --dump-cfg)\n";
    return kExitError;
  }

  duct::UDChain chain;
  try {
    chain = session->query({a.file, a.line, a.var, a.occurrence});
  } catch (const duct::UnknownFileError& e) {
    std::cerr << "duct: " << e.what() << "\n";
    return kExitResolve;
  } catch (const duct::ResolveError& e) {
    std::cerr << "duct: " << e.what() << " [" << duct::reason_code(e.reason()) << "]\n";
    return kExitResolve;
  } catch (const duct::CfgError& e) {
    std::cerr << "duct: " << e.what() << "\n";
    return kExitError;
  }

  if (a.json) {
    std::cout << session->response_json(chain).dump(2) << "\n";
  } else {
    print_table(program, chain);
  }
  if (a.stats) {
    std::cerr << duct::stats_json(session->index().statistics(), chain.states_visited).dump(2)
              << "\n";
  }
  if (chain.truncated) return kExitTruncated;
  return chain.definitions.empty() ? kExitEmpty : kExitFound;
}

int run_serve(const std::string& program_path, int port, const std::string& host,
              std::optional<std::size_t> budget) {
  std::unique_ptr<duct::Session> session;
  try {
    session = duct::Session::from_file(program_path, {budget_from(budget), true});
  } catch (const duct::LoadError& e) {
    std::cerr << program_path << ":" << e.line() << ":" << e.column() << ": " << e.what() << "\n";
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "duct: " << e.what() << "\n";
    return kExitError;
  }
  auto server = duct::make_server(*session);
  if (!server->bind_to_port(host, port)) {
    std::cerr << "duct: cannot bind " << host << ":" << port << "\n";
    return kExitError;
  }
  std::cerr << "duct: serving " << program_path << " on http://" << host << ":" << port << "\n";
  server->listen_after_bind();
  return 0;
}

duct::oracle::GeneratorLimits parse_limits(const std::string& text) {
  duct::oracle::GeneratorLimits l;
  if (text.empty()) return l;
  auto j = nlohmann::json::parse(text);
  if (!j.is_object()) throw std::runtime_error("--limits must be a JSON object");
  l.max_methods = j.value("max_methods", l.max_methods);
  l.max_blocks_per_method = j.value("max_blocks_per_method", l.max_blocks_per_method);
  l.max_locals = j.value("max_locals", l.max_locals);
  l.max_class_depth = j.value("max_class_depth", l.max_class_depth);
  l.byref_probability = j.value("byref_probability", l.byref_probability);
  l.virtual_probability = j.value("virtual_probability", l.virtual_probability);
  return l;
}

std::set<duct::oracle::ReferenceDefinition> engine_answer(const duct::UDChain& chain) {
  std::set<duct::oracle::ReferenceDefinition> out;
  for (const auto& d : chain.definitions) out.insert({d.method, d.instr, d.kind, d.note});
  return out;
}

void print_answer(const duct::Program& p, const char* who,
                  const std::set<duct::oracle::ReferenceDefinition>& defs) {
  std::cout << who << " (" << defs.size() << "):\n";
  for (const auto& d : defs) {
    std::cout << "  " << p.method_name(d.method) << " instr " << d.instr << " "
              << duct::kind_name(d.kind);
    if (!d.note.empty()) std::cout << " (" << d.note << ")";
    std::cout << "\n";
  }
}

int run_oracle_check(const std::string& range, const std::string& limits_text) {
  std::uint64_t first = 0;
  std::uint64_t last = 0;
  auto dots = range.find("..");
  try {
    if (dots == std::string::npos) throw std::invalid_argument(range);
    first = std::stoull(range.substr(0, dots));
    last = std::stoull(range.substr(dots + 2));
  } catch (const std::exception&) {
    std::cerr << "duct: --seed-range must look like A..B\n";
    return kExitError;
  }
  duct::oracle::GeneratorLimits limits;
  try {
    std::string text = limits_text;
    if (!text.empty() && text.front() != '{') text = duct::read_file(text);
    limits = parse_limits(text);
  } catch (const std::exception& e) {
    std::cerr << "duct: bad --limits: " << e.what() << "\n";
    return kExitError;
  }

  std::size_t programs = 0;
  std::size_t queries = 0;
  std::size_t skipped = 0;
  for (auto seed = first; seed <= last; ++seed) {
    limits.seed = seed;
    auto gen = duct::oracle::generate_random_program(limits);
    duct::ProgramIndex index(gen.program);
    ++programs;
    for (const auto& use : gen.uses) {
      std::set<duct::oracle::ReferenceDefinition> expected;
      try {
        expected = duct::oracle::reference_ud_chain(gen.program, use).definitions;
      } catch (const duct::oracle::BoundsError&) {
        ++skipped;
        continue;
      }
      ++queries;
      auto chain = duct::compute_ud_chain(index, use);
      auto actual = engine_answer(chain);
      if (actual != expected || chain.truncated) {
        std::cout << "mismatch: seed " << seed << ", use of " << gen.program.describe(use.variable)
                  << " at " << gen.program.method_name(use.method) << " instr " << use.instr
                  << (chain.truncated ? " (engine truncated)" : "") << "\n";
        std::cout << gen.text << "\n";
        print_answer(gen.program, "engine", actual);
        print_answer(gen.program, "oracle", expected);
        return kExitError;
      }
    }
    if (seed == last) break;  // guards last == UINT64_MAX
  }
  std::cout << "ok: " << programs << " programs, " << queries << " queries, " << skipped
            << " beyond oracle bounds\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Demand-driven use-define chains for MiniIL programs"};
  app.require_subcommand(1);

  QueryArgs qa;
  auto* query = app.add_subcommand("query", "Reaching definitions of a variable use");
  query->add_option("--program", qa.program, "MiniIL file")->required();
  query->add_option("--file", qa.file, "Source file named in .line directives");
  query->add_option("--line", qa.line, "Source line (1-based)");
  query->add_option("--var", qa.var, "Variable: x, x.field or x[]");
  query->add_option("--occurrence", qa.occurrence, "Which read on the line (0-based; default last)");
  query->add_flag("--json", qa.json, "Print the JSON response");
  query->add_flag("--stats", qa.stats, "Print analysis counters as JSON on stderr");
  query->add_option("--budget", qa.budget, "Visited-state budget (default 100000, env DUCT_BUDGET)");
  query->add_option("--dump-cfg", qa.dump_cfg, "Print the CFG of Class::method and exit");

  std::string serve_program;
  int port = 8080;
  std::string host = "127.0.0.1";
  std::optional<std::size_t> serve_budget;
  auto* serve = app.add_subcommand("serve", "JSON/HTTP query service");
  serve->add_option("--program", serve_program, "MiniIL file")->required();
  serve->add_option("--port", port, "Port (default 8080)");
  serve->add_option("--host", host, "Address to bind (default 127.0.0.1)");
  serve->add_option("--budget", serve_budget, "Visited-state budget per query");

  std::string seed_range;
  std::string limits;
  auto* check = app.add_subcommand("oracle-check", "Compare the engine with the reference oracle");
  check->add_option("--seed-range", seed_range, "Seeds A..B (inclusive)")->required();
  check->add_option("--limits", limits, "Generator limits as JSON text or a JSON file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : kExitError;
  }

  if (*query) return run_query(qa);
  if (*serve) return run_serve(serve_program, port, host, serve_budget);
  return run_oracle_check(seed_range, limits);
}
