#include "cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <memory>
#include <optional>
#include <set>

#include "mmrt/harness.hpp"
#include "mmrt/runtime.hpp"
#include "mmrt/text_format.hpp"

namespace mmrt::cli {

namespace {

struct RunConfig {
  std::vector<std::string> files;
  std::string megamodel;
  std::string entry;
  std::uint64_t runs = 1;
  std::string scenario;
  std::string clock = "wall";
  std::string trace_out;
  std::optional<std::uint64_t> seed;
};

void report_error(std::ostream& err, const Error& e) {
  err << e.code();
  if (e.span().known()) err << ' ' << e.span();
  err << ' ' << e.what() << '\n';
}

void report(std::ostream& os, const Diagnostic& d, const MegamodelDef& def) {
  os << d.code << ' ' << (d.span.known() ? d.span : def.span) << ' ' << d.message << '\n';
}

/// All megamodels of `files`; names must be unique across files.
std::vector<MegamodelDef> load_all(const std::vector<std::string>& files) {
  std::vector<MegamodelDef> defs;
  std::set<std::string> names;
  for (const auto& f : files) {
    for (auto& d : load_megamodel_file(f)) {
      if (!names.insert(d.name).second) {
        throw Error("ERR_DUP_NAME", "megamodel '" + d.name + "' is defined more than once", d.span);
      }
      defs.push_back(std::move(d));
    }
  }
  return defs;
}

int cmd_validate(const std::vector<std::string>& files, std::ostream& out, std::ostream& err) {
  std::vector<MegamodelDef> defs;
  try {
    defs = load_all(files);
  } catch (const Error& e) {
    report_error(err, e);
    return kUsage;
  }
  Catalog catalog;
  for (const auto& d : defs) catalog.emplace(d.name, d);
  bool clean = true;
  for (const auto& d : defs) {
    for (const auto& diag : validate(d, catalog)) {
      report(out, diag, d);
      clean = false;
    }
  }
  return clean ? kOk : kFailure;
}

int cmd_dump(const std::vector<std::string>& files, std::ostream& out, std::ostream& err) {
  try {
    out << serialize(load_all(files));
  } catch (const Error& e) {
    report_error(err, e);
    return kUsage;
  }
  return kOk;
}

int cmd_run(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  std::vector<MegamodelDef> defs;
  EventScript script;
  try {
    defs = load_all(cfg.files);
    if (!cfg.scenario.empty()) script = load_event_script(cfg.scenario);
  } catch (const Error& e) {
    report_error(err, e);
    return kUsage;
  }
  if (cfg.seed) script.config.seed = *cfg.seed;

  std::string megamodel = cfg.megamodel;
  if (megamodel.empty()) {
    if (defs.size() != 1) {
      err << "--megamodel is required when the files define " << defs.size() << " megamodels\n";
      return kUsage;
    }
    megamodel = defs.front().name;
  }

  std::unique_ptr<Clock> clock;
  if (cfg.clock == "logical") {
    clock = std::make_unique<LogicalClock>();
  } else {
    clock = std::make_unique<WallClock>();
  }
  Runtime rt(std::move(clock));
  Harness harness(script.config, script.events);
  harness.install(rt);
  std::vector<MegamodelDef> copy = defs;
  try {
    rt.register_all(std::move(copy));
  } catch (const InvalidDefinition& e) {
    for (const auto& d : e.report()) err << d.code << ' ' << d.span << ' ' << d.message << '\n';
    err << e.code() << ' ' << e.what() << '\n';
    return kUsage;
  } catch (const Error& e) {
    report_error(err, e);
    return kUsage;
  }
  if (!rt.contains(megamodel)) {
    err << "ERR_UNKNOWN_MEGAMODEL megamodel '" << megamodel << "' is not defined\n";
    return kUsage;
  }
  std::string entry = cfg.entry;
  if (entry.empty()) {
    for (const auto& op : rt.definition(megamodel).operations) {
      if (op.is_initial()) {
        entry = op.id;
        break;
      }
    }
  }
  const Operation* start = rt.definition(megamodel).find_operation(entry);
  if (start == nullptr || !start->is_initial()) {
    err << "ERR_UNKNOWN_ENTRY '" << entry << "' is not an initial operation of " << megamodel << '\n';
    return kUsage;
  }

  std::unique_ptr<std::ofstream> trace;
  if (!cfg.trace_out.empty()) {
    trace = std::make_unique<std::ofstream>(cfg.trace_out, std::ios::binary | std::ios::trunc);
    if (!*trace) {
      err << "ERR_IO cannot write '" << cfg.trace_out << "'\n";
      return kUsage;
    }
  }

  bool faulted = false;
  for (std::uint64_t i = 1; i <= cfg.runs; ++i) {
    harness.begin_run(i);
    RunResult r = rt.run(megamodel, entry);
    out << "run " << i << ": " << (r.ok() ? *r.final_op : "FAULT " + *r.fault) << '\n';
    for (const auto& ev : r.trace) {
      if (ev.kind == TraceKind::Adaptation) out << "  adaptation " << ev.megamodel << ": " << ev.status.value_or("") << '\n';
    }
    if (!r.ok()) {
      faulted = true;
      err << "run " << i << ": " << r.fault_message << '\n';
    }
    if (trace) *trace << export_trace(r);
  }
  return faulted ? kFailure : kOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Validate and run executable megamodels", "mmrt"};
  app.require_subcommand(1);

  std::vector<std::string> validate_files;
  auto* validate_cmd = app.add_subcommand("validate", "Check megamodel files and print diagnostics");
  validate_cmd->add_option("files", validate_files, ".mm files")->required();

  std::vector<std::string> dump_files;
  auto* dump_cmd = app.add_subcommand("dump-canonical", "Print the canonical form of megamodel files");
  dump_cmd->add_option("files", dump_files, ".mm files")->required();

  RunConfig cfg;
  std::uint64_t seed = 0;
  auto* run_cmd = app.add_subcommand("run", "Run a megamodel against the simulated system");
  run_cmd->add_option("files", cfg.files, ".mm files")->required();
  run_cmd->add_option("--megamodel", cfg.megamodel, "Megamodel to run");
  run_cmd->add_option("--entry", cfg.entry, "Initial operation to start from");
  run_cmd->add_option("--runs", cfg.runs, "Number of runs")->check(CLI::PositiveNumber);
  run_cmd->add_option("--scenario", cfg.scenario, "Event script (JSON)");
  run_cmd->add_option("--clock", cfg.clock, "Clock source")->check(CLI::IsMember({"wall", "logical"}));
  run_cmd->add_option("--trace", cfg.trace_out, "Write the JSONL trace here");
  auto* seed_opt = run_cmd->add_option("--seed", seed, "Seed for the simulated system");

  std::vector<std::string> argv_store;
  argv_store.reserve(args.size() + 1);
  argv_store.emplace_back("mmrt");
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_store) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  if (*validate_cmd) return cmd_validate(validate_files, out, err);
  if (*dump_cmd) return cmd_dump(dump_files, out, err);
  if (*seed_opt) cfg.seed = seed;
  return cmd_run(cfg, out, err);
}

}  // namespace mmrt::cli
