#include <doctest.h>

#include <deque>

#include "mmrt/runtime.hpp"
#include "mmrt/text_format.hpp"
#include "support.hpp"

using namespace mmrt;
using namespace mmrt::testing;

namespace {

MegamodelDef parse_one(const std::string& text) { return parse_megamodels(text).front(); }

std::unique_ptr<Runtime> logical_runtime() { return std::make_unique<Runtime>(std::make_unique<LogicalClock>()); }

/// Returns the queued statuses in order, then repeats the last one.
Behavior scripted(std::deque<std::string> statuses) {
  auto q = std::make_shared<std::deque<std::string>>(std::move(statuses));
  return [q](OperationContext&) {
    std::string s = q->front();
    if (q->size() > 1) q->pop_front();
    return s;
  };
}

Behavior constant(std::string status) {
  return [status](OperationContext&) { return status; };
}

std::vector<std::string> kinds(const RunResult& r) {
  std::vector<std::string> out;
  for (const auto& e : r.trace) out.emplace_back(to_string(e.kind));
  return out;
}

/// "Op[status]" for every op_exit, plus the final.
std::vector<std::string> path(const RunResult& r) {
  std::vector<std::string> out;
  for (const auto& e : r.trace) {
    if (e.kind == TraceKind::OpExit) out.push_back(*e.op + "[" + *e.status + "]");
    if (e.kind == TraceKind::RunEnd) out.push_back(*e.op);
  }
  return out;
}

const char* kTwoWay = R"(
megamodel B {
  initial S;
  final Done;
  op A : Other behavior "a" {
    status ok, fail;
  }
  S -> A;
  A.ok -> Done;
  A.fail -> Done;
}
)";

const char* kCounter = R"(
megamodel C {
  model Data;
  initial S;
  final Hot;
  final Cold;
  decision D;
  op A : Other behavior "a" {
    writes Data;
    status ok;
  }
  S -> A;
  A.ok -> D;
  D -> [count(S.A) == 0 and count(D.Hot) > 1] Hot;
  D -> else Cold;
}
)";

}  // namespace

TEST_CASE("register: duplicate names and invalid definitions") {
  Runtime rt;
  rt.register_megamodel(parse_one(kTwoWay));
  CHECK(error_code([&] { rt.register_megamodel(parse_one(kTwoWay)); }) == "ERR_DUPLICATE_NAME");

  auto modular = load({"fig3_self_repair_modular.mm"});
  try {
    rt.register_megamodel(modular.front());
    FAIL("expected ERR_INVALID");
  } catch (const InvalidDefinition& e) {
    CHECK(e.code() == "ERR_INVALID");
    CHECK(codes_of(e.report()) == std::set<std::string>{"E_DANGLING_REF"});
  }
  CHECK_FALSE(rt.contains("SelfRepairModular"));
}

TEST_CASE("register: fresh context") {
  Runtime rt;
  rt.register_megamodel(parse_one(kTwoWay));
  const ExecutionContext& ctx = rt.context("B");
  CHECK_FALSE(ctx.active);
  CHECK_FALSE(ctx.current.has_value());
  for (const auto& t : rt.definition("B").transitions) {
    auto it = ctx.info.find(t.id);
    if (it != ctx.info.end()) CHECK(it->second == cond::TransitionInfo{});
  }
}

TEST_CASE("run: self-repair with no failures ends Analyzed") {
  Scenario s(load({"fig1_self_repair.mm"}));
  RunResult r = s.run(1, "SelfRepair", "Start");
  REQUIRE(r.ok());
  CHECK(*r.final_op == "Analyzed");
  CHECK(path(r) == std::vector<std::string>{"Update[done]", "CheckForFailures[no_failures]", "Analyzed"});
  std::vector<std::string> taken;
  for (const auto& e : r.trace) {
    if (e.kind == TraceKind::TransitionTaken) taken.push_back(*e.op);
  }
  CHECK(taken == std::vector<std::string>{"Start.Update", "Update.done", "CheckForFailures.no_failures"});
}

TEST_CASE("run: decision with only a default") {
  auto rt = logical_runtime();
  rt->register_megamodel(parse_one(R"(
megamodel M {
  initial S;
  final F;
  decision D;
  S -> D;
  D -> else F;
}
)"));
  for (int i = 0; i < 3; ++i) CHECK(rt->run("M", "S").final_op == "F");
}

TEST_CASE("bookkeeping: seven oks then one fail") {
  auto rt = logical_runtime();
  rt->register_megamodel(parse_one(kTwoWay));
  rt->bind_behavior("a", scripted({"ok", "ok", "ok", "ok", "ok", "ok", "ok", "fail"}));

  // Hand simulation of the rule: taken edge resets, sibling increments.
  std::map<std::string, std::uint64_t> expected{{"A.ok", 0}, {"A.fail", 0}};
  std::vector<std::string> outcomes = {"ok", "ok", "ok", "ok", "ok", "ok", "ok", "fail"};
  for (const auto& o : outcomes) {
    for (auto& [id, c] : expected) c = id == "A." + o ? 0 : c + 1;
  }
  REQUIRE(expected["A.ok"] == 1);
  REQUIRE(expected["A.fail"] == 0);

  for (int i = 0; i < 8; ++i) REQUIRE(rt->run("B", "S").ok());
  const auto& info = rt->context("B").info;
  CHECK(info.at("A.ok").count == 1);
  CHECK(info.at("A.fail").count == 0);
  CHECK(info.at("A.ok").taken);
  CHECK(info.at("A.fail").taken);
  CHECK(info.at("A.fail").time > info.at("A.ok").time);
}

TEST_CASE("bookkeeping: counts persist across runs and apply to every source kind") {
  auto rt = logical_runtime();
  rt->register_megamodel(parse_one(kCounter));
  rt->bind_behavior("a", constant("ok"));
  // D.Hot accrues one per run while Cold is taken: Hot first fires on run 3.
  CHECK(rt->run("C", "S").final_op == "Cold");
  CHECK(rt->run("C", "S").final_op == "Cold");
  CHECK(rt->run("C", "S").final_op == "Hot");
  CHECK(rt->run("C", "S").final_op == "Cold");
  const auto& info = rt->context("C").info;
  CHECK(info.at("S.A").count == 0);
  CHECK(info.at("S.A").taken);
  CHECK(info.at("D.Hot").count == 1);
  CHECK(info.at("D.Cold").count == 0);
}

TEST_CASE("bookkeeping: time is the clock at taking") {
  auto rt = logical_runtime();
  rt->register_megamodel(parse_one(kTwoWay));
  rt->bind_behavior("a", constant("ok"));
  RunResult r = rt->run("B", "S");
  for (const auto& e : r.trace) {
    if (e.kind == TraceKind::TransitionTaken) CHECK(rt->context("B").info.at(*e.op).time == e.clock);
  }
}

TEST_CASE("faults") {
  auto rt = logical_runtime();
  rt->register_megamodel(parse_one(kTwoWay));

  SUBCASE("unbound behavior") {
    RunResult r = rt->run("B", "S");
    CHECK(r.fault == "ERR_UNBOUND_BEHAVIOR");
  }
  SUBCASE("undeclared status") {
    rt->bind_behavior("a", constant("maybe"));
    CHECK(rt->run("B", "S").fault == "ERR_BAD_STATUS");
  }
  SUBCASE("behavior throws") {
    rt->bind_behavior("a", [](OperationContext&) -> std::string { throw std::runtime_error("boom"); });
    RunResult r = rt->run("B", "S");
    CHECK(r.fault == "ERR_BEHAVIOR");
    CHECK(r.fault_message.find("boom") != std::string::npos);
  }
  SUBCASE("behavior raises a library error") {
    rt->bind_behavior("a", [](OperationContext& ctx) -> std::string {
      ctx.model("Nope");
      return "ok";
    });
    CHECK(rt->run("B", "S").fault == "ERR_UNDECLARED_MODEL");
  }
  SUBCASE("run from inside a behavior") {
    rt->bind_behavior("a", [&](OperationContext&) -> std::string {
      rt->run("B", "S");
      return "ok";
    });
    CHECK(rt->run("B", "S").fault == "ERR_REENTRANT");
  }
  SUBCASE("faulted run ends with a fault record and leaves contexts inactive") {
    rt->bind_behavior("a", constant("maybe"));
    RunResult r = rt->run("B", "S");
    REQUIRE(!r.trace.empty());
    CHECK(r.trace.back().kind == TraceKind::Fault);
    CHECK(r.trace.back().status == "ERR_BAD_STATUS");
    CHECK(r.trace.back().op == "A");
    for (const auto& e : r.trace) CHECK(e.kind != TraceKind::RunEnd);
    CHECK_FALSE(rt->context("B").active);
    // Bookkeeping accrued before the fault is kept.
    CHECK(rt->context("B").info.at("S.A").taken);
    rt->bind_behavior("a", constant("ok"));
    CHECK(rt->run("B", "S").ok());
  }
  CHECK_FALSE(rt->running());
}

TEST_CASE("faults: conditions and step limit") {
  auto rt = logical_runtime();
  rt->register_megamodel(parse_one(R"(
megamodel Z {
  initial S;
  final F;
  final G;
  decision D;
  S -> D;
  D -> [1 / 0 > 0] F;
  D -> else G;
}
)"));
  CHECK(rt->run("Z", "S").fault == "ERR_DIV_ZERO");

  rt->register_megamodel(parse_one(R"(
megamodel L {
  initial S;
  final F;
  decision D;
  op A : Other behavior "a" {
    status ok;
  }
  S -> A;
  A.ok -> D;
  D -> [false] F;
  D -> else A;
}
)"));
  rt->bind_behavior("a", constant("ok"));
  RunOptions opts;
  opts.max_steps = 50;
  RunResult r = rt->run("L", "S", opts);
  CHECK(r.fault == "ERR_STEP_LIMIT");
}

TEST_CASE("run: bad arguments are rejected before starting") {
  auto rt = logical_runtime();
  rt->register_megamodel(parse_one(kTwoWay));
  CHECK(error_code([&] { rt->run("Nope", "S"); }) == "ERR_UNKNOWN_MEGAMODEL");
  CHECK(error_code([&] { rt->run("B", "A"); }) == "ERR_UNKNOWN_ENTRY");
  CHECK(error_code([&] { rt->run("B", "Missing"); }) == "ERR_UNKNOWN_ENTRY");
  for (const auto& [id, info] : rt->context("B").info) CHECK(info == cond::TransitionInfo{});
}

TEST_CASE("calls: reentrancy is a runtime fault") {
  auto rt = logical_runtime();
  rt->register_all(parse_megamodels(R"(
megamodel Self {
  initial S;
  final F;
  call C = Self.S map { F -> done };
  S -> C;
  C.done -> F;
}
)"));
  RunResult r = rt->run("Self", "S");
  CHECK(r.fault == "ERR_REENTRANT");
  CHECK_FALSE(rt->context("Self").active);
}

TEST_CASE("calls: one context per megamodel shared by every call site") {
  Scenario s(load({"fig2_analysis.mm", "fig3_self_repair_modular.mm", "fig4_self_optimization.mm",
                   "fig5_loop_sequence.mm"}),
             {}, {fail_event(2, "orders", "crash", "restart")});
  REQUIRE(s.run(1, "LoopSequence", "Start").final_op == "Analyzed");
  REQUIRE(s.run(2, "LoopSequence", "Start").final_op == "Analyzed");
  const auto& info = s.rt.context("SelfOptimization").info;
  CHECK(info.at("Analyze.AnalyzeBottlenecks").taken);
  CHECK(info.at("Start.Update").taken);
  // Both call sites executed AnalyzeBottlenecks through the same context.
  CHECK(info.at("AnalyzeBottlenecks.no_bottlenecks").count == 0);
  CHECK(info.at("AnalyzeBottlenecks.bottlenecks").count == 2);
  CHECK(s.rt.names().size() == 4);
}

TEST_CASE("trace: synchrony and ordering") {
  Scenario s(load({"fig2_analysis.mm", "fig3_self_repair_modular.mm", "fig4_self_optimization.mm",
                   "fig5_loop_sequence.mm"}),
             {}, {fail_event(1, "orders", "crash", "restart"), load_event(1, "catalog", 500)});
  RunResult r = s.run(1, "LoopSequence", "Start");
  REQUIRE(r.ok());
  CHECK(r.trace.front().kind == TraceKind::RunStart);
  CHECK(r.trace.back().kind == TraceKind::RunEnd);
  std::vector<std::string> calls;
  int open_ops = 0;
  for (std::size_t i = 0; i < r.trace.size(); ++i) {
    const TraceEvent& e = r.trace[i];
    CHECK(e.seq == i);
    if (i > 0) CHECK(e.clock > r.trace[i - 1].clock);
    if (e.kind == TraceKind::CallEnter) calls.push_back(*e.op);
    if (e.kind == TraceKind::CallExit) {
      REQUIRE(!calls.empty());
      CHECK(calls.back() == *e.op);
      calls.pop_back();
    }
    if (e.kind == TraceKind::OpEnter) CHECK(++open_ops == 1);
    if (e.kind == TraceKind::OpExit) CHECK(--open_ops == 0);
  }
  CHECK(calls.empty());
}

TEST_CASE("export_trace") {
  CHECK(export_trace(std::vector<TraceEvent>{}).empty());
  Scenario s(load({"fig1_self_repair.mm"}));
  RunResult r = s.run(1, "SelfRepair", "Start");
  const std::string text = export_trace(r);
  CHECK(text.substr(0, text.find('\n')) ==
        R"({"seq":0,"kind":"run_start","megamodel":"SelfRepair","op":null,"status":null,"clock":0})");
  CHECK(text == read_file(source_path("tests/fixtures/traces/fig1_no_failures.jsonl")));
}

TEST_CASE("export_trace: faulted run ends with a fault line") {
  auto rt = logical_runtime();
  rt->register_megamodel(parse_one(kTwoWay));
  rt->bind_behavior("a", constant("maybe"));
  const std::string text = export_trace(rt->run("B", "S"));
  const std::string last = text.substr(text.rfind('\n', text.size() - 2) + 1);
  CHECK(last == "{\"seq\":4,\"kind\":\"fault\",\"megamodel\":\"B\",\"op\":\"A\",\"status\":\"ERR_BAD_STATUS\",\"clock\":4}\n");
  CHECK(text.find("run_end") == std::string::npos);
}

TEST_CASE("determinism: identical runtimes give identical traces") {
  auto trace_of = [] {
    HarnessConfig cfg;
    cfg.load_jitter = 40;
    cfg.seed = 11;
    Scenario s(load({"fig8_layer1.mm", "fig9_layer2.mm"}), cfg, {fail_event(2, "payment", "crash", "replace_component")});
    std::string out;
    for (std::uint64_t i = 1; i <= 10; ++i) out += export_trace(s.run(i, "SelfRepairL1", "Start"));
    return out;
  };
  CHECK(trace_of() == trace_of());
}

// ---------------------------------------------------------------------------
// Model access

namespace {

const char* kAccess = R"(
megamodel Acc {
  model R;
  model W;
  model N;
  initial S;
  final F;
  op A : Other behavior "a" {
    reads R;
    writes W;
    annotates N;
    reads N;
    status ok;
  }
  S -> A;
  A.ok -> F;
}
)";

}  // namespace

TEST_CASE("model access follows declared modes") {
  auto rt = logical_runtime();
  rt->register_megamodel(parse_one(kAccess));
  std::map<std::string, std::string> seen;
  rt->bind_behavior("a", [&](OperationContext& ctx) {
    seen["read.content"] = error_code([&] { ctx.model("R").replace_content({{"x", 1}}); });
    seen["read.annotations"] = error_code([&] { ctx.model("R").replace_annotations({{"x", 1}}); });
    seen["annotate.content"] = error_code([&] { ctx.model("N").replace_content({{"x", 1}}); });
    seen["annotate.annotations"] = error_code([&] { ctx.model("N").replace_annotations({{"note", 1}}); });
    seen["write.content"] = error_code([&] { ctx.model("W").replace_content({{"x", 2}}); });
    seen["write.annotations"] = error_code([&] { ctx.model("W").replace_annotations({{"y", 3}}); });
    seen["undeclared"] = error_code([&] { ctx.model("Zzz"); });
    seen["not megamodel"] = error_code([&] { ctx.megamodel_model("W"); });
    CHECK(ctx.model("N").mode() == UseMode::Annotate);
    CHECK(ctx.uses("R"));
    CHECK_FALSE(ctx.uses("Zzz"));
    return "ok";
  });
  auto& repo = rt->repository();
  const auto r0 = repo.entry("R");
  const auto n0 = repo.entry("N");
  const auto w0 = repo.entry("W");
  REQUIRE(rt->run("Acc", "S").ok());

  CHECK(seen["read.content"] == "ERR_ACCESS_MODE");
  CHECK(seen["read.annotations"] == "ERR_ACCESS_MODE");
  CHECK(seen["annotate.content"] == "ERR_ACCESS_MODE");
  CHECK(seen["annotate.annotations"] == "");
  CHECK(seen["write.content"] == "");
  CHECK(seen["write.annotations"] == "");
  CHECK(seen["undeclared"] == "ERR_UNDECLARED_MODEL");
  CHECK(seen["not megamodel"] == "ERR_ACCESS_MODE");

  CHECK(repo.entry("R") == r0);
  CHECK(repo.version("N") == n0.version + 1);
  CHECK(repo.entry("N").content_version == n0.content_version);
  CHECK(repo.get("N").annotations == nlohmann::json{{"note", 1}});
  CHECK(repo.version("W") == w0.version + 2);
  CHECK(repo.get("W").content == nlohmann::json{{"x", 2}});
}

TEST_CASE("a rejected write faults the run when the behavior does not handle it") {
  auto rt = logical_runtime();
  rt->register_megamodel(parse_one(kAccess));
  rt->bind_behavior("a", [](OperationContext& ctx) {
    ctx.model("R").replace_content({{"x", 1}});
    return "ok";
  });
  RunResult r = rt->run("Acc", "S");
  CHECK(r.fault == "ERR_ACCESS_MODE");
  CHECK(rt->repository().version("R") == 0);
}

// ---------------------------------------------------------------------------
// Adaptation

namespace {

struct Snapshot {
  std::string def;
  std::map<std::string, cond::TransitionInfo, std::less<>> info;
  std::map<std::string, ModelRepository::Entry, std::less<>> repo;
  std::string bindings;

  bool operator==(const Snapshot&) const = default;
};

Snapshot snapshot(const Runtime& rt, const std::string& m) {
  std::string bindings;
  for (const auto& decl : rt.definition(m).models) bindings += decl.id + "=" + rt.binding(m, decl.id) + ";";
  return {serialize(rt.definition(m)), rt.context(m).info, rt.repository().entries(), bindings};
}

}  // namespace

TEST_CASE("adapt_replace_model") {
  Scenario s(load({"fig8_layer1.mm", "fig9_layer2.mm"}));
  auto& repo = s.rt.repository();

  SUBCASE("rebinds and bumps the version") {
    const auto v0 = repo.version("StrategyCandidates");
    s.rt.adapt_replace_model("SelfRepairL1", "RepairStrategies", "StrategyCandidates");
    CHECK(s.rt.binding("SelfRepairL1", "RepairStrategies") == "StrategyCandidates");
    CHECK(repo.version("StrategyCandidates") == v0 + 1);
    REQUIRE(s.rt.idle_events().size() == 1);
    const TraceEvent& e = s.rt.idle_events().front();
    CHECK(e.kind == TraceKind::Adaptation);
    CHECK(e.megamodel == "SelfRepairL1");
    CHECK(e.op == "RepairStrategies");
  }
  SUBCASE("same handle still bumps the version") {
    const auto v0 = repo.version("RepairStrategies");
    s.rt.adapt_replace_model("SelfRepairL1", "RepairStrategies", "RepairStrategies");
    CHECK(repo.version("RepairStrategies") == v0 + 1);
    CHECK(s.rt.idle_events().size() == 1);
    CHECK(s.run(1, "SelfRepairL1", "Start").final_op == "Analyzed");
  }
  SUBCASE("unknown handle") {
    const Snapshot before = snapshot(s.rt, "SelfRepairL1");
    CHECK(error_code([&] { s.rt.adapt_replace_model("SelfRepairL1", "RepairStrategies", "NoSuchHandle"); }) ==
          "ERR_UNKNOWN_ELEMENT");
    CHECK(error_code([&] { s.rt.adapt_replace_model("SelfRepairL1", "NoSuchModel", "StrategyCandidates"); }) ==
          "ERR_UNKNOWN_ELEMENT");
    CHECK(s.rt.idle_events().empty());
    CHECK(snapshot(s.rt, "SelfRepairL1") == before);
  }
  SUBCASE("a batch that fails validation touches no version") {
    const Snapshot before = snapshot(s.rt, "SelfRepairL1");
    CHECK(error_code([&] {
            s.rt.adapt("SelfRepairL1").replace_model("RepairStrategies", "StrategyCandidates").remove_operation("Effected").commit();
          }) == "ERR_INVALID");
    CHECK(snapshot(s.rt, "SelfRepairL1") == before);
    CHECK(s.rt.idle_events().empty());
  }
  SUBCASE("megamodel-typed models cannot be rebound to a handle") {
    CHECK(error_code([&] { s.rt.adapt_replace_model("SelfRepairStrategies", "SelfRepairLoop", "ArchModel"); }) ==
          "ERR_UNKNOWN_ELEMENT");
  }
}

TEST_CASE("adapt_set_condition") {
  auto fruitless_runs = [](std::optional<std::int64_t> threshold) {
    Scenario s(load({"fig8_layer1.mm", "fig9_layer2.mm"}), {}, {fail_event(1, "orders", "crash", "replace_component")});
    if (threshold) {
      s.rt.adapt_set_condition("SelfRepairL1", "NeedAdaptation.Adapt",
                               cond::parse_condition("count(CheckForFailures.no_failures) > " + std::to_string(*threshold)));
    }
    for (std::uint64_t i = 1; i <= 10; ++i) {
      RunResult r = s.run(i, "SelfRepairL1", "Start");
      for (const auto& e : r.trace) {
        if (e.kind == TraceKind::Adaptation) return i;
      }
    }
    return std::uint64_t{0};
  };
  CHECK(fruitless_runs(std::nullopt) == 6);
  CHECK(fruitless_runs(3) == 4);
  CHECK(fruitless_runs(5) == 6);

  Scenario s(load({"fig8_layer1.mm", "fig9_layer2.mm"}));
  const Transition* t = s.rt.definition("SelfRepairL1").find_transition("NeedAdaptation.Adapt");
  REQUIRE(t != nullptr);
  s.rt.adapt_set_condition("SelfRepairL1", "NeedAdaptation.Adapt", *t->condition);
  CHECK(s.rt.idle_events().size() == 1);
  CHECK(s.rt.idle_events().front().op == "NeedAdaptation.Adapt");

  const Snapshot before = snapshot(s.rt, "SelfRepairL1");
  CHECK(error_code([&] {
          s.rt.adapt_set_condition("SelfRepairL1", "NeedAdaptation.Adapt", cond::parse_condition("count(Nope.x) > 1"));
        }) == "ERR_UNRESOLVED_REF");
  CHECK(error_code([&] {
          s.rt.adapt_set_condition("SelfRepairL1", "NeedAdaptation.Adapt", cond::count({"Update", "done"}));
        }) == "ERR_TYPE");
  CHECK(error_code([&] {
          s.rt.adapt_set_condition("SelfRepairL1", "Update.done", cond::boolean(true));
        }) == "ERR_INVALID");
  CHECK(snapshot(s.rt, "SelfRepairL1") == before);
  CHECK(s.rt.idle_events().size() == 1);
}

TEST_CASE("adapt_rewire: batch swapping decision targets") {
  auto rt = logical_runtime();
  rt->register_megamodel(parse_one(R"(
megamodel W {
  initial S;
  final F;
  final G;
  decision D;
  op A : Other behavior "a" {
    status ok;
  }
  op B : Other behavior "b" {
    status ok;
  }
  S -> D;
  D -> [false] A;
  D -> else B;
  A.ok -> F;
  B.ok -> G;
}
)"));
  rt->bind_behavior("a", constant("ok"));
  rt->bind_behavior("b", constant("ok"));
  CHECK(rt->run("W", "S").final_op == "G");
  rt->adapt("W").rewire("D.B", "A").rewire("D.A", "B").commit();
  CHECK(rt->run("W", "S").final_op == "F");
  // A single rewire would leave B unreachable.
  CHECK(error_code([&] { rt->adapt_rewire("W", "D.A", "A"); }) == "ERR_INVALID");
  CHECK(rt->run("W", "S").final_op == "F");
}

TEST_CASE("adapt: structural edits") {
  auto rt = logical_runtime();
  rt->register_megamodel(parse_one(kTwoWay));
  rt->bind_behavior("a", constant("ok"));
  REQUIRE(rt->run("B", "S").ok());
  const Snapshot before = snapshot(*rt, "B");

  SUBCASE("removing the only final is rejected") {
    try {
      rt->adapt_remove_operation("B", "Done");
      FAIL("expected ERR_INVALID");
    } catch (const InvalidDefinition& e) {
      CHECK(codes_of(e.report()).count("E_NO_FINAL") == 1);
    }
    CHECK(snapshot(*rt, "B") == before);
  }
  SUBCASE("duplicate operation id is rejected") {
    try {
      rt->adapt_add_operation("B", Operation{"A", "A", DecisionOp{}, {}}, {});
      FAIL("expected ERR_INVALID");
    } catch (const InvalidDefinition& e) {
      CHECK(codes_of(e.report()).count("E_DUP_ID") == 1);
    }
    CHECK(snapshot(*rt, "B") == before);
  }
  SUBCASE("a failing batch is rolled back entirely") {
    CHECK(error_code([&] {
            rt->adapt("B").rewire("A.ok", "S").remove_operation("Done").commit();
          }) == "ERR_INVALID");
    CHECK(snapshot(*rt, "B") == before);
    CHECK(rt->idle_events().empty());
  }
  SUBCASE("add an operation: new info starts fresh, surviving info is kept") {
    Operation extra{"Extra", "Extra", ModelOp{"a", StepKind::Other, {}, {"ok"}}, {}};
    Transition in;
    in.id = "A.fail";
    in.source = "A";
    in.target = "Extra";
    in.status = "fail";
    Transition out;
    out.source = "Extra";
    out.target = "Done";
    out.status = "ok";
    rt->adapt("B").remove_transition("A.fail").add_operation(extra).add_transition(in).add_transition(out).commit();
    const auto& info = rt->context("B").info;
    CHECK(info.at("A.ok") == before.info.at("A.ok"));
    CHECK(info.at("A.fail") == before.info.at("A.fail"));
    CHECK(info.at("Extra.ok") == cond::TransitionInfo{});
    CHECK(rt->idle_events().size() == 4);
    rt->bind_behavior("a", constant("fail"));
    CHECK(error_code([&] { rt->run("B", "S"); }) == "");
  }
}

TEST_CASE("adapt: the executing operation is protected") {
  auto rt = logical_runtime();
  rt->register_megamodel(parse_one(kCounter));
  std::string code;
  rt->bind_behavior("a", [&](OperationContext&) {
    code = error_code([&] { rt->adapt_remove_operation("C", "A"); });
    // Elsewhere in the same megamodel is fine.
    rt->adapt_set_condition("C", "D.Hot", cond::boolean(true));
    return "ok";
  });
  RunResult r = rt->run("C", "S");
  CHECK(code == "ERR_ACTIVE_ELEMENT");
  REQUIRE(r.ok());
  CHECK(*r.final_op == "Hot");
  // Emitted inside the run, so part of its trace.
  int adaptations = 0;
  for (const auto& e : r.trace) adaptations += e.kind == TraceKind::Adaptation;
  CHECK(adaptations == 1);
  CHECK(rt->idle_events().empty());
}

// ---------------------------------------------------------------------------
// Inline equivalence on random megamodels

namespace {

struct Observed {
  std::vector<std::string> statuses;
  std::vector<std::string> finals;
  bool cut = false;  // a run hit the step limit; later runs are not comparable
};

Observed drive(std::vector<MegamodelDef> defs, std::uint64_t seed, int runs) {
  Runtime rt(std::make_unique<LogicalClock>());
  rt.register_all(std::move(defs));
  rt.bind_behavior("pick", random_status_behavior(rt, std::make_shared<std::mt19937_64>(seed)));
  std::vector<std::string> initials;
  for (const auto& op : rt.definition("R").operations) {
    if (op.is_initial()) initials.push_back(op.id);
  }
  RunOptions opts;
  opts.max_steps = 500;
  Observed o;
  for (int i = 0; i < runs && !o.cut; ++i) {
    RunResult r = rt.run("R", initials[static_cast<std::size_t>(i) % initials.size()], opts);
    for (const auto& e : r.trace) {
      if (e.kind == TraceKind::OpExit) o.statuses.push_back(*e.status);
    }
    if (r.ok()) o.finals.push_back(*r.final_op);
    o.cut = !r.ok();
  }
  return o;
}

}  // namespace

TEST_CASE("property: inlining preserves the ModelOp trace") {
  GenOptions opts;
  opts.clock_refs = false;
  opts.call_exit_refs = false;
  opts.max_calls = 1;
  int compared = 0, with_calls = 0;
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    MegamodelGenerator gen(seed, opts);
    MegamodelDef m = gen.next("R");
    const MegamodelDef lib = library_megamodel();
    MegamodelDef flat;
    try {
      flat = inline_calls(m, catalog_of({lib, m}));
    } catch (const Error& e) {
      CHECK(e.code() == "ERR_INLINE_UNSUPPORTED");
      continue;
    }
    bool has_call = std::any_of(m.operations.begin(), m.operations.end(), [](const Operation& op) { return op.call(); });
    with_calls += has_call;
    Observed a = drive({lib, m}, seed, 6);
    Observed b = drive({lib, flat}, seed, 6);
    if (a.cut || b.cut) {
      const std::size_t n = std::min(a.statuses.size(), b.statuses.size());
      CHECK(std::equal(a.statuses.begin(), a.statuses.begin() + static_cast<std::ptrdiff_t>(n), b.statuses.begin()));
    } else {
      CHECK_MESSAGE(a.statuses == b.statuses, serialize(m));
      CHECK(a.finals == b.finals);
    }
    ++compared;
  }
  CHECK(compared >= 200);
  CHECK(with_calls >= 30);
}
