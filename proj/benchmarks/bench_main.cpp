#include <benchmark/benchmark.h>

#include <fstream>
#include <sstream>

#include "mmrt/harness.hpp"
#include "mmrt/runtime.hpp"
#include "mmrt/text_format.hpp"

using namespace mmrt;

namespace {

std::string read(const std::string& file) {
  std::ifstream in(std::string(MMRT_SOURCE_DIR) + "/scenarios/" + file);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

const std::string& layered_text() {
  static const std::string text = read("fig8_layer1.mm") + read("fig9_layer2.mm");
  return text;
}

void BM_ParseScenarios(benchmark::State& state) {
  const std::string& text = layered_text();
  for (auto _ : state) benchmark::DoNotOptimize(parse_megamodels(text));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * text.size()));
}
BENCHMARK(BM_ParseScenarios);

void BM_Serialize(benchmark::State& state) {
  auto defs = parse_megamodels(layered_text());
  for (auto _ : state) benchmark::DoNotOptimize(serialize(defs));
}
BENCHMARK(BM_Serialize);

void BM_Validate(benchmark::State& state) {
  auto defs = parse_megamodels(layered_text());
  Catalog cat;
  for (const auto& d : defs) cat.emplace(d.name, d);
  for (auto _ : state) benchmark::DoNotOptimize(validate(defs.front(), cat));
}
BENCHMARK(BM_Validate);

void BM_EvaluateCondition(benchmark::State& state) {
  cond::Expr e = cond::parse_condition("count(A.ok) > 5 and now - time(B.done) >= 1000 or not taken(C.x)");
  cond::MapInfoView info;
  info.entries[{"A", "ok"}] = {3, 10, true};
  info.entries[{"B", "done"}] = {0, 500, true};
  info.entries[{"C", "x"}] = {1, 0, false};
  for (auto _ : state) benchmark::DoNotOptimize(cond::evaluate(e, info, 2000));
}
BENCHMARK(BM_EvaluateCondition);

/// One layer-1 run per iteration, including layer-2 escalations.
void BM_RunLayered(benchmark::State& state) {
  Runtime rt(std::make_unique<LogicalClock>());
  ScriptEvent fail;
  fail.at_run = 2;
  fail.component = "payment";
  fail.failure_kind = "crash";
  fail.cure = "replace_component";
  Harness harness({}, {fail});
  harness.install(rt);
  rt.register_all(parse_megamodels(layered_text()));
  std::uint64_t run = 0;
  for (auto _ : state) {
    harness.begin_run(++run);
    benchmark::DoNotOptimize(rt.run("SelfRepairL1", "Start"));
  }
}
BENCHMARK(BM_RunLayered);

/// Bare interpreter overhead: a decision loop of `range` steps.
void BM_StepLoop(benchmark::State& state) {
  Runtime rt(std::make_unique<LogicalClock>());
  rt.register_megamodel(parse_megamodels(R"(
megamodel Loop {
  initial S;
  final F;
  decision D;
  op A : Other behavior "a" {
    status ok;
  }
  S -> A;
  A.ok -> D;
  D -> [count(D.F) > )" + std::to_string(state.range(0)) + R"(] F;
  D -> else A;
}
)").front());
  rt.bind_behavior("a", [](OperationContext&) { return std::string("ok"); });
  for (auto _ : state) benchmark::DoNotOptimize(rt.run("Loop", "S"));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_StepLoop)->Arg(10)->Arg(1000);

}  // namespace

BENCHMARK_MAIN();
