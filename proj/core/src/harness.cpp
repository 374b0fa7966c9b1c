#include "mmrt/harness.hpp"

#include <algorithm>
#include <fstream>
#include <set>

namespace mmrt {

using nlohmann::json;

std::int64_t ComponentState::load() const {
  auto it = params.find("replicas");
  std::int64_t replicas = it != params.end() && it->second > 0 ? it->second : 1;
  std::int64_t demand_now = std::max<std::int64_t>(0, demand + jitter);
  return (demand_now + replicas - 1) / replicas;
}

ComponentState& MockSystem::component(const std::string& name) {
  auto [it, inserted] = components_.try_emplace(name);
  if (inserted) it->second.params["replicas"] = 1;
  return it->second;
}

void MockSystem::fail(const std::string& name, std::string kind, std::string cure) {
  ComponentState& c = component(name);
  c.failed = true;
  c.failure_kind = std::move(kind);
  c.cure = std::move(cure);
}

void MockSystem::set_load(const std::string& name, std::int64_t value) { component(name).demand = value; }

bool MockSystem::apply(const std::string& name, const json& change) {
  auto it = components_.find(name);
  if (it == components_.end()) return false;
  ComponentState& c = it->second;
  const std::string type = change.value("type", "");
  if (type == "set_param") {
    c.params[change.at("param").get<std::string>()] = change.at("value").get<std::int64_t>();
    return false;
  }
  if (c.failed && type == c.cure) {
    c.failed = false;
    c.failure_kind.clear();
    c.cure.clear();
    return true;
  }
  return false;
}

json MockSystem::snapshot() const {
  json out = json::object();
  for (const auto& [name, c] : components_) {
    json j;
    j["state"] = c.failed ? "failed" : "ok";
    if (c.failed) j["failure_kind"] = c.failure_kind;
    j["params"] = c.params;
    j["demand"] = std::max<std::int64_t>(0, c.demand + c.jitter);
    j["load"] = c.load();
    out[name] = std::move(j);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Event scripts

namespace {

ScriptEvent parse_event(const json& item) {
  ScriptEvent e;
  e.at_run = item.at("at_run").get<std::uint64_t>();
  const json& ev = item.at("event");
  const std::string type = ev.at("type").get<std::string>();
  e.component = ev.at("component").get<std::string>();
  if (type == "fail_component") {
    e.type = ScriptEvent::Type::FailComponent;
    e.failure_kind = ev.at("failure_kind").get<std::string>();
    e.cure = ev.value("cure", "restart");
  } else if (type == "set_load") {
    e.type = ScriptEvent::Type::SetLoad;
    e.value = ev.at("value").get<std::int64_t>();
  } else {
    throw Error("ERR_SCRIPT", "unknown event type '" + type + "'");
  }
  return e;
}

void parse_config(const json& j, HarnessConfig& c) {
  if (j.contains("components")) c.components = j.at("components").get<std::vector<std::string>>();
  if (j.contains("strategies")) c.strategies = j.at("strategies");
  c.threshold = j.value("threshold", c.threshold);
  if (j.contains("replicas")) {
    c.replicas_min = j.at("replicas").value("min", c.replicas_min);
    c.replicas_max = j.at("replicas").value("max", c.replicas_max);
  }
  c.initial_demand = j.value("initial_demand", c.initial_demand);
  c.inadequate_after = j.value("inadequate_after", c.inadequate_after);
  c.load_jitter = j.value("load_jitter", c.load_jitter);
  c.seed = j.value("seed", c.seed);
}

}  // namespace

EventScript parse_event_script(const json& j) {
  EventScript script;
  try {
    const json* events = &j;
    if (j.is_object()) {
      if (j.contains("config")) parse_config(j.at("config"), script.config);
      events = &j.at("events");
    }
    if (!events->is_array()) throw Error("ERR_SCRIPT", "event script must be a list");
    for (const auto& item : *events) script.events.push_back(parse_event(item));
  } catch (const json::exception& ex) {
    throw Error("ERR_SCRIPT", std::string("malformed event script: ") + ex.what());
  }
  for (const auto& e : script.events) {
    if (e.at_run == 0) throw Error("ERR_SCRIPT", "at_run is 1-based");
  }
  return script;
}

EventScript load_event_script(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("ERR_IO", "cannot read '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& ex) {
    throw Error("ERR_SCRIPT", path + ": " + ex.what());
  }
  return parse_event_script(j);
}

// ---------------------------------------------------------------------------
// Harness

Harness::Harness(HarnessConfig config, std::vector<ScriptEvent> script)
    : config_(std::move(config)), script_(std::move(script)), rng_(config_.seed) {
  for (const auto& name : config_.components) system_.component(name).demand = config_.initial_demand;
}

void Harness::install(Runtime& rt) {
  auto& repo = rt.repository();
  Payload arch;
  arch.content = {{"components", json::object()}, {"proposals", json::array()}};
  arch.annotations = {{"findings", json::array()}};
  repo.put("ArchModel", arch);
  repo.put("TGGRules", Payload{{{"rules", {"component_to_node", "connector_to_edge"}}}, json::object()});
  repo.put("FailureRules", Payload{{{"rules", {"component_state_failed"}}}, json::object()});
  Payload strategies;
  strategies.content = {{"strategies", config_.strategies}};
  strategies.annotations = {{"stats", json::object()}};
  repo.put("RepairStrategies", strategies);
  Payload candidates;
  candidates.content = {{"strategies", json::array()}};
  candidates.annotations = {{"stats", json::object()}};
  repo.put("StrategyCandidates", candidates);
  repo.put("QueueingModel", Payload{{{"threshold", config_.threshold}}, json::object()});
  repo.put("ParamVariability",
           Payload{{{"replicas", {{"min", config_.replicas_min}, {"max", config_.replicas_max}}}}, json::object()});

  bind(rt, "update", [this](OperationContext& c) { return update(c); });
  bind(rt, "check_for_failures", [this](OperationContext& c) { return check_for_failures(c); });
  bind(rt, "deep_analysis", [this](OperationContext& c) { return deep_analysis(c); });
  bind(rt, "repair", [this](OperationContext& c) { return repair(c); });
  bind(rt, "effect", [this](OperationContext& c) { return effect(c); });
  bind(rt, "analyze_bottlenecks", [this](OperationContext& c) { return analyze_bottlenecks(c); });
  bind(rt, "plan_optimization", [this](OperationContext& c) { return plan_optimization(c); });
  bind(rt, "check_success_rates", [this](OperationContext& c) { return check_success_rates(c); });
  bind(rt, "synthesize_strategies", [this](OperationContext& c) { return synthesize_strategies(c); });
  bind(rt, "replace_strategies", [this](OperationContext& c) { return replace_strategies(c); });
}

void Harness::bind(Runtime& rt, const std::string& key, Behavior behavior) {
  rt.bind_behavior(key, [this, key, behavior = std::move(behavior)](OperationContext& ctx) {
    ++counts_[key];
    std::string status = behavior(ctx);
    log_.push_back({ctx.megamodel(), ctx.operation(), key, status});
    return status;
  });
}

void Harness::begin_run(std::uint64_t run) {
  for (const auto& e : script_) {
    if (e.at_run != run) continue;
    if (e.type == ScriptEvent::Type::FailComponent) {
      system_.fail(e.component, e.failure_kind, e.cure);
      cures_[e.failure_kind] = e.cure;
    } else {
      system_.set_load(e.component, e.value);
    }
  }
  if (config_.load_jitter > 0) {
    std::uniform_int_distribution<std::int64_t> noise(-config_.load_jitter, config_.load_jitter);
    for (auto& [name, c] : system_.components()) c.jitter = noise(rng_);
  }
}

std::uint64_t Harness::invocations(const std::string& behavior) const {
  auto it = counts_.find(behavior);
  return it == counts_.end() ? 0 : it->second;
}

std::optional<std::string> Harness::cure_for(const std::string& kind) const {
  auto it = cures_.find(kind);
  if (it == cures_.end()) return std::nullopt;
  return it->second;
}

namespace {

json findings_of(const ModelAccess& arch) {
  const json& ann = arch.annotations();
  return ann.contains("findings") ? ann.at("findings") : json::array();
}

json without_kind(const json& findings, const std::string& kind) {
  json out = json::array();
  for (const auto& f : findings) {
    if (f.value("kind", "") != kind) out.push_back(f);
  }
  return out;
}

void store_findings(ModelAccess& arch, json findings) {
  json ann = arch.annotations();
  ann["findings"] = std::move(findings);
  arch.replace_annotations(std::move(ann));
}

json& stat_of(json& stats, const std::string& id) {
  json& s = stats[id];
  if (!s.is_object()) s = {{"attempts", 0}, {"successes", 0}};
  return s;
}

}  // namespace

std::string Harness::update(OperationContext& ctx) {
  ModelAccess arch = ctx.model("ArchModel");
  arch.replace_content({{"components", system_.snapshot()}, {"proposals", json::array()}});
  arch.replace_annotations({{"findings", json::array()}});
  return "done";
}

std::string Harness::check_for_failures(OperationContext& ctx) {
  ModelAccess arch = ctx.model("ArchModel");
  json findings = without_kind(findings_of(arch), "failure");
  bool any = false;
  const json components = arch.content().value("components", json::object());
  for (const auto& [name, c] : components.items()) {
    if (c.value("state", "") != "failed") continue;
    findings.push_back({{"component", name}, {"kind", "failure"}, {"detail", c.value("failure_kind", "")}});
    any = true;
  }
  store_findings(arch, std::move(findings));
  return any ? "failures" : "no_failures";
}

std::string Harness::deep_analysis(OperationContext& ctx) {
  ModelAccess arch = ctx.model("ArchModel");
  json findings = findings_of(arch);
  for (auto& f : findings) {
    if (f.value("kind", "") == "failure") f["deep"] = true;
  }
  store_findings(arch, std::move(findings));
  return "done";
}

std::string Harness::repair(OperationContext& ctx) {
  ModelAccess arch = ctx.model("ArchModel");
  ModelAccess strat = ctx.model("RepairStrategies");
  const json strategies = strat.content().value("strategies", json::array());
  json stats = strat.annotations().value("stats", json::object());
  json content = arch.content();
  json proposals = content.value("proposals", json::array());
  for (const auto& f : findings_of(arch)) {
    if (f.value("kind", "") != "failure") continue;
    for (const auto& s : strategies) {
      if (s.value("matches", "") != f.value("detail", "")) continue;
      const std::string id = s.value("id", "");
      proposals.push_back({{"component", f.at("component")}, {"change", {{"type", s.at("action")}}}, {"strategy", id}});
      json& st = stat_of(stats, id);
      st["attempts"] = st["attempts"].get<std::uint64_t>() + 1;
      break;
    }
  }
  content["proposals"] = std::move(proposals);
  arch.replace_content(std::move(content));
  if (strat.mode() != UseMode::Read) {
    json ann = strat.annotations();
    ann["stats"] = std::move(stats);
    strat.replace_annotations(std::move(ann));
  }
  return "done";
}

std::string Harness::effect(OperationContext& ctx) {
  ModelAccess arch = ctx.model("ArchModel");
  std::optional<ModelAccess> strat;
  json stats;
  if (ctx.uses("RepairStrategies")) {
    strat.emplace(ctx.model("RepairStrategies"));
    stats = strat->annotations().value("stats", json::object());
  }
  json content = arch.content();
  for (const auto& p : content.value("proposals", json::array())) {
    bool healed = system_.apply(p.at("component").get<std::string>(), p.at("change"));
    if (healed && strat && p.contains("strategy")) {
      json& st = stat_of(stats, p.at("strategy").get<std::string>());
      st["successes"] = st["successes"].get<std::uint64_t>() + 1;
    }
  }
  content["proposals"] = json::array();
  arch.replace_content(std::move(content));
  if (strat && strat->mode() != UseMode::Read) {
    json ann = strat->annotations();
    ann["stats"] = std::move(stats);
    strat->replace_annotations(std::move(ann));
  }
  return "done";
}

std::string Harness::analyze_bottlenecks(OperationContext& ctx) {
  ModelAccess arch = ctx.model("ArchModel");
  const std::int64_t threshold = ctx.model("QueueingModel").content().value("threshold", config_.threshold);
  json findings = without_kind(findings_of(arch), "bottleneck");
  bool any = false;
  const json components = arch.content().value("components", json::object());
  for (const auto& [name, c] : components.items()) {
    std::int64_t load = c.value("load", std::int64_t{0});
    if (load <= threshold) continue;
    findings.push_back({{"component", name}, {"kind", "bottleneck"}, {"detail", "load " + std::to_string(load)}});
    any = true;
  }
  store_findings(arch, std::move(findings));
  return any ? "bottlenecks" : "no_bottlenecks";
}

std::string Harness::plan_optimization(OperationContext& ctx) {
  ModelAccess arch = ctx.model("ArchModel");
  const std::int64_t threshold =
      std::max<std::int64_t>(1, ctx.model("QueueingModel").content().value("threshold", config_.threshold));
  const json bounds = ctx.model("ParamVariability").content().value("replicas", json::object());
  const std::int64_t lo = bounds.value("min", config_.replicas_min);
  const std::int64_t hi = bounds.value("max", config_.replicas_max);
  json content = arch.content();
  json proposals = content.value("proposals", json::array());
  const json components = content.value("components", json::object());
  for (const auto& f : findings_of(arch)) {
    if (f.value("kind", "") != "bottleneck") continue;
    const std::string name = f.at("component").get<std::string>();
    if (!components.contains(name)) continue;
    const json& c = components.at(name);
    std::int64_t replicas = c.value("params", json::object()).value("replicas", std::int64_t{1});
    std::int64_t demand = c.value("demand", std::int64_t{0});
    std::int64_t wanted = std::clamp((demand + threshold - 1) / threshold, lo, hi);
    if (wanted <= replicas) continue;
    proposals.push_back(
        {{"component", name}, {"change", {{"type", "set_param"}, {"param", "replicas"}, {"value", wanted}}}});
  }
  content["proposals"] = std::move(proposals);
  arch.replace_content(std::move(content));
  return "done";
}

std::vector<std::string> Harness::inadequate(const json& strategies, const json& stats) const {
  std::vector<std::string> out;
  for (const auto& s : strategies) {
    const std::string id = s.value("id", "");
    if (!stats.contains(id)) continue;
    const json& st = stats.at(id);
    if (st.value("attempts", std::uint64_t{0}) >= config_.inadequate_after && st.value("successes", std::uint64_t{0}) == 0) {
      out.push_back(id);
    }
  }
  return out;
}

std::string Harness::check_success_rates(OperationContext& ctx) {
  ModelAccess strat = ctx.megamodel_model("SelfRepairLoop").model("RepairStrategies");
  auto bad = inadequate(strat.content().value("strategies", json::array()),
                        strat.annotations().value("stats", json::object()));
  return bad.empty() ? "adequate" : "inadequate";
}

std::string Harness::synthesize_strategies(OperationContext& ctx) {
  MegamodelAccess layer1 = ctx.megamodel_model("SelfRepairLoop");
  ModelAccess strat = layer1.model("RepairStrategies");
  const json strategies = strat.content().value("strategies", json::array());
  auto bad = inadequate(strategies, strat.annotations().value("stats", json::object()));

  json kept = json::array();
  std::set<std::string> covered;
  for (const auto& s : strategies) {
    if (std::find(bad.begin(), bad.end(), s.value("id", "")) != bad.end()) continue;
    kept.push_back(s);
    covered.insert(s.value("matches", ""));
  }
  for (const auto& f : findings_of(layer1.model("ArchModel"))) {
    if (f.value("kind", "") != "failure") continue;
    const std::string kind = f.value("detail", "");
    if (covered.count(kind) != 0) continue;
    auto cure = cure_for(kind);
    if (!cure) continue;
    kept.push_back({{"id", "syn_" + kind}, {"matches", kind}, {"action", *cure}});
    covered.insert(kind);
  }
  ModelAccess out = ctx.model("StrategyCandidates");
  out.replace_content({{"strategies", std::move(kept)}});
  out.replace_annotations({{"stats", json::object()}});
  return "done";
}

std::string Harness::replace_strategies(OperationContext& ctx) {
  ctx.megamodel_model("SelfRepairLoop").replace_model("RepairStrategies", ctx.handle_of("StrategyCandidates"));
  return "done";
}

}  // namespace mmrt
