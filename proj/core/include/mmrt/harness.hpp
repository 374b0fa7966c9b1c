#pragma once

// Simulated managed system and the stock behaviors used by the shipped
// scenarios (self-repair, self-optimization, layered strategy adaptation).
//
// Repository handles seeded by install():
//   ArchModel           content {components, proposals}, annotations {findings}
//   TGGRules, FailureRules
//   RepairStrategies    content {strategies: [{id, matches, action}]},
//                       annotations {stats: {id: {attempts, successes}}}
//   StrategyCandidates  same shape as RepairStrategies
//   QueueingModel       content {threshold}
//   ParamVariability    content {replicas: {min, max}}

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mmrt/runtime.hpp"

namespace mmrt {

struct ComponentState {
  bool failed = false;
  std::string failure_kind;
  std::string cure;  // change type that heals the current failure
  std::map<std::string, std::int64_t> params;
  std::int64_t demand = 0;
  std::int64_t jitter = 0;

  /// Demand per replica, rounded up.
  std::int64_t load() const;
};

class MockSystem {
 public:
  std::map<std::string, ComponentState>& components() { return components_; }
  const std::map<std::string, ComponentState>& components() const { return components_; }

  ComponentState& component(const std::string& name);
  void fail(const std::string& name, std::string kind, std::string cure);
  void set_load(const std::string& name, std::int64_t value);

  /// Applies one proposed change. Returns true when it healed a failure.
  bool apply(const std::string& name, const nlohmann::json& change);

  nlohmann::json snapshot() const;

 private:
  std::map<std::string, ComponentState> components_;
};

struct ScriptEvent {
  enum class Type { FailComponent, SetLoad };

  std::uint64_t at_run = 1;
  Type type = Type::FailComponent;
  std::string component;
  std::string failure_kind;
  std::string cure = "restart";
  std::int64_t value = 0;
};

struct HarnessConfig {
  std::vector<std::string> components = {"frontend", "catalog", "orders", "payment"};
  nlohmann::json strategies = nlohmann::json::array({
      {{"id", "s1"}, {"matches", "crash"}, {"action", "restart"}},
      {{"id", "s2"}, {"matches", "hang"}, {"action", "restart"}},
      {{"id", "s3"}, {"matches", "leak"}, {"action", "replace_component"}},
  });
  std::int64_t threshold = 100;
  std::int64_t replicas_min = 1;
  std::int64_t replicas_max = 8;
  std::int64_t initial_demand = 10;
  /// Layer 2: a strategy is inadequate after this many fruitless attempts.
  std::uint64_t inadequate_after = 3;
  /// Uniform per-run load noise in [-load_jitter, load_jitter].
  std::int64_t load_jitter = 0;
  std::uint64_t seed = 0;
};

struct EventScript {
  std::vector<ScriptEvent> events;
  HarnessConfig config;
};

/// Accepts either a JSON list of {at_run, event} or an object
/// {"events": [...], "config": {...}}. Throws ERR_SCRIPT.
EventScript parse_event_script(const nlohmann::json& j);
EventScript load_event_script(const std::string& path);

struct Invocation {
  std::string megamodel;
  std::string operation;
  std::string behavior;
  std::string status;

  bool operator==(const Invocation&) const = default;
};

class Harness {
 public:
  explicit Harness(HarnessConfig config = {}, std::vector<ScriptEvent> script = {});

  /// Seeds the repository and binds every stock behavior.
  void install(Runtime& rt);

  /// Applies the scripted events of run `run` (1-based) and the load jitter.
  void begin_run(std::uint64_t run);

  MockSystem& system() { return system_; }
  const MockSystem& system() const { return system_; }
  const HarnessConfig& config() const { return config_; }

  std::uint64_t invocations(const std::string& behavior) const;
  const std::vector<Invocation>& log() const { return log_; }

  /// The scripted cure of the most recent failure of `kind`.
  std::optional<std::string> cure_for(const std::string& kind) const;

 private:
  void bind(Runtime& rt, const std::string& key, Behavior behavior);

  std::string update(OperationContext& ctx);
  std::string check_for_failures(OperationContext& ctx);
  std::string deep_analysis(OperationContext& ctx);
  std::string repair(OperationContext& ctx);
  std::string effect(OperationContext& ctx);
  std::string analyze_bottlenecks(OperationContext& ctx);
  std::string plan_optimization(OperationContext& ctx);
  std::string check_success_rates(OperationContext& ctx);
  std::string synthesize_strategies(OperationContext& ctx);
  std::string replace_strategies(OperationContext& ctx);

  std::vector<std::string> inadequate(const nlohmann::json& strategies, const nlohmann::json& stats) const;

  HarnessConfig config_;
  std::vector<ScriptEvent> script_;
  MockSystem system_;
  std::map<std::string, std::string> cures_;
  std::map<std::string, std::uint64_t> counts_;
  std::vector<Invocation> log_;
  std::mt19937_64 rng_;
};

}  // namespace mmrt
