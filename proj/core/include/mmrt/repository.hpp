#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "mmrt/error.hpp"

namespace mmrt {

/// A runtime model's value. `content` is the model proper; `annotations`
/// hold analysis results that enrich the model without changing it.
struct Payload {
  nlohmann::json content = nlohmann::json::object();
  nlohmann::json annotations = nlohmann::json::object();

  bool operator==(const Payload&) const = default;
};

/// Opaque model payloads keyed by handle. Every replacement or mutation bumps
/// `version`; content changes additionally bump `content_version`, so
/// annotation-only access is observable as an unchanged content version.
class ModelRepository {
 public:
  struct Entry {
    Payload payload;
    std::uint64_t version = 0;
    std::uint64_t content_version = 0;

    bool operator==(const Entry&) const = default;
  };

  bool contains(std::string_view handle) const { return entries_.find(handle) != entries_.end(); }

  /// Creates `handle` with an empty payload at version 0 if it is missing.
  void ensure(const std::string& handle) { entries_.try_emplace(handle); }

  /// Stores `payload` under `handle`, creating it or replacing the old value.
  void put(const std::string& handle, Payload payload);

  const Entry& entry(std::string_view handle) const;
  const Payload& get(std::string_view handle) const { return entry(handle).payload; }
  std::uint64_t version(std::string_view handle) const { return entry(handle).version; }

  void replace_content(std::string_view handle, nlohmann::json content);
  void replace_annotations(std::string_view handle, nlohmann::json annotations);
  void touch(std::string_view handle);

  const std::map<std::string, Entry, std::less<>>& entries() const { return entries_; }

 private:
  Entry& mutable_entry(std::string_view handle);

  std::map<std::string, Entry, std::less<>> entries_;
};

}  // namespace mmrt
