#include "mmrt/repository.hpp"

namespace mmrt {

void ModelRepository::put(const std::string& handle, Payload payload) {
  auto [it, inserted] = entries_.try_emplace(handle);
  it->second.payload = std::move(payload);
  if (!inserted) {
    ++it->second.version;
    ++it->second.content_version;
  }
}

const ModelRepository::Entry& ModelRepository::entry(std::string_view handle) const {
  auto it = entries_.find(handle);
  if (it == entries_.end()) throw Error("ERR_UNKNOWN_ELEMENT", "unknown model handle '" + std::string(handle) + "'");
  return it->second;
}

ModelRepository::Entry& ModelRepository::mutable_entry(std::string_view handle) {
  return const_cast<Entry&>(std::as_const(*this).entry(handle));
}

void ModelRepository::replace_content(std::string_view handle, nlohmann::json content) {
  Entry& e = mutable_entry(handle);
  e.payload.content = std::move(content);
  ++e.version;
  ++e.content_version;
}

void ModelRepository::replace_annotations(std::string_view handle, nlohmann::json annotations) {
  Entry& e = mutable_entry(handle);
  e.payload.annotations = std::move(annotations);
  ++e.version;
}

void ModelRepository::touch(std::string_view handle) { ++mutable_entry(handle).version; }

}  // namespace mmrt
