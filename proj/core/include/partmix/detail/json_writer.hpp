#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

// Deterministic JSON emitter: keys in insertion order, doubles with 17
// significant digits in C-locale form, no whitespace dependence on the
// environment. Output files compare byte-identical across runs.

namespace partmix::detail {

std::string json_escape(std::string_view text);

class JsonWriter {
 public:
  JsonWriter& begin_object();
  JsonWriter& end_object();
  JsonWriter& begin_array();
  JsonWriter& end_array();
  JsonWriter& key(std::string_view name);
  JsonWriter& value(double v);
  JsonWriter& value(std::int64_t v);
  JsonWriter& value(int v) { return value(static_cast<std::int64_t>(v)); }
  JsonWriter& value(std::uint64_t v);
  JsonWriter& value(bool v);
  JsonWriter& value(std::string_view v);
  JsonWriter& value(const char* v) { return value(std::string_view(v)); }
  JsonWriter& null_value();
  /// Splices an already-serialized JSON fragment.
  JsonWriter& raw_value(std::string_view json);

  const std::string& str() const { return out_; }

 private:
  void separator();
  std::string out_;
  std::vector<bool> has_items_;  // per open container
  bool after_key_ = false;
};

}  // namespace partmix::detail
