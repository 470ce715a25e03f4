#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

namespace semshift {

using KeyValueMap = std::map<std::string, std::string>;

// Flat "key = value" lines; '#' starts a comment, blank lines are ignored.
KeyValueMap parse_kv_file(const std::filesystem::path& path);
KeyValueMap parse_kv_text(const std::string& text);

// Lookups with typed parsing; a present but malformed value is an error that
// names the key.
std::string kv_get(const KeyValueMap& kv, const std::string& key, const std::string& fallback);
std::int64_t kv_get_int(const KeyValueMap& kv, const std::string& key, std::int64_t fallback);
double kv_get_real(const KeyValueMap& kv, const std::string& key, double fallback);
bool kv_has(const KeyValueMap& kv, const std::string& key);

}  // namespace semshift
