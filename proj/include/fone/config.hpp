#pragma once

// Plain key=value configuration text. '#' starts a comment line, blank
// lines are ignored, whitespace around keys and values is trimmed.

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>

namespace fone {

class KeyValueConfig {
public:
    /// Throws ParseError (with the line number) for a line without '=' or
    /// a repeated key.
    static KeyValueConfig parse(std::string_view text);
    /// Throws io-error if the file cannot be read.
    static KeyValueConfig load(const std::filesystem::path& path);

    void set(const std::string& key, const std::string& value) { entries_[key] = value; }
    bool has(const std::string& key) const { return entries_.count(key) != 0; }
    std::optional<std::string> get(const std::string& key) const;
    const std::map<std::string, std::string>& entries() const noexcept { return entries_; }

    /// Throws config-error naming the first key not in `allowed`.
    void require_known(const std::set<std::string>& allowed) const;

    /// Sorted "key=value" lines.
    std::string to_text() const;
    void save(const std::filesystem::path& path) const;

private:
    std::map<std::string, std::string> entries_;
};

}  // namespace fone
