#include "fone/config.hpp"

#include <fstream>
#include <sstream>

#include "fone/error.hpp"

namespace fone {
namespace {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(std::string_view text) {
    KeyValueConfig cfg;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        const std::string line = trim(text.substr(start, end - start));
        ++line_no;
        start = end + 1;
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError(line_no, "expected key=value, got \"" + line + "\"");
        const std::string key = trim(std::string_view(line).substr(0, eq));
        if (key.empty()) throw ParseError(line_no, "empty key");
        if (cfg.has(key)) throw ParseError(line_no, "key \"" + key + "\" given twice");
        cfg.set(key, trim(std::string_view(line).substr(eq + 1)));
    }
    return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::io_error, "cannot read config " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

std::optional<std::string> KeyValueConfig::get(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

void KeyValueConfig::require_known(const std::set<std::string>& allowed) const {
    for (const auto& [key, value] : entries_) {
        if (allowed.count(key) == 0) fail(ErrorKind::config_error, "unknown key \"" + key + "\"");
    }
}

std::string KeyValueConfig::to_text() const {
    std::string out;
    for (const auto& [key, value] : entries_) out += key + "=" + value + "\n";
    return out;
}

void KeyValueConfig::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) fail(ErrorKind::io_error, "cannot write " + path.string());
    out << to_text();
}

}  // namespace fone
