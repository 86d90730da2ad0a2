#include "facecap/config.hpp"

#include "facecap/errors.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace facecap {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

} // namespace

std::map<std::string, std::string> parse_config(const std::string& text) {
    std::map<std::string, std::string> out;
    std::istringstream in(text);
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError("expected 'key = value'", n);
        std::string key = trim(line.substr(0, eq));
        if (key.empty()) throw ParseError("empty key", n);
        if (out.count(key)) throw ParseError("duplicate key '" + key + "'", n);
        out[key] = trim(line.substr(eq + 1));
    }
    return out;
}

std::map<std::string, std::string> load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path.string() + "'");
    std::ostringstream s;
    s << in.rdbuf();
    return parse_config(s.str());
}

double config_number(const std::map<std::string, std::string>& config, const std::string& key, double fallback) {
    auto it = config.find(key);
    if (it == config.end()) return fallback;
    const std::string& v = it->second;
    double out = 0.0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size())
        throw ParseError("config key '" + key + "' is not a number: '" + v + "'");
    return out;
}

} // namespace facecap
