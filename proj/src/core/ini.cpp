#include "core/ini.hpp"

#include <fstream>
#include <sstream>

#include "core/error.hpp"

namespace bsldm {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

namespace {

std::pair<std::string, std::string> split_dotted(const std::string& key) {
    std::size_t dot = key.find('.');
    require(dot != std::string::npos && dot > 0 && dot + 1 < key.size(),
            Status::InvalidArgument, "config key must look like section.key: '" + key + "'");
    return {key.substr(0, dot), key.substr(dot + 1)};
}

}  // namespace

IniFile IniFile::parse(const std::string& text) {
    IniFile ini;
    std::istringstream in(text);
    std::string line;
    std::string current;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::size_t comment = line.find_first_of("#;");
        if (comment != std::string::npos) line = line.substr(0, comment);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            require(line.back() == ']', Status::InvalidArgument,
                    "malformed section header at line " + std::to_string(lineno));
            current = trim(line.substr(1, line.size() - 2));
            require(!current.empty(), Status::InvalidArgument,
                    "empty section name at line " + std::to_string(lineno));
            if (!ini.find_section(current)) ini.sections_.push_back({current, {}});
            continue;
        }
        std::size_t eq = line.find('=');
        require(eq != std::string::npos, Status::InvalidArgument,
                "expected key = value at line " + std::to_string(lineno));
        require(!current.empty(), Status::InvalidArgument,
                "key outside any [section] at line " + std::to_string(lineno));
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        require(!key.empty(), Status::InvalidArgument,
                "empty key at line " + std::to_string(lineno));
        ini.set(current + "." + key, value);
    }
    return ini;
}

IniFile IniFile::load(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), Status::Io, "cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

IniFile::Section* IniFile::find_section(const std::string& name) {
    for (auto& s : sections_) {
        if (s.name == name) return &s;
    }
    return nullptr;
}

const IniFile::Section* IniFile::find_section(const std::string& name) const {
    for (const auto& s : sections_) {
        if (s.name == name) return &s;
    }
    return nullptr;
}

bool IniFile::has(const std::string& dotted_key) const {
    return get(dotted_key).has_value();
}

std::optional<std::string> IniFile::get(const std::string& dotted_key) const {
    auto [sec, key] = split_dotted(dotted_key);
    const Section* s = find_section(sec);
    if (!s) return std::nullopt;
    for (const auto& [k, v] : s->kv) {
        if (k == key) return v;
    }
    return std::nullopt;
}

void IniFile::set(const std::string& dotted_key, const std::string& value) {
    auto [sec, key] = split_dotted(dotted_key);
    Section* s = find_section(sec);
    if (!s) {
        sections_.push_back({sec, {}});
        s = &sections_.back();
    }
    for (auto& [k, v] : s->kv) {
        if (k == key) {
            v = value;
            return;
        }
    }
    s->kv.emplace_back(key, value);
}

std::string IniFile::serialize() const {
    std::ostringstream os;
    for (const auto& s : sections_) {
        os << "[" << s.name << "]\n";
        for (const auto& [k, v] : s.kv) os << k << " = " << v << "\n";
        os << "\n";
    }
    return os.str();
}

void IniFile::save(const std::string& path) const {
    std::ofstream out(path);
    require(out.good(), Status::Io, "cannot write config file: " + path);
    out << serialize();
}

std::vector<std::pair<std::string, std::string>> IniFile::entries() const {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& s : sections_) {
        for (const auto& [k, v] : s.kv) out.emplace_back(s.name + "." + k, v);
    }
    return out;
}

}  // namespace bsldm
