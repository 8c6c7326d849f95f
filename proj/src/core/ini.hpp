#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace bsldm {

// Minimal INI reader/writer: [section] headers, key = value lines, comments
// with '#' or ';'. Keys are addressed as "section.key". Insertion order is
// preserved so serialized configs stay diffable.
class IniFile {
public:
    IniFile() = default;

    static IniFile parse(const std::string& text);
    static IniFile load(const std::string& path);

    bool has(const std::string& dotted_key) const;
    std::optional<std::string> get(const std::string& dotted_key) const;
    void set(const std::string& dotted_key, const std::string& value);

    std::string serialize() const;
    void save(const std::string& path) const;

    std::vector<std::pair<std::string, std::string>> entries() const;  // dotted key -> value

private:
    struct Section {
        std::string name;
        std::vector<std::pair<std::string, std::string>> kv;
    };
    std::vector<Section> sections_;

    Section* find_section(const std::string& name);
    const Section* find_section(const std::string& name) const;
};

std::string trim(const std::string& s);

}  // namespace bsldm
