#ifndef BOXSEG_CONFIG_HPP
#define BOXSEG_CONFIG_HPP

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace boxseg {

// Flat view of a `[section]` / `key = value` file. Keys are stored as
// "section.key"; values keep their raw text with quotes removed.
class ConfigFile {
  public:
    static ConfigFile parse(std::istream& in);
    static ConfigFile load(const std::filesystem::path& path);

    // "section.key=value", as given on the command line.
    void set(const std::string& assignment);
    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    bool contains(const std::string& key) const { return values_.count(key) != 0; }
    std::optional<std::string> get(const std::string& key) const;
    const std::map<std::string, std::string>& values() const { return values_; }

  private:
    std::map<std::string, std::string> values_;
};

double to_double(const std::string& key, const std::string& value);
long long to_integer(const std::string& key, const std::string& value);
bool to_bool(const std::string& key, const std::string& value);
std::vector<int> to_int_list(const std::string& key, const std::string& value);

}  // namespace boxseg

#endif
