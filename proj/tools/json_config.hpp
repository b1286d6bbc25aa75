#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

namespace cnhpp::cli {

// Reads CLI11 configuration from JSON: each subcommand is an object keyed by
// its name, holding option names (without dashes) mapped to values.
//   {"fit": {"network": "net.csv", "K": 7, "xi-grid": "0,0.5"}}
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App* app, bool default_also, bool write_description,
                        std::string prefix) const override;
  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override;

 private:
  static void collect(const nlohmann::json& j, const std::string& name, std::vector<std::string> parents,
                      std::vector<CLI::ConfigItem>& out);
};

}  // namespace cnhpp::cli
