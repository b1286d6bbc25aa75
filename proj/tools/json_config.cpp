#include "json_config.hpp"

#include <istream>

namespace cnhpp::cli {

namespace {

std::string scalar_text(const nlohmann::json& v, const std::string& name) {
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number()) return v.dump();  // dump keeps every digit of a double
  throw CLI::ConversionError("config value for '" + name + "' must be a scalar or a list of scalars");
}

nlohmann::json app_to_json(const CLI::App* app, bool default_also) {
  nlohmann::json j = nlohmann::json::object();
  for (const CLI::Option* opt : app->get_options({})) {
    if (opt->get_lnames().empty() || !opt->get_configurable()) continue;
    const std::string name = opt->get_lnames().front();
    if (opt->count() > 0) {
      const auto& results = opt->results();
      if (opt->get_type_size() == 0) {
        j[name] = opt->as<bool>();
      } else if (results.size() == 1) {
        j[name] = results.front();
      } else {
        j[name] = results;
      }
    } else if (default_also && !opt->get_default_str().empty()) {
      j[name] = opt->get_default_str();
    }
  }
  for (const CLI::App* sub : app->get_subcommands({})) {
    j[sub->get_name()] = app_to_json(sub, default_also);
  }
  return j;
}

}  // namespace

std::string JsonConfig::to_config(const CLI::App* app, bool default_also, bool, std::string) const {
  return app_to_json(app, default_also).dump(2);
}

std::vector<CLI::ConfigItem> JsonConfig::from_config(std::istream& input) const {
  nlohmann::json j;
  try {
    input >> j;
  } catch (const nlohmann::json::exception& e) {
    throw CLI::ConversionError(std::string("config file is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw CLI::ConversionError("config file must hold a JSON object");
  std::vector<CLI::ConfigItem> out;
  for (auto it = j.begin(); it != j.end(); ++it) collect(it.value(), it.key(), {}, out);
  return out;
}

void JsonConfig::collect(const nlohmann::json& j, const std::string& name, std::vector<std::string> parents,
                         std::vector<CLI::ConfigItem>& out) {
  if (j.is_object()) {
    parents.push_back(name);
    for (auto it = j.begin(); it != j.end(); ++it) collect(it.value(), it.key(), parents, out);
    return;
  }
  CLI::ConfigItem item;
  item.name = name;
  item.parents = std::move(parents);
  if (j.is_array()) {
    for (const auto& v : j) item.inputs.push_back(scalar_text(v, name));
  } else {
    item.inputs.push_back(scalar_text(j, name));
  }
  out.push_back(std::move(item));
}

}  // namespace cnhpp::cli
