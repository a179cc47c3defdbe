#include "cli_support.hpp"

#include <fstream>
#include <sstream>

namespace mehfest::cli {

using nlohmann::json;

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::TooShort:
      return kExitTooShort;
    case ErrorKind::Io:
      return kExitFailure;
    default:
      return kExitBadInput;
  }
}

namespace {

// A parsed result that looks like JSON (number, bool, array) keeps its type.
json typed(const std::string& text) {
  const json j = json::parse(text, nullptr, false);
  if (!j.is_discarded() && (j.is_number() || j.is_boolean())) return j;
  return text;
}

json option_value(const CLI::Option* opt) {
  if (opt->get_expected_max() == 0) {
    return opt->results().empty() ? json(false) : typed(opt->results().back());
  }
  std::vector<std::string> values = opt->results();
  if (values.empty()) {
    const std::string d = opt->get_default_str();
    if (d.empty()) return nullptr;
    if (opt->get_expected_max() <= 1) return typed(d);
    // Vector defaults are captured as "[a,b]".
    std::string inner = d;
    if (inner.size() >= 2 && inner.front() == '[' && inner.back() == ']') inner = inner.substr(1, inner.size() - 2);
    std::stringstream in(inner);
    for (std::string item; std::getline(in, item, ',');) values.push_back(item);
    json arr = json::array();
    for (const auto& v : values) arr.push_back(typed(v));
    return arr;
  }
  if (opt->get_expected_max() <= 1 && values.size() == 1) return typed(values[0]);
  json arr = json::array();
  for (const auto& v : values) arr.push_back(typed(v));
  return arr;
}

json options_of(const CLI::App& app) {
  json j = json::object();
  for (const CLI::Option* opt : app.get_options()) {
    if (opt->get_lnames().empty() || !opt->get_configurable()) continue;
    const std::string& name = opt->get_lnames()[0];
    if (name == "help" || name == "config") continue;
    j[name] = option_value(opt);
  }
  return j;
}

void flatten(const json& j, const std::string& name, std::vector<std::string> parents,
             std::vector<CLI::ConfigItem>& out) {
  if (j.is_object()) {
    if (!name.empty()) parents.push_back(name);
    for (auto it = j.begin(); it != j.end(); ++it) flatten(*it, it.key(), parents, out);
    return;
  }
  if (name.empty()) throw CLI::ConversionError("config file must hold a JSON object");
  if (j.is_null()) return;
  CLI::ConfigItem item;
  item.name = name;
  item.parents = parents;
  auto text = [](const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };
  if (j.is_array()) {
    for (const auto& v : j) item.inputs.push_back(text(v));
  } else {
    item.inputs.push_back(text(j));
  }
  out.push_back(std::move(item));
}

}  // namespace

std::string JsonConfig::to_config(const CLI::App* app, bool, bool, std::string) const {
  return resolved_config(*app).dump(2);
}

std::vector<CLI::ConfigItem> JsonConfig::from_config(std::istream& input) const {
  json j;
  try {
    input >> j;
  } catch (const json::exception& e) {
    throw CLI::ConversionError(std::string("config file is not valid JSON: ") + e.what());
  }
  std::vector<CLI::ConfigItem> out;
  flatten(j, "", {}, out);
  return out;
}

json resolved_config(const CLI::App& app) {
  json j = options_of(app);
  for (const CLI::App* sub : app.get_subcommands()) j[sub->get_name()] = options_of(*sub);
  return j;
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw Error(ErrorKind::InvalidArgument, "cannot open manifest " + manifest.string());
  const std::filesystem::path base = manifest.parent_path();
  std::vector<ManifestEntry> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    std::vector<std::string> fields;
    std::stringstream ls(line);
    for (std::string f; std::getline(ls, f, ',');) {
      const auto b = f.find_first_not_of(" \t");
      const auto e = f.find_last_not_of(" \t");
      fields.push_back(b == std::string::npos ? "" : f.substr(b, e - b + 1));
    }
    if (fields.empty() || fields[0].empty() || fields.size() > 3) {
      throw Error(ErrorKind::InvalidArgument,
                  "manifest line " + std::to_string(line_no) + ": expected path[,label[,split]]");
    }
    ManifestEntry entry;
    entry.path = fields[0];
    if (entry.path.is_relative()) entry.path = base / entry.path;
    if (fields.size() > 1) entry.label = fields[1];
    if (fields.size() > 2) entry.split = fields[2];
    out.push_back(std::move(entry));
  }
  if (out.empty()) throw Error(ErrorKind::InvalidArgument, "manifest lists no clips");
  return out;
}

AudioClip load_clip(const std::filesystem::path& path) {
  try {
    return load_wav(path);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::TooShort) throw;
    throw Error(ErrorKind::InvalidArgument, path.string() + ": " + e.what());
  }
}

std::string csv_field(const std::string& text) {
  std::string out = text;
  for (char& c : out) {
    if (c == ',') c = ';';
    if (c == '\n' || c == '\r') c = ' ';
  }
  return out;
}

}  // namespace mehfest::cli
