#pragma once

#include <CLI11.hpp>
#include <filesystem>
#include <iosfwd>
#include <json.hpp>
#include <string>
#include <vector>

#include "mehfest/audio.hpp"
#include "mehfest/error.hpp"

namespace mehfest::cli {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitBadInput = 2;
inline constexpr int kExitTooShort = 3;
inline constexpr int kExitClipErrors = 4;
inline constexpr int kExitAdversarial = 10;

int exit_code_for(ErrorKind kind);

// Reads --config files as JSON: top-level keys are long option names of the
// root command, nested objects hold the options of a subcommand.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App* app, bool default_also, bool write_description,
                        std::string prefix) const override;
  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override;
};

// Every configurable long option of the app and its selected subcommand with
// the value in effect after parsing. Suitable as a --config file for replay.
nlohmann::json resolved_config(const CLI::App& app);

// One manifest line: path[,label[,split]]. Blank lines and lines starting
// with '#' are skipped; relative paths resolve against the manifest folder.
struct ManifestEntry {
  std::filesystem::path path;
  std::string label;
  std::string split;
};

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& manifest);

// Loads a clip, mapping a missing or undecodable file to InvalidArgument so
// that callers report a bad manifest.
AudioClip load_clip(const std::filesystem::path& path);

// CSV field with separators and line breaks replaced, as in report files.
std::string csv_field(const std::string& text);

}  // namespace mehfest::cli
