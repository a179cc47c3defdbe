#pragma once

#include <filesystem>

#include <json.hpp>

#include "mehfest/attack.hpp"
#include "mehfest/detector.hpp"
#include "mehfest/stft.hpp"
#include "mehfest/sv.hpp"

// JSON schemas for profiles, models and attack metadata.
namespace mehfest {

void to_json(nlohmann::json& j, const StftParams& p);
void from_json(const nlohmann::json& j, StftParams& p);

void to_json(nlohmann::json& j, const DetectorProfile& p);
void from_json(const nlohmann::json& j, DetectorProfile& p);

void to_json(nlohmann::json& j, const Pick& p);

namespace sv {
void to_json(nlohmann::json& j, const FeatureParams& p);
void from_json(const nlohmann::json& j, FeatureParams& p);
void to_json(nlohmann::json& j, const Gmm& g);
void from_json(const nlohmann::json& j, Gmm& g);
void to_json(nlohmann::json& j, const SvModel& m);
void from_json(const nlohmann::json& j, SvModel& m);
}  // namespace sv

namespace attack {
void to_json(nlohmann::json& j, const DetectorGeometry& g);
void from_json(const nlohmann::json& j, DetectorGeometry& g);
void to_json(nlohmann::json& j, const AttackParams& p);
void from_json(const nlohmann::json& j, AttackParams& p);
// Metadata only; the waveform goes to a WAV file.
void to_json(nlohmann::json& j, const AttackResult& r);
}  // namespace attack

nlohmann::json read_json(const std::filesystem::path& path);
void write_json(const nlohmann::json& j, const std::filesystem::path& path);

}  // namespace mehfest
