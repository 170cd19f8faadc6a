#pragma once

#include <filesystem>

#include "json.hpp"
#include "spectral_tower/construction.hpp"
#include "spectral_tower/quasimode.hpp"

namespace spectral_tower {

inline constexpr int kSchemaVersion = 1;

using Json = nlohmann::ordered_json;

/// NaN and infinities are written as null.
Json number(double v);
double number_from(const Json& j);

Json to_json(const ConstructionConfig& c);
ConstructionConfig config_from_json(const Json& j);

Json to_json(const CandidateRecord& c);
Json to_json(const StepRecord& s);
Json to_json(const UniformBoundsVerdict& v);
Json to_json(const LimitEstimate& e);
Json to_json(const ConstructionTrace& t);
ConstructionTrace trace_from_json(const Json& j);

Json to_json(const ResidualScan& s);

/// Pretty JSON with a trailing newline.
void write_json(const std::filesystem::path& path, const Json& j);
Json read_json(const std::filesystem::path& path);

}  // namespace spectral_tower
