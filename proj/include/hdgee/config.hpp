#pragma once

#include <filesystem>
#include <string_view>

#include "hdgee/studies.hpp"

namespace hdgee {

StudyKind parse_study_kind(std::string_view name);

/// Reads a JSON document mirroring StudyConfig. Unknown keys are rejected.
StudyConfig load_study_config(const std::filesystem::path& path);
StudyConfig parse_study_config(std::string_view json_text);

}  // namespace hdgee
