#pragma once

#include <trimfit/gd_ilts.hpp>
#include <trimfit/global_ilts.hpp>
#include <trimfit/ilts.hpp>

#include "config.hpp"

namespace trimfit::cli {

// Missing fields keep the library defaults. `context` prefixes error messages.
IltsConfig parse_ilts_config(const json& object, std::string_view context);
GdConfig parse_gd_config(const json& object, std::string_view context);
GlobalConfig parse_global_config(const json& object, std::string_view context);

}  // namespace trimfit::cli
