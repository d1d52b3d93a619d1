#pragma once

#include <filesystem>
#include <string>

#include "warpflow/barriers.hpp"
#include "warpflow/profiles.hpp"

namespace warpflow {

// Profile CSV: `# kind=<warped|sideways|rescaled> p=<..> q=<..> t|tau=<..>`
// then one row per node: coordinate, field1, field2[, field3].
void write_csv(const std::filesystem::path& path, const WarpedProfile& w);
void write_csv(const std::filesystem::path& path, const SidewaysProfile& s);
void write_csv(const std::filesystem::path& path, const RescaledProfile& r);

enum class ProfileKind { warped, sideways, rescaled };
ProfileKind peek_profile_kind(const std::filesystem::path& path);

WarpedProfile read_warped_csv(const std::filesystem::path& path);
SidewaysProfile read_sideways_csv(const std::filesystem::path& path);
RescaledProfile read_rescaled_csv(const std::filesystem::path& path, double T);

std::string to_json(const BarrierReport& rep);
std::string to_json(const MembershipReport& rep);

}  // namespace warpflow
