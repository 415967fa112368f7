#pragma once

#include <json.hpp>

#include "qestlab/adaptive.hpp"
#include "qestlab/models.hpp"

namespace qestlab {

using Json = nlohmann::json;

/// Matrix literal: nested row-major array of [re, im] pairs.
Cmat parse_cmatrix(const Json& j);
Json emit_cmatrix(const Cmat& m);

/// Real matrices are emitted as plain nested number arrays.
Rmat parse_rmatrix(const Json& j);
Json emit_rmatrix(const Rmat& m);

ParameterRegion parse_region(const Json& j);

/// Model config: {"name": ..., "params": {...}} for built-ins (nested a/b for
/// product), {"grid": {"thetas": [...], "states": [matrix, ...]}} for user
/// models; optional "region" override.
StateModel load_state_model(const Json& j);
ChannelModel load_channel_model(const Json& j);

/// {"elements": [matrix, ...]}
Povm load_povm(const Json& j);

/// Schedule config: named instruments plus a decision table mapping
/// history-prefix patterns to instrument names; optional estimator table.
struct ScheduleConfig {
    AdaptiveSchedule schedule;
    std::function<Rvec(const std::vector<int>&)> value_fn; // empty when absent
};
ScheduleConfig load_schedule(const Json& j);

std::string format_double(double v); // 17 significant digits

} // namespace qestlab
