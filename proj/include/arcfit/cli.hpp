#pragma once

#include <cstdint>
#include <string>

#include "arcfit/generate.hpp"
#include "arcfit/lane_ingest.hpp"

namespace arcfit {

// Command implementations behind the arcfit CLI. Each returns a process exit
// code: 0 success, 2 input/config error, 3 output error, 4 solver failure.
// `quiet` suppresses the informational stdout lines.

int cmd_generate(const std::string& kind, const GenParams& params, uint64_t seed,
                 const std::string& output, bool quiet = false);

int cmd_ingest(const std::string& trajectory_path, const std::string& output, LaneSide side,
               bool quiet = false);

int cmd_fit_single(const std::string& input, const std::string& config_path,
                   const std::string& output, bool quiet = false);

int cmd_fit_multi(const std::string& input, const std::string& config_path,
                  const std::string& output, const std::string& plot_path = "",
                  bool quiet = false);

int cmd_render(const std::string& points_path, const std::string& spline_path,
               const std::string& output, bool quiet = false);

}  // namespace arcfit
