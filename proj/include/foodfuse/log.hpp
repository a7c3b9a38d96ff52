#pragma once

#include <spdlog/spdlog.h>

#include <memory>

namespace foodfuse {

/// Shared stderr logger. Level comes from FOODFUSE_LOG
/// (trace|debug|info|warn|error|off, default warn).
std::shared_ptr<spdlog::logger> logger();

}  // namespace foodfuse
