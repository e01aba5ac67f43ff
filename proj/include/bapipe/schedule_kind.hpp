#pragma once

#include <array>
#include <optional>
#include <string>

#include "bapipe/errors.hpp"

namespace bapipe {

enum class ExecutionMode { Synchronous, Asynchronous };

// The four pipeline disciplines. AS kinds run on asynchronous clusters
// (FPGA-style streaming links), SNO/SO on synchronous ones.
enum class ScheduleKind { OneFOneB_AS, FBP_AS, OneFOneB_SNO, OneFOneB_SO };

constexpr std::array<ScheduleKind, 4> all_schedule_kinds = {
    ScheduleKind::OneFOneB_AS, ScheduleKind::FBP_AS,
    ScheduleKind::OneFOneB_SNO, ScheduleKind::OneFOneB_SO};

inline const char* to_string(ScheduleKind k) {
    switch (k) {
        case ScheduleKind::OneFOneB_AS: return "1f1b-as";
        case ScheduleKind::FBP_AS: return "fbp-as";
        case ScheduleKind::OneFOneB_SNO: return "1f1b-sno";
        case ScheduleKind::OneFOneB_SO: return "1f1b-so";
    }
    return "?";
}

inline const char* to_string(ExecutionMode m) {
    return m == ExecutionMode::Synchronous ? "sync" : "async";
}

inline std::optional<ScheduleKind> parse_schedule_kind(const std::string& s) {
    for (ScheduleKind k : all_schedule_kinds)
        if (s == to_string(k)) return k;
    return std::nullopt;
}

inline ExecutionMode mode_of(ScheduleKind k) {
    switch (k) {
        case ScheduleKind::OneFOneB_AS:
        case ScheduleKind::FBP_AS: return ExecutionMode::Asynchronous;
        default: return ExecutionMode::Synchronous;
    }
}

// Warm-up pipeline depth at stage s (1-based) of an N-stage chain:
// N-s+1 forward micro-batches for 1F1B-AS/SNO, doubled for FBP-AS and
// 1F1B-SO. Callers clamp to M.
inline std::int64_t warmup_depth(ScheduleKind k, std::int64_t n_stages,
                                 std::int64_t stage) {
    std::int64_t d = n_stages - stage + 1;
    if (k == ScheduleKind::FBP_AS || k == ScheduleKind::OneFOneB_SO) d *= 2;
    return d;
}

inline void check_mode(ScheduleKind k, ExecutionMode mode) {
    if (mode_of(k) != mode)
        throw IncompatibleSchedule(std::string(to_string(k)) + " requires " +
                                   to_string(mode_of(k)) + " execution, cluster is " +
                                   to_string(mode));
}

}  // namespace bapipe
