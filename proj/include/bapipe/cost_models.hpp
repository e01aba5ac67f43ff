#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "bapipe/plan.hpp"
#include "bapipe/profiles.hpp"
#include "bapipe/rational.hpp"
#include "bapipe/schedule_kind.hpp"

namespace bapipe {

// Per-stage inputs to the closed-form models. F/B are one micro-batch's
// FP/BP compute time on this stage, a the activation (= backward error)
// crossing the stage's input cut, w the stage weights, SR the send/receive
// time of that activation on the adjacent link.
struct StageCost {
    Rat F{0};
    Rat B{0};
    std::int64_t a = 0;
    Rat w{0};
    std::int64_t SR = 0;
};

struct CostEstimate {
    ScheduleKind schedule = ScheduleKind::OneFOneB_AS;
    std::int64_t M = 1;
    std::int64_t N = 1;
    Rat minibatch_time{0};
    Rat bubble_fraction{0};
    std::vector<Rat> features_mem;       // bytes, per stage
    std::vector<Rat> weights_mem;        // bytes, per stage
    std::vector<Rat> bandwidth_demand;   // bytes/us, per link (N-1 entries)
    std::vector<bool> mem_infeasible;    // per stage
    // The balanced formulas substitute per-stage maxima; for unbalanced
    // plans or M < N they are an upper-bound heuristic, not exact.
    bool heuristic = false;

    bool memory_feasible() const {
        return std::none_of(mem_infeasible.begin(), mem_infeasible.end(),
                            [](bool b) { return b; });
    }
};

// Mini-batch makespan under balanced stages.
//   AS kinds:  (M+N-1)(F+B)
//   1F1B-SNO:  (M+N-1)(F+B) + (N+M-2-ceil((M-1)/N)) * 2SR
//   1F1B-SO:   (M+N-1)(F+B) + (N-1) * 2SR
inline Rat minibatch_time(ScheduleKind kind, std::int64_t M, std::int64_t N, Rat F, Rat B,
                          Rat SR) {
    Rat base = Rat(M + N - 1) * (F + B);
    switch (kind) {
        case ScheduleKind::OneFOneB_AS:
        case ScheduleKind::FBP_AS:
            return base;
        case ScheduleKind::OneFOneB_SNO:
            return base + Rat(N + M - 2 - ceil_div(M - 1, N)) * Rat(2) * SR;
        case ScheduleKind::OneFOneB_SO:
            return base + Rat(N - 1) * Rat(2) * SR;
    }
    return base;
}

inline Rat bubble_fraction(ScheduleKind kind, std::int64_t M, std::int64_t N, Rat F, Rat B,
                           Rat SR) {
    if (N == 1) return Rat(0);
    Rat total = minibatch_time(kind, M, N, F, B, SR);
    switch (kind) {
        case ScheduleKind::OneFOneB_AS:
        case ScheduleKind::FBP_AS:
            return Rat(N - 1, M + N - 1);
        case ScheduleKind::OneFOneB_SNO: {
            Rat num = Rat(N - 1) * (F + B + Rat(2) * SR) +
                      Rat(M - 1 - ceil_div(M - 1, N)) * Rat(2) * SR;
            return num / total;
        }
        case ScheduleKind::OneFOneB_SO:
            return Rat(N - 1) * (F + B + Rat(2) * SR) / total;
    }
    return Rat(0);
}

// Activation buffers held at stage i (1-based). Doubled-warm-up kinds
// (FBP-AS, 1F1B-SO) keep twice as many micro-batches in flight.
inline Rat features_memory(ScheduleKind kind, std::int64_t N, std::int64_t i, Rat a) {
    Rat m = Rat(N - i + 1) * a;
    if (kind == ScheduleKind::FBP_AS || kind == ScheduleKind::OneFOneB_SO)
        m = Rat(2) * m;
    return m;
}

// Weights plus gradients; identical across kinds.
inline Rat weights_memory(Rat w) { return Rat(2) * w; }

// Minimum link bandwidth for full compute/communication overlap.
inline Rat bandwidth_demand(ScheduleKind kind, Rat a, Rat F, Rat B) {
    if (kind == ScheduleKind::FBP_AS) return Rat(2) * a / (F + B);
    return a / F;
}

// Builds per-stage StageCosts from an actual plan.
inline std::vector<StageCost> stage_costs(const PartitionPlan& plan,
                                          const NetworkProfile& net,
                                          const ClusterSpec& cluster,
                                          std::int64_t micro_batch_size = 1) {
    std::vector<StageCost> out;
    std::int64_t N = plan.n_stages();
    for (std::int64_t i = 1; i <= N; ++i) {
        StageCost c;
        c.F = stage_fp_time(plan, i - 1, net, cluster);
        c.B = stage_bp_time(plan, i - 1, net, cluster);
        c.w = stage_weight_bytes(plan, i - 1, net);
        c.a = stage_activation_bytes(plan, i, net) * micro_batch_size;
        c.SR = (i >= 2) ? link_sr_time(plan, i - 1, net, cluster, micro_batch_size) : 0;
        out.push_back(c);
    }
    return out;
}

// Evaluates the balanced-stage formulas with per-stage maxima substituted
// for F, B, SR. Exact for balanced plans; an upper-bound heuristic
// otherwise (the simulator is authoritative there).
inline CostEstimate estimate(ScheduleKind kind, const PartitionPlan& plan,
                             const NetworkProfile& net, const ClusterSpec& cluster,
                             std::int64_t M, std::int64_t micro_batch_size = 1) {
    check_mode(kind, cluster.execution_mode);
    if (plan.n_stages() != cluster.N())
        throw InvalidPlan("plan stage count != cluster size");
    std::vector<StageCost> costs = stage_costs(plan, net, cluster, micro_batch_size);
    std::int64_t N = plan.n_stages();

    Rat Fm(0), Bm(0);
    std::int64_t SRm = 0;
    bool balanced = true;
    for (const StageCost& c : costs) {
        if (c.F != costs[0].F || c.B != costs[0].B) balanced = false;
        if (c.F > Fm) Fm = c.F;
        if (c.B > Bm) Bm = c.B;
        if (c.SR > SRm) SRm = c.SR;
    }
    for (std::int64_t i = 2; i <= N; ++i)
        if (costs[i - 1].SR != costs[N > 1 ? 1 : 0].SR) balanced = false;

    CostEstimate e;
    e.schedule = kind;
    e.M = M;
    e.N = N;
    e.minibatch_time = minibatch_time(kind, M, N, Fm, Bm, Rat(SRm));
    e.bubble_fraction = bubble_fraction(kind, M, N, Fm, Bm, Rat(SRm));
    e.heuristic = !balanced || M < N;
    for (std::int64_t i = 1; i <= N; ++i) {
        const StageCost& c = costs[i - 1];
        Rat fm = features_memory(kind, N, i, Rat(c.a));
        Rat wm = weights_memory(c.w);
        e.features_mem.push_back(fm);
        e.weights_mem.push_back(wm);
        e.mem_infeasible.push_back(fm + wm >
                                   Rat(cluster.accelerators[i - 1].mem_capacity_bytes));
    }
    for (std::int64_t k = 1; k <= N - 1; ++k) {
        Rat a(cut_activation_bytes(plan, k, net) * micro_batch_size);
        e.bandwidth_demand.push_back(bandwidth_demand(kind, a, Fm, Bm));
    }
    return e;
}

}  // namespace bapipe
