#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "bapipe/cost_models.hpp"
#include "bapipe/plan.hpp"
#include "bapipe/profiles.hpp"
#include "bapipe/rational.hpp"
#include "bapipe/schedule_kind.hpp"

namespace bapipe {

enum class EventKind { FP, BP, SEND_F, RECV_F, SEND_B, RECV_B };

inline const char* to_string(EventKind k) {
    switch (k) {
        case EventKind::FP: return "FP";
        case EventKind::BP: return "BP";
        case EventKind::SEND_F: return "SEND_F";
        case EventKind::RECV_F: return "RECV_F";
        case EventKind::SEND_B: return "SEND_B";
        case EventKind::RECV_B: return "RECV_B";
    }
    return "?";
}

struct Event {
    std::int64_t stage = 1;  // 1-based
    EventKind kind = EventKind::FP;
    std::int64_t micro_batch = 1;  // 1-based, numbered across mini-batches
    Rat start{0};
    Rat end{0};
};

struct Timeline {
    std::vector<Event> events;
    Rat makespan{0};
    std::vector<Rat> per_stage_feature_highwater;  // bytes
    std::vector<Rat> per_stage_weight_static;      // bytes
    std::vector<Rat> per_link_busy_fraction;       // one direction's utilization
};

// Chain-level description the engine runs on: per-stage compute times,
// per-link transfer times, per-stage activation unit (for the memory
// high-water) and weights.
struct ChainInstance {
    std::vector<Rat> F;             // size N
    std::vector<Rat> B;             // size N
    std::vector<std::int64_t> SR;   // size N-1, link k joins stage k, k+1
    std::vector<std::int64_t> a;    // size N, stage activation bytes
    std::vector<Rat> w;             // size N, stage weight bytes
};

namespace sim_detail {

// type: 0 FP, 1 BP, 2 forward transfer, 3 backward transfer.
struct Op {
    std::int64_t pos;  // producing stage's sequence position
    std::int64_t sub;  // breaks pos ties along dependency direction
    int type;
    std::int64_t stage;  // compute: stage; transfer: link index
    std::int64_t m;
};

}  // namespace sim_detail

// Deterministic discrete-event simulation of one or more mini-batches.
//
// All four kinds follow the 1F1B discipline: stage s first runs its
// warm-up forward micro-batches (depth N-s+1, doubled for FBP-AS/1F1B-SO,
// clamped to M), then alternates one BP with one FP. Asynchronous links
// stream a transfer alongside the producing compute event, so the
// consumer's dependency is the producer's completion; synchronous links
// carry the transfer only after the producer finishes, and the consumer
// waits for the receive to complete. Links are full duplex and add latency
// only; transfers never contend with each other or with compute.
// Mini-batches are separated by the weight-update barrier.
inline Timeline simulate_chain(ScheduleKind kind, const ChainInstance& inst,
                               std::int64_t M, std::int64_t mini_batches = 1) {
    if (M < 1) throw InvalidPlan("M >= 1 required");
    const std::int64_t N = (std::int64_t)inst.F.size();
    const bool async = mode_of(kind) == ExecutionMode::Asynchronous;

    // Per-stage op sequence positions. pos(F(m,s)) and pos(B(m,s)).
    std::vector<std::int64_t> warm(N + 1);
    for (std::int64_t s = 1; s <= N; ++s)
        warm[s] = std::min<std::int64_t>(M, warmup_depth(kind, N, s));
    auto posF = [&](std::int64_t m, std::int64_t s) {
        return m <= warm[s] ? m - 1 : 2 * m - warm[s] - 1;
    };
    auto posB = [&](std::int64_t m, std::int64_t s) {
        std::int64_t p = warm[s] + 2 * (m - 1);
        std::int64_t last_f = posF(M, s);
        // once FPs are exhausted the remaining BPs pack tightly
        if (p > last_f) p = last_f + (m - (M - warm[s]));
        return p;
    };

    // Topological order. Dependencies only ever point to ops with a
    // smaller stage-sequence position, or an equal position one hop along
    // the data-flow direction: forward ops flow with ascending stage,
    // backward ops with descending stage, and a transfer sits between its
    // producer and consumer. The sub key encodes exactly that.
    std::vector<sim_detail::Op> ops;
    for (std::int64_t s = 1; s <= N; ++s)
        for (std::int64_t m = 1; m <= M; ++m) {
            ops.push_back({posF(m, s), 2 * s, 0, s, m});
            ops.push_back({posB(m, s), 2 * (N + 1 - s), 1, s, m});
        }
    if (!async)
        for (std::int64_t k = 1; k <= N - 1; ++k)
            for (std::int64_t m = 1; m <= M; ++m) {
                ops.push_back({posF(m, k), 2 * k + 1, 2, k, m});
                ops.push_back({posB(m, k + 1), 2 * (N - k) + 1, 3, k, m});
            }
    std::sort(ops.begin(), ops.end(), [](const sim_detail::Op& x, const sim_detail::Op& y) {
        if (x.pos != y.pos) return x.pos < y.pos;
        if (x.sub != y.sub) return x.sub < y.sub;
        if (x.type != y.type) return x.type < y.type;
        if (x.stage != y.stage) return x.stage < y.stage;
        return x.m < y.m;
    });

    auto idx = [&](std::int64_t m, std::int64_t s) { return (s - 1) * M + (m - 1); };
    std::vector<Rat> startF(N * M), endF(N * M), startB(N * M), endB(N * M);
    std::vector<Rat> sendFstart((N - 1) * M), sendFend((N - 1) * M);
    std::vector<Rat> sendBstart((N - 1) * M), sendBend((N - 1) * M);
    auto lidx = [&](std::int64_t m, std::int64_t k) { return (k - 1) * M + (m - 1); };
    std::vector<Rat> stage_free(N + 1, Rat(0));

    for (const sim_detail::Op& op : ops) {
        std::int64_t m = op.m;
        if (op.type == 0) {
            std::int64_t s = op.stage;
            Rat ready = stage_free[s];
            if (s > 1) {
                Rat arrival = async ? endF[idx(m, s - 1)] : sendFend[lidx(m, s - 1)];
                if (arrival > ready) ready = arrival;
            }
            startF[idx(m, s)] = ready;
            endF[idx(m, s)] = ready + inst.F[s - 1];
            stage_free[s] = endF[idx(m, s)];
        } else if (op.type == 1) {
            std::int64_t s = op.stage;
            Rat ready = stage_free[s];
            if (endF[idx(m, s)] > ready) ready = endF[idx(m, s)];
            if (s < N) {
                Rat arrival = async ? endB[idx(m, s + 1)] : sendBend[lidx(m, s)];
                if (arrival > ready) ready = arrival;
            }
            startB[idx(m, s)] = ready;
            endB[idx(m, s)] = ready + inst.B[s - 1];
            stage_free[s] = endB[idx(m, s)];
        } else if (op.type == 2) {
            // forward transfer on link k, produced by F(m, k); transfers on
            // one link model latency only and do not contend with each other
            std::int64_t k = op.stage;
            Rat ready = endF[idx(m, k)];
            sendFstart[lidx(m, k)] = ready;
            sendFend[lidx(m, k)] = ready + Rat(inst.SR[k - 1]);
        } else {
            // backward transfer on link k, produced by B(m, k+1)
            std::int64_t k = op.stage;
            Rat ready = endB[idx(m, k + 1)];
            sendBstart[lidx(m, k)] = ready;
            sendBend[lidx(m, k)] = ready + Rat(inst.SR[k - 1]);
        }
    }

    Rat makespan(0);
    for (std::int64_t s = 1; s <= N; ++s)
        if (stage_free[s] > makespan) makespan = stage_free[s];
    if (!async)
        for (std::int64_t k = 1; k <= N - 1; ++k) {
            if (sendFend[lidx(M, k)] > makespan) makespan = sendFend[lidx(M, k)];
            if (sendBend[lidx(M, k)] > makespan) makespan = sendBend[lidx(M, k)];
        }

    Timeline t;
    for (std::int64_t r = 0; r < mini_batches; ++r) {
        Rat off = Rat(r) * makespan;
        std::int64_t moff = r * M;
        for (std::int64_t s = 1; s <= N; ++s)
            for (std::int64_t m = 1; m <= M; ++m) {
                t.events.push_back({s, EventKind::FP, m + moff, startF[idx(m, s)] + off,
                                    endF[idx(m, s)] + off});
                t.events.push_back({s, EventKind::BP, m + moff, startB[idx(m, s)] + off,
                                    endB[idx(m, s)] + off});
            }
        for (std::int64_t k = 1; k <= N - 1; ++k) {
            if (inst.SR[k - 1] == 0) continue;
            for (std::int64_t m = 1; m <= M; ++m) {
                Rat fs, fe, bs, be;
                if (async) {
                    fs = startF[idx(m, k)], fe = endF[idx(m, k)];
                    bs = startB[idx(m, k + 1)], be = endB[idx(m, k + 1)];
                } else {
                    fs = sendFstart[lidx(m, k)], fe = sendFend[lidx(m, k)];
                    bs = sendBstart[lidx(m, k)], be = sendBend[lidx(m, k)];
                }
                t.events.push_back({k, EventKind::SEND_F, m + moff, fs + off, fe + off});
                t.events.push_back({k + 1, EventKind::RECV_F, m + moff, fs + off, fe + off});
                t.events.push_back({k + 1, EventKind::SEND_B, m + moff, bs + off, be + off});
                t.events.push_back({k, EventKind::RECV_B, m + moff, bs + off, be + off});
            }
        }
    }
    std::sort(t.events.begin(), t.events.end(), [](const Event& a, const Event& b) {
        if (a.stage != b.stage) return a.stage < b.stage;
        if (a.start != b.start) return a.start < b.start;
        if (a.kind != b.kind) return (int)a.kind < (int)b.kind;
        return a.micro_batch < b.micro_batch;
    });
    t.makespan = Rat(mini_batches) * makespan;

    // Feature high-water: one activation buffer per micro-batch, live from
    // FP start to BP completion, half-open intervals.
    for (std::int64_t s = 1; s <= N; ++s) {
        std::vector<std::pair<Rat, int>> pts;
        for (std::int64_t m = 1; m <= M; ++m) {
            pts.push_back({startF[idx(m, s)], +1});
            pts.push_back({endB[idx(m, s)], -1});
        }
        std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first < b.first;
            return a.second < b.second;  // frees before allocations at equal time
        });
        std::int64_t cur = 0, peak = 0;
        for (auto& [time, d] : pts) {
            cur += d;
            if (cur > peak) peak = cur;
        }
        t.per_stage_feature_highwater.push_back(Rat(peak) * Rat(inst.a[s - 1]));
        t.per_stage_weight_static.push_back(Rat(2) * inst.w[s - 1]);
    }
    for (std::int64_t k = 1; k <= N - 1; ++k) {
        if (makespan == Rat(0))
            t.per_link_busy_fraction.push_back(Rat(0));
        else
            t.per_link_busy_fraction.push_back(Rat(M * inst.SR[k - 1]) / makespan);
    }
    return t;
}

inline ChainInstance chain_instance(const PartitionPlan& plan, const NetworkProfile& net,
                                    const ClusterSpec& cluster,
                                    std::int64_t micro_batch_size = 1) {
    ChainInstance inst;
    std::int64_t N = plan.n_stages();
    for (std::int64_t i = 1; i <= N; ++i) {
        inst.F.push_back(stage_fp_time(plan, i - 1, net, cluster));
        inst.B.push_back(stage_bp_time(plan, i - 1, net, cluster));
        inst.a.push_back(stage_activation_bytes(plan, i, net) * micro_batch_size);
        inst.w.push_back(stage_weight_bytes(plan, i - 1, net));
    }
    for (std::int64_t k = 1; k <= N - 1; ++k)
        inst.SR.push_back(link_sr_time(plan, k, net, cluster, micro_batch_size));
    return inst;
}

inline Timeline simulate(ScheduleKind kind, const PartitionPlan& plan,
                         const NetworkProfile& net, const ClusterSpec& cluster,
                         std::int64_t M, std::int64_t micro_batch_size = 1,
                         std::int64_t mini_batches = 1) {
    check_mode(kind, cluster.execution_mode);
    validate_plan(plan, net);
    if (plan.n_stages() != cluster.N())
        throw InvalidPlan("plan stage count != cluster size");
    return simulate_chain(kind, chain_instance(plan, net, cluster, micro_batch_size), M,
                          mini_batches);
}

inline std::vector<Rat> memory_highwater(const Timeline& t) {
    return t.per_stage_feature_highwater;
}

}  // namespace bapipe
