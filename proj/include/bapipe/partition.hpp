#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "bapipe/cost_models.hpp"
#include "bapipe/plan.hpp"
#include "bapipe/profiles.hpp"
#include "bapipe/rational.hpp"

namespace bapipe {

// Harmonic-mean seed: with T_n the whole-network micro-batch time on
// accelerator n, the ideal per-stage time is 1 / sum(1/T_n).
inline Rat ideal_stage_time(const std::vector<std::int64_t>& T_n) {
    Rat inv(0);
    for (std::int64_t t : T_n) {
        if (t < 1) throw SchemaError("ideal_stage_time: T_n >= 1 required");
        inv += Rat(1, t);
    }
    return Rat(1) / inv;
}

// A contiguous run of layers treated as one indivisible partitioning unit.
struct CoarseBlock {
    std::int64_t lo = 1, hi = 1;  // original layer range, 1-based
    std::map<std::string, std::int64_t> fp_time;  // summed per accelerator type
    std::map<std::string, std::int64_t> bp_time;
    std::int64_t weight_bytes = 0;
    std::int64_t out_activation_bytes = 0;  // last member layer's
};

struct CoarseNetwork {
    std::vector<CoarseBlock> blocks;
    std::int64_t cut_threshold = 0;  // a_th
};

// Cut points are allowed only after layers whose output activation is at
// most a_th; blocks are maximal runs between allowed cuts.
inline CoarseNetwork coarsen_by_comm(const NetworkProfile& net, std::int64_t a_th) {
    if (a_th < 0) throw SchemaError("coarsen_by_comm: a_th >= 0 required");
    CoarseNetwork cn;
    cn.cut_threshold = a_th;
    std::int64_t L = net.L();
    std::int64_t start = 1;
    for (std::int64_t j = 1; j <= L; ++j) {
        bool cut_here = (j == L) || (net.layers[j - 1].out_activation_bytes <= a_th);
        if (!cut_here) continue;
        CoarseBlock b;
        b.lo = start;
        b.hi = j;
        for (std::int64_t i = start; i <= j; ++i) {
            const LayerProfile& l = net.layers[i - 1];
            for (auto& [t, v] : l.fp_time) b.fp_time[t] += v;
            for (auto& [t, v] : l.bp_time) b.bp_time[t] += v;
            b.weight_bytes += l.weight_bytes;
        }
        b.out_activation_bytes = net.layers[j - 1].out_activation_bytes;
        cn.blocks.push_back(std::move(b));
        start = j + 1;
    }
    return cn;
}

namespace part_detail {

struct Unit {
    std::int64_t lo, hi;
    std::int64_t weight_bytes;
    std::int64_t out_act;
    std::vector<std::int64_t> cost;  // fp+bp per stage (indexed by stage-1)
};

inline std::vector<Unit> units_from_network(const NetworkProfile& net,
                                            const ClusterSpec& cluster) {
    std::vector<Unit> us;
    for (std::int64_t j = 1; j <= net.L(); ++j) {
        const LayerProfile& l = net.layers[j - 1];
        Unit u{j, j, l.weight_bytes, l.out_activation_bytes, {}};
        for (const AcceleratorSpec& a : cluster.accelerators)
            u.cost.push_back(l.fpbp(a.accel_type));
        us.push_back(std::move(u));
    }
    return us;
}

inline std::vector<Unit> units_from_coarse(const CoarseNetwork& cn,
                                           const ClusterSpec& cluster) {
    std::vector<Unit> us;
    for (const CoarseBlock& b : cn.blocks) {
        Unit u{b.lo, b.hi, b.weight_bytes, b.out_activation_bytes, {}};
        for (const AcceleratorSpec& a : cluster.accelerators) {
            auto fit = b.fp_time.find(a.accel_type);
            auto bit = b.bp_time.find(a.accel_type);
            if (fit == b.fp_time.end() || bit == b.bp_time.end())
                throw SchemaError("coarse block lacks times for accelerator type '" +
                                  a.accel_type + "'");
            u.cost.push_back(fit->second + bit->second);
        }
        us.push_back(std::move(u));
    }
    return us;
}

// Exact min-max contiguous partition of units onto the cluster's stages.
// Ties on the optimal stage time are broken by the smallest maximum stage
// memory footprint (2w + (N-n+1)*a_in, 1F1B units), then earliest cuts.
inline std::vector<std::pair<std::int64_t, std::int64_t>> partition_units(
    const std::vector<Unit>& units, std::int64_t N) {
    const std::int64_t U = (std::int64_t)units.size();
    if (U < N)
        throw InfeasibleShape(std::to_string(U) + " partition units for " +
                              std::to_string(N) + " stages");
    constexpr std::int64_t INF = std::numeric_limits<std::int64_t>::max() / 4;

    // prefix sums: time[n][j] = cost of units 1..j on stage n; wsum[j]
    std::vector<std::vector<std::int64_t>> time(N + 1,
                                                std::vector<std::int64_t>(U + 1, 0));
    std::vector<std::int64_t> wsum(U + 1, 0);
    for (std::int64_t j = 1; j <= U; ++j) {
        wsum[j] = wsum[j - 1] + units[j - 1].weight_bytes;
        for (std::int64_t n = 1; n <= N; ++n)
            time[n][j] = time[n][j - 1] + units[j - 1].cost[n - 1];
    }
    auto seg_time = [&](std::int64_t n, std::int64_t k, std::int64_t j) {
        return time[n][j] - time[n][k];
    };
    auto seg_foot = [&](std::int64_t n, std::int64_t k, std::int64_t j) {
        std::int64_t a_in = (k >= 1) ? units[k - 1].out_act : units[j - 1].out_act;
        return 2 * (wsum[j] - wsum[k]) + (N - n + 1) * a_in;
    };

    // pass 1: optimal min-max stage time
    std::vector<std::vector<std::int64_t>> dp(N + 1, std::vector<std::int64_t>(U + 1, INF));
    dp[0][0] = 0;
    for (std::int64_t n = 1; n <= N; ++n)
        for (std::int64_t j = n; j <= U - (N - n); ++j)
            for (std::int64_t k = n - 1; k < j; ++k) {
                if (dp[n - 1][k] == INF) continue;
                std::int64_t v = std::max(dp[n - 1][k], seg_time(n, k, j));
                if (v < dp[n][j]) dp[n][j] = v;
            }
    const std::int64_t T_opt = dp[N][U];

    // pass 2: among time-optimal plans, the smallest max footprint
    std::vector<std::vector<std::int64_t>> g(N + 1, std::vector<std::int64_t>(U + 1, INF));
    g[0][0] = 0;
    for (std::int64_t n = 1; n <= N; ++n)
        for (std::int64_t j = n; j <= U - (N - n); ++j)
            for (std::int64_t k = n - 1; k < j; ++k) {
                if (g[n - 1][k] == INF || seg_time(n, k, j) > T_opt) continue;
                std::int64_t v = std::max(g[n - 1][k], seg_foot(n, k, j));
                if (v < g[n][j]) g[n][j] = v;
            }
    const std::int64_t F_opt = g[N][U];

    // suffix feasibility under (T_opt, F_opt), then earliest-cut greedy
    std::vector<std::vector<char>> feas(N + 1, std::vector<char>(U + 1, 0));
    feas[N][U] = 1;
    for (std::int64_t n = N - 1; n >= 0; --n)
        for (std::int64_t j = n; j <= U; ++j)
            for (std::int64_t j2 = j + 1; j2 <= U; ++j2) {
                if (seg_time(n + 1, j, j2) > T_opt || seg_foot(n + 1, j, j2) > F_opt)
                    continue;
                if (feas[n + 1][j2]) { feas[n][j] = 1; break; }
            }

    std::vector<std::pair<std::int64_t, std::int64_t>> ranges;
    std::int64_t cur = 0;
    for (std::int64_t n = 1; n <= N; ++n) {
        std::int64_t chosen = -1;
        for (std::int64_t j = cur + 1; j <= U; ++j) {
            if (seg_time(n, cur, j) > T_opt || seg_foot(n, cur, j) > F_opt) continue;
            if (feas[n][j]) { chosen = j; break; }
        }
        if (chosen < 0) throw Error("partition reconstruction failed");  // unreachable
        ranges.push_back({cur + 1, chosen});
        cur = chosen;
    }
    return ranges;
}

inline PartitionPlan plan_from_ranges(
    const std::vector<Unit>& units,
    const std::vector<std::pair<std::int64_t, std::int64_t>>& ranges,
    const ClusterSpec& cluster) {
    PartitionPlan plan;
    for (std::size_t n = 0; n < ranges.size(); ++n) {
        StageAssignment s;
        s.accelerator_id = cluster.accelerators[n].id;
        s.lo = units[ranges[n].first - 1].lo;
        s.hi = units[ranges[n].second - 1].hi;
        plan.stages.push_back(std::move(s));
    }
    return plan;
}

}  // namespace part_detail

// Optimal contiguous whole-layer partition by stage compute time,
// communication and memory ignored.
inline PartitionPlan inter_layer_partition(const NetworkProfile& net,
                                           const ClusterSpec& cluster) {
    validate_pair(net, cluster);
    auto units = part_detail::units_from_network(net, cluster);
    auto ranges = part_detail::partition_units(units, cluster.N());
    return part_detail::plan_from_ranges(units, ranges, cluster);
}

// Same, but cuts restricted to coarse block boundaries.
inline PartitionPlan inter_layer_partition(const CoarseNetwork& cn,
                                           const ClusterSpec& cluster) {
    auto units = part_detail::units_from_coarse(cn, cluster);
    auto ranges = part_detail::partition_units(units, cluster.N());
    return part_detail::plan_from_ranges(units, ranges, cluster);
}

struct CommReport {
    bool bottleneck = false;
    std::int64_t worst_link = 0;             // 1-based; 0 when no links
    std::vector<std::int64_t> comm_time;     // per link, us
};

inline CommReport detect_comm_bottleneck(const PartitionPlan& plan,
                                         const NetworkProfile& net,
                                         const ClusterSpec& cluster, Rat target,
                                         std::int64_t micro_batch_size = 1) {
    CommReport rep;
    std::int64_t worst = -1;
    for (std::int64_t k = 1; k <= plan.n_stages() - 1; ++k) {
        std::int64_t ct = link_sr_time(plan, k, net, cluster, micro_batch_size);
        rep.comm_time.push_back(ct);
        if (ct > worst) { worst = ct; rep.worst_link = k; }
        if (Rat(ct) > target) rep.bottleneck = true;
    }
    return rep;
}

// Fractional balancing across adjacent stage boundaries. Each accepted
// move splits a boundary layer, strictly lowers the pair's max compute
// time, and never raises a cut's crossing activation. Exact equalizing
// fractions are kept when their denominator is <= 1024, otherwise snapped
// to the 1/1024 grid.
inline PartitionPlan intra_layer_refine(PartitionPlan plan, const NetworkProfile& net,
                                        const ClusterSpec& cluster) {
    const std::int64_t N = plan.n_stages();
    if (N <= 1) return plan;

    auto layer_cost = [&](std::int64_t j, std::int64_t stage_idx0) {
        return Rat(net.layers[j - 1].fpbp(cluster.accelerators[stage_idx0].accel_type));
    };

    auto quantize = [&](Rat x, Rat t_hi, Rat t_lo, Rat c_from, Rat c_to, Rat avail) -> Rat {
        // pick the grid value minimizing max of the two new stage times
        auto score = [&](Rat f) { return std::max(t_hi - f * c_from, t_lo + f * c_to); };
        if (x.den() <= 1024) return x;
        Rat lo = Rat((x * Rat(1024)).floor(), 1024);
        Rat hi = Rat((x * Rat(1024)).ceil(), 1024);
        if (hi >= avail) return lo;
        return score(lo) <= score(hi) ? lo : hi;
    };

    // move fraction x of layer j from stage n to stage n+1 (dir=+1) or from
    // stage n+1 to stage n (dir=-1); boundary layout updated in place
    auto apply_move = [&](std::int64_t n0, int dir, Rat x) {
        StageAssignment& a = plan.stages[n0];
        StageAssignment& b = plan.stages[n0 + 1];
        bool shared = (a.hi == b.lo);
        if (dir > 0) {
            if (shared) {
                a.trailing_fraction -= x;
                b.leading_fraction += x;
            } else {
                a.trailing_fraction = Rat(1) - x;
                b.lo = a.hi;
                b.leading_fraction = x;
            }
        } else {
            if (shared) {
                b.leading_fraction -= x;
                a.trailing_fraction += x;
            } else {
                b.leading_fraction = Rat(1) - x;
                a.hi = b.lo;
                a.trailing_fraction = x;
            }
        }
    };

    bool changed = true;
    int guard = 0;
    while (changed && ++guard < 1000) {
        changed = false;
        // one forward pass, then one backward pass
        for (int pass = 0; pass < 2; ++pass) {
            for (std::int64_t i = 0; i < N - 1; ++i) {
                std::int64_t n0 = (pass == 0) ? i : (N - 2 - i);
                Rat t_a = stage_compute_time(plan, n0, net, cluster);
                Rat t_b = stage_compute_time(plan, n0 + 1, net, cluster);
                if (t_a == t_b) continue;
                int dir = (t_a > t_b) ? +1 : -1;
                StageAssignment& from = plan.stages[dir > 0 ? n0 : n0 + 1];
                std::int64_t j = (dir > 0) ? from.hi : from.lo;
                bool shared = (plan.stages[n0].hi == plan.stages[n0 + 1].lo);
                // a backward move of a whole-owned layer relocates the cut
                // into layer j; only allowed when its crossing activation
                // does not exceed the current cut's
                if (dir < 0 && !shared) {
                    std::int64_t cur_cut = net.layers[plan.stages[n0].hi - 1]
                                               .out_activation_bytes;
                    if (net.layers[j - 1].out_activation_bytes > cur_cut) continue;
                }
                Rat c_from = layer_cost(j, dir > 0 ? n0 : n0 + 1);
                Rat c_to = layer_cost(j, dir > 0 ? n0 + 1 : n0);
                Rat t_hi = std::max(t_a, t_b), t_lo = std::min(t_a, t_b);
                Rat x = (t_hi - t_lo) / (c_from + c_to);
                Rat avail = owned_fraction(from, j);
                if (x >= avail) x = avail - Rat(1, 1024);
                if (!(x > Rat(0))) continue;
                x = quantize(x, t_hi, t_lo, c_from, c_to, avail);
                if (!(x > Rat(0)) || x >= avail) continue;
                if (std::max(t_hi - x * c_from, t_lo + x * c_to) >= t_hi) continue;
                apply_move(n0, dir, x);
                changed = true;
            }
        }
    }
    return plan;
}

// Shifts whole boundary layers off over-capacity stages toward the
// neighbor with the most headroom until the memory model fits everywhere.
// Fractional boundaries are consolidated first. Each accepted shift must
// strictly reduce total overload; Infeasible otherwise.
inline PartitionPlan memory_fine_tune(PartitionPlan plan, const NetworkProfile& net,
                                      const ClusterSpec& cluster, ScheduleKind kind,
                                      std::int64_t M, std::int64_t micro_batch_size = 1) {
    const std::int64_t N = plan.n_stages();

    auto overloads = [&]() {
        CostEstimate e = estimate(kind, plan, net, cluster, M, micro_batch_size);
        std::vector<Rat> over;
        Rat total(0);
        for (std::int64_t i = 0; i < N; ++i) {
            Rat mem = e.features_mem[i] + e.weights_mem[i];
            Rat cap(cluster.accelerators[i].mem_capacity_bytes);
            Rat ov = mem > cap ? mem - cap : Rat(0);
            over.push_back(ov);
            total += ov;
        }
        return std::make_pair(over, total);
    };
    if (overloads().second == Rat(0)) return plan;  // already fits, identity

    // collapse fractional splits: shared layer goes to the larger owner
    for (std::int64_t n = 0; n < N - 1; ++n) {
        StageAssignment& a = plan.stages[n];
        StageAssignment& b = plan.stages[n + 1];
        if (a.hi != b.lo) continue;
        if (a.trailing_fraction >= b.leading_fraction) {
            a.trailing_fraction = Rat(1);
            b.lo = a.hi + 1;
            b.leading_fraction = Rat(1);
        } else {
            b.leading_fraction = Rat(1);
            a.hi = a.hi - 1;
            a.trailing_fraction = Rat(1);
        }
    }

    auto [over, total] = overloads();
    int guard = 0;
    while (total > Rat(0)) {
        if (++guard > 8 * (int)(N * net.L() + 4))
            throw Infeasible("memory fine-tune did not converge");
        // worst stage first
        std::int64_t worst = 0;
        for (std::int64_t i = 1; i < N; ++i)
            if (over[i] > over[worst]) worst = i;

        // candidate shifts ordered by neighbor headroom
        struct Cand { std::int64_t nbr; int dir; };
        std::vector<Cand> cands;
        auto headroom = [&](std::int64_t i) {
            CostEstimate e = estimate(kind, plan, net, cluster, M, micro_batch_size);
            return Rat(cluster.accelerators[i].mem_capacity_bytes) -
                   (e.features_mem[i] + e.weights_mem[i]);
        };
        if (worst > 0) cands.push_back({worst - 1, -1});
        if (worst < N - 1) cands.push_back({worst + 1, +1});
        if (cands.size() == 2 && headroom(worst + 1) > headroom(worst - 1))
            std::swap(cands[0], cands[1]);

        bool moved = false;
        for (int relax_comm = 0; relax_comm < 2 && !moved; ++relax_comm) {
            for (const Cand& c : cands) {
                const StageAssignment& w = plan.stages[worst];
                if (w.lo == w.hi) continue;  // stage must keep a layer
                PartitionPlan trial = plan;
                if (c.dir < 0) {
                    trial.stages[worst].lo += 1;
                    trial.stages[c.nbr].hi += 1;
                } else {
                    trial.stages[worst].hi -= 1;
                    trial.stages[c.nbr].lo -= 1;
                }
                PartitionPlan saved = plan;
                plan = trial;
                auto [over2, total2] = overloads();
                bool ok = total2 < total;
                if (ok && !relax_comm) {
                    Rat target = max_stage_compute_time(plan, net, cluster);
                    ok = !detect_comm_bottleneck(plan, net, cluster, target,
                                                 micro_batch_size)
                              .bottleneck;
                }
                if (ok) {
                    over = over2;
                    total = total2;
                    moved = true;
                    break;
                }
                plan = saved;
            }
        }
        if (!moved)
            throw Infeasible("no contiguous plan satisfies memory for " +
                             std::string(to_string(kind)) + ", M=" + std::to_string(M));
    }
    return plan;
}

// The full balancing flow: optimal inter-layer split assuming overlap;
// communication-driven coarsening when a link cannot keep up (skipping
// intra-layer refinement afterwards); otherwise fractional refinement;
// finally memory fine-tuning.
inline PartitionPlan balance_partition(const NetworkProfile& net, const ClusterSpec& cluster,
                                       ScheduleKind kind, std::int64_t M,
                                       std::int64_t micro_batch_size = 1) {
    check_mode(kind, cluster.execution_mode);
    validate_pair(net, cluster);
    const std::int64_t N = cluster.N();
    if (N == 1) {
        PartitionPlan plan;
        plan.stages.push_back({cluster.accelerators[0].id, 1, net.L(), Rat(1), Rat(1)});
        return memory_fine_tune(plan, net, cluster, kind, M, micro_batch_size);
    }

    PartitionPlan plan = inter_layer_partition(net, cluster);
    Rat target = max_stage_compute_time(plan, net, cluster);
    CommReport rep = detect_comm_bottleneck(plan, net, cluster, target, micro_batch_size);
    if (rep.bottleneck) {
        // a_th sized so that any allowed cut's transfer fits under the target
        std::int64_t min_bw = *std::min_element(cluster.link_bandwidth.begin(),
                                                cluster.link_bandwidth.end());
        std::int64_t a_th = (Rat(min_bw) * target / Rat(micro_batch_size)).floor();
        CoarseNetwork cn = coarsen_by_comm(net, a_th);
        if ((std::int64_t)cn.blocks.size() < N)
            throw Infeasible("coarsening for communication leaves " +
                             std::to_string(cn.blocks.size()) + " blocks for " +
                             std::to_string(N) + " stages");
        plan = inter_layer_partition(cn, cluster);
        return memory_fine_tune(plan, net, cluster, kind, M, micro_batch_size);
    }
    plan = intra_layer_refine(plan, net, cluster);
    CostEstimate e = estimate(kind, plan, net, cluster, M, micro_batch_size);
    if (!e.memory_feasible())
        plan = memory_fine_tune(plan, net, cluster, kind, M, micro_batch_size);
    return plan;
}

}  // namespace bapipe
