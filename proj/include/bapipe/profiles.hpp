#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "bapipe/errors.hpp"
#include "bapipe/schedule_kind.hpp"

namespace bapipe {

using json = nlohmann::ordered_json;

// Per-layer record: compute times are integer microseconds for one
// micro-batch, keyed by accelerator type. Byte sizes are per unit of
// micro-batch size; memory and link-time accounting scale them by the
// actual micro-batch size.
struct LayerProfile {
    std::string name;
    std::map<std::string, std::int64_t> fp_time;
    std::map<std::string, std::int64_t> bp_time;
    std::int64_t weight_bytes = 0;
    std::int64_t out_activation_bytes = 0;

    std::int64_t fp(const std::string& type) const { return at(fp_time, type, "fp"); }
    std::int64_t bp(const std::string& type) const { return at(bp_time, type, "bp"); }
    std::int64_t fpbp(const std::string& type) const { return fp(type) + bp(type); }

private:
    std::int64_t at(const std::map<std::string, std::int64_t>& m,
                    const std::string& type, const char* which) const {
        auto it = m.find(type);
        if (it == m.end())
            throw SchemaError("layer '" + name + "' has no " + which +
                              " time for accelerator type '" + type + "'");
        return it->second;
    }
};

struct NetworkProfile {
    std::string name;
    std::vector<LayerProfile> layers;  // forward-propagation order

    std::int64_t L() const { return (std::int64_t)layers.size(); }
};

struct AcceleratorSpec {
    std::string id;
    std::string accel_type;
    std::int64_t mem_capacity_bytes = 0;
    // Smallest micro-batch size that fully utilizes the device, per
    // schedule kind. Missing kinds default to 1.
    std::map<ScheduleKind, std::int64_t> min_micro_batch;

    std::int64_t min_micro(ScheduleKind k) const {
        auto it = min_micro_batch.find(k);
        return it == min_micro_batch.end() ? 1 : it->second;
    }
};

struct ClusterSpec {
    std::vector<AcceleratorSpec> accelerators;  // chain order
    std::vector<std::int64_t> link_bandwidth;   // bytes/us, link k joins k and k+1
    ExecutionMode execution_mode = ExecutionMode::Synchronous;

    std::int64_t N() const { return (std::int64_t)accelerators.size(); }
};

struct TrainingConfig {
    std::int64_t mini_batch_size = 1;
    std::optional<std::vector<std::int64_t>> micro_batch_candidates;
};

// ---------------------------------------------------------------------------
// Validation

inline void validate_network(const NetworkProfile& net) {
    if (net.layers.empty()) throw SchemaError("network '" + net.name + "': L >= 1 required");
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        const LayerProfile& l = net.layers[i];
        auto where = [&] { return "layer " + std::to_string(i) + " ('" + l.name + "')"; };
        if (l.fp_time.empty() || l.bp_time.empty())
            throw SchemaError(where() + ": fp/bp time maps must be non-empty");
        for (auto& [t, v] : l.fp_time)
            if (v < 1) throw SchemaError(where() + ": fp time for '" + t + "' must be >= 1");
        for (auto& [t, v] : l.bp_time)
            if (v < 1) throw SchemaError(where() + ": bp time for '" + t + "' must be >= 1");
        if (l.weight_bytes < 0) throw SchemaError(where() + ": weight_bytes must be >= 0");
        if (l.out_activation_bytes < 0)
            throw SchemaError(where() + ": out_activation_bytes must be >= 0");
    }
}

inline void validate_cluster(const ClusterSpec& c) {
    if (c.accelerators.empty()) throw SchemaError("cluster: N >= 1 required");
    if ((std::int64_t)c.link_bandwidth.size() != c.N() - 1)
        throw SchemaError("cluster: expected N-1 links (" + std::to_string(c.N() - 1) +
                          "), got " + std::to_string(c.link_bandwidth.size()));
    for (std::size_t k = 0; k < c.link_bandwidth.size(); ++k)
        if (c.link_bandwidth[k] <= 0)
            throw SchemaError("link " + std::to_string(k) + ": bandwidth must be > 0");
    for (std::size_t i = 0; i < c.accelerators.size(); ++i) {
        const AcceleratorSpec& a = c.accelerators[i];
        if (a.mem_capacity_bytes <= 0)
            throw SchemaError("accelerator " + std::to_string(i) + " ('" + a.id +
                              "'): mem_capacity_bytes must be > 0");
        for (auto& [k, v] : a.min_micro_batch)
            if (v < 1)
                throw SchemaError("accelerator '" + a.id + "': min_micro_batch[" +
                                  to_string(k) + "] must be >= 1");
    }
}

// Every accelerator type used by the cluster must be profiled in every layer.
inline void validate_pair(const NetworkProfile& net, const ClusterSpec& cluster) {
    validate_network(net);
    validate_cluster(cluster);
    for (const AcceleratorSpec& a : cluster.accelerators)
        for (std::size_t i = 0; i < net.layers.size(); ++i) {
            const LayerProfile& l = net.layers[i];
            if (!l.fp_time.count(a.accel_type) || !l.bp_time.count(a.accel_type))
                throw SchemaError("layer " + std::to_string(i) + " ('" + l.name +
                                  "') lacks times for accelerator type '" +
                                  a.accel_type + "'");
        }
}

// ---------------------------------------------------------------------------
// JSON ingestion. Unknown keys are rejected unless lenient.

namespace detail {

inline void check_keys(const json& j, std::initializer_list<const char*> allowed,
                       bool lenient, const std::string& where) {
    if (lenient) return;
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : allowed)
            if (it.key() == k) { ok = true; break; }
        if (!ok) throw SchemaError(where + ": unknown key '" + it.key() + "'");
    }
}

inline std::int64_t get_int(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key)) throw SchemaError(where + ": missing '" + key + "'");
    const json& v = j.at(key);
    if (!v.is_number_integer())
        throw SchemaError(where + ": '" + key + "' must be an integer");
    return v.get<std::int64_t>();
}

inline std::string get_str(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key)) throw SchemaError(where + ": missing '" + key + "'");
    const json& v = j.at(key);
    if (!v.is_string()) throw SchemaError(where + ": '" + key + "' must be a string");
    return v.get<std::string>();
}

inline std::map<std::string, std::int64_t> get_time_map(const json& j, const char* key,
                                                        const std::string& where) {
    if (!j.contains(key)) throw SchemaError(where + ": missing '" + key + "'");
    const json& v = j.at(key);
    if (!v.is_object()) throw SchemaError(where + ": '" + key + "' must be an object");
    std::map<std::string, std::int64_t> m;
    for (auto it = v.begin(); it != v.end(); ++it) {
        if (!it.value().is_number_integer())
            throw SchemaError(where + ": '" + key + "." + it.key() + "' must be an integer");
        m[it.key()] = it.value().get<std::int64_t>();
    }
    return m;
}

inline json parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    if (!j.is_object()) throw ParseError(path + ": top-level value must be an object");
    return j;
}

}  // namespace detail

inline NetworkProfile network_from_json(const json& j, bool lenient = false) {
    using namespace detail;
    check_keys(j, {"name", "layers"}, lenient, "network");
    NetworkProfile net;
    net.name = get_str(j, "name", "network");
    if (!j.contains("layers") || !j.at("layers").is_array())
        throw SchemaError("network: missing 'layers' array");
    std::size_t idx = 0;
    for (const json& lj : j.at("layers")) {
        std::string where = "layer " + std::to_string(idx);
        check_keys(lj, {"name", "fp_us", "bp_us", "weight_bytes", "out_activation_bytes"},
                   lenient, where);
        LayerProfile l;
        l.name = get_str(lj, "name", where);
        l.fp_time = get_time_map(lj, "fp_us", where);
        l.bp_time = get_time_map(lj, "bp_us", where);
        l.weight_bytes = get_int(lj, "weight_bytes", where);
        l.out_activation_bytes = get_int(lj, "out_activation_bytes", where);
        net.layers.push_back(std::move(l));
        ++idx;
    }
    validate_network(net);
    return net;
}

inline ClusterSpec cluster_from_json(const json& j, bool lenient = false) {
    using namespace detail;
    check_keys(j, {"execution_mode", "accelerators", "link_bandwidth_bytes_per_us"},
               lenient, "cluster");
    ClusterSpec c;
    std::string mode = get_str(j, "execution_mode", "cluster");
    if (mode == "sync") c.execution_mode = ExecutionMode::Synchronous;
    else if (mode == "async") c.execution_mode = ExecutionMode::Asynchronous;
    else throw SchemaError("cluster: execution_mode must be 'sync' or 'async'");
    if (!j.contains("accelerators") || !j.at("accelerators").is_array())
        throw SchemaError("cluster: missing 'accelerators' array");
    std::size_t idx = 0;
    for (const json& aj : j.at("accelerators")) {
        std::string where = "accelerator " + std::to_string(idx);
        check_keys(aj, {"id", "type", "mem_capacity_bytes", "min_micro_batch"}, lenient,
                   where);
        AcceleratorSpec a;
        a.id = get_str(aj, "id", where);
        a.accel_type = get_str(aj, "type", where);
        a.mem_capacity_bytes = get_int(aj, "mem_capacity_bytes", where);
        if (aj.contains("min_micro_batch")) {
            for (auto& [k, v] : get_time_map(aj, "min_micro_batch", where)) {
                auto kind = parse_schedule_kind(k);
                if (!kind)
                    throw SchemaError(where + ": unknown schedule kind '" + k +
                                      "' in min_micro_batch");
                a.min_micro_batch[*kind] = v;
            }
        }
        c.accelerators.push_back(std::move(a));
        ++idx;
    }
    if (!j.contains("link_bandwidth_bytes_per_us") ||
        !j.at("link_bandwidth_bytes_per_us").is_array())
        throw SchemaError("cluster: missing 'link_bandwidth_bytes_per_us' array");
    for (const json& bj : j.at("link_bandwidth_bytes_per_us")) {
        if (!bj.is_number_integer())
            throw SchemaError("cluster: link bandwidths must be integers (bytes per us)");
        c.link_bandwidth.push_back(bj.get<std::int64_t>());
    }
    validate_cluster(c);
    return c;
}

inline NetworkProfile load_network(const std::string& path, bool lenient = false) {
    return network_from_json(detail::parse_file(path), lenient);
}

inline ClusterSpec load_cluster(const std::string& path, bool lenient = false) {
    return cluster_from_json(detail::parse_file(path), lenient);
}

// ---------------------------------------------------------------------------
// Canonical serialization (field order fixed, 2-space indent, trailing newline)

inline json network_to_json(const NetworkProfile& net) {
    json layers = json::array();
    for (const LayerProfile& l : net.layers) {
        json fp = json::object(), bp = json::object();
        for (auto& [t, v] : l.fp_time) fp[t] = v;
        for (auto& [t, v] : l.bp_time) bp[t] = v;
        layers.push_back({{"name", l.name},
                          {"fp_us", fp},
                          {"bp_us", bp},
                          {"weight_bytes", l.weight_bytes},
                          {"out_activation_bytes", l.out_activation_bytes}});
    }
    return {{"name", net.name}, {"layers", layers}};
}

inline json cluster_to_json(const ClusterSpec& c) {
    json accels = json::array();
    for (const AcceleratorSpec& a : c.accelerators) {
        json mm = json::object();
        for (auto& [k, v] : a.min_micro_batch) mm[to_string(k)] = v;
        json aj = {{"id", a.id},
                   {"type", a.accel_type},
                   {"mem_capacity_bytes", a.mem_capacity_bytes}};
        if (!mm.empty()) aj["min_micro_batch"] = mm;
        accels.push_back(aj);
    }
    return {{"execution_mode", to_string(c.execution_mode)},
            {"accelerators", accels},
            {"link_bandwidth_bytes_per_us", c.link_bandwidth}};
}

inline std::string dump_canonical(const json& j) { return j.dump(2) + "\n"; }

inline void save_file(const std::string& path, const json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path + "'");
    out << dump_canonical(j);
}

// ---------------------------------------------------------------------------
// Synthetic fixtures

inline NetworkProfile synth_uniform_network(std::int64_t L, std::int64_t fp,
                                            std::int64_t bp, std::int64_t w,
                                            std::int64_t a,
                                            const std::vector<std::string>& accel_types,
                                            const std::string& name = "uniform") {
    if (L < 1) throw SchemaError("synth_uniform_network: L >= 1 required");
    if (fp < 1 || bp < 1) throw SchemaError("synth_uniform_network: fp, bp >= 1 required");
    NetworkProfile net;
    net.name = name;
    for (std::int64_t i = 0; i < L; ++i) {
        LayerProfile l;
        l.name = "layer" + std::to_string(i);
        for (const std::string& t : accel_types) {
            l.fp_time[t] = fp;
            l.bp_time[t] = bp;
        }
        l.weight_bytes = w;
        l.out_activation_bytes = a;
        net.layers.push_back(std::move(l));
    }
    return net;
}

}  // namespace bapipe
