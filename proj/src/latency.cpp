#include "fstl/latency.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "fstl/csv.hpp"

namespace fstl {

double params_per_second_from_bits(double bits_per_second) { return bits_per_second / 32.0; }

namespace {

struct Symbol {
    const char* name;
    double value;
};

void require_positive(std::initializer_list<Symbol> symbols) {
    std::string bad;
    for (const auto& s : symbols)
        if (!(s.value > 0.0) || !std::isfinite(s.value)) bad += (bad.empty() ? "" : ", ") + std::string(s.name);
    if (!bad.empty()) throw std::invalid_argument("latency symbols must be strictly positive: " + bad);
}

void require_fraction(double r) {
    if (!(r > 0.0 && r < 1.0)) throw std::invalid_argument("latency symbol r must lie in (0, 1)");
}

LatencyBreakdown finish(double train_agg, double per_vu, double total, double comm_time) {
    return {train_agg, per_vu, total, comm_time, train_agg + comm_time};
}

LatencyBreakdown fl_row(const LatencyParams& q) {
    return finish(q.T + q.T_fedavg, 2.0 * q.p, 2.0 * q.N * q.p, 2.0 * q.p / q.R);
}

LatencyBreakdown sl_row(const LatencyParams& q) {
    const double per_vu = 2.0 * q.d * q.h / q.N + 2.0 * q.p * q.r;
    const double total = 2.0 * q.d * q.h + 2.0 * q.N * q.p * q.r;
    const double comm = 2.0 * q.d * q.h / q.R + 2.0 * q.N * q.p * q.r / q.R;
    return finish(q.T, per_vu, total, comm);
}

// FSL and FSTL share communication volumes; only the compute term differs.
LatencyBreakdown parallel_split_row(double compute, const LatencyParams& q) {
    const double per_vu = 2.0 * q.d * q.h / q.N + 2.0 * q.p * q.r;
    const double total = 2.0 * q.d * q.h + 2.0 * q.N * q.p * q.r;
    const double comm = 2.0 * q.d * q.h / (q.N * q.R) + 2.0 * q.p * q.r / q.R;
    return finish(compute + q.T_merge, per_vu, total, comm);
}

void require_split_symbols(const LatencyParams& q) {
    require_positive({{"p", q.p}, {"d", q.d}, {"h", q.h}, {"R", q.R}, {"N", q.N}});
    require_fraction(q.r);
}

}  // namespace

void validate(const LatencyParams& q) {
    require_positive({{"T", q.T},
                      {"T_prime", q.T_prime},
                      {"T_fedavg", q.T_fedavg},
                      {"T_merge", q.T_merge},
                      {"p", q.p},
                      {"d", q.d},
                      {"h", q.h},
                      {"r", q.r},
                      {"R", q.R},
                      {"N", q.N}});
    require_fraction(q.r);
}

std::vector<std::string> precondition_warnings(const LatencyParams& q) {
    std::vector<std::string> out;
    if (q.T_prime > q.T) out.push_back("T_prime > T: pre-trained rounds are slower than training from scratch");
    if (q.T_merge > q.T_fedavg) out.push_back("T_merge > T_fedavg: submodel aggregation slower than full FedAvg");
    return out;
}

LatencyBreakdown fl_latency(const LatencyParams& q) {
    require_positive({{"T", q.T}, {"T_fedavg", q.T_fedavg}, {"p", q.p}, {"R", q.R}, {"N", q.N}});
    return fl_row(q);
}

LatencyBreakdown sl_latency(const LatencyParams& q) {
    require_positive({{"T", q.T}});
    require_split_symbols(q);
    return sl_row(q);
}

LatencyBreakdown fsl_latency(const LatencyParams& q) {
    require_positive({{"T", q.T}, {"T_merge", q.T_merge}});
    require_split_symbols(q);
    return parallel_split_row(q.T, q);
}

LatencyBreakdown fstl_latency(const LatencyParams& q) {
    require_positive({{"T_prime", q.T_prime}, {"T_merge", q.T_merge}});
    require_split_symbols(q);
    return parallel_split_row(q.T_prime, q);
}

LatencyBreakdown latency_for(ProtocolKind kind, const LatencyParams& q) {
    switch (kind) {
        case ProtocolKind::FL: return fl_latency(q);
        case ProtocolKind::SL: return sl_latency(q);
        case ProtocolKind::FSL: return fsl_latency(q);
        case ProtocolKind::FSTL: return fstl_latency(q);
    }
    throw std::invalid_argument("unknown protocol");
}

LatencyBreakdown table_row(ProtocolKind kind, const LatencyParams& q) {
    switch (kind) {
        case ProtocolKind::FL: return fl_row(q);
        case ProtocolKind::SL: return sl_row(q);
        case ProtocolKind::FSL: return parallel_split_row(q.T, q);
        case ProtocolKind::FSTL: return parallel_split_row(q.T_prime, q);
    }
    throw std::invalid_argument("unknown protocol");
}

OrderingReport ordering_report(const LatencyParams& q) {
    validate(q);
    OrderingReport rep;
    for (auto k : kAllProtocols) rep.ascending.push_back({k, latency_for(k, q).total_latency});
    auto total = [&](ProtocolKind k) {
        for (const auto& m : rep.ascending)
            if (m.method == k) return m.total;
        return 0.0;
    };
    rep.fstl_below_fsl = total(ProtocolKind::FSTL) < total(ProtocolKind::FSL);
    rep.fsl_below_fl = total(ProtocolKind::FSL) < total(ProtocolKind::FL);
    rep.fl_below_sl = total(ProtocolKind::FL) < total(ProtocolKind::SL);
    if (!rep.fstl_below_fsl) rep.violations.emplace_back("FSTL<FSL violated");
    if (!rep.fsl_below_fl) rep.violations.emplace_back("FSL<FL violated");
    if (!rep.fl_below_sl) rep.violations.emplace_back("FL<SL violated");
    rep.paper_ordering_holds = rep.violations.empty();
    std::stable_sort(rep.ascending.begin(), rep.ascending.end(),
                     [](const MethodTotal& a, const MethodTotal& b) { return a.total < b.total; });
    return rep;
}

LatencyParams measure_params(const LatencyMeasurements& m) {
    std::string missing;
    auto note = [&](bool present, const char* name) {
        if (!present) missing += (missing.empty() ? "" : ", ") + std::string(name);
    };
    note(m.full_params.has_value(), "p");
    note(m.client_params.has_value(), "r (client parameter count)");
    note(m.smashed_width.has_value(), "h");
    note(m.shard_sizes.has_value(), "d/N (shard sizes)");
    note(m.T.has_value(), "T");
    note(m.T_prime.has_value(), "T_prime");
    note(m.T_fedavg.has_value(), "T_fedavg");
    note(m.T_merge.has_value(), "T_merge");
    note(m.R.has_value(), "R");
    if (!missing.empty()) throw std::invalid_argument("missing latency measurements: " + missing);

    LatencyParams q;
    q.p = *m.full_params;
    q.r = *m.client_params / *m.full_params;
    q.h = *m.smashed_width;
    q.d = 0.0;
    for (auto s : *m.shard_sizes) q.d += static_cast<double>(s);
    q.N = static_cast<double>(m.shard_sizes->size());
    q.T = *m.T;
    q.T_prime = *m.T_prime;
    q.T_fedavg = *m.T_fedavg;
    q.T_merge = *m.T_merge;
    q.R = *m.R;
    validate(q);
    return q;
}

std::vector<CurveRow> latency_vs_n_curve(const LatencyParams& base, std::span<const std::size_t> n_values) {
    if (n_values.empty()) throw std::invalid_argument("latency curve needs at least one N");
    for (std::size_t i = 0; i < n_values.size(); ++i) {
        if (n_values[i] == 0) throw std::invalid_argument("N must be positive");
        if (i && n_values[i] <= n_values[i - 1]) throw std::invalid_argument("N values must be strictly ascending");
    }
    std::vector<CurveRow> rows;
    for (auto n : n_values) {
        LatencyParams q = base;
        q.N = static_cast<double>(n);
        for (auto k : kAllProtocols) rows.push_back({n, k, latency_for(k, q)});
    }
    return rows;
}

std::string latency_curve_csv(std::span<const CurveRow> rows) {
    std::string out = std::string(kLatencyCsvHeader) + "\n";
    for (const auto& r : rows) {
        out += std::to_string(r.n) + "," + protocol_name(r.method) + "," + format_number(r.breakdown.train_agg_time) +
               "," + format_number(r.breakdown.total_comm_time) + "," + format_number(r.breakdown.total_latency) + "," +
               format_number(r.breakdown.total_comms) + "\n";
    }
    return out;
}

}  // namespace fstl
