#include "rsddp/storage.hpp"

#include <cmath>
#include <numbers>

#include "json_util.hpp"
#include "rsddp/errors.hpp"

namespace rsddp {

namespace {

using detail::json;

constexpr const char* kFormat = "rsddp-storage-params";
constexpr long long kVersion = 1;

double draw(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

int draw_index(Rng& rng, int n) {
    return std::min(n - 1, static_cast<int>(uniform01(rng) * n));
}

#define RSDDP_PARAM_FIELDS(X)                                                                          \
    X(T) X(dt_minutes) X(n_nodes) X(n_lines) X(line_capacity_min) X(line_capacity_max) X(line_cost)    \
    X(n_storage) X(storage_capacity_min) X(storage_capacity_max) X(charge_efficiency)                  \
    X(discharge_efficiency) X(power_ratio) X(storage_cost) X(initial_fill) X(n_generators)             \
    X(generator_cost_min) X(generator_cost_max) X(ramp_fraction) X(capacity_margin) X(demand_min)      \
    X(demand_max) X(demand_swing) X(n_wind) X(wind_capacity) X(n_regimes) X(p_stay) X(markov)          \
    X(initial_regime) X(shed_multiplier)

template <class V>
void read_into(const json& j, V& out) {
    if constexpr (std::is_same_v<V, bool>) {
        if (!j.is_boolean()) throw MalformedFile("expected a boolean, got " + j.dump());
        out = j.get<bool>();
    } else if constexpr (std::is_integral_v<V>) {
        out = static_cast<V>(detail::integer(j));
    } else {
        out = detail::number(j);
    }
}

}  // namespace

StorageNetworkParams StorageNetworkParams::full_scale() {
    StorageNetworkParams p;
    p.n_regimes = 10;
    p.p_stay = 0.91;
    p.T = 288;
    p.dt_minutes = 5.0;
    p.n_storage = 50;
    return p;
}

void StorageNetworkParams::validate() const {
    auto fail = [](const std::string& msg) { throw InvalidArgument("storage params: " + msg); };
    if (T < 1) fail("T must be at least 1");
    if (!(dt_minutes > 0.0)) fail("dt_minutes must be positive");
    if (n_nodes < 1) fail("n_nodes must be at least 1");
    if (n_lines < 0) fail("n_lines must be non-negative");
    if (n_lines > 0 && n_nodes < 2) fail("lines need at least two nodes");
    if (n_storage < 1) fail("n_storage must be at least 1");
    if (n_generators < 1) fail("n_generators must be at least 1");
    if (n_wind < 0 || n_wind > n_nodes) fail("n_wind must lie in 0..n_nodes");
    if (n_regimes < 1) fail("n_regimes must be at least 1");
    if (initial_regime < 0 || initial_regime >= n_regimes) fail("initial_regime out of range");
    if (!(charge_efficiency > 0.0 && charge_efficiency <= 1.0)) fail("charge_efficiency must lie in (0, 1]");
    if (!(discharge_efficiency > 0.0 && discharge_efficiency <= 1.0)) fail("discharge_efficiency must lie in (0, 1]");
    if (n_regimes > 1 && !(p_stay > 0.0 && p_stay < 1.0)) fail("p_stay must lie in (0, 1)");
    if (!(initial_fill >= 0.0 && initial_fill <= 1.0)) fail("initial_fill must lie in [0, 1]");
    auto range = [&](double lo, double hi, const char* name) {
        if (!(lo >= 0.0) || !(hi >= lo) || !std::isfinite(hi)) fail(std::string(name) + " range is invalid");
    };
    range(line_capacity_min, line_capacity_max, "line capacity");
    range(storage_capacity_min, storage_capacity_max, "storage capacity");
    range(generator_cost_min, generator_cost_max, "generator cost");
    range(demand_min, demand_max, "demand");
    if (!(power_ratio >= 0.0) || !(storage_cost >= 0.0) || !(line_cost >= 0.0) || !(wind_capacity >= 0.0)) {
        fail("capacities and costs must be non-negative");
    }
    if (!(ramp_fraction >= 0.0 && ramp_fraction <= 1.0)) fail("ramp_fraction must lie in [0, 1]");
    if (!(capacity_margin >= 1.0)) fail("capacity_margin must be at least 1 (generation must cover peak demand)");
    if (!(demand_swing >= 0.0 && demand_swing < 1.0)) fail("demand_swing must lie in [0, 1)");
    if (!(shed_multiplier > 1.0) || !std::isfinite(shed_multiplier)) fail("shed_multiplier must exceed 1");
}

std::string params_to_string(const StorageNetworkParams& params) {
    json doc{{"format", kFormat}, {"version", kVersion}};
#define X(name) doc[#name] = params.name;
    RSDDP_PARAM_FIELDS(X)
#undef X
    return detail::canonical_dump(doc);
}

StorageNetworkParams params_from_string(const std::string& text) {
    const json doc = detail::parse(text);
    detail::check_header(doc, kFormat, kVersion);
    StorageNetworkParams p;
    for (auto it = doc.begin(); it != doc.end(); ++it) {
        const std::string& key = it.key();
        if (key == "format" || key == "version") continue;
        bool known = false;
#define X(name)                          \
    if (key == #name) {                  \
        read_into(it.value(), p.name);   \
        known = true;                    \
    }
        RSDDP_PARAM_FIELDS(X)
#undef X
        if (!known) throw MalformedFile("unknown storage parameter '" + key + "'");
    }
    p.validate();
    return p;
}

StorageNetworkParams load_params(const std::string& path) { return params_from_string(detail::read_file(path)); }

void save_params(const StorageNetworkParams& params, const std::string& path) {
    detail::write_file(path, params_to_string(params));
}

StorageLayout storage_layout(const StorageNetworkParams& params) {
    StorageLayout L;
    L.n_storage = params.n_storage;
    L.n_generators = params.n_generators;
    L.n_lines = params.n_lines;
    L.n_nodes = params.n_nodes;
    return L;
}

MultistageProblem generate_storage_instance(const StorageNetworkParams& params, Rng& rng) {
    params.validate();
    const StorageLayout L = storage_layout(params);
    const int S = params.n_storage;
    const int G = params.n_generators;
    const int NL = params.n_lines;
    const int N = params.n_nodes;
    const int periods = params.T + 1;
    const double h = params.dt_minutes / 60.0;

    // Network: a ring (or path) first, then random chords.
    std::vector<std::pair<int, int>> lines;
    for (int l = 0; l < NL; ++l) {
        if (l < N - 1 || (l == N - 1 && N > 2)) {
            lines.emplace_back(l, (l + 1) % N);
        } else {
            int a = draw_index(rng, N);
            int b = draw_index(rng, N - 1);
            if (b >= a) ++b;
            lines.emplace_back(a, b);
        }
    }
    std::vector<double> line_cap(static_cast<std::size_t>(NL));
    for (auto& c : line_cap) c = draw(rng, params.line_capacity_min, params.line_capacity_max);

    std::vector<int> storage_node(static_cast<std::size_t>(S));
    std::vector<double> energy_cap(static_cast<std::size_t>(S));
    for (int i = 0; i < S; ++i) {
        storage_node[static_cast<std::size_t>(i)] = i < N ? i : draw_index(rng, N);
        energy_cap[static_cast<std::size_t>(i)] = draw(rng, params.storage_capacity_min, params.storage_capacity_max);
    }

    // Demand in MW per node and period.
    std::vector<double> demand_mean(static_cast<std::size_t>(N));
    for (auto& d : demand_mean) d = draw(rng, params.demand_min, params.demand_max);
    auto demand = [&](int n, int t) {
        const double hour = 24.0 * t / periods;
        const double shape = 1.0 + params.demand_swing * std::sin(2.0 * std::numbers::pi * (hour - 9.0) / 24.0);
        return demand_mean[static_cast<std::size_t>(n)] * shape;
    };
    double peak = 0.0;
    for (int t = 0; t < periods; ++t) {
        double total = 0.0;
        for (int n = 0; n < N; ++n) total += demand(n, t);
        peak = std::max(peak, total);
    }

    std::vector<int> gen_node(static_cast<std::size_t>(G));
    std::vector<double> gen_cost(static_cast<std::size_t>(G));
    std::vector<double> gen_cap(static_cast<std::size_t>(G));
    double weight_sum = 0.0;
    for (int g = 0; g < G; ++g) {
        gen_node[static_cast<std::size_t>(g)] = g < N ? (N - 1 - g) : draw_index(rng, N);
        gen_cost[static_cast<std::size_t>(g)] = draw(rng, params.generator_cost_min, params.generator_cost_max);
        gen_cap[static_cast<std::size_t>(g)] = draw(rng, 0.5, 1.5);
        weight_sum += gen_cap[static_cast<std::size_t>(g)];
    }
    for (auto& c : gen_cap) c *= params.capacity_margin * peak / weight_sum;
    const double max_gen_cost = *std::max_element(gen_cost.begin(), gen_cost.end());
    const double shed_cost = params.shed_multiplier * max_gen_cost;

    // Wind: per farm and regime a mean capacity factor, modulated over the day.
    std::vector<int> wind_node(static_cast<std::size_t>(params.n_wind));
    for (int w = 0; w < params.n_wind; ++w) wind_node[static_cast<std::size_t>(w)] = w;
    Matrix regime_level(std::max(params.n_wind, 1), params.n_regimes);
    Vector phase(std::max(params.n_wind, 1));
    for (int w = 0; w < params.n_wind; ++w) {
        phase[w] = draw(rng, 0.0, 24.0);
        for (int r = 0; r < params.n_regimes; ++r) regime_level(w, r) = draw(rng, 0.05, 0.95);
    }
    auto wind = [&](int w, int t, int regime) {
        const double hour = 24.0 * t / periods;
        const double shape = 1.0 + 0.25 * std::sin(2.0 * std::numbers::pi * (hour - phase[w]) / 24.0);
        return params.wind_capacity * std::clamp(regime_level(w, regime) * shape, 0.0, 1.0);
    };
    auto expected_wind = [&](int t) {
        double total = 0.0;
        for (int w = 0; w < params.n_wind; ++w)
            for (int r = 0; r < params.n_regimes; ++r) total += wind(w, t, r) / params.n_regimes;
        return total;
    };

    const int n_cols = L.columns();
    const int n_rows = S + N + 3 * S + 2 * G + 2 * NL;
    const int row_node = S;
    const int row_caps = S + N;
    const int row_gen = S + N + 3 * S;
    const int row_line = row_gen + 2 * G;

    Matrix A = Matrix::Zero(n_rows, n_cols);
    Vector c = Vector::Zero(n_cols);
    for (int i = 0; i < S; ++i) {
        const auto is = static_cast<std::size_t>(i);
        A(i, L.energy(i)) = -1.0;
        A(i, L.charge(i)) = params.charge_efficiency;
        A(i, L.discharge(i)) = -1.0 / params.discharge_efficiency;
        const int node = row_node + storage_node[is];
        A(node, L.discharge(i)) = 1.0;
        A(node, L.charge(i)) = -1.0;
        for (int k = 0; k < 3; ++k) {
            A(row_caps + 3 * i + k, i + k * S) = 1.0;
            A(row_caps + 3 * i + k, 3 * S + i + k * S) = 1.0;
        }
        c[L.charge(i)] = params.storage_cost;
        c[L.discharge(i)] = params.storage_cost;
    }
    for (int g = 0; g < G; ++g) {
        const auto gs = static_cast<std::size_t>(g);
        A(row_node + gen_node[gs], L.generation(g)) = 1.0;
        A(row_gen + 2 * g, L.generation(g)) = 1.0;
        A(row_gen + 2 * g, L.generation(g) + G) = 1.0;
        A(row_gen + 2 * g + 1, L.generation(g)) = 1.0;
        A(row_gen + 2 * g + 1, L.generation(g) + 2 * G) = -1.0;
        c[L.generation(g)] = gen_cost[gs];
    }
    for (int l = 0; l < NL; ++l) {
        const auto [a, b] = lines[static_cast<std::size_t>(l)];
        A(row_node + a, L.flow_forward(l)) = -1.0;
        A(row_node + b, L.flow_forward(l)) = 1.0;
        A(row_node + a, L.flow_backward(l)) = 1.0;
        A(row_node + b, L.flow_backward(l)) = -1.0;
        A(row_line + 2 * l, L.flow_forward(l)) = 1.0;
        A(row_line + 2 * l, L.flow_forward(l) + 2 * NL) = 1.0;
        A(row_line + 2 * l + 1, L.flow_backward(l)) = 1.0;
        A(row_line + 2 * l + 1, L.flow_backward(l) + 2 * NL) = 1.0;
        c[L.flow_forward(l)] = params.line_cost;
        c[L.flow_backward(l)] = params.line_cost;
    }
    for (int n = 0; n < N; ++n) {
        A(row_node + n, L.shed(n)) = 1.0;
        A(row_node + n, L.dump(n)) = -1.0;
        c[L.shed(n)] = shed_cost;
    }
    Matrix B = Matrix::Zero(S, n_cols);
    for (int i = 0; i < S; ++i) B(i, L.energy(i)) = 1.0;

    auto rhs = [&](int t, int regime) {
        Vector b = Vector::Zero(n_rows);
        for (int n = 0; n < N; ++n) b[row_node + n] = demand(n, t) * h;
        for (int w = 0; w < params.n_wind; ++w) b[row_node + wind_node[static_cast<std::size_t>(w)]] -= wind(w, t, regime) * h;
        for (int i = 0; i < S; ++i) {
            const double E = energy_cap[static_cast<std::size_t>(i)];
            b[row_caps + 3 * i] = E;
            b[row_caps + 3 * i + 1] = params.power_ratio * E * h;
            b[row_caps + 3 * i + 2] = params.power_ratio * E * h;
        }
        double net = -expected_wind(t);
        for (int n = 0; n < N; ++n) net += demand(n, t);
        double cap_total = 0.0;
        for (double cg : gen_cap) cap_total += cg;
        const double load = std::clamp(net / cap_total, 0.0, 1.0);
        for (int g = 0; g < G; ++g) {
            const double cap = gen_cap[static_cast<std::size_t>(g)];
            const double base = load * cap;
            const double ramp = params.ramp_fraction * cap;
            b[row_gen + 2 * g] = std::min(cap, base + ramp) * h;
            b[row_gen + 2 * g + 1] = std::max(0.0, base - ramp) * h;
        }
        for (int l = 0; l < NL; ++l) {
            b[row_line + 2 * l] = line_cap[static_cast<std::size_t>(l)] * h;
            b[row_line + 2 * l + 1] = line_cap[static_cast<std::size_t>(l)] * h;
        }
        return b;
    };

    MultistageProblem problem;
    problem.T = params.T;
    problem.stage0.A = A;
    problem.stage0.B = B;
    problem.stage0.c = c;
    problem.stage0.b = rhs(0, params.initial_regime);
    for (int i = 0; i < S; ++i) problem.stage0.b[i] = -params.initial_fill * energy_cap[static_cast<std::size_t>(i)];

    const int R = params.n_regimes;
    for (int t = 1; t <= params.T; ++t) {
        std::vector<StageRealization> omega;
        for (int r = 0; r < R; ++r) {
            StageRealization w;
            w.A = A;
            w.B = t == params.T ? Matrix(0, n_cols) : B;
            w.c = c;
            w.b = rhs(t, r);
            omega.push_back(std::move(w));
        }
        problem.process.outcomes.push_back(std::move(omega));
    }

    auto uniform = [&] {
        Vector p = Vector::Constant(R, 1.0 / R);
        double rest = 0.0;
        for (int r = 0; r + 1 < R; ++r) rest += p[r];
        p[R - 1] = 1.0 - rest;
        return p;
    };
    if (params.markov) {
        Matrix P(R, R);
        if (R == 1) {
            P(0, 0) = 1.0;
        } else {
            const double off = (1.0 - params.p_stay) / (R - 1);
            for (int i = 0; i < R; ++i) {
                double rest = 0.0;
                for (int j = 0; j < R; ++j) {
                    P(i, j) = i == j ? params.p_stay : off;
                    if (j != R - 1) rest += P(i, j);
                }
                // Keep each row summing to 1 in floating point.
                if (i != R - 1) P(i, R - 1) = 1.0 - rest;
                else P(i, i) = 1.0 - rest;
            }
        }
        problem.process.kind = ProcessKind::Markov;
        problem.process.initial = P.row(params.initial_regime).transpose();
        for (int t = 1; t < params.T; ++t) problem.process.transitions.push_back(P);
    } else {
        for (int t = 1; t <= params.T; ++t) problem.process.probabilities.push_back(uniform());
    }
    require_valid(problem);
    return problem;
}

}  // namespace rsddp
