#pragma once

#include <string>

#include "rsddp/model.hpp"

namespace rsddp {

/// Knobs of the grid-storage benchmark. Network data (line endpoints,
/// capacities, demand and wind profiles, generator costs) is drawn from the
/// generator's RNG within the stated ranges. Power quantities are MW,
/// energies MWh; stage decisions are energies per period of dt_minutes.
struct StorageNetworkParams {
    int T = 24;  // decision stages after the deterministic first period
    double dt_minutes = 60.0;

    int n_nodes = 6;
    int n_lines = 8;
    double line_capacity_min = 30.0;
    double line_capacity_max = 90.0;
    double line_cost = 0.1;  // per MWh moved

    int n_storage = 10;
    double storage_capacity_min = 20.0;
    double storage_capacity_max = 80.0;
    double charge_efficiency = 0.9;
    double discharge_efficiency = 0.9;
    double power_ratio = 0.25;  // MW of charge/discharge limit per MWh of capacity
    double storage_cost = 1.0;  // per MWh charged or discharged
    double initial_fill = 0.5;

    int n_generators = 4;
    double generator_cost_min = 20.0;
    double generator_cost_max = 60.0;
    double ramp_fraction = 0.15;  // ramp limit per period as a fraction of capacity
    double capacity_margin = 1.3;  // total generation capacity over peak demand

    double demand_min = 40.0;  // mean MW per node
    double demand_max = 120.0;
    double demand_swing = 0.3;  // relative daily amplitude

    int n_wind = 3;
    double wind_capacity = 100.0;  // MW per wind farm
    int n_regimes = 3;
    double p_stay = 0.91;
    bool markov = true;  // false: regimes drawn uniformly and independently
    int initial_regime = 0;

    double shed_multiplier = 1e4;  // shedding penalty over the largest generator cost

    /// Full-scale settings: ten regimes, 91% persistence, 288 five-minute periods.
    static StorageNetworkParams full_scale();

    /// Throws InvalidArgument naming the first violated constraint.
    void validate() const;
};

std::string params_to_string(const StorageNetworkParams& params);
StorageNetworkParams params_from_string(const std::string& text);
StorageNetworkParams load_params(const std::string& path);
void save_params(const StorageNetworkParams& params, const std::string& path);

/// Column layout of one stage of a generated instance.
struct StorageLayout {
    int n_storage = 0;
    int n_generators = 0;
    int n_lines = 0;
    int n_nodes = 0;

    int energy(int i) const { return i; }
    int charge(int i) const { return n_storage + i; }
    int discharge(int i) const { return 2 * n_storage + i; }
    int generation(int g) const { return 6 * n_storage + g; }
    int flow_forward(int l) const { return 6 * n_storage + 3 * n_generators + l; }
    int flow_backward(int l) const { return 6 * n_storage + 3 * n_generators + n_lines + l; }
    int shed(int n) const { return 6 * n_storage + 3 * n_generators + 4 * n_lines + n; }
    int dump(int n) const { return 6 * n_storage + 3 * n_generators + 4 * n_lines + n_nodes + n; }
    int columns() const { return 6 * n_storage + 3 * n_generators + 4 * n_lines + 2 * n_nodes; }
};

StorageLayout storage_layout(const StorageNetworkParams& params);

/// Builds the regime-switching storage dispatch instance. Storage balance
/// rows come first, so R_t^x is the stored energy of every device.
MultistageProblem generate_storage_instance(const StorageNetworkParams& params, Rng& rng);

}  // namespace rsddp
