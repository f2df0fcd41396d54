#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "rsddp/engine.hpp"

namespace rsddp::cli {

struct BenchOptions {
    std::vector<int> sizes{5, 10, 20};
    int seeds = 5;
    std::uint64_t first_seed = 1;
    int T = 24;
    int iterations = 100;
    double rho0 = 1.0;
    double decay = 0.95;
    bool markov = true;
    double threshold = 0.99;
    int workers = 1;
};

struct BenchRun {
    int size = 0;
    std::uint64_t seed = 0;
    std::vector<double> lb_regularized;
    std::vector<double> lb_plain;
    double final_lb = 0.0;
    double threshold = 0.0;
    int iters_regularized = 0;
    int iters_plain = 0;
};

/// First iteration count after which the bound reaches the threshold;
/// trajectories that never reach it count as their full length.
int iterations_to_threshold(const std::vector<double>& lb, double threshold);

/// Regularized versus plain on generated storage instances, one pair of
/// runs per (size, seed). Paired trajectories go to `trajectories`, the
/// summary (iterations to threshold and medians) to `summary`.
std::vector<BenchRun> run_bench(const BenchOptions& options, std::ostream& trajectories, std::ostream& summary);

/// The {1,10,100} x {0.9,0.95,0.99} tuning grid on one small instance.
void run_tuning_grid(const BenchOptions& options, int size, std::ostream& out);

}  // namespace rsddp::cli
