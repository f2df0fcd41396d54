#include "rsddp_cli/bench.hpp"

#include <algorithm>
#include <ostream>

#include "rsddp/report.hpp"
#include "rsddp/storage.hpp"

namespace rsddp::cli {

namespace {

MultistageProblem bench_instance(const BenchOptions& o, int size, std::uint64_t seed) {
    StorageNetworkParams p;
    p.n_storage = size;
    p.T = o.T;
    p.markov = o.markov;
    Rng rng(seed);
    return generate_storage_instance(p, rng);
}

std::vector<double> lower_bounds(const MultistageProblem& problem, const BenchOptions& o, std::uint64_t seed,
                                 bool regularized, double rho0, double decay) {
    EngineConfig c;
    c.iterations = o.iterations;
    c.seed = seed;
    c.regularized = regularized;
    c.schedule = {rho0, decay};
    c.ub_every = 0;
    c.workers = o.workers;
    Engine e(problem, c);
    std::vector<double> lb;
    for (const auto& it : e.run().iterations) lb.push_back(it.lower_bound);
    return lb;
}

double median(std::vector<int> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    if (n == 0) return 0.0;
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

int iterations_to_threshold(const std::vector<double>& lb, double threshold) {
    for (std::size_t i = 0; i < lb.size(); ++i)
        if (lb[i] >= threshold) return static_cast<int>(i) + 1;
    return static_cast<int>(lb.size());
}

std::vector<BenchRun> run_bench(const BenchOptions& o, std::ostream& trajectories, std::ostream& summary) {
    std::vector<BenchRun> runs;
    trajectories << "size,seed,iter,lb_regularized,lb_plain\n";
    for (int size : o.sizes) {
        for (int s = 0; s < o.seeds; ++s) {
            BenchRun run;
            run.size = size;
            run.seed = o.first_seed + static_cast<std::uint64_t>(s);
            const auto problem = bench_instance(o, size, run.seed);
            run.lb_regularized = lower_bounds(problem, o, run.seed, true, o.rho0, o.decay);
            run.lb_plain = lower_bounds(problem, o, run.seed, false, o.rho0, o.decay);
            run.final_lb = std::max(run.lb_regularized.back(), run.lb_plain.back());
            run.threshold = run.final_lb - (1.0 - o.threshold) * std::abs(run.final_lb);
            run.iters_regularized = iterations_to_threshold(run.lb_regularized, run.threshold);
            run.iters_plain = iterations_to_threshold(run.lb_plain, run.threshold);
            for (std::size_t k = 0; k < run.lb_regularized.size(); ++k) {
                trajectories << size << ',' << run.seed << ',' << k << ',' << format_number(run.lb_regularized[k])
                             << ',' << format_number(run.lb_plain[k]) << '\n';
            }
            runs.push_back(std::move(run));
        }
    }

    summary << "# iterations until the lower bound reaches " << format_number(o.threshold * 100.0)
            << "% of the final bound (best of both methods); K = " << o.iterations << ", rho0 = "
            << format_number(o.rho0) << ", r = " << format_number(o.decay) << ", "
            << (o.markov ? "Markov" : "stagewise independent") << ", T = " << o.T << "\n";
    summary << "size,seed,final_lb,threshold,iters_regularized,iters_plain\n";
    for (const auto& r : runs) {
        summary << r.size << ',' << r.seed << ',' << format_number(r.final_lb) << ',' << format_number(r.threshold)
                << ',' << r.iters_regularized << ',' << r.iters_plain << '\n';
    }
    summary << "size,median_regularized,median_plain\n";
    double last_reg = 0.0;
    double last_plain = 0.0;
    int largest = 0;
    for (int size : o.sizes) {
        std::vector<int> reg, plain;
        for (const auto& r : runs) {
            if (r.size != size) continue;
            reg.push_back(r.iters_regularized);
            plain.push_back(r.iters_plain);
        }
        const double mr = median(reg);
        const double mp = median(plain);
        summary << size << ',' << format_number(mr) << ',' << format_number(mp) << '\n';
        if (size >= largest) {
            largest = size;
            last_reg = mr;
            last_plain = mp;
        }
    }
    summary << "regularized median <= plain median at largest size (" << largest
            << "): " << (last_reg <= last_plain ? "yes" : "no") << '\n';
    return runs;
}

void run_tuning_grid(const BenchOptions& o, int size, std::ostream& out) {
    const auto problem = bench_instance(o, size, o.first_seed);
    out << "rho0,decay,iter,lower_bound\n";
    for (double rho0 : {1.0, 10.0, 100.0}) {
        for (double decay : {0.9, 0.95, 0.99}) {
            const auto lb = lower_bounds(problem, o, o.first_seed, true, rho0, decay);
            for (std::size_t k = 0; k < lb.size(); ++k) {
                out << format_number(rho0) << ',' << format_number(decay) << ',' << k << ',' << format_number(lb[k])
                    << '\n';
            }
        }
    }
}

}  // namespace rsddp::cli
