#include "rsddp_cli/cli.hpp"

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "rsddp/cutpool.hpp"
#include "rsddp/engine.hpp"
#include "rsddp/errors.hpp"
#include "rsddp/oracle.hpp"
#include "rsddp/report.hpp"
#include "rsddp/storage.hpp"
#include "rsddp_cli/bench.hpp"

namespace rsddp::cli {

namespace {

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    out << text;
    if (!out) throw Error("failed writing " + path);
}

/// identity, or diag:<file> holding either one diagonal for every stage or
/// one diagonal per stage t = 0..T-1.
std::vector<Matrix> parse_q_scale(const std::string& spec, const MultistageProblem& problem) {
    if (spec == "identity") return {};
    const std::string prefix = "diag:";
    if (spec.rfind(prefix, 0) != 0) throw UsageError("--q-scale expects identity or diag:<file>");
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(slurp(spec.substr(prefix.size())));
    } catch (const nlohmann::json::exception& e) {
        throw MalformedFile(std::string("--q-scale file: ") + e.what());
    }
    if (!doc.is_array() || doc.empty()) throw MalformedFile("--q-scale file must hold a non-empty array");
    auto diag = [](const nlohmann::json& a) {
        if (!a.is_array()) throw MalformedFile("--q-scale diagonal must be an array of numbers");
        Vector d(static_cast<Eigen::Index>(a.size()));
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (!a[i].is_number()) throw MalformedFile("--q-scale diagonal must be an array of numbers");
            d[static_cast<Eigen::Index>(i)] = a[i].get<double>();
            if (d[static_cast<Eigen::Index>(i)] < 0.0) throw MalformedFile("--q-scale entries must be non-negative");
        }
        return d;
    };
    std::vector<Matrix> Q;
    const bool per_stage = doc.front().is_array();
    if (per_stage && static_cast<int>(doc.size()) != problem.T) {
        throw DimensionMismatch("--q-scale file lists " + std::to_string(doc.size()) + " stages, instance has " +
                                std::to_string(problem.T));
    }
    for (int t = 0; t < problem.T; ++t) {
        const Vector d = diag(per_stage ? doc[static_cast<std::size_t>(t)] : doc);
        Q.push_back(d.asDiagonal());
    }
    return Q;
}

int run_generate(const std::string& params_path, const std::string& out_path, std::uint64_t seed,
                 const std::optional<int>& n_storage, const std::optional<int>& T, const std::optional<int>& regimes,
                 bool independent, bool print_params, std::ostream& out) {
    StorageNetworkParams p = params_path.empty() ? StorageNetworkParams{} : load_params(params_path);
    if (n_storage) p.n_storage = *n_storage;
    if (T) p.T = *T;
    if (regimes) p.n_regimes = *regimes;
    if (independent) p.markov = false;
    p.validate();
    if (print_params) {
        out << params_to_string(p);
        return 0;
    }
    if (out_path.empty()) throw UsageError("generate: --out is required");
    Rng rng(seed);
    save_problem(generate_storage_instance(p, rng), out_path);
    return 0;
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Regularized stochastic dual dynamic programming", "rsddp"};
    app.require_subcommand(1);

    // generate
    auto* gen = app.add_subcommand("generate", "Write a grid-storage instance");
    std::string gen_params, gen_out;
    std::uint64_t gen_seed = 1;
    std::optional<int> gen_storage, gen_T, gen_regimes;
    bool gen_independent = false, gen_print = false;
    gen->add_option("--params", gen_params, "Storage parameter file")->check(CLI::ExistingFile);
    gen->add_option("--out,-o", gen_out, "Instance file to write");
    gen->add_option("--seed", gen_seed, "Generator seed");
    gen->add_option("--n-storage", gen_storage, "Override the number of storage devices")->check(CLI::PositiveNumber);
    gen->add_option("--T", gen_T, "Override the number of stages")->check(CLI::PositiveNumber);
    gen->add_option("--regimes", gen_regimes, "Override the number of wind regimes")->check(CLI::PositiveNumber);
    gen->add_flag("--independent", gen_independent, "Stagewise-independent regimes instead of a Markov chain");
    gen->add_flag("--print-params", gen_print, "Print the effective parameters and exit");

    // solve
    auto* solve = app.add_subcommand("solve", "Run SDDP and write cuts and the bounds table");
    std::string s_instance, s_cuts, s_bounds, s_qscale = "identity", s_dump;
    bool s_reg = false, s_plain = false, s_markov = false, s_indep = false, s_timing = false;
    EngineConfig cfg;
    cfg.seed = 0;
    solve->add_option("instance", s_instance, "Instance file")->required()->check(CLI::ExistingFile);
    solve->add_option("--cuts", s_cuts, "Cut file to write")->required();
    solve->add_option("--bounds", s_bounds, "Bounds table (CSV); stdout when omitted");
    auto* f_reg = solve->add_flag("--regularized", s_reg, "Regularized forward pass (default)");
    auto* f_plain = solve->add_flag("--plain", s_plain, "Unregularized SDDP");
    f_reg->excludes(f_plain);
    auto* f_markov = solve->add_flag("--markov", s_markov, "Markov cut sharing (converts stagewise instances)");
    auto* f_indep = solve->add_flag("--independent", s_indep, "Require a stagewise-independent instance");
    f_markov->excludes(f_indep);
    solve->add_option("--rho0", cfg.schedule.rho0, "Initial regularization weight")->capture_default_str();
    solve->add_option("--decay", cfg.schedule.decay, "Geometric decay of the weight")->capture_default_str();
    solve->add_option("--iters", cfg.iterations, "Iterations K")->capture_default_str();
    solve->add_option("--seed", cfg.seed, "Sampling seed")->capture_default_str();
    solve->add_option("--eps-feas", cfg.eps_f, "Relative primal feasibility tolerance")->capture_default_str();
    solve->add_option("--ub-samples", cfg.ub_samples, "Forward simulations per upper-bound estimate")
        ->capture_default_str();
    solve->add_option("--ub-every", cfg.ub_every, "Upper-bound cadence in iterations (0 disables)")
        ->capture_default_str();
    solve->add_option("--q-scale", s_qscale, "identity or diag:<file>")->capture_default_str();
    solve->add_option("--workers", cfg.workers, "Worker threads")->capture_default_str();
    solve->add_option("--stall", cfg.stall_iterations, "Stop after this many iterations without bound change")
        ->capture_default_str();
    solve->add_flag("--timing", s_timing, "Fill the wall_ms column");
    solve->add_option("--dump-failures", s_dump, "Write failing subproblems to this file");

    // verify
    auto* ver = app.add_subcommand("verify", "Compare a cut file against the exact oracle");
    std::string v_instance, v_cuts, v_report;
    double v_tol = 1e-6;
    std::uint64_t v_nodes = kDefaultNodeLimit;
    ver->add_option("instance", v_instance, "Instance file")->required()->check(CLI::ExistingFile);
    ver->add_option("cuts", v_cuts, "Cut file")->required()->check(CLI::ExistingFile);
    ver->add_option("--tol", v_tol, "Relative tolerance")->capture_default_str();
    ver->add_option("--max-nodes", v_nodes, "Scenario tree node limit")->capture_default_str();
    ver->add_option("--report", v_report, "Also write the report to this file");

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "Cost of the cut policy");
    std::string e_instance, e_cuts;
    bool e_exact = false;
    int e_samples = 1000, e_workers = 1;
    std::uint64_t e_seed = 0;
    ev->add_option("instance", e_instance, "Instance file")->required()->check(CLI::ExistingFile);
    ev->add_option("cuts", e_cuts, "Cut file")->required()->check(CLI::ExistingFile);
    ev->add_flag("--exact", e_exact, "Exact expectation over the scenario tree");
    ev->add_option("--samples", e_samples, "Monte-Carlo samples")->capture_default_str()->check(CLI::PositiveNumber);
    ev->add_option("--seed", e_seed, "Sampling seed")->capture_default_str();
    ev->add_option("--workers", e_workers, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);

    // bench
    auto* bench = app.add_subcommand("bench", "Regularized versus plain SDDP on storage instances");
    BenchOptions bo;
    std::string b_out, b_summary;
    bool b_indep = false, b_grid = false;
    int b_grid_size = 5;
    bench->add_option("--sizes", bo.sizes, "Storage counts")->delimiter(',')->capture_default_str();
    bench->add_option("--seeds", bo.seeds, "Seeds per size")->capture_default_str()->check(CLI::PositiveNumber);
    bench->add_option("--first-seed", bo.first_seed, "First seed")->capture_default_str();
    bench->add_option("--T", bo.T, "Stages")->capture_default_str()->check(CLI::PositiveNumber);
    bench->add_option("--iters", bo.iterations, "Iterations per run")->capture_default_str()->check(CLI::PositiveNumber);
    bench->add_option("--rho0", bo.rho0, "Initial regularization weight")->capture_default_str();
    bench->add_option("--decay", bo.decay, "Geometric decay")->capture_default_str();
    bench->add_option("--workers", bo.workers, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
    bench->add_flag("--independent", b_indep, "Stagewise-independent regimes");
    bench->add_flag("--grid", b_grid, "Run the 3x3 (rho0, r) tuning grid instead");
    bench->add_option("--grid-size", b_grid_size, "Storage count for the tuning grid")->capture_default_str();
    bench->add_option("--out", b_out, "Trajectory table (CSV); stdout when omitted");
    bench->add_option("--summary", b_summary, "Also write the summary to this file");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "rsddp: " << e.what() << '\n';
        return 2;
    }

    try {
        if (gen->parsed()) {
            return run_generate(gen_params, gen_out, gen_seed, gen_storage, gen_T, gen_regimes, gen_independent,
                                gen_print, out);
        }
        if (solve->parsed()) {
            MultistageProblem problem = load_problem(s_instance);
            cfg.regularized = !s_plain;
            if (s_markov) cfg.markov = true;
            if (s_indep) {
                if (problem.markov()) throw UsageError("--independent given for a Markov instance");
                cfg.markov = false;
            }
            cfg.Q = parse_q_scale(s_qscale, problem);
            try {
                cfg.validate();
            } catch (const InvalidArgument& e) {
                throw UsageError(e.what());
            }
            SolverOptions so;
            so.eps_f = cfg.eps_f;
            so.dump_path = s_dump;
            Engine engine(std::move(problem), cfg, std::make_shared<BundledSolver>(so));
            const SolveReport report = engine.run();
            save_pool(engine.pool(), s_cuts);
            const std::string table = bounds_csv(report, s_timing);
            if (s_bounds.empty()) out << table;
            else write_text(s_bounds, table);
            return 0;
        }
        if (ver->parsed()) {
            const auto problem = load_problem(v_instance);
            const auto pool = load_pool(v_cuts);
            const auto report = verify_pool(problem, pool, v_tol, v_nodes);
            const std::string text = to_string(report);
            out << text;
            if (!v_report.empty()) write_text(v_report, text);
            return report.ok() ? 0 : 1;
        }
        if (ev->parsed()) {
            const auto problem = load_problem(e_instance);
            const auto pool = load_pool(e_cuts);
            if (e_exact) {
                out << "exact_cost: " << format_number(evaluate_policy_exact(problem, pool)) << '\n';
            } else {
                Rng rng(e_seed);
                const auto est = estimate_upper_bound(problem, pool, e_samples, rng, e_workers);
                out << "mean: " << format_number(est.mean) << '\n'
                    << "stderr: " << format_number(est.std_error) << '\n'
                    << "samples: " << est.samples << '\n';
            }
            return 0;
        }
        if (bench->parsed()) {
            bo.markov = !b_indep;
            try {
                RegularizationSchedule{bo.rho0, bo.decay}.validate();
            } catch (const InvalidArgument& e) {
                throw UsageError(e.what());
            }
            std::ofstream traj_file;
            std::ostream* traj = &out;
            if (!b_out.empty()) {
                traj_file.open(b_out, std::ios::binary);
                if (!traj_file) throw Error("cannot write " + b_out);
                traj = &traj_file;
            }
            if (b_grid) {
                run_tuning_grid(bo, b_grid_size, *traj);
                return 0;
            }
            std::ostringstream summary;
            run_bench(bo, *traj, summary);
            out << summary.str();
            if (!b_summary.empty()) write_text(b_summary, summary.str());
            return 0;
        }
    } catch (const UsageError& e) {
        err << "rsddp: " << e.what() << '\n';
        return 2;
    } catch (const SubproblemFailure& e) {
        err << "rsddp: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        err << "rsddp: " << e.what() << '\n';
        return 1;
    }
    return 2;
}

int cli_main(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return cli_main(args, std::cout, std::cerr);
}

}  // namespace rsddp::cli
