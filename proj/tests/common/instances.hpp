#pragma once

// Small test instances shared by the unit and acceptance suites.

#include <random>

#include "rsddp/model.hpp"

namespace rsddp::testing {

/// Buy x0 <= 3 at unit cost; demand 1 or 2 with probability 1/2 each; each
/// unit short costs 10. V* = 2 at x0 = 2.
inline MultistageProblem newsvendor() {
    MultistageProblem p;
    p.T = 1;
    p.stage0.A = Matrix(1, 2);
    p.stage0.A << 1, 1;
    p.stage0.b = Vector::Constant(1, 3.0);
    p.stage0.c = Vector(2);
    p.stage0.c << 1, 0;
    p.stage0.B = Matrix(1, 2);
    p.stage0.B << 1, 0;
    std::vector<StageRealization> omega;
    for (double d : {1.0, 2.0}) {
        StageRealization w;
        w.A = Matrix(1, 2);
        w.A << 1, -1;
        w.b = Vector::Constant(1, d);
        w.c = Vector(2);
        w.c << 10, 0;
        w.B = Matrix(0, 2);
        omega.push_back(w);
    }
    p.process.outcomes.push_back(omega);
    p.process.probabilities.push_back(Vector::Constant(2, 0.5));
    return p;
}

inline Vector random_distribution(std::mt19937_64& rng, int n) {
    std::uniform_real_distribution<double> u(0.2, 1.0);
    Vector p(n);
    for (int i = 0; i < n; ++i) p[i] = u(rng);
    p /= p.sum();
    double rest = 0.0;
    for (int i = 0; i + 1 < n; ++i) rest += p[i];
    p[n - 1] = 1.0 - rest;
    return p;
}

/// Multi-item inventory with shared production capacity, storage limits,
/// free disposal and a shortage penalty, so every stage is feasible for any
/// incoming stock. Stage t >= 1 columns: p, q, w, e, short (r each), the
/// capacity slack, e-limit slacks (r). Rows: balance p - q - w - e = -R,
/// demand q + short = d, capacity, e-limit.
inline MultistageProblem random_inventory(std::uint64_t seed, int T, int outcomes, int r, bool markov) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto round2 = [](double v) { return std::round(v * 100.0) / 100.0; };

    Vector share(r);
    for (int i = 0; i < r; ++i) share[i] = round2(0.5 + u(rng));
    const double cap = round2(1.0 + 2.0 * r * u(rng));
    Vector elim(r);
    for (int i = 0; i < r; ++i) elim[i] = round2(1.0 + 2.0 * u(rng));

    auto stage = [&](bool first, bool last) {
        StageRealization w;
        const int n = 6 * r + 1;
        const int m = 3 * r + 1;
        w.A = Matrix::Zero(m, n);
        w.b = Vector::Zero(m);
        w.c = Vector::Zero(n);
        for (int i = 0; i < r; ++i) {
            w.A(i, i) = 1;              // p
            w.A(i, r + i) = -1;         // q
            w.A(i, 2 * r + i) = -1;     // w
            w.A(i, 3 * r + i) = -1;     // e
            w.A(r + i, r + i) = 1;      // q
            w.A(r + i, 4 * r + i) = 1;  // short
            w.b[r + i] = first ? 0.0 : round2(2.0 * u(rng));
            w.A(2 * r, i) = share[i];
            w.A(2 * r + 1 + i, 3 * r + i) = 1;
            w.A(2 * r + 1 + i, 5 * r + 1 + i) = 1;
            w.b[2 * r + 1 + i] = elim[i];
            w.c[i] = round2(1.0 + 2.0 * u(rng));
            w.c[3 * r + i] = round2(0.2 * u(rng));
            w.c[4 * r + i] = round2(6.0 + 6.0 * u(rng));
        }
        w.A(2 * r, 5 * r) = 1;
        w.b[2 * r] = cap;
        if (last) {
            w.B = Matrix(0, n);
        } else {
            w.B = Matrix::Zero(r, n);
            for (int i = 0; i < r; ++i) w.B(i, 3 * r + i) = 1;
        }
        return w;
    };

    MultistageProblem p;
    p.T = T;
    p.stage0 = stage(true, false);
    for (int t = 1; t <= T; ++t) {
        std::vector<StageRealization> omega;
        for (int j = 0; j < outcomes; ++j) omega.push_back(stage(false, t == T));
        p.process.outcomes.push_back(omega);
    }
    if (markov) {
        p.process.kind = ProcessKind::Markov;
        p.process.initial = random_distribution(rng, outcomes);
        for (int t = 1; t < T; ++t) {
            Matrix P(outcomes, outcomes);
            for (int i = 0; i < outcomes; ++i) P.row(i) = random_distribution(rng, outcomes).transpose();
            p.process.transitions.push_back(P);
        }
    } else {
        for (int t = 1; t <= T; ++t) p.process.probabilities.push_back(random_distribution(rng, outcomes));
    }
    return p;
}

}  // namespace rsddp::testing
