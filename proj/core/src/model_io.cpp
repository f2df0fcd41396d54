#include "json_util.hpp"

#include "rsddp/model.hpp"

namespace rsddp {

namespace {

using detail::json;

constexpr const char* kFormat = "rsddp-instance";
constexpr long long kVersion = 1;

json realization_json(const StageRealization& w) {
    return json{{"A", detail::to_json(w.A)},
                {"B", detail::to_json(w.B)},
                {"b", detail::to_json(w.b)},
                {"c", detail::to_json(w.c)}};
}

StageRealization realization_from(const json& j) {
    StageRealization w;
    w.A = detail::matrix_from(detail::field(j, "A"));
    w.B = detail::matrix_from(detail::field(j, "B"));
    w.b = detail::vector_from(detail::field(j, "b"));
    w.c = detail::vector_from(detail::field(j, "c"));
    return w;
}

}  // namespace

std::string problem_to_string(const MultistageProblem& problem) {
    const auto& proc = problem.process;
    const bool markov = proc.kind == ProcessKind::Markov;

    json stages = json::array();
    for (std::size_t t = 0; t < proc.outcomes.size(); ++t) {
        json outcomes = json::array();
        for (const auto& w : proc.outcomes[t]) outcomes.push_back(realization_json(w));
        json stage{{"outcomes", std::move(outcomes)}};
        if (!markov) stage["probabilities"] = detail::to_json(proc.probabilities.at(t));
        stages.push_back(std::move(stage));
    }

    json process{{"kind", markov ? "markov" : "stagewise"}, {"stages", std::move(stages)}};
    if (markov) {
        process["initial"] = detail::to_json(proc.initial);
        json transitions = json::array();
        for (const auto& P : proc.transitions) transitions.push_back(detail::to_json(P));
        process["transitions"] = std::move(transitions);
    }

    json doc{{"format", kFormat},
             {"version", kVersion},
             {"T", problem.T},
             {"stage0", realization_json(problem.stage0)},
             {"process", std::move(process)}};
    return detail::canonical_dump(doc);
}

MultistageProblem problem_from_string(const std::string& text) {
    const json doc = detail::parse(text);
    detail::check_header(doc, kFormat, kVersion);
    try {
        MultistageProblem p;
        p.T = static_cast<int>(detail::integer(detail::field(doc, "T")));
        p.stage0 = realization_from(detail::field(doc, "stage0"));
        const auto& process = detail::field(doc, "process");
        const auto& kind = detail::field(process, "kind");
        if (kind == "stagewise") {
            p.process.kind = ProcessKind::StagewiseIndependent;
        } else if (kind == "markov") {
            p.process.kind = ProcessKind::Markov;
        } else {
            throw MalformedFile("unknown process kind " + kind.dump());
        }
        const auto& stages = detail::field(process, "stages");
        if (!stages.is_array()) throw MalformedFile("'stages' must be an array");
        for (const auto& stage : stages) {
            std::vector<StageRealization> omega;
            const auto& outcomes = detail::field(stage, "outcomes");
            if (!outcomes.is_array()) throw MalformedFile("'outcomes' must be an array");
            for (const auto& w : outcomes) omega.push_back(realization_from(w));
            p.process.outcomes.push_back(std::move(omega));
            if (!p.markov()) {
                p.process.probabilities.push_back(
                    detail::vector_from(detail::field(stage, "probabilities")));
            }
        }
        if (p.markov()) {
            p.process.initial = detail::vector_from(detail::field(process, "initial"));
            const auto& transitions = detail::field(process, "transitions");
            if (!transitions.is_array()) throw MalformedFile("'transitions' must be an array");
            for (const auto& P : transitions) p.process.transitions.push_back(detail::matrix_from(P));
        }
        return p;
    } catch (const detail::json::exception& e) {
        throw MalformedFile(std::string("instance: ") + e.what());
    }
}

void save_problem(const MultistageProblem& problem, const std::string& path) {
    detail::write_file(path, problem_to_string(problem));
}

MultistageProblem load_problem(const std::string& path) {
    return problem_from_string(detail::read_file(path));
}

}  // namespace rsddp
