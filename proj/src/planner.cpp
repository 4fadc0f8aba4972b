#include "affopt/planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace affopt {

double OptionQFunction::at(int s, int o) const {
    if (!is_defined(s, o)) throw MissingEntryError(s, o);
    return value[static_cast<std::size_t>(s) * n_options + o];
}

std::vector<double> OptionQFunction::state_values(
    const AffordanceSet& affordances, const std::vector<std::uint8_t>& terminal) const {
    std::vector<double> v(n_states, 0.0);
    for (int s = 0; s < n_states; ++s) {
        if (!terminal.empty() && terminal[s]) continue;
        double best = -std::numeric_limits<double>::infinity();
        for (int o = 0; o < n_options; ++o)
            if (affordances.contains(s, o) && is_defined(s, o))
                best = std::max(best, at(s, o));
        v[s] = best;
    }
    return v;
}

namespace {

// Shared epoch loop; Model provides reward_at and an expected-value kernel.
template <typename Model>
QviResult run_qvi(const Model& model, const std::vector<std::uint8_t>& terminal,
                  const AffordanceSet& affordances, int epochs, double tol) {
    const int S = model.n_states();
    const int O = model.n_options();
    if (affordances.n_states != S || affordances.n_options != O)
        throw InvalidArgument("affordance set shape does not match the model");
    check_liveness(affordances, terminal);

    QviResult res;
    res.q.n_states = S;
    res.q.n_options = O;
    res.q.value.assign(static_cast<std::size_t>(S) * O, 0.0);
    res.q.defined.assign(static_cast<std::size_t>(S) * O, 0);
    for (int s = 0; s < S; ++s) {
        if (!terminal.empty() && terminal[s]) continue;
        for (int o = 0; o < O; ++o)
            if (affordances.contains(s, o))
                res.q.defined[static_cast<std::size_t>(s) * O + o] = 1;
    }

    std::vector<double> v(S, 0.0), v_next(S, 0.0);
    for (int epoch = 1; epoch <= epochs; ++epoch) {
        const double v_sum = std::accumulate(v.begin(), v.end(), 0.0);
        double residual = 0.0;
        for (int s = 0; s < S; ++s) {
            if (!terminal.empty() && terminal[s]) {
                v_next[s] = 0.0;
                continue;
            }
            double best = -std::numeric_limits<double>::infinity();
            for (int o = 0; o < O; ++o) {
                if (!affordances.contains(s, o)) continue;
                const double q =
                    model.reward_at(s, o) + model.expected_value(s, o, v, v_sum);
                res.q.value[static_cast<std::size_t>(s) * O + o] = q;
                best = std::max(best, q);
            }
            v_next[s] = best;
            residual = std::max(residual, std::abs(v_next[s] - v[s]));
        }
        v.swap(v_next);
        res.iterations = epoch;
        res.residual = residual;
        if (residual <= tol) break;
    }
    return res;
}

// Adapter over exact/empirical models (sparse rows).
struct SparseModelView {
    const OptionModel* model;
    int n_states() const { return model->n_states; }
    int n_options() const { return model->n_options; }
    double reward_at(int s, int o) const { return model->reward_at(s, o); }
    double expected_value(int s, int o, const std::vector<double>& v,
                          double /*v_sum*/) const {
        double acc = 0.0;
        for (const auto& [e, p] : model->row(s, o)) acc += p * v[e];
        return acc;
    }
};

}  // namespace

QviResult smdp_qvi(const OptionModel& models, const AffordanceSet& affordances,
                   int epochs, double tol) {
    if (epochs <= 0) throw InvalidArgument("epochs must be positive");
    // Missing model entries on afforded pairs are rejected with the pair list.
    std::string missing;
    int missing_count = 0;
    for (int s = 0; s < models.n_states; ++s) {
        if (models.is_terminal_state(s)) continue;
        for (int o = 0; o < models.n_options; ++o) {
            if (!affordances.contains(s, o)) continue;
            if (models.entry_status(s, o) == EntryStatus::kMissing) {
                if (missing_count < 8)
                    missing += " (" + std::to_string(s) + "," + std::to_string(o) + ")";
                ++missing_count;
            }
        }
    }
    if (missing_count > 0)
        throw MissingEntryError("missing model entries on " +
                                    std::to_string(missing_count) +
                                    " afforded pair(s):" + missing +
                                    (missing_count > 8 ? " ..." : ""),
                                missing_count);
    return run_qvi(SparseModelView{&models}, models.terminal, affordances, epochs, tol);
}

QviResult smdp_qvi(const LearnedPlanModel& models, const AffordanceSet& affordances,
                   int epochs, double tol) {
    if (epochs <= 0) throw InvalidArgument("epochs must be positive");
    return run_qvi(models, models.terminal, affordances, epochs, tol);
}

std::vector<double> smdp_policy_value(const OptionModel& models,
                                      const OptionPolicy& policy, double tol,
                                      int max_iter) {
    const int S = models.n_states;
    if (static_cast<int>(policy.option.size()) != S)
        throw InvalidArgument("policy size does not match the model");
    std::vector<double> v(S, 0.0), next(S, 0.0);
    double residual = 0.0;
    for (int it = 0; it < max_iter; ++it) {
        residual = 0.0;
        for (int s = 0; s < S; ++s) {
            const int o = policy.option[s];
            if (o < 0 || models.is_terminal_state(s)) {
                next[s] = 0.0;
                continue;
            }
            double acc = models.reward_at(s, o);
            for (const auto& [e, p] : models.row(s, o)) acc += p * v[e];
            next[s] = acc;
            residual = std::max(residual, std::abs(next[s] - v[s]));
        }
        v.swap(next);
        if (residual <= tol) return v;
    }
    throw ConvergenceError("option policy evaluation did not converge", residual);
}

OptionPolicy policy_over_options(const OptionQFunction& q,
                                 const AffordanceSet& affordances,
                                 const std::vector<std::uint8_t>& terminal) {
    OptionPolicy policy;
    policy.option.assign(q.n_states, -1);
    std::vector<int> bad;
    for (int s = 0; s < q.n_states; ++s) {
        if (!terminal.empty() && terminal[s]) continue;
        int best = -1;
        double best_q = -std::numeric_limits<double>::infinity();
        for (int o = 0; o < q.n_options; ++o) {
            if (!affordances.contains(s, o) || !q.is_defined(s, o)) continue;
            const double val = q.at(s, o);
            if (val > best_q) {
                best_q = val;
                best = o;
            }
        }
        if (best < 0) {
            bad.push_back(s);
            continue;
        }
        policy.option[s] = best;
    }
    if (!bad.empty()) throw LivenessError(std::move(bad));
    return policy;
}

double evaluate_success(const TabularMdp& mdp, const OptionPolicy& policy,
                        const OptionSet& options, int episodes, int cap, Rng& rng) {
    if (episodes < 1) throw InvalidArgument("episodes must be >= 1");
    int successes = 0;
    for (int ep = 0; ep < episodes; ++ep) {
        int s = taxi::sample_initial_state(rng);
        int steps = 0;
        while (steps < cap) {
            const int o = policy.option[s];
            if (o < 0) break;
            OptionTransition t =
                execute_option(mdp, s, options[o], cap - steps, rng);
            steps += t.duration;
            s = t.end_state;
            if (mdp.is_terminal(s)) break;
        }
        if (mdp.is_terminal(s) && steps <= cap) successes += 1;
    }
    return static_cast<double>(successes) / episodes;
}

}  // namespace affopt
