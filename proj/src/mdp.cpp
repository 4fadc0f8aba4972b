#include "affopt/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace affopt {

TabularMdp TabularMdp::zeros(int n_states, int n_actions, double discount) {
    if (n_states <= 0 || n_actions <= 0)
        throw InvalidArgument("n_states and n_actions must be positive");
    TabularMdp m;
    m.n_states = n_states;
    m.n_actions = n_actions;
    m.discount = discount;
    m.transition.assign(static_cast<std::size_t>(n_states) * n_actions * n_states, 0.0);
    m.reward.assign(static_cast<std::size_t>(n_states) * n_actions, 0.0);
    m.terminal.assign(n_states, 0);
    return m;
}

void TabularMdp::validate() const {
    if (n_states <= 0 || n_actions <= 0)
        throw InvalidArgument("empty state or action set");
    if (!(discount >= 0.0 && discount < 1.0))
        throw InvalidArgument("discount must lie in [0, 1)");
    if (transition.size() != static_cast<std::size_t>(n_states) * n_actions * n_states ||
        reward.size() != static_cast<std::size_t>(n_states) * n_actions ||
        terminal.size() != static_cast<std::size_t>(n_states))
        throw InvalidArgument("table shapes do not match n_states/n_actions");
    for (double x : transition)
        if (!std::isfinite(x) || x < 0.0)
            throw InvalidArgument("transition entries must be finite and nonnegative");
    for (double x : reward)
        if (!std::isfinite(x)) throw InvalidArgument("rewards must be finite");
    for (int s = 0; s < n_states; ++s) {
        for (int a = 0; a < n_actions; ++a) {
            double row = 0.0;
            for (int s2 = 0; s2 < n_states; ++s2) row += p(s, a, s2);
            if (std::abs(row - 1.0) > 1e-12)
                throw InvalidArgument("transition row (" + std::to_string(s) + "," +
                                      std::to_string(a) + ") sums to " +
                                      std::to_string(row));
        }
        if (is_terminal(s)) {
            for (int a = 0; a < n_actions; ++a) {
                if (p(s, a, s) != 1.0 || r(s, a) != 0.0)
                    throw InvalidArgument("terminal state " + std::to_string(s) +
                                          " is not a zero-reward self-loop");
            }
        }
    }
}

ValueIterationResult value_iteration(const TabularMdp& mdp, double tol, int max_iter) {
    mdp.validate();
    if (!(tol > 0.0)) throw InvalidArgument("tol must be positive");
    const int S = mdp.n_states, A = mdp.n_actions;
    ValueFunction v;
    v.values.assign(S, 0.0);
    QFunction q;
    q.n_states = S;
    q.n_choices = A;
    q.values.assign(static_cast<std::size_t>(S) * A, 0.0);
    std::vector<double> next(S, 0.0);
    for (int it = 1; it <= max_iter; ++it) {
        double residual = 0.0;
        for (int s = 0; s < S; ++s) {
            double best = -std::numeric_limits<double>::infinity();
            for (int a = 0; a < A; ++a) {
                double acc = mdp.r(s, a);
                const double* row = &mdp.transition[(static_cast<std::size_t>(s) * A + a) * S];
                double exp = 0.0;
                for (int s2 = 0; s2 < S; ++s2) exp += row[s2] * v.values[s2];
                acc += mdp.discount * exp;
                q.at(s, a) = acc;
                best = std::max(best, acc);
            }
            next[s] = best;
            residual = std::max(residual, std::abs(best - v.values[s]));
        }
        v.values.swap(next);
        if (residual <= tol) {
            // One extra backup so Q is consistent with the returned V.
            for (int s = 0; s < S; ++s) {
                for (int a = 0; a < A; ++a) {
                    double acc = mdp.r(s, a);
                    const double* row =
                        &mdp.transition[(static_cast<std::size_t>(s) * A + a) * S];
                    double exp = 0.0;
                    for (int s2 = 0; s2 < S; ++s2) exp += row[s2] * v.values[s2];
                    q.at(s, a) = acc + mdp.discount * exp;
                }
            }
            return {std::move(v), std::move(q), it};
        }
        if (it == max_iter)
            throw ConvergenceError("value iteration did not converge", residual);
    }
    throw ConvergenceError("value iteration did not converge", 0.0);  // unreachable
}

ValueFunction policy_value(const TabularMdp& mdp, const DeterministicPolicy& policy,
                           double tol, int max_iter) {
    mdp.validate();
    if (static_cast<int>(policy.choice.size()) != mdp.n_states)
        throw InvalidArgument("policy size does not match n_states");
    for (int c : policy.choice)
        if (c < 0 || c >= mdp.n_actions)
            throw InvalidArgument("policy selects an invalid action index");
    const int S = mdp.n_states, A = mdp.n_actions;
    ValueFunction v;
    v.values.assign(S, 0.0);
    std::vector<double> next(S, 0.0);
    double residual = 0.0;
    for (int it = 1; it <= max_iter; ++it) {
        residual = 0.0;
        for (int s = 0; s < S; ++s) {
            int a = policy.choice[s];
            const double* row = &mdp.transition[(static_cast<std::size_t>(s) * A + a) * S];
            double exp = 0.0;
            for (int s2 = 0; s2 < S; ++s2) exp += row[s2] * v.values[s2];
            next[s] = mdp.r(s, a) + mdp.discount * exp;
            residual = std::max(residual, std::abs(next[s] - v.values[s]));
        }
        v.values.swap(next);
        if (residual <= tol) return v;
    }
    throw ConvergenceError("policy evaluation did not converge", residual);
}

DeterministicPolicy greedy_policy(const QFunction& q) {
    if (q.n_choices <= 0) throw InvalidArgument("empty action set");
    for (double x : q.values)
        if (!std::isfinite(x)) throw InvalidArgument("Q values must be finite");
    DeterministicPolicy p;
    p.choice.assign(q.n_states, 0);
    for (int s = 0; s < q.n_states; ++s) {
        int best = 0;
        for (int c = 1; c < q.n_choices; ++c)
            if (q.at(s, c) > q.at(s, best)) best = c;
        p.choice[s] = best;
    }
    return p;
}

void save_mdp(const TabularMdp& mdp, std::ostream& out) {
    out << std::setprecision(17);
    out << mdp.n_states << ' ' << mdp.n_actions << ' ' << mdp.discount << '\n';
    for (int s = 0; s < mdp.n_states; ++s) {
        for (int a = 0; a < mdp.n_actions; ++a) {
            for (int s2 = 0; s2 < mdp.n_states; ++s2)
                out << mdp.p(s, a, s2) << (s2 + 1 == mdp.n_states ? '\n' : ' ');
        }
    }
    for (int s = 0; s < mdp.n_states; ++s) {
        for (int a = 0; a < mdp.n_actions; ++a)
            out << mdp.r(s, a) << (a + 1 == mdp.n_actions ? '\n' : ' ');
    }
}

TabularMdp load_mdp(std::istream& in) {
    int S = 0, A = 0;
    double gamma = 0.0;
    if (!(in >> S >> A >> gamma)) throw InvalidArgument("bad MDP header");
    TabularMdp m = TabularMdp::zeros(S, A, gamma);
    for (double& x : m.transition)
        if (!(in >> x)) throw InvalidArgument("truncated transition table");
    for (double& x : m.reward)
        if (!(in >> x)) throw InvalidArgument("truncated reward table");
    for (int s = 0; s < S; ++s) {
        bool absorbing = true;
        for (int a = 0; a < A && absorbing; ++a)
            if (m.p(s, a, s) != 1.0 || m.r(s, a) != 0.0) absorbing = false;
        m.terminal[s] = absorbing ? 1 : 0;
    }
    m.validate();
    return m;
}

void save_mdp_file(const TabularMdp& mdp, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw InvalidArgument("cannot open " + path + " for writing");
    save_mdp(mdp, out);
}

TabularMdp load_mdp_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open " + path);
    return load_mdp(in);
}

}  // namespace affopt
