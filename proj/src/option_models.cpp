#include "affopt/option_models.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

namespace affopt {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

OptionModel OptionModel::empty(Kind kind, int n_states, int n_options,
                               double discount) {
    OptionModel m;
    m.kind = kind;
    m.n_states = n_states;
    m.n_options = n_options;
    m.discount = discount;
    const std::size_t n = static_cast<std::size_t>(n_states) * n_options;
    m.rows.assign(n, {});
    m.reward.assign(n, 0.0);
    m.length.assign(n, 0.0);
    m.status.assign(n, EntryStatus::kMissing);
    return m;
}

const std::vector<std::pair<int, double>>& OptionModel::row(int s, int o) const {
    const std::size_t i = idx(s, o);
    if (status[i] == EntryStatus::kMissing) throw MissingEntryError(s, o);
    return rows[i];
}

double OptionModel::reward_at(int s, int o) const {
    const std::size_t i = idx(s, o);
    if (status[i] == EntryStatus::kMissing) throw MissingEntryError(s, o);
    return reward[i];
}

double OptionModel::length_at(int s, int o) const {
    const std::size_t i = idx(s, o);
    if (status[i] == EntryStatus::kMissing) throw MissingEntryError(s, o);
    return length[i];
}

double OptionModel::mass(int s, int o) const {
    double total = 0.0;
    for (const auto& [e, p] : row(s, o)) total += p;
    return total;
}

void OptionModel::save(std::ostream& out) const {
    out.precision(17);
    out << "optionmodel v1\n";
    out << static_cast<int>(kind) << ' ' << n_states << ' ' << n_options << ' '
        << discount << '\n';
    std::size_t atoms = 0;
    for (const auto& r : rows) atoms += r.size();
    out << atoms << '\n';
    for (int s = 0; s < n_states; ++s)
        for (int o = 0; o < n_options; ++o)
            for (const auto& [e, p] : rows[idx(s, o)])
                out << s << ' ' << o << ' ' << e << ' ' << p << '\n';
    for (int s = 0; s < n_states; ++s)
        for (int o = 0; o < n_options; ++o) {
            const std::size_t i = idx(s, o);
            out << s << ' ' << o << ' ' << reward[i] << ' ' << length[i] << ' '
                << static_cast<int>(status[i]) << '\n';
        }
    out << terminal.size() << '\n';
    for (std::size_t s = 0; s < terminal.size(); ++s)
        out << static_cast<int>(terminal[s]) << (s + 1 == terminal.size() ? '\n' : ' ');
}

OptionModel OptionModel::load(std::istream& in) {
    std::string tag, version;
    if (!(in >> tag >> version) || tag != "optionmodel" || version != "v1")
        throw InvalidArgument("bad option model header");
    int kind_i, S, O;
    double gamma;
    if (!(in >> kind_i >> S >> O >> gamma)) throw InvalidArgument("bad model dims");
    OptionModel m = OptionModel::empty(static_cast<Kind>(kind_i), S, O, gamma);
    std::size_t atoms;
    in >> atoms;
    for (std::size_t i = 0; i < atoms; ++i) {
        int s, o, e;
        double p;
        if (!(in >> s >> o >> e >> p)) throw InvalidArgument("truncated model atoms");
        m.rows[m.idx(s, o)].emplace_back(e, p);
    }
    for (std::size_t i = 0; i < static_cast<std::size_t>(S) * O; ++i) {
        int s, o, st;
        double r, l;
        if (!(in >> s >> o >> r >> l >> st)) throw InvalidArgument("truncated model entries");
        const std::size_t j = m.idx(s, o);
        m.reward[j] = r;
        m.length[j] = l == -1.0 ? kInf : l;
        m.status[j] = static_cast<EntryStatus>(st);
    }
    std::size_t tn;
    if (in >> tn) {
        m.terminal.assign(tn, 0);
        for (std::size_t s = 0; s < tn; ++s) {
            int b;
            in >> b;
            m.terminal[s] = static_cast<std::uint8_t>(b);
        }
    }
    return m;
}

namespace {

// Successor list of state s under the option's action, with the effective
// termination probability of each successor (terminal MDP states always end
// the option).
struct Succ {
    int state;
    double prob;
    double beta;
};

std::vector<std::vector<Succ>> successor_lists(const TabularMdp& mdp,
                                               const Option& option) {
    std::vector<std::vector<Succ>> out(mdp.n_states);
    for (int s = 0; s < mdp.n_states; ++s) {
        if (mdp.is_terminal(s)) continue;
        int a = option.intra_policy[s];
        for (int x = 0; x < mdp.n_states; ++x) {
            double p = mdp.p(s, a, x);
            if (p <= 0.0) continue;
            double beta = mdp.is_terminal(x) ? 1.0 : option.termination[x];
            out[s].push_back({x, p, beta});
        }
    }
    return out;
}

// States from which the option terminates almost surely. A start can fail to
// terminate iff a state with no reachable termination event is reachable
// through continuation edges.
std::vector<std::uint8_t> almost_sure_termination(
    const TabularMdp& mdp, const std::vector<std::vector<Succ>>& succ) {
    const int S = mdp.n_states;
    // escapable[x]: some termination event reachable from x.
    std::vector<std::uint8_t> escapable(S, 0);
    bool changed = true;
    while (changed) {
        changed = false;
        for (int s = 0; s < S; ++s) {
            if (escapable[s] || mdp.is_terminal(s)) continue;
            for (const Succ& e : succ[s]) {
                if (e.beta > 0.0 || (e.beta < 1.0 && escapable[e.state])) {
                    escapable[s] = 1;
                    changed = true;
                    break;
                }
            }
        }
    }
    // Dead states reachable via continuation edges poison their ancestors.
    std::vector<std::uint8_t> doomed(S, 0);
    for (int s = 0; s < S; ++s)
        if (!mdp.is_terminal(s) && !escapable[s]) doomed[s] = 1;
    changed = true;
    while (changed) {
        changed = false;
        for (int s = 0; s < S; ++s) {
            if (doomed[s] || mdp.is_terminal(s)) continue;
            for (const Succ& e : succ[s]) {
                if (e.beta < 1.0 && doomed[e.state]) {
                    doomed[s] = 1;
                    changed = true;
                    break;
                }
            }
        }
    }
    std::vector<std::uint8_t> sure(S, 0);
    for (int s = 0; s < S; ++s)
        if (!mdp.is_terminal(s) && !doomed[s]) sure[s] = 1;
    return sure;
}

}  // namespace

OptionModel exact_option_model(const TabularMdp& mdp, const Option& option, double tol,
                               int max_iter) {
    mdp.validate();
    option.validate(mdp);
    if (!(tol > 0.0)) throw InvalidArgument("tol must be positive");
    const int S = mdp.n_states;
    const double gamma = mdp.discount;
    auto succ = successor_lists(mdp, option);
    auto sure = almost_sure_termination(mdp, succ);

    OptionModel model = OptionModel::empty(OptionModel::Kind::kExact, S, 1, gamma);
    model.terminal = mdp.terminal;

    // Discounted termination rows, dense scratch per state. The row recursion
    // does not feed the scalar reward/duration recursions, so each runs until
    // its own backup residual clears the tolerance.
    std::vector<std::vector<double>> p_cur(S, std::vector<double>(S, 0.0));
    std::vector<std::vector<double>> p_next(S, std::vector<double>(S, 0.0));
    double residual = kInf;
    for (int it = 1; residual > tol; ++it) {
        if (it > max_iter)
            throw ConvergenceError("exact option model rows did not converge",
                                   residual);
        residual = 0.0;
        for (int s = 0; s < S; ++s) {
            if (mdp.is_terminal(s)) continue;
            std::fill(p_next[s].begin(), p_next[s].end(), 0.0);
            for (const Succ& e : succ[s]) {
                if (e.beta > 0.0) p_next[s][e.state] += gamma * e.prob * e.beta;
                const double cont = e.prob * (1.0 - e.beta);
                if (cont > 0.0) {
                    const std::vector<double>& tail = p_cur[e.state];
                    double* dst = p_next[s].data();
                    for (int x = 0; x < S; ++x) dst[x] += gamma * cont * tail[x];
                }
            }
            for (int x = 0; x < S; ++x)
                residual = std::max(residual, std::abs(p_next[s][x] - p_cur[s][x]));
        }
        std::swap(p_cur, p_next);
    }

    std::vector<double> r_cur(S, 0.0), r_next(S, 0.0);
    std::vector<double> l_cur(S, 0.0), l_next(S, 0.0);
    residual = kInf;
    for (int it = 1; residual > tol; ++it) {
        if (it > max_iter)
            throw ConvergenceError("exact option model reward/duration did not converge",
                                   residual);
        residual = 0.0;
        for (int s = 0; s < S; ++s) {
            if (mdp.is_terminal(s)) continue;
            const int a = option.intra_policy[s];
            double r_acc = mdp.r(s, a);
            double l_acc = 1.0;
            for (const Succ& e : succ[s]) {
                const double cont = e.prob * (1.0 - e.beta);
                if (cont > 0.0) {
                    r_acc += gamma * cont * r_cur[e.state];
                    if (sure[e.state]) l_acc += cont * l_cur[e.state];
                }
            }
            r_next[s] = r_acc;
            l_next[s] = sure[s] ? l_acc : 0.0;
            double d = std::abs(r_next[s] - r_cur[s]);
            if (sure[s]) d = std::max(d, std::abs(l_next[s] - l_cur[s]));
            residual = std::max(residual, d);
        }
        std::swap(r_cur, r_next);
        std::swap(l_cur, l_next);
    }

    for (int s = 0; s < S; ++s) {
        const std::size_t i = model.idx(s, 0);
        if (mdp.is_terminal(s)) {
            model.status[i] = EntryStatus::kMissing;
            continue;
        }
        auto& row = model.rows[i];
        for (int x = 0; x < S; ++x)
            if (p_cur[s][x] > 0.0) row.emplace_back(x, p_cur[s][x]);
        model.reward[i] = r_cur[s];
        if (sure[s]) {
            model.length[i] = l_cur[s];
            model.status[i] = EntryStatus::kOk;
        } else {
            model.length[i] = kInf;
            model.status[i] = EntryStatus::kNonTerminating;
        }
    }
    return model;
}

OptionModel exact_models(const TabularMdp& mdp, const OptionSet& options, double tol,
                         int max_iter) {
    OptionModel all =
        OptionModel::empty(OptionModel::Kind::kExact, mdp.n_states, options.size(),
                           mdp.discount);
    all.terminal = mdp.terminal;
    for (int o = 0; o < options.size(); ++o) {
        OptionModel one = exact_option_model(mdp, options[o], tol, max_iter);
        for (int s = 0; s < mdp.n_states; ++s) {
            const std::size_t src = one.idx(s, 0);
            const std::size_t dst = all.idx(s, o);
            all.rows[dst] = std::move(one.rows[src]);
            all.reward[dst] = one.reward[src];
            all.length[dst] = one.length[src];
            all.status[dst] = one.status[src];
        }
    }
    return all;
}

double TrajectoryDistribution::total_mass() const {
    double t = 0.0;
    for (double m : mass) t += m;
    return t;
}

std::vector<double> TrajectoryDistribution::discounted_end_distribution(
    double gamma) const {
    std::vector<double> out(n_states, 0.0);
    double g = gamma;
    for (int t = 1; t <= horizon; ++t, g *= gamma)
        for (int e = 0; e < n_states; ++e) out[e] += g * cell_mass(t, e);
    return out;
}

double TrajectoryDistribution::expected_discounted_reward(double /*gamma*/) const {
    double out = 0.0;
    for (double g : return_sum) out += g;
    return out + residual_return;
}

double TrajectoryDistribution::expected_duration() const {
    double out = 0.0;
    for (int t = 1; t <= horizon; ++t)
        for (int e = 0; e < n_states; ++e) out += t * cell_mass(t, e);
    return out;
}

TrajectoryDistribution enumerate_trajectories(const TabularMdp& mdp,
                                              const Option& option, int start,
                                              int horizon) {
    if (mdp.n_states > 64 || horizon > 64 || horizon < 1)
        throw InvalidArgument("enumeration guard: n_states <= 64 and horizon in [1, 64]");
    mdp.validate();
    option.validate(mdp);
    if (mdp.is_terminal(start)) throw InvalidArgument("cannot enumerate from a terminal state");
    const int S = mdp.n_states;
    const double gamma = mdp.discount;

    TrajectoryDistribution dist;
    dist.n_states = S;
    dist.horizon = horizon;
    dist.mass.assign(static_cast<std::size_t>(horizon) * S, 0.0);
    dist.return_sum.assign(static_cast<std::size_t>(horizon) * S, 0.0);

    // alive[x]: mass of trajectories currently at x that have not terminated;
    // alive_g[x]: that mass weighted by the return accumulated so far.
    std::vector<double> alive(S, 0.0), alive_g(S, 0.0);
    std::vector<double> next_alive(S, 0.0), next_g(S, 0.0);
    alive[start] = 1.0;
    double step_discount = 1.0;  // gamma^(t-1) applied to the reward at step t
    for (int t = 1; t <= horizon; ++t) {
        std::fill(next_alive.begin(), next_alive.end(), 0.0);
        std::fill(next_g.begin(), next_g.end(), 0.0);
        for (int x = 0; x < S; ++x) {
            if (alive[x] <= 0.0 && alive_g[x] == 0.0) continue;
            const int a = option.intra_policy[x];
            const double imm = mdp.r(x, a);
            for (int y = 0; y < S; ++y) {
                const double p = mdp.p(x, a, y);
                if (p <= 0.0) continue;
                const double m = alive[x] * p;
                const double g = alive_g[x] * p + m * step_discount * imm;
                const double beta =
                    mdp.is_terminal(y) ? 1.0 : option.termination[y];
                if (beta > 0.0) {
                    dist.mass[(t - 1) * S + y] += m * beta;
                    dist.return_sum[(t - 1) * S + y] += g * beta;
                }
                if (beta < 1.0) {
                    next_alive[y] += m * (1.0 - beta);
                    next_g[y] += g * (1.0 - beta);
                }
            }
        }
        alive.swap(next_alive);
        alive_g.swap(next_g);
        step_discount *= gamma;
    }
    for (int x = 0; x < S; ++x) {
        dist.residual += alive[x];
        dist.residual_return += alive_g[x];
    }
    return dist;
}

OptionModel empirical_option_model(const Dataset& dataset, double gamma, int n_states,
                                   int n_options) {
    if (!(gamma >= 0.0 && gamma < 1.0)) throw InvalidArgument("gamma must lie in [0,1)");
    OptionModel m = OptionModel::empty(OptionModel::Kind::kEmpirical, n_states,
                                       n_options, gamma);
    struct Acc {
        std::map<int, double> end_mass;  // sum of gamma^T per end state
        long n_model = 0;                // non-truncated samples
        double reward_sum = 0.0;         // discounted reward, non-truncated
        long n_all = 0;
        double duration_sum = 0.0;       // all samples, truncated capped as logged
    };
    std::map<std::size_t, Acc> acc;
    const std::size_t n = dataset.size();
    for (std::size_t i = 0; i < n; ++i) {
        OptionTransition t = dataset.at(i);
        Acc& a = acc[static_cast<std::size_t>(t.start_state) * n_options + t.option_id];
        a.n_all += 1;
        a.duration_sum += t.duration;
        if (t.truncated) continue;
        a.n_model += 1;
        a.end_mass[t.end_state] += std::pow(gamma, t.duration);
        a.reward_sum += t.discounted_reward;
    }
    for (const auto& [key, a] : acc) {
        if (a.n_model == 0) continue;  // stays kMissing
        auto& row = m.rows[key];
        for (const auto& [e, w] : a.end_mass)
            row.emplace_back(e, w / static_cast<double>(a.n_model));
        m.reward[key] = a.reward_sum / static_cast<double>(a.n_model);
        m.length[key] = a.duration_sum / static_cast<double>(a.n_all);
        m.status[key] = EntryStatus::kOk;
    }
    return m;
}

}  // namespace affopt
