#include "affopt/generators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace affopt {

TabularMdp random_mdp(int n_states, int n_actions, double gamma, Rng& rng,
                      double reward_min, double reward_max, int max_successors) {
    TabularMdp mdp = TabularMdp::zeros(n_states, n_actions, gamma);
    for (int s = 0; s < n_states; ++s) {
        for (int a = 0; a < n_actions; ++a) {
            const int k = 1 + uniform_int(rng, std::min(max_successors, n_states));
            std::vector<int> succ;
            while (static_cast<int>(succ.size()) < k) {
                int cand = uniform_int(rng, n_states);
                if (std::find(succ.begin(), succ.end(), cand) == succ.end())
                    succ.push_back(cand);
            }
            std::vector<double> w(succ.size());
            double total = 0.0;
            for (double& x : w) {
                x = 0.05 + uniform01(rng);
                total += x;
            }
            for (std::size_t i = 0; i < succ.size(); ++i)
                mdp.p(s, a, succ[i]) = w[i] / total;
            // Exact row normalization for the 1e-12 invariant.
            double row = 0.0;
            for (int s2 = 0; s2 < n_states; ++s2) row += mdp.p(s, a, s2);
            mdp.p(s, a, succ[0]) += 1.0 - row;
            mdp.r(s, a) = reward_min + (reward_max - reward_min) * uniform01(rng);
        }
    }
    mdp.validate();
    return mdp;
}

Option random_option(const TabularMdp& mdp, int id, Rng& rng, double p_beta_one,
                     double beta_min) {
    Option opt;
    opt.id = id;
    opt.initiation.assign(mdp.n_states, 1);
    opt.intra_policy.resize(mdp.n_states);
    opt.termination.resize(mdp.n_states);
    for (int s = 0; s < mdp.n_states; ++s) {
        opt.intra_policy[s] = uniform_int(rng, mdp.n_actions);
        opt.termination[s] = bernoulli(rng, p_beta_one)
                                 ? 1.0
                                 : beta_min + (1.0 - beta_min) * uniform01(rng);
    }
    opt.validate(mdp);
    return opt;
}

SmdpInstance make_instance(const InstanceConfig& config, Rng& rng) {
    SmdpInstance inst;
    inst.config = config;
    inst.mdp = random_mdp(config.n_states, config.n_actions, config.gamma, rng,
                          config.reward_min, config.reward_max);
    for (int o = 0; o < config.n_options; ++o)
        inst.options.options.push_back(
            random_option(inst.mdp, o, rng, config.p_beta_one, config.beta_min));
    inst.exact = exact_models(inst.mdp, inst.options, 1e-12);
    inst.joints.reserve(static_cast<std::size_t>(config.n_states) * config.n_options);
    for (int s = 0; s < config.n_states; ++s)
        for (int o = 0; o < config.n_options; ++o)
            inst.joints.push_back(
                enumerate_trajectories(inst.mdp, inst.options[o], s, config.horizon));
    return inst;
}

std::pair<int, int> sample_outcome(const TrajectoryDistribution& joint, Rng& rng) {
    const double total = joint.total_mass();
    double u = uniform01(rng) * total;
    for (int t = 1; t <= joint.horizon; ++t) {
        for (int e = 0; e < joint.n_states; ++e) {
            u -= joint.cell_mass(t, e);
            if (u < 0.0) return {e, t};
        }
    }
    return {joint.n_states - 1, joint.horizon};
}

PerturbedIntents perturb_intents(const SmdpInstance& instance, double zeta, Rng& rng) {
    if (zeta < 0.0 || zeta > 1.0) throw InvalidArgument("zeta must lie in [0,1]");
    const int S = instance.mdp.n_states;
    const int O = instance.options.size();
    PerturbedIntents out;
    out.joints = instance.joints;

    const double delta = zeta / 2.0;
    for (int s = 0; s < S; ++s) {
        for (int o = 0; o < O; ++o) {
            TrajectoryDistribution& joint = out.joints[static_cast<std::size_t>(s) * O + o];
            if (delta <= 0.0) continue;
            // Collect cells by decreasing mass; move delta in total, each
            // slice to a different end of the same duration.
            std::vector<std::pair<double, std::pair<int, int>>> cells;  // (mass,(t,e))
            for (int t = 1; t <= joint.horizon; ++t)
                for (int e = 0; e < joint.n_states; ++e)
                    if (joint.cell_mass(t, e) > 0.0)
                        cells.push_back({joint.cell_mass(t, e), {t, e}});
            std::sort(cells.begin(), cells.end(),
                      [](const auto& a, const auto& b) { return a.first > b.first; });
            double remaining = delta;
            for (const auto& [mass, cell] : cells) {
                if (remaining <= 1e-15) break;
                const auto [t, e] = cell;
                // Destination: end of minimum mass at the same duration,
                // excluding the source; random tie-break is unnecessary.
                int dest = -1;
                double dest_mass = std::numeric_limits<double>::infinity();
                for (int e2 = 0; e2 < joint.n_states; ++e2) {
                    if (e2 == e) continue;
                    const double m2 = joint.cell_mass(t, e2);
                    if (m2 < dest_mass) {
                        dest_mass = m2;
                        dest = e2;
                    }
                }
                if (dest < 0) continue;
                const double slice = std::min(remaining, mass);
                const double avg_return = joint.cell_return(t, e) / mass;
                auto& src_mass = joint.mass[(t - 1) * joint.n_states + e];
                auto& src_ret = joint.return_sum[(t - 1) * joint.n_states + e];
                auto& dst_mass = joint.mass[(t - 1) * joint.n_states + dest];
                auto& dst_ret = joint.return_sum[(t - 1) * joint.n_states + dest];
                src_mass -= slice;
                src_ret -= slice * avg_return;
                dst_mass += slice;
                dst_ret += slice * avg_return;
                remaining -= slice;
            }
            if (remaining > 1e-9)
                throw InvalidArgument("pair has too little mass for the requested zeta");
        }
    }
    (void)rng;

    // Multi-time rows of the perturbed joints; rewards are unchanged by
    // construction, so the intent model reuses the exact rewards.
    out.intent_model = OptionModel::empty(OptionModel::Kind::kIntent, S, O,
                                          instance.mdp.discount);
    out.intent_model.terminal = instance.mdp.terminal;
    out.intents.resize(O);
    for (int o = 0; o < O; ++o) {
        out.intents[o].option_id = o;
        out.intents[o].form = Intent::Form::kTerminalDistribution;
        out.intents[o].target.resize(S);
    }
    for (int s = 0; s < S; ++s) {
        for (int o = 0; o < O; ++o) {
            const std::size_t i = static_cast<std::size_t>(s) * O + o;
            const TrajectoryDistribution& joint = out.joints[i];
            std::vector<double> row =
                joint.discounted_end_distribution(instance.mdp.discount);
            auto& sparse = out.intent_model.rows[i];
            for (int e = 0; e < S; ++e)
                if (row[e] > 0.0) sparse.emplace_back(e, row[e]);
            out.intents[o].target[s] = sparse;
            out.intent_model.reward[i] = instance.exact.reward[i];
            out.intent_model.length[i] = instance.exact.length[i];
            out.intent_model.status[i] = instance.exact.status[i];

            // Realized degrees of satisfaction.
            double tv_traj = 0.0;
            for (std::size_t c = 0; c < joint.mass.size(); ++c)
                tv_traj += std::abs(joint.mass[c] - instance.joints[i].mass[c]);
            out.zeta_traj = std::max(out.zeta_traj, tv_traj);
            out.zeta_mtm = std::max(
                out.zeta_mtm,
                intent_satisfaction_zeta(instance.exact, out.intents[o], s, o));
        }
    }
    return out;
}

OptionModel empirical_from_samples(const SmdpInstance& instance,
                                   const std::vector<TrajectoryDistribution>& joints,
                                   const AffordanceSet& affordances, int n, Rng& rng) {
    if (n < 1) throw InvalidArgument("need at least one sample per pair");
    const int S = instance.mdp.n_states;
    const int O = instance.options.size();
    Dataset data(S, O);
    for (int s = 0; s < S; ++s) {
        for (int o = 0; o < O; ++o) {
            if (!affordances.contains(s, o)) continue;
            const TrajectoryDistribution& joint =
                joints[static_cast<std::size_t>(s) * O + o];
            for (int i = 0; i < n; ++i) {
                auto [end, duration] = sample_outcome(joint, rng);
                OptionTransition t;
                t.start_state = s;
                t.option_id = o;
                t.end_state = end;
                t.duration = duration;
                data.append(t);
            }
        }
    }
    OptionModel model = empirical_option_model(data, instance.mdp.discount, S, O);
    // The reward function is known; only transitions are estimated.
    model.reward = instance.exact.reward;
    model.terminal = instance.mdp.terminal;
    return model;
}

OptionSet primitive_wrapper_options(const TabularMdp& mdp) {
    OptionSet set;
    for (int a = 0; a < mdp.n_actions; ++a) {
        Option opt;
        opt.id = a;
        opt.initiation.assign(mdp.n_states, 1);
        opt.intra_policy.assign(mdp.n_states, a);
        opt.termination.assign(mdp.n_states, 1.0);
        set.options.push_back(std::move(opt));
    }
    return set;
}

}  // namespace affopt
