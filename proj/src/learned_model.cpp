#include "affopt/learned_model.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>

namespace affopt {

namespace {
constexpr double kProbFloor = 1e-12;

// Stable softmax pieces of a compressed row over S total ends.
struct RowSoftmax {
    double denom = 0.0;       // sum of exp(logit - shift) over all S ends
    double rest_exp = 0.0;    // exp(rest - shift)
    double shift = 0.0;
    std::vector<double> atom_exp;  // aligned with row.atoms
};

RowSoftmax row_softmax(const LearnedModel::LogitRow& row, int n_states) {
    RowSoftmax sm;
    sm.shift = row.rest;
    for (const auto& [e, z] : row.atoms) sm.shift = std::max(sm.shift, z);
    sm.rest_exp = std::exp(row.rest - sm.shift);
    sm.atom_exp.reserve(row.atoms.size());
    double atom_sum = 0.0;
    for (const auto& [e, z] : row.atoms) {
        sm.atom_exp.push_back(std::exp(z - sm.shift));
        atom_sum += sm.atom_exp.back();
    }
    const int rest_count = n_states - static_cast<int>(row.atoms.size());
    sm.denom = atom_sum + rest_count * sm.rest_exp;
    return sm;
}

int find_atom(const LearnedModel::LogitRow& row, int end) {
    auto it = std::lower_bound(row.atoms.begin(), row.atoms.end(), end,
                               [](const auto& a, int e) { return a.first < e; });
    if (it != row.atoms.end() && it->first == end)
        return static_cast<int>(it - row.atoms.begin());
    return -1;
}

}  // namespace

LearnedModel LearnedModel::init(int n_states, int n_options, double learning_rate,
                                double reward_init) {
    if (n_states <= 0 || n_options <= 0)
        throw InvalidArgument("model dimensions must be positive");
    LearnedModel m;
    m.n_states = n_states;
    m.n_options = n_options;
    m.learning_rate = learning_rate;
    m.reward_init = reward_init;
    const std::size_t n = static_cast<std::size_t>(n_states) * n_options;
    m.logit_rows.assign(n, {});
    m.duration.assign(n, 1.0);
    m.reward.assign(n, reward_init);
    m.pair_updates.assign(n, 0);
    return m;
}

double LearnedModel::logit(int s, int o, int end) const {
    const LogitRow& row = logit_rows[pair(s, o)];
    int i = find_atom(row, end);
    return i >= 0 ? row.atoms[i].second : row.rest;
}

void LearnedModel::set_logit(int s, int o, int end, double value) {
    LogitRow& row = logit_rows[pair(s, o)];
    int i = find_atom(row, end);
    if (i >= 0) {
        row.atoms[i].second = value;
        return;
    }
    auto it = std::lower_bound(row.atoms.begin(), row.atoms.end(), end,
                               [](const auto& a, int e) { return a.first < e; });
    row.atoms.insert(it, {end, value});
}

double LearnedModel::prob(int s, int o, int end) const {
    const LogitRow& row = logit_rows[pair(s, o)];
    RowSoftmax sm = row_softmax(row, n_states);
    int i = find_atom(row, end);
    double num = i >= 0 ? sm.atom_exp[i] : sm.rest_exp;
    return num / sm.denom;
}

std::vector<double> LearnedModel::next_state_distribution(int s, int o) const {
    const LogitRow& row = logit_rows[pair(s, o)];
    RowSoftmax sm = row_softmax(row, n_states);
    std::vector<double> out(n_states, sm.rest_exp / sm.denom);
    for (std::size_t i = 0; i < row.atoms.size(); ++i)
        out[row.atoms[i].first] = sm.atom_exp[i] / sm.denom;
    return out;
}

void LearnedModel::save(std::ostream& out) const {
    out.precision(17);
    out << "affopt-lm v1\n";
    out << n_states << ' ' << n_options << ' ' << learning_rate << ' ' << reward_init
        << ' ' << update_count << ' ' << clamp_count << '\n';
    for (std::size_t i = 0; i < logit_rows.size(); ++i) {
        const LogitRow& row = logit_rows[i];
        out << row.atoms.size() << ' ' << row.rest;
        for (const auto& [e, z] : row.atoms) out << ' ' << e << ' ' << z;
        out << ' ' << duration[i] << ' ' << reward[i] << ' ' << pair_updates[i]
            << '\n';
    }
}

LearnedModel LearnedModel::load(std::istream& in) {
    std::string tag, version;
    if (!(in >> tag >> version) || tag != "affopt-lm" || version != "v1")
        throw InvalidArgument("bad learned-model header");
    int S, O;
    double lr, rinit;
    long updates, clamps;
    if (!(in >> S >> O >> lr >> rinit >> updates >> clamps))
        throw InvalidArgument("bad learned-model dims");
    LearnedModel m = init(S, O, lr, rinit);
    m.update_count = updates;
    m.clamp_count = clamps;
    for (std::size_t i = 0; i < m.logit_rows.size(); ++i) {
        std::size_t k;
        if (!(in >> k >> m.logit_rows[i].rest))
            throw InvalidArgument("truncated learned-model row");
        m.logit_rows[i].atoms.resize(k);
        for (auto& [e, z] : m.logit_rows[i].atoms)
            if (!(in >> e >> z)) throw InvalidArgument("truncated learned-model row");
        if (!(in >> m.duration[i] >> m.reward[i] >> m.pair_updates[i]))
            throw InvalidArgument("truncated learned-model row");
    }
    return m;
}

double masked_loss(LearnedModel& model, const std::vector<OptionTransition>& batch,
                   const TransitionMask& mask) {
    if (batch.empty()) throw InvalidArgument("masked_loss needs a non-empty batch");
    double loss = 0.0;
    for (const OptionTransition& t : batch) {
        const double a = mask(t);
        if (a == 0.0) continue;
        double p = model.prob(t.start_state, t.option_id, t.end_state);
        if (p < kProbFloor) {
            p = kProbFloor;
            model.clamp_count += 1;
        }
        const double dl = model.duration_at(t.start_state, t.option_id) - t.duration;
        const double dr = model.reward_at(t.start_state, t.option_id) - t.reward;
        loss += a * (-std::log(p) + dl * dl + dr * dr);
    }
    return loss;
}

MaskedLossGradient masked_loss_gradient(const LearnedModel& model,
                                        const std::vector<OptionTransition>& batch,
                                        const TransitionMask& mask) {
    if (batch.empty()) throw InvalidArgument("masked_loss needs a non-empty batch");
    // Group the batch by pair: weights per end state plus head statistics.
    struct Stats {
        std::map<int, double> end_weight;
        double w = 0.0;
        double wt = 0.0;  // weight * duration
        double wr = 0.0;  // weight * reward target
    };
    std::map<std::size_t, Stats> grouped;
    for (const OptionTransition& t : batch) {
        const double a = mask(t);
        if (a == 0.0) continue;
        Stats& st = grouped[model.pair(t.start_state, t.option_id)];
        st.w += a;
        st.wt += a * t.duration;
        st.wr += a * t.reward;
        st.end_weight[t.end_state] += a;
    }
    MaskedLossGradient grad;
    for (const auto& [pair_idx, st] : grouped) {
        MaskedLossGradient::PairGrad pg;
        pg.pair = pair_idx;
        const LearnedModel::LogitRow& row = model.logit_rows[pair_idx];
        RowSoftmax sm = row_softmax(row, model.n_states);
        const double p_rest = sm.rest_exp / sm.denom;
        // d/dz_j of sum_i -a_i log p(end_i) = w * p_j - weight(j).
        pg.rest_logit = st.w * p_rest;
        for (const auto& [end, w_end] : st.end_weight) {
            int i = find_atom(row, end);
            double p = i >= 0 ? sm.atom_exp[i] / sm.denom : p_rest;
            pg.logit.emplace_back(end, st.w * p - w_end);
        }
        // Ends observed in the batch leave the shared group; atoms already
        // explicit also differ from the shared gradient. Both are listed.
        for (std::size_t i = 0; i < row.atoms.size(); ++i) {
            int end = row.atoms[i].first;
            if (st.end_weight.count(end)) continue;
            pg.logit.emplace_back(end, st.w * (sm.atom_exp[i] / sm.denom));
        }
        pg.duration = 2.0 * (st.w * model.duration[pair_idx] - st.wt);
        pg.reward = 2.0 * (st.w * model.reward[pair_idx] - st.wr);
        grad.pairs.push_back(std::move(pg));
    }
    return grad;
}

BatchStats::BatchStats(int n_states, int n_options)
    : n_options_(n_options),
      entries_(static_cast<std::size_t>(n_states) * n_options) {}

void BatchStats::add(const OptionTransition& t, double a,
                     bool duration_only_when_truncated) {
    if (a == 0.0) return;
    const std::size_t pair =
        static_cast<std::size_t>(t.start_state) * n_options_ + t.option_id;
    Entry& st = entries_[pair];
    if (st.w_dur == 0.0 && st.w_model == 0.0) touched_.push_back(pair);
    st.w_dur += a;
    st.wt += a * t.duration;
    st.wt2 += a * static_cast<double>(t.duration) * t.duration;
    total_weight_ += a;
    if (duration_only_when_truncated && t.truncated) return;
    st.w_model += a;
    st.wr += a * t.reward;
    st.wr2 += a * t.reward * t.reward;
    auto it = std::lower_bound(st.end_weight.begin(), st.end_weight.end(),
                               t.end_state,
                               [](const auto& p, int e) { return p.first < e; });
    if (it != st.end_weight.end() && it->first == t.end_state)
        it->second += a;
    else
        st.end_weight.insert(it, {t.end_state, a});
}

void BatchStats::clear() {
    for (std::size_t pair : touched_) entries_[pair] = Entry{};
    touched_.clear();
    total_weight_ = 0.0;
}

double apply_masked_gradient_step(LearnedModel& model, const BatchStats& stats,
                                  double learning_rate) {
    const double lr = learning_rate;
    double loss = 0.0;
    for (std::size_t pair_idx : stats.touched()) {
        const BatchStats::Entry& st = stats.entry(pair_idx);
        LearnedModel::LogitRow& row = model.logit_rows[pair_idx];
        // Ends with data get their own logit before the shared update.
        for (const auto& [end, w] : st.end_weight) {
            if (find_atom(row, end) < 0) {
                auto it = std::lower_bound(
                    row.atoms.begin(), row.atoms.end(), end,
                    [](const auto& a2, int e) { return a2.first < e; });
                row.atoms.insert(it, {end, row.rest});
            }
        }
        if (st.w_model > 0.0) {
            RowSoftmax sm = row_softmax(row, model.n_states);
            const double p_rest = sm.rest_exp / sm.denom;
            auto w_it = st.end_weight.begin();
            for (std::size_t i = 0; i < row.atoms.size(); ++i) {
                const double p = sm.atom_exp[i] / sm.denom;
                while (w_it != st.end_weight.end() && w_it->first < row.atoms[i].first)
                    ++w_it;
                double w_end = 0.0;
                if (w_it != st.end_weight.end() && w_it->first == row.atoms[i].first)
                    w_end = w_it->second;
                row.atoms[i].second -= lr * (st.w_model * p - w_end);
                if (w_end > 0.0) {
                    double pc = std::max(p, kProbFloor);
                    if (p < kProbFloor) model.clamp_count += 1;
                    loss -= w_end * std::log(pc);
                }
            }
            row.rest -= lr * st.w_model * p_rest;
        }
        double& dur = model.duration[pair_idx];
        double& rew = model.reward[pair_idx];
        loss += st.w_dur * dur * dur - 2.0 * dur * st.wt + st.wt2;
        loss += st.w_model * rew * rew - 2.0 * rew * st.wr + st.wr2;
        dur -= lr * 2.0 * (st.w_dur * dur - st.wt);
        rew -= lr * 2.0 * (st.w_model * rew - st.wr);
        model.pair_updates[pair_idx] += 1;
    }
    model.update_count += 1;
    return stats.total_weight() > 0.0 ? loss / stats.total_weight() : 0.0;
}

TrainResult train_partial_model(LearnedModel& model, const Dataset& dataset,
                                const TransitionMask& mask, const TrainOptions& opts,
                                Rng& rng) {
    if (opts.steps <= 0) throw InvalidArgument("steps must be positive");
    TrainResult res;
    const std::size_t n = dataset.size();
    if (n == 0) return res;

    model.learning_rate = opts.learning_rate;

    // Full-batch statistics are computed once; the mask is fixed for the call.
    BatchStats full(model.n_states, model.n_options);
    if (opts.batch_size == 0) {
        for (std::size_t i = 0; i < n; ++i) {
            OptionTransition t = dataset.at(i);
            full.add(t, mask(t), opts.duration_only_when_truncated);
        }
    }

    BatchStats batch(model.n_states, model.n_options);
    for (long step = 0; step < opts.steps; ++step) {
        const BatchStats* stats = &full;
        if (opts.batch_size > 0) {
            batch.clear();
            for (int b = 0; b < opts.batch_size; ++b) {
                OptionTransition t = dataset.at(
                    static_cast<std::size_t>(uniform_int(rng, static_cast<int>(n))));
                batch.add(t, mask(t), opts.duration_only_when_truncated);
            }
            stats = &batch;
        }
        res.last_loss = apply_masked_gradient_step(model, *stats, opts.learning_rate);
        if (!std::isfinite(res.last_loss) || res.last_loss > opts.divergence_threshold) {
            res.diverged = true;
            res.halted_at_step = step;
            return res;
        }
    }
    return res;
}

LearnedModel train_partial_model(const Dataset& dataset, const TransitionMask& mask,
                                 int n_states, int n_options, const TrainOptions& opts,
                                 Rng& rng, TrainResult* result) {
    LearnedModel model = LearnedModel::init(n_states, n_options, opts.learning_rate);
    TrainResult res = train_partial_model(model, dataset, mask, opts, rng);
    if (result) *result = res;
    return model;
}

double LearnedPlanModel::expected_value(int s, int o, const std::vector<double>& v,
                                        double v_sum) const {
    const std::size_t pair_idx = model->pair(s, o);
    const LearnedModel::LogitRow& row = model->logit_rows[pair_idx];
    RowSoftmax sm = row_softmax(row, model->n_states);
    double atom_dot = 0.0, atom_vsum = 0.0;
    for (std::size_t i = 0; i < row.atoms.size(); ++i) {
        atom_dot += sm.atom_exp[i] * v[row.atoms[i].first];
        atom_vsum += v[row.atoms[i].first];
    }
    const double expectation =
        (atom_dot + sm.rest_exp * (v_sum - atom_vsum)) / sm.denom;
    const double horizon = std::max(1.0, model->duration[pair_idx]);
    return std::pow(gamma, horizon) * expectation;
}

}  // namespace affopt
