#include "affopt/intents.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <tuple>

#include "affopt/taxi.hpp"

namespace affopt {

std::vector<Intent> taxi_intents() {
    static const char* names[8] = {"pickup-at-R", "pickup-at-G", "pickup-at-Y",
                                   "pickup-at-B", "dropped-at-R", "dropped-at-G",
                                   "dropped-at-Y", "dropped-at-B"};
    std::vector<Intent> intents(8);
    for (int i = 0; i < 8; ++i) {
        intents[i].form = Intent::Form::kCompletionPredicate;
        intents[i].predicate = i;
        intents[i].label = names[i];
    }
    return intents;
}

bool intent_completion(const OptionTransition& transition, const Intent& intent,
                       PickupIntentVariant variant) {
    if (intent.form != Intent::Form::kCompletionPredicate)
        throw InvalidArgument("intent_completion needs a completion-predicate intent");
    const int pred = intent.predicate;
    if (pred < 0 || pred >= 8) throw InvalidArgument("unknown taxi intent predicate");
    const taxi::TaxiState start = taxi::decode_state(transition.start_state);
    const taxi::TaxiState end = taxi::decode_state(transition.end_state);
    const auto& depots = taxi::layout().depots;
    if (pred < 4) {  // pickup-at-depot family
        if (end.passenger_location != taxi::kInTaxi) return false;
        if (variant == PickupIntentVariant::kAtDepot) {
            return end.row == depots[pred].first && end.col == depots[pred].second;
        }
        return end.destination == pred &&
               end.row == depots[end.destination].first &&
               end.col == depots[end.destination].second;
    }
    const int depot = pred - 4;  // dropped-at-depot family
    return start.passenger_location == taxi::kInTaxi &&
           end.passenger_location == depot;
}

double intent_satisfaction_zeta(const OptionModel& model, const Intent& intent, int s,
                                int o) {
    if (intent.form != Intent::Form::kTerminalDistribution)
        throw InvalidArgument("zeta needs a terminal-distribution intent");
    const auto& model_row = model.row(s, o);  // raises on missing entries
    if (s >= static_cast<int>(intent.target.size()))
        throw InvalidArgument("intent has no target row for state " + std::to_string(s));
    const auto& target_row = intent.target[s];
    double tv = 0.0;
    std::size_t i = 0, j = 0;
    while (i < model_row.size() || j < target_row.size()) {
        if (j >= target_row.size() ||
            (i < model_row.size() && model_row[i].first < target_row[j].first)) {
            tv += std::abs(model_row[i].second);
            ++i;
        } else if (i >= model_row.size() || target_row[j].first < model_row[i].first) {
            tv += std::abs(target_row[j].second);
            ++j;
        } else {
            tv += std::abs(model_row[i].second - target_row[j].second);
            ++i;
            ++j;
        }
    }
    return tv;
}

AffordanceSet AffordanceSet::none(int n_states, int n_options, std::string provenance) {
    AffordanceSet set;
    set.n_states = n_states;
    set.n_options = n_options;
    set.member.assign(static_cast<std::size_t>(n_states) * n_options, 0);
    set.provenance = std::move(provenance);
    return set;
}

std::size_t AffordanceSet::count() const {
    std::size_t c = 0;
    for (std::uint8_t b : member) c += b;
    return c;
}

std::vector<int> AffordanceSet::options_at(int s) const {
    std::vector<int> out;
    for (int o = 0; o < n_options; ++o)
        if (contains(s, o)) out.push_back(o);
    return out;
}

bool AffordanceSet::subset_of(const AffordanceSet& other) const {
    if (n_states != other.n_states || n_options != other.n_options) return false;
    for (std::size_t i = 0; i < member.size(); ++i)
        if (member[i] && !other.member[i]) return false;
    return true;
}

void AffordanceSet::save(std::ostream& out) const {
    out << "affordances v1\n";
    out << provenance << '\n';
    out << n_states << ' ' << n_options << ' ' << count() << '\n';
    for (int s = 0; s < n_states; ++s)
        for (int o = 0; o < n_options; ++o)
            if (contains(s, o)) out << s << ' ' << o << '\n';
}

AffordanceSet AffordanceSet::load(std::istream& in) {
    std::string tag, version;
    if (!(in >> tag >> version) || tag != "affordances" || version != "v1")
        throw InvalidArgument("bad affordance-set header");
    in.ignore();
    std::string provenance;
    std::getline(in, provenance);
    int S, O;
    std::size_t n;
    if (!(in >> S >> O >> n)) throw InvalidArgument("bad affordance-set dims");
    AffordanceSet set = AffordanceSet::none(S, O, provenance);
    for (std::size_t i = 0; i < n; ++i) {
        int s, o;
        if (!(in >> s >> o)) throw InvalidArgument("truncated affordance list");
        set.set(s, o, true);
    }
    return set;
}

void check_liveness(const AffordanceSet& set,
                    const std::vector<std::uint8_t>& terminal) {
    std::vector<int> bad;
    for (int s = 0; s < set.n_states; ++s) {
        if (!terminal.empty() && terminal[s]) continue;
        bool any = false;
        for (int o = 0; o < set.n_options && !any; ++o) any = set.contains(s, o);
        if (!any) bad.push_back(s);
    }
    if (!bad.empty()) throw LivenessError(std::move(bad));
}

AffordanceSet derive_affordances(const std::vector<Intent>& intents,
                                 const OptionModel& models, double zeta_threshold) {
    if (zeta_threshold < 0.0) throw InvalidArgument("zeta threshold must be >= 0");
    if (static_cast<int>(intents.size()) != models.n_options)
        throw InvalidArgument("need one intent per option");
    AffordanceSet set = AffordanceSet::none(models.n_states, models.n_options,
                                            "zeta-threshold " +
                                                std::to_string(zeta_threshold));
    for (int s = 0; s < models.n_states; ++s) {
        if (models.is_terminal_state(s)) continue;
        double best = std::numeric_limits<double>::infinity();
        int best_o = -1;
        bool any = false;
        for (int o = 0; o < models.n_options; ++o) {
            const double z = intent_satisfaction_zeta(models, intents[o], s, o);
            if (z <= zeta_threshold) {
                set.set(s, o, true);
                any = true;
            }
            if (z < best) {
                best = z;
                best_o = o;
            }
        }
        if (!any && best_o >= 0) {
            set.set(s, best_o, true);
            set.repaired_states.push_back(s);
        }
    }
    return set;
}

AffordanceSet taxi_heuristic_affordances(TaxiAffordanceKind kind) {
    const char* name = kind == TaxiAffordanceKind::kEverything ? "everything"
                       : kind == TaxiAffordanceKind::kPickupDrop
                           ? "pickup-drop"
                           : "pickup-drop-at-goal";
    AffordanceSet set = AffordanceSet::none(taxi::kNumStates, 75, name);
    std::vector<int> option_ids;
    switch (kind) {
        case TaxiAffordanceKind::kEverything:
            for (int o = 0; o < 75; ++o) option_ids.push_back(o);
            break;
        case TaxiAffordanceKind::kPickupDrop:
            for (int o = 25; o < 75; ++o) option_ids.push_back(o);
            break;
        case TaxiAffordanceKind::kPickupDropAtGoal:
            for (const auto& [r, c] : taxi::layout().depots) {
                option_ids.push_back(taxi_pickup_option(r, c));
                option_ids.push_back(taxi_drop_option(r, c));
            }
            break;
    }
    for (int s = 0; s < taxi::kNumStates; ++s)
        for (int o : option_ids) set.set(s, o, true);
    return set;
}

AffordanceClassifier AffordanceClassifier::init(int n_states, int n_options,
                                                int n_intents) {
    AffordanceClassifier c;
    c.n_states = n_states;
    c.n_options = n_options;
    c.n_intents = n_intents;
    c.theta.assign(static_cast<std::size_t>(n_states) * n_options * n_intents, 0.0);
    c.end_weight.assign(n_states, 0.0);
    return c;
}

double AffordanceClassifier::score(int s, int o, int end, int intent) const {
    const double z = theta[idx(s, o, intent)] + end_weight[end] + 2.0;
    return 1.0 / (1.0 + std::exp(-z));
}

double AffordanceClassifier::max_score(int s, int o, int end) const {
    double best = 0.0;
    for (int i = 0; i < n_intents; ++i) best = std::max(best, score(s, o, end, i));
    return best;
}

void train_affordance_classifier(AffordanceClassifier& classifier,
                                 const Dataset& dataset,
                                 const std::vector<Intent>& intents,
                                 const ClassifierTrainOptions& opts) {
    if (opts.steps <= 0) throw InvalidArgument("steps must be positive");
    if (static_cast<int>(intents.size()) != classifier.n_intents)
        throw InvalidArgument("intent count does not match the classifier");
    struct Group {
        int s, o, end;
        double n = 0.0;
        std::vector<bool> completed;
    };
    // Completion labels are a deterministic function of (start, end), so the
    // dataset collapses to (s, o, end) groups with multiplicities.
    std::map<std::tuple<int, int, int>, Group> groups;
    const std::size_t n = dataset.size();
    for (std::size_t i = 0; i < n; ++i) {
        OptionTransition t = dataset.at(i);
        auto key = std::make_tuple(t.start_state, t.option_id, t.end_state);
        auto it = groups.find(key);
        if (it == groups.end()) {
            Group g;
            g.s = t.start_state;
            g.o = t.option_id;
            g.end = t.end_state;
            g.completed.resize(intents.size());
            for (std::size_t k = 0; k < intents.size(); ++k)
                g.completed[k] = intent_completion(t, intents[k], opts.pickup_variant);
            it = groups.emplace(key, std::move(g)).first;
        }
        it->second.n += 1.0;
    }
    for (long step = 0; step < opts.steps; ++step) {
        double loss = 0.0;
        for (auto& [key, g] : groups) {
            double end_grad = 0.0;
            for (int i = 0; i < classifier.n_intents; ++i) {
                const double p = classifier.score(g.s, g.o, g.end, i);
                const double c = g.completed[i] ? 1.0 : 0.0;
                const double grad = g.n * (p - c);
                classifier.theta[classifier.idx(g.s, g.o, i)] -=
                    opts.learning_rate * grad;
                end_grad += grad;
                loss -= g.n * (c * std::log(std::max(p, 1e-12)) +
                               (1.0 - c) * std::log(std::max(1.0 - p, 1e-12)));
            }
            classifier.end_weight[g.end] -= opts.learning_rate * end_grad;
        }
        classifier.update_count += 1;
        if (!std::isfinite(loss))
            throw ConvergenceError("affordance classifier loss went non-finite",
                                   loss);
    }
}

AffordanceSet classifier_affordance_set(const AffordanceClassifier& classifier,
                                        const LearnedModel& model, double k,
                                        const std::vector<std::uint8_t>& terminal,
                                        ClassifierSetMode mode) {
    if (k < 0.0 || k >= 1.0) throw InvalidArgument("threshold k must lie in [0,1)");
    AffordanceSet set = AffordanceSet::none(classifier.n_states, classifier.n_options,
                                            "classifier k=" + std::to_string(k));
    for (int s = 0; s < classifier.n_states; ++s) {
        double best_score = -1.0;
        int best_o = -1;
        for (int o = 0; o < classifier.n_options; ++o) {
            double sc = 0.0;
            if (mode == ClassifierSetMode::kArgmaxEnd) {
                // Most likely end under the model: the largest logit wins; if
                // the shared group wins, any of its ends represents it and we
                // take the lowest index outside the atoms.
                const auto& row = model.logit_rows[model.pair(s, o)];
                int arg_end = -1;
                double best_logit = -std::numeric_limits<double>::infinity();
                for (const auto& [e, z] : row.atoms)
                    if (z > best_logit) {
                        best_logit = z;
                        arg_end = e;
                    }
                if (static_cast<int>(row.atoms.size()) < classifier.n_states &&
                    row.rest > best_logit) {
                    arg_end = -1;
                    for (int e = 0; e < classifier.n_states && arg_end < 0; ++e) {
                        bool is_atom = false;
                        for (const auto& [ae, z] : row.atoms)
                            if (ae == e) is_atom = true;
                        if (!is_atom) arg_end = e;
                    }
                }
                sc = classifier.max_score(s, o, arg_end < 0 ? 0 : arg_end);
            } else {
                std::vector<double> p = model.next_state_distribution(s, o);
                for (int i = 0; i < classifier.n_intents; ++i) {
                    double acc = 0.0;
                    for (int e = 0; e < classifier.n_states; ++e)
                        acc += p[e] * classifier.score(s, o, e, i);
                    sc = std::max(sc, acc);
                }
            }
            if (sc > k) set.set(s, o, true);
            if (sc > best_score) {
                best_score = sc;
                best_o = o;
            }
        }
        const bool is_terminal = !terminal.empty() && terminal[s];
        if (!is_terminal && best_o >= 0) {
            bool any = false;
            for (int o = 0; o < classifier.n_options && !any; ++o)
                any = set.contains(s, o);
            if (!any) {
                set.set(s, best_o, true);
                set.repaired_states.push_back(s);
            }
        }
    }
    return set;
}

}  // namespace affopt
