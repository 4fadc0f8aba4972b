#include "affopt/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <fstream>
#include <istream>
#include <memory>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "affopt/taxi.hpp"

namespace affopt {

namespace {

using Clock = std::chrono::steady_clock;

long elapsed_ms(Clock::time_point since) {
    return std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - since)
        .count();
}

struct TaxiContext {
    TabularMdp mdp;
    OptionSet options;
    std::vector<Intent> intents;
};

TaxiContext build_context(const ExperimentConfig& config) {
    if (config.environment != "taxi")
        throw InvalidArgument("unknown environment: " + config.environment);
    TaxiContext ctx;
    ctx.mdp = taxi::build_taxi_mdp(config.gamma);
    ctx.options = pretrain_taxi_options(ctx.mdp);
    ctx.intents = taxi_intents();
    return ctx;
}

AffordanceSet resolve_static_set(const std::string& name) {
    if (name == "everything")
        return taxi_heuristic_affordances(TaxiAffordanceKind::kEverything);
    if (name == "pickup-drop")
        return taxi_heuristic_affordances(TaxiAffordanceKind::kPickupDrop);
    if (name == "pickup-drop-at-goal")
        return taxi_heuristic_affordances(TaxiAffordanceKind::kPickupDropAtGoal);
    throw InvalidArgument("unknown affordance set: " + name);
}

struct EvalOutcome {
    double success = 0.0;
    long plan_set_size = 0;
    long learned_set_size = 0;
};

EvalOutcome evaluate_model(const TaxiContext& ctx, const ExperimentConfig& config,
                           const LearnedModel& model,
                           const AffordanceClassifier* classifier,
                           std::uint64_t seed, int eval_index) {
    AffordanceSet plan_set =
        config.plan_affordances == "classifier"
            ? classifier_affordance_set(*classifier, model,
                                        config.classifier_threshold,
                                        ctx.mdp.terminal)
            : resolve_static_set(config.plan_affordances);
    EvalOutcome out;
    out.plan_set_size = static_cast<long>(plan_set.count());
    if (classifier) {
        AffordanceSet learned = classifier_affordance_set(
            *classifier, model, config.classifier_threshold, ctx.mdp.terminal);
        out.learned_set_size = static_cast<long>(learned.count());
    }
    LearnedPlanModel view{&model, config.gamma, ctx.mdp.terminal};
    QviResult plan = smdp_qvi(view, plan_set, config.planner_epochs,
                              config.planner_tol);
    OptionPolicy policy = policy_over_options(plan.q, plan_set, ctx.mdp.terminal);
    Rng eval_rng = split_rng(seed, 0xeba1000000000000ULL + eval_index);
    out.success = evaluate_success(ctx.mdp, policy, ctx.options,
                                   config.episodes_per_eval, config.eval_cap,
                                   eval_rng);
    return out;
}

// Shared per-seed state of the sequential pipeline.
struct SeedRun {
    const TaxiContext& ctx;
    const ExperimentConfig& config;
    std::uint64_t seed;
    Dataset dataset;
    LearnedModel model;
    AffordanceClassifier classifier;
    BatchStats stats;
    std::size_t ingested = 0;  // transitions already in `stats` (static mask)
    AffordanceSet static_train_set;
    bool classifier_collect = false;

    SeedRun(const TaxiContext& c, const ExperimentConfig& cfg, std::uint64_t sd)
        : ctx(c), config(cfg), seed(sd),
          dataset(c.mdp.n_states, c.options.size()),
          model(LearnedModel::init(c.mdp.n_states, c.options.size(),
                                   cfg.learning_rate, cfg.reward_head_init)),
          classifier(AffordanceClassifier::init(c.mdp.n_states, c.options.size(),
                                                static_cast<int>(c.intents.size()))),
          stats(c.mdp.n_states, c.options.size()),
          static_train_set(AffordanceSet::none(1, 1, "unset")) {
        if (cfg.train_affordances == "classifier") {
            if (!cfg.classifier_enabled)
                throw InvalidArgument(
                    "train_affordances=classifier needs classifier_enabled");
            classifier_collect = true;
        } else {
            static_train_set = resolve_static_set(cfg.train_affordances);
        }
    }

    AffordanceSet current_train_set() {
        if (!classifier_collect) return static_train_set;
        return classifier_affordance_set(classifier, model,
                                         config.classifier_threshold,
                                         ctx.mdp.terminal);
    }

    // Brings `stats` up to date with the dataset under the current mask.
    void refresh_stats() {
        if (!classifier_collect) {
            const std::size_t n = dataset.size();
            for (; ingested < n; ++ingested) {
                OptionTransition t = dataset.at(ingested);
                stats.add(t,
                          static_train_set.contains(t.start_state, t.option_id) ? 1.0
                                                                                : 0.0,
                          true);
            }
            return;
        }
        // Classifier masks move with training; rebuild from scratch.
        stats.clear();
        const std::size_t n = dataset.size();
        for (std::size_t i = 0; i < n; ++i) {
            OptionTransition t = dataset.at(i);
            const double a = classifier.max_score(t.start_state, t.option_id,
                                                  t.end_state) >
                                     config.classifier_threshold
                                 ? 1.0
                                 : 0.0;
            stats.add(t, a, true);
        }
        ingested = n;
    }
};

RunStatus run_seed_sequential(const TaxiContext& ctx, const ExperimentConfig& config,
                              std::uint64_t seed, std::vector<ResultRow>& rows) {
    RunStatus status;
    status.seed = seed;
    SeedRun run(ctx, config, seed);
    Rng collect_rng = split_rng(seed, 1);
    const auto t0 = Clock::now();

    long transitions = 0;
    long updates = 0;
    long next_eval = config.eval_cadence_updates;
    int eval_index = 0;
    auto initial = [](Rng& r) { return taxi::sample_initial_state(r); };
    ClassifierTrainOptions clf_opts;
    clf_opts.learning_rate = config.classifier_learning_rate;
    clf_opts.steps = 2;
    clf_opts.pickup_variant = config.pickup_variant;

    try {
        while (transitions < config.max_transitions) {
            AffordanceSet train_set = run.current_train_set();
            auto selector = [&train_set](int s) { return train_set.options_at(s); };
            collect_transitions_into(ctx.mdp, ctx.options, selector, initial,
                                     config.collect_per_round, config.t_max,
                                     collect_rng, run.dataset);
            transitions += config.collect_per_round;

            if (config.classifier_enabled)
                train_affordance_classifier(run.classifier, run.dataset, ctx.intents,
                                            clf_opts);
            run.refresh_stats();
            for (int u = 0; u < config.updates_per_round; ++u) {
                const double loss = apply_masked_gradient_step(run.model, run.stats,
                                                               config.learning_rate);
                ++updates;
                if (!std::isfinite(loss) || loss > config.divergence_threshold) {
                    status.failed = true;
                    status.diverged = true;
                    status.halted_at_step = updates;
                    status.message = "training diverged (mean batch loss " +
                                     std::to_string(loss) + ")";
                    return status;
                }
            }

            if (updates >= next_eval) {
                next_eval += config.eval_cadence_updates;
                EvalOutcome ev = evaluate_model(
                    ctx, config, run.model,
                    config.classifier_enabled ? &run.classifier : nullptr, seed,
                    eval_index++);
                ResultRow row;
                row.seed = seed;
                row.env_transitions = transitions;
                row.learner_updates = updates;
                row.success_rate = ev.success;
                row.train_set_size = static_cast<long>(train_set.count());
                row.plan_set_size = ev.plan_set_size;
                row.learned_set_size = ev.learned_set_size;
                row.wall_ms = elapsed_ms(t0);
                rows.push_back(row);
                if (config.stop_at_success > 0.0 &&
                    ev.success >= config.stop_at_success)
                    break;
            }
        }
    } catch (const std::exception& e) {
        status.failed = true;
        status.message = e.what();
    }
    return status;
}

RunStatus run_seed_concurrent(const TaxiContext& ctx, const ExperimentConfig& config,
                              std::uint64_t seed, std::vector<ResultRow>& rows) {
    RunStatus status;
    status.seed = seed;
    const auto t0 = Clock::now();

    Dataset dataset(ctx.mdp.n_states, ctx.options.size());
    std::atomic<long> transitions_issued{0};
    std::atomic<bool> stop{false};
    std::atomic<bool> collectors_done{false};
    std::atomic<bool> trainer_done{false};

    // Published parameter snapshots; the trainer is the only writer.
    struct Snapshot {
        std::shared_ptr<const LearnedModel> model;
        std::shared_ptr<const AffordanceClassifier> classifier;
        long updates = 0;
    };
    std::mutex snap_mu;
    Snapshot snapshot;
    {
        std::lock_guard<std::mutex> lock(snap_mu);
        snapshot.model = std::make_shared<LearnedModel>(
            LearnedModel::init(ctx.mdp.n_states, ctx.options.size(),
                               config.learning_rate, config.reward_head_init));
        snapshot.classifier = std::make_shared<AffordanceClassifier>(
            AffordanceClassifier::init(ctx.mdp.n_states, ctx.options.size(),
                                       static_cast<int>(ctx.intents.size())));
    }
    auto read_snapshot = [&] {
        std::lock_guard<std::mutex> lock(snap_mu);
        return snapshot;
    };

    std::mutex rows_mu;
    std::mutex error_mu;
    std::string first_error;
    auto record_error = [&](const std::string& what) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (first_error.empty()) first_error = what;
        stop.store(true);
    };

    const bool classifier_collect = config.train_affordances == "classifier";
    AffordanceSet static_train_set =
        classifier_collect ? AffordanceSet::none(1, 1, "unset")
                           : resolve_static_set(config.train_affordances);

    std::vector<std::thread> workers;
    for (int w = 0; w < std::max(1, config.workers); ++w) {
        workers.emplace_back([&, w] {
            try {
                Rng rng = split_rng(seed, 100 + w);
                auto initial = [](Rng& r) { return taxi::sample_initial_state(r); };
                const int chunk = 100;
                while (!stop.load()) {
                    long issued = transitions_issued.fetch_add(chunk);
                    if (issued >= config.max_transitions) {
                        transitions_issued.fetch_sub(chunk);
                        break;
                    }
                    while (!stop.load() &&
                           dataset.size() >
                               static_cast<std::size_t>(config.buffer_capacity))
                        std::this_thread::sleep_for(std::chrono::milliseconds(1));
                    AffordanceSet train_set =
                        classifier_collect
                            ? [&] {
                                  Snapshot snap = read_snapshot();
                                  return classifier_affordance_set(
                                      *snap.classifier, *snap.model,
                                      config.classifier_threshold, ctx.mdp.terminal);
                              }()
                            : static_train_set;
                    auto selector = [&train_set](int s) {
                        return train_set.options_at(s);
                    };
                    collect_transitions_into(ctx.mdp, ctx.options, selector, initial,
                                             chunk, config.t_max, rng, dataset);
                }
            } catch (const std::exception& e) {
                record_error(e.what());
            }
        });
    }

    std::thread trainer([&] {
        try {
            LearnedModel model =
                LearnedModel::init(ctx.mdp.n_states, ctx.options.size(),
                                   config.learning_rate, config.reward_head_init);
            AffordanceClassifier classifier = AffordanceClassifier::init(
                ctx.mdp.n_states, ctx.options.size(),
                static_cast<int>(ctx.intents.size()));
            BatchStats stats(ctx.mdp.n_states, ctx.options.size());
            std::size_t ingested = 0;
            long updates = 0;
            ClassifierTrainOptions clf_opts;
            clf_opts.learning_rate = config.classifier_learning_rate;
            clf_opts.steps = 2;
            clf_opts.pickup_variant = config.pickup_variant;
            while (!stop.load()) {
                const std::size_t n = dataset.size();
                if (n < ingested + static_cast<std::size_t>(config.collect_per_round)) {
                    if (collectors_done.load() && n == ingested) break;
                    std::this_thread::sleep_for(std::chrono::milliseconds(1));
                    continue;
                }
                if (config.classifier_enabled)
                    train_affordance_classifier(classifier, dataset, ctx.intents,
                                                clf_opts);
                if (!classifier_collect) {
                    for (; ingested < n; ++ingested) {
                        OptionTransition t = dataset.at(ingested);
                        stats.add(t,
                                  static_train_set.contains(t.start_state,
                                                            t.option_id)
                                      ? 1.0
                                      : 0.0,
                                  true);
                    }
                } else {
                    stats.clear();
                    for (std::size_t i = 0; i < n; ++i) {
                        OptionTransition t = dataset.at(i);
                        const double a =
                            classifier.max_score(t.start_state, t.option_id,
                                                 t.end_state) >
                                    config.classifier_threshold
                                ? 1.0
                                : 0.0;
                        stats.add(t, a, true);
                    }
                    ingested = n;
                }
                for (int u = 0; u < config.updates_per_round && !stop.load(); ++u) {
                    const double loss =
                        apply_masked_gradient_step(model, stats,
                                                   config.learning_rate);
                    ++updates;
                    if (!std::isfinite(loss) ||
                        loss > config.divergence_threshold) {
                        record_error("training diverged (mean batch loss " +
                                     std::to_string(loss) + ")");
                        status.diverged = true;
                        status.halted_at_step = updates;
                        break;
                    }
                }
                {
                    std::lock_guard<std::mutex> lock(snap_mu);
                    snapshot.model = std::make_shared<LearnedModel>(model);
                    snapshot.classifier =
                        std::make_shared<AffordanceClassifier>(classifier);
                    snapshot.updates = updates;
                }
            }
        } catch (const std::exception& e) {
            record_error(e.what());
        }
        trainer_done.store(true);
    });

    std::thread evaluator([&] {
        try {
            long next_eval = config.eval_cadence_updates;
            int eval_index = 0;
            while (true) {
                Snapshot snap = read_snapshot();
                const bool done = trainer_done.load();
                if (snap.updates >= next_eval || (done && snap.updates > 0)) {
                    next_eval = snap.updates + config.eval_cadence_updates;
                    EvalOutcome ev = evaluate_model(
                        ctx, config, *snap.model,
                        config.classifier_enabled ? snap.classifier.get() : nullptr,
                        seed, eval_index++);
                    ResultRow row;
                    row.seed = seed;
                    row.env_transitions = transitions_issued.load();
                    row.learner_updates = snap.updates;
                    row.success_rate = ev.success;
                    row.train_set_size =
                        classifier_collect ? ev.learned_set_size
                                           : static_cast<long>(
                                                 static_train_set.count());
                    row.plan_set_size = ev.plan_set_size;
                    row.learned_set_size = ev.learned_set_size;
                    row.wall_ms = elapsed_ms(t0);
                    {
                        std::lock_guard<std::mutex> lock(rows_mu);
                        rows.push_back(row);
                    }
                    if (config.stop_at_success > 0.0 &&
                        ev.success >= config.stop_at_success)
                        stop.store(true);
                }
                if (done) break;
                if (stop.load() && trainer_done.load()) break;
                std::this_thread::sleep_for(std::chrono::milliseconds(1));
            }
        } catch (const std::exception& e) {
            record_error(e.what());
        }
    });

    for (auto& w : workers) w.join();
    collectors_done.store(true);
    trainer.join();
    evaluator.join();
    {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!first_error.empty()) {
            status.failed = true;
            status.message = first_error;
        }
    }
    return status;
}

}  // namespace

void ExperimentConfig::validate() const {
    if (seeds.empty()) throw InvalidArgument("at least one seed is required");
    for (std::size_t i = 0; i < seeds.size(); ++i)
        for (std::size_t j = i + 1; j < seeds.size(); ++j)
            if (seeds[i] == seeds[j]) throw InvalidArgument("seeds must be distinct");
    if (max_transitions <= 0 || collect_per_round <= 0 || updates_per_round <= 0 ||
        eval_cadence_updates <= 0 || episodes_per_eval <= 0 || t_max <= 0)
        throw InvalidArgument("budgets and cadences must be positive");
    if (!(gamma >= 0.0 && gamma < 1.0)) throw InvalidArgument("gamma must be in [0,1)");
    if (train_affordances != "classifier") resolve_static_set(train_affordances);
    if (plan_affordances == "classifier" && !classifier_enabled)
        throw InvalidArgument("plan_affordances=classifier needs classifier_enabled");
    if (plan_affordances != "classifier") resolve_static_set(plan_affordances);
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
    config.validate();
    TaxiContext ctx = build_context(config);
    ExperimentResult result;
    for (std::uint64_t seed : config.seeds) {
        std::vector<ResultRow> rows;
        RunStatus status =
            config.mode == RunMode::kSequential
                ? run_seed_sequential(ctx, config, seed, rows)
                : run_seed_concurrent(ctx, config, seed, rows);
        result.rows.insert(result.rows.end(), rows.begin(), rows.end());
        result.statuses.push_back(std::move(status));
    }
    return result;
}

void write_result_rows(const std::vector<ResultRow>& rows, std::ostream& out) {
    out << "seed,env_transitions,learner_updates,success_rate,train_set_size,"
           "plan_set_size,learned_set_size,wall_ms\n";
    out.precision(17);
    for (const ResultRow& r : rows) {
        out << r.seed << ',' << r.env_transitions << ',' << r.learner_updates << ','
            << r.success_rate << ',' << r.train_set_size << ',' << r.plan_set_size
            << ',' << r.learned_set_size << ',' << r.wall_ms << '\n';
    }
}

std::vector<ResultRow> read_result_rows(std::istream& in) {
    std::vector<ResultRow> rows;
    std::string line;
    if (!std::getline(in, line)) throw InvalidArgument("empty result table");
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        ResultRow r;
        char c;
        if (!(ss >> r.seed >> c >> r.env_transitions >> c >> r.learner_updates >> c >>
              r.success_rate >> c >> r.train_set_size >> c >> r.plan_set_size >> c >>
              r.learned_set_size >> c >> r.wall_ms))
            throw InvalidArgument("malformed result row: " + line);
        if (r.success_rate < 0.0 || r.success_rate > 1.0)
            throw InvalidArgument("success rate out of range: " + line);
        rows.push_back(r);
    }
    return rows;
}

bool rows_equal_ignoring_wall(const std::vector<ResultRow>& a,
                              const std::vector<ResultRow>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].seed != b[i].seed || a[i].env_transitions != b[i].env_transitions ||
            a[i].learner_updates != b[i].learner_updates ||
            a[i].success_rate != b[i].success_rate ||
            a[i].train_set_size != b[i].train_set_size ||
            a[i].plan_set_size != b[i].plan_set_size ||
            a[i].learned_set_size != b[i].learned_set_size)
            return false;
    }
    return true;
}

std::optional<long> transitions_to_success(const std::vector<ResultRow>& rows,
                                           std::uint64_t seed, double threshold) {
    std::optional<long> best;
    for (const ResultRow& r : rows) {
        if (r.seed != seed || r.success_rate < threshold) continue;
        if (!best || r.env_transitions < *best) best = r.env_transitions;
    }
    return best;
}

std::vector<SweepPoint> run_learned_affordance_sweep(const ExperimentConfig& config,
                                                     double success_target) {
    if (!config.classifier_enabled)
        throw InvalidArgument("the sweep needs classifier_enabled");
    std::vector<SweepPoint> points;
    for (double k : config.k_sweep) {
        ExperimentConfig point_config = config;
        point_config.classifier_threshold = k;
        SweepPoint point;
        point.k = k;
        point.result = run_experiment(point_config);
        // Mean of the per-seed final learned-set sizes.
        double size_sum = 0.0;
        int size_count = 0;
        for (std::uint64_t seed : point_config.seeds) {
            long last = -1;
            for (const ResultRow& r : point.result.rows)
                if (r.seed == seed) last = r.learned_set_size;
            if (last >= 0) {
                size_sum += static_cast<double>(last);
                ++size_count;
            }
        }
        point.final_set_size =
            size_count > 0 ? static_cast<long>(size_sum / size_count) : 0;
        // Earliest crossing over the configured seeds (mean of those that
        // crossed keeps censored runs from hiding slow thresholds).
        double sum = 0.0;
        int crossed = 0;
        for (std::uint64_t seed : point_config.seeds) {
            auto t = transitions_to_success(point.result.rows, seed, success_target);
            if (t) {
                sum += static_cast<double>(*t);
                ++crossed;
            }
        }
        if (crossed > 0)
            point.transitions_to_target = static_cast<long>(sum / crossed);
        points.push_back(std::move(point));
    }
    return points;
}

namespace {

std::vector<Intent> exact_model_intents(const OptionModel& exact) {
    std::vector<Intent> intents(exact.n_options);
    for (int o = 0; o < exact.n_options; ++o) {
        intents[o].option_id = o;
        intents[o].form = Intent::Form::kTerminalDistribution;
        intents[o].target.resize(exact.n_states);
        for (int s = 0; s < exact.n_states; ++s)
            if (exact.entry_status(s, o) != EntryStatus::kMissing)
                intents[o].target[s] = exact.rows[exact.idx(s, o)];
    }
    return intents;
}

BoundReport assemble_report(const DiscountSummary& summary, double g_inf,
                            double zeta_p, int n_states, double gamma,
                            long n_samples, double af_size, double log_pi,
                            double delta, double epsilon) {
    BoundReport rep;
    rep.summary = summary;
    rep.g_inf = g_inf;
    rep.zeta_p = zeta_p;
    rep.zeta_r = zeta_p * g_inf;
    rep.n_states = n_states;
    rep.gamma = gamma;
    rep.n_samples = n_samples;
    rep.af_size = af_size;
    rep.log_pi_size = log_pi;
    rep.delta = delta;
    rep.epsilon = epsilon;
    rep.theorem1 = value_loss_bound(ValueLossKind::kTheorem1, summary, zeta_p,
                                    rep.zeta_r, n_states, gamma);
    rep.corollary1 = value_loss_bound(ValueLossKind::kCorollary1, summary, zeta_p,
                                      rep.zeta_r, n_states, gamma);
    rep.theorem2 =
        planning_loss_bound(PlanningLossKind::kTheorem2, summary, zeta_p, rep.zeta_r,
                            n_states, gamma, n_samples, af_size, log_pi, delta);
    rep.corollary3 =
        planning_loss_bound(PlanningLossKind::kCorollary3, summary, zeta_p,
                            rep.zeta_r, n_states, gamma, n_samples, af_size, log_pi,
                            delta);
    const double g_bar = summary.gamma_bar_options;
    rep.theorem3_epsilon_floor =
        2.0 * zeta_p * g_bar / ((1.0 - g_bar) * (1.0 - g_bar));
    rep.theorem3_feasible = epsilon >= rep.theorem3_epsilon_floor;
    if (rep.theorem3_feasible)
        rep.theorem3 = sample_complexity(SampleComplexityKind::kTheorem3Partial,
                                         epsilon, delta, zeta_p, g_bar, af_size);
    rep.theorem4 =
        sample_complexity(SampleComplexityKind::kTheorem4Full, epsilon, delta, 0.0,
                          g_bar, af_size);
    return rep;
}

}  // namespace

BoundReport taxi_bound_report(double gamma, long n_samples, double delta,
                              double epsilon) {
    TabularMdp mdp = taxi::build_taxi_mdp(gamma);
    OptionSet options = pretrain_taxi_options(mdp);
    OptionModel exact = exact_models(mdp, options, 1e-10);
    std::vector<Intent> intents = exact_model_intents(exact);
    DiscountSummary summary = discount_summary(exact);
    double r_prim = 0.0;
    for (double r : mdp.reward) r_prim = std::max(r_prim, r);
    const double g_inf = r_prim / (1.0 - gamma);
    Lemma1Constants lemma = lemma1_constants(intents, exact, g_inf);
    AffordanceSet all = taxi_heuristic_affordances(TaxiAffordanceKind::kEverything);
    return assemble_report(summary, g_inf, lemma.zeta_p, mdp.n_states, gamma,
                           n_samples, static_cast<double>(all.count()),
                           log_policy_class_upper_bound(all, mdp.terminal), delta,
                           epsilon);
}

BoundReport instance_bound_report(const SmdpInstance& instance, double zeta,
                                  long n_samples, double delta, double epsilon,
                                  Rng& rng) {
    PerturbedIntents intents = perturb_intents(instance, zeta, rng);
    DiscountSummary summary = discount_summary(instance.exact, intents.intent_model);
    double r_prim = 0.0;
    for (double r : instance.mdp.reward) r_prim = std::max(r_prim, r);
    const double g_inf = r_prim / (1.0 - instance.mdp.discount);
    AffordanceSet all = AffordanceSet::none(instance.mdp.n_states,
                                            instance.options.size(), "everything");
    std::fill(all.member.begin(), all.member.end(), 1);
    return assemble_report(summary, g_inf, intents.zeta_mtm, instance.mdp.n_states,
                           instance.mdp.discount, n_samples,
                           static_cast<double>(all.count()),
                           log_policy_class_upper_bound(all, instance.mdp.terminal),
                           delta, epsilon);
}

void render_bound_report(const BoundReport& rep, std::ostream& out) {
    out.precision(12);
    out << "discounts:\n";
    out << "  gamma_bar_options: " << rep.summary.gamma_bar_options << '\n';
    out << "  gamma_bar_intents: " << rep.summary.gamma_bar_intents << '\n';
    out << "  r_max: " << rep.summary.r_max << '\n';
    out << "  v_max: " << rep.summary.v_max << '\n';
    out << "lemma1:\n";
    out << "  zeta_p: " << rep.zeta_p << '\n';
    out << "  zeta_r: " << rep.zeta_r << '\n';
    out << "  g_inf: " << rep.g_inf << '\n';
    out << "inputs:\n";
    out << "  n_states: " << rep.n_states << '\n';
    out << "  gamma: " << rep.gamma << '\n';
    out << "  n_samples: " << rep.n_samples << '\n';
    out << "  af_size: " << rep.af_size << '\n';
    out << "  log_pi_size: " << rep.log_pi_size << '\n';
    out << "  delta: " << rep.delta << '\n';
    out << "  epsilon: " << rep.epsilon << '\n';
    out << "value_loss:\n";
    out << "  theorem1: " << rep.theorem1 << '\n';
    out << "  corollary1: " << rep.corollary1 << '\n';
    out << "planning_loss:\n";
    out << "  theorem2: " << rep.theorem2 << '\n';
    out << "  corollary3: " << rep.corollary3 << '\n';
    out << "sample_complexity:\n";
    out << "  theorem3_feasible: " << (rep.theorem3_feasible ? "yes" : "no") << '\n';
    out << "  theorem3_epsilon_floor: " << rep.theorem3_epsilon_floor << '\n';
    if (rep.theorem3_feasible) {
        out << "  theorem3_n_per_pair: " << rep.theorem3.n_per_pair << '\n';
        out << "  theorem3_epochs: " << rep.theorem3.epochs << '\n';
    }
    out << "  theorem4_n_per_pair: " << rep.theorem4.n_per_pair << '\n';
    out << "  theorem4_epochs: " << rep.theorem4.epochs << '\n';
}

void render_bound_report_json(const BoundReport& rep, std::ostream& out) {
    nlohmann::json j;
    j["discounts"] = {{"gamma_bar_options", rep.summary.gamma_bar_options},
                      {"gamma_bar_intents", rep.summary.gamma_bar_intents},
                      {"r_max", rep.summary.r_max},
                      {"v_max", rep.summary.v_max}};
    j["lemma1"] = {{"zeta_p", rep.zeta_p},
                   {"zeta_r", rep.zeta_r},
                   {"g_inf", rep.g_inf}};
    j["inputs"] = {{"n_states", rep.n_states},   {"gamma", rep.gamma},
                   {"n_samples", rep.n_samples}, {"af_size", rep.af_size},
                   {"log_pi_size", rep.log_pi_size}, {"delta", rep.delta},
                   {"epsilon", rep.epsilon}};
    j["value_loss"] = {{"theorem1", rep.theorem1}, {"corollary1", rep.corollary1}};
    j["planning_loss"] = {{"theorem2", rep.theorem2}, {"corollary3", rep.corollary3}};
    j["sample_complexity"] = {
        {"theorem3_feasible", rep.theorem3_feasible},
        {"theorem3_epsilon_floor", rep.theorem3_epsilon_floor},
        {"theorem4_n_per_pair", rep.theorem4.n_per_pair},
        {"theorem4_epochs", rep.theorem4.epochs}};
    if (rep.theorem3_feasible) {
        j["sample_complexity"]["theorem3_n_per_pair"] = rep.theorem3.n_per_pair;
        j["sample_complexity"]["theorem3_epochs"] = rep.theorem3.epochs;
    }
    out << j.dump(2) << '\n';
}

void render_certification_report(const CertificationReport& rep, std::ostream& out) {
    out << "trials: " << rep.trials << '\n';
    out << "value_loss:\n";
    out << "  theorem1_held: " << rep.value_theorem1_held << " / " << rep.value_trials
        << '\n';
    out << "  corollary1_held: " << rep.value_corollary1_held << " / "
        << rep.value_trials << '\n';
    out << "  max_value_loss_at_zeta0: " << rep.max_zeta0_value_loss << '\n';
    out << "remark1_held: " << rep.remark1_held << " / " << rep.value_trials << '\n';
    out << "planning_loss:\n";
    out << "  theorem2_held: " << rep.planning_theorem2_held << " / "
        << rep.planning_trials << '\n';
    out << "  corollary3_held: " << rep.planning_corollary3_held << " / "
        << rep.planning_trials << '\n';
    out << "sample_complexity:\n";
    out << "  theorem3_within_eps: " << rep.theorem3_within_eps << " / "
        << rep.sample_trials << '\n';
    out << "  theorem4_within_eps: " << rep.theorem4_within_eps << " / "
        << rep.sample_trials << '\n';
    for (const std::string& f : rep.failures) out << "failure_instance: " << f << '\n';
}

namespace {

std::map<std::string, std::string> parse_kv_file(const std::string& path) {
    std::map<std::string, std::string> kv;
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open config file " + path);
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (!key.empty()) kv[key] = value;
    }
    return kv;
}

void apply_kv(ExperimentConfig& config, const std::string& key,
              const std::string& value) {
    auto as_long = [&] { return std::stol(value); };
    auto as_double = [&] { return std::stod(value); };
    if (key == "environment") config.environment = value;
    else if (key == "train_affordances") config.train_affordances = value;
    else if (key == "plan_affordances") config.plan_affordances = value;
    else if (key == "learning_rate") config.learning_rate = as_double();
    else if (key == "classifier_learning_rate")
        config.classifier_learning_rate = as_double();
    else if (key == "max_transitions") config.max_transitions = as_long();
    else if (key == "collect_per_round")
        config.collect_per_round = static_cast<int>(as_long());
    else if (key == "updates_per_round")
        config.updates_per_round = static_cast<int>(as_long());
    else if (key == "eval_cadence_updates")
        config.eval_cadence_updates = static_cast<int>(as_long());
    else if (key == "episodes_per_eval")
        config.episodes_per_eval = static_cast<int>(as_long());
    else if (key == "eval_cap") config.eval_cap = static_cast<int>(as_long());
    else if (key == "t_max") config.t_max = static_cast<int>(as_long());
    else if (key == "gamma") config.gamma = as_double();
    else if (key == "seeds") {
        config.seeds.clear();
        std::istringstream ss(value);
        std::string tok;
        while (std::getline(ss, tok, ','))
            if (!tok.empty()) config.seeds.push_back(std::stoull(tok));
    } else if (key == "classifier_enabled")
        config.classifier_enabled = value == "1" || value == "true";
    else if (key == "classifier_threshold") config.classifier_threshold = as_double();
    else if (key == "k_sweep") {
        config.k_sweep.clear();
        std::istringstream ss(value);
        std::string tok;
        while (std::getline(ss, tok, ','))
            if (!tok.empty()) config.k_sweep.push_back(std::stod(tok));
    } else if (key == "mode")
        config.mode = value == "concurrent" ? RunMode::kConcurrent
                                            : RunMode::kSequential;
    else if (key == "workers") config.workers = static_cast<int>(as_long());
    else if (key == "buffer_capacity") config.buffer_capacity = as_long();
    else if (key == "planner_epochs")
        config.planner_epochs = static_cast<int>(as_long());
    else if (key == "planner_tol") config.planner_tol = as_double();
    else if (key == "stop_at_success") config.stop_at_success = as_double();
    else if (key == "reward_head_init") config.reward_head_init = as_double();
    else if (key == "divergence_threshold")
        config.divergence_threshold = as_double();
    else if (key == "pickup_variant")
        config.pickup_variant = value == "destination"
                                    ? PickupIntentVariant::kAtDestination
                                    : PickupIntentVariant::kAtDepot;
    else
        throw InvalidArgument("unknown config key: " + key);
}

}  // namespace

ExperimentConfig load_config(const std::string& path,
                             const std::map<std::string, std::string>& overrides) {
    ExperimentConfig config;
    for (const auto& [k, v] : parse_kv_file(path)) apply_kv(config, k, v);
    for (const auto& [k, v] : overrides) apply_kv(config, k, v);
    config.validate();
    return config;
}

ExperimentConfig config_from_overrides(
    const std::map<std::string, std::string>& overrides) {
    ExperimentConfig config;
    for (const auto& [k, v] : overrides) apply_kv(config, k, v);
    config.validate();
    return config;
}

}  // namespace affopt
