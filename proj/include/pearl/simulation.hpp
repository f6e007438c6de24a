#pragma once

#include <pearl/aipw.hpp>
#include <pearl/dataset.hpp>
#include <pearl/error.hpp>
#include <pearl/estimator.hpp>
#include <pearl/folds.hpp>
#include <pearl/inference.hpp>
#include <pearl/l1_solver.hpp>
#include <pearl/nuisance.hpp>
#include <pearl/parallel.hpp>
#include <pearl/scenario.hpp>
#include <pearl/seed.hpp>
#include <pearl/value_inference.hpp>

#include <cmath>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

namespace pearl {

enum class Method { pearl, baseline_q };

inline std::string_view to_string(Method m) { return m == Method::pearl ? "pearl" : "baseline-q"; }

inline Method parse_method(std::string_view s)
{
    if (s == "pearl")
        return Method::pearl;
    if (s == "baseline-q" || s == "baseline_q")
        return Method::baseline_q;
    throw ValidationError("unknown method '" + std::string(s) + "' (expected pearl or baseline-q)");
}

/// Large-n fit that stands in for each method's limiting coefficients.
struct ReferenceOptions {
    bool enabled = true;
    Index n = 100000;
    double lambda = 1e-4;
};

struct McConfig {
    int reps = 200;
    ScenarioSpec scenario;
    std::vector<Method> methods{Method::pearl, Method::baseline_q};
    int K = 5;
    PearlConfig pearl;
    std::vector<Index> coordinates{1, 2, 3, 4, 5, 6, 7, 8}; ///< 1-based, in covariate terms
    bool value_ci = true;
    double split_fraction = 0.5;
    Index oracle_draws = 1000000; ///< Monte Carlo draws for scenario-2 values
    ReferenceOptions reference;
    std::uint64_t seed = 1;
    unsigned threads = 1;

    void validate() const
    {
        if (reps < 1)
            throw ValidationError("reps must be at least 1");
        scenario.validate();
        if (methods.empty())
            throw ValidationError("at least one method is required");
        if (K < 2)
            throw ValidationError("K must be at least 2");
        for (Index c : coordinates)
            if (c < 1 || c > scenario.p)
                throw ValidationError("coordinate " + std::to_string(c) + " outside 1.." +
                                      std::to_string(scenario.p));
        if (!(split_fraction > 0.0 && split_fraction < 1.0))
            throw ValidationError("split fraction must lie in (0, 1)");
        if (oracle_draws < 2)
            throw ValidationError("oracle draws must be at least 2");
    }
};

// ---------------------------------------------------------------------------
// Penalized Q-learning baseline: lasso of Y on Z = [1, X, A, A X].

/// Z = [1, X, A, A X]; column p + 2 + j is the interaction with covariate j.
inline Matrix baseline_design(const Matrix& x, const Eigen::VectorXi& a)
{
    const Index n = x.rows(), p = x.cols();
    Matrix z(n, 2 * p + 2);
    z.col(0).setOnes();
    z.middleCols(1, p) = x;
    const Vector av = a.cast<double>();
    z.col(p + 1) = av;
    z.rightCols(p) = x.array().colwise() * av.array();
    return z;
}

inline Index baseline_interaction_index(Index j, Index p) { return p + 2 + j; }

inline Vector baseline_penalty(Index p)
{
    Vector pf = Vector::Ones(2 * p + 2);
    pf(0) = 0.0;
    return pf;
}

inline WeightedSquaredLoss baseline_loss(const Dataset& data)
{
    return {baseline_design(data.x(), data.a()), data.y(), Vector::Ones(data.n())};
}

/// Rule sgn(theta_A + x' theta_AX) from baseline coefficients.
inline DecisionRule baseline_rule(const Vector& theta, Index p)
{
    return {theta.tail(p), theta(p + 1)};
}

inline Vector baseline_coefficients(const Dataset& data, const LambdaPolicy& policy, SolverOptions opts,
                                    const SeedStream& seed)
{
    opts.penalty_factors = baseline_penalty(data.p());
    opts.warm_start.reset();
    return fit_with_policy(baseline_loss(data), policy, opts, seed).first;
}

inline DecisionRule baseline_q(const Dataset& data, const SeedStream& seed, const LambdaPolicy& policy = {},
                               const SolverOptions& opts = {})
{
    return baseline_rule(baseline_coefficients(data, policy, opts, seed), data.p());
}

/// Fold-wise lasso fits for the baseline's score tests.
inline std::vector<FoldProblem<WeightedSquaredLoss>> baseline_fold_problems(const Dataset& data, int K,
                                                                            const LambdaPolicy& policy,
                                                                            const SolverOptions& opts,
                                                                            const SeedStream& seed)
{
    const auto folds = make_folds(data.n(), K, seed.derive("folds"));
    std::vector<FoldProblem<WeightedSquaredLoss>> out;
    for (int k = 0; k < K; ++k) {
        const Dataset part = data.subset(folds.indices(k));
        Vector theta =
            baseline_coefficients(part, policy, opts, seed.derive("fold", static_cast<std::uint64_t>(k)));
        out.push_back({baseline_loss(part), std::move(theta), baseline_penalty(data.p())});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Reference (limiting) coefficients.

inline NuisanceConfig oracle_nuisance(const ScenarioSpec& spec, NuisanceConfig base = {})
{
    base.propensity = PropensityBackend::known;
    base.outcome = OutcomeBackend::known;
    // The true propensity needs no protection from extreme estimates.
    base.trim_lo = 1e-3;
    base.trim_hi = 1.0 - 1e-3;
    base.known_propensity = [spec](const Eigen::Ref<const Vector>& x) { return spec.propensity(x); };
    base.known_outcome = [spec](int a, const Eigen::Ref<const Vector>& x) { return spec.outcome_mean(a, x); };
    return base;
}

/// Fill the function slots of "known" backends from the scenario truth.
inline NuisanceConfig with_truth(const ScenarioSpec& spec, NuisanceConfig config)
{
    if (config.propensity == PropensityBackend::known && !config.known_propensity)
        config.known_propensity = [spec](const Eigen::Ref<const Vector>& x) { return spec.propensity(x); };
    if (config.outcome == OutcomeBackend::known && !config.known_outcome)
        config.known_outcome = [spec](int a, const Eigen::Ref<const Vector>& x) {
            return spec.outcome_mean(a, x);
        };
    return config;
}

/// Coefficients of one fit on n_ref fresh draws at a small fixed lambda. Pearl
/// uses the true nuisances; the baseline has none. Covariate-scale vector of
/// length p (pearl) or 2p + 2 (baseline).
inline Vector reference_coefficients(const ScenarioSpec& spec, Method method, const ReferenceOptions& ref,
                                     const SolverOptions& solver, const SeedStream& seed)
{
    ScenarioSpec big = spec;
    big.n = ref.n;
    const auto sim = gen_scenario(big, seed.derive("reference-data"));
    LambdaPolicy fixed;
    fixed.mode = LambdaPolicy::Mode::fixed;
    fixed.fixed = ref.lambda;
    if (method == Method::baseline_q)
        return baseline_coefficients(sim.data, fixed, solver, seed);
    const NuisanceConfig truth = oracle_nuisance(spec);
    const auto propensity = fit_propensity(sim.data, truth, seed);
    const auto outcome = fit_outcome(sim.data, truth, seed);
    const auto weights = compute_weights(sim.data, propensity, outcome);
    return solve_l1(assemble_loss(sim.data.x(), weights), ref.lambda, solver).coef;
}

/// Process-wide cache keyed by (scenario, method, xi, p, n_ref, lambda).
inline Vector cached_reference(const ScenarioSpec& spec, Method method, const ReferenceOptions& ref,
                               const SolverOptions& solver)
{
    using Key = std::tuple<int, int, double, Index, Index, double>;
    static std::mutex mutex;
    static std::map<Key, Vector> cache;
    const Key key{spec.scenario, static_cast<int>(method), spec.xi, spec.p, ref.n, ref.lambda};
    std::lock_guard lock(mutex);
    if (auto it = cache.find(key); it != cache.end())
        return it->second;
    const SeedStream seed = SeedStream(0x5eedULL).derive("reference").derive(std::string(to_string(method)));
    Vector v = reference_coefficients(spec, method, ref, solver, seed);
    cache.emplace(key, v);
    return v;
}

// ---------------------------------------------------------------------------
// Replications.

struct MethodRecord {
    Method method = Method::pearl;
    bool ok = false;
    std::string error;
    std::vector<TestReport> tests;       ///< one per requested coordinate
    Vector coef;                         ///< pooled coefficients (pearl) or full baseline fit
    DecisionRule rule;
    double achieved_value = 0.0;         ///< population value of `rule`
    std::optional<ValueReport> value;    ///< single-split value inference
    double value_target = 0.0;           ///< population value of the split-half rule
};

struct ReplicationRecord {
    int r = 0;
    std::vector<MethodRecord> methods;
};

namespace detail {

inline double rule_value(const ScenarioSpec& spec, const DecisionRule& rule, Index draws, const SeedStream& seed)
{
    return scenario_value(spec, rule, draws, seed);
}

inline MethodRecord run_pearl(const Dataset& data, const McConfig& c, const SeedStream& seed,
                              const SeedStream& oracle_seed)
{
    MethodRecord rec;
    rec.method = Method::pearl;
    PearlConfig config = c.pearl;
    config.nuisance = with_truth(c.scenario, config.nuisance);
    const auto fit = fit_all(data, c.K, config, seed.derive("fit"));
    std::vector<Index> coords;
    for (Index j : c.coordinates)
        coords.push_back(j - 1);
    if (!coords.empty())
        rec.tests = test_coordinates(data, fit, coords, inference_options(config), seed.derive("test"));
    rec.coef = fit.pooled;
    rec.rule = DecisionRule{fit.pooled};
    rec.achieved_value = rule_value(c.scenario, rec.rule, c.oracle_draws, oracle_seed);
    if (c.value_ci) {
        auto v = infer_value(data, c.K, config, c.split_fraction, seed.derive("value"));
        rec.value_target = rule_value(c.scenario, v.rule, c.oracle_draws, oracle_seed);
        rec.value = std::move(v);
    }
    rec.ok = true;
    return rec;
}

inline MethodRecord run_baseline(const Dataset& data, const McConfig& c, const SeedStream& seed,
                                 const SeedStream& oracle_seed)
{
    MethodRecord rec;
    rec.method = Method::baseline_q;
    const auto& policy = c.pearl.lambda;
    const auto& solver = c.pearl.solver;
    const Index p = data.p();
    if (!c.coordinates.empty()) {
        const auto problems = baseline_fold_problems(data, c.K, policy, solver, seed.derive("folds"));
        InferenceOptions opts = inference_options(c.pearl);
        for (Index j : c.coordinates) {
            auto report = test_coordinate(problems, baseline_interaction_index(j - 1, p), opts, seed.derive("test"));
            report.coordinate = j;
            report.p = p;
            rec.tests.push_back(report);
        }
    }
    rec.coef = baseline_coefficients(data, policy, solver, seed.derive("rule"));
    rec.rule = baseline_rule(rec.coef, p);
    rec.achieved_value = rule_value(c.scenario, rec.rule, c.oracle_draws, oracle_seed);
    if (c.value_ci) {
        const auto halves = split_half(data.n(), c.split_fraction, seed.derive("value").derive("value-split"));
        const RuleFitter fitter = [&](const Dataset& train, const SeedStream& s) {
            return baseline_q(train, s, policy, solver);
        };
        NuisanceConfig nuisance = with_truth(c.scenario, c.pearl.nuisance);
        auto v = infer_value_with(data, halves, fitter, nuisance, seed.derive("value"));
        rec.value_target = rule_value(c.scenario, v.rule, c.oracle_draws, oracle_seed);
        rec.value = std::move(v);
    }
    rec.ok = true;
    return rec;
}

} // namespace detail

/// One fresh dataset, every requested method. Failures are captured in the
/// record instead of propagating.
inline ReplicationRecord run_replication(int r, const McConfig& config)
{
    ReplicationRecord out;
    out.r = r;
    const SeedStream rep = SeedStream(config.seed).derive("replication", static_cast<std::uint64_t>(r));
    std::optional<SimulatedData> sim;
    std::string data_error;
    try {
        sim = gen_scenario(config.scenario, rep.derive("data"));
    } catch (const std::exception& e) {
        data_error = e.what();
    }
    // Shared oracle draws make the between-method value comparison paired.
    const SeedStream oracle_seed = rep.derive("oracle");
    for (Method m : config.methods) {
        MethodRecord rec;
        rec.method = m;
        if (!sim) {
            rec.error = data_error;
            out.methods.push_back(std::move(rec));
            continue;
        }
        try {
            const SeedStream ms = rep.derive(std::string(to_string(m)));
            rec = m == Method::pearl ? detail::run_pearl(sim->data, config, ms, oracle_seed)
                                     : detail::run_baseline(sim->data, config, ms, oracle_seed);
        } catch (const std::exception& e) {
            rec = MethodRecord{};
            rec.method = m;
            rec.error = e.what();
        }
        out.methods.push_back(std::move(rec));
    }
    return out;
}

/// Replications 0..R-1 in parallel; the result is ordered by replication index.
inline std::vector<ReplicationRecord> run_replications(const McConfig& config)
{
    config.validate();
    std::vector<ReplicationRecord> records(static_cast<std::size_t>(config.reps));
    parallel_for(records.size(), config.threads,
                 [&](std::size_t r) { records[r] = run_replication(static_cast<int>(r), config); });
    return records;
}

// ---------------------------------------------------------------------------
// Aggregation.

struct Rate {
    double rate = 0.0;
    double se = 0.0;
    int count = 0; ///< denominator
};

inline Rate binomial_rate(int hits, int total)
{
    Rate r;
    r.count = total;
    if (total == 0)
        return r;
    r.rate = static_cast<double>(hits) / static_cast<double>(total);
    r.se = std::sqrt(r.rate * (1.0 - r.rate) / static_cast<double>(total));
    return r;
}

struct CoordinateMetrics {
    Index coordinate = 0;                ///< 1-based covariate index
    double reference = 0.0;              ///< limiting coefficient (NaN when not computed)
    Rate rejection;                      ///< p < 0.05
    Rate coverage;                       ///< CI covers `reference`
    double mean_estimate = 0.0;
};

struct MethodMetrics {
    Method method = Method::pearl;
    int successes = 0;
    int failures = 0;
    std::vector<CoordinateMetrics> coordinates;
    Rate value_coverage;                 ///< value CI covers the split-half rule's value
    double mean_value = 0.0;             ///< mean achieved value
    double mean_value_se = 0.0;
};

struct McMetrics {
    int reps = 0;
    std::vector<MethodMetrics> methods;
};

/// Reference coefficient for covariate coordinate j (1-based) of a method.
inline double reference_entry(const Vector& ref, Method m, Index j, Index p)
{
    return m == Method::pearl ? ref(j - 1) : ref(baseline_interaction_index(j - 1, p));
}

/// `references[m]` holds the limiting coefficients for methods[m], or is empty
/// when coverage should not be measured.
inline McMetrics aggregate(const std::vector<ReplicationRecord>& records, const McConfig& config,
                           const std::vector<Vector>& references = {})
{
    McMetrics out;
    out.reps = static_cast<int>(records.size());
    int total_ok = 0;
    for (std::size_t mi = 0; mi < config.methods.size(); ++mi) {
        MethodMetrics mm;
        mm.method = config.methods[mi];
        const Vector* ref = mi < references.size() && references[mi].size() ? &references[mi] : nullptr;
        std::vector<int> rejects(config.coordinates.size(), 0), covers(config.coordinates.size(), 0);
        std::vector<double> est_sum(config.coordinates.size(), 0.0);
        int value_hits = 0, value_total = 0;
        double vsum = 0.0, vsq = 0.0;
        for (const auto& rec : records) {
            const MethodRecord& m = rec.methods.at(mi);
            if (!m.ok) {
                ++mm.failures;
                continue;
            }
            ++mm.successes;
            for (std::size_t c = 0; c < config.coordinates.size(); ++c) {
                const TestReport& t = m.tests.at(c);
                if (t.p_value < 0.05)
                    ++rejects[c];
                est_sum[c] += t.one_step;
                if (ref) {
                    const double target = reference_entry(*ref, mm.method, config.coordinates[c], config.scenario.p);
                    if (t.ci_lo <= target && target <= t.ci_hi)
                        ++covers[c];
                }
            }
            if (m.value) {
                ++value_total;
                if (m.value->ci_lo <= m.value_target && m.value_target <= m.value->ci_hi)
                    ++value_hits;
            }
            vsum += m.achieved_value;
            vsq += m.achieved_value * m.achieved_value;
        }
        total_ok += mm.successes;
        for (std::size_t c = 0; c < config.coordinates.size(); ++c) {
            CoordinateMetrics cm;
            cm.coordinate = config.coordinates[c];
            cm.reference = ref ? reference_entry(*ref, mm.method, cm.coordinate, config.scenario.p)
                               : std::numeric_limits<double>::quiet_NaN();
            cm.rejection = binomial_rate(rejects[c], mm.successes);
            cm.coverage = ref ? binomial_rate(covers[c], mm.successes) : Rate{};
            cm.mean_estimate = mm.successes ? est_sum[c] / mm.successes : 0.0;
            mm.coordinates.push_back(cm);
        }
        mm.value_coverage = binomial_rate(value_hits, value_total);
        if (mm.successes > 0) {
            const double s = static_cast<double>(mm.successes);
            mm.mean_value = vsum / s;
            mm.mean_value_se =
                mm.successes > 1 ? std::sqrt(std::max(0.0, (vsq - s * mm.mean_value * mm.mean_value) / (s - 1.0)) / s)
                                 : 0.0;
        }
        out.methods.push_back(std::move(mm));
    }
    if (total_ok == 0)
        throw NumericalError("aggregate: every replication failed");
    return out;
}

/// Reference vectors for each configured method (empty when disabled).
inline std::vector<Vector> study_references(const McConfig& config)
{
    std::vector<Vector> out;
    for (Method m : config.methods)
        out.push_back(config.reference.enabled
                          ? cached_reference(config.scenario, m, config.reference, config.pearl.solver)
                          : Vector{});
    return out;
}

struct StudyResult {
    std::vector<ReplicationRecord> records;
    std::vector<Vector> references;
    McMetrics metrics;
};

inline StudyResult run_study(const McConfig& config)
{
    config.validate();
    StudyResult s;
    s.references = study_references(config);
    s.records = run_replications(config);
    s.metrics = aggregate(s.records, config, s.references);
    return s;
}

} // namespace pearl
