#pragma once

// JSON encodings of reports, study results and the run configuration.
// Requires nlohmann/json (vendored).

#include <pearl/dataset.hpp>
#include <pearl/error.hpp>
#include <pearl/estimator.hpp>
#include <pearl/inference.hpp>
#include <pearl/nuisance.hpp>
#include <pearl/scenario.hpp>
#include <pearl/simulation.hpp>
#include <pearl/value_inference.hpp>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace pearl {

using Json = nlohmann::ordered_json;

/// Non-finite doubles become null (JSON has no inf/nan).
inline Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline Json vector_json(const Vector& v)
{
    Json a = Json::array();
    for (Index i = 0; i < v.size(); ++i)
        a.push_back(number(v(i)));
    return a;
}

inline Json to_json(const TestReport& r)
{
    return Json{{"coordinate", r.coordinate}, {"estimate", number(r.estimate)}, {"one_step", number(r.one_step)},
                {"score", number(r.score)},       {"sigma2", number(r.sigma2)},     {"information", number(r.information)},
                {"se", number(r.se)},             {"z", number(r.z)},               {"p_value", number(r.p_value)},
                {"ci_lo", number(r.ci_lo)},       {"ci_hi", number(r.ci_hi)},       {"K", r.K},
                {"n", r.n},                       {"p", r.p},                       {"degenerate", r.degenerate}};
}

inline Json to_json(const DecisionRule& rule)
{
    return Json{{"beta", vector_json(rule.beta)}, {"offset", number(rule.offset)}};
}

inline Json to_json(const ValueReport& r)
{
    return Json{{"value", number(r.value)}, {"sd", number(r.sd)},       {"se", number(r.se)},
                {"ci_lo", number(r.ci_lo)}, {"ci_hi", number(r.ci_hi)}, {"n_eval", r.n_eval},
                {"rule", to_json(r.rule)}};
}

inline Json to_json(const Rate& r)
{
    return Json{{"rate", number(r.rate)}, {"se", number(r.se)}, {"count", r.count}};
}

inline Json to_json(const McMetrics& m)
{
    Json methods = Json::array();
    for (const auto& mm : m.methods) {
        Json coords = Json::array();
        for (const auto& c : mm.coordinates)
            coords.push_back(Json{{"coordinate", c.coordinate},
                                  {"reference", number(c.reference)},
                                  {"rejection", to_json(c.rejection)},
                                  {"coverage", to_json(c.coverage)},
                                  {"mean_one_step", number(c.mean_estimate)}});
        methods.push_back(Json{{"method", std::string(to_string(mm.method))},
                               {"successes", mm.successes},
                               {"failures", mm.failures},
                               {"value_coverage", to_json(mm.value_coverage)},
                               {"mean_value", number(mm.mean_value)},
                               {"mean_value_se", number(mm.mean_value_se)},
                               {"coordinates", coords}});
    }
    return Json{{"reps", m.reps}, {"methods", methods}};
}

inline Json to_json(const ReplicationRecord& rec)
{
    Json methods = Json::array();
    for (const auto& m : rec.methods) {
        Json j{{"method", std::string(to_string(m.method))}, {"ok", m.ok}};
        if (!m.ok) {
            j["error"] = m.error;
        } else {
            Json tests = Json::array();
            for (const auto& t : m.tests)
                tests.push_back(to_json(t));
            j["tests"] = tests;
            j["rule"] = to_json(m.rule);
            j["achieved_value"] = number(m.achieved_value);
            if (m.value) {
                j["value"] = to_json(*m.value);
                j["value_target"] = number(m.value_target);
            }
        }
        methods.push_back(std::move(j));
    }
    return Json{{"replication", rec.r}, {"methods", methods}};
}

// ---------------------------------------------------------------------------
// Run configuration shared by every command.

struct RunConfig {
    std::string input;
    ColumnSpec columns;
    int K = 5;
    std::vector<Index> coordinates;          ///< 1-based; empty means the command default
    PropensityBackend propensity = PropensityBackend::screen_kernel;
    OutcomeBackend outcome = OutcomeBackend::screen_kernel;
    double trim_lo = 0.1;
    double trim_hi = 0.9;
    BandwidthMode bandwidth = BandwidthMode::silverman;
    Index max_screened = 20;
    std::string surrogate = "logistic";
    LambdaPolicy lambda;
    LambdaPolicy lambda_w;
    double tolerance = 1e-7;
    double cv_tolerance = 1e-4;
    int max_iterations = 10000;
    double split_fraction = 0.5;
    ScenarioSpec scenario;
    int reps = 200;
    std::vector<Method> methods{Method::pearl, Method::baseline_q};
    bool value_ci = true;
    Index oracle_draws = 1000000;
    ReferenceOptions reference;
    std::uint64_t seed = 1;
    std::string output = "-";
    std::string summary;
    std::string dump;
    unsigned threads = 0;                    ///< 0: all cores; never part of the echoed config

    void validate() const
    {
        if (K < 2)
            throw ValidationError("K must be at least 2");
        for (Index c : coordinates)
            if (c < 1)
                throw ValidationError("coordinates are 1-based");
        if (!(trim_lo > 0.0 && trim_lo <= trim_hi && trim_hi < 1.0))
            throw ValidationError("trim bounds must satisfy 0 < lo <= hi < 1");
        if (max_screened < 1)
            throw ValidationError("max_screened must be positive");
        if (surrogate != "logistic")
            throw ValidationError("unknown surrogate '" + surrogate + "' (only logistic is built in)");
        for (const auto* pol : {&lambda, &lambda_w}) {
            if (pol->mode == LambdaPolicy::Mode::fixed && !(pol->fixed >= 0.0))
                throw ValidationError("fixed lambda must be nonnegative");
            if (pol->grid < 1 || !(pol->ratio > 0.0 && pol->ratio < 1.0) || pol->cv_folds < 2)
                throw ValidationError("lambda grid needs grid >= 1, 0 < ratio < 1, cv_folds >= 2");
        }
        if (!(tolerance > 0.0) || !(cv_tolerance > 0.0) || max_iterations < 1)
            throw ValidationError("solver tolerance must be positive and max_iterations at least 1");
        if (!(split_fraction > 0.0 && split_fraction < 1.0))
            throw ValidationError("split fraction must lie in (0, 1)");
        if (reps < 1)
            throw ValidationError("reps must be at least 1");
        if (methods.empty())
            throw ValidationError("at least one method is required");
    }

    SolverOptions solver() const
    {
        SolverOptions o;
        o.tolerance = tolerance;
        o.cv_tolerance = cv_tolerance;
        o.max_iterations = max_iterations;
        return o;
    }

    PearlConfig pearl() const
    {
        PearlConfig c;
        c.nuisance.propensity = propensity;
        c.nuisance.outcome = outcome;
        c.nuisance.trim_lo = trim_lo;
        c.nuisance.trim_hi = trim_hi;
        c.nuisance.kernel.bandwidth = bandwidth;
        c.nuisance.kernel.max_screened = max_screened;
        c.nuisance.solver = solver();
        c.lambda = lambda;
        c.lambda_w = lambda_w;
        c.solver = solver();
        return c;
    }

    McConfig study() const
    {
        McConfig m;
        m.reps = reps;
        m.scenario = scenario;
        m.methods = methods;
        m.K = K;
        m.pearl = pearl();
        if (!coordinates.empty())
            m.coordinates = coordinates;
        m.value_ci = value_ci;
        m.split_fraction = split_fraction;
        m.oracle_draws = oracle_draws;
        m.reference = reference;
        m.seed = seed;
        m.threads = threads == 0 ? default_threads() : threads;
        return m;
    }
};

inline Json to_json(const LambdaPolicy& p)
{
    return Json{{"mode", p.mode == LambdaPolicy::Mode::cv ? "cv" : "fixed"},
                {"value", p.fixed},
                {"grid", p.grid},
                {"ratio", p.ratio},
                {"cv_folds", p.cv_folds}};
}

inline Json to_json(const RunConfig& c)
{
    Json methods = Json::array();
    for (Method m : c.methods)
        methods.push_back(std::string(to_string(m)));
    return Json{
        {"input", c.input},
        {"columns", {{"outcome", c.columns.outcome}, {"treatment", c.columns.treatment}, {"covariates", c.columns.covariates}}},
        {"K", c.K},
        {"coordinates", c.coordinates},
        {"propensity", std::string(to_string(c.propensity))},
        {"outcome_model", std::string(to_string(c.outcome))},
        {"trim_lo", c.trim_lo},
        {"trim_hi", c.trim_hi},
        {"bandwidth", std::string(to_string(c.bandwidth))},
        {"max_screened", c.max_screened},
        {"surrogate", c.surrogate},
        {"lambda", to_json(c.lambda)},
        {"lambda_w", to_json(c.lambda_w)},
        {"tolerance", c.tolerance},
        {"cv_tolerance", c.cv_tolerance},
        {"max_iterations", c.max_iterations},
        {"split_fraction", c.split_fraction},
        {"scenario", {{"scenario", c.scenario.scenario}, {"n", c.scenario.n}, {"p", c.scenario.p}, {"xi", c.scenario.xi}}},
        {"reps", c.reps},
        {"methods", methods},
        {"value_ci", c.value_ci},
        {"oracle_draws", c.oracle_draws},
        {"reference", {{"enabled", c.reference.enabled}, {"n", c.reference.n}, {"lambda", c.reference.lambda}}},
        {"seed", c.seed},
        {"output", c.output},
        {"summary", c.summary},
        {"dump", c.dump},
    };
}

namespace detail {

template <class T>
void read_if(const Json& j, const char* key, T& out)
{
    if (!j.contains(key))
        return;
    try {
        out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("config field '") + key + "': " + e.what());
    }
}

inline void read_policy(const Json& j, const char* key, LambdaPolicy& p)
{
    if (!j.contains(key))
        return;
    const Json& o = j.at(key);
    if (!o.is_object())
        throw ValidationError(std::string("config field '") + key + "' must be an object");
    std::string mode = p.mode == LambdaPolicy::Mode::cv ? "cv" : "fixed";
    read_if(o, "mode", mode);
    if (mode != "cv" && mode != "fixed")
        throw ValidationError("lambda mode must be cv or fixed");
    p.mode = mode == "cv" ? LambdaPolicy::Mode::cv : LambdaPolicy::Mode::fixed;
    read_if(o, "value", p.fixed);
    read_if(o, "grid", p.grid);
    read_if(o, "ratio", p.ratio);
    read_if(o, "cv_folds", p.cv_folds);
}

inline const std::vector<std::string>& known_config_keys()
{
    static const std::vector<std::string> keys{
        "input",  "columns",      "K",         "coordinates",    "propensity",   "outcome_model", "trim_lo",
        "trim_hi", "bandwidth",   "max_screened", "surrogate",   "lambda",       "lambda_w",      "tolerance",
        "cv_tolerance", "max_iterations", "split_fraction", "scenario", "reps",  "methods",       "value_ci",
        "oracle_draws", "reference", "seed",   "output",         "summary",      "dump"};
    return keys;
}

} // namespace detail

namespace detail {

inline void apply_json_fields(const Json& j, RunConfig& c)
{
    if (!j.is_object())
        throw ValidationError("config must be a JSON object");
    const auto& keys = detail::known_config_keys();
    for (const auto& [key, _] : j.items())
        if (std::find(keys.begin(), keys.end(), key) == keys.end())
            throw ValidationError("unknown config field '" + key + "'");
    using detail::read_if;
    read_if(j, "input", c.input);
    if (j.contains("columns")) {
        const Json& cols = j.at("columns");
        read_if(cols, "outcome", c.columns.outcome);
        read_if(cols, "treatment", c.columns.treatment);
        read_if(cols, "covariates", c.columns.covariates);
    }
    read_if(j, "K", c.K);
    read_if(j, "coordinates", c.coordinates);
    if (j.contains("propensity"))
        c.propensity = parse_propensity_backend(j.at("propensity").get<std::string>());
    if (j.contains("outcome_model"))
        c.outcome = parse_outcome_backend(j.at("outcome_model").get<std::string>());
    read_if(j, "trim_lo", c.trim_lo);
    read_if(j, "trim_hi", c.trim_hi);
    if (j.contains("bandwidth"))
        c.bandwidth = parse_bandwidth_mode(j.at("bandwidth").get<std::string>());
    read_if(j, "max_screened", c.max_screened);
    read_if(j, "surrogate", c.surrogate);
    detail::read_policy(j, "lambda", c.lambda);
    detail::read_policy(j, "lambda_w", c.lambda_w);
    read_if(j, "tolerance", c.tolerance);
    read_if(j, "cv_tolerance", c.cv_tolerance);
    read_if(j, "max_iterations", c.max_iterations);
    read_if(j, "split_fraction", c.split_fraction);
    if (j.contains("scenario")) {
        const Json& s = j.at("scenario");
        read_if(s, "scenario", c.scenario.scenario);
        read_if(s, "n", c.scenario.n);
        read_if(s, "p", c.scenario.p);
        read_if(s, "xi", c.scenario.xi);
    }
    read_if(j, "reps", c.reps);
    if (j.contains("methods")) {
        c.methods.clear();
        for (const auto& m : j.at("methods"))
            c.methods.push_back(parse_method(m.get<std::string>()));
    }
    read_if(j, "value_ci", c.value_ci);
    read_if(j, "oracle_draws", c.oracle_draws);
    if (j.contains("reference")) {
        const Json& r = j.at("reference");
        read_if(r, "enabled", c.reference.enabled);
        read_if(r, "n", c.reference.n);
        read_if(r, "lambda", c.reference.lambda);
    }
    read_if(j, "seed", c.seed);
    read_if(j, "output", c.output);
    read_if(j, "summary", c.summary);
    read_if(j, "dump", c.dump);
}

} // namespace detail

/// Overlay the fields present in `j` onto `c`. Unknown keys are rejected.
inline void apply_json(const Json& j, RunConfig& c)
{
    try {
        detail::apply_json_fields(j, c);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("config: ") + e.what());
    }
}

inline RunConfig config_from_json(const Json& j)
{
    RunConfig c;
    apply_json(j, c);
    return c;
}

} // namespace pearl
