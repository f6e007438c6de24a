// pearl: fit | test | value | simulate
//
// Every command takes its parameters from a JSON config (--config, or the path
// in PEARL_CONFIG when --config is absent) overlaid with command-line flags;
// flags win. The effective config, minus --threads, is echoed into each output.

#include <pearl/dataset.hpp>
#include <pearl/error.hpp>
#include <pearl/estimator.hpp>
#include <pearl/inference.hpp>
#include <pearl/json.hpp>
#include <pearl/parallel.hpp>
#include <pearl/simulation.hpp>
#include <pearl/value_inference.hpp>

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace pearl;

std::string fmt(double v)
{
    if (!std::isfinite(v))
        return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// Flags given on the command line. Unset optionals leave the config alone.
struct Flags {
    std::string config_path;
    std::optional<std::string> input, output, summary, dump, outcome, treatment, propensity, outcome_model,
        lambda_mode, bandwidth, surrogate;
    std::optional<std::vector<std::string>> covariates, methods;
    std::optional<std::vector<Index>> coordinates;
    std::optional<int> K, reps, scenario;
    std::optional<Index> n, p, max_screened;
    std::optional<double> trim_lo, trim_hi, lambda, split, xi, tolerance;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
    bool no_value_ci = false, no_reference = false;
};

RunConfig effective_config(const Flags& f)
{
    RunConfig c;
    std::string path = f.config_path;
    if (path.empty())
        if (const char* env = std::getenv("PEARL_CONFIG"); env && *env)
            path = env;
    if (!path.empty()) {
        std::ifstream in(path);
        if (!in)
            throw IoError("cannot open config file '" + path + "'");
        Json j;
        try {
            j = Json::parse(in);
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError("config file '" + path + "' is not valid JSON: " + e.what());
        }
        apply_json(j, c);
    }
    if (f.input) c.input = *f.input;
    if (f.output) c.output = *f.output;
    if (f.summary) c.summary = *f.summary;
    if (f.dump) c.dump = *f.dump;
    if (f.outcome) c.columns.outcome = *f.outcome;
    if (f.treatment) c.columns.treatment = *f.treatment;
    if (f.covariates) c.columns.covariates = *f.covariates;
    if (f.propensity) c.propensity = parse_propensity_backend(*f.propensity);
    if (f.outcome_model) c.outcome = parse_outcome_backend(*f.outcome_model);
    if (f.bandwidth) c.bandwidth = parse_bandwidth_mode(*f.bandwidth);
    if (f.surrogate) c.surrogate = *f.surrogate;
    if (f.methods) {
        c.methods.clear();
        for (const auto& m : *f.methods)
            c.methods.push_back(parse_method(m));
    }
    if (f.coordinates) c.coordinates = *f.coordinates;
    if (f.K) c.K = *f.K;
    if (f.reps) c.reps = *f.reps;
    if (f.scenario) c.scenario.scenario = *f.scenario;
    if (f.n) c.scenario.n = *f.n;
    if (f.p) c.scenario.p = *f.p;
    if (f.xi) c.scenario.xi = *f.xi;
    if (f.max_screened) c.max_screened = *f.max_screened;
    if (f.trim_lo) c.trim_lo = *f.trim_lo;
    if (f.trim_hi) c.trim_hi = *f.trim_hi;
    if (f.lambda_mode) {
        if (*f.lambda_mode != "cv" && *f.lambda_mode != "fixed")
            throw ValidationError("--lambda-mode must be cv or fixed");
        c.lambda.mode = *f.lambda_mode == "cv" ? LambdaPolicy::Mode::cv : LambdaPolicy::Mode::fixed;
    }
    if (f.lambda) {
        c.lambda.mode = LambdaPolicy::Mode::fixed;
        c.lambda.fixed = *f.lambda;
    }
    if (f.split) c.split_fraction = *f.split;
    if (f.tolerance) c.tolerance = *f.tolerance;
    if (f.seed) c.seed = *f.seed;
    if (f.threads) c.threads = *f.threads;
    if (f.no_value_ci) c.value_ci = false;
    if (f.no_reference) c.reference.enabled = false;
    c.validate();
    return c;
}

unsigned thread_count(const RunConfig& c) { return c.threads == 0 ? default_threads() : c.threads; }

// Output sink: a file, or stdout for "-".
class Sink {
public:
    explicit Sink(const std::string& path)
    {
        if (path.empty() || path == "-")
            return;
        file_.open(path, std::ios::binary);
        if (!file_)
            throw IoError("cannot open output file '" + path + "'");
    }
    std::ostream& stream() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }
    void close()
    {
        stream().flush();
        if (file_.is_open()) {
            file_.close();
            if (!file_)
                throw IoError("failed writing output");
        }
    }

private:
    std::ofstream file_;
};

void write_json(const std::string& path, const Json& j)
{
    Sink sink(path);
    sink.stream() << j.dump(2) << '\n';
    sink.close();
}

Dataset load_input(const RunConfig& c)
{
    if (c.input.empty())
        throw ValidationError("no input file (use --input or the config's \"input\")");
    if (c.propensity == PropensityBackend::known || c.outcome == OutcomeBackend::known)
        throw ValidationError("the 'known' nuisance backends are only available in simulate");
    return load_dataset(c.input, c.columns);
}

Json config_echo(const RunConfig& c) { return to_json(c); }

int cmd_fit(const RunConfig& c)
{
    const Dataset data = load_input(c);
    const auto fit = fit_all(data, c.K, c.pearl(), SeedStream(c.seed));
    Sink sink(c.output);
    auto& out = sink.stream();
    out << "# config: " << config_echo(c).dump() << '\n';
    out << "coef_index,name,pooled";
    for (int k = 0; k < c.K; ++k)
        out << ",fold_" << (k + 1);
    out << '\n';
    for (Index j = 0; j < data.p(); ++j) {
        out << (j + 1) << ',' << data.column_name(j) << ',' << fmt(fit.pooled(j));
        for (const auto& f : fit.fold_fits)
            out << ',' << fmt(f.beta(j));
        out << '\n';
    }
    sink.close();
    return 0;
}

std::vector<Index> requested_coordinates(const RunConfig& c, Index p)
{
    std::vector<Index> coords = c.coordinates;
    if (coords.empty())
        for (Index j = 1; j <= p; ++j)
            coords.push_back(j);
    for (Index j : coords)
        if (j > p)
            throw ValidationError("coordinate " + std::to_string(j) + " exceeds the " + std::to_string(p) +
                                  " covariates");
    return coords;
}

int cmd_test(const RunConfig& c)
{
    const Dataset data = load_input(c);
    const auto coords = requested_coordinates(c, data.p());
    const PearlConfig config = c.pearl();
    const SeedStream seed(c.seed);
    const auto fit = fit_all(data, c.K, config, seed);
    const auto problems = fold_problems(data, fit);
    const InferenceOptions opts = inference_options(config);
    std::vector<TestReport> reports(coords.size());
    parallel_for(coords.size(), thread_count(c), [&](std::size_t i) {
        reports[i] = test_coordinate(problems, coords[i] - 1, opts, seed.derive("inference"));
    });
    Json arr = Json::array();
    for (std::size_t i = 0; i < reports.size(); ++i) {
        Json r = to_json(reports[i]);
        r["name"] = data.column_name(coords[i] - 1);
        arr.push_back(std::move(r));
    }
    write_json(c.output, Json{{"config", config_echo(c)}, {"reports", arr}});
    return 0;
}

int cmd_value(const RunConfig& c)
{
    const Dataset data = load_input(c);
    const auto report = infer_value(data, c.K, c.pearl(), c.split_fraction, SeedStream(c.seed));
    write_json(c.output, Json{{"config", config_echo(c)}, {"value", to_json(report)}});
    return 0;
}

std::string summary_path(const RunConfig& c)
{
    if (!c.summary.empty())
        return c.summary;
    if (c.output.empty() || c.output == "-")
        return {};
    return std::filesystem::path(c.output).replace_extension(".json").string();
}

int cmd_simulate(const RunConfig& c)
{
    McConfig mc = c.study();
    mc.threads = thread_count(c);
    const auto study = run_study(mc);

    Sink sink(c.output);
    auto& out = sink.stream();
    out << "# config: " << config_echo(c).dump() << '\n';
    out << "method,coordinate,reference,rejection,rejection_se,coverage,coverage_se,mean_one_step,successes,"
           "failures,value_coverage,value_coverage_se,mean_value,mean_value_se\n";
    for (const auto& m : study.metrics.methods)
        for (const auto& cm : m.coordinates)
            out << to_string(m.method) << ',' << cm.coordinate << ',' << (std::isfinite(cm.reference) ? fmt(cm.reference) : "")
                << ',' << fmt(cm.rejection.rate) << ',' << fmt(cm.rejection.se) << ','
                << (std::isfinite(cm.reference) ? fmt(cm.coverage.rate) : "") << ','
                << (std::isfinite(cm.reference) ? fmt(cm.coverage.se) : "") << ',' << fmt(cm.mean_estimate) << ','
                << m.successes << ',' << m.failures << ','
                << (m.value_coverage.count ? fmt(m.value_coverage.rate) : "") << ','
                << (m.value_coverage.count ? fmt(m.value_coverage.se) : "") << ',' << fmt(m.mean_value) << ','
                << fmt(m.mean_value_se) << '\n';
    sink.close();

    if (const auto path = summary_path(c); !path.empty())
        write_json(path, Json{{"config", config_echo(c)}, {"metrics", to_json(study.metrics)}});

    if (!c.dump.empty()) {
        std::error_code ec;
        std::filesystem::create_directories(c.dump, ec);
        if (ec)
            throw IoError("cannot create dump directory '" + c.dump + "': " + ec.message());
        Json records = Json::array();
        for (const auto& r : study.records)
            records.push_back(to_json(r));
        write_json((std::filesystem::path(c.dump) / "records.json").string(),
                   Json{{"config", config_echo(c)}, {"records", records}});
        // The datasets are regenerated from their replication seeds.
        for (int r = 0; r < mc.reps; ++r) {
            const SeedStream rep = SeedStream(mc.seed).derive("replication", static_cast<std::uint64_t>(r));
            const auto sim = gen_scenario(mc.scenario, rep.derive("data"));
            char name[32];
            std::snprintf(name, sizeof name, "rep_%04d.csv", r);
            Sink file((std::filesystem::path(c.dump) / name).string());
            write_dataset(file.stream(), sim.data);
            file.close();
        }
    }
    return 0;
}

void report_error(ErrorKind kind, const std::string& message)
{
    std::cerr << Json{{"error", {{"kind", std::string(to_string(kind))}, {"message", message}}}}.dump() << '\n';
}

void add_common(CLI::App* cmd, Flags& f)
{
    cmd->add_option("--config", f.config_path, "JSON config file (default: $PEARL_CONFIG)");
    cmd->add_option("--seed", f.seed, "root random seed");
    cmd->add_option("--threads", f.threads, "worker threads (default: all cores; never changes results)");
    cmd->add_option("-o,--output", f.output, "output path, '-' for stdout");
    cmd->add_option("-K,--folds", f.K, "number of cross-fitting folds");
    cmd->add_option("--propensity", f.propensity, "l1-logistic | screen-kernel | known");
    cmd->add_option("--outcome-model", f.outcome_model, "l1-linear | screen-kernel | zero | known");
    cmd->add_option("--trim-lo", f.trim_lo, "lower propensity cap");
    cmd->add_option("--trim-hi", f.trim_hi, "upper propensity cap");
    cmd->add_option("--bandwidth", f.bandwidth, "silverman | cv-scale | cv-per-dimension");
    cmd->add_option("--max-screened", f.max_screened, "cap on variables kept by screening");
    cmd->add_option("--surrogate", f.surrogate, "surrogate loss (logistic)");
    cmd->add_option("--lambda-mode", f.lambda_mode, "cv | fixed");
    cmd->add_option("--lambda", f.lambda, "fixed penalty level (implies --lambda-mode fixed)");
    cmd->add_option("--tolerance", f.tolerance, "solver KKT tolerance");
}

void add_data(CLI::App* cmd, Flags& f)
{
    cmd->add_option("-i,--input", f.input, "CSV with a header row");
    cmd->add_option("--outcome", f.outcome, "outcome column (default y)");
    cmd->add_option("--treatment", f.treatment, "treatment column coded -1/1 (default a)");
    cmd->add_option("--covariates", f.covariates, "covariate columns (default: all others)")->delimiter(',');
}

int run(int argc, char** argv)
{
    CLI::App app{"Penalized doubly robust individualized treatment rules with inference"};
    app.require_subcommand(1);
    Flags f;

    auto* fit = app.add_subcommand("fit", "cross-fitted rule coefficients to CSV");
    add_common(fit, f);
    add_data(fit, f);

    auto* test = app.add_subcommand("test", "de-correlated score tests and intervals to JSON");
    add_common(test, f);
    add_data(test, f);
    test->add_option("-c,--coordinates", f.coordinates, "1-based coordinates (default: all)")->delimiter(',');

    auto* value = app.add_subcommand("value", "single-split value inference to JSON");
    add_common(value, f);
    add_data(value, f);
    value->add_option("--split", f.split, "fraction of rows used for training (default 0.5)");

    auto* sim = app.add_subcommand("simulate", "Monte Carlo study: metrics CSV plus JSON summary");
    add_common(sim, f);
    sim->add_option("--scenario", f.scenario, "1 or 2");
    sim->add_option("--n", f.n, "sample size");
    sim->add_option("--p", f.p, "dimension (at least 8)");
    sim->add_option("--xi", f.xi, "signal strength in [0, 1]");
    sim->add_option("--reps", f.reps, "replications");
    sim->add_option("--methods", f.methods, "pearl,baseline-q")->delimiter(',');
    sim->add_option("-c,--coordinates", f.coordinates, "1-based coordinates (default 1..8)")->delimiter(',');
    sim->add_option("--summary", f.summary, "JSON summary path (default: output with .json)");
    sim->add_option("--dump", f.dump, "directory for per-replication records and datasets");
    sim->add_option("--split", f.split, "value-inference training fraction");
    sim->add_flag("--no-value-ci", f.no_value_ci, "skip single-split value inference");
    sim->add_flag("--no-reference", f.no_reference, "skip the large-n reference fit (no coverage)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        report_error(ErrorKind::validation, e.what());
        return exit_code(ErrorKind::validation);
    }

    const RunConfig config = effective_config(f);
    if (fit->parsed())
        return cmd_fit(config);
    if (test->parsed())
        return cmd_test(config);
    if (value->parsed())
        return cmd_value(config);
    return cmd_simulate(config);
}

} // namespace

int main(int argc, char** argv)
{
    try {
        return run(argc, argv);
    } catch (const pearl::Error& e) {
        report_error(e.kind(), e.what());
        return pearl::exit_code(e.kind());
    } catch (const std::bad_alloc&) {
        report_error(pearl::ErrorKind::numerical, "out of memory");
        return pearl::exit_code(pearl::ErrorKind::numerical);
    } catch (const std::exception& e) {
        report_error(pearl::ErrorKind::numerical, e.what());
        return pearl::exit_code(pearl::ErrorKind::numerical);
    }
}
