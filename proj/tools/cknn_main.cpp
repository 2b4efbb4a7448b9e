// Command-line front end: simulate benchmark scenarios, fit/tune regimes on
// CSV trial data, predict assignments, evaluate regime values and report
// per-covariate importance.

#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cknn/adaptive.hpp"
#include "cknn/dataset.hpp"
#include "cknn/model_io.hpp"
#include "cknn/parallel.hpp"
#include "cknn/simulation.hpp"
#include "cknn/tuning.hpp"
#include "cknn/value.hpp"

namespace {

using namespace cknn;

struct CommonOpts {
    std::string policy = "default";
    std::uint64_t seed = kDefaultSeed;
    int threads = 0;  // 0 = hardware
};

DecidePolicy parse_policy(const std::string& name) {
    if (name == "default") return DecidePolicy::PositiveWeightOnly;
    if (name == "literal") return DecidePolicy::LiteralZeroCompetes;
    throw InvalidArgumentError("policy must be 'default' or 'literal'");
}

Method parse_method(const std::string& name) {
    if (name == "cnn") return Method::Cnn;
    if (name == "acnn") return Method::Acnn;
    throw InvalidArgumentError("method must be 'cnn' or 'acnn'");
}

std::vector<int> parse_int_list(const std::string& text) {
    std::vector<int> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        out.push_back(std::stoi(item));
    }
    return out;
}

std::vector<double> parse_double_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        out.push_back(std::stod(item));
    }
    return out;
}

int effective_threads(int requested) {
    return requested <= 0 ? default_threads() : requested;
}

TuneGrid assemble_grid(const TrialDataset& data, Method method, int folds,
                       const std::string& k_grid, const std::string& delta_grid,
                       std::uint64_t seed, DecidePolicy policy, int threads) {
    TuneGrid grid = default_grid(data, method, folds, seed, policy, threads);
    if (!k_grid.empty()) {
        grid.k_values = parse_int_list(k_grid);
        std::sort(grid.k_values.begin(), grid.k_values.end());
    }
    if (!delta_grid.empty() && method == Method::Acnn) {
        grid.delta_values = parse_double_list(delta_grid);
        std::sort(grid.delta_values.begin(), grid.delta_values.end(), std::greater<double>());
    }
    return grid;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

int run_fit(const std::string& data_path, const std::string& method_name,
            const std::string& k_grid, const std::string& delta_grid, int folds,
            const std::string& out_path, const std::string& cv_out, const CommonOpts& common) {
    const DecidePolicy policy = parse_policy(common.policy);
    const Method method = parse_method(method_name);
    const int threads = effective_threads(common.threads);

    const TrialDataset data = load_csv(data_path);
    const TuneGrid grid =
        assemble_grid(data, method, folds, k_grid, delta_grid, common.seed, policy, threads);

    CvReport report;
    const RegimeModel model = fit_tuned(data, grid, method, policy, threads, &report);
    save_model(model, out_path);

    std::ostringstream tsv;
    write_cv_tsv(report, tsv);
    const std::string cv_path = cv_out.empty() ? out_path + ".cv.tsv" : cv_out;
    write_file_atomic(cv_path, tsv.str());

    const CvCell& chosen = report.chosen();
    std::cout << "chosen k=" << chosen.k;
    if (method == Method::Acnn) {
        std::cout << " delta=";
        if (chosen.delta == kUnitMetricDelta)
            std::cout << "-inf (unit metric)";
        else
            std::cout << format_double(chosen.delta);
    }
    std::cout << " heldout_value=" << format_double(chosen.pooled_value) << "\n";
    if (model.is_constant()) {
        std::cout << "model: constant arm " << model.constant_arm() << "\n";
    } else {
        std::cout << "sigma2:";
        for (double s : model.metric().sigma2) std::cout << " " << format_double(s);
        std::cout << "\n";
    }
    std::cout << "model written to " << out_path << "\ncv table written to " << cv_path << "\n";
    return 0;
}

int run_predict(const std::string& model_path, const std::string& data_path,
                const std::string& out_path) {
    const RegimeModel model = load_model(model_path);
    int p = 0;
    const std::vector<double> rows = load_covariates_csv(data_path, &p);
    if (p != model.p())
        throw DimensionError("model expects p=" + std::to_string(model.p()) +
                             " covariates, file has " + std::to_string(p));
    const int n = static_cast<int>(rows.size()) / std::max(p, 1);
    const std::vector<int> arms = model.predict_rows(rows, n);

    std::ostringstream csv;
    csv << "arm\n";
    for (int a : arms) csv << a << "\n";
    if (out_path.empty() || out_path == "-")
        std::cout << csv.str();
    else
        write_file_atomic(out_path, csv.str());
    return 0;
}

int run_evaluate(const std::string& model_path, const std::string& assignments_path,
                 const std::string& data_path, const std::string& out_path) {
    const TrialDataset data = load_csv(data_path);
    std::vector<int> assignments;
    if (!model_path.empty()) {
        const RegimeModel model = load_model(model_path);
        if (model.p() != data.p())
            throw DimensionError("model expects p=" + std::to_string(model.p()) +
                                 " covariates, file has " + std::to_string(data.p()));
        assignments = model.predict_rows(data.covariates(), data.n());
    } else {
        int p = 0;
        CsvSchema arm_schema;
        arm_schema.treatment = "__none__";
        arm_schema.outcome = "__none__";
        arm_schema.propensity = "__none__";
        const std::vector<double> raw = load_covariates_csv(assignments_path, &p, arm_schema);
        if (p != 1)
            throw InvalidArgumentError("assignments file must have exactly one column");
        for (double v : raw) assignments.push_back(static_cast<int>(v));
    }
    const ValueReport report = ipw_value(data, assignments);

    std::ostringstream tsv;
    tsv << "value\tmatched_weight\tmatched_count\n"
        << format_double(report.value) << "\t" << format_double(report.matched_weight) << "\t"
        << report.matched_count << "\n";
    if (out_path.empty() || out_path == "-")
        std::cout << tsv.str();
    else
        write_file_atomic(out_path, tsv.str());
    return 0;
}

int run_importance(const std::string& data_path, int k, double delta,
                   const std::string& out_path, const CommonOpts& common) {
    const DecidePolicy policy = parse_policy(common.policy);
    const TrialDataset data = load_csv(data_path);
    const ImportanceReport report =
        importance_report(data, k, delta, policy, effective_threads(common.threads));

    std::ostringstream tsv;
    write_importance_tsv(report, tsv);
    if (out_path.empty() || out_path == "-")
        std::cout << tsv.str();
    else
        write_file_atomic(out_path, tsv.str());
    return 0;
}

int run_simulate(int scenario, int p, bool correlated, int n, int reps, int test_n,
                 const std::string& method_name, int folds, const std::string& k_grid,
                 const std::string& delta_grid, int fixed_k, const std::string& out_path,
                 const std::string& replicates_out, const std::string& dump_train,
                 const std::string& dump_test, const std::string& dump_optimal,
                 const CommonOpts& common) {
    const DecidePolicy policy = parse_policy(common.policy);
    const Method method = parse_method(method_name);

    ScenarioSpec spec;
    spec.id = scenario;
    spec.p = p;
    spec.correlated = correlated;
    spec.n_train = n;
    spec.n_test = test_n;
    spec.seed = common.seed;

    if (!dump_train.empty() || !dump_test.empty() || !dump_optimal.empty()) {
        ScenarioSpec dump_spec = spec;
        dump_spec.seed = derive_seed(common.seed, 0);  // replicate 0's data
        auto [train, test] = generate(dump_spec);
        if (!dump_train.empty()) write_csv(train, dump_train);
        if (!dump_test.empty()) write_csv(test, dump_test);
        if (!dump_optimal.empty()) {
            std::ostringstream csv;
            csv << "arm\n";
            for (int i = 0; i < test.n(); ++i)
                csv << true_regime(dump_spec, test.covariate_row(i)) << "\n";
            write_file_atomic(dump_optimal, csv.str());
        }
    }

    RunOptions options;
    options.method = method;
    options.policy = policy;
    options.folds = folds;
    options.threads = effective_threads(common.threads);
    if (fixed_k > 0) options.fixed_k = fixed_k;
    if (!k_grid.empty() || !delta_grid.empty()) {
        // a grid override is built from replicate 0's training data
        ScenarioSpec grid_spec = spec;
        grid_spec.seed = derive_seed(common.seed, 0);
        auto [train, test] = generate(grid_spec);
        options.grid = assemble_grid(train, method, folds, k_grid, delta_grid, common.seed,
                                     policy, options.threads);
    }

    const RunResult result = run_replicates(spec, options, reps, common.seed);

    std::ostringstream summary;
    write_summary_tsv(spec, method, reps, common.seed, result.summary, summary);
    if (out_path.empty() || out_path == "-")
        std::cout << summary.str();
    else
        write_file_atomic(out_path, summary.str());

    if (!replicates_out.empty()) {
        std::ostringstream tsv;
        write_replicates_tsv(result, tsv);
        write_file_atomic(replicates_out, tsv.str());
    }

    std::cout << "mean_value=" << format_double(result.summary.mean_value)
              << " sd=" << format_double(result.summary.sd_value)
              << " completed=" << result.summary.completed
              << " failed=" << result.summary.failed << "\n";
    return result.summary.failed > 0 ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Individualized treatment regimes via causal k-nearest neighbors"};
    app.require_subcommand(1);

    CommonOpts common;

    // fit
    auto* fit = app.add_subcommand("fit", "Tune and fit a regime on CSV trial data");
    std::string fit_data, fit_method = "acnn", fit_kgrid, fit_dgrid, fit_out = "model.json",
                          fit_cvout;
    int fit_folds = 10;
    fit->add_option("--data", fit_data, "training CSV")->required();
    fit->add_option("--method", fit_method, "cnn|acnn");
    fit->add_option("--k-grid", fit_kgrid, "comma-separated k values");
    fit->add_option("--delta-grid", fit_dgrid, "comma-separated delta values (acnn)");
    fit->add_option("--folds", fit_folds, "cross-validation folds");
    fit->add_option("--out", fit_out, "model output path");
    fit->add_option("--cv-out", fit_cvout, "cv table output path (default <out>.cv.tsv)");

    // predict
    auto* predict = app.add_subcommand("predict", "Predict arms for covariate rows");
    std::string pr_model, pr_data, pr_out;
    predict->add_option("--model", pr_model, "model file")->required();
    predict->add_option("--data", pr_data, "covariates CSV")->required();
    predict->add_option("--out", pr_out, "assignments CSV output (default stdout)");

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "IPW value of a regime on labeled data");
    std::string ev_model, ev_assign, ev_data, ev_out;
    evaluate->add_option("--model", ev_model, "model file");
    evaluate->add_option("--assignments", ev_assign, "single-column CSV of arms");
    evaluate->add_option("--data", ev_data, "labeled CSV")->required();
    evaluate->add_option("--out", ev_out, "report output (default stdout)");

    // importance
    auto* importance = app.add_subcommand("importance", "Per-covariate importance scores");
    std::string im_data, im_out;
    int im_k = 0;
    double im_delta = 0.0;
    importance->add_option("--data", im_data, "training CSV")->required();
    importance->add_option("--k", im_k, "neighborhood size")->required();
    importance->add_option("--delta", im_delta, "threshold for the sigma2 column");
    importance->add_option("--out", im_out, "TSV output (default stdout)");

    // simulate
    auto* simulate = app.add_subcommand("simulate", "Run benchmark scenario replicates");
    int sim_scenario = 1, sim_p = 5, sim_n = 200, sim_reps = 1, sim_testn = 0, sim_folds = 10,
        sim_fixed_k = 0;
    bool sim_corr = false;
    std::string sim_method = "cnn", sim_kgrid, sim_dgrid, sim_out, sim_reps_out, sim_dump_train,
                sim_dump_test, sim_dump_optimal;
    simulate->add_option("--scenario", sim_scenario, "scenario id 1..5")
        ->check(CLI::Range(1, 5));
    simulate->add_option("--p", sim_p, "covariate dimension (5 or 25)")
        ->check(CLI::IsMember({5, 25}));
    simulate->add_flag("--correlated", sim_corr, "correlated normal covariates");
    simulate->add_option("--n", sim_n, "training sample size");
    simulate->add_option("--reps", sim_reps, "number of replicates");
    simulate->add_option("--test-n", sim_testn, "test sample size (0 = default)");
    simulate->add_option("--method", sim_method, "cnn|acnn");
    simulate->add_option("--folds", sim_folds, "cross-validation folds");
    simulate->add_option("--k-grid", sim_kgrid, "comma-separated k values");
    simulate->add_option("--delta-grid", sim_dgrid, "comma-separated delta values (acnn)");
    simulate->add_option("--fixed-k", sim_fixed_k, "skip tuning and fit cnn at this k");
    simulate->add_option("--out", sim_out, "summary TSV output (default stdout)");
    simulate->add_option("--replicates-out", sim_reps_out, "per-replicate TSV output");
    simulate->add_option("--dump-train", sim_dump_train, "write replicate-0 training CSV");
    simulate->add_option("--dump-test", sim_dump_test, "write replicate-0 test CSV");
    simulate->add_option("--dump-optimal", sim_dump_optimal,
                         "write replicate-0 test optimal arms CSV");

    for (auto* sub : {fit, predict, evaluate, importance, simulate}) {
        sub->add_option("--policy", common.policy, "default|literal zero-weight handling");
        sub->add_option("--seed", common.seed, "random seed");
        sub->add_option("--threads", common.threads, "worker threads (0 = hardware)");
    }

    CLI11_PARSE(app, argc, argv);

    try {
        if (fit->parsed())
            return run_fit(fit_data, fit_method, fit_kgrid, fit_dgrid, fit_folds, fit_out,
                           fit_cvout, common);
        if (predict->parsed()) return run_predict(pr_model, pr_data, pr_out);
        if (evaluate->parsed()) {
            if (ev_model.empty() == ev_assign.empty())
                throw InvalidArgumentError(
                    "evaluate needs exactly one of --model or --assignments");
            return run_evaluate(ev_model, ev_assign, ev_data, ev_out);
        }
        if (importance->parsed())
            return run_importance(im_data, im_k, im_delta, im_out, common);
        if (simulate->parsed())
            return run_simulate(sim_scenario, sim_p, sim_corr, sim_n, sim_reps, sim_testn,
                                sim_method, sim_folds, sim_kgrid, sim_dgrid, sim_fixed_k,
                                sim_out, sim_reps_out, sim_dump_train, sim_dump_test,
                                sim_dump_optimal, common);
    } catch (const cknn::Error& e) {
        std::cerr << "error[" << e.code() << "]: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error[internal]: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
