#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "bodycomp/bytes.hpp"
#include "bodycomp/config.hpp"
#include "bodycomp/cox.hpp"
#include "bodycomp/csv.hpp"
#include "bodycomp/error.hpp"
#include "bodycomp/longitudinal.hpp"
#include "bodycomp/pipeline.hpp"
#include "bodycomp/predictor.hpp"
#include "bodycomp/stats.hpp"
#include "bodycomp/uncertainty.hpp"

namespace fs = std::filesystem;
using namespace bodycomp;

namespace {

std::vector<double> parse_penalizers(const std::string& text)
{
    std::vector<double> out;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        const auto v = parse_double(item);
        if (!v)
            throw Error(ErrorKind::InvalidConfig, "bad penalizer '" + item + "'");
        out.push_back(*v);
    }
    if (out.empty())
        throw Error(ErrorKind::InvalidConfig, "empty penalizer list");
    return out;
}

void emit(const std::string& text, const std::string& path)
{
    if (path.empty() || path == "-")
        std::cout << text;
    else
        write_text(path, text);
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"CT body-composition pipeline: L3 muscle area, ensemble uncertainty and outcome statistics"};
    app.require_subcommand(1);
    int exit_code = 0;

    auto* pipeline = app.add_subcommand("pipeline", "Process study directories")->require_subcommand(1);

    std::string config_path;
    auto* run = pipeline->add_subcommand("run", "Run the measurement pipeline over input_root");
    run->add_option("--config", config_path, "TOML run configuration")->required()->check(CLI::ExistingFile);
    run->callback([&] {
        const RunConfig config = load_run_config(config_path);
        const PipelineResult result = run_pipeline(config);
        std::cerr << result.manifest.size() << " studies measured, " << result.errors.size() << " failed; outputs in "
                  << config.output_root.string() << "\n";
        for (const auto& e : result.errors)
            std::cerr << "  " << e.study << ": " << e.message << "\n";
        exit_code = result.exit_code;
    });

    std::string manifest_path, status_path, longitudinal_out;
    std::vector<std::string> patients;
    auto* longi = pipeline->add_subcommand("longitudinal", "SMA/SMI series per patient as CSV and SVG");
    longi->add_option("--manifest", manifest_path, "manifest.csv from a pipeline run")
        ->required()
        ->check(CLI::ExistingFile);
    longi->add_option("--status", status_path, "patient_id,status CSV; one panel per status")
        ->check(CLI::ExistingFile);
    longi->add_option("--patient", patients, "Restrict to these patients (repeatable)");
    longi->add_option("--out", longitudinal_out, "Output directory (default: next to the manifest)");
    longi->callback([&] {
        const auto rows = read_manifest(manifest_path);
        const auto status = status_path.empty() ? std::map<std::string, std::string>{} : read_status_csv(status_path);
        const auto out = emit_longitudinal(rows, status, patients);
        const fs::path dir = longitudinal_out.empty() ? fs::path(manifest_path).parent_path() : fs::path(longitudinal_out);
        write_text(dir / "longitudinal.csv", out.csv);
        write_text(dir / "longitudinal.svg", out.svg);
        std::cerr << out.series.size() << " patients written to " << dir.string() << "\n";
    });

    auto* stats = app.add_subcommand("stats", "Survival and calibration statistics")->require_subcommand(1);

    std::string cox_input, cox_penalizers = "0.1,0.5,1.0,1.5,2.0", cox_output;
    double test_fraction = 0.2;
    std::uint64_t cox_seed = 0;
    auto* cox = stats->add_subcommand("cox", "Penalised Cox proportional hazards sweep");
    cox->add_option("--input", cox_input, "Covariate CSV")->required()->check(CLI::ExistingFile);
    cox->add_option("--penalizer", cox_penalizers, "Comma-separated penalizer values")->capture_default_str();
    cox->add_option("--test-fraction", test_fraction, "Held-out fraction for test concordance")
        ->capture_default_str()
        ->check(CLI::Range(0.0, 0.95));
    cox->add_option("--seed", cox_seed, "Split seed")->capture_default_str();
    cox->add_option("--output", cox_output, "JSON output path (default stdout)");
    cox->callback([&] {
        const auto rows = read_covariates(cox_input);
        emit(cox_report_json(cox_penalizer_sweep(rows, parse_penalizers(cox_penalizers), test_fraction, cox_seed)),
             cox_output);
    });

    std::string pairs_path, calibration_out;
    auto* calibrate = stats->add_subcommand("calibrate", "Fit Platt scaling from score,label pairs");
    calibrate->add_option("--pairs", pairs_path, "score,label CSV")->required()->check(CLI::ExistingFile);
    calibrate->add_option("--output", calibration_out, "Calibration JSON")->required();
    calibrate->callback([&] {
        const auto [scores, labels] = read_calibration_pairs(pairs_path);
        const CalibrationModel model = fit_platt(scores, labels);
        save_calibration(model, calibration_out);
        std::cerr << "a=" << model.a << " b=" << model.b << "\n";
    });

    auto* predict = app.add_subcommand("predict", "Outcome classifiers")->require_subcommand(1);
    std::string preset_name, predict_input, predict_out = "predictor";
    std::uint64_t predict_seed = 0;
    auto* train = predict->add_subcommand("train", "Train a preset MLP and evaluate on the held-out split");
    train->add_option("--preset", preset_name, "cachexia or recurrence")
        ->required()
        ->check(CLI::IsMember({"cachexia", "recurrence"}));
    train->add_option("--input", predict_input, "Covariate CSV with a label column")
        ->required()
        ->check(CLI::ExistingFile);
    train->add_option("--seed", predict_seed, "Seed for split, initialisation, dropout and SMOTE")
        ->capture_default_str();
    train->add_option("--out", predict_out, "Output directory")->capture_default_str();
    train->callback([&] {
        const auto rows = read_covariates(predict_input);
        const PredictorRun result = train_preset(rows, parse_preset(preset_name), predict_seed);
        const fs::path dir(predict_out);
        write_text(dir / "model.json", model_to_json(result.training.model));
        write_text(dir / "eval.json", eval_report_json(result.test_report));
        std::string history = "epoch,loss\n";
        for (std::size_t e = 0; e < result.training.history.size(); ++e)
            history += std::to_string(e + 1) + "," + format_fixed(result.training.history[e], 9) + "\n";
        write_text(dir / "history.csv", history);
        std::cerr << "trained on " << result.train_size << " rows (+" << result.synthetic_count
                  << " synthetic), tested on " << result.test_size << "\n";
    });

    auto* phantom = app.add_subcommand("phantom", "Synthetic studies with known muscle area")->require_subcommand(1);
    std::string spec_path;
    auto* generate = phantom->add_subcommand("generate", "Write phantom study directories");
    generate->add_option("--spec", spec_path, "TOML phantom spec")->required()->check(CLI::ExistingFile);
    generate->callback([&] {
        const auto cohort = load_phantom_spec(spec_path);
        const std::size_t n = generate_cohort(cohort);
        std::cerr << n << " studies written to " << cohort.output_dir.string() << "\n";
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return exit_code;
}
