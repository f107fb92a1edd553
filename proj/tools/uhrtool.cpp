// Command-line front end: generate synthetic suites, evaluate strategies,
// classify grounding errors, and compare finished runs.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "uhr/runner.hpp"

namespace {

std::vector<std::string> split_csv(const std::string& csv) {
    std::vector<std::string> out;
    std::stringstream in(csv);
    std::string item;
    while (std::getline(in, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

void print_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (in) std::cout << in.rdbuf();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"evaluation toolkit for micro-target perception in very large images"};
    app.require_subcommand(1);

    auto* gen = app.add_subcommand(
        "generate", "build a balanced synthetic task suite with scene annotations");
    uhr::GenerateRequest gen_req;
    std::string tasks_csv;
    gen->add_option("--out", gen_req.out_dir, "dataset directory to create")
        ->required();
    gen->add_option("--seed", gen_req.seed, "generation seed (default 1)");
    gen->add_option("--per-task", gen_req.per_task,
                    "records per task (default 100)");
    gen->add_option("--tasks", tasks_csv,
                    "comma-separated task codes (default: all 16)");
    gen->add_option("--width", gen_req.config.width, "scene width in pixels");
    gen->add_option("--height", gen_req.config.height, "scene height in pixels");

    auto* ev = app.add_subcommand("eval", "run one strategy over a dataset");
    uhr::RunConfig run_cfg;
    ev->add_option("--dataset", run_cfg.dataset_dir, "dataset directory")
        ->required();
    ev->add_option("--out", run_cfg.out_dir, "run directory to create")->required();
    ev->add_option(
        "--strategy", run_cfg.strategy,
        "map, native, resize, query-crop, oracle-crop, or sliding (default map)");
    ev->add_option("--backend-url", run_cfg.backend_url,
                   "chat endpoint base URL; bearer token read from UHR_API_TOKEN");
    ev->add_option("--model", run_cfg.model, "model name sent to the endpoint");
    ev->add_option("--scripted", run_cfg.scripted_path,
                   "transcript file replayed instead of a live backend");
    ev->add_option("--segmenter-url", run_cfg.segmenter_url,
                   "box-prompt segmentation service (default: box-fill stub)");
    ev->add_option("--crop-size", run_cfg.crop_size,
                   "inspection window side in pixels (default 1024)");
    ev->add_option("--roi-policy", run_cfg.roi_policy,
                   "task_adaptive, uniform_1, uniform_2, or uniform_4");
    ev->add_option("--protocol", run_cfg.protocol, "coordinate convention")
        ->check(CLI::IsMember({"thousand", "unit", "abs"}));
    ev->add_option("--workers", run_cfg.workers, "parallel samples (default 4)");
    ev->add_option("--seed", run_cfg.seed, "run seed recorded in the config");
    ev->add_flag("--oracle", run_cfg.oracle_allowed,
                 "unlock the ground-truth crop strategy");
    ev->add_flag("--store-predictions,!--no-store-predictions",
                 run_cfg.store_predictions,
                 "keep prediction payloads in records (default on)");

    auto* di = app.add_subcommand(
        "diagnose", "classify grounding errors of a finished run");
    std::string run_dir, diag_dataset, diag_out;
    di->add_option("--run", run_dir, "run directory")->required();
    di->add_option("--dataset", diag_dataset,
                   "dataset directory with the scene sidecar")
        ->required();
    di->add_option("--out", diag_out, "output directory (default: the run dir)");

    auto* rep =
        app.add_subcommand("report", "compare finished runs side by side");
    std::vector<std::string> run_dirs;
    std::string rep_out;
    rep->add_option("runs", run_dirs, "run directories")->required()->expected(-1);
    rep->add_option("--out", rep_out, "also write compare.{txt,csv,json} here");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            gen_req.tasks = split_csv(tasks_csv);
            const std::size_t n = uhr::run_generate(gen_req);
            std::cout << "wrote " << n << " records to " << gen_req.out_dir << "\n";
        } else if (ev->parsed()) {
            const uhr::EvalRunSummary sum = uhr::run_eval(run_cfg);
            print_file((std::filesystem::path(sum.out_dir) / "report.txt").string());
            std::cout << "\nrun directory: " << sum.out_dir << "\n";
        } else if (di->parsed()) {
            const uhr::DiagnoseRunReport report =
                uhr::diagnose_run(run_dir, diag_dataset, diag_out);
            print_file(
                (std::filesystem::path(report.out_dir) / "diagnosis.txt").string());
            std::cout << "\ndiagnosis written to " << report.out_dir << "\n";
        } else if (rep->parsed()) {
            const uhr::ComparisonReport report = uhr::compare_runs(run_dirs);
            std::cout << report.text;
            if (!rep_out.empty()) {
                uhr::write_comparison(report, rep_out);
                std::cout << "\ncomparison written to " << rep_out << "\n";
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
