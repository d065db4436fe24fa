// skan: command-line front end for the benchmark suites.
//
//   skan fit --config configs/fit_desk.yaml --desk-scale
//   skan classify --config configs/mnist_desk.yaml --out-dir results/mnist
//   skan report --out-dir results/fit
//   skan params --task multiply --method ChebyKAN
//   skan export-embeddings --checkpoint model.ckpt --dataset mnist --out emb.txt

#include <cstdio>
#include <iostream>

#include "CLI11.hpp"
#include "skan/checkpoint.hpp"
#include "skan/suite.hpp"

using namespace skan;

namespace {

struct SuiteArgs {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    std::string data_dir;
    std::string task;
    std::string method;
    bool desk_scale = false;
    bool quiet = false;
    bool verbose = false;
};

void add_suite_flags(CLI::App* cmd, SuiteArgs& a) {
    cmd->add_option("--config", a.config, "Suite YAML file")->required()->check(CLI::ExistingFile);
    cmd->add_option("--seed", a.seed, "Run only this seed");
    cmd->add_option("--out-dir", a.out_dir, "Override the results directory");
    cmd->add_option("--data-dir", a.data_dir, "Override the dataset directory");
    cmd->add_option("--task", a.task, "Run only this task id or target");
    cmd->add_option("--method", a.method, "Run only this method");
    cmd->add_flag("--desk-scale", a.desk_scale, "Apply the reduced desk-scale budgets");
    cmd->add_flag("-q,--quiet", a.quiet, "No progress output");
    cmd->add_flag("-v,--verbose", a.verbose, "Print one progress line per epoch");
}

int run_suite_verb(const SuiteArgs& a, TaskKind expected) {
    SuiteConfig cfg = load_suite_config(a.config);
    if (cfg.kind != expected) {
        std::cerr << "error: " << a.config << " is a " << (cfg.kind == TaskKind::Fit ? "fit" : "classify")
                  << " suite\n";
        return 2;
    }
    if (!a.out_dir.empty()) cfg.out_dir = a.out_dir;
    if (!a.data_dir.empty()) cfg.data_dir = a.data_dir;
    if (a.desk_scale) apply_desk_scale(cfg);
    RunFilter filter;
    if (!a.task.empty()) filter.task = a.task;
    if (!a.method.empty()) filter.method = a.method;
    filter.seed = a.seed;

    ProgressFn progress;
    if (!a.quiet) {
        progress = [verbose = a.verbose](int detail, const std::string& msg) {
            if (detail > 0 && !verbose) return;
            std::cerr << msg << std::endl;
        };
    }
    const auto result = run_suite(cfg, filter, progress);
    std::cout << format_report(result.rows);
    for (const auto& r : result.rows)
        if (r.status != "ok") std::cerr << "error: " << r.task << " / " << r.method << " / seed " << r.seed << ": " << r.error << '\n';
    std::cout << "results written to " << cfg.out_dir.string() << '\n';
    if (result.rows.empty()) {
        std::cerr << "error: no run matched the filters\n";
        return 2;
    }
    return result.errors() ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Selectable KAN benchmark harness"};
    app.require_subcommand(1);

    SuiteArgs fit_args, cls_args;
    auto* fit = app.add_subcommand("fit", "Run a function-fitting suite");
    add_suite_flags(fit, fit_args);
    auto* cls = app.add_subcommand("classify", "Run an image-classification suite");
    add_suite_flags(cls, cls_args);

    std::string report_dir;
    auto* report = app.add_subcommand("report", "Summarise a results directory");
    report->add_option("--out-dir", report_dir, "Results directory")->required();

    std::string p_ckpt, p_task, p_method = "SKAN", p_head = "FC";
    bool p_kan_only = false;
    std::uint64_t p_seed = 0;
    auto* params = app.add_subcommand("params", "Count learnable parameters");
    params->add_option("--checkpoint", p_ckpt, "Count from a saved model");
    params->add_option("--task", p_task, "Fit function key or dataset name");
    params->add_option("--method", p_method, "Method name");
    params->add_option("--head", p_head, "Classifier head (FC or KAN)");
    params->add_flag("--kan-only", p_kan_only, "Flatten straight into a KAN head");
    params->add_option("--seed", p_seed, "Initialisation seed");

    std::string e_ckpt, e_dataset, e_data_dir, e_out, e_split = "test";
    std::size_t e_limit = 0;
    auto* emb = app.add_subcommand("export-embeddings", "Write penultimate-layer embeddings");
    emb->add_option("--checkpoint", e_ckpt, "Trained classifier")->required()->check(CLI::ExistingFile);
    emb->add_option("--dataset", e_dataset, "mnist, fashion_mnist, cifar10 or cifar100")->required();
    emb->add_option("--data-dir", e_data_dir, "Dataset directory (default $SKAN_DATA_DIR or ./data)");
    emb->add_option("--out", e_out, "Output text file")->required();
    emb->add_option("--split", e_split, "train or test")->check(CLI::IsMember({"train", "test"}));
    emb->add_option("--limit", e_limit, "Keep only the first N samples");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*fit) return run_suite_verb(fit_args, TaskKind::Fit);
        if (*cls) return run_suite_verb(cls_args, TaskKind::Classify);
        if (*report) {
            std::cout << format_report(load_results(report_dir));
            return 0;
        }
        if (*params) {
            Model m;
            if (!p_ckpt.empty()) {
                m = load_model(p_ckpt);
            } else if (!p_task.empty()) {
                const auto method = parse_method(p_method);
                bool is_fit = true;
                try {
                    parse_fit_function(p_task);
                } catch (const ContractError&) {
                    is_fit = false;
                }
                if (is_fit) {
                    m = build_fit_model(method, fit_function_info(parse_fit_function(p_task)).arity, default_pool(),
                                        p_seed);
                } else {
                    ClassifierOptions opts;
                    opts.head = parse_head(p_head);
                    opts.kan_only = p_kan_only;
                    m = build_classifier(parse_image_set(p_task), method, opts, default_pool(), p_seed);
                }
            } else {
                std::cerr << "error: params needs --checkpoint or --task\n";
                return 2;
            }
            std::cout << m.summary() << '\n' << count_params(m) << '\n';
            return 0;
        }
        if (*emb) {
            std::filesystem::path dir = e_data_dir;
            if (dir.empty()) dir = std::getenv("SKAN_DATA_DIR") ? std::getenv("SKAN_DATA_DIR") : "data";
            const Model m = load_model(e_ckpt);
            auto splits = load_image_set(parse_image_set(e_dataset), dir);
            Dataset& d = e_split == "train" ? splits.train : splits.test;
            if (e_limit) d = d.head(e_limit);
            const auto width = export_embeddings(m, d, e_out);
            std::cout << "wrote " << d.size() << " x " << width << " embeddings (+ label column) to " << e_out << '\n';
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
