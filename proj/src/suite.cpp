#include "skan/suite.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "json.hpp"
#include "skan/checkpoint.hpp"

namespace skan {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Config parsing

namespace {

void reject_unknown(const YAML::Node& node, const std::set<std::string>& allowed, const std::string& where) {
    if (!node.IsMap()) throw ContractError("config: " + where + " must be a mapping");
    for (const auto& kv : node) {
        const auto key = kv.first.as<std::string>();
        if (!allowed.count(key)) throw ContractError("config: unknown key '" + key + "' in " + where);
    }
}

BasisDescriptor parse_descriptor(const YAML::Node& n) {
    if (n.IsScalar()) return default_descriptor(parse_kind(n.as<std::string>()));
    reject_unknown(n, {"kind", "degree", "range", "hyper"}, "pool entry");
    if (!n["kind"]) throw ContractError("config: pool entry without 'kind'");
    BasisDescriptor d = default_descriptor(parse_kind(n["kind"].as<std::string>()));
    if (n["degree"]) d.degree_or_grid = n["degree"].as<int>();
    if (n["range"]) {
        const auto r = n["range"].as<std::vector<double>>();
        if (r.size() != 2) throw ContractError("config: pool range needs two values");
        d.lo = r[0];
        d.hi = r[1];
    }
    if (n["hyper"]) {
        for (const auto& kv : n["hyper"]) {
            const auto key = kv.first.as<std::string>();
            const auto val = kv.second.as<double>();
            auto it = std::find_if(d.hyperparams.begin(), d.hyperparams.end(),
                                   [&](const auto& p) { return p.first == key; });
            if (it == d.hyperparams.end()) {
                throw ContractError("config: " + std::string(kind_name(d.kind)) + " has no hyperparameter '" + key + "'");
            }
            it->second = val;
        }
    }
    validate(d);
    return d;
}

void apply_schedule(const YAML::Node& n, TrainSchedule& s, const std::string& where) {
    if (!n) return;
    reject_unknown(n,
                   {"full_epochs_per_cycle", "select_epochs_per_cycle", "total_epochs", "final_epochs", "lr",
                    "pretrain_fraction", "sampling", "reinit_after_selection", "batch_size", "eval_every"},
                   where);
    if (n["full_epochs_per_cycle"]) s.full_epochs_per_cycle = n["full_epochs_per_cycle"].as<int>();
    if (n["select_epochs_per_cycle"]) s.select_epochs_per_cycle = n["select_epochs_per_cycle"].as<int>();
    if (n["total_epochs"]) s.total_epochs = n["total_epochs"].as<int>();
    if (n["final_epochs"]) s.final_epochs = n["final_epochs"].as<int>();
    if (n["lr"]) s.lr = n["lr"].as<double>();
    if (n["pretrain_fraction"]) s.pretrain_fraction = n["pretrain_fraction"].as<double>();
    if (n["sampling"]) s.sampling = parse_sampling(n["sampling"].as<std::string>());
    if (n["reinit_after_selection"]) s.reinit_after_selection = n["reinit_after_selection"].as<bool>();
    if (n["batch_size"]) s.batch_size = n["batch_size"].as<std::size_t>();
    if (n["eval_every"]) s.eval_every = n["eval_every"].as<int>();
    s.validate();
}

TrainSchedule default_schedule(TaskKind kind, const std::string& target) {
    if (kind == TaskKind::Fit) return TrainSchedule::fitting();
    return TrainSchedule::classification(image_set_key(parse_image_set(target)));
}

TaskKind parse_task_kind(const std::string& s) {
    if (s == "fit") return TaskKind::Fit;
    if (s == "classify") return TaskKind::Classify;
    throw ContractError("config: kind must be 'fit' or 'classify', got '" + s + "'");
}

std::string kind_key(TaskKind k) { return k == TaskKind::Fit ? "fit" : "classify"; }

}  // namespace

SuiteConfig parse_suite_config(const std::string& yaml_text) {
    YAML::Node root;
    try {
        root = YAML::Load(yaml_text);
    } catch (const YAML::Exception& e) {
        throw ContractError(std::string("config: ") + e.what());
    }
    reject_unknown(root,
                   {"name", "kind", "seeds", "out_dir", "data_dir", "pool", "fit", "classify", "save_checkpoints",
                    "schedule", "tasks"},
                   "suite");
    SuiteConfig cfg;
    try {
        if (root["name"]) cfg.name = root["name"].as<std::string>();
        if (!root["kind"]) throw ContractError("config: missing 'kind'");
        cfg.kind = parse_task_kind(root["kind"].as<std::string>());
        if (root["seeds"]) cfg.seeds = root["seeds"].as<std::vector<std::uint64_t>>();
        if (cfg.seeds.empty()) throw ContractError("config: 'seeds' is empty");
        if (root["out_dir"]) cfg.out_dir = root["out_dir"].as<std::string>();
        if (root["data_dir"]) {
            cfg.data_dir = root["data_dir"].as<std::string>();
        } else if (const char* env = std::getenv("SKAN_DATA_DIR")) {
            cfg.data_dir = env;
        }
        if (const auto p = root["pool"]) {
            if (p.IsScalar()) {
                cfg.pool_name = p.as<std::string>();
                if (cfg.pool_name == "default") {
                    cfg.pool = default_pool();
                } else if (cfg.pool_name == "base") {
                    cfg.pool = base_pool();
                } else {
                    throw ContractError("config: pool must be 'default', 'base' or a list");
                }
            } else {
                cfg.pool_name = "custom";
                cfg.pool.clear();
                for (const auto& e : p) cfg.pool.push_back(parse_descriptor(e));
                if (cfg.pool.empty()) throw ContractError("config: empty pool");
            }
        }
        if (const auto f = root["fit"]) {
            reject_unknown(f, {"n_train", "n_test"}, "fit");
            if (f["n_train"]) cfg.n_train = f["n_train"].as<std::size_t>();
            if (f["n_test"]) cfg.n_test = f["n_test"].as<std::size_t>();
        }
        if (const auto c = root["classify"]) {
            reject_unknown(c, {"train_subset", "test_subset"}, "classify");
            if (c["train_subset"]) cfg.train_subset = c["train_subset"].as<std::size_t>();
            if (c["test_subset"]) cfg.test_subset = c["test_subset"].as<std::size_t>();
        }
        if (root["save_checkpoints"]) cfg.save_checkpoints = root["save_checkpoints"].as<bool>();

        const auto tasks = root["tasks"];
        if (!tasks || !tasks.IsSequence() || tasks.size() == 0) throw ContractError("config: 'tasks' must be a non-empty list");
        std::set<std::string> ids;
        for (const auto& t : tasks) {
            reject_unknown(t, {"id", "target", "methods", "head", "kan_only", "schedule"}, "task");
            TaskConfig task;
            if (!t["target"]) throw ContractError("config: task without 'target'");
            task.target = t["target"].as<std::string>();
            if (cfg.kind == TaskKind::Fit) {
                parse_fit_function(task.target);
            } else {
                task.target = std::string(image_set_key(parse_image_set(task.target)));
            }
            task.methods = t["methods"] ? t["methods"].as<std::vector<std::string>>() : std::vector<std::string>{"SKAN"};
            for (const auto& m : task.methods) parse_method(m);
            if (t["head"]) task.head = parse_head(t["head"].as<std::string>());
            if (t["kan_only"]) task.kan_only = t["kan_only"].as<bool>();
            task.id = t["id"] ? t["id"].as<std::string>()
                              : task.target + (task.kan_only ? "_kanonly" : "") +
                                    (cfg.kind == TaskKind::Classify ? "_" + std::string(head_name(task.head)) : "");
            if (!ids.insert(task.id).second) throw ContractError("config: duplicate task id '" + task.id + "'");
            task.schedule = default_schedule(cfg.kind, task.target);
            apply_schedule(root["schedule"], task.schedule, "schedule");
            apply_schedule(t["schedule"], task.schedule, "task schedule");
            cfg.tasks.push_back(std::move(task));
        }
    } catch (const YAML::Exception& e) {
        throw ContractError(std::string("config: ") + e.what());
    }
    return cfg;
}

SuiteConfig load_suite_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ContractError("config: cannot open " + path.string());
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_suite_config(ss.str());
}

void apply_desk_scale(SuiteConfig& cfg) {
    for (auto& t : cfg.tasks) {
        auto& s = t.schedule;
        if (cfg.kind == TaskKind::Fit) {
            s.full_epochs_per_cycle = 8;
            s.select_epochs_per_cycle = 8;
            s.total_epochs = 400;
            s.final_epochs = -1;
        } else {
            s.full_epochs_per_cycle = 1;
            s.select_epochs_per_cycle = 1;
            s.final_epochs = 3;
        }
    }
    if (cfg.kind == TaskKind::Classify && (cfg.train_subset == 0 || cfg.train_subset > 10000)) cfg.train_subset = 10000;
}

std::uint64_t config_hash(const SuiteConfig& suite, const TaskConfig& task, const std::string& method,
                          std::uint64_t seed) {
    std::ostringstream os;
    os.precision(17);
    const auto& s = task.schedule;
    os << kind_key(suite.kind) << '|' << task.target << '|' << method << '|' << head_name(task.head) << '|'
       << task.kan_only << '|' << seed << '|' << suite.n_train << '|' << suite.n_test << '|' << suite.train_subset
       << '|' << suite.test_subset << '|' << s.full_epochs_per_cycle << '|' << s.select_epochs_per_cycle << '|'
       << s.total_epochs << '|' << s.final_epochs << '|' << s.lr << '|' << s.pretrain_fraction << '|'
       << sampling_name(s.sampling) << '|' << s.reinit_after_selection << '|' << s.batch_size;
    for (const auto& d : suite.pool) os << '|' << d.label() << ':' << d.lo << ':' << d.hi;
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : os.str()) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

// ---------------------------------------------------------------------------
// Running

std::size_t SuiteResult::errors() const {
    return static_cast<std::size_t>(std::count_if(rows.begin(), rows.end(), [](const auto& r) { return r.status != "ok"; }));
}

namespace {

json row_to_json(const ResultRow& r) {
    return json{{"task", r.task},
                {"target", r.target},
                {"method", r.method},
                {"head", r.head},
                {"seed", r.seed},
                {"metric_name", r.metric_name},
                {"metric", r.metric},
                {"params", r.params},
                {"wall_seconds", r.wall_seconds},
                {"config_hash", r.config_hash},
                {"pretrain_epochs", r.pretrain_epochs},
                {"final_epochs", r.final_epochs},
                {"checkpoint", r.checkpoint},
                {"selection", r.selection},
                {"status", r.status},
                {"error", r.error}};
}

ResultRow row_from_json(const json& j) {
    ResultRow r;
    r.task = j.at("task");
    r.target = j.at("target");
    r.method = j.at("method");
    r.head = j.at("head");
    r.seed = j.at("seed");
    r.metric_name = j.at("metric_name");
    r.metric = j.at("metric").is_null() ? std::nan("") : j.at("metric").get<double>();
    r.params = j.at("params");
    r.wall_seconds = j.at("wall_seconds");
    r.config_hash = j.at("config_hash");
    r.pretrain_epochs = j.at("pretrain_epochs");
    r.final_epochs = j.at("final_epochs");
    r.checkpoint = j.at("checkpoint");
    r.selection = j.at("selection");
    r.status = j.at("status");
    r.error = j.at("error");
    return r;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

/// Serialises result writes: every append rewrites the CSV row and the JSON
/// index so a crash leaves a consistent store.
class ResultStore {
public:
    ResultStore(std::filesystem::path dir, const SuiteConfig& cfg) : dir_(std::move(dir)) {
        std::filesystem::create_directories(dir_);
        csv_.open(dir_ / "results.csv", std::ios::trunc);
        if (!csv_) throw ContractError("results: cannot write " + (dir_ / "results.csv").string());
        csv_ << "task,target,method,head,seed,metric_name,metric,params,wall_seconds,config_hash,pretrain_epochs,"
                "final_epochs,checkpoint,selection,status,error\n";
        csv_.flush();
        index_ = json{{"suite", cfg.name}, {"kind", kind_key(cfg.kind)}, {"pool", cfg.pool_name}, {"rows", json::array()}};
        json pool = json::array();
        for (const auto& d : cfg.pool) pool.push_back(d.label());
        index_["pool_members"] = pool;
    }

    void append(const ResultRow& r) {
        csv_ << csv_field(r.task) << ',' << csv_field(r.target) << ',' << csv_field(r.method) << ',' << r.head << ','
             << r.seed << ',' << r.metric_name << ',' << fmt_double(r.metric) << ',' << r.params << ','
             << fmt_double(r.wall_seconds) << ',' << r.config_hash << ',' << r.pretrain_epochs << ',' << r.final_epochs
             << ',' << csv_field(r.checkpoint) << ',' << csv_field(r.selection) << ',' << r.status << ','
             << csv_field(r.error) << '\n';
        csv_.flush();
        index_["rows"].push_back(row_to_json(r));
        std::ofstream js(dir_ / "results.json", std::ios::trunc);
        js << index_.dump(2) << '\n';
    }

private:
    std::filesystem::path dir_;
    std::ofstream csv_;
    json index_;
};

json selection_to_json(const SelectionRecord& rec, const ResultRow& row) {
    json nodes = json::array();
    for (std::size_t i = 0; i < rec.nodes.size(); ++i) {
        const auto& n = rec.nodes[i];
        nodes.push_back({{"index", i + 1},
                         {"layer", n.layer},
                         {"node", n.node},
                         {"position", n.position},
                         {"family", n.family},
                         {"descriptor", n.descriptor},
                         {"removed", n.removed},
                         {"weight_history", n.weight_history}});
    }
    return json{{"task", row.task},     {"method", row.method},           {"seed", row.seed},
                {"pool_size", rec.pool_size}, {"cycles", rec.cycles}, {"pretrain_items", rec.pretrain_items},
                {"table", rec.table()}, {"nodes", nodes}};
}

std::string file_stem(const ResultRow& r) {
    std::string s = r.task + "__" + r.method + "__s" + std::to_string(r.seed);
    for (auto& c : s)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-') c = '_';
    return s;
}

struct ImageCache {
    std::map<std::string, ImageSplits> sets;

    const ImageSplits& get(const SuiteConfig& cfg, const std::string& key) {
        auto it = sets.find(key);
        if (it == sets.end()) it = sets.emplace(key, load_image_set(parse_image_set(key), cfg.data_dir)).first;
        return it->second;
    }
};

void run_one(const SuiteConfig& cfg, const TaskConfig& task, const std::string& method_name, std::uint64_t seed,
             ImageCache& images, ResultRow& row, const ProgressFn& progress) {
    const MethodSpec method = parse_method(method_name);
    TrainSchedule schedule = task.schedule;
    schedule.seed = seed;

    Model model;
    Dataset train, test;
    const Dataset* pretrain_source = nullptr;
    ProtocolHooks hooks;
    LossKind loss;

    if (cfg.kind == TaskKind::Fit) {
        const auto f = parse_fit_function(task.target);
        std::tie(train, test) = gen_fit_dataset(f, cfg.n_train, cfg.n_test, seed);
        model = build_fit_model(method, fit_function_info(f).arity, cfg.pool, seed);
        loss = LossKind::MSE;
        row.metric_name = "mse";
    } else {
        const auto set = parse_image_set(task.target);
        const auto& splits = images.get(cfg, task.target);
        pretrain_source = &splits.train;
        train = cfg.train_subset ? splits.train.head(cfg.train_subset) : splits.train;
        test = cfg.test_subset ? splits.test.head(cfg.test_subset) : splits.test;
        ClassifierOptions opts;
        opts.head = task.head;
        opts.kan_only = task.kan_only;
        model = build_classifier(set, method, opts, cfg.pool, seed);
        loss = LossKind::CrossEntropy;
        row.metric_name = "accuracy";
        if (method.method == Method::SKAN && task.head == Head::KAN && !task.kan_only) {
            hooks.after_selection = [seed](Model& m, const SelectionRecord&) {
                if (auto d = dominant_conv_family(m)) rebuild_kan_head(m, *d, seed ^ 0x4EADull);
            };
        }
    }
    hooks.pretrain_source = pretrain_source;
    if (progress) {
        hooks.on_epoch = [&](std::string_view phase, const EpochMetrics& m) {
            std::ostringstream os;
            os << "  " << phase << " epoch " << m.epoch << " loss " << m.train_loss;
            if (!std::isnan(m.test_metric)) os << " test " << row.metric_name << ' ' << m.test_metric;
            progress(1, os.str());
        };
    }

    const auto result = run_protocol(model, train, test, schedule, loss, hooks);
    row.metric = result.test_metric;
    row.params = count_params(model);
    row.pretrain_epochs = result.pretrain_epochs;
    row.final_epochs = result.final_epochs;
    if (!std::isfinite(row.metric)) throw TrainingAborted("non-finite test metric");

    const std::string stem = file_stem(row);
    if (cfg.save_checkpoints) {
        std::filesystem::create_directories(cfg.out_dir / "checkpoints");
        const auto rel = std::filesystem::path("checkpoints") / (stem + ".ckpt");
        save_model(cfg.out_dir / rel, model);
        row.checkpoint = rel.string();
    }
    if (result.selection) {
        std::filesystem::create_directories(cfg.out_dir / "selections");
        const auto rel = std::filesystem::path("selections") / (stem + ".json");
        std::ofstream os(cfg.out_dir / rel);
        os << selection_to_json(*result.selection, row).dump(2) << '\n';
        row.selection = rel.string();
    }
}

}  // namespace

SuiteResult run_suite(const SuiteConfig& cfg, const RunFilter& filter, const ProgressFn& progress) {
    ResultStore store(cfg.out_dir, cfg);
    ImageCache images;
    SuiteResult out;
    for (const auto& task : cfg.tasks) {
        if (filter.task && *filter.task != task.id && *filter.task != task.target) continue;
        for (const auto& method : task.methods) {
            if (filter.method && *filter.method != method) continue;
            for (auto seed : cfg.seeds) {
                if (filter.seed && *filter.seed != seed) continue;
                ResultRow row;
                row.task = task.id;
                row.target = task.target;
                row.method = method;
                row.head = cfg.kind == TaskKind::Classify ? std::string(head_name(task.head)) : "-";
                row.seed = seed;
                row.metric_name = cfg.kind == TaskKind::Fit ? "mse" : "accuracy";
                row.metric = std::nan("");
                char hash[17];
                std::snprintf(hash, sizeof hash, "%016llx",
                              static_cast<unsigned long long>(config_hash(cfg, task, method, seed)));
                row.config_hash = hash;
                const auto t0 = std::chrono::steady_clock::now();
                try {
                    if (progress) progress(0, "run " + task.id + " / " + method + " / seed " + std::to_string(seed));
                    run_one(cfg, task, method, seed, images, row, progress);
                } catch (const std::exception& e) {
                    row.status = "error";
                    row.error = e.what();
                }
                row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                if (progress) {
                    std::ostringstream os;
                    os << "done " << task.id << " / " << method << " / seed " << seed << ": ";
                    if (row.status == "ok")
                        os << row.metric_name << ' ' << row.metric;
                    else
                        os << "error: " << row.error;
                    os << " (" << row.wall_seconds << " s)";
                    progress(0, os.str());
                }
                store.append(row);
                out.rows.push_back(std::move(row));
            }
        }
    }
    return out;
}

SuiteResult run_suite(const std::filesystem::path& config_path, const RunFilter& filter,
                      const ProgressFn& progress) {
    return run_suite(load_suite_config(config_path), filter, progress);
}

std::vector<ResultRow> load_results(const std::filesystem::path& out_dir) {
    std::ifstream is(out_dir / "results.json");
    if (!is) throw ContractError("results: cannot open " + (out_dir / "results.json").string());
    json j;
    try {
        j = json::parse(is);
    } catch (const json::exception& e) {
        throw FormatError(std::string("results.json: ") + e.what());
    }
    std::vector<ResultRow> rows;
    for (const auto& r : j.at("rows")) rows.push_back(row_from_json(r));
    return rows;
}

std::string format_report(const std::vector<ResultRow>& rows) {
    struct Group {
        std::vector<double> metrics;
        std::size_t params = 0;
        std::size_t errors = 0;
        std::string metric_name;
    };
    std::vector<std::pair<std::string, std::string>> order;
    std::map<std::pair<std::string, std::string>, Group> groups;
    for (const auto& r : rows) {
        const auto key = std::make_pair(r.task, r.method);
        if (!groups.count(key)) order.push_back(key);
        auto& g = groups[key];
        g.metric_name = r.metric_name;
        if (r.status == "ok") {
            g.metrics.push_back(r.metric);
            g.params = r.params;
        } else {
            ++g.errors;
        }
    }
    std::ostringstream os;
    char line[256];
    std::snprintf(line, sizeof line, "%-28s %-16s %-9s %14s %8s %5s %6s\n", "task", "method", "metric", "median", "params",
                  "runs", "errors");
    os << line;
    for (const auto& key : order) {
        auto g = groups[key];
        double med = std::nan("");
        if (!g.metrics.empty()) {
            std::sort(g.metrics.begin(), g.metrics.end());
            const std::size_t n = g.metrics.size();
            med = n % 2 ? g.metrics[n / 2] : 0.5 * (g.metrics[n / 2 - 1] + g.metrics[n / 2]);
        }
        std::snprintf(line, sizeof line, "%-28s %-16s %-9s %14.6g %8zu %5zu %6zu\n", key.first.c_str(),
                      key.second.c_str(), g.metric_name.c_str(), med, g.params, g.metrics.size() + g.errors, g.errors);
        os << line;
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// Embeddings

std::size_t export_embeddings(const Model& model, const Dataset& data, const std::filesystem::path& path,
                              std::size_t batch_size) {
    if (!data.is_classification()) throw ContractError("export_embeddings: dataset has no labels");
    const std::size_t prefix = penultimate_layer(model);
    std::ofstream os(path);
    if (!os) throw ContractError("export_embeddings: cannot write " + path.string());
    NoGradGuard guard;
    std::size_t width = 0;
    std::vector<std::size_t> idx;
    char buf[32];
    for (std::size_t start = 0; start < data.size(); start += batch_size) {
        const std::size_t end = std::min(data.size(), start + batch_size);
        idx.resize(end - start);
        std::iota(idx.begin(), idx.end(), start);
        Tensor h = model.forward_prefix(data.batch_inputs(idx), prefix);
        width = h.numel() / idx.size();
        auto v = h.data();
        for (std::size_t r = 0; r < idx.size(); ++r) {
            for (std::size_t c = 0; c < width; ++c) {
                std::snprintf(buf, sizeof buf, "%.17g", v[r * width + c]);
                os << buf << ' ';
            }
            os << data.labels[idx[r]] << '\n';
        }
    }
    if (!os) throw ContractError("export_embeddings: write failed for " + path.string());
    return width;
}

EmbeddingMatrix load_embeddings(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw FormatError("embeddings: cannot open " + path.string());
    EmbeddingMatrix m;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<double> vals;
        const char* p = line.c_str();
        char* end = nullptr;
        for (;;) {
            const double v = std::strtod(p, &end);
            if (end == p) break;
            vals.push_back(v);
            p = end;
        }
        while (*p == ' ' || *p == '\t' || *p == '\r') ++p;
        if (*p != '\0' || vals.empty()) throw FormatError("embeddings: unparsable line " + std::to_string(lineno));
        const std::size_t cols = vals.size() - 1;
        if (m.rows == 0) {
            m.cols = cols;
        } else if (cols != m.cols) {
            throw FormatError("embeddings: line " + std::to_string(lineno) + " has " + std::to_string(cols) +
                              " values, expected " + std::to_string(m.cols));
        }
        m.labels.push_back(static_cast<int>(vals.back()));
        m.values.insert(m.values.end(), vals.begin(), vals.end() - 1);
        ++m.rows;
    }
    return m;
}

}  // namespace skan
