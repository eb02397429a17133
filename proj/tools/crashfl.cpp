// SPDX-License-Identifier: Apache-2.0
// crashfl: crash fault-localization toolkit. Subcommands wire the library
// modules together; every command emits JSON on stdout (or --output) and
// keeps diagnostics on stderr.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "crashfl/agent.hpp"
#include "crashfl/corpus.hpp"
#include "crashfl/crashdump.hpp"
#include "crashfl/evalkit.hpp"
#include "crashfl/llm.hpp"
#include "crashfl/ranking.hpp"
#include "crashfl/reponav.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace crashfl;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFatal = 1;
constexpr int kExitDegraded = 2;

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void emit(const json& doc, const std::string& output) {
    const std::string text = doc.dump(2) + "\n";
    if (output.empty() || output == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(output, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + output);
    out << text;
}

std::string format6(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

// Configuration precedence: flags > environment > config file > defaults.
// The config file is JSON, found via --config or CRASHFL_CONFIG.
struct Layered {
    json file = json::object();

    static std::optional<std::string> env(const char* name) {
        const char* v = std::getenv(name);
        if (v && *v) return std::string(v);
        return std::nullopt;
    }

    void load(const std::string& cli_path) {
        std::string path = cli_path;
        if (path.empty()) {
            if (auto e = env("CRASHFL_CONFIG")) path = *e;
        }
        if (path.empty()) return;
        json doc = json::parse(read_file(path), nullptr, false);
        if (doc.is_discarded() || !doc.is_object()) {
            throw std::runtime_error("config file is not a JSON object: " + path);
        }
        file = doc;
    }

    int get_int(bool flag_given, int flag_value, const char* env_name, const char* key,
                int fallback) const {
        if (flag_given) return flag_value;
        if (auto e = env(env_name)) return std::stoi(*e);
        if (file.contains(key) && file[key].is_number_integer()) return file[key].get<int>();
        return fallback;
    }

    std::string get_string(const std::string& flag_value, const char* env_name, const char* key,
                           const std::string& fallback = {}) const {
        if (!flag_value.empty()) return flag_value;
        if (auto e = env(env_name)) return *e;
        if (file.contains(key) && file[key].is_string()) return file[key].get<std::string>();
        return fallback;
    }

    bool get_bool(bool flag_given, const char* env_name, const char* key) const {
        if (flag_given) return true;
        if (auto e = env(env_name)) return *e == "1" || *e == "true";
        if (file.contains(key) && file[key].is_boolean()) return file[key].get<bool>();
        return false;
    }
};

json locations_json(const CrashStack& stack) {
    json out = json::array();
    auto add = [&out](const StackLocation& loc, const char* origin) {
        out.push_back({{"path", loc.file_path},
                       {"line", loc.line},
                       {"origin", origin},
                       {"frame_index", loc.frame_index}});
    };
    for (const auto& loc : stack.pending) add(loc, "pending_exception");
    for (const auto& loc : stack.backtrace) add(loc, "backtrace");
    return out;
}

int cmd_parse(const std::string& dump_path, const std::string& output) {
    const Crashdump dump = parse_crashdump(read_file(dump_path), dump_path);

    json sections = json::array();
    for (const auto& s : dump.sections()) {
        std::string_view body = s.raw_body;
        if (!body.empty() && body.back() == '\n') body.remove_suffix(1);
        sections.push_back({{"name", s.name}, {"bytes", body.size()}});
    }

    json doc{{"sections", sections}, {"crash_type", nullptr}, {"locations", json::array()}};
    if (dump.has_section("CRASH_EXTINFO")) {
        try {
            const CrashExtInfo info = parse_crash_extinfo(dump.section("CRASH_EXTINFO"));
            doc["crash_type"] = std::string(to_string(classify_crash_type(info)));
        } catch (const MissingSignal&) {
            // leave null
        }
    }
    if (dump.has_section("CRASH_STACK")) {
        doc["locations"] = locations_json(parse_crash_stack(dump.section("CRASH_STACK")));
    }
    emit(doc, output);
    return kExitOk;
}

int cmd_baseline(const std::string& dump_path, const std::string& kind,
                 const std::string& output) {
    const Crashdump dump = parse_crashdump(read_file(dump_path), dump_path);
    const CrashStack stack = parse_crash_stack(dump.section("CRASH_STACK"));
    const BaselineRanking ranking = kind == "b1" ? baseline1(stack) : baseline2(stack);
    emit(json{{"kind", kind}, {"entries", ranking.entries}}, output);
    return kExitOk;
}

BackendFactory scripted_factory(const fs::path& script) {
    if (fs::is_directory(script)) {
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(script)) {
            if (e.path().extension() == ".jsonl") files.push_back(e.path());
        }
        std::sort(files.begin(), files.end());
        if (files.empty()) {
            throw std::runtime_error("no .jsonl scripts in " + script.string());
        }
        return [files](int run_index) -> std::unique_ptr<ChatBackend> {
            const auto& path = files[static_cast<std::size_t>(run_index) % files.size()];
            return std::make_unique<ScriptedBackend>(load_script(path));
        };
    }
    return [script](int) -> std::unique_ptr<ChatBackend> {
        return std::make_unique<ScriptedBackend>(load_script(script));
    };
}

struct LocalizeArgs {
    std::string dump, repo, crash_id, script, endpoint, model, augment_with, trace_dir, output,
        prompts_path, config_path;
    int R = 10, N = 25, jobs = 0;
    bool R_given = false, N_given = false, jobs_given = false;
    bool sanitize = false, no_deep_search = false, strict_term_check = false;
};

int cmd_localize(const LocalizeArgs& args) {
    Layered layered;
    layered.load(args.config_path);

    AgentConfig config;
    config.max_tool_interactions = layered.get_int(args.N_given, args.N, "CRASHFL_N", "N", 25);
    config.sanitize_inputs = args.sanitize || layered.get_bool(false, "CRASHFL_SANITIZE", "sanitize");
    config.enable_deep_search = !args.no_deep_search;
    config.strict_term_check = args.strict_term_check;
    const int R = layered.get_int(args.R_given, args.R, "CRASHFL_R", "R", 10);
    const int jobs = layered.get_int(args.jobs_given, args.jobs, "CRASHFL_JOBS", "jobs",
                                     std::min(R, 4));
    if (R < 1 || config.max_tool_interactions < 1) {
        throw std::runtime_error("R and N must be positive");
    }

    const std::string prompts_path =
        layered.get_string(args.prompts_path, "CRASHFL_PROMPTS", "prompts");
    PromptSet prompts;
    if (!prompts_path.empty()) {
        prompts = PromptSet::load(prompts_path);
        config.prompts = &prompts;
    }

    const std::string endpoint = layered.get_string(args.endpoint, "CRASHFL_ENDPOINT", "endpoint");
    const std::string model = layered.get_string(args.model, "CRASHFL_MODEL", "model");

    BackendFactory factory;
    if (!args.script.empty()) {
        config.backend.kind = BackendKind::Scripted;
        config.backend.script_path = args.script;
        factory = scripted_factory(args.script);
    } else if (!endpoint.empty() && !model.empty()) {
        config.backend.kind = BackendKind::Http;
        config.backend.endpoint_url = endpoint;
        config.backend.model_name = model;
        BackendConfig backend = config.backend;
        factory = [backend](int) { return make_backend(backend); };
    } else {
        throw std::runtime_error("localize needs --script or --endpoint plus --model");
    }

    const Crashdump dump = parse_crashdump(read_file(args.dump), args.dump);
    std::optional<std::string> revision;
    if (dump.has_section("BUILD")) {
        const std::string build(dump.section("BUILD"));
        if (auto pos = build.find("git: "); pos != std::string::npos) {
            auto end = build.find('\n', pos);
            revision = build.substr(pos + 5, end - pos - 5);
        }
    }
    const RepoSnapshot repo(args.repo, revision);

    const std::vector<AgentRun> runs = run_repeated(config, dump, repo, R, factory, jobs);
    const ScoredRanking ranking = aggregate(predictions_of(runs), R);

    const std::string crash_id =
        args.crash_id.empty() ? fs::path(args.dump).parent_path().filename().string() : args.crash_id;

    json doc = ranking_to_json(ranking, crash_id);
    if (!args.augment_with.empty()) {
        const CrashStack stack = parse_crash_stack(dump.section("CRASH_STACK"));
        const BaselineRanking filler =
            args.augment_with == "b1" ? baseline1(stack) : baseline2(stack);
        doc["augmented"] = augment(ranking, filler);
        doc["augment_with"] = args.augment_with;
    }

    int failed = 0;
    json statuses = json::array();
    for (const auto& run : runs) {
        statuses.push_back(std::string(to_string(run.status)));
        if (run.status == RunStatus::BackendFailed ||
            run.status == RunStatus::ContextLengthExceeded) {
            ++failed;
        }
    }
    doc["run_statuses"] = statuses;

    if (!args.trace_dir.empty()) write_trace(args.trace_dir, crash_id, runs);
    emit(doc, args.output);

    if (failed == R) {
        std::cerr << "crashfl: all " << R << " runs failed\n";
    }
    return failed > 0 ? kExitDegraded : kExitOk;
}

struct EvaluateArgs {
    std::string manifest, output;
    std::vector<std::string> rankings;
    std::vector<int> ks = {1, 2, 3, 5, 10};
    int folds = 5;
    std::uint64_t seed = 17;
};

int cmd_evaluate(const EvaluateArgs& args) {
    const fs::path manifest_path(args.manifest);
    const CorpusManifest manifest = load_manifest(manifest_path);
    const fs::path base_dir = manifest_path.parent_path();

    std::map<std::string, GroundTruth> truth;
    for (const auto& entry : manifest.entries) {
        truth[entry.crash_id] = GroundTruth{entry.crash_id, entry.buggy_files};
    }

    std::vector<fs::path> files;
    for (const auto& arg : args.rankings) {
        if (fs::is_directory(arg)) {
            for (const auto& e : fs::directory_iterator(arg)) {
                if (e.path().extension() == ".json") files.push_back(e.path());
            }
        } else {
            files.push_back(arg);
        }
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw std::runtime_error("no ranking files given");

    std::map<std::string, std::vector<std::string>> rankings;
    std::map<std::string, double> confidence_of;
    for (const auto& file : files) {
        json doc = json::parse(read_file(file));
        const std::string crash_id = doc.at("crash_id").get<std::string>();
        const ScoredRanking ranking = ranking_from_json(doc);
        rankings[crash_id] = ranking.paths();
        confidence_of[crash_id] = ranking.confidence.value();
    }

    EvalReport report;
    report.acc_at = acc_at_k(rankings, truth, args.ks);

    std::vector<double> confidences;
    std::vector<int> labels;
    for (const auto& [crash_id, paths] : rankings) {
        auto it = truth.find(crash_id);
        if (it == truth.end()) throw MissingGroundTruth("no ground truth for " + crash_id);
        const bool hit = top1_hit(paths, it->second);
        report.per_crash_success[crash_id] = hit;
        confidences.push_back(confidence_of[crash_id]);
        labels.push_back(hit ? 1 : 0);
    }

    report.bucket_ratios = bucket_success(confidences, labels);
    report.brier_raw = brier(confidences, labels);
    try {
        report.correlation = point_biserial(confidences, labels);
    } catch (const DegenerateInput&) {
        report.correlation.reset();
    }
    report.cv_folds = args.folds;
    report.cv_seed = args.seed;
    try {
        const std::vector<double> calibrated =
            platt_cv(confidences, labels, args.folds, args.seed);
        report.brier_calibrated = brier(calibrated, labels);
    } catch (const DegenerateInput&) {
        report.brier_calibrated.reset();
    }

    emit(eval_report_to_json(report), args.output);
    return kExitOk;
}

int cmd_calibrate(const std::string& input, int folds, std::uint64_t seed,
                  const std::string& output) {
    json doc = json::parse(read_file(input));
    const std::vector<double> confidences = doc.at("confidences").get<std::vector<double>>();
    const std::vector<int> labels = doc.at("labels").get<std::vector<int>>();

    const CalibrationModel model = platt_fit(confidences, labels);
    int fold_fallbacks = 0;
    const std::vector<double> calibrated =
        platt_cv(confidences, labels, folds, seed, &fold_fallbacks);

    json calibrated_json = json::array();
    for (double v : calibrated) calibrated_json.push_back(format6(v));

    emit(json{{"model",
               {{"slope", model.slope}, {"intercept", model.intercept}, {"fallback", model.fallback}}},
              {"brier_raw", brier(confidences, labels)},
              {"brier_calibrated", brier(calibrated, labels)},
              {"calibrated", calibrated_json},
              {"folds", folds},
              {"seed", seed},
              {"fold_fallbacks", fold_fallbacks}},
         output);
    return kExitOk;
}

std::vector<MixEntry> parse_mix(const std::string& text) {
    if (text.empty()) return default_crash_mix();
    std::vector<MixEntry> mix;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw std::runtime_error("mix entries look like TYPE=RATIO");
        std::string name = item.substr(0, eq);
        std::transform(name.begin(), name.end(), name.begin(),
                       [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
        const auto type = crash_type_from_string(name);
        if (!type) throw std::runtime_error("unknown crash type: " + name);
        mix.push_back({*type, std::stod(item.substr(eq + 1))});
    }
    return mix;
}

int cmd_synth(std::uint64_t seed, int n, const std::string& out_dir, const std::string& mix_text,
              const std::string& output) {
    const CorpusManifest manifest = generate_corpus(seed, n, parse_mix(mix_text), out_dir);
    emit(manifest_to_json(manifest), output);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"crash fault localization toolkit"};
    app.require_subcommand(1);

    // parse
    auto* parse = app.add_subcommand("parse", "split a crashdump into sections");
    std::string parse_dump, parse_output;
    parse->add_option("--dump", parse_dump, "crashdump file")->required();
    parse->add_option("--output,-o", parse_output, "output file (default stdout)");

    // baseline
    auto* baseline = app.add_subcommand("baseline", "stack-trace heuristic ranking");
    std::string baseline_dump, baseline_kind = "b1", baseline_output;
    baseline->add_option("--dump", baseline_dump, "crashdump file")->required();
    baseline->add_option("--kind", baseline_kind, "b1 or b2")
        ->check(CLI::IsMember({"b1", "b2"}));
    baseline->add_option("--output,-o", baseline_output, "output file (default stdout)");

    // localize
    auto* localize = app.add_subcommand("localize", "run the agent and aggregate a ranking");
    LocalizeArgs largs;
    localize->add_option("--dump", largs.dump, "crashdump file")->required();
    localize->add_option("--repo", largs.repo, "repository snapshot root")->required();
    localize->add_option("--crash-id", largs.crash_id, "crash identifier for outputs");
    localize->add_option("--script", largs.script, "scripted backend: file or directory");
    localize->add_option("--endpoint", largs.endpoint, "chat completions endpoint URL");
    localize->add_option("--model", largs.model, "model name");
    auto* ropt = localize->add_option("-R,--runs", largs.R, "repeated runs (default 10)");
    auto* nopt = localize->add_option("-N,--max-interactions", largs.N,
                                      "tool interaction budget (default 25)");
    auto* jopt = localize->add_option("--jobs", largs.jobs, "parallel runs (default min(R,4))");
    localize->add_flag("--sanitize", largs.sanitize, "serve sanitized crash sections");
    localize->add_flag("--no-deep-search", largs.no_deep_search, "drop get_term_definition");
    localize->add_flag("--strict-term-check", largs.strict_term_check,
                       "no leniency for echoed line-number prefixes");
    localize->add_option("--augment-with", largs.augment_with, "extend ranking with b1 or b2")
        ->check(CLI::IsMember({"b1", "b2"}));
    localize->add_option("--trace-dir", largs.trace_dir, "write run transcripts here");
    localize->add_option("--prompts", largs.prompts_path, "prompt asset file");
    localize->add_option("--config", largs.config_path, "JSON config file");
    localize->add_option("--output,-o", largs.output, "output file (default stdout)");

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "score rankings against ground truth");
    EvaluateArgs eargs;
    std::string ks_text;
    evaluate->add_option("--manifest", eargs.manifest, "corpus manifest")->required();
    evaluate->add_option("--rankings", eargs.rankings, "ranking JSON files or directories")
        ->required();
    evaluate->add_option("--ks", ks_text, "comma-separated k values (default 1,2,3,5,10)");
    evaluate->add_option("--folds", eargs.folds, "calibration CV folds (default 5)");
    evaluate->add_option("--seed", eargs.seed, "calibration CV seed (default 17)");
    evaluate->add_option("--output,-o", eargs.output, "output file (default stdout)");

    // calibrate
    auto* calibrate = app.add_subcommand("calibrate", "Platt-scale confidence scores");
    std::string cal_input, cal_output;
    int cal_folds = 5;
    std::uint64_t cal_seed = 17;
    calibrate->add_option("--input", cal_input, "JSON with confidences and labels")->required();
    calibrate->add_option("--folds", cal_folds, "CV folds (default 5)");
    calibrate->add_option("--seed", cal_seed, "CV seed (default 17)");
    calibrate->add_option("--output,-o", cal_output, "output file (default stdout)");

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic crash corpus");
    std::uint64_t synth_seed = 7;
    int synth_n = 10;
    std::string synth_out, synth_mix, synth_output;
    synth->add_option("--seed", synth_seed, "generator seed (default 7)");
    synth->add_option("-n,--count", synth_n, "number of crashes (default 10)");
    synth->add_option("--out", synth_out, "corpus output directory")->required();
    synth->add_option("--mix", synth_mix, "TYPE=RATIO,... (default: published distribution)");
    synth->add_option("--output,-o", synth_output, "manifest output (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitFatal;
    }

    try {
        if (parse->parsed()) return cmd_parse(parse_dump, parse_output);
        if (baseline->parsed()) return cmd_baseline(baseline_dump, baseline_kind, baseline_output);
        if (localize->parsed()) {
            largs.R_given = ropt->count() > 0;
            largs.N_given = nopt->count() > 0;
            largs.jobs_given = jopt->count() > 0;
            return cmd_localize(largs);
        }
        if (evaluate->parsed()) {
            if (!ks_text.empty()) {
                eargs.ks.clear();
                std::stringstream ss(ks_text);
                std::string item;
                while (std::getline(ss, item, ',')) eargs.ks.push_back(std::stoi(item));
            }
            return cmd_evaluate(eargs);
        }
        if (calibrate->parsed()) return cmd_calibrate(cal_input, cal_folds, cal_seed, cal_output);
        if (synth->parsed()) return cmd_synth(synth_seed, synth_n, synth_out, synth_mix,
                                              synth_output);
    } catch (const std::exception& e) {
        std::cerr << "crashfl: error: " << e.what() << "\n";
        return kExitFatal;
    }
    return kExitFatal;
}
