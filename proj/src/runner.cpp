#include "uhr/runner.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "uhr/hashing.hpp"
#include "uhr/image.hpp"
#include "uhr/tasks.hpp"

namespace uhr {

namespace fs = std::filesystem;

namespace {

using ordered_json = nlohmann::ordered_json;

std::string answer_kind_name(AnswerKind k) {
    switch (k) {
        case AnswerKind::kBoxes: return "boxes";
        case AnswerKind::kCount: return "count";
        case AnswerKind::kOption: return "option";
        case AnswerKind::kNull: return "null";
        case AnswerKind::kInvalid: return "invalid";
    }
    return "invalid";
}

AnswerKind answer_kind_from_name(const std::string& name) {
    for (const AnswerKind k : {AnswerKind::kBoxes, AnswerKind::kCount,
                               AnswerKind::kOption, AnswerKind::kNull,
                               AnswerKind::kInvalid}) {
        if (answer_kind_name(k) == name) return k;
    }
    throw RunnerError("unknown answer kind in record: " + name);
}

ordered_json answer_to_json(const ParsedAnswer& a) {
    ordered_json j;
    j["kind"] = answer_kind_name(a.kind);
    switch (a.kind) {
        case AnswerKind::kBoxes: {
            ordered_json arr = ordered_json::array();
            for (const GeomBox& b : a.boxes) {
                ordered_json coords = ordered_json::array();
                for (double v : b.coords) coords.push_back(v);
                arr.push_back(coords);
            }
            j["boxes"] = arr;
            break;
        }
        case AnswerKind::kCount:
            j["count"] = a.count;
            break;
        case AnswerKind::kOption:
            j["option"] = std::string(1, a.option);
            break;
        case AnswerKind::kNull:
            break;
        case AnswerKind::kInvalid:
            j["reason"] = a.invalid_reason;
            break;
    }
    return j;
}

ParsedAnswer answer_from_json(const ordered_json& j) {
    const AnswerKind kind = answer_kind_from_name(j.at("kind").get<std::string>());
    switch (kind) {
        case AnswerKind::kBoxes: {
            std::vector<GeomBox> boxes;
            for (const auto& coords : j.at("boxes")) {
                std::vector<double> values;
                for (const auto& v : coords) values.push_back(v.get<double>());
                if (values.size() != 4 && values.size() != 8)
                    throw RunnerError("stored box has wrong arity");
                boxes.push_back(GeomBox{
                    values.size() == 4 ? BoxKind::HBB : BoxKind::OBB,
                    std::move(values)});
            }
            return ParsedAnswer::make_boxes(std::move(boxes));
        }
        case AnswerKind::kCount:
            return ParsedAnswer::make_count(j.at("count").get<long long>());
        case AnswerKind::kOption: {
            const auto s = j.at("option").get<std::string>();
            if (s.size() != 1) throw RunnerError("stored option is not one letter");
            return ParsedAnswer::make_option(s[0]);
        }
        case AnswerKind::kNull:
            return ParsedAnswer::make_null();
        case AnswerKind::kInvalid:
            return ParsedAnswer::invalid(j.value("reason", std::string{}));
    }
    throw RunnerError("unreachable answer kind");
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += "\"";
    return out;
}

// Shortest decimal that parses back to the same double; keeps CSV cells in
// step with the JSON files.
std::string num_repr(double v) { return ordered_json(v).dump(); }

std::string fixed2(double v) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(2) << v;
    return out.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw RunnerError("cannot write " + path);
    out << content;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw RunnerError("cannot read " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

RoiBudgetPolicy policy_from_mode(RoiPolicyMode mode) {
    switch (mode) {
        case RoiPolicyMode::kTaskAdaptive: return RoiBudgetPolicy::task_adaptive();
        case RoiPolicyMode::kUniform1: return RoiBudgetPolicy::uniform(1);
        case RoiPolicyMode::kUniform2: return RoiBudgetPolicy::uniform(2);
        case RoiPolicyMode::kUniform4: return RoiBudgetPolicy::uniform(4);
    }
    throw RunnerError("unreachable policy mode");
}

bool path_inside(const fs::path& inner, const fs::path& outer) {
    const auto rel = fs::weakly_canonical(inner).lexically_relative(
        fs::weakly_canonical(outer));
    return !rel.empty() && rel.begin()->string() != "..";
}

std::string backend_description(const RunConfig& config) {
    if (!config.scripted_path.empty()) return "scripted replay: " + config.scripted_path;
    if (!config.backend_url.empty()) {
        return config.backend_url +
               (config.model.empty() ? "" : " (" + config.model + ")");
    }
    return "injected";
}

ordered_json load_json_file(const std::string& path) {
    try {
        return ordered_json::parse(read_text_file(path));
    } catch (const ordered_json::parse_error& e) {
        throw RunnerError(path + " is not valid JSON: " + e.what());
    }
}

}  // namespace

std::string canonical_strategy(const std::string& name) {
    std::string n = name;
    std::replace(n.begin(), n.end(), '-', '_');
    if (n == "sliding") n = "sliding_window";
    if (n == "map" || n == "native" || n == "resize" || n == "query_crop" ||
        n == "oracle_crop" || n == "sliding_window") {
        return n;
    }
    throw RunnerError("unknown strategy: " + name);
}

void validate_run_config(const RunConfig& config,
                         const std::vector<Sample>& samples,
                         bool skip_backend_source) {
    const std::string strategy = canonical_strategy(config.strategy);
    try {
        parse_convention(config.protocol);
    } catch (const CoordError& e) {
        throw RunnerError(e.what());
    }
    try {
        parse_roi_policy(config.roi_policy);
    } catch (const AgentError& e) {
        throw RunnerError(e.what());
    }
    if (config.crop_size < 16) throw RunnerError("crop size must be at least 16");
    if (config.workers < 1) throw RunnerError("worker count must be positive");
    if (config.dataset_dir.empty()) throw RunnerError("dataset directory required");
    if (config.out_dir.empty()) throw RunnerError("output directory required");
    if (path_inside(config.out_dir, config.dataset_dir)) {
        throw RunnerError("output directory must lie outside the dataset directory");
    }
    if (!skip_backend_source) {
        if (config.backend_url.empty() && config.scripted_path.empty()) {
            throw RunnerError("choose a backend: --backend-url or --scripted");
        }
        if (!config.backend_url.empty() && !config.scripted_path.empty()) {
            throw RunnerError("--backend-url and --scripted are mutually exclusive");
        }
    }
    if (samples.empty()) throw RunnerError("dataset has no samples");

    if (strategy == "query_crop") {
        std::size_t missing = 0;
        for (const Sample& s : samples)
            if (!s.region.has_value()) ++missing;
        if (missing > 0) {
            throw RunnerError("query_crop needs a region on every sample; " +
                              std::to_string(missing) + " lack one");
        }
    }
    if (strategy == "oracle_crop") {
        if (!config.oracle_allowed) {
            throw RunnerError(
                "the ground-truth crop strategy must be unlocked with --oracle");
        }
        std::size_t blind = 0;
        for (const Sample& s : samples)
            if (s.target_boxes.empty() && s.target_mask.empty()) ++blind;
        if (blind > 0) {
            throw RunnerError("oracle_crop needs locatable targets; " +
                              std::to_string(blind) + " samples have none");
        }
    }
}

std::string run_record_to_json_line(const RunRecord& r) {
    ordered_json j;
    j["id"] = r.id;
    j["task"] = r.task;
    j["score"] = r.raw_score;
    j["display"] = display_score(r.raw_score);
    j["parse"] = parse_status_name(r.parse_status);
    j["calls"] = r.calls;
    j["latency_ms"] = r.latency_ms;
    j["transport_failed"] = r.transport_failed;
    if (!r.error.empty()) j["error"] = r.error;
    if (r.prediction.has_value()) j["prediction"] = answer_to_json(*r.prediction);
    if (!r.mask_rle.empty()) j["mask_rle"] = r.mask_rle;
    return j.dump();
}

RunRecord run_record_from_json_line(const std::string& line) {
    ordered_json j;
    try {
        j = ordered_json::parse(line);
    } catch (const ordered_json::parse_error& e) {
        throw RunnerError(std::string("bad record line: ") + e.what());
    }
    RunRecord r;
    r.id = j.at("id").get<std::string>();
    r.task = j.at("task").get<std::string>();
    r.raw_score = j.at("score").get<double>();
    r.parse_status = parse_status_from_name(j.at("parse").get<std::string>());
    r.calls = j.at("calls").get<int>();
    r.latency_ms = j.at("latency_ms").get<long long>();
    r.transport_failed = j.at("transport_failed").get<bool>();
    r.error = j.value("error", std::string{});
    if (j.contains("prediction")) r.prediction = answer_from_json(j.at("prediction"));
    r.mask_rle = j.value("mask_rle", std::string{});
    return r;
}

void save_transcript(const std::string& path,
                     const std::vector<TranscriptEntry>& entries) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw RunnerError("cannot write " + path);
    for (const TranscriptEntry& e : entries) {
        ordered_json j;
        if (e.fingerprint != 0) j["fingerprint"] = std::to_string(e.fingerprint);
        j["stage"] = stage_name(e.stage);
        j["reply"] = e.reply;
        out << j.dump() << "\n";
    }
}

std::vector<TranscriptEntry> load_transcript(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw RunnerError("cannot read " + path);
    std::vector<TranscriptEntry> entries;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        ordered_json j;
        try {
            j = ordered_json::parse(line);
        } catch (const ordered_json::parse_error& e) {
            throw RunnerError(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
        TranscriptEntry entry;
        if (j.contains("fingerprint")) {
            const auto& f = j.at("fingerprint");
            entry.fingerprint = f.is_string()
                                    ? std::stoull(f.get<std::string>())
                                    : f.get<std::uint64_t>();
        }
        try {
            entry.stage = stage_from_name(j.value("stage", std::string{"unknown"}));
        } catch (const std::exception& e) {
            throw RunnerError(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
        entry.reply = j.at("reply").get<std::string>();
        entries.push_back(std::move(entry));
    }
    return entries;
}

std::unique_ptr<ScriptedBackend> scripted_from_file(const std::string& path) {
    auto backend = std::make_unique<ScriptedBackend>();
    for (const TranscriptEntry& e : load_transcript(path)) {
        if (e.fingerprint != 0) {
            backend->add_reply(e.fingerprint, e.reply);
        } else {
            if (e.stage == PromptStage::kUnknown) {
                throw RunnerError(
                    "transcript entry has neither a fingerprint nor a known stage");
            }
            backend->add_stage_reply(e.stage, e.reply);
        }
    }
    return backend;
}

std::string RecordingBackend::complete(const BackendRequest& request) {
    const std::uint64_t fp = request_fingerprint(request);
    const auto t0 = std::chrono::steady_clock::now();
    std::string reply;
    try {
        reply = inner_.complete(request);
    } catch (...) {
        elapsed_ns_ += std::chrono::duration_cast<std::chrono::nanoseconds>(
                           std::chrono::steady_clock::now() - t0)
                           .count();
        throw;
    }
    elapsed_ns_ += std::chrono::duration_cast<std::chrono::nanoseconds>(
                       std::chrono::steady_clock::now() - t0)
                       .count();
    entries_.push_back({fp, classify_stage(request.prompt), reply});
    return reply;
}

long long RecordingBackend::elapsed_ms() const {
    return inner_.remote() ? elapsed_ns_ / 1'000'000 : 0;
}

std::string file_digest(const std::string& path) {
    const std::string bytes = read_text_file(path);
    std::ostringstream out;
    out << std::hex << std::setw(16) << std::setfill('0') << fnv1a(bytes);
    return out.str();
}

namespace {

struct RunArtifacts {
    std::vector<RunRecord> records;
    std::vector<std::vector<TranscriptEntry>> transcripts;
};

RunArtifacts evaluate_samples(const RunConfig& config,
                              const std::vector<Sample>& samples,
                              ModelBackend& backend, Segmenter& segmenter) {
    const std::string strategy = canonical_strategy(config.strategy);
    const CoordConvention protocol = parse_convention(config.protocol);

    AgentConfig agent_cfg;
    agent_cfg.crop_side = config.crop_size;
    agent_cfg.protocol = protocol;
    agent_cfg.policy = policy_from_mode(parse_roi_policy(config.roi_policy));

    StrategyConfig strat_cfg;
    if (strategy != "map") {
        strat_cfg.strategy = parse_strategy(strategy);
        strat_cfg.view_side = config.crop_size;
        strat_cfg.protocol = protocol;
        strat_cfg.oracle_allowed = config.oracle_allowed;
    }

    const std::size_t n = samples.size();
    RunArtifacts art;
    art.records.resize(n);
    art.transcripts.resize(n);

    ImageCache cache;
    std::atomic<std::size_t> next{0};
    std::mutex err_mu;
    std::exception_ptr first_error;

    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            {
                std::lock_guard<std::mutex> lock(err_mu);
                if (first_error) return;
            }
            const Sample& s = samples[i];
            try {
                const auto image =
                    cache.get((fs::path(config.dataset_dir) / s.image_ref).string());
                RecordingBackend rec(backend);
                Prediction pred;
                if (strategy == "map") {
                    pred = run_map(rec, segmenter, *image, s, agent_cfg).prediction;
                } else {
                    pred = run_strategy(rec, segmenter, *image, s, strat_cfg);
                }
                const ScoreRecord sr = score_sample(s, pred);
                RunRecord& r = art.records[i];
                r.id = s.id;
                r.task = s.task;
                r.raw_score = sr.raw_score;
                r.parse_status = sr.parse_status;
                r.calls = pred.calls;
                r.latency_ms = rec.elapsed_ms();
                r.transport_failed = pred.transport_failed;
                r.error = pred.error;
                if (config.store_predictions) {
                    r.prediction = pred.answer;
                    if (pred.mask.has_value()) r.mask_rle = rle_compress(*pred.mask);
                }
                art.transcripts[i] = rec.entries();
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mu);
                if (!first_error) first_error = std::current_exception();
            }
        }
    };

    const std::size_t pool =
        std::min<std::size_t>(static_cast<std::size_t>(config.workers), n);
    std::vector<std::thread> threads;
    for (std::size_t t = 0; t < pool; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
    if (first_error) std::rethrow_exception(first_error);
    return art;
}

ordered_json aggregate_to_json(const RunConfig& config, const std::string& digest,
                               const EvalRunSummary& sum) {
    ordered_json j;
    j["strategy"] = canonical_strategy(config.strategy);
    j["model"] = config.model;
    j["protocol"] = config.protocol;
    j["crop_size"] = config.crop_size;
    j["roi_policy"] = config.roi_policy;
    j["seed"] = config.seed;
    j["oracle"] = config.oracle_allowed;
    j["dataset_hash"] = digest;
    j["samples"] = sum.records.size();
    j["total_calls"] = sum.total_calls;
    j["mean_calls"] = sum.mean_calls;
    ordered_json parses;
    for (const auto& [name, count] : sum.parse_counts) parses[name] = count;
    j["parse_counts"] = parses;

    ordered_json tasks;
    for (const char* code : kTaskCodes) {
        const auto it = sum.aggregate.task_scores.find(code);
        if (it == sum.aggregate.task_scores.end()) continue;
        ordered_json row;
        row["count"] = sum.aggregate.task_counts.at(code);
        row["raw"] = it->second;
        row["display"] = display_score(it->second);
        tasks[code] = row;
    }
    j["tasks"] = tasks;

    ordered_json dims;
    for (const char* dim : kDimensionNames) {
        const auto it = sum.aggregate.dimension_scores.find(dim);
        if (it == sum.aggregate.dimension_scores.end()) continue;
        ordered_json row;
        row["raw"] = it->second;
        row["display"] = display_score(it->second);
        dims[dim] = row;
    }
    j["dimensions"] = dims;

    ordered_json overall;
    overall["raw"] = sum.aggregate.overall;
    overall["display"] = display_score(sum.aggregate.overall);
    j["overall"] = overall;
    j["missing_tasks"] = sum.aggregate.missing_tasks;
    return j;
}

std::string aggregate_to_csv(const EvalRunSummary& sum) {
    std::ostringstream out;
    out << "section,name,count,raw,display\n";
    for (const char* code : kTaskCodes) {
        const auto it = sum.aggregate.task_scores.find(code);
        if (it == sum.aggregate.task_scores.end()) continue;
        out << "task," << code << "," << sum.aggregate.task_counts.at(code) << ","
            << num_repr(it->second) << "," << num_repr(display_score(it->second))
            << "\n";
    }
    for (const char* dim : kDimensionNames) {
        const auto it = sum.aggregate.dimension_scores.find(dim);
        if (it == sum.aggregate.dimension_scores.end()) continue;
        std::size_t count = 0;
        for (const char* code : kTaskCodes) {
            if (task_dimension(code) != dim) continue;
            const auto c = sum.aggregate.task_counts.find(code);
            if (c != sum.aggregate.task_counts.end()) count += c->second;
        }
        out << "dimension," << dim << "," << count << "," << num_repr(it->second)
            << "," << num_repr(display_score(it->second)) << "\n";
    }
    out << "overall,overall," << sum.records.size() << ","
        << num_repr(sum.aggregate.overall) << ","
        << num_repr(display_score(sum.aggregate.overall)) << "\n";
    return out.str();
}

std::string report_text(const RunConfig& config, const std::string& digest,
                        const EvalRunSummary& sum) {
    std::ostringstream out;
    out << "evaluation run\n";
    out << "  dataset:    " << config.dataset_dir << "  (fnv1a " << digest << ")\n";
    out << "  samples:    " << sum.records.size() << "\n";
    out << "  strategy:   " << canonical_strategy(config.strategy)
        << "    protocol: " << config.protocol << "    crop: " << config.crop_size
        << "\n";
    out << "  roi policy: " << config.roi_policy << "\n";
    out << "  backend:    " << backend_description(config) << "\n";
    out << "  seed:       " << config.seed << "    workers: " << config.workers
        << "\n";
    out << "  oracle:     " << (config.oracle_allowed ? "unlocked" : "off") << "\n";
    out << "  calls:      " << sum.total_calls << " total, " << fixed2(sum.mean_calls)
        << " mean per sample\n";
    out << "  parse:      ";
    bool first = true;
    for (const auto& [name, count] : sum.parse_counts) {
        if (!first) out << ", ";
        out << count << " " << name;
        first = false;
    }
    out << "\n\n";

    out << "task scores (x100)\n";
    for (const char* code : kTaskCodes) {
        const auto it = sum.aggregate.task_scores.find(code);
        if (it == sum.aggregate.task_scores.end()) continue;
        out << "  " << std::left << std::setw(5) << code << std::right
            << std::setw(8) << fixed2(display_score(it->second)) << "   ("
            << sum.aggregate.task_counts.at(code) << " samples)\n";
    }
    if (!sum.aggregate.missing_tasks.empty()) {
        out << "  absent:";
        for (const auto& t : sum.aggregate.missing_tasks) out << " " << t;
        out << "\n";
    }
    out << "\ndimension scores (x100)\n";
    for (const char* dim : kDimensionNames) {
        const auto it = sum.aggregate.dimension_scores.find(dim);
        if (it == sum.aggregate.dimension_scores.end()) continue;
        out << "  " << std::left << std::setw(13) << dim << std::right
            << std::setw(8) << fixed2(display_score(it->second)) << "\n";
    }
    out << "\noverall (x100): " << fixed2(display_score(sum.aggregate.overall))
        << "\n";
    return out.str();
}

}  // namespace

EvalRunSummary run_eval(const RunConfig& config, ModelBackend& backend,
                        Segmenter& segmenter) {
    const std::string samples_path =
        (fs::path(config.dataset_dir) / "samples.jsonl").string();
    const std::vector<Sample> samples = load_dataset(samples_path);
    validate_run_config(config, samples, /*skip_backend_source=*/true);
    const std::string digest = file_digest(samples_path);

    RunArtifacts art = evaluate_samples(config, samples, backend, segmenter);

    EvalRunSummary sum;
    sum.records = std::move(art.records);
    sum.out_dir = config.out_dir;
    sum.dataset_hash = digest;

    std::vector<ScoreRecord> scores;
    scores.reserve(sum.records.size());
    for (const RunRecord& r : sum.records) {
        ScoreRecord s;
        s.sample_id = r.id;
        s.task = r.task;
        s.raw_score = r.raw_score;
        s.parse_status = r.parse_status;
        scores.push_back(std::move(s));
        sum.total_calls += r.calls;
        ++sum.parse_counts[parse_status_name(r.parse_status)];
    }
    sum.mean_calls = static_cast<double>(sum.total_calls) /
                     static_cast<double>(sum.records.size());
    sum.aggregate = aggregate(scores);

    // Emitted reports must keep overall equal to the task macro-mean.
    double mean = 0.0;
    for (const auto& [task, value] : sum.aggregate.task_scores) mean += value;
    mean /= static_cast<double>(sum.aggregate.task_scores.size());
    if (std::abs(mean - sum.aggregate.overall) > 1e-9) {
        throw RunnerError("aggregate overall drifted from the task macro-mean");
    }

    fs::create_directories(config.out_dir);
    const fs::path out(config.out_dir);

    ordered_json cfg;
    cfg["dataset"] = config.dataset_dir;
    cfg["dataset_hash"] = digest;
    cfg["strategy"] = canonical_strategy(config.strategy);
    cfg["backend_url"] = config.backend_url;
    cfg["model"] = config.model;
    cfg["scripted"] = config.scripted_path;
    cfg["segmenter_url"] = config.segmenter_url;
    cfg["crop_size"] = config.crop_size;
    cfg["roi_policy"] = config.roi_policy;
    cfg["protocol"] = config.protocol;
    cfg["workers"] = config.workers;
    cfg["seed"] = config.seed;
    cfg["oracle"] = config.oracle_allowed;
    cfg["store_predictions"] = config.store_predictions;
    cfg["samples"] = sum.records.size();
    write_text_file((out / "config.json").string(), cfg.dump(2) + "\n");

    std::ostringstream records_out;
    for (const RunRecord& r : sum.records)
        records_out << run_record_to_json_line(r) << "\n";
    write_text_file((out / "records.jsonl").string(), records_out.str());

    std::vector<TranscriptEntry> flat;
    for (const auto& per_sample : art.transcripts)
        flat.insert(flat.end(), per_sample.begin(), per_sample.end());
    save_transcript((out / "transcript.jsonl").string(), flat);

    write_text_file((out / "aggregate.json").string(),
                    aggregate_to_json(config, digest, sum).dump(2) + "\n");
    write_text_file((out / "aggregate.csv").string(), aggregate_to_csv(sum));
    write_text_file((out / "report.txt").string(),
                    report_text(config, digest, sum));
    return sum;
}

EvalRunSummary run_eval(const RunConfig& config) {
    const std::string samples_path =
        (fs::path(config.dataset_dir) / "samples.jsonl").string();
    const std::vector<Sample> samples = load_dataset(samples_path);
    validate_run_config(config, samples, /*skip_backend_source=*/false);

    std::unique_ptr<ModelBackend> backend;
    if (!config.scripted_path.empty()) {
        backend = scripted_from_file(config.scripted_path);
    } else {
        HttpBackendConfig http;
        http.base_url = config.backend_url;
        http.model = config.model;
        backend = std::make_unique<HttpBackend>(http);
    }
    std::unique_ptr<Segmenter> segmenter;
    if (!config.segmenter_url.empty()) {
        segmenter = std::make_unique<HttpSegmenter>(config.segmenter_url);
    } else {
        segmenter = std::make_unique<BoxFillSegmenter>();
    }
    return run_eval(config, *backend, *segmenter);
}

std::size_t run_generate(const GenerateRequest& request) {
    if (request.out_dir.empty()) throw RunnerError("output directory required");
    if (request.per_task < 1) throw RunnerError("per-task quota must be positive");

    std::vector<std::string> tasks = request.tasks;
    if (tasks.empty()) tasks.assign(kTaskCodes.begin(), kTaskCodes.end());

    SuiteRequest suite_req;
    suite_req.config = request.config;
    suite_req.seed = request.seed;
    for (const std::string& task : tasks)
        suite_req.quotas.emplace_back(task, request.per_task);

    const GeneratedSuite suite = generate_suite(suite_req);
    write_suite(suite, request.out_dir);

    ordered_json manifest;
    manifest["seed"] = request.seed;
    manifest["per_task"] = request.per_task;
    manifest["tasks"] = tasks;
    manifest["total"] = suite.samples.size();
    ordered_json gen;
    gen["width"] = request.config.width;
    gen["height"] = request.config.height;
    gen["min_objects"] = request.config.min_objects;
    gen["max_objects"] = request.config.max_objects;
    gen["min_separation"] = request.config.min_separation;
    gen["max_place_attempts"] = request.config.max_place_attempts;
    gen["scene_attempts"] = request.config.scene_attempts;
    gen["direction_margin_deg"] = request.config.direction_margin_deg;
    gen["distance_ratio"] = request.config.distance_ratio;
    gen["distance_nearest"] = request.config.distance_nearest;
    manifest["generator"] = gen;
    write_text_file((fs::path(request.out_dir) / "manifest.json").string(),
                    manifest.dump(2) + "\n");
    return suite.samples.size();
}

namespace {

// Tasks whose answer is a single box aligned to one annotated object; only
// these can be pushed through the error classifier.
bool diagnosable_task(const std::string& task) {
    return task == "BG" || task == "CG";
}

std::string diagnosis_text(const DiagnoseRunReport& report,
                           const std::string& run_dir, const std::string& strategy,
                           const std::string& model) {
    std::ostringstream out;
    out << "grounding error diagnosis\n";
    out << "  run:       " << run_dir;
    if (!strategy.empty()) {
        out << "  (" << strategy << (model.empty() ? "" : "/" + model) << ")";
    }
    out << "\n";
    out << "  records:   " << report.rows.size() << " diagnosed, " << report.skipped
        << " skipped (other tasks)\n\n";
    out << "  label histogram\n";
    for (const DiagnosisLabel l : kAllDiagnosisLabels) {
        out << "    " << std::left << std::setw(6) << label_name(l) << std::right
            << std::setw(6) << report.histogram.counts.at(l) << std::setw(10)
            << fixed2(report.histogram.percentages.at(l)) << "%\n";
    }
    out << "\n  scale sensitivity (target side length vs score)\n";
    for (const auto& [task, corr] : report.scale) {
        out << "    " << task << ": n=" << corr.n;
        if (corr.pearson_r.has_value()) {
            std::ostringstream num;
            num << std::fixed << std::setprecision(4) << *corr.pearson_r;
            out << "  pearson " << num.str();
        } else {
            out << "  pearson n/a";
        }
        if (corr.spearman_r.has_value()) {
            std::ostringstream num;
            num << std::fixed << std::setprecision(4) << *corr.spearman_r;
            out << "  spearman " << num.str();
        } else {
            out << "  spearman n/a";
        }
        out << "\n";
    }
    return out.str();
}

}  // namespace

DiagnoseRunReport diagnose_run(const std::string& run_dir,
                               const std::string& dataset_dir,
                               const std::string& out_dir) {
    const fs::path run(run_dir);
    if (!fs::exists(run / "records.jsonl")) {
        throw RunnerError("no records.jsonl under " + run_dir);
    }

    std::string strategy, model;
    if (fs::exists(run / "config.json")) {
        const ordered_json cfg = load_json_file((run / "config.json").string());
        strategy = cfg.value("strategy", std::string{});
        model = cfg.value("model", std::string{});
    }

    std::vector<RunRecord> records;
    {
        std::ifstream in((run / "records.jsonl").string(), std::ios::binary);
        std::string line;
        while (std::getline(in, line)) {
            if (!line.empty()) records.push_back(run_record_from_json_line(line));
        }
    }

    const std::vector<Sample> samples =
        load_dataset((fs::path(dataset_dir) / "samples.jsonl").string());
    std::map<std::string, const Sample*> by_id;
    for (const Sample& s : samples) by_id[s.id] = &s;

    std::map<std::string, Scene> scenes;
    try {
        scenes = load_scenes((fs::path(dataset_dir) / "scenes.jsonl").string());
    } catch (const std::exception& e) {
        throw RunnerError(std::string("scene annotations required for diagnosis: ") +
                          e.what());
    }

    DiagnoseRunReport report;
    std::vector<DiagnosisLabel> labels;
    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>>
        scale_data;  // task -> (side lengths, scores)

    for (const RunRecord& r : records) {
        if (!diagnosable_task(r.task)) {
            ++report.skipped;
            continue;
        }
        if (!r.prediction.has_value()) {
            throw RunnerError(
                "records were written without stored predictions; rerun the "
                "evaluation with --store-predictions");
        }
        const auto sit = by_id.find(r.id);
        if (sit == by_id.end()) {
            throw RunnerError("record " + r.id + " matches no dataset sample");
        }
        const Sample& sample = *sit->second;
        const auto scit = scenes.find(sample.image_ref);
        if (scit == scenes.end()) {
            throw RunnerError("no scene annotation for image " + sample.image_ref);
        }
        const Scene& scene = scit->second;
        if (sample.target_boxes.size() != 1) {
            throw RunnerError("sample " + r.id + " does not have a single box target");
        }

        DiagnosisContext ctx;
        ctx.gt_box = sample.target_boxes.front();
        ctx.semantic_region = sample.region;
        const SceneObject* gt_obj = nullptr;
        for (const SceneObject& obj : scene.objects) {
            ctx.all_objects.push_back({obj.id, obj.category, obj.box});
            if (obj.box == ctx.gt_box) gt_obj = &obj;
        }
        if (gt_obj == nullptr) {
            throw RunnerError("target box of sample " + r.id +
                              " matches no annotated object");
        }
        ctx.gt_category = gt_obj->category;
        ctx.gt_object_id = gt_obj->id;
        // Synthetic queries single out their target, so the full referring
        // condition is satisfied by exactly that object.
        ctx.referring_condition_ids = {gt_obj->id};

        const DiagnosisOutcome outcome = diagnose(*r.prediction, ctx);
        report.rows.push_back(
            {r.id, r.task, outcome.label, outcome.iou, outcome.best_overlap_object_id});
        labels.push_back(outcome.label);

        auto& [sides, obtained] = scale_data[r.task];
        sides.push_back(std::sqrt(box_area(ctx.gt_box)));
        obtained.push_back(r.raw_score);
    }

    if (labels.empty()) {
        throw RunnerError("run contains no diagnosable grounding records");
    }
    report.histogram = diagnosis_histogram(labels);

    for (const auto& [task, data] : scale_data) {
        ScaleCorrelation corr;
        corr.n = data.first.size();
        if (corr.n >= 2) {
            try {
                corr.pearson_r = pearson(data.first, data.second);
            } catch (const DiagnosisError&) {
            }
            try {
                corr.spearman_r = spearman(data.first, data.second);
            } catch (const DiagnosisError&) {
            }
        }
        report.scale[task] = corr;
    }

    report.out_dir = out_dir.empty() ? run_dir : out_dir;
    fs::create_directories(report.out_dir);

    ordered_json j;
    j["run"] = run_dir;
    j["strategy"] = strategy;
    j["model"] = model;
    j["diagnosed"] = report.rows.size();
    j["skipped"] = report.skipped;
    ordered_json hist;
    ordered_json counts, percent;
    for (const DiagnosisLabel l : kAllDiagnosisLabels) {
        counts[label_name(l)] = report.histogram.counts.at(l);
        percent[label_name(l)] = report.histogram.percentages.at(l);
    }
    hist["counts"] = counts;
    hist["percent"] = percent;
    j["histogram"] = hist;
    ordered_json scale;
    for (const auto& [task, corr] : report.scale) {
        ordered_json row;
        row["n"] = corr.n;
        row["pearson"] = corr.pearson_r.has_value() ? ordered_json(*corr.pearson_r)
                                                    : ordered_json(nullptr);
        row["spearman"] = corr.spearman_r.has_value() ? ordered_json(*corr.spearman_r)
                                                      : ordered_json(nullptr);
        scale[task] = row;
    }
    j["scale_correlation"] = scale;
    ordered_json rows = ordered_json::array();
    for (const DiagnosisRow& row : report.rows) {
        ordered_json rj;
        rj["id"] = row.id;
        rj["task"] = row.task;
        rj["label"] = label_name(row.label);
        rj["iou"] = row.iou;
        rj["best_overlap_object_id"] = row.best_overlap_object_id;
        rows.push_back(rj);
    }
    j["rows"] = rows;

    const fs::path out(report.out_dir);
    write_text_file((out / "diagnosis.json").string(), j.dump(2) + "\n");
    write_text_file((out / "diagnosis.txt").string(),
                    diagnosis_text(report, run_dir, strategy, model));
    return report;
}

ComparisonReport compare_runs(const std::vector<std::string>& run_dirs) {
    if (run_dirs.empty()) throw RunnerError("at least one run directory required");

    struct RunView {
        std::string dir;
        std::string label;
        std::string strategy;
        std::string model;
        bool oracle = false;
        std::string dataset_hash;
        std::size_t samples = 0;
        std::map<std::string, double> task_display;
        std::map<std::string, double> task_raw;
        std::map<std::string, double> dim_display;
        double overall_display = 0.0;
        double overall_raw = 0.0;
    };

    std::vector<RunView> views;
    for (const std::string& dir : run_dirs) {
        const fs::path agg_path = fs::path(dir) / "aggregate.json";
        if (!fs::exists(agg_path)) {
            throw RunnerError("no aggregate.json under " + dir);
        }
        const ordered_json j = load_json_file(agg_path.string());
        RunView v;
        v.dir = dir;
        v.strategy = j.value("strategy", std::string{});
        v.model = j.value("model", std::string{});
        v.oracle = j.value("oracle", false);
        v.dataset_hash = j.value("dataset_hash", std::string{});
        v.samples = j.value("samples", std::size_t{0});
        for (const auto& [code, row] : j.at("tasks").items()) {
            v.task_display[code] = row.at("display").get<double>();
            v.task_raw[code] = row.at("raw").get<double>();
        }
        for (const auto& [dim, row] : j.at("dimensions").items()) {
            v.dim_display[dim] = row.at("display").get<double>();
        }
        v.overall_display = j.at("overall").at("display").get<double>();
        v.overall_raw = j.at("overall").at("raw").get<double>();

        // A stored aggregate whose overall strays from its own task
        // macro-mean is corrupt; refuse to compare it.
        double mean = 0.0;
        for (const auto& [code, raw] : v.task_raw) mean += raw;
        mean /= static_cast<double>(v.task_raw.size());
        if (std::abs(mean - v.overall_raw) > 1e-9) {
            throw RunnerError("aggregate under " + dir +
                              " is internally inconsistent (overall vs task mean)");
        }

        v.label = v.strategy + (v.model.empty() ? "" : "/" + v.model) +
                  (v.oracle ? " [oracle]" : "");
        views.push_back(std::move(v));
    }

    std::map<std::string, int> label_uses;
    for (RunView& v : views) {
        const int n = ++label_uses[v.label];
        if (n > 1) v.label += " #" + std::to_string(n);
    }

    ComparisonReport report;
    for (const RunView& v : views) report.labels.push_back(v.label);

    std::set<std::string> hashes;
    for (const RunView& v : views) hashes.insert(v.dataset_hash);
    if (hashes.size() > 1) {
        std::string list;
        for (const auto& h : hashes) list += (list.empty() ? "" : ", ") + h;
        report.warning = "runs cover different datasets (hashes: " + list + ")";
    }

    // Plain-text table.
    {
        std::ostringstream out;
        out << "run comparison\n";
        for (std::size_t i = 0; i < views.size(); ++i) {
            out << "  [" << i + 1 << "] " << views[i].label << "  (" << views[i].dir
                << ", " << views[i].samples << " samples)\n";
        }
        if (!report.warning.empty()) out << "  WARNING: " << report.warning << "\n";
        out << "\n  " << std::left << std::setw(14) << "name" << std::right;
        for (std::size_t i = 0; i < views.size(); ++i)
            out << std::setw(10) << ("[" + std::to_string(i + 1) + "]");
        out << "\n";
        auto row = [&](const std::string& name, auto value_of) {
            out << "  " << std::left << std::setw(14) << name << std::right;
            for (const RunView& v : views) {
                const auto val = value_of(v);
                out << std::setw(10) << (val.has_value() ? fixed2(*val) : "-");
            }
            out << "\n";
        };
        for (const char* code : kTaskCodes) {
            bool any = false;
            for (const RunView& v : views) any |= v.task_display.count(code) > 0;
            if (!any) continue;
            row(code, [&](const RunView& v) -> std::optional<double> {
                const auto it = v.task_display.find(code);
                if (it == v.task_display.end()) return std::nullopt;
                return it->second;
            });
        }
        for (const char* dim : kDimensionNames) {
            bool any = false;
            for (const RunView& v : views) any |= v.dim_display.count(dim) > 0;
            if (!any) continue;
            row(dim, [&](const RunView& v) -> std::optional<double> {
                const auto it = v.dim_display.find(dim);
                if (it == v.dim_display.end()) return std::nullopt;
                return it->second;
            });
        }
        row("overall", [&](const RunView& v) -> std::optional<double> {
            return v.overall_display;
        });
        report.text = out.str();
    }

    // CSV.
    {
        std::ostringstream out;
        out << "section,name";
        for (const RunView& v : views) out << "," << csv_field(v.label);
        out << "\n";
        auto row = [&](const std::string& section, const std::string& name,
                       auto value_of) {
            out << section << "," << name;
            for (const RunView& v : views) {
                const auto val = value_of(v);
                out << "," << (val.has_value() ? num_repr(*val) : "");
            }
            out << "\n";
        };
        for (const char* code : kTaskCodes) {
            bool any = false;
            for (const RunView& v : views) any |= v.task_display.count(code) > 0;
            if (!any) continue;
            row("task", code, [&](const RunView& v) -> std::optional<double> {
                const auto it = v.task_display.find(code);
                if (it == v.task_display.end()) return std::nullopt;
                return it->second;
            });
        }
        for (const char* dim : kDimensionNames) {
            bool any = false;
            for (const RunView& v : views) any |= v.dim_display.count(dim) > 0;
            if (!any) continue;
            row("dimension", dim, [&](const RunView& v) -> std::optional<double> {
                const auto it = v.dim_display.find(dim);
                if (it == v.dim_display.end()) return std::nullopt;
                return it->second;
            });
        }
        row("overall", "overall", [&](const RunView& v) -> std::optional<double> {
            return v.overall_display;
        });
        report.csv = out.str();
    }

    // JSON.
    {
        ordered_json j;
        ordered_json runs = ordered_json::array();
        for (const RunView& v : views) {
            ordered_json r;
            r["label"] = v.label;
            r["dir"] = v.dir;
            r["strategy"] = v.strategy;
            r["model"] = v.model;
            r["oracle"] = v.oracle;
            r["dataset_hash"] = v.dataset_hash;
            r["samples"] = v.samples;
            runs.push_back(r);
        }
        j["runs"] = runs;
        j["warning"] = report.warning;
        ordered_json tasks;
        for (const char* code : kTaskCodes) {
            bool any = false;
            for (const RunView& v : views) any |= v.task_display.count(code) > 0;
            if (!any) continue;
            ordered_json col = ordered_json::array();
            for (const RunView& v : views) {
                const auto it = v.task_display.find(code);
                col.push_back(it == v.task_display.end() ? ordered_json(nullptr)
                                                         : ordered_json(it->second));
            }
            tasks[code] = col;
        }
        j["tasks"] = tasks;
        ordered_json dims;
        for (const char* dim : kDimensionNames) {
            bool any = false;
            for (const RunView& v : views) any |= v.dim_display.count(dim) > 0;
            if (!any) continue;
            ordered_json col = ordered_json::array();
            for (const RunView& v : views) {
                const auto it = v.dim_display.find(dim);
                col.push_back(it == v.dim_display.end() ? ordered_json(nullptr)
                                                        : ordered_json(it->second));
            }
            dims[dim] = col;
        }
        j["dimensions"] = dims;
        ordered_json overall = ordered_json::array();
        for (const RunView& v : views) overall.push_back(v.overall_display);
        j["overall"] = overall;
        report.json = j.dump(2) + "\n";
    }

    return report;
}

void write_comparison(const ComparisonReport& report, const std::string& out_dir) {
    fs::create_directories(out_dir);
    const fs::path out(out_dir);
    write_text_file((out / "compare.txt").string(), report.text);
    write_text_file((out / "compare.csv").string(), report.csv);
    write_text_file((out / "compare.json").string(), report.json);
}

}  // namespace uhr
