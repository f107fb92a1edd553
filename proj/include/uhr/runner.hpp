#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "uhr/agent.hpp"
#include "uhr/backend.hpp"
#include "uhr/diagnosis.hpp"
#include "uhr/eval.hpp"
#include "uhr/metrics.hpp"
#include "uhr/taskgen.hpp"

namespace uhr {

/// Configuration or run-directory problem. Raised before any model call so a
/// bad flag never burns backend quota.
class RunnerError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// One evaluation run, as assembled from command-line flags. Choice fields
/// stay strings here; validate_run_config resolves and checks them.
struct RunConfig {
    std::string dataset_dir;
    std::string out_dir;
    std::string strategy = "map";  // map, native, resize, query_crop,
                                   // oracle_crop, sliding_window
    std::string backend_url;       // chat endpoint; empty means scripted
    std::string model;
    std::string scripted_path;     // transcript to replay instead of a network
    std::string segmenter_url;     // empty means the box-fill stub
    int crop_size = 1024;
    std::string roi_policy = "task_adaptive";
    std::string protocol = "thousand";
    int workers = 4;
    std::uint64_t seed = 1;
    bool oracle_allowed = false;      // unlocks the ground-truth-crop strategy
    bool store_predictions = true;    // keep payloads in records for diagnosis
};

/// Flag spellings with - or _ both resolve; "sliding" means sliding_window.
std::string canonical_strategy(const std::string& name);

/// Config-only checks plus the dataset-dependent strategy preconditions
/// (explicit-region coverage, locatable targets for the oracle crop). Throws
/// RunnerError; runs before any backend call. Pass skip_backend_source when
/// the caller injects its own backend.
void validate_run_config(const RunConfig& config,
                         const std::vector<Sample>& samples,
                         bool skip_backend_source = false);

/// One line of records.jsonl. prediction is absent when the run was asked to
/// trim payloads; mask_rle carries the compressed mask text for mask samples.
struct RunRecord {
    std::string id;
    std::string task;
    double raw_score = 0.0;
    ParseStatus parse_status = ParseStatus::kOk;
    int calls = 0;
    long long latency_ms = 0;  // time spent inside backend calls only
    bool transport_failed = false;
    std::string error;
    std::optional<ParsedAnswer> prediction;
    std::string mask_rle;
};

std::string run_record_to_json_line(const RunRecord& r);
RunRecord run_record_from_json_line(const std::string& line);

/// Replayable unit of backend traffic. A zero fingerprint stands for a
/// stage-level fallback entry.
struct TranscriptEntry {
    std::uint64_t fingerprint = 0;
    PromptStage stage = PromptStage::kUnknown;
    std::string reply;
};

void save_transcript(const std::string& path,
                     const std::vector<TranscriptEntry>& entries);
std::vector<TranscriptEntry> load_transcript(const std::string& path);

/// Scripted double primed from a transcript file.
std::unique_ptr<ScriptedBackend> scripted_from_file(const std::string& path);

/// Decorator that logs traffic and accumulates time spent inside the inner
/// backend. Local work (crops, encodes) is excluded, so scripted replays
/// report zero latency run after run.
class RecordingBackend : public ModelBackend {
public:
    explicit RecordingBackend(ModelBackend& inner) : inner_(inner) {}

    std::string complete(const BackendRequest& request) override;
    int max_images() const override { return inner_.max_images(); }
    std::optional<CoordConvention> convention_override() const override {
        return inner_.convention_override();
    }
    bool remote() const override { return inner_.remote(); }

    const std::vector<TranscriptEntry>& entries() const { return entries_; }

    /// Wall time spent inside the inner backend; zero for local doubles.
    long long elapsed_ms() const;

private:
    ModelBackend& inner_;
    std::vector<TranscriptEntry> entries_;
    long long elapsed_ns_ = 0;
};

struct EvalRunSummary {
    std::vector<RunRecord> records;  // dataset order
    AggregateReport aggregate;       // raw [0,1] scale
    std::string out_dir;
    std::string dataset_hash;
    long long total_calls = 0;
    double mean_calls = 0.0;
    std::map<std::string, std::size_t> parse_counts;  // by status name
};

/// Full evaluation pass: validate, fan samples over a worker pool, score,
/// write the run directory (config.json, records.jsonl, transcript.jsonl,
/// aggregate.json, aggregate.csv, report.txt). Transport failures become
/// EMPTY records; nothing under dataset_dir is touched. The two-argument
/// form builds the backend from the config.
EvalRunSummary run_eval(const RunConfig& config);
EvalRunSummary run_eval(const RunConfig& config, ModelBackend& backend,
                        Segmenter& segmenter);

/// Balanced synthetic dataset request for the generate command.
struct GenerateRequest {
    std::string out_dir;
    std::uint64_t seed = 1;
    int per_task = 100;
    std::vector<std::string> tasks;  // empty means all 16
    GenConfig config;
};

/// Generates, renders, and writes the suite plus a manifest.json recording
/// the seed and every generation parameter. Returns the record count.
std::size_t run_generate(const GenerateRequest& request);

/// One classified grounding record plus its alignment details.
struct DiagnosisRow {
    std::string id;
    std::string task;
    DiagnosisLabel label = DiagnosisLabel::kIf;
    double iou = 0.0;
    int best_overlap_object_id = -1;
};

/// Scale sensitivity of one task: correlation between the target's side
/// length (the side of an area-equal square) and the per-sample score.
struct ScaleCorrelation {
    std::size_t n = 0;
    std::optional<double> pearson_r;  // absent below 2 points or at zero variance
    std::optional<double> spearman_r;
};

struct DiagnoseRunReport {
    std::vector<DiagnosisRow> rows;
    DiagnosisHistogram histogram;
    std::map<std::string, ScaleCorrelation> scale;  // by task code
    std::size_t skipped = 0;  // records of non-diagnosable tasks
    std::string out_dir;
};

/// Classifies every single-box grounding record of a finished run against
/// the dataset's scene annotations and writes diagnosis.json / diagnosis.txt
/// under out_dir (default: the run directory). Records stripped of their
/// predictions abort with the flag needed to regenerate them.
DiagnoseRunReport diagnose_run(const std::string& run_dir,
                               const std::string& dataset_dir,
                               const std::string& out_dir = "");

struct ComparisonReport {
    std::vector<std::string> labels;   // one per run, oracle runs marked
    std::string warning;               // set when dataset hashes disagree
    std::string text;
    std::string csv;
    std::string json;
};

/// Side-by-side task, dimension, and overall table over finished run
/// directories, display scale.
ComparisonReport compare_runs(const std::vector<std::string>& run_dirs);

/// Writes compare.txt / compare.csv / compare.json under out_dir.
void write_comparison(const ComparisonReport& report, const std::string& out_dir);

/// FNV-1a of a file's bytes as 16 hex digits; identifies a dataset across
/// runs. Throws RunnerError when unreadable.
std::string file_digest(const std::string& path);

}  // namespace uhr
