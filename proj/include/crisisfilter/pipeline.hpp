#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "crisisfilter/classifier.hpp"
#include "crisisfilter/hash_window.hpp"
#include "crisisfilter/phash.hpp"
#include "crisisfilter/record.hpp"

namespace crisisfilter {

/// The record source itself could not be read.
class IngestError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct IngestResult {
    std::vector<ImageRecord> records;
    std::size_t lines = 0;      // non-blank lines seen
    std::size_t malformed = 0;  // lines skipped
};

/// Parses a JSONL record stream. Each line needs a string "id" and a
/// locator in "url" or "path"; optional fields are post_id, received_at,
/// damage, relevance, object_tags and dup_group. Malformed lines and
/// repeated ids are counted and skipped.
IngestResult ingest(std::istream& in);
IngestResult ingest_file(const std::filesystem::path& path);

/// Parses one record object; nullopt when it does not satisfy the schema.
std::optional<ImageRecord> record_from_json(const nlohmann::json& j);
nlohmann::json record_to_json(const ImageRecord& r);

struct FetchResult {
    bool ok = false;
    std::vector<std::uint8_t> bytes;
    std::string error;
};

/// Resolves a locator to encoded image bytes. Implementations must be
/// safe to call from several threads at once.
class Fetcher {
public:
    virtual ~Fetcher() = default;
    virtual FetchResult fetch(const std::string& locator) const = 0;
};

/// Reads local files. Accepts plain paths and "file:" / "file://" URLs;
/// relative paths resolve against `base_dir`.
class FileFetcher : public Fetcher {
public:
    explicit FileFetcher(std::filesystem::path base_dir = {});
    FetchResult fetch(const std::string& locator) const override;

private:
    std::filesystem::path base_;
};

/// Plain HTTP GET with a per-attempt timeout and a fixed number of retries.
class HttpFetcher : public Fetcher {
public:
    explicit HttpFetcher(std::chrono::milliseconds timeout = std::chrono::seconds(10), int retries = 2);
    FetchResult fetch(const std::string& locator) const override;

private:
    std::chrono::milliseconds timeout_;
    int retries_;
};

/// http:// locators go to the HTTP fetcher, everything else to the file
/// fetcher.
class DefaultFetcher : public Fetcher {
public:
    explicit DefaultFetcher(std::filesystem::path base_dir = {});
    FetchResult fetch(const std::string& locator) const override;

private:
    FileFetcher files_;
    HttpFetcher http_;
};

enum class Stage { Fetch, Relevancy, Dedup };
enum class Action { Pass, Drop };

std::string_view to_string(Stage s);
std::string_view to_string(Action a);

/// Terminal outcome of one record: where it was dropped, or that it
/// passed every stage.
struct StageOutcome {
    std::string record_id;
    Stage stage = Stage::Fetch;
    Action action = Action::Pass;
    std::string reason;
};

nlohmann::json to_json(const StageOutcome& o);

struct RetentionRow {
    std::string category;
    long long raw = 0;
    long long fetch_failed = 0;   // locator could not be read
    long long decode_failed = 0;  // bytes were not a supported image
    long long after_relevancy = 0;
    long long after_dedup = 0;
};

/// Counts per category at each stage boundary. Rows are damage categories
/// when the stream carries labels (plus "unlabeled" for any record without
/// one), otherwise a single "unlabeled" row. The columns follow the order
/// the stages actually ran in, so with dedup first the after_dedup survivors
/// are what relevancy saw.
struct RetentionReport {
    std::vector<RetentionRow> rows;
    RetentionRow total;
    bool dedup_first = false;
    double overall_reduction = 0.0;  // percent: (1 - kept / raw) * 100

    const RetentionRow* find(std::string_view category) const;
};

nlohmann::json to_json(const RetentionReport& r);

struct PipelineConfig {
    std::size_t fetch_workers = 8;
    std::size_t queue_capacity = 1024;  // max records in flight ahead of the consumer
    double relevancy_threshold = 0.5;   // drop when P(relevant) is below this
    bool dedup_first = false;
};

struct KeptImage {
    ImageRecord record;
    PerceptualHash hash;
};

struct PipelineResult {
    std::vector<KeptImage> kept;
    std::vector<StageOutcome> outcomes;  // one per input record, input order
    RetentionReport report;
};

/// Fetch (concurrent, re-sequenced into arrival order), then relevancy and
/// dedup applied serially in arrival order. Without a relevancy model the
/// relevancy stage passes everything. The window carries state across
/// calls and may be restored from a snapshot beforehand.
PipelineResult run_pipeline(const std::vector<ImageRecord>& records, const ClassifierModel* relevancy,
                            HashWindow& window, const Fetcher& fetcher, const PipelineConfig& cfg = {});

void write_outcomes_jsonl(std::ostream& out, const std::vector<StageOutcome>& outcomes);

}  // namespace crisisfilter
