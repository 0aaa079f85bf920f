#include "crisisfilter/pipeline.hpp"

#include <condition_variable>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>
#include <unordered_set>

#include "crisisfilter/features.hpp"
#include "crisisfilter/image.hpp"
#include "crisisfilter/netpbm.hpp"

namespace crisisfilter {

namespace {

using nlohmann::json;

std::string fixed(double v, int digits)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

}  // namespace

std::optional<ImageRecord> record_from_json(const json& j)
{
    if (!j.is_object() || !j.contains("id") || !j["id"].is_string() || j["id"].get<std::string>().empty()) {
        return std::nullopt;
    }
    ImageRecord r;
    r.id = j["id"].get<std::string>();
    for (const char* key : {"url", "path"}) {
        if (j.contains(key)) {
            if (!j[key].is_string()) {
                return std::nullopt;
            }
            r.url = j[key].get<std::string>();
            break;
        }
    }
    if (r.url.empty()) {
        return std::nullopt;
    }
    if (j.contains("post_id")) {
        const auto& p = j["post_id"];
        if (p.is_string()) {
            r.post_id = p.get<std::string>();
        } else if (p.is_number_integer()) {
            r.post_id = std::to_string(p.get<long long>());
        } else {
            return std::nullopt;
        }
    }
    if (j.contains("received_at")) {
        if (!j["received_at"].is_number_integer()) {
            return std::nullopt;
        }
        r.received_at = j["received_at"].get<std::int64_t>();
    }
    if (j.contains("damage") && !j["damage"].is_null()) {
        if (!j["damage"].is_string()) {
            return std::nullopt;
        }
        r.damage = parse_damage(j["damage"].get<std::string>());
        if (!r.damage) {
            return std::nullopt;
        }
    }
    if (j.contains("relevance") && !j["relevance"].is_null()) {
        if (!j["relevance"].is_string()) {
            return std::nullopt;
        }
        r.relevance = parse_relevance(j["relevance"].get<std::string>());
        if (!r.relevance) {
            return std::nullopt;
        }
    }
    if (j.contains("object_tags")) {
        if (!j["object_tags"].is_array()) {
            return std::nullopt;
        }
        for (const auto& t : j["object_tags"]) {
            if (!t.is_string()) {
                return std::nullopt;
            }
            r.object_tags.push_back(t.get<std::string>());
        }
    }
    if (j.contains("dup_group") && !j["dup_group"].is_null()) {
        if (j["dup_group"].is_string()) {
            r.dup_group = j["dup_group"].get<std::string>();
        } else if (j["dup_group"].is_number_integer()) {
            r.dup_group = std::to_string(j["dup_group"].get<long long>());
        } else {
            return std::nullopt;
        }
    }
    return r;
}

json record_to_json(const ImageRecord& r)
{
    json j;
    j["id"] = r.id;
    j["url"] = r.url;
    if (!r.post_id.empty()) {
        j["post_id"] = r.post_id;
    }
    if (r.received_at != 0) {
        j["received_at"] = r.received_at;
    }
    if (r.damage) {
        j["damage"] = std::string(to_string(*r.damage));
    }
    if (r.relevance) {
        j["relevance"] = std::string(to_string(*r.relevance));
    }
    if (!r.object_tags.empty()) {
        j["object_tags"] = r.object_tags;
    }
    if (r.dup_group) {
        j["dup_group"] = *r.dup_group;
    }
    return j;
}

IngestResult ingest(std::istream& in)
{
    IngestResult res;
    std::unordered_set<std::string> seen;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        ++res.lines;
        const auto j = json::parse(line, nullptr, false);
        auto rec = j.is_discarded() ? std::nullopt : record_from_json(j);
        if (!rec || !seen.insert(rec->id).second) {
            ++res.malformed;
            continue;
        }
        res.records.push_back(std::move(*rec));
    }
    if (in.bad()) {
        throw IngestError("error while reading the record stream");
    }
    return res;
}

IngestResult ingest_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IngestError("cannot open record stream " + path.string());
    }
    return ingest(in);
}

FileFetcher::FileFetcher(std::filesystem::path base_dir) : base_(std::move(base_dir)) {}

FetchResult FileFetcher::fetch(const std::string& locator) const
{
    std::string p = locator;
    if (p.rfind("file://", 0) == 0) {
        p = p.substr(7);
    } else if (p.rfind("file:", 0) == 0) {
        p = p.substr(5);
    }
    std::filesystem::path path(p);
    if (path.is_relative() && !base_.empty()) {
        path = base_ / path;
    }
    FetchResult r;
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        r.error = "cannot open " + path.string();
        return r;
    }
    r.bytes.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    if (in.bad()) {
        r.bytes.clear();
        r.error = "read error on " + path.string();
        return r;
    }
    r.ok = true;
    return r;
}

DefaultFetcher::DefaultFetcher(std::filesystem::path base_dir) : files_(std::move(base_dir)) {}

FetchResult DefaultFetcher::fetch(const std::string& locator) const
{
    if (locator.rfind("http://", 0) == 0 || locator.rfind("https://", 0) == 0) {
        return http_.fetch(locator);
    }
    return files_.fetch(locator);
}

std::string_view to_string(Stage s)
{
    switch (s) {
    case Stage::Fetch: return "fetch";
    case Stage::Relevancy: return "relevancy";
    case Stage::Dedup: return "dedup";
    }
    return "?";
}

std::string_view to_string(Action a)
{
    return a == Action::Pass ? "pass" : "drop";
}

json to_json(const StageOutcome& o)
{
    return json{{"record_id", o.record_id},
                {"stage", std::string(to_string(o.stage))},
                {"action", std::string(to_string(o.action))},
                {"reason", o.reason}};
}

const RetentionRow* RetentionReport::find(std::string_view category) const
{
    for (const auto& r : rows) {
        if (r.category == category) {
            return &r;
        }
    }
    return nullptr;
}

json to_json(const RetentionReport& r)
{
    auto row = [](const RetentionRow& x) {
        return json{{"category", x.category},
                    {"raw", x.raw},
                    {"fetch_failed", x.fetch_failed},
                    {"decode_failed", x.decode_failed},
                    {"after_relevancy", x.after_relevancy},
                    {"after_dedup", x.after_dedup}};
    };
    json rows = json::array();
    for (const auto& x : r.rows) {
        rows.push_back(row(x));
    }
    return json{{"stage_order", r.dedup_first ? json{"fetch", "dedup", "relevancy"} : json{"fetch", "relevancy", "dedup"}},
                {"rows", rows},
                {"total", row(r.total)},
                {"overall_reduction", r.overall_reduction}};
}

void write_outcomes_jsonl(std::ostream& out, const std::vector<StageOutcome>& outcomes)
{
    for (const auto& o : outcomes) {
        out << to_json(o).dump() << '\n';
    }
}

namespace {

enum class FetchState { Ok, FetchFailed, DecodeFailed };

struct Prepared {
    FetchState state = FetchState::Ok;
    std::string error;
    std::vector<std::uint8_t> payload;
    PerceptualHash hash;
    FeatureVector features;
};

Prepared prepare(const ImageRecord& rec, const Fetcher& fetcher, bool want_features)
{
    Prepared p;
    if (!rec.payload.empty()) {
        p.payload = rec.payload;
    } else {
        auto f = fetcher.fetch(rec.url);
        if (!f.ok) {
            p.state = FetchState::FetchFailed;
            p.error = std::move(f.error);
            return p;
        }
        p.payload = std::move(f.bytes);
    }
    try {
        const Raster img = decode_netpbm(p.payload);
        const DctGrid grid = dct_chain(img);
        p.hash = hash_from_dct(grid);
        if (want_features) {
            p.features = extract_features(img, grid);
        }
    } catch (const std::exception& e) {
        p.state = FetchState::DecodeFailed;
        p.error = e.what();
    }
    return p;
}

// Runs `prepare` on a worker pool and hands results to `consume` strictly in
// input order. Workers never run more than `capacity` records ahead of the
// consumer.
template <class Consume>
void prepare_in_order(const std::vector<ImageRecord>& records, const Fetcher& fetcher, bool want_features,
                      std::size_t workers, std::size_t capacity, Consume&& consume)
{
    const std::size_t n = records.size();
    workers = std::max<std::size_t>(1, std::min(workers, n));
    capacity = std::max<std::size_t>(1, capacity);
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) {
            consume(i, prepare(records[i], fetcher, want_features));
        }
        return;
    }

    std::mutex mu;
    std::condition_variable work_cv;
    std::condition_variable ready_cv;
    std::vector<std::optional<Prepared>> slots(capacity);
    std::size_t next = 0;
    std::size_t consumed = 0;
    bool stop = false;

    auto worker = [&] {
        for (;;) {
            std::size_t i;
            {
                std::unique_lock lock(mu);
                work_cv.wait(lock, [&] { return stop || next >= n || next < consumed + capacity; });
                if (stop || next >= n) {
                    return;
                }
                i = next++;
            }
            Prepared p = prepare(records[i], fetcher, want_features);
            {
                std::lock_guard lock(mu);
                slots[i % capacity] = std::move(p);
            }
            ready_cv.notify_all();
        }
    };

    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back(worker);
    }
    try {
        for (std::size_t i = 0; i < n; ++i) {
            Prepared p;
            {
                std::unique_lock lock(mu);
                ready_cv.wait(lock, [&] { return slots[i % capacity].has_value(); });
                p = std::move(*slots[i % capacity]);
                slots[i % capacity].reset();
                consumed = i + 1;
            }
            work_cv.notify_all();
            consume(i, std::move(p));
        }
    } catch (...) {
        {
            std::lock_guard lock(mu);
            stop = true;
        }
        work_cv.notify_all();
        for (auto& t : pool) {
            t.join();
        }
        throw;
    }
    for (auto& t : pool) {
        t.join();
    }
}

std::string category_of(const ImageRecord& r)
{
    return r.damage ? std::string(to_string(*r.damage)) : "unlabeled";
}

}  // namespace

PipelineResult run_pipeline(const std::vector<ImageRecord>& records, const ClassifierModel* relevancy,
                            HashWindow& window, const Fetcher& fetcher, const PipelineConfig& cfg)
{
    int relevant_col = -1;
    if (relevancy != nullptr) {
        relevant_col = relevancy->class_index("relevant");
        if (relevant_col < 0) {
            throw std::invalid_argument("relevancy model has no 'relevant' class");
        }
        if (relevancy->dim != kFeatureDim || relevancy->feature_id != kFeatureSpecId) {
            throw std::invalid_argument("relevancy model expects features '" + relevancy->feature_id + "' of dimension " +
                                        std::to_string(relevancy->dim));
        }
    }
    if (!(cfg.relevancy_threshold >= 0.0 && cfg.relevancy_threshold <= 1.0)) {
        throw std::invalid_argument("relevancy threshold must lie in [0, 1]");
    }

    // Report rows: damage categories in fixed order when any label exists,
    // then "unlabeled" if needed.
    bool any_labeled = false;
    bool any_unlabeled = false;
    for (const auto& r : records) {
        (r.damage ? any_labeled : any_unlabeled) = true;
    }
    PipelineResult res;
    auto& report = res.report;
    report.dedup_first = cfg.dedup_first;
    if (any_labeled) {
        for (const auto& name : damage_classes()) {
            report.rows.push_back({name});
        }
    }
    if (any_unlabeled || records.empty()) {
        report.rows.push_back({"unlabeled"});
    }
    auto row_of = [&](const ImageRecord& r) -> RetentionRow& {
        const auto cat = category_of(r);
        for (auto& row : report.rows) {
            if (row.category == cat) {
                return row;
            }
        }
        throw std::logic_error("missing retention row");
    };

    res.outcomes.reserve(records.size());
    prepare_in_order(records, fetcher, relevancy != nullptr, cfg.fetch_workers, cfg.queue_capacity,
                     [&](std::size_t i, Prepared p) {
                         const ImageRecord& rec = records[i];
                         RetentionRow& row = row_of(rec);
                         ++row.raw;
                         StageOutcome out{rec.id, Stage::Fetch, Action::Drop, {}};
                         if (p.state == FetchState::FetchFailed) {
                             ++row.fetch_failed;
                             out.reason = "fetch-error: " + p.error;
                             res.outcomes.push_back(std::move(out));
                             return;
                         }
                         if (p.state == FetchState::DecodeFailed) {
                             ++row.decode_failed;
                             out.reason = "decode-error: " + p.error;
                             res.outcomes.push_back(std::move(out));
                             return;
                         }

                         auto relevancy_stage = [&]() -> bool {
                             if (relevancy == nullptr) {
                                 return true;
                             }
                             const double pr = score(*relevancy, p.features)[relevant_col];
                             if (pr < cfg.relevancy_threshold) {
                                 out.stage = Stage::Relevancy;
                                 out.reason = "irrelevant p=" + fixed(1.0 - pr, 4);
                                 return false;
                             }
                             return true;
                         };
                         auto dedup_stage = [&]() -> bool {
                             const auto d = window.check_and_insert(p.hash, rec.id);
                             if (d.duplicate()) {
                                 out.stage = Stage::Dedup;
                                 out.reason = "duplicate-of:" + d.matched_id + " d=" + std::to_string(d.distance);
                                 return false;
                             }
                             return true;
                         };

                         if (cfg.dedup_first) {
                             if (!dedup_stage()) {
                                 res.outcomes.push_back(std::move(out));
                                 return;
                             }
                             ++row.after_dedup;
                             if (!relevancy_stage()) {
                                 res.outcomes.push_back(std::move(out));
                                 return;
                             }
                             ++row.after_relevancy;
                         } else {
                             if (!relevancy_stage()) {
                                 res.outcomes.push_back(std::move(out));
                                 return;
                             }
                             ++row.after_relevancy;
                             if (!dedup_stage()) {
                                 res.outcomes.push_back(std::move(out));
                                 return;
                             }
                             ++row.after_dedup;
                         }
                         out.stage = cfg.dedup_first ? Stage::Relevancy : Stage::Dedup;
                         out.action = Action::Pass;
                         out.reason = "kept";
                         res.outcomes.push_back(std::move(out));
                         ImageRecord kept = rec;
                         kept.payload = std::move(p.payload);
                         res.kept.push_back({std::move(kept), p.hash});
                     });

    RetentionRow& t = report.total;
    t.category = "total";
    for (const auto& r : report.rows) {
        t.raw += r.raw;
        t.fetch_failed += r.fetch_failed;
        t.decode_failed += r.decode_failed;
        t.after_relevancy += r.after_relevancy;
        t.after_dedup += r.after_dedup;
    }
    const long long kept = cfg.dedup_first ? t.after_relevancy : t.after_dedup;
    report.overall_reduction = t.raw == 0 ? 0.0 : (1.0 - static_cast<double>(kept) / static_cast<double>(t.raw)) * 100.0;
    return res;
}

}  // namespace crisisfilter
