#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "crisisfilter/image.hpp"
#include "crisisfilter/record.hpp"

namespace crisisfilter {

enum class Perturbation { Resize, Crop, Brightness, TextBand, Blur };

std::string_view to_string(Perturbation p);
std::optional<Perturbation> parse_perturbation(std::string_view s);
const std::vector<Perturbation>& all_perturbations();

/// Parameters of a synthetic crisis-image stream with known ground truth.
struct CorpusSpec {
    std::uint64_t seed = 42;
    int n_severe = 200;       // distinct relevant images per damage class
    int n_mild = 100;
    int n_none = 300;
    int n_irrelevant = 200;   // distinct banner/text-card images (damage "none")
    double duplicate_rate = 0.4;  // share of all records that are near-duplicates
    std::vector<Perturbation> perturbations = all_perturbations();
    double exact_repost_share = 0.8;  // share of duplicates copied byte for byte
    double sibling_rate = 0.15;       // share of relevant images that are similar-but-distinct
    int n_truncated = 0;  // extra records whose file is cut short
    int n_missing = 0;    // extra records whose file does not exist
    int image_size = 64;
    int threshold_d = 10;  // duplicates land within this distance, distinct images beyond it

    void validate() const;
};

nlohmann::json to_json(const CorpusSpec& s);
CorpusSpec corpus_spec_from_json(const nlohmann::json& j);

enum class Corruption { None, Truncated, Missing };

/// Ground truth for one record.
struct CorpusTruth {
    std::string group;   // duplicate group; distinct images form their own group
    bool original = true;  // first arrival of its group
    int source = -1;      // record index of the group original, for duplicates
    int distance = 0;     // hash distance to the original (duplicates) or sibling parent
    std::vector<Perturbation> applied;
    bool sibling = false;  // similar-but-distinct image derived from another scene
    double clarity = 1.0;  // how typical the image is of its class, in [0, 1]
    Corruption corruption = Corruption::None;
};

struct Corpus {
    CorpusSpec spec;
    std::vector<ImageRecord> records;  // arrival order; payload holds encoded PPM bytes
    std::vector<CorpusTruth> truth;    // parallel to records
    int violations = 0;  // duplicates whose perturbations never fit the threshold; stored as exact copies
};

/// Deterministic in `spec`. Verifies every duplicate is within threshold_d
/// of its original and farther than threshold_d from every other distinct
/// image, and that distinct images are pairwise farther than threshold_d;
/// draws are repeated until they comply.
Corpus generate_corpus(const CorpusSpec& spec);

/// Writes images/<id>.ppm plus manifest.jsonl (id, path, damage, relevance,
/// dup_group, object_tags) and spec.json into `dir`.
void write_corpus(const Corpus& corpus, const std::filesystem::path& dir);

/// Reads a manifest written by `write_corpus` (or any compatible one).
/// Payloads are loaded from disk; unreadable files stay empty. Truth is
/// rebuilt from the manifest labels.
Corpus load_corpus(const std::filesystem::path& manifest);

/// Retention counts the pipeline must produce on this corpus when the
/// relevancy filter agrees with the relevance labels.
struct ExpectedRetention {
    std::string category;
    long long raw = 0;
    long long fetch_failed = 0;
    long long decode_failed = 0;
    long long after_relevancy = 0;
    long long after_dedup = 0;
};
std::vector<ExpectedRetention> expected_retention(const Corpus& corpus);

namespace synth {

/// Procedural damage scene. `severity` in [0, 1] blends from intact smooth
/// scenes to fragmented rubble.
Raster damage_scene(double severity, std::uint64_t seed, int size);
Raster banner(std::uint64_t seed, int size);
Raster perturb(const Raster& img, Perturbation p, std::uint64_t seed);

}  // namespace synth

}  // namespace crisisfilter
