#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace crisisfilter {

enum class DamageLabel { Severe, Mild, None };
enum class Relevance { Relevant, Irrelevant };

std::string_view to_string(DamageLabel d);
std::string_view to_string(Relevance r);
std::optional<DamageLabel> parse_damage(std::string_view s);
std::optional<Relevance> parse_relevance(std::string_view s);

inline const std::vector<std::string>& damage_classes()
{
    static const std::vector<std::string> names{"severe", "mild", "none"};
    return names;
}

/// Binary relevancy class list; index 1 is the Relevant column.
inline const std::vector<std::string>& relevance_classes()
{
    static const std::vector<std::string> names{"irrelevant", "relevant"};
    return names;
}

/// One social-media image moving through the pipeline, with whatever
/// labels the source provides.
struct ImageRecord {
    std::string id;
    std::string post_id;
    std::string url;
    std::int64_t received_at = 0;  // ms since epoch
    std::vector<std::uint8_t> payload;  // encoded image bytes, filled by fetch

    std::optional<DamageLabel> damage;
    std::optional<Relevance> relevance;
    std::vector<std::string> object_tags;
    std::optional<std::string> dup_group;
};

using LabeledImage = ImageRecord;

}  // namespace crisisfilter
