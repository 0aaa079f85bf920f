#include "crisisfilter/record.hpp"

namespace crisisfilter {

std::string_view to_string(DamageLabel d)
{
    switch (d) {
    case DamageLabel::Severe:
        return "severe";
    case DamageLabel::Mild:
        return "mild";
    case DamageLabel::None:
        break;
    }
    return "none";
}

std::string_view to_string(Relevance r)
{
    return r == Relevance::Relevant ? "relevant" : "irrelevant";
}

std::optional<DamageLabel> parse_damage(std::string_view s)
{
    if (s == "severe") {
        return DamageLabel::Severe;
    }
    if (s == "mild") {
        return DamageLabel::Mild;
    }
    if (s == "none") {
        return DamageLabel::None;
    }
    return std::nullopt;
}

std::optional<Relevance> parse_relevance(std::string_view s)
{
    if (s == "relevant") {
        return Relevance::Relevant;
    }
    if (s == "irrelevant") {
        return Relevance::Irrelevant;
    }
    return std::nullopt;
}

}  // namespace crisisfilter
