#pragma once

#include "skyway/config.hpp"
#include "skyway/env.hpp"
#include "skyway/policy.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace skyway::cognition {

enum class Directive { Forward, Back, Left, Right, Ascend, Descend, Hover, Accelerate, Decelerate };
enum class Magnitude { Gentle, Normal, Aggressive };

inline constexpr int kNumDirectives = 9;
inline constexpr int kNumMagnitudes = 3;

const char* to_string(Directive d);
const char* to_string(Magnitude m);
std::optional<Directive> parse_directive_token(std::string_view token);
std::optional<Magnitude> parse_magnitude_token(std::string_view token);

struct SemanticDirective {
    Directive token = Directive::Hover;
    std::optional<Magnitude> magnitude;

    Magnitude effective_magnitude() const { return magnitude.value_or(Magnitude::Normal); }
    // "DIRECTIVE <TOKEN> [<MAGNITUDE>]"
    std::string to_string() const;
    // Accepts the grammar above on the first non-empty line; case-sensitive tokens.
    static std::optional<SemanticDirective> parse(std::string_view reply);

    bool operator==(const SemanticDirective&) const = default;
};

// "ACTION <Offload|Recall|Idle> [ids...]"
std::string format_meta_action(const env::MetaAction& action);
std::optional<env::MetaAction> parse_meta_action(std::string_view reply);

inline constexpr std::string_view kObservationDelimiter = "\n### OBSERVATION\n";
inline constexpr std::string_view kMemoryDelimiter = "\n### MEMORY\n";

struct PromptBundle {
    std::string static_text;
    std::string dynamic_text;
    std::string memory_text;
    std::string rendered;

    static PromptBundle compose(std::string static_text, std::string dynamic_text, std::string memory_text);
};

std::string uav_static_prompt(int uav);
std::string haps_static_prompt();

std::string bin_label(double value, const std::vector<double>& edges, const std::vector<std::string>& labels);
// One of eight horizontal sectors relative to the heading ("ahead", "ahead-left", ...).
std::string bearing_phrase(const Vec3& relative, double yaw_rad);
std::string vertical_phrase(double dz_m, double band_m);

std::string discretize(const env::LocalObservation& obs, const DiscretizeConfig& cfg);
std::string discretize(const env::HapsObservation& obs, const DiscretizeConfig& cfg);

// Raw feature vectors in a fixed order before normalization.
std::vector<double> raw_features(const env::LocalObservation& obs);
std::vector<double> raw_features(const env::HapsObservation& obs);

// Min-max scaling against running per-dimension bounds.
class Embedder {
public:
    Embedder() = default;
    Embedder(std::vector<double> lower, std::vector<double> upper);

    // Widens the bounds to include raw, then scales every dimension into [0, 1].
    Eigen::VectorXd embed(const std::vector<double>& raw);
    // Scales without touching the bounds.
    Eigen::VectorXd normalize(const std::vector<double>& raw) const;

    const std::vector<double>& lower() const { return lower_; }
    const std::vector<double>& upper() const { return upper_; }

    static Embedder for_uav(const ScenarioConfig& cfg);
    static Embedder for_haps(const ScenarioConfig& cfg);

private:
    std::vector<double> lower_;
    std::vector<double> upper_;
};

struct MemoryRecord {
    Eigen::VectorXd embedding;
    std::string situation;  // discretized observation text
    Json observation;
    std::string action;
    std::vector<double> reward;
    Json next_observation;
    std::string correction;
    std::uint64_t sequence = 0;  // insertion order, larger is newer
};

Json to_json(const MemoryRecord& r);

// Fixed-capacity FIFO ring.
class MemoryBuffer {
public:
    explicit MemoryBuffer(std::size_t capacity = 10000);

    void push(MemoryRecord record);
    std::size_t size() const { return count_; }
    std::size_t capacity() const { return capacity_; }
    // Logical index 0 is the oldest retained record.
    const MemoryRecord& at(std::size_t i) const { return slots_[(start_ + i) % capacity_]; }
    std::uint64_t next_sequence() const { return next_sequence_; }
    // False if the record has been evicted.
    bool set_correction(std::uint64_t sequence, std::string text);

    // Embeddings in logical order, row-major (size() x dim()).
    std::vector<double> packed_embeddings() const;
    std::size_t dim() const { return dim_; }

    void write_jsonl(const std::string& path) const;

private:
    std::size_t capacity_;
    std::vector<MemoryRecord> slots_;
    std::size_t start_ = 0;
    std::size_t count_ = 0;
    std::size_t dim_ = 0;
    std::uint64_t next_sequence_ = 0;
};

struct Retrieved {
    const MemoryRecord* record = nullptr;
    double distance = 0.0;
};

// k nearest by Euclidean distance, ascending; ties go to the newer record.
std::vector<Retrieved> retrieve_top_k(const MemoryBuffer& memory, const Eigen::VectorXd& query, int k);

std::string render_exemplar(const MemoryRecord& r);
std::string render_memory(const std::vector<Retrieved>& exemplars);

inline constexpr std::string_view kReflectionFallback =
    "Reflection unavailable. Increase separation from nearby UAVs and avoid repeating the last action in this "
    "situation.";

struct Reflection {
    std::string correction;
    bool triggered = false;
    bool degraded = false;
};

// Queries the policy only when scalarized_reward < threshold.
Reflection reflect(const std::string& situation, const std::string& action, const std::vector<double>& reward,
                   double scalarized_reward, double threshold, SemanticPolicy& policy);

struct UavDecision {
    SemanticDirective directive;
    bool degraded = false;
    int attempts = 0;
    std::string reason;
    std::string reply;
};

struct HapsDecision {
    std::optional<env::MetaAction> action;  // nullopt after the fallback path
    bool degraded = false;
    int attempts = 0;
    std::string reason;
    std::string reply;
};

inline constexpr std::string_view kUavFormatReminder =
    "\nFORMAT ERROR. Reply with exactly one line: DIRECTIVE <TOKEN> [<MAGNITUDE>]";
inline constexpr std::string_view kHapsFormatReminder =
    "\nFORMAT ERROR. Reply with exactly one line: ACTION <Offload|Recall|Idle> [ids...]";

// One retry with a format reminder; HOVER on failure.
UavDecision semantic_decide_uav(SemanticPolicy& policy, const PromptBundle& prompt);
// One retry with a format reminder; nullopt action on failure.
HapsDecision semantic_decide_haps(SemanticPolicy& policy, const PromptBundle& prompt);

}  // namespace skyway::cognition
