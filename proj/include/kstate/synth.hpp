#pragma once

// Synthetic cohorts drawn from a quasi-ordinal knowledge space.
//
// Items are linked by a random precedence DAG and every sampled knowledge
// state is a down-set of it. Grades come from an ordinal logistic model
//
//   u = score_weight * score(state) + sum(planted shifts) + Logistic(0, 1)
//
// and a student receives the best grade whose intercept is <= u. A basic
// effect subtracts its strength from u when the item is missing; an advanced
// effect adds it when the item is present. Since the noise is standard
// logistic, each strength is an exact shift in the log-odds of passing.
//
// All randomness flows from explicit 64-bit seeds through std::mt19937_64
// with hand-written transforms, so output is identical across standard
// library implementations.

#include <algorithm>
#include <array>
#include <functional>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <numbers>
#include <queue>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "kstate/core_model.hpp"
#include "kstate/error.hpp"

namespace kstate {

// ---------------------------------------------------------------------------
// Randomness
// ---------------------------------------------------------------------------

/// Derives an independent stream seed from a parent seed (splitmix64 finalizer).
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform on the open interval (0, 1).
    double uniform() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }

    double normal() {
        const double u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    double logistic() {
        const double u = uniform();
        return std::log(u / (1.0 - u));
    }

private:
    std::mt19937_64 engine_;
};

// ---------------------------------------------------------------------------
// Precedence DAG
// ---------------------------------------------------------------------------

struct Edge {
    std::size_t prereq = 0;
    std::size_t item = 0;

    auto operator<=>(const Edge&) const = default;
};

class PrecedenceDag {
public:
    PrecedenceDag() = default;

    PrecedenceDag(std::size_t n_items, std::vector<Edge> edges) : n_items_(n_items), edges_(std::move(edges)) {
        std::ranges::sort(edges_);
        edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());
        parents_.assign(n_items_, {});
        std::vector<std::size_t> indegree(n_items_, 0);
        std::vector<std::vector<std::size_t>> children(n_items_);
        for (const auto& e : edges_) {
            if (e.prereq >= n_items_ || e.item >= n_items_) {
                throw Error(ErrorCode::InvalidArgument, "DAG edge references an item outside the domain");
            }
            if (e.prereq == e.item) throw Error(ErrorCode::InvalidArgument, "DAG edge is a self-loop");
            parents_[e.item].push_back(e.prereq);
            children[e.prereq].push_back(e.item);
            ++indegree[e.item];
        }
        // Kahn's algorithm; smallest ready index first keeps the order canonical.
        std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
        for (std::size_t i = 0; i < n_items_; ++i) {
            if (indegree[i] == 0) ready.push(i);
        }
        while (!ready.empty()) {
            const auto v = ready.top();
            ready.pop();
            order_.push_back(v);
            for (auto c : children[v]) {
                if (--indegree[c] == 0) ready.push(c);
            }
        }
        if (order_.size() != n_items_) throw Error(ErrorCode::InvalidArgument, "precedence graph has a cycle");
    }

    std::size_t n_items() const noexcept { return n_items_; }
    const std::vector<Edge>& edges() const noexcept { return edges_; }
    const std::vector<std::size_t>& parents(std::size_t item) const { return parents_.at(item); }
    const std::vector<std::size_t>& topological_order() const noexcept { return order_; }

    /// True when every prerequisite of a held item is also held.
    bool is_down_set(const KnowledgeState& state) const {
        if (state.size() != n_items_) throw Error(ErrorCode::DomainMismatch, "state length differs from DAG size");
        for (const auto& e : edges_) {
            if (state.test(e.item) && !state.test(e.prereq)) return false;
        }
        return true;
    }

    bool operator==(const PrecedenceDag& other) const {
        return n_items_ == other.n_items_ && edges_ == other.edges_;
    }

private:
    std::size_t n_items_ = 0;
    std::vector<Edge> edges_;
    std::vector<std::vector<std::size_t>> parents_;
    std::vector<std::size_t> order_;
};

/// Each pair i < j receives the edge i -> j independently with probability
/// `edge_density`, so item index is a topological rank.
inline PrecedenceDag gen_dag(std::size_t n_items, double edge_density, std::uint64_t seed) {
    if (n_items == 0) throw Error(ErrorCode::InvalidArgument, "DAG needs at least one item");
    if (!(edge_density >= 0.0 && edge_density <= 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "edge density must lie in [0, 1]");
    }
    Rng rng(seed);
    std::vector<Edge> edges;
    for (std::size_t j = 1; j < n_items; ++j) {
        for (std::size_t i = 0; i < j; ++i) {
            if (rng.uniform() < edge_density) edges.push_back({i, j});
        }
    }
    return PrecedenceDag(n_items, std::move(edges));
}

/// Items whose threshold ability >= difficulty + noise is met, reduced to the
/// largest prerequisite-closed subset.
inline KnowledgeState sample_state(const PrecedenceDag& dag, std::span<const double> difficulties, double ability,
                                   std::uint64_t seed, double noise_scale = 1.0) {
    if (difficulties.size() != dag.n_items()) {
        throw Error(ErrorCode::InvalidArgument, "difficulties length differs from DAG size");
    }
    Rng rng(seed);
    std::vector<char> candidate(dag.n_items());
    for (std::size_t i = 0; i < dag.n_items(); ++i) {
        candidate[i] = ability >= difficulties[i] + noise_scale * rng.logistic();
    }
    KnowledgeState state(dag.n_items());
    for (auto i : dag.topological_order()) {
        if (!candidate[i]) continue;
        bool closed = true;
        for (auto p : dag.parents(i)) closed = closed && state.test(p);
        if (closed) state.set(i);
    }
    return state;
}

// ---------------------------------------------------------------------------
// Grade model
// ---------------------------------------------------------------------------

enum class EffectType : std::uint8_t { Basic, Advanced };

constexpr std::string_view to_string(EffectType t) noexcept { return t == EffectType::Basic ? "basic" : "advanced"; }

struct PlantedEffect {
    std::size_t item_index = 0;
    EffectType effect_type = EffectType::Basic;
    double strength = 1.0; // log-odds shift on passing

    bool operator==(const PlantedEffect&) const = default;
};

/// Intercepts indexed by grade_rank (W = 0 ... A = 12), strictly increasing.
using GradeIntercepts = std::array<double, 13>;

inline constexpr GradeIntercepts kDefaultIntercepts = {-2.5, -1.2, -0.7, -0.4, -0.1, 0.2, 0.55,
                                                       0.9,  1.2,  1.5,  1.8,  2.2,  2.6};

struct GradeModel {
    GradeIntercepts intercepts = kDefaultIntercepts;
    double score_weight = 2.0;
    std::vector<PlantedEffect> planted_effects;

    void validate(std::size_t n_items) const {
        for (std::size_t r = 1; r < intercepts.size(); ++r) {
            if (!(intercepts[r] > intercepts[r - 1])) {
                throw Error(ErrorCode::InvalidArgument, "grade intercepts must be strictly increasing from W to A");
            }
        }
        if (!std::isfinite(score_weight)) throw Error(ErrorCode::InvalidArgument, "score weight must be finite");
        for (const auto& e : planted_effects) {
            if (e.item_index >= n_items) {
                throw Error(ErrorCode::InvalidArgument, "planted effect on item " + std::to_string(e.item_index) +
                                                            " outside a domain of " + std::to_string(n_items));
            }
            if (!(e.strength > 0) || !std::isfinite(e.strength)) {
                throw Error(ErrorCode::InvalidArgument, "planted effect strength must be positive");
            }
        }
    }

    /// Latent mean before noise.
    double location(const KnowledgeState& state) const {
        double u = score_weight * static_cast<double>(state.count()) / static_cast<double>(state.size());
        for (const auto& e : planted_effects) {
            const bool has = state.test(e.item_index);
            if (e.effect_type == EffectType::Basic && !has) u -= e.strength;
            if (e.effect_type == EffectType::Advanced && has) u += e.strength;
        }
        return u;
    }

    Grade grade_for(double latent) const {
        std::size_t rank = 0;
        for (std::size_t r = 0; r < intercepts.size(); ++r) {
            if (intercepts[r] <= latent) rank = r;
        }
        return grade_from_rank(rank);
    }
};

inline Grade assign_grade(const KnowledgeState& state, const GradeModel& model, std::uint64_t seed) {
    Rng rng(seed);
    return model.grade_for(model.location(state) + rng.logistic());
}

// ---------------------------------------------------------------------------
// Cohorts
// ---------------------------------------------------------------------------

struct SynthConfig {
    std::size_t n_items = kDefaultDomainSize;
    std::size_t n_students = 1000;
    double edge_density = 0.02;
    double ability_mean = 0.0;
    double ability_sd = 1.0;
    double mastery_noise = 1.0;
    std::vector<double> difficulties; // empty: evenly spaced over [-2, 2]
    GradeModel grade_model;
    std::uint64_t rng_seed = 42;
    std::string course_id = "SYN101";
    std::string term = "2010-FA";
    std::string assessment_date = "2010-08-01";

    void validate() const {
        if (n_students == 0) throw Error(ErrorCode::EmptyCohortRequested, "n_students must be at least 1");
        if (n_items == 0) throw Error(ErrorCode::InvalidArgument, "n_items must be at least 1");
        if (!(edge_density >= 0.0 && edge_density <= 1.0)) {
            throw Error(ErrorCode::InvalidArgument, "edge_density must lie in [0, 1]");
        }
        if (!(ability_sd >= 0) || !std::isfinite(ability_mean)) {
            throw Error(ErrorCode::InvalidArgument, "ability distribution needs finite mean and sd >= 0");
        }
        if (!(mastery_noise > 0)) throw Error(ErrorCode::InvalidArgument, "mastery_noise must be positive");
        if (!difficulties.empty() && difficulties.size() != n_items) {
            throw Error(ErrorCode::InvalidArgument, "difficulties must list one value per item");
        }
        if (course_id.empty() || term.empty()) throw Error(ErrorCode::InvalidArgument, "course_id and term are required");
        grade_model.validate(n_items);
    }

    std::vector<double> resolved_difficulties() const {
        if (!difficulties.empty()) return difficulties;
        std::vector<double> d(n_items);
        for (std::size_t i = 0; i < n_items; ++i) {
            d[i] = -2.0 + 4.0 * (static_cast<double>(i) + 0.5) / static_cast<double>(n_items);
        }
        return d;
    }
};

struct SynthGroundTruth {
    PrecedenceDag dag;
    SynthConfig config;
    std::vector<double> abilities; // per student, record order
    std::vector<PlantedEffect> planted_effects;
};

struct SynthCohort {
    Cohort cohort;
    SynthGroundTruth truth;
};

/// Overrides applied per course when generating a sequence of offerings.
struct CourseSpec {
    std::string course_id;
    std::string term;
    std::size_t n_students = 1000;
    double ability_mean = 0.0;
    double ability_sd = 1.0;
};

namespace detail {

inline constexpr std::uint64_t kDagStream = 0xDA6;

inline std::string student_id(std::size_t j) {
    std::string digits = std::to_string(j + 1);
    return "s" + std::string(digits.size() < 6 ? 6 - digits.size() : 0, '0') + digits;
}

inline SynthCohort generate(const SynthConfig& cfg, const PrecedenceDag& dag,
                            const std::shared_ptr<const ItemDomain>& domain) {
    const auto difficulties = cfg.resolved_difficulties();
    std::vector<StudentRecord> records;
    std::vector<double> abilities;
    records.reserve(cfg.n_students);
    abilities.reserve(cfg.n_students);
    for (std::size_t j = 0; j < cfg.n_students; ++j) {
        const std::uint64_t s = mix_seed(cfg.rng_seed, j);
        Rng ability_rng(mix_seed(s, 0));
        const double ability = cfg.ability_mean + cfg.ability_sd * ability_rng.normal();
        auto state = sample_state(dag, difficulties, ability, mix_seed(s, 1), cfg.mastery_noise);
        const Grade grade = assign_grade(state, cfg.grade_model, mix_seed(s, 2));
        abilities.push_back(ability);
        records.emplace_back(student_id(j), cfg.course_id, cfg.term, std::move(state), grade, cfg.assessment_date);
    }
    Cohort cohort(cfg.course_id, cfg.term, domain, std::move(records));
    return {std::move(cohort), SynthGroundTruth{dag, cfg, std::move(abilities), cfg.grade_model.planted_effects}};
}

} // namespace detail

inline SynthCohort gen_cohort(const SynthConfig& cfg) {
    cfg.validate();
    const auto dag = gen_dag(cfg.n_items, cfg.edge_density, mix_seed(cfg.rng_seed, detail::kDagStream));
    auto domain = std::make_shared<const ItemDomain>(ItemDomain::synthetic(cfg.n_items));
    return detail::generate(cfg, dag, domain);
}

/// Several offerings over one domain and one DAG; each course gets its own
/// student seed stream derived from the base seed.
inline std::vector<SynthCohort> gen_course_sequence(const SynthConfig& base, std::span<const CourseSpec> courses) {
    base.validate();
    const auto dag = gen_dag(base.n_items, base.edge_density, mix_seed(base.rng_seed, detail::kDagStream));
    auto domain = std::make_shared<const ItemDomain>(ItemDomain::synthetic(base.n_items));
    std::vector<SynthCohort> out;
    for (std::size_t c = 0; c < courses.size(); ++c) {
        SynthConfig cfg = base;
        cfg.course_id = courses[c].course_id;
        cfg.term = courses[c].term;
        cfg.n_students = courses[c].n_students;
        cfg.ability_mean = courses[c].ability_mean;
        cfg.ability_sd = courses[c].ability_sd;
        cfg.rng_seed = mix_seed(base.rng_seed, 1000 + c);
        cfg.validate();
        out.push_back(detail::generate(cfg, dag, domain));
    }
    return out;
}

} // namespace kstate
