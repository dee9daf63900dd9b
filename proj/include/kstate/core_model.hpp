#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "kstate/error.hpp"

namespace kstate {

inline constexpr std::size_t kDefaultDomainSize = 182;

// ---------------------------------------------------------------------------
// Item domain
// ---------------------------------------------------------------------------

struct ItemMeta {
    std::size_t index = 0;
    std::string code;
    std::string category;
    std::string description;

    bool operator==(const ItemMeta&) const = default;
};

/// Ordered catalog of assessment items. Indices are contiguous and codes are
/// unique; both are checked on construction.
class ItemDomain {
public:
    explicit ItemDomain(std::vector<ItemMeta> items) : items_(std::move(items)) {
        if (items_.empty()) {
            throw Error(ErrorCode::InvalidArgument, "item domain must contain at least one item");
        }
        for (std::size_t i = 0; i < items_.size(); ++i) {
            const auto& item = items_[i];
            if (item.index != i) {
                throw Error(ErrorCode::BadManifest, "item indices must be contiguous from 0; expected " +
                                                        std::to_string(i) + ", found " +
                                                        std::to_string(item.index));
            }
            if (item.code.empty()) {
                throw Error(ErrorCode::BadManifest, "empty item code at index " + std::to_string(i));
            }
            if (!by_code_.emplace(item.code, i).second) {
                throw Error(ErrorCode::BadManifest, "duplicate item code '" + item.code + "'");
            }
        }
    }

    /// Opaque codes item000, item001, ... in a single category.
    static ItemDomain synthetic(std::size_t size = kDefaultDomainSize,
                                std::string_view category = "synthetic") {
        std::vector<ItemMeta> items;
        items.reserve(size);
        for (std::size_t i = 0; i < size; ++i) {
            std::string code = std::to_string(i);
            code.insert(0, code.size() < 3 ? 3 - code.size() : 0, '0');
            items.push_back({i, "item" + code, std::string(category), {}});
        }
        return ItemDomain(std::move(items));
    }

    std::size_t size() const noexcept { return items_.size(); }
    const std::vector<ItemMeta>& items() const noexcept { return items_; }
    const ItemMeta& operator[](std::size_t i) const { return items_.at(i); }

    std::optional<std::size_t> find(std::string_view code) const {
        auto it = by_code_.find(std::string(code));
        if (it == by_code_.end()) return std::nullopt;
        return it->second;
    }

    bool operator==(const ItemDomain& other) const { return items_ == other.items_; }

private:
    std::vector<ItemMeta> items_;
    std::unordered_map<std::string, std::size_t> by_code_;
};

// ---------------------------------------------------------------------------
// Knowledge state
// ---------------------------------------------------------------------------

/// Fixed-width bit-vector; bit i set means item i was mastered.
class KnowledgeState {
public:
    KnowledgeState() = default;
    explicit KnowledgeState(std::size_t size) : size_(size), words_((size + 63) / 64, 0) {}

    static KnowledgeState full(std::size_t size) {
        KnowledgeState s(size);
        for (std::size_t i = 0; i < size; ++i) s.set(i);
        return s;
    }

    static KnowledgeState from_indices(std::size_t size, const std::vector<std::size_t>& indices) {
        KnowledgeState s(size);
        for (auto i : indices) s.set(i);
        return s;
    }

    /// Parses a string of '0'/'1' characters; position i is item i.
    static KnowledgeState from_bitstring(std::string_view bits) {
        KnowledgeState s(bits.size());
        for (std::size_t i = 0; i < bits.size(); ++i) {
            if (bits[i] == '1') {
                s.set(i);
            } else if (bits[i] != '0') {
                throw Error(ErrorCode::ParseError, "state bitstring may only contain '0' and '1'");
            }
        }
        return s;
    }

    std::size_t size() const noexcept { return size_; }

    bool test(std::size_t i) const {
        check_index(i);
        return (words_[i / 64] >> (i % 64)) & 1u;
    }

    void set(std::size_t i, bool value = true) {
        check_index(i);
        const std::uint64_t mask = std::uint64_t{1} << (i % 64);
        if (value) {
            words_[i / 64] |= mask;
        } else {
            words_[i / 64] &= ~mask;
        }
    }

    std::size_t count() const noexcept {
        std::size_t n = 0;
        for (auto w : words_) n += static_cast<std::size_t>(std::popcount(w));
        return n;
    }

    std::string to_bitstring() const {
        std::string out(size_, '0');
        for (std::size_t i = 0; i < size_; ++i) {
            if (test(i)) out[i] = '1';
        }
        return out;
    }

    std::vector<std::size_t> indices() const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < size_; ++i) {
            if (test(i)) out.push_back(i);
        }
        return out;
    }

    const std::vector<std::uint64_t>& words() const noexcept { return words_; }

    friend KnowledgeState operator|(const KnowledgeState& a, const KnowledgeState& b) {
        if (a.size_ != b.size_) throw Error(ErrorCode::DomainMismatch, "union of states of different length");
        KnowledgeState out = a;
        for (std::size_t w = 0; w < out.words_.size(); ++w) out.words_[w] |= b.words_[w];
        return out;
    }

    bool operator==(const KnowledgeState&) const = default;

private:
    void check_index(std::size_t i) const {
        if (i >= size_) {
            throw Error(ErrorCode::InvalidArgument,
                        "item index " + std::to_string(i) + " out of range for state of size " +
                            std::to_string(size_));
        }
    }

    std::size_t size_ = 0;
    std::vector<std::uint64_t> words_;
};

/// Fraction of the domain contained in the state.
inline double score(const KnowledgeState& state, const ItemDomain& domain) {
    if (state.size() != domain.size()) {
        throw Error(ErrorCode::DomainMismatch, "state has " + std::to_string(state.size()) +
                                                   " bits but domain has " +
                                                   std::to_string(domain.size()) + " items");
    }
    return static_cast<double>(state.count()) / static_cast<double>(domain.size());
}

// ---------------------------------------------------------------------------
// Grades and outcomes
// ---------------------------------------------------------------------------

/// Letter grades ordered from best to worst. W sorts last.
enum class Grade : std::uint8_t { A, AMinus, BPlus, B, BMinus, CPlus, C, CMinus, DPlus, D, DMinus, F, W };

inline constexpr std::array<Grade, 13> kAllGrades = {
    Grade::A,     Grade::AMinus, Grade::BPlus, Grade::B,      Grade::BMinus, Grade::CPlus, Grade::C,
    Grade::CMinus, Grade::DPlus, Grade::D,     Grade::DMinus, Grade::F,      Grade::W};

constexpr std::string_view to_string(Grade g) noexcept {
    constexpr std::array<std::string_view, 13> names = {"A",  "A-", "B+", "B",  "B-", "C+", "C",
                                                        "C-", "D+", "D",  "D-", "F",  "W"};
    return names[static_cast<std::size_t>(g)];
}

inline std::optional<Grade> parse_grade(std::string_view text) noexcept {
    for (auto g : kAllGrades) {
        if (to_string(g) == text) return g;
    }
    return std::nullopt;
}

/// 0 for W up to 12 for A; used by the ordinal grade model.
constexpr std::size_t grade_rank(Grade g) noexcept { return 12 - static_cast<std::size_t>(g); }

constexpr Grade grade_from_rank(std::size_t rank) noexcept { return static_cast<Grade>(12 - rank); }

enum class Outcome : std::uint8_t { Pass, Fail };

constexpr std::string_view to_string(Outcome o) noexcept { return o == Outcome::Pass ? "pass" : "fail"; }

/// How withdrawals enter pass/fail statistics.
enum class WPolicy : std::uint8_t { Fail, Exclude };

constexpr std::string_view to_string(WPolicy p) noexcept { return p == WPolicy::Fail ? "fail" : "exclude"; }

inline std::optional<WPolicy> parse_w_policy(std::string_view text) noexcept {
    if (text == "fail") return WPolicy::Fail;
    if (text == "exclude") return WPolicy::Exclude;
    return std::nullopt;
}

/// Pass means C- or better. Returns nullopt when the record is excluded.
constexpr std::optional<Outcome> outcome(Grade g, WPolicy policy = WPolicy::Fail) noexcept {
    if (g == Grade::W) {
        if (policy == WPolicy::Exclude) return std::nullopt;
        return Outcome::Fail;
    }
    return static_cast<std::uint8_t>(g) <= static_cast<std::uint8_t>(Grade::CMinus) ? Outcome::Pass
                                                                                   : Outcome::Fail;
}

enum class GradeBand : std::uint8_t { A, B, C, D, FW };

inline constexpr std::array<GradeBand, 5> kAllBands = {GradeBand::A, GradeBand::B, GradeBand::C,
                                                       GradeBand::D, GradeBand::FW};

constexpr std::string_view to_string(GradeBand b) noexcept {
    constexpr std::array<std::string_view, 5> names = {"A", "B", "C", "D", "FW"};
    return names[static_cast<std::size_t>(b)];
}

constexpr GradeBand grade_band(Grade g) noexcept {
    switch (g) {
    case Grade::A:
    case Grade::AMinus: return GradeBand::A;
    case Grade::BPlus:
    case Grade::B:
    case Grade::BMinus: return GradeBand::B;
    case Grade::CPlus:
    case Grade::C:
    case Grade::CMinus: return GradeBand::C;
    case Grade::DPlus:
    case Grade::D:
    case Grade::DMinus: return GradeBand::D;
    case Grade::F:
    case Grade::W: return GradeBand::FW;
    }
    return GradeBand::FW;
}

// ---------------------------------------------------------------------------
// Records and cohorts
// ---------------------------------------------------------------------------

class StudentRecord {
public:
    StudentRecord(std::string student_id, std::string course_id, std::string term, KnowledgeState state,
                  Grade grade, std::string assessment_date = {})
        : student_id_(std::move(student_id)),
          course_id_(std::move(course_id)),
          term_(std::move(term)),
          assessment_date_(std::move(assessment_date)),
          state_(std::move(state)),
          raw_score_(state_.count()),
          grade_(grade) {}

    const std::string& student_id() const noexcept { return student_id_; }
    const std::string& course_id() const noexcept { return course_id_; }
    const std::string& term() const noexcept { return term_; }
    const std::string& assessment_date() const noexcept { return assessment_date_; }
    const KnowledgeState& state() const noexcept { return state_; }
    std::size_t assessment_score_raw() const noexcept { return raw_score_; }
    Grade grade() const noexcept { return grade_; }

    bool operator==(const StudentRecord&) const = default;

private:
    std::string student_id_;
    std::string course_id_;
    std::string term_;
    std::string assessment_date_;
    KnowledgeState state_;
    std::size_t raw_score_;
    Grade grade_;
};

/// One course offering: every record shares course, term, and domain.
class Cohort {
public:
    Cohort(std::string course_id, std::string term, std::shared_ptr<const ItemDomain> domain,
           std::vector<StudentRecord> records, WPolicy w_policy = WPolicy::Fail)
        : course_id_(std::move(course_id)),
          term_(std::move(term)),
          domain_(std::move(domain)),
          records_(std::move(records)),
          w_policy_(w_policy) {
        if (!domain_) throw Error(ErrorCode::InvalidArgument, "cohort requires an item domain");
        std::unordered_set<std::string_view> seen;
        for (const auto& r : records_) {
            if (r.state().size() != domain_->size()) {
                throw Error(ErrorCode::DomainMismatch,
                            "record for student '" + r.student_id() + "' has " +
                                std::to_string(r.state().size()) + " bits, domain has " +
                                std::to_string(domain_->size()));
            }
            if (r.course_id() != course_id_ || r.term() != term_) {
                throw Error(ErrorCode::InvalidArgument, "record for student '" + r.student_id() +
                                                            "' belongs to " + r.course_id() + "/" +
                                                            r.term() + ", not " + course_id_ + "/" + term_);
            }
            if (!seen.insert(r.student_id()).second) {
                throw Error(ErrorCode::DuplicateStudent,
                            "student '" + r.student_id() + "' appears twice in " + course_id_ + "/" + term_);
            }
        }
    }

    const std::string& course_id() const noexcept { return course_id_; }
    const std::string& term() const noexcept { return term_; }
    const ItemDomain& domain() const noexcept { return *domain_; }
    const std::shared_ptr<const ItemDomain>& domain_ptr() const noexcept { return domain_; }
    const std::vector<StudentRecord>& records() const noexcept { return records_; }
    std::size_t size() const noexcept { return records_.size(); }
    bool empty() const noexcept { return records_.empty(); }
    WPolicy w_policy() const noexcept { return w_policy_; }
    std::string label() const { return course_id_ + " " + term_; }

    Cohort with_w_policy(WPolicy policy) const {
        Cohort copy = *this;
        copy.w_policy_ = policy;
        return copy;
    }

private:
    std::string course_id_;
    std::string term_;
    std::shared_ptr<const ItemDomain> domain_;
    std::vector<StudentRecord> records_;
    WPolicy w_policy_;
};

} // namespace kstate
