#pragma once

// Shared helpers for the test binaries: seeded generators for random tables
// and cohorts, table-to-cohort expansion, and scratch directories.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "kstate/kstate.hpp"

namespace kstate::test {

class Gen {
public:
    explicit Gen(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t count(std::uint64_t lo, std::uint64_t hi) {
        return std::uniform_int_distribution<std::uint64_t>(lo, hi)(engine_);
    }
    double real(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
    bool coin(double p = 0.5) { return std::bernoulli_distribution(p)(engine_); }

    ContingencyTable table(std::uint64_t max_count) {
        return {count(0, max_count), count(0, max_count), count(0, max_count), count(0, max_count)};
    }

    /// Every cell at least 1, so any pseudocount gives a positive table.
    ContingencyTable positive_table(std::uint64_t max_count) {
        return {count(1, max_count), count(1, max_count), count(1, max_count), count(1, max_count)};
    }

    Grade grade() { return kAllGrades[count(0, kAllGrades.size() - 1)]; }

    KnowledgeState state(std::size_t n, double p = 0.5) {
        KnowledgeState s(n);
        for (std::size_t i = 0; i < n; ++i) s.set(i, coin(p));
        return s;
    }

    /// Random cohort with independent item and grade draws.
    Cohort cohort(std::size_t n_students, std::size_t n_items, WPolicy policy = WPolicy::Fail) {
        auto domain = std::make_shared<const ItemDomain>(ItemDomain::synthetic(n_items));
        const double p = real(0.1, 0.9);
        std::vector<StudentRecord> records;
        for (std::size_t j = 0; j < n_students; ++j) {
            records.emplace_back("s" + std::to_string(j), "T100", "2010-FA", state(n_items, p), grade());
        }
        return Cohort("T100", "2010-FA", domain, std::move(records), policy);
    }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
};

/// One-item cohort whose table for item 0 is exactly `t`.
inline Cohort cohort_from_table(const ContingencyTable& t, std::string course = "C1", std::string term = "2010-FA") {
    auto domain = std::make_shared<const ItemDomain>(ItemDomain::synthetic(1));
    std::vector<StudentRecord> records;
    std::size_t id = 0;
    auto add = [&](std::uint64_t n, bool has, Grade g) {
        for (std::uint64_t k = 0; k < n; ++k) {
            KnowledgeState s(1);
            s.set(0, has);
            records.emplace_back("s" + std::to_string(id++), course, term, s, g);
        }
    };
    add(t.n00, true, Grade::B);
    add(t.n01, true, Grade::F);
    add(t.n10, false, Grade::B);
    add(t.n11, false, Grade::F);
    return Cohort(course, term, domain, std::move(records));
}

inline double rel_diff(double a, double b) {
    const double scale = std::max(std::abs(a), std::abs(b));
    return scale == 0 ? 0 : std::abs(a - b) / scale;
}

/// Fresh directory under the system temp dir, removed on destruction.
class ScratchDir {
public:
    explicit ScratchDir(const std::string& name) {
        path_ = std::filesystem::temp_directory_path() /
                ("kstate_" + name + "_" + std::to_string(std::random_device{}()));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~ScratchDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    ScratchDir(const ScratchDir&) = delete;
    ScratchDir& operator=(const ScratchDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& leaf) const { return path_ / leaf; }

private:
    std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void spit(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

} // namespace kstate::test
