#pragma once

// JSON config for the synthetic generator and the ground-truth file written
// next to a generated dataset.
//
// {
//   "n_items": 182, "n_students": 1000, "edge_density": 0.02,
//   "ability": {"mean": 0.0, "sd": 1.0}, "mastery_noise": 1.0,
//   "difficulties": [...],                      // optional, one per item
//   "grade_model": {
//     "score_weight": 2.0,
//     "intercepts": {"W": -2.5, "F": -1.2, ..., "A": 2.6},
//     "planted_effects": [{"item": 3, "type": "basic", "strength": 1.5}]
//   },
//   "seed": 42, "course_id": "SYN101", "term": "2010-FA",
//   "assessment_date": "2010-08-01",
//   "courses": [{"course_id": "M012", "term": "2010-FA",
//                "n_students": 1000, "ability_mean": -0.5, "ability_sd": 1.0}]
// }
//
// Every key is optional; unknown keys are rejected. When "courses" is given,
// one cohort is generated per entry over a shared DAG.

#include <filesystem>
#include <fstream>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "kstate/error.hpp"
#include "kstate/io/ingest.hpp"
#include "kstate/io/report.hpp"
#include "kstate/synth.hpp"

namespace kstate::io {

struct SynthPlan {
    SynthConfig base;
    std::vector<CourseSpec> courses; // empty: a single cohort from `base`
};

namespace detail {

inline void reject_unknown(const Json& j, std::initializer_list<std::string_view> known, std::string_view where) {
    for (const auto& [key, value] : j.items()) {
        if (std::ranges::find(known, key) == known.end()) {
            throw Error(ErrorCode::InvalidArgument, "unknown key '" + key + "' in " + std::string(where));
        }
    }
}

} // namespace detail

inline SynthPlan parse_synth_config(const Json& j) {
    if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, "synth config must be a JSON object");
    SynthPlan plan;
    auto& c = plan.base;
    try {
        detail::reject_unknown(j,
                               {"n_items", "n_students", "edge_density", "ability", "mastery_noise", "difficulties",
                                "grade_model", "seed", "course_id", "term", "assessment_date", "courses"},
                               "synth config");
        if (j.contains("n_items")) c.n_items = j.at("n_items").get<std::size_t>();
        if (j.contains("n_students")) c.n_students = j.at("n_students").get<std::size_t>();
        if (j.contains("edge_density")) c.edge_density = j.at("edge_density").get<double>();
        if (j.contains("ability")) {
            const auto& a = j.at("ability");
            detail::reject_unknown(a, {"mean", "sd"}, "ability");
            if (a.contains("mean")) c.ability_mean = a.at("mean").get<double>();
            if (a.contains("sd")) c.ability_sd = a.at("sd").get<double>();
        }
        if (j.contains("mastery_noise")) c.mastery_noise = j.at("mastery_noise").get<double>();
        if (j.contains("difficulties")) c.difficulties = j.at("difficulties").get<std::vector<double>>();
        if (j.contains("grade_model")) {
            const auto& g = j.at("grade_model");
            detail::reject_unknown(g, {"score_weight", "intercepts", "planted_effects"}, "grade_model");
            if (g.contains("score_weight")) c.grade_model.score_weight = g.at("score_weight").get<double>();
            if (g.contains("intercepts")) {
                const auto& ic = g.at("intercepts");
                if (!ic.is_object() || ic.size() != 13) {
                    throw Error(ErrorCode::InvalidArgument, "intercepts must give a value for each of the 13 grades");
                }
                for (const auto& [letter, value] : ic.items()) {
                    const auto grade = parse_grade(letter);
                    if (!grade) throw Error(ErrorCode::InvalidArgument, "unknown grade '" + letter + "' in intercepts");
                    c.grade_model.intercepts[grade_rank(*grade)] = value.get<double>();
                }
            }
            if (g.contains("planted_effects")) {
                for (const auto& e : g.at("planted_effects")) {
                    detail::reject_unknown(e, {"item", "type", "strength"}, "planted effect");
                    PlantedEffect pe;
                    pe.item_index = e.at("item").get<std::size_t>();
                    const auto type = e.at("type").get<std::string>();
                    if (type == "basic") {
                        pe.effect_type = EffectType::Basic;
                    } else if (type == "advanced") {
                        pe.effect_type = EffectType::Advanced;
                    } else {
                        throw Error(ErrorCode::InvalidArgument, "planted effect type must be basic or advanced");
                    }
                    pe.strength = e.at("strength").get<double>();
                    c.grade_model.planted_effects.push_back(pe);
                }
            }
        }
        if (j.contains("seed")) c.rng_seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("course_id")) c.course_id = j.at("course_id").get<std::string>();
        if (j.contains("term")) c.term = j.at("term").get<std::string>();
        if (j.contains("assessment_date")) c.assessment_date = j.at("assessment_date").get<std::string>();
        if (j.contains("courses")) {
            for (const auto& cj : j.at("courses")) {
                detail::reject_unknown(cj, {"course_id", "term", "n_students", "ability_mean", "ability_sd"}, "course");
                CourseSpec spec;
                spec.course_id = cj.at("course_id").get<std::string>();
                spec.term = cj.value("term", c.term);
                spec.n_students = cj.value("n_students", c.n_students);
                spec.ability_mean = cj.value("ability_mean", c.ability_mean);
                spec.ability_sd = cj.value("ability_sd", c.ability_sd);
                plan.courses.push_back(std::move(spec));
            }
        }
    } catch (const Json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, std::string("malformed synth config: ") + e.what());
    }
    if (!parse_date(c.assessment_date)) {
        throw Error(ErrorCode::InvalidArgument, "assessment_date '" + c.assessment_date + "' is not an ISO date");
    }
    c.validate();
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& spec : plan.courses) {
        if (spec.n_students == 0) {
            throw Error(ErrorCode::EmptyCohortRequested, "course " + spec.course_id + " requests 0 students");
        }
        if (!seen.emplace(spec.course_id, spec.term).second) {
            throw Error(ErrorCode::InvalidArgument, "course " + spec.course_id + "/" + spec.term + " listed twice");
        }
    }
    return plan;
}

inline SynthPlan parse_synth_config(std::string_view text) {
    try {
        return parse_synth_config(Json::parse(text));
    } catch (const Json::parse_error& e) {
        throw Error(ErrorCode::InvalidArgument, std::string("synth config is not valid JSON: ") + e.what());
    }
}

inline std::vector<SynthCohort> run_plan(const SynthPlan& plan) {
    if (plan.courses.empty()) {
        std::vector<SynthCohort> out;
        out.push_back(gen_cohort(plan.base));
        return out;
    }
    return gen_course_sequence(plan.base, plan.courses);
}

inline Json config_to_json(const SynthConfig& c) {
    Json intercepts = Json::object();
    for (auto g : kAllGrades) {
        intercepts[std::string(to_string(g))] = canonical_real(c.grade_model.intercepts[grade_rank(g)], "intercept");
    }
    Json effects = Json::array();
    for (const auto& e : c.grade_model.planted_effects) {
        effects.push_back({{"item", e.item_index},
                           {"type", to_string(e.effect_type)},
                           {"strength", canonical_real(e.strength, "strength")}});
    }
    Json difficulties = Json::array();
    for (double d : c.resolved_difficulties()) difficulties.push_back(canonical_real(d, "difficulty"));
    return {{"n_items", c.n_items},
            {"n_students", c.n_students},
            {"edge_density", canonical_real(c.edge_density, "edge_density")},
            {"ability", {{"mean", canonical_real(c.ability_mean, "ability mean")},
                         {"sd", canonical_real(c.ability_sd, "ability sd")}}},
            {"mastery_noise", canonical_real(c.mastery_noise, "mastery_noise")},
            {"difficulties", difficulties},
            {"grade_model", {{"score_weight", canonical_real(c.grade_model.score_weight, "score_weight")},
                             {"intercepts", intercepts},
                             {"planted_effects", effects}}},
            {"seed", c.rng_seed},
            {"course_id", c.course_id},
            {"term", c.term},
            {"assessment_date", c.assessment_date}};
}

/// One document for a whole generated dataset: the shared DAG plus per-course
/// config and latent abilities.
inline Json ground_truth_to_json(std::span<const SynthCohort> generated) {
    Json out = {{"schema_version", 1}};
    if (generated.empty()) return out;
    Json edges = Json::array();
    for (const auto& e : generated.front().truth.dag.edges()) edges.push_back({e.prereq, e.item});
    out["dag"] = {{"n_items", generated.front().truth.dag.n_items()}, {"edges", edges}};
    Json courses = Json::array();
    for (const auto& g : generated) {
        Json abilities = Json::array();
        for (double a : g.truth.abilities) abilities.push_back(canonical_real(a, "ability"));
        courses.push_back({{"course_id", g.cohort.course_id()},
                           {"term", g.cohort.term()},
                           {"config", config_to_json(g.truth.config)},
                           {"abilities", abilities}});
    }
    out["courses"] = courses;
    return out;
}

/// Writes records.csv, items.csv and ground_truth.json into `dir`.
inline void write_synth_outputs(const std::filesystem::path& dir, std::span<const SynthCohort> generated) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error(ErrorCode::Io, "cannot create directory '" + dir.string() + "': " + ec.message());
    auto open = [](const std::filesystem::path& p) {
        std::ofstream out(p, std::ios::binary);
        if (!out) throw Error(ErrorCode::Io, "cannot open '" + p.string() + "' for writing");
        return out;
    };
    std::vector<Cohort> cohorts;
    for (const auto& g : generated) cohorts.push_back(g.cohort);
    {
        auto out = open(dir / "records.csv");
        write_records(out, cohorts);
    }
    if (!cohorts.empty()) {
        auto out = open(dir / "items.csv");
        write_manifest(out, cohorts.front().domain());
    }
    {
        auto out = open(dir / "ground_truth.json");
        out << ground_truth_to_json(generated).dump(2) << "\n";
    }
}

} // namespace kstate::io
