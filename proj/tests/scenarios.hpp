#pragma once

// Synthetic scenarios shared by the unit and acceptance suites.
//
// FR > PR exactly when p_l(1 - p_l) > p_h(1 - p_h), where p_h and p_l are the
// pass rates with and without the item. A basic effect only separates the two
// ratios in the intended direction when students holding the item pass far
// from 50%, so the basic scenario uses a common item and a high pass rate.
// The advanced scenario mirrors it: a rare item and a low pass rate.

#include <cstdint>
#include <vector>

#include "kstate/kstate.hpp"

namespace kstate::test {

inline constexpr std::size_t kPlantedItem = 0; // index 0 never has prerequisites

inline SynthConfig null_config(std::uint64_t seed, std::size_t n_students, std::size_t n_items) {
    SynthConfig cfg;
    cfg.n_items = n_items;
    cfg.n_students = n_students;
    cfg.rng_seed = seed;
    cfg.grade_model.score_weight = 0.0;
    return cfg;
}

inline GradeIntercepts shifted_intercepts(double by) {
    GradeIntercepts out = kDefaultIntercepts;
    for (auto& x : out) x += by;
    return out;
}

inline SynthConfig planted_config(EffectType type, std::uint64_t seed, std::size_t n_students = 2000,
                                  std::size_t n_items = 40) {
    SynthConfig cfg;
    cfg.n_items = n_items;
    cfg.n_students = n_students;
    cfg.rng_seed = seed;
    cfg.difficulties = cfg.resolved_difficulties();
    cfg.grade_model.score_weight = 1.0;
    if (type == EffectType::Basic) {
        cfg.difficulties[kPlantedItem] = -1.5;
        cfg.grade_model.intercepts = shifted_intercepts(-0.8);
    } else {
        cfg.difficulties[kPlantedItem] = 1.5;
        cfg.grade_model.intercepts = shifted_intercepts(1.4);
    }
    cfg.grade_model.planted_effects = {{kPlantedItem, type, 1.5}};
    return cfg;
}

/// Pass rates near 90% among holders push the failing ratio past twice the
/// passing ratio, so the planted item lands in the Basic class outright.
inline SynthConfig strong_basic_config(std::uint64_t seed) {
    auto cfg = planted_config(EffectType::Basic, seed);
    cfg.grade_model.intercepts = shifted_intercepts(-2.0);
    cfg.grade_model.planted_effects[0].strength = 2.5;
    return cfg;
}

} // namespace kstate::test
