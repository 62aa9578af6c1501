#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "cusploc/errors.hpp"
#include "cusploc/rng.hpp"
#include "cusploc/scenario.hpp"
#include "cusploc/signal.hpp"

namespace cusploc {

/// Event times of one detector, strictly increasing within [0, T].
struct EventRecord {
    std::size_t detector_index = 0;
    std::vector<double> times;
};

/// One realization X^n of the k-detector experiment.
struct ObservationSet {
    std::vector<EventRecord> records;
    Scenario scenario;
    std::uint64_t seed = 0;
};

/// Number of events at or before t (right-continuous counting path X_j(t)).
inline std::size_t counting_path(const EventRecord& rec, double t, double horizon) {
    if (t < 0.0 || t > horizon) throw domain_error("counting_path: t outside [0, T]");
    return static_cast<std::size_t>(
        std::upper_bound(rec.times.begin(), rec.times.end(), t) - rec.times.begin());
}

/// Simulate the k independent inhomogeneous Poisson processes by
/// Lewis-Shedler thinning against the constant majorant
/// n (lambda0 + max S_j). Each detector draws from its own substream of the
/// seed, so the records are independent and the result does not depend on
/// evaluation order.
inline ObservationSet simulate(const Scenario& sc, std::uint64_t seed) {
    const ValidationReport rep = validate_scenario(sc);
    if (!rep.all_pass())
        throw validation_error("simulate: scenario failed validation:\n" + rep.to_string());

    ObservationSet obs;
    obs.scenario = sc;
    obs.seed = seed;
    obs.records.resize(sc.k());
    for (std::size_t j = 0; j < sc.k(); ++j) {
        EventRecord& rec = obs.records[j];
        rec.detector_index = j;
        const double tau = sc.tau(j, sc.source);
        const BaselineProfile& prof = sc.detectors[j].profile;
        const double lam_max =
            sc.n * (sc.lambda0 + signal_max(prof, sc.kappa, sc.delta, sc.horizon));
        Rng rng(derive_seed(seed, j));
        double t = 0.0;
        for (;;) {
            t += rng.exponential() / lam_max;
            if (t > sc.horizon) break;
            const double lam =
                sc.n * (signal_value(t - tau, prof, sc.kappa, sc.delta) + sc.lambda0);
            if (rng.uniform() * lam_max < lam) rec.times.push_back(t);
        }
    }
    return obs;
}

/// Thinning acceptance rate for diagnostics: expected events / expected candidates.
inline double thinning_acceptance(const Scenario& sc, std::size_t j) {
    const BaselineProfile& prof = sc.detectors[j].profile;
    const double lam_max = sc.lambda0 + signal_max(prof, sc.kappa, sc.delta, sc.horizon);
    const double mean = cumulative_intensity(sc, sc.source, j, sc.horizon);
    return mean / (sc.n * lam_max * sc.horizon);
}

// ---------------------------------------------------------------------------
// CSV + sidecar serialization

inline void save_observations(const ObservationSet& obs, const std::string& csv_path) {
    std::ofstream out(csv_path);
    if (!out) throw io_error("cannot open output file: " + csv_path);
    out << "detector_index,time\n";
    char buf[64];
    for (const auto& rec : obs.records)
        for (double t : rec.times) {
            std::snprintf(buf, sizeof buf, "%zu,%.17g\n", rec.detector_index, t);
            out << buf;
        }
    nlohmann::json meta{{"scenario", to_json(obs.scenario)}, {"seed", obs.seed}};
    std::ofstream side(csv_path + ".meta.json");
    if (!side) throw io_error("cannot open sidecar file: " + csv_path + ".meta.json");
    side << meta.dump(2) << '\n';
}

inline ObservationSet load_observations(const std::string& csv_path) {
    std::ifstream side(csv_path + ".meta.json");
    if (!side) throw io_error("cannot open sidecar file: " + csv_path + ".meta.json");
    nlohmann::json meta;
    side >> meta;
    ObservationSet obs;
    obs.scenario = scenario_from_json(meta.at("scenario"));
    obs.seed = meta.at("seed").get<std::uint64_t>();
    obs.records.resize(obs.scenario.k());
    for (std::size_t j = 0; j < obs.records.size(); ++j) obs.records[j].detector_index = j;

    std::ifstream in(csv_path);
    if (!in) throw io_error("cannot open observations file: " + csv_path);
    std::string line;
    std::getline(in, line); // header
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw io_error("malformed observations row: " + line);
        const auto j = static_cast<std::size_t>(std::stoull(line.substr(0, comma)));
        if (j >= obs.records.size()) throw io_error("detector index out of range: " + line);
        obs.records[j].times.push_back(std::stod(line.substr(comma + 1)));
    }
    for (auto& rec : obs.records)
        if (!std::is_sorted(rec.times.begin(), rec.times.end()))
            std::sort(rec.times.begin(), rec.times.end());
    return obs;
}

} // namespace cusploc
