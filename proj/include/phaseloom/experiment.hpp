#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <future>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <utility>
#include <vector>

#include "analysis.hpp"
#include "common.hpp"
#include "fsio.hpp"
#include "metrics.hpp"
#include "reconstruct.hpp"
#include "restore.hpp"
#include "stft.hpp"
#include "synth.hpp"

namespace phaseloom {

/// One evaluation measurement, one CSV line.
struct MetricRow {
    std::string scenario;
    std::string method;
    std::uint64_t seed = 0;
    double corruption_pct = 0.0;
    double sdr_db = 0.0;
    double runtime_ms = 0.0;
    std::string config_hash;
};

inline std::string config_hash_string(const StftConfig& cfg, int rate) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "win=%d,hop=%d,fft=%d,window=%d,rate=%d", cfg.win, cfg.hop,
                  cfg.fft, cfg.window == WindowKind::Hann ? 0 : 1, rate);
    char out[24];
    std::snprintf(out, sizeof out, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(buf, std::strlen(buf))));
    return out;
}

namespace detail {

inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

} // namespace detail

/// Render rows as CSV with a fixed header.
inline std::string metrics_to_csv(const std::vector<MetricRow>& rows) {
    std::string out = "scenario,method,seed,corruption_pct,sdr_db,runtime_ms,config_hash\n";
    for (const MetricRow& r : rows) {
        out += r.scenario;
        out += ',';
        out += r.method;
        out += ',';
        out += std::to_string(r.seed);
        out += ',';
        out += detail::fmt_double(r.corruption_pct);
        out += ',';
        out += detail::fmt_double(r.sdr_db);
        out += ',';
        out += detail::fmt_double(r.runtime_ms);
        out += ',';
        out += r.config_hash;
        out += '\n';
    }
    return out;
}

/// Append mean/stddev summary rows per (scenario, method, corruption) group.
inline void append_summary_rows(std::vector<MetricRow>& rows) {
    std::map<std::tuple<std::string, std::string, double>, std::vector<const MetricRow*>> groups;
    for (const MetricRow& r : rows)
        groups[{r.scenario, r.method, r.corruption_pct}].push_back(&r);
    std::vector<MetricRow> extra;
    for (const auto& [key, members] : groups) {
        double mean = 0.0, mean_rt = 0.0;
        for (const MetricRow* m : members) {
            mean += m->sdr_db;
            mean_rt += m->runtime_ms;
        }
        mean /= double(members.size());
        mean_rt /= double(members.size());
        double var = 0.0;
        for (const MetricRow* m : members) var += (m->sdr_db - mean) * (m->sdr_db - mean);
        const double sd = members.size() > 1 ? std::sqrt(var / double(members.size() - 1)) : 0.0;
        MetricRow base{std::get<0>(key), std::get<1>(key) + ":mean", 0, std::get<2>(key),
                       mean, mean_rt, members.front()->config_hash};
        extra.push_back(base);
        base.method = std::get<1>(key) + ":stddev";
        base.sdr_db = sd;
        base.runtime_ms = 0.0;
        extra.push_back(base);
    }
    rows.insert(rows.end(), extra.begin(), extra.end());
}

// ---------------------------------------------------------------------------
// Seeded evaluation corpora.
// ---------------------------------------------------------------------------

/// Mixture of 5 well-separated stationary sinusoids.
inline Signal make_stationary_item(std::uint64_t seed, std::size_t len, int rate = 11025) {
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
    std::uniform_real_distribution<double> famp(0.5, 1.0);
    std::uniform_real_distribution<double> fph(-kPi, kPi);
    std::uniform_real_distribution<double> ffreq(0.03, 0.44);
    std::vector<SinusoidComponent> parts;
    const double min_gap = 8.0 / 512.0;
    while (parts.size() < 5) {
        const double f = ffreq(rng);
        bool ok = true;
        for (const auto& p : parts)
            if (std::abs(p.freq - f) < min_gap) {
                ok = false;
                break;
            }
        if (ok) parts.push_back({f, famp(rng), fph(rng)});
    }
    std::sort(parts.begin(), parts.end(),
              [](const SinusoidComponent& a, const SinusoidComponent& b) { return a.freq < b.freq; });
    return gen_sinusoid_mixture(parts, len, rate);
}

/// Low-carrier vibrato tone whose tracked frequency stays well inside a bin.
inline Signal make_vibrato_item(std::uint64_t seed, std::size_t len, int rate = 11025) {
    std::mt19937_64 rng(seed ^ 0xc2b2ae3d27d4eb4full);
    std::uniform_real_distribution<double> fcar(0.018, 0.025);
    std::uniform_real_distribution<double> fph(-kPi, kPi);
    const double fc = fcar(rng);
    const double depth = 0.01 * fc;
    const double fm = 5.0 / double(rate);
    return gen_vibrato(fc, depth, fm, 1.0, fph(rng), len, rate);
}

/// A few isolated impulses, well separated and away from the edges.
inline std::pair<Signal, std::vector<std::size_t>> make_impulse_item(std::uint64_t seed,
                                                                     std::size_t len,
                                                                     int rate = 11025,
                                                                     int count = 3,
                                                                     int win = 512) {
    std::mt19937_64 rng(seed ^ 0x165667b19e3779f9ull);
    const std::size_t margin = 2 * std::size_t(win);
    const std::size_t min_gap = std::size_t(win) * 5 / 2;
    if (len < 2 * margin + std::size_t(count) * min_gap)
        throw std::invalid_argument("make_impulse_item: signal too short");
    std::uniform_int_distribution<std::size_t> pick(margin, len - margin - 1);
    std::uniform_real_distribution<double> famp(0.5, 2.0);
    std::vector<std::size_t> positions;
    while (positions.size() < std::size_t(count)) {
        const std::size_t p = pick(rng);
        bool ok = true;
        for (std::size_t q : positions)
            if ((p > q ? p - q : q - p) < min_gap) {
                ok = false;
                break;
            }
        if (ok) positions.push_back(p);
    }
    std::sort(positions.begin(), positions.end());
    std::vector<ImpulseComponent> imps;
    for (std::size_t p : positions) imps.push_back({p, famp(rng)});
    return {gen_impulse_mixture(imps, len, rate), positions};
}

/// Percussive harmonic tone: fast decay, most energy in the attack.
inline Signal make_percussive_item(std::uint64_t seed, std::size_t len, int rate = 11025) {
    std::mt19937_64 rng(seed ^ 0x27d4eb2f165667c5ull);
    std::uniform_real_distribution<double> ff0(0.02, 0.045);
    std::uniform_real_distribution<double> fdecay(6e-4, 1.2e-3);
    const double f0 = ff0(rng);
    const int max_partials = int(0.499 / f0);
    const int partials = std::min(8, max_partials);
    return gen_damped_tone(f0, partials, fdecay(rng), len, rate, rng());
}

/// Sustained harmonic tone: a piano-like sustain whose amplitude
/// time-constant spans a few seconds, leaving a long quasi-stationary tail.
inline Signal make_sustained_item(std::uint64_t seed, std::size_t len, int rate = 11025) {
    std::mt19937_64 rng(seed ^ 0x85ebca77c2b2ae63ull);
    std::uniform_real_distribution<double> ff0(0.02, 0.05);
    std::uniform_real_distribution<double> fdecay(1e-5, 3e-5);
    const double f0 = ff0(rng);
    const int max_partials = int(0.499 / f0);
    const int partials = std::min(8, max_partials);
    return gen_damped_tone(f0, partials, fdecay(rng), len, rate, rng());
}

// ---------------------------------------------------------------------------
// Scenario runners.
// ---------------------------------------------------------------------------

struct EvalOptions {
    std::string scenario = "horizontal";
    int items = 10;
    std::vector<std::uint64_t> seeds = {1};
    int gl_iters = 200;
    double duration_s = 0.0; // 0 = scenario default
    int rate = 11025;
    StftConfig cfg;
    int threads = 0; // 0 = hardware concurrency
};

namespace detail {

inline double now_ms() {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

/// Reconstruct with the phase-unwrapping pipeline and report SDR + runtime.
inline MetricRow run_pu(const std::string& scenario, const Signal& clean, const Mat<double>& mag,
                        const PhaseMatrix* known, const OnsetSet& onsets,
                        OnsetPhaseMethod method, std::uint64_t seed, const StftConfig& cfg,
                        double corruption_pct, const std::string& hash) {
    const double t0 = now_ms();
    const PhaseMatrix ph = reconstruct_phases(mag, known, onsets, cfg, method, seed);
    const std::vector<double> y =
        istft(compose_spectrogram(mag, ph.values, cfg, clean.samples.size()));
    const double t1 = now_ms();
    return {scenario, std::string("pu-") + to_string(method), seed, corruption_pct,
            sdr(clean.samples, y), t1 - t0, hash};
}

inline MetricRow run_gl(const std::string& scenario, const Signal& clean, const Mat<double>& mag,
                        const PhaseMatrix* known, int iters, std::uint64_t seed,
                        const StftConfig& cfg, double corruption_pct, const std::string& hash) {
    const double t0 = now_ms();
    GriffinLimResult gl = griffin_lim(mag, clean.samples.size(), known, iters, seed, cfg);
    const std::vector<double> y = istft(gl.spec);
    const double t1 = now_ms();
    return {scenario, "gl", seed, corruption_pct, sdr(clean.samples, y), t1 - t0, hash};
}

inline std::vector<MetricRow> eval_one_item(const EvalOptions& opt, int item) {
    const StftConfig& cfg = opt.cfg;
    const std::string hash = config_hash_string(cfg, opt.rate);
    const std::uint64_t item_seed = std::uint64_t(item) + 1;
    std::vector<MetricRow> rows;

    if (opt.scenario == "horizontal") {
        const std::size_t len = std::size_t((opt.duration_s > 0 ? opt.duration_s : 3.0) * opt.rate);
        const Signal clean = make_stationary_item(item_seed, len, opt.rate);
        const Spectrogram X = stft(clean.samples, cfg);
        const Mat<double> mag = X.magnitude();
        const PhaseMatrix known = PhaseMatrix::frames_known(X, {0, 1, 2, 3});
        const OnsetSet no_onsets;
        rows.push_back(run_pu(opt.scenario, clean, mag, &known, no_onsets, OnsetPhaseMethod::QI,
                              item_seed, cfg, 0.0, hash));
        for (std::uint64_t s : opt.seeds)
            rows.push_back(run_gl(opt.scenario, clean, mag, &known, opt.gl_iters, s, cfg, 0.0, hash));
    } else if (opt.scenario == "onset") {
        const std::size_t len = std::size_t((opt.duration_s > 0 ? opt.duration_s : 1.5) * opt.rate);
        const Signal clean = make_percussive_item(item_seed, len, opt.rate);
        const Spectrogram X = stft(clean.samples, cfg);
        const Mat<double> mag = X.magnitude();
        const OnsetSet onsets = detect_onsets(mag, cfg);
        for (OnsetPhaseMethod m : {OnsetPhaseMethod::QI, OnsetPhaseMethod::Imp,
                                   OnsetPhaseMethod::Rand, OnsetPhaseMethod::Zero,
                                   OnsetPhaseMethod::Alt})
            for (std::uint64_t s : opt.seeds)
                rows.push_back(run_pu(opt.scenario, clean, mag, nullptr, onsets, m, s, cfg, 0.0, hash));
    } else if (opt.scenario == "complete-phase") {
        const std::size_t len = std::size_t((opt.duration_s > 0 ? opt.duration_s : 3.0) * opt.rate);
        const Signal clean = make_sustained_item(item_seed, len, opt.rate);
        const Spectrogram X = stft(clean.samples, cfg);
        for (int pct = 10; pct <= 90; pct += 10) {
            auto [Xc, mask] = corrupt_phases(X, pct / 100.0, item_seed * 131 + std::uint64_t(pct));
            const Mat<double> mag = X.magnitude();
            PhaseMatrix known(X.n_bins(), X.frames());
            known.values = X.phase();
            for (std::size_t t = 0; t < X.frames(); ++t)
                for (std::size_t k = 0; k < X.n_bins(); ++k)
                    known.known(k, t) = mask(k, t) ? 0 : 1;
            rows.push_back({opt.scenario, "corrupted", item_seed, double(pct),
                            sdr(clean.samples, istft(Xc)), 0.0, hash});
            const OnsetSet onsets = detect_onsets(mag, cfg);
            rows.push_back(run_pu(opt.scenario, clean, mag, &known, onsets, OnsetPhaseMethod::QI,
                                  item_seed, cfg, double(pct), hash));
            for (std::uint64_t s : opt.seeds)
                rows.push_back(
                    run_gl(opt.scenario, clean, mag, &known, opt.gl_iters, s, cfg, double(pct), hash));
        }
    } else if (opt.scenario == "restoration") {
        const std::size_t len = std::size_t((opt.duration_s > 0 ? opt.duration_s : 3.0) * opt.rate);
        const Signal clean = make_sustained_item(item_seed, len, opt.rate);
        for (std::uint64_t s : opt.seeds) {
            auto [bad, report] = corrupt_with_clicks(clean, 3, 10, 10.0, s * 977 + 13, cfg);
            rows.push_back({opt.scenario, "corrupted", s, 0.0, sdr(clean.samples, bad.samples),
                            0.0, hash});
            RestoreOptions ro;
            ro.method = RestoreMethod::PhaseUnwrap;
            ro.seed = s;
            double t0 = now_ms();
            Signal rec = restore(bad, report, cfg, ro);
            double t1 = now_ms();
            rows.push_back({opt.scenario, "pu-qi", s, 0.0, sdr(clean.samples, rec.samples),
                            t1 - t0, hash});
            ro.method = RestoreMethod::GriffinLim;
            ro.gl_iters = opt.gl_iters;
            t0 = now_ms();
            rec = restore(bad, report, cfg, ro);
            t1 = now_ms();
            rows.push_back({opt.scenario, "gl", s, 0.0, sdr(clean.samples, rec.samples),
                            t1 - t0, hash});
        }
    } else {
        throw std::invalid_argument("unknown scenario: " + opt.scenario);
    }
    return rows;
}

} // namespace detail

/// Run an evaluation scenario over a seeded corpus. Items are distributed
/// over a small worker pool; the returned rows are in deterministic item
/// order regardless of scheduling.
inline std::vector<MetricRow> run_eval(const EvalOptions& opt) {
    opt.cfg.validate();
    if (opt.items < 1) throw std::invalid_argument("run_eval: need at least one item");
    if (opt.seeds.empty()) throw std::invalid_argument("run_eval: need at least one seed");
    if (opt.gl_iters < 0) throw std::invalid_argument("run_eval: iteration count must be non-negative");
    if (opt.rate <= 0) throw std::invalid_argument("run_eval: sample rate must be positive");

    unsigned workers = opt.threads > 0 ? unsigned(opt.threads) : std::thread::hardware_concurrency();
    workers = std::max(1u, std::min({workers, 8u, unsigned(opt.items)}));

    std::vector<std::vector<MetricRow>> per_item(std::size_t(opt.items));
    std::vector<std::future<void>> futs;
    for (unsigned w = 0; w < workers; ++w) {
        futs.push_back(std::async(std::launch::async, [&, w] {
            for (int i = int(w); i < opt.items; i += int(workers))
                per_item[std::size_t(i)] = detail::eval_one_item(opt, i);
        }));
    }
    for (auto& f : futs) f.get();

    std::vector<MetricRow> rows;
    for (auto& chunk : per_item) rows.insert(rows.end(), chunk.begin(), chunk.end());
    append_summary_rows(rows);
    return rows;
}

/// Time one full phase-unwrapping pass against Griffin-Lim on the same
/// sustained tone, reporting SDR and wall-clock per method.
inline std::vector<MetricRow> run_bench(double duration_s, int gl_iters, const StftConfig& cfg,
                                        int rate = 11025, std::uint64_t seed = 1) {
    cfg.validate();
    if (!(duration_s > 0.0)) throw std::invalid_argument("run_bench: duration must be positive");
    if (gl_iters < 0) throw std::invalid_argument("run_bench: iteration count must be non-negative");
    if (rate <= 0) throw std::invalid_argument("run_bench: sample rate must be positive");
    const std::string hash = config_hash_string(cfg, rate);
    const Signal clean = make_sustained_item(seed, std::size_t(duration_s * rate), rate);
    const Spectrogram X = stft(clean.samples, cfg);
    const Mat<double> mag = X.magnitude();

    std::vector<MetricRow> rows;
    {
        const double t0 = detail::now_ms();
        const OnsetSet onsets = detect_onsets(mag, cfg);
        const PhaseMatrix ph = reconstruct_phases(mag, nullptr, onsets, cfg, OnsetPhaseMethod::QI, seed);
        const std::vector<double> y =
            istft(compose_spectrogram(mag, ph.values, cfg, clean.samples.size()));
        const double t1 = detail::now_ms();
        rows.push_back({"bench", "pu-qi", seed, 0.0, sdr(clean.samples, y), t1 - t0, hash});
    }
    {
        const double t0 = detail::now_ms();
        GriffinLimResult gl = griffin_lim(mag, clean.samples.size(), nullptr, gl_iters, seed, cfg);
        const std::vector<double> y = istft(gl.spec);
        const double t1 = detail::now_ms();
        rows.push_back({"bench", "gl", seed, 0.0, sdr(clean.samples, y), t1 - t0, hash});
    }
    return rows;
}

/// Render and atomically write rows to a CSV file.
inline void write_metrics_csv(const std::string& path, const std::vector<MetricRow>& rows) {
    write_file_atomic(path, metrics_to_csv(rows));
}

} // namespace phaseloom
