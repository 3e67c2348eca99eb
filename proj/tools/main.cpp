// phaseloom command-line tool: synthesis, analysis, phase reconstruction,
// click corruption/restoration, and evaluation/benchmark harnesses.
//
// Exit codes: 0 success, 2 invalid usage or parameters, 3 data errors
// (unreadable/malformed files, sample-rate mismatch).

#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "phaseloom/phaseloom.hpp"

using nlohmann::json;
using namespace phaseloom;

namespace {

std::vector<double> parse_list(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        std::size_t used = 0;
        const double v = std::stod(tok, &used);
        if (used != tok.size()) throw std::invalid_argument("malformed number in list: " + tok);
        out.push_back(v);
    }
    if (out.empty()) throw std::invalid_argument("empty list");
    return out;
}

std::vector<std::uint64_t> parse_seeds(const std::string& csv) {
    std::vector<std::uint64_t> out;
    for (double v : parse_list(csv)) {
        if (v < 0 || v != std::floor(v)) throw std::invalid_argument("seeds must be non-negative integers");
        out.push_back(std::uint64_t(v));
    }
    return out;
}

Signal load_signal(const std::string& path, int expect_rate) {
    Signal s = read_wav(path);
    if (expect_rate > 0 && s.sample_rate != expect_rate) {
        throw std::runtime_error("sample rate mismatch: " + path + " has " +
                                 std::to_string(s.sample_rate) + " Hz, expected " +
                                 std::to_string(expect_rate));
    }
    return s;
}

json config_json(const StftConfig& cfg, int rate) {
    return json{{"win", cfg.win},
                {"hop", cfg.hop},
                {"fft", cfg.fft},
                {"window", cfg.window == WindowKind::Hann ? "hann" : "rect"},
                {"rate", rate},
                {"config_hash", config_hash_string(cfg, rate)}};
}

void write_json(const std::string& path, const json& j) {
    write_file_atomic(path, j.dump(2) + "\n");
}

struct GlobalOpts {
    StftConfig cfg;
    int rate = 11025;
    std::string window = "hann";

    void finalize() {
        if (window == "hann") cfg.window = WindowKind::Hann;
        else if (window == "rect") cfg.window = WindowKind::Rectangular;
        else throw std::invalid_argument("unknown window kind: " + window);
        cfg.validate();
        if (rate <= 0) throw std::invalid_argument("sample rate must be positive");
    }
};

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"model-based spectrogram phase reconstruction toolkit"};
    app.require_subcommand(1);
    app.fallthrough(); // accept global analysis flags after the subcommand name

    GlobalOpts g;
    app.add_option("--win", g.cfg.win, "analysis window length")->capture_default_str();
    app.add_option("--hop", g.cfg.hop, "hop size in samples")->capture_default_str();
    app.add_option("--fft", g.cfg.fft, "FFT size")->capture_default_str();
    app.add_option("--rate", g.rate, "sample rate in Hz")->capture_default_str();
    app.add_option("--window", g.window, "analysis window kind (hann|rect)")->capture_default_str();

    // ---- synth ----
    auto* synth = app.add_subcommand("synth", "generate a test signal as WAV");
    std::string synth_type = "sin", synth_out;
    std::string synth_freqs = "0.1", synth_amps = "1", synth_phases;
    double synth_fc = 0.02, synth_depth = 0.0002, synth_fm = 5.0, synth_f0 = 0.03, synth_decay = 1e-4;
    std::string synth_positions = "2048,6144";
    double synth_impamp = 1.0;
    int synth_partials = 6;
    double synth_len_s = 1.0;
    std::uint64_t synth_seed = 1;
    bool synth_float = false;
    synth->add_option("--type", synth_type, "sin|vibrato|impulses|damped")->capture_default_str();
    synth->add_option("out", synth_out, "output WAV path")->required();
    synth->add_option("--freqs", synth_freqs, "sinusoid frequencies (normalised, comma list)");
    synth->add_option("--amps", synth_amps, "sinusoid amplitudes (comma list)");
    synth->add_option("--phases", synth_phases, "sinusoid phases in radians (comma list)");
    synth->add_option("--fc", synth_fc, "vibrato carrier (normalised)");
    synth->add_option("--depth", synth_depth, "vibrato depth (normalised)");
    synth->add_option("--fm", synth_fm, "vibrato rate in Hz");
    synth->add_option("--positions", synth_positions, "impulse positions in samples (comma list)");
    synth->add_option("--imp-amp", synth_impamp, "impulse amplitude");
    synth->add_option("--f0", synth_f0, "damped-tone fundamental (normalised)");
    synth->add_option("--partials", synth_partials, "damped-tone partial count");
    synth->add_option("--decay", synth_decay, "damped-tone decay per sample");
    synth->add_option("--len-s", synth_len_s, "duration in seconds")->capture_default_str();
    synth->add_option("--seed", synth_seed, "random seed");
    synth->add_flag("--float", synth_float, "write 32-bit float WAV instead of PCM16");

    // ---- analyze ----
    auto* analyze = app.add_subcommand("analyze", "peaks, refined frequencies and onsets to JSON");
    std::string an_in, an_out, an_spec;
    double an_floor = -40.0, an_sens = 1.5;
    analyze->add_option("in", an_in, "input WAV")->required();
    analyze->add_option("out", an_out, "output JSON report")->required();
    analyze->add_option("--floor-db", an_floor, "peak floor relative to frame max")->capture_default_str();
    analyze->add_option("--sensitivity", an_sens, "onset threshold sensitivity")->capture_default_str();
    analyze->add_option("--export-spec", an_spec, "also write the complex spectrogram (.spec)");

    // ---- reconstruct ----
    auto* rec = app.add_subcommand("reconstruct", "rebuild phases from magnitudes and resynthesise");
    std::string rec_in, rec_out, rec_method = "pu", rec_onset = "qi", rec_known, rec_report;
    int rec_iters = 200;
    std::uint64_t rec_seed = 1;
    double rec_sens = 1.5;
    rec->add_option("in", rec_in, "input WAV or .spec")->required();
    rec->add_option("out", rec_out, "output WAV")->required();
    rec->add_option("--method", rec_method, "pu|gl")->capture_default_str();
    rec->add_option("--onset-phase", rec_onset, "imp|qi|rand|zero|alt")->capture_default_str();
    rec->add_option("--iters", rec_iters, "Griffin-Lim iterations")->capture_default_str();
    rec->add_option("--seed", rec_seed, "random seed");
    rec->add_option("--sensitivity", rec_sens, "onset threshold sensitivity");
    rec->add_option("--known-phase", rec_known, "phase file (.phase) of known bins");
    rec->add_option("--report", rec_report, "write a JSON reconstruction report");

    // ---- griffinlim ----
    auto* glc = app.add_subcommand("griffinlim", "Griffin-Lim resynthesis (shortcut for reconstruct --method gl)");
    std::string gl_in, gl_out, gl_known, gl_report;
    int gl_iters = 200;
    std::uint64_t gl_seed = 1;
    glc->add_option("in", gl_in, "input WAV or .spec")->required();
    glc->add_option("out", gl_out, "output WAV")->required();
    glc->add_option("--iters", gl_iters, "iterations")->capture_default_str();
    glc->add_option("--seed", gl_seed, "random seed");
    glc->add_option("--known-phase", gl_known, "phase file (.phase) of known bins");
    glc->add_option("--report", gl_report, "write a JSON report with the inconsistency trace");

    // ---- corrupt ----
    auto* cor = app.add_subcommand("corrupt", "inject clicks into a signal");
    std::string cor_in, cor_out, cor_report;
    int cor_clicks = 3, cor_len = 10;
    double cor_amp = 10.0;
    std::uint64_t cor_seed = 1;
    cor->add_option("in", cor_in, "input WAV")->required();
    cor->add_option("out", cor_out, "output WAV")->required();
    cor->add_option("--clicks", cor_clicks, "number of clicks")->capture_default_str();
    cor->add_option("--click-len", cor_len, "click length in samples")->capture_default_str();
    cor->add_option("--amp", cor_amp, "click peak as a multiple of signal RMS")->capture_default_str();
    cor->add_option("--seed", cor_seed, "random seed");
    cor->add_option("--report", cor_report, "write click positions and corrupted frames as JSON");

    // ---- restore ----
    auto* res = app.add_subcommand("restore", "repair a click-corrupted signal");
    std::string res_in, res_out, res_report, res_method = "pu", res_onset = "qi";
    int res_iters = 200;
    std::uint64_t res_seed = 1;
    res->add_option("in", res_in, "corrupted WAV")->required();
    res->add_option("out", res_out, "restored WAV")->required();
    res->add_option("--report", res_report, "corruption report JSON from `corrupt`")->required();
    res->add_option("--method", res_method, "pu|gl")->capture_default_str();
    res->add_option("--onset-phase", res_onset, "imp|qi|rand|zero|alt")->capture_default_str();
    res->add_option("--iters", res_iters, "Griffin-Lim iterations")->capture_default_str();
    res->add_option("--seed", res_seed, "random seed");

    // ---- eval ----
    auto* ev = app.add_subcommand("eval", "run a seeded evaluation scenario, write CSV");
    std::string ev_scenario = "horizontal", ev_out, ev_seeds = "1";
    int ev_items = 10, ev_gliters = 200, ev_threads = 0;
    double ev_duration = 0.0;
    ev->add_option("--scenario", ev_scenario, "horizontal|onset|complete-phase|restoration")
        ->capture_default_str();
    ev->add_option("--out", ev_out, "output CSV path")->required();
    ev->add_option("--items", ev_items, "corpus items")->capture_default_str();
    ev->add_option("--seeds", ev_seeds, "comma list of seeds")->capture_default_str();
    ev->add_option("--gl-iters", ev_gliters, "Griffin-Lim iterations")->capture_default_str();
    ev->add_option("--duration", ev_duration, "item duration in seconds (0 = scenario default)");
    ev->add_option("--threads", ev_threads, "worker threads (0 = auto)");

    // ---- bench ----
    auto* be = app.add_subcommand("bench", "time phase unwrapping against Griffin-Lim, write CSV");
    std::string be_out;
    double be_duration = 30.0;
    int be_gliters = 200;
    std::uint64_t be_seed = 1;
    be->add_option("--out", be_out, "output CSV path")->required();
    be->add_option("--duration", be_duration, "signal duration in seconds")->capture_default_str();
    be->add_option("--gl-iters", be_gliters, "Griffin-Lim iterations")->capture_default_str();
    be->add_option("--seed", be_seed, "random seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        g.finalize();

        if (*synth) {
            const std::size_t len = std::size_t(synth_len_s * g.rate);
            Signal s;
            json params{{"type", synth_type}, {"len_s", synth_len_s}, {"seed", synth_seed}};
            if (synth_type == "sin") {
                const std::vector<double> freqs = parse_list(synth_freqs);
                const std::vector<double> amps = parse_list(synth_amps);
                std::vector<double> phases(freqs.size(), 0.0);
                if (!synth_phases.empty()) phases = parse_list(synth_phases);
                if (amps.size() != freqs.size() || phases.size() != freqs.size())
                    throw std::invalid_argument("freqs/amps/phases lists must have equal length");
                std::vector<SinusoidComponent> parts;
                for (std::size_t i = 0; i < freqs.size(); ++i)
                    parts.push_back({freqs[i], amps[i], phases[i]});
                s = gen_sinusoid_mixture(parts, len, g.rate);
                params["freqs"] = freqs;
                params["amps"] = amps;
                params["phases"] = phases;
            } else if (synth_type == "vibrato") {
                const double fm_norm = synth_fm / double(g.rate);
                s = gen_vibrato(synth_fc, synth_depth, fm_norm, 1.0, 0.0, len, g.rate);
                params["fc"] = synth_fc;
                params["depth"] = synth_depth;
                params["fm_hz"] = synth_fm;
            } else if (synth_type == "impulses") {
                std::vector<ImpulseComponent> imps;
                for (double p : parse_list(synth_positions)) {
                    if (p < 0 || p != std::floor(p))
                        throw std::invalid_argument("impulse positions must be non-negative integers");
                    imps.push_back({std::size_t(p), synth_impamp});
                }
                s = gen_impulse_mixture(imps, len, g.rate);
                params["positions"] = json::parse("[]");
                for (const auto& im : imps) params["positions"].push_back(im.pos);
                params["imp_amp"] = synth_impamp;
            } else if (synth_type == "damped") {
                s = gen_damped_tone(synth_f0, synth_partials, synth_decay, len, g.rate, synth_seed);
                params["f0"] = synth_f0;
                params["partials"] = synth_partials;
                params["decay"] = synth_decay;
            } else {
                throw std::invalid_argument("unknown synth type: " + synth_type);
            }
            write_wav(synth_out, s, synth_float ? WavFormat::Float32 : WavFormat::Pcm16);
            params["config"] = config_json(g.cfg, g.rate);
            write_json(synth_out + ".json", params);
        }

        if (*analyze) {
            const Signal s = load_signal(an_in, g.rate);
            const Spectrogram X = stft(s.samples, g.cfg);
            const Mat<double> mag = X.magnitude();
            const OnsetSet onsets = detect_onsets(mag, g.cfg, an_sens);
            json frames = json::array();
            for (std::size_t t = 0; t < X.frames(); ++t) {
                std::vector<Peak> peaks = find_peaks(mag, t, an_floor);
                refine_peaks(mag.col(t), X.n_bins(), peaks, g.cfg);
                json fr = json::array();
                for (const Peak& p : peaks)
                    fr.push_back({{"channel", p.channel},
                                  {"amp", p.amp},
                                  {"freq", p.freq},
                                  {"amp_refined", p.amp_refined},
                                  {"refined", p.refined}});
                frames.push_back(std::move(fr));
            }
            json out{{"config", config_json(g.cfg, g.rate)},
                     {"signal_len", s.samples.size()},
                     {"n_frames", X.frames()},
                     {"onset_frames", onsets.frames},
                     {"frames", std::move(frames)}};
            write_json(an_out, out);
            if (!an_spec.empty()) write_spec(an_spec, X, g.rate);
        }

        if (*rec || *glc) {
            const bool is_gl = *glc || rec_method == "gl";
            if (*rec && rec_method != "pu" && rec_method != "gl")
                throw std::invalid_argument("unknown method: " + rec_method);
            const std::string in = *glc ? gl_in : rec_in;
            const std::string out_path = *glc ? gl_out : rec_out;
            const std::string known_path = *glc ? gl_known : rec_known;
            const std::string report_path = *glc ? gl_report : rec_report;
            const int iters = *glc ? gl_iters : rec_iters;
            const std::uint64_t seed = *glc ? gl_seed : rec_seed;

            Spectrogram X;
            int rate = g.rate;
            if (in.size() > 5 && in.substr(in.size() - 5) == ".spec") {
                auto [Xs, r] = read_spec(in);
                X = std::move(Xs);
                rate = r;
            } else {
                const Signal s = load_signal(in, g.rate);
                X = stft(s.samples, g.cfg);
            }
            const StftConfig cfg = X.config();
            const Mat<double> mag = X.magnitude();

            std::optional<PhaseMatrix> known;
            if (!known_path.empty()) {
                known = read_phase(known_path);
                if (known->values.rows() != X.n_bins() || known->values.cols() != X.frames())
                    throw std::runtime_error("known-phase shape does not match the spectrogram");
            }

            json report{{"config", config_json(cfg, rate)}, {"input", in}};
            std::vector<double> y;
            if (is_gl) {
                GriffinLimResult r =
                    griffin_lim(mag, X.signal_len(), known ? &*known : nullptr, iters, seed, cfg);
                y = istft(r.spec);
                report["method"] = "gl";
                report["iters"] = iters;
                report["inconsistency"] = r.trace;
            } else {
                const OnsetSet onsets = detect_onsets(mag, cfg, rec_sens);
                const PhaseMatrix ph =
                    reconstruct_phases(mag, known ? &*known : nullptr, onsets, cfg,
                                       onset_method_from_string(rec_onset), seed);
                y = istft(compose_spectrogram(mag, ph.values, cfg, X.signal_len()));
                report["method"] = "pu";
                report["onset_phase"] = rec_onset;
                report["onset_frames"] = onsets.frames;
            }
            write_wav(out_path, Signal{y, rate}, WavFormat::Float32);
            if (!report_path.empty()) write_json(report_path, report);
        }

        if (*cor) {
            const Signal s = load_signal(cor_in, g.rate);
            auto [y, rep] = corrupt_with_clicks(s, cor_clicks, cor_len, cor_amp, cor_seed, g.cfg);
            write_wav(cor_out, y, WavFormat::Float32);
            if (!cor_report.empty()) {
                json j{{"config", config_json(g.cfg, g.rate)},
                       {"click_len", rep.click_len},
                       {"amp_scale", rep.amp_scale},
                       {"positions", rep.positions},
                       {"corrupted_frames", rep.corrupted_frames}};
                write_json(cor_report, j);
            }
        }

        if (*res) {
            const Signal s = load_signal(res_in, g.rate);
            const json j = json::parse(read_file(res_report));
            ClickReport rep;
            rep.click_len = j.at("click_len").get<int>();
            rep.amp_scale = j.at("amp_scale").get<double>();
            rep.positions = j.at("positions").get<std::vector<std::size_t>>();
            rep.corrupted_frames = j.at("corrupted_frames").get<std::vector<int>>();
            RestoreOptions ro;
            ro.method = res_method == "gl" ? RestoreMethod::GriffinLim : RestoreMethod::PhaseUnwrap;
            if (res_method != "gl" && res_method != "pu")
                throw std::invalid_argument("unknown method: " + res_method);
            ro.onset_phase = onset_method_from_string(res_onset);
            ro.gl_iters = res_iters;
            ro.seed = res_seed;
            write_wav(res_out, restore(s, rep, g.cfg, ro), WavFormat::Float32);
        }

        if (*ev) {
            EvalOptions opt;
            opt.scenario = ev_scenario;
            opt.items = ev_items;
            opt.seeds = parse_seeds(ev_seeds);
            opt.gl_iters = ev_gliters;
            opt.duration_s = ev_duration;
            opt.rate = g.rate;
            opt.cfg = g.cfg;
            opt.threads = ev_threads;
            write_metrics_csv(ev_out, run_eval(opt));
        }

        if (*be) {
            write_metrics_csv(be_out, run_bench(be_duration, be_gliters, g.cfg, g.rate, be_seed));
        }
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
