#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <string>
#include <sys/wait.h>

#include <json.hpp>

#include "phaseloom/experiment.hpp"
#include "phaseloom/fsio.hpp"
#include "phaseloom/metrics.hpp"
#include "phaseloom/specio.hpp"
#include "phaseloom/wav.hpp"

using nlohmann::json;
using namespace phaseloom;

namespace {

std::string work_dir() {
    static const std::string dir = [] {
        const std::string d = "/tmp/phaseloom_cli_tests";
        std::filesystem::remove_all(d);
        std::filesystem::create_directories(d);
        return d;
    }();
    return dir;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(PHASELOOM_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    REQUIRE(rc != -1);
    REQUIRE(WIFEXITED(rc));
    return WEXITSTATUS(rc);
}

json load_json(const std::string& path) { return json::parse(read_file(path)); }

} // namespace

TEST_CASE("cli synth writes the signal plus a parameter sidecar") {
    const std::string d = work_dir();
    REQUIRE(run_cli("synth " + d + "/tone.wav --type damped --f0 0.03 --partials 4 --decay 1e-4"
                    " --len-s 1.0 --seed 3") == 0);
    const Signal s = read_wav(d + "/tone.wav");
    CHECK(s.samples.size() == 11025);
    CHECK(s.sample_rate == 11025);
    for (double v : s.samples) REQUIRE(std::abs(v) <= 1.0);

    const json side = load_json(d + "/tone.wav.json");
    CHECK(side.at("type") == "damped");
    CHECK(side.at("config").at("win") == 512);
    StftConfig cfg;
    CHECK(side.at("config").at("config_hash") == config_hash_string(cfg, 11025));
}

TEST_CASE("cli synth --float output is byte-identical across runs") {
    const std::string d = work_dir();
    const std::string args = " --type sin --freqs 0.1,0.23 --amps 1,0.5 --len-s 0.5 --float";
    REQUIRE(run_cli("synth " + d + "/fa.wav" + args) == 0);
    REQUIRE(run_cli("synth " + d + "/fb.wav" + args) == 0);
    CHECK(read_file(d + "/fa.wav") == read_file(d + "/fb.wav"));
}

TEST_CASE("cli analyze reports config, onsets and per-frame peaks") {
    const std::string d = work_dir();
    REQUIRE(run_cli("synth " + d + "/mix.wav --type sin --freqs 0.1,0.2 --amps 1,0.5 --len-s 1.0") == 0);
    REQUIRE(run_cli("analyze " + d + "/mix.wav " + d + "/mix.json --export-spec " + d + "/mix.spec") == 0);

    const json rep = load_json(d + "/mix.json");
    CHECK(rep.at("signal_len") == 11025);
    CHECK(rep.at("onset_frames").is_array());
    const auto& frames = rep.at("frames");
    REQUIRE(frames.is_array());
    CHECK(frames.size() == rep.at("n_frames").get<std::size_t>());
    const auto& mid = frames.at(frames.size() / 2);
    REQUIRE(mid.size() >= 2);
    CHECK(mid.at(0).contains("channel"));
    CHECK(mid.at(0).contains("freq"));

    const auto [X, rate] = read_spec(d + "/mix.spec");
    CHECK(rate == 11025);
    CHECK(X.n_bins() == 257);
    CHECK(X.frames() == frames.size());
}

TEST_CASE("cli reconstruct and griffinlim resynthesise the input") {
    const std::string d = work_dir();
    REQUIRE(run_cli("synth " + d + "/src.wav --type damped --len-s 1.0") == 0);

    REQUIRE(run_cli("reconstruct " + d + "/src.wav " + d + "/pu.wav --method pu --report " + d +
                    "/pu.json") == 0);
    CHECK(read_wav(d + "/pu.wav").samples.size() == 11025);
    const json pu = load_json(d + "/pu.json");
    CHECK(pu.at("method") == "pu");
    CHECK(pu.contains("onset_frames"));

    REQUIRE(run_cli("reconstruct " + d + "/src.wav " + d + "/gl2.wav --method gl --iters 4") == 0);

    REQUIRE(run_cli("griffinlim " + d + "/src.wav " + d + "/gl.wav --iters 5 --report " + d +
                    "/gl.json") == 0);
    const json gl = load_json(d + "/gl.json");
    CHECK(gl.at("method") == "gl");
    REQUIRE(gl.at("inconsistency").is_array());
    CHECK(gl.at("inconsistency").size() == 5);
}

TEST_CASE("cli corrupt then restore lifts the SDR back up") {
    const std::string d = work_dir();
    REQUIRE(run_cli("synth " + d + "/clean.wav --type damped --f0 0.025 --partials 6 --decay 1e-4"
                    " --len-s 2.0 --seed 12 --float") == 0);
    REQUIRE(run_cli("corrupt " + d + "/clean.wav " + d + "/bad.wav --clicks 3 --seed 5 --report " +
                    d + "/clicks.json") == 0);

    const json crep = load_json(d + "/clicks.json");
    CHECK(crep.at("click_len") == 10);
    REQUIRE(crep.at("positions").size() == 3);
    CHECK(!crep.at("corrupted_frames").empty());

    REQUIRE(run_cli("restore " + d + "/bad.wav " + d + "/fixed.wav --report " + d + "/clicks.json") == 0);

    const Signal clean = read_wav(d + "/clean.wav");
    const Signal bad = read_wav(d + "/bad.wav");
    const Signal fixed = read_wav(d + "/fixed.wav");
    const double before = sdr(clean.samples, bad.samples);
    const double after = sdr(clean.samples, fixed.samples);
    CHECK(after >= before + 5.0);
}

TEST_CASE("cli eval writes a CSV with per-group summary rows") {
    const std::string d = work_dir();
    REQUIRE(run_cli("eval --scenario restoration --out " + d + "/eval.csv --items 1 --seeds 1"
                    " --gl-iters 2 --duration 1.2 --threads 1") == 0);
    const std::string csv = read_file(d + "/eval.csv");
    CHECK(csv.rfind("scenario,method,seed,corruption_pct,sdr_db,runtime_ms,config_hash\n", 0) == 0);
    CHECK(csv.find("restoration,pu-qi,") != std::string::npos);
    CHECK(csv.find("pu-qi:mean") != std::string::npos);
    CHECK(csv.find("gl:stddev") != std::string::npos);
}

TEST_CASE("cli bench writes one row per method") {
    const std::string d = work_dir();
    REQUIRE(run_cli("bench --out " + d + "/bench.csv --duration 0.5 --gl-iters 2") == 0);
    const std::string csv = read_file(d + "/bench.csv");
    CHECK(csv.find("bench,pu-qi,") != std::string::npos);
    CHECK(csv.find("bench,gl,") != std::string::npos);
}

TEST_CASE("cli distinguishes usage errors from data errors in its exit code") {
    const std::string d = work_dir();
    REQUIRE(run_cli("synth " + d + "/ok.wav --type damped --len-s 0.4") == 0);

    CHECK(run_cli("--help") == 0);
    CHECK(run_cli("") == 2);           // missing subcommand
    CHECK(run_cli("frobnicate") == 2); // unknown subcommand
    CHECK(run_cli("synth " + d + "/x.wav --no-such-flag") == 2);
    CHECK(run_cli("synth " + d + "/x.wav --type nosuch") == 2);
    CHECK(run_cli("synth " + d + "/x.wav --window tukey") == 2);
    CHECK(run_cli("corrupt " + d + "/ok.wav " + d + "/y.wav --clicks -2") == 2);

    CHECK(run_cli("analyze " + d + "/does_not_exist.wav " + d + "/o.json") == 3);
    CHECK(run_cli("analyze " + d + "/ok.wav " + d + "/o.json --rate 22050") == 3);
    write_file_atomic(d + "/broken.json", "{oops");
    CHECK(run_cli("restore " + d + "/ok.wav " + d + "/z.wav --report " + d + "/broken.json") == 3);
    CHECK(run_cli("restore " + d + "/ok.wav " + d + "/z.wav --report " + d + "/missing.json") == 3);
}
