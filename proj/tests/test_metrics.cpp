#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "phaseloom/metrics.hpp"
#include "phaseloom/stft.hpp"
#include "phaseloom/synth.hpp"

using namespace phaseloom;

TEST_CASE("sdr of an exact or rescaled match saturates") {
    std::vector<double> r(1000);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = std::sin(0.01 * double(i));
    CHECK(sdr(r, r) == 300.0);
    std::vector<double> e = r;
    for (double& v : e) v *= 2.5;
    CHECK(sdr(r, e) == 300.0);
    for (double& v : e) v = -v;
    CHECK(sdr(r, e) == 300.0);
}

TEST_CASE("sdr measures orthogonal noise exactly") {
    // Reference plus noise orthogonalised against it: with noise energy
    // 10^-2 of the reference energy, the projection leaves exactly the
    // noise as residual, i.e. 20 dB.
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    std::vector<double> r(4000), n(4000);
    for (std::size_t i = 0; i < r.size(); ++i) {
        r[i] = uni(rng);
        n[i] = uni(rng);
    }
    double rr = 0.0, nr = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
        rr += r[i] * r[i];
        nr += n[i] * r[i];
    }
    for (std::size_t i = 0; i < n.size(); ++i) n[i] -= nr / rr * r[i];
    double nn = 0.0;
    for (double v : n) nn += v * v;
    const double scale = std::sqrt(rr / nn) * 0.1;
    std::vector<double> e(r.size());
    for (std::size_t i = 0; i < e.size(); ++i) e[i] = r[i] + scale * n[i];
    CHECK(sdr(r, e) == Catch::Approx(20.0).margin(1e-9));

    // Pure orthogonal noise: nothing projects onto the reference.
    CHECK(sdr(r, n) < -100.0);
}

TEST_CASE("sdr is invariant to estimate scaling and trims lengths") {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    std::vector<double> r(500), e(500);
    for (std::size_t i = 0; i < 500; ++i) {
        r[i] = uni(rng);
        e[i] = r[i] + 0.05 * uni(rng);
    }
    const double base = sdr(r, e);
    std::vector<double> e3 = e;
    for (double& v : e3) v *= 3.0;
    CHECK(sdr(r, e3) == Catch::Approx(base).margin(1e-12));

    std::vector<double> longer = e;
    longer.push_back(123.0);
    CHECK(sdr(r, longer) == base);

    CHECK_THROWS_AS(sdr(std::vector<double>{}, e), std::invalid_argument);
    CHECK_THROWS_AS(sdr(std::vector<double>(10, 0.0), std::vector<double>(10, 1.0)),
                    std::invalid_argument);
}

TEST_CASE("consistent spectrograms have (near) zero inconsistency") {
    StftConfig cfg;
    const Signal s = gen_sinusoid_mixture({{0.07, 1.0, 0.1}, {0.19, 0.4, -0.4}}, 4000);
    const Spectrogram X = stft(s.samples, cfg);
    CHECK(inconsistency(X) < 1e-12);
}

TEST_CASE("randomising phases makes a spectrogram inconsistent") {
    StftConfig cfg;
    const Signal s = gen_sinusoid_mixture({{0.11, 1.0, 0.0}}, 4000);
    Spectrogram X = stft(s.samples, cfg);
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> uni(-kPi, kPi);
    for (std::size_t t = 0; t < X.frames(); ++t)
        for (std::size_t k = 0; k < X.n_bins(); ++k) X(k, t) = std::polar(std::abs(X(k, t)), uni(rng));
    CHECK(inconsistency(X) > 0.05);
}

TEST_CASE("inconsistency is invariant to rescaling the spectrogram") {
    // The consistency projection is linear over real scalars, so the
    // relative inconsistency cannot see an overall gain.
    StftConfig cfg;
    const Signal s = gen_sinusoid_mixture({{0.13, 1.0, 0.3}}, 3000);
    Spectrogram X = stft(s.samples, cfg);
    for (std::size_t t = 0; t < X.frames(); ++t)
        X(40, t) += std::complex<double>{0.3, -0.2}; // make it inconsistent
    const double base = inconsistency(X);
    CHECK(base > 1e-4);
    Spectrogram Y = X;
    for (std::size_t t = 0; t < Y.frames(); ++t)
        for (std::size_t k = 0; k < Y.n_bins(); ++k) Y(k, t) *= 4.0;
    CHECK(inconsistency(Y) == Catch::Approx(base).margin(1e-13));
}

TEST_CASE("inconsistency rejects empty or zero spectrograms") {
    StftConfig cfg;
    Spectrogram zero(cfg, 1000, 8);
    CHECK_THROWS_AS(inconsistency(zero), std::invalid_argument);
    CHECK_THROWS_AS(inconsistency(Spectrogram{}), std::invalid_argument);
}
