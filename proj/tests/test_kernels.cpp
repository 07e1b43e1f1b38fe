#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "anomsynth/kernels.hpp"
#include "anomsynth/numeric.hpp"
#include "anomsynth/rng.hpp"
#include "anomsynth/sha256.hpp"

using namespace anomsynth;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n, double lo = -10, double hi = 10) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(lo, hi);
    return v;
}

}  // namespace

TEST_CASE("kernel backends agree bit-for-bit") {
    const kernels::KernelOps& ref = kernels::scalar_ops();
    const kernels::KernelOps* simd = kernels::simd_ops();
    if (!simd) {
        MESSAGE("no SIMD backend on this target; scalar only");
        return;
    }
    Rng rng(4242);
    // sizes straddling block and checkpoint boundaries
    for (std::size_t n : {0, 1, 2, 3, 4, 5, 7, 8, 15, 16, 17, 31, 32, 33, 63, 64, 65,
                          127, 218, 1001}) {
        for (int rep = 0; rep < 20; ++rep) {
            const auto a = random_vec(rng, n);
            const auto b = random_vec(rng, n);
            CHECK(ref.dot(a.data(), b.data(), n) == simd->dot(a.data(), b.data(), n));
            const double inf = std::numeric_limits<double>::infinity();
            CHECK(ref.sq_l2(a.data(), b.data(), n, inf) ==
                  simd->sq_l2(a.data(), b.data(), n, inf));
            // bounded form: identical values and identical abandon decisions
            const double full = ref.sq_l2(a.data(), b.data(), n, inf);
            for (double cutoff : {full * 0.25, full * 0.5, full, full * 2.0}) {
                const double r1 = ref.sq_l2(a.data(), b.data(), n, cutoff);
                const double r2 = simd->sq_l2(a.data(), b.data(), n, cutoff);
                CHECK((std::isinf(r1) == std::isinf(r2)));
                if (!std::isinf(r1)) CHECK(r1 == r2);
            }
            auto y1 = random_vec(rng, n);
            auto y2 = y1;
            const double alpha = rng.uniform(-3, 3);
            ref.axpy(alpha, a.data(), y1.data(), n);
            simd->axpy(alpha, a.data(), y2.data(), n);
            CHECK(y1 == y2);
        }
    }
}

TEST_CASE("dot and sq_l2 match a plain long-double reference within tolerance") {
    Rng rng(99);
    for (int rep = 0; rep < 50; ++rep) {
        const std::size_t n = 1 + std::size_t(rng.next_below(300));
        const auto a = random_vec(rng, n);
        const auto b = random_vec(rng, n);
        long double dref = 0, lref = 0;
        for (std::size_t i = 0; i < n; ++i) {
            dref += (long double)a[i] * b[i];
            const long double d = (long double)a[i] - b[i];
            lref += d * d;
        }
        CHECK(kernels::dot(a, b) == doctest::Approx(double(dref)).epsilon(1e-12));
        CHECK(kernels::sq_l2(a, b) == doctest::Approx(double(lref)).epsilon(1e-12));
    }
}

TEST_CASE("bounded sq_l2 is exact when under the cutoff") {
    Rng rng(7);
    for (int rep = 0; rep < 100; ++rep) {
        const std::size_t n = 1 + std::size_t(rng.next_below(200));
        const auto a = random_vec(rng, n);
        const auto b = random_vec(rng, n);
        const double full = kernels::sq_l2(a, b);
        CHECK(kernels::sq_l2_bounded(a, b, full * 1.0001) == full);
        const double bounded = kernels::sq_l2_bounded(a, b, full * 0.1);
        // either abandoned or completed with the exact value
        CHECK((std::isinf(bounded) || bounded == full));
    }
}

TEST_CASE("argmin_sq_l2 matches exhaustive search with lowest-index ties") {
    Rng rng(123);
    for (int rep = 0; rep < 50; ++rep) {
        const std::size_t dim = 1 + std::size_t(rng.next_below(80));
        const std::size_t count = 1 + std::size_t(rng.next_below(40));
        const auto q = random_vec(rng, dim);
        auto entries = random_vec(rng, dim * count);
        // plant an exact duplicate of a random entry to force a tie
        if (count >= 2) {
            const std::size_t src = std::size_t(rng.next_below(count - 1)) + 1;
            std::copy_n(entries.begin() + std::ptrdiff_t(src * dim), dim, entries.begin());
        }
        const auto got = kernels::argmin_sq_l2(q, entries, count);
        std::size_t best = 0;
        double best_d = kernels::sq_l2(q, {entries.data(), dim});
        for (std::size_t k = 1; k < count; ++k) {
            const double d = kernels::sq_l2(q, {entries.data() + k * dim, dim});
            if (d < best_d) {
                best_d = d;
                best = k;
            }
        }
        CHECK(got.index == best);
        CHECK(got.distance == best_d);
    }
}

TEST_CASE("stable_sum and spectral_norm basics") {
    // Kahan sum survives cancellation the naive loop gets wrong
    std::vector<double> xs;
    for (int i = 0; i < 10000; ++i) {
        xs.push_back(1e16);
        xs.push_back(1.0);
        xs.push_back(-1e16);
    }
    CHECK(stable_sum(xs) == doctest::Approx(10000.0));

    // diag(3, 2) has spectral norm 3
    const std::vector<double> diag{3, 0, 0, 2};
    CHECK(spectral_norm(diag, 2, 2) == doctest::Approx(3.0).epsilon(1e-12));

    // rank-1 outer product u v^T has norm |u||v|
    Rng rng(5);
    const auto u = random_vec(rng, 9, -1, 1);
    const auto v = random_vec(rng, 4, -1, 1);
    std::vector<double> m(9 * 4);
    double nu = 0, nv = 0;
    for (double x : u) nu += x * x;
    for (double x : v) nv += x * x;
    for (int i = 0; i < 9; ++i)
        for (int j = 0; j < 4; ++j) m[std::size_t(i) * 4 + j] = u[std::size_t(i)] * v[std::size_t(j)];
    CHECK(spectral_norm(m, 9, 4) ==
          doctest::Approx(std::sqrt(nu) * std::sqrt(nv)).epsilon(1e-10));

    // certifies |A d| <= sigma_max |d| on random matrices and directions
    for (int rep = 0; rep < 20; ++rep) {
        const std::size_t rows = 2 + std::size_t(rng.next_below(40));
        const std::size_t cols = 2 + std::size_t(rng.next_below(16));
        const auto a = random_vec(rng, rows * cols, -2, 2);
        const double sigma = spectral_norm(a, rows, cols);
        for (int t = 0; t < 10; ++t) {
            const auto d = random_vec(rng, cols, -1, 1);
            double dn = 0;
            for (double x : d) dn += x * x;
            double yn = 0;
            for (std::size_t i = 0; i < rows; ++i) {
                double s = 0;
                for (std::size_t j = 0; j < cols; ++j) s += a[i * cols + j] * d[j];
                yn += s * s;
            }
            CHECK(std::sqrt(yn) <= sigma * std::sqrt(dn) * (1.0 + 1e-9));
        }
    }
}

TEST_CASE("sha256 known vectors") {
    auto digest_of = [](const std::string& s) {
        return hex_digest(sha256({reinterpret_cast<const std::uint8_t*>(s.data()), s.size()}));
    };
    CHECK(digest_of("") ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(digest_of("abc") ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(digest_of("abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq") ==
          "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1");
    // exercise both tail-block layouts
    CHECK(digest_of(std::string(55, 'a')).size() == 64);
    CHECK(digest_of(std::string(56, 'a')) != digest_of(std::string(57, 'a')));
}

TEST_CASE("rng determinism and uniformity") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

    Rng r(1);
    int counts[6] = {};
    const int draws = 60000;
    for (int i = 0; i < draws; ++i) ++counts[r.next_below(6)];
    for (int k = 0; k < 6; ++k) {
        // 5 sigma band around draws/6
        const double expect = draws / 6.0;
        const double sigma = std::sqrt(expect * (1 - 1.0 / 6));
        CHECK(std::abs(counts[k] - expect) < 5 * sigma);
    }

    // shuffle determinism
    std::vector<int> v1{1, 2, 3, 4, 5, 6, 7, 8}, v2 = v1;
    Rng s1(9), s2(9);
    s1.shuffle(v1);
    s2.shuffle(v2);
    CHECK(v1 == v2);
}
