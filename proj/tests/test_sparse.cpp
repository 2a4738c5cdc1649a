#include <catch2/catch_amalgamated.hpp>
#include <random>

#include "chtfvm/sparse.hpp"

using namespace cht;

namespace {

// independent dense Gaussian elimination with partial pivoting
std::vector<double> dense_lu_oracle(std::vector<std::vector<double>> A, std::vector<double> b) {
    const int n = static_cast<int>(b.size());
    for (int k = 0; k < n; ++k) {
        int piv = k;
        for (int r = k + 1; r < n; ++r)
            if (std::abs(A[r][k]) > std::abs(A[piv][k])) piv = r;
        std::swap(A[k], A[piv]);
        std::swap(b[k], b[piv]);
        for (int r = k + 1; r < n; ++r) {
            const double m = A[r][k] / A[k][k];
            for (int c = k; c < n; ++c) A[r][c] -= m * A[k][c];
            b[r] -= m * b[k];
        }
    }
    std::vector<double> x(n);
    for (int r = n - 1; r >= 0; --r) {
        double s = b[r];
        for (int c = r + 1; c < n; ++c) s -= A[r][c] * x[c];
        x[r] = s / A[r][r];
    }
    return x;
}

}  // namespace

TEST_CASE("identity and diagonal systems") {
    LinearSystem id(3);
    for (int i = 0; i < 3; ++i) id.add(i, i, 1.0);
    id.set_rhs(Field{1.5, -2.0, 7.0});
    auto x = id.solve();
    CHECK(x[0] == 1.5);
    CHECK(x[1] == -2.0);
    CHECK(x[2] == 7.0);

    LinearSystem d(2);
    d.add(0, 0, 2.0);
    d.add(1, 1, 2.0);
    d.set_rhs(Field{4.0, 6.0});
    auto y = d.solve();
    CHECK(y[0] == Catch::Approx(2.0));
    CHECK(y[1] == Catch::Approx(3.0));
}

TEST_CASE("1D Poisson stencil against the dense elimination oracle") {
    const int n = 5;
    LinearSystem sys(n);
    std::vector<std::vector<double>> dense(n, std::vector<double>(n, 0.0));
    for (int i = 0; i < n; ++i) {
        sys.add(i, i, 2.0);
        dense[i][i] = 2.0;
        if (i > 0) {
            sys.add(i, i - 1, -1.0);
            dense[i][i - 1] = -1.0;
        }
        if (i + 1 < n) {
            sys.add(i, i + 1, -1.0);
            dense[i][i + 1] = -1.0;
        }
    }
    std::vector<double> ones(n, 1.0);
    sys.set_rhs(Field(ones));
    auto x = sys.solve();
    auto ref = dense_lu_oracle(dense, ones);
    for (int i = 0; i < n; ++i) CHECK(x[i] == Catch::Approx(ref[i]).epsilon(1e-13));
}

TEST_CASE("duplicate entries are merged additively; immutable after finalize") {
    LinearSystem sys(2);
    sys.add(0, 0, 1.0);
    sys.add(0, 0, 1.0);  // accumulates to 2
    sys.add(1, 1, 4.0);
    sys.finalize();
    CHECK_THROWS_AS(sys.add(0, 1, 1.0), std::logic_error);
    sys.set_rhs(Field{2.0, 4.0});
    auto x = sys.solve();
    CHECK(x[0] == Catch::Approx(1.0));
    CHECK(x[1] == Catch::Approx(1.0));
}

TEST_CASE("cached factorization gives identical results") {
    const int n = 50;
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> uni(0.1, 1.0);
    LinearSystem a(n), b(n);
    for (int i = 0; i < n; ++i) {
        const double d = 4.0 + uni(rng);
        a.add(i, i, d);
        b.add(i, i, d);
        if (i > 0) {
            const double o = -uni(rng);
            a.add(i, i - 1, o);
            b.add(i, i - 1, o);
            a.add(i - 1, i, o);
            b.add(i - 1, i, o);
        }
    }
    Field rhs(n);
    for (auto& v : rhs) v = uni(rng);
    a.set_rhs(rhs);
    b.set_rhs(rhs);
    auto x1 = a.solve(false);
    auto x2 = a.solve(true);  // cached
    auto x3 = b.solve(false); // fresh factorization
    for (int i = 0; i < n; ++i) {
        CHECK(x1[i] == x2[i]);
        CHECK(std::abs(x1[i] - x3[i]) <= 1e-12 * std::max(1.0, std::abs(x1[i])));
    }
}

TEST_CASE("singular matrix is reported with a pivot diagnostic") {
    LinearSystem sys(2);
    sys.add(0, 0, 1.0);
    sys.add(0, 1, 1.0);
    sys.add(1, 0, 1.0);
    sys.add(1, 1, 1.0);  // rank 1
    sys.set_rhs(Field{1.0, 2.0});
    CHECK_THROWS_WITH(sys.solve(), Catch::Matchers::ContainsSubstring("pivot") ||
                                       Catch::Matchers::ContainsSubstring("singular"));
}

TEST_CASE("dimension mismatch is rejected") {
    LinearSystem sys(3);
    CHECK_THROWS(sys.set_rhs(Field{1.0, 2.0}));
}

TEST_CASE("pinned pure-Neumann operator is solvable") {
    // 1D zero-Neumann Laplacian with one gauge row
    const int n = 8;
    LinearSystem sys(n);
    sys.add(0, 0, 1.0);  // gauge
    for (int i = 1; i < n; ++i) {
        double diag = 0;
        if (i > 0) {
            sys.add(i, i - 1, -1.0);
            diag += 1;
        }
        if (i + 1 < n) {
            sys.add(i, i + 1, -1.0);
            diag += 1;
        }
        sys.add(i, i, diag);
    }
    Field rhs(n, 0.0);
    rhs[3] = 1.0;
    rhs[5] = -1.0;
    sys.set_rhs(rhs);
    CHECK_NOTHROW(sys.solve());
}
