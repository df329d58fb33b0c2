#include <doctest.h>

#include <cmath>
#include <random>

#include "divinv/fields.hpp"

using namespace divinv;

namespace {

std::shared_ptr<CellMask> unit_box_mask(int n) {
    Grid g({0, 0, 0}, n, n, n, 1.0 / n, 1.0 / n, 1.0 / n);
    return std::make_shared<CellMask>(full_fluid_mask(g));
}

double portable_uniform(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

} // namespace

TEST_CASE("divergence of a constant field vanishes") {
    auto mask = unit_box_mask(8);
    VectorField u(mask);
    for (int a = 0; a < 3; ++a)
        for (auto& v : u.comp[a]) v = 1.75;
    ScalarField d = discrete_divergence(u);
    for (double v : d.values) CHECK(v == 0.0);
}

TEST_CASE("divergence of the identity field is exactly 3") {
    auto mask = unit_box_mask(8);
    const Grid& g = mask->grid;
    VectorField u(mask);
    for (int a = 0; a < 3; ++a) {
        int fi = g.face_count(a, 0), fj = g.face_count(a, 1), fk = g.face_count(a, 2);
        for (int k = 0; k < fk; ++k)
            for (int j = 0; j < fj; ++j)
                for (int i = 0; i < fi; ++i)
                    u.at(a, i, j, k) = g.face_center(a, i, j, k)[a];
    }
    ScalarField d = discrete_divergence(u);
    for (double v : d.values) CHECK(v == doctest::Approx(3.0).epsilon(1e-13));
}

TEST_CASE("gradient exact on affine scalars, zero on constants") {
    auto mask = unit_box_mask(8);
    const Grid& g = mask->grid;
    ScalarField p(mask);
    SUBCASE("constant") {
        for (auto& v : p.values) v = 4.0;
        VectorField grad = discrete_gradient(p);
        for (int a = 0; a < 3; ++a)
            for (double v : grad.comp[a]) CHECK(v == 0.0);
    }
    SUBCASE("affine") {
        Vec3 coeff{2.0, -1.0, 0.5};
        for (int k = 0; k < g.nz; ++k)
            for (int j = 0; j < g.ny; ++j)
                for (int i = 0; i < g.nx; ++i)
                    p.at(i, j, k) = coeff.dot(g.cell_center(i, j, k));
        VectorField grad = discrete_gradient(p);
        for (int a = 0; a < 3; ++a) {
            int fi = g.face_count(a, 0), fj = g.face_count(a, 1), fk = g.face_count(a, 2);
            for (int k = 0; k < fk; ++k)
                for (int j = 0; j < fj; ++j)
                    for (int i = 0; i < fi; ++i) {
                        if (!mask->face_fluid(a, i, j, k)) continue;
                        CHECK(grad.at(a, i, j, k) == doctest::Approx(coeff[a]).epsilon(1e-12));
                    }
        }
    }
}

TEST_CASE("staggered adjointness: <div u, p> = -<u, grad p>") {
    // random masked fields, 100 trials
    auto mask = unit_box_mask(6);
    const Grid& g = mask->grid;
    // carve a hole block so the mask is nontrivial
    auto m2 = std::make_shared<CellMask>(*mask);
    for (int k = 2; k < 4; ++k)
        for (int j = 2; j < 4; ++j)
            for (int i = 2; i < 4; ++i) m2->tag[g.cell_index(i, j, k)] = 2;

    std::mt19937_64 rng(123);
    for (int trial = 0; trial < 100; ++trial) {
        VectorField u(m2);
        ScalarField p(m2);
        for (int a = 0; a < 3; ++a) {
            int fi = g.face_count(a, 0), fj = g.face_count(a, 1), fk = g.face_count(a, 2);
            for (int k = 0; k < fk; ++k)
                for (int j = 0; j < fj; ++j)
                    for (int i = 0; i < fi; ++i)
                        if (m2->face_fluid(a, i, j, k))
                            u.at(a, i, j, k) = portable_uniform(rng) - 0.5;
        }
        for (std::size_t c = 0; c < p.values.size(); ++c)
            if (m2->is_fluid(c)) p.values[c] = portable_uniform(rng) - 0.5;

        ScalarField du = discrete_divergence(u);
        VectorField gp = discrete_gradient(p);
        double lhs = 0, rhs = 0, scale = 0;
        for (std::size_t c = 0; c < p.values.size(); ++c)
            if (m2->is_fluid(c)) lhs += du.values[c] * p.values[c];
        for (int a = 0; a < 3; ++a)
            for (std::size_t f = 0; f < u.comp[a].size(); ++f) {
                rhs += u.comp[a][f] * gp.comp[a][f];
                scale += std::abs(u.comp[a][f] * gp.comp[a][f]);
            }
        CHECK(std::abs(lhs + rhs) <= 1e-12 * (scale + 1.0));
    }
}

TEST_CASE("lq_norm basics") {
    auto mask = unit_box_mask(8);
    ScalarField f(mask);
    for (auto& v : f.values) v = 1.0;
    CHECK(lq_norm(f, 2.0) == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(lq_norm(f, 3.7) == doctest::Approx(1.0).epsilon(1e-13));
    for (auto& v : f.values) v = 2.0;
    CHECK(lq_norm(f, 2.0) == doctest::Approx(2.0).epsilon(1e-13));
    // indicator of half the box: exact integral 1/2
    for (std::size_t c = 0; c < f.values.size(); ++c) f.values[c] = 0.0;
    const Grid& g = mask->grid;
    for (int k = 0; k < g.nz; ++k)
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx / 2; ++i) f.at(i, j, k) = 1.0;
    CHECK(lq_norm(f, 2.0) == doctest::Approx(std::pow(2.0, -0.5)).epsilon(1.0 / 8));
    try {
        lq_norm(f, 1.0);
        FAIL("expected BadExponent");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::BadExponent);
    }
}

TEST_CASE("w1q seminorm on the identity field") {
    auto mask = unit_box_mask(8);
    const Grid& g = mask->grid;
    VectorField u(mask);
    for (int a = 0; a < 3; ++a) {
        int fi = g.face_count(a, 0), fj = g.face_count(a, 1), fk = g.face_count(a, 2);
        for (int k = 0; k < fk; ++k)
            for (int j = 0; j < fj; ++j)
                for (int i = 0; i < fi; ++i)
                    u.at(a, i, j, k) = g.face_center(a, i, j, k)[a];
    }
    for (double q : {2.0, 2.5, 3.0}) {
        // d_i u_i = 1 at every cell, |Omega| = 1
        CHECK(w1q_seminorm(u, q) == doctest::Approx(std::pow(3.0, 1.0 / q)).epsilon(1e-12));
    }
    CHECK(w1q_seminorm(VectorField(mask), 2.0) == 0.0);
}

TEST_CASE("w1q seminorm homogeneity") {
    auto mask = unit_box_mask(6);
    const Grid& g = mask->grid;
    std::mt19937_64 rng(9);
    VectorField u(mask);
    for (int a = 0; a < 3; ++a)
        for (auto& v : u.comp[a]) v = portable_uniform(rng) - 0.5;
    double base = w1q_seminorm(u, 2.5);
    VectorField su(mask);
    for (int a = 0; a < 3; ++a)
        for (std::size_t f = 0; f < su.comp[a].size(); ++f) su.comp[a][f] = -3.5 * u.comp[a][f];
    CHECK(w1q_seminorm(su, 2.5) == doctest::Approx(3.5 * base).epsilon(1e-12));
    (void)g;
}

TEST_CASE("lq_norm triangle inequality on random fields") {
    auto mask = unit_box_mask(6);
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 20; ++trial) {
        ScalarField f(mask), g2(mask), s(mask);
        for (std::size_t c = 0; c < f.values.size(); ++c) {
            f.values[c] = portable_uniform(rng) - 0.5;
            g2.values[c] = portable_uniform(rng) - 0.5;
            s.values[c] = f.values[c] + g2.values[c];
        }
        double q = 1.5 + 2.0 * portable_uniform(rng);
        CHECK(lq_norm(s, q) <= lq_norm(f, q) + lq_norm(g2, q) + 1e-12);
    }
}

TEST_CASE("zero mean projection") {
    auto mask = unit_box_mask(8);
    ScalarField f(mask);
    for (auto& v : f.values) v = 5.0;
    zero_mean_project(f);
    for (double v : f.values) CHECK(v == 0.0);

    // x1 on a symmetric box centered at the origin is already mean-free
    Grid g({-0.5, -0.5, -0.5}, 8, 8, 8, 0.125, 0.125, 0.125);
    auto m2 = std::make_shared<CellMask>(full_fluid_mask(g));
    ScalarField h(m2);
    for (int k = 0; k < 8; ++k)
        for (int j = 0; j < 8; ++j)
            for (int i = 0; i < 8; ++i) h.at(i, j, k) = g.cell_center(i, j, k).x;
    std::vector<double> before = h.values;
    zero_mean_project(h);
    double scale = lq_norm(h, 2.0);
    for (std::size_t c = 0; c < h.values.size(); ++c)
        CHECK(std::abs(h.values[c] - before[c]) <= 1e-13 * (scale + 1.0));

    ScalarField e(m2);
    std::vector<char> empty(e.values.size(), 0);
    try {
        zero_mean_project(e, empty);
        FAIL("expected EmptyRegion");
    } catch (const Error& err) {
        CHECK(err.kind() == ErrorKind::EmptyRegion);
    }
}

TEST_CASE("extend_by_zero preserves the integral and fluid values") {
    Grid g({0, 0, 0}, 8, 8, 8, 0.125, 0.125, 0.125);
    auto mask = std::make_shared<CellMask>(full_fluid_mask(g));
    for (int k = 3; k < 5; ++k)
        for (int j = 3; j < 5; ++j)
            for (int i = 3; i < 5; ++i) mask->tag[g.cell_index(i, j, k)] = 2;

    ScalarField f(mask);
    std::mt19937_64 rng(5);
    for (std::size_t c = 0; c < f.values.size(); ++c)
        if (mask->is_fluid(c)) f.values[c] = portable_uniform(rng) - 0.5;
    zero_mean_project(f);

    double sum_before = 0;
    for (std::size_t c = 0; c < f.values.size(); ++c)
        if (mask->is_fluid(c)) sum_before += f.values[c];

    ScalarField ext = extend_by_zero(f);
    double sum_after = 0;
    for (double v : ext.values) sum_after += v;
    CHECK(sum_after == doctest::Approx(sum_before).epsilon(1e-12));

    for (std::size_t c = 0; c < f.values.size(); ++c) {
        if (mask->is_fluid(c))
            CHECK(ext.values[c] == f.values[c]); // bitwise on fluid cells
        else
            CHECK(ext.values[c] == 0.0);
    }
    CHECK(ext.mask->count_fluid() == g.cells());
}
