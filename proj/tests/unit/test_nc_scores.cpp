#include "ncood/error.hpp"
#include "ncood/nc_scores.hpp"
#include "ncood/rng.hpp"

#include <doctest.h>

#include <cmath>

using namespace ncood;

namespace {

// Stats with mu_G = 0 and the given lambda_c; only mu_G and lambda_c are read by the scores.
TrainStats centered_stats(int d, Vector lambda) {
    TrainStats s;
    s.mu_G = Vector::Zero(d);
    s.lambda_c = std::move(lambda);
    s.class_means = Matrix::Zero(s.lambda_c.size(), d);
    s.class_counts.assign(static_cast<std::size_t>(s.lambda_c.size()), 1);
    s.sigma_W = Matrix::Zero(d, d);
    s.mean_feature = Vector::Zero(d);
    return s;
}

Matrix row(std::initializer_list<double> v) {
    Matrix m(1, static_cast<Eigen::Index>(v.size()));
    Eigen::Index j = 0;
    for (double x : v) m(0, j++) = x;
    return m;
}

ClassifierHead two_class_head(Matrix w) { return ClassifierHead(std::move(w), Vector::Zero(2)); }

Matrix random_matrix(Rng& rng, int n, int d, double scale = 1.0) {
    Matrix m(n, d);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
    return m;
}

}  // namespace

TEST_CASE("pScore hand examples") {
    Matrix w(2, 2);
    w << 2, 0, 0, 1;
    const auto head = two_class_head(w);
    const auto stats = centered_stats(2, Vector::Ones(2));

    CHECK(p_score(row({3, 4}), stats, head)[0] == doctest::Approx(1.2));
    CHECK(p_score(row({5, 0}), stats, head)[0] == doctest::Approx(2.0));   // parallel: ||w_c||
    CHECK(p_score(row({0, 7}), stats, head)[0] == doctest::Approx(1.0));   // class 1, parallel to (0,1)

    Matrix w2(2, 2);
    w2 << 1, 1, -1, -1;
    const auto head2 = two_class_head(w2);
    CHECK(p_score(row({1, -1}), stats, head2)[0] == doctest::Approx(0.0));  // orthogonal to w_c
}

TEST_CASE("degenerate centered feature scores 0") {
    Matrix w(2, 2);
    w << 2, 0, 0, 1;
    auto stats = centered_stats(2, Vector::Ones(2));
    stats.mu_G << 3, 4;
    CHECK(p_score(row({3, 4}), stats, two_class_head(w))[0] == 0.0);
    CHECK(cos_score(row({3, 4}), stats, two_class_head(w))[0] == 0.0);
}

TEST_CASE("NCScore hand examples") {
    Matrix w(2, 2);
    w << 2, 0, 0, 1;
    const auto head = two_class_head(w);
    const auto stats = centered_stats(2, Vector::Ones(2));
    const Matrix h = row({3, 4});
    CHECK(nc_score(h, stats, head, {0.0})[0] == doctest::Approx(1.2));
    CHECK(nc_score(h, stats, head, {0.01, FilterNorm::L1})[0] == doctest::Approx(1.27));
    CHECK(nc_score(h, stats, head, {0.01, FilterNorm::Linf})[0] == doctest::Approx(1.24));
    CHECK(nc_score(h, stats, head, {0.01, FilterNorm::L2})[0] == doctest::Approx(1.25));
}

TEST_CASE("NCScore norm uses the raw feature, not the centered one") {
    Matrix w(2, 2);
    w << 2, 0, 0, 1;
    auto stats = centered_stats(2, Vector::Ones(2));
    stats.mu_G << 1, 1;
    const Matrix h = row({3, 4});
    const double p = p_score(h, stats, two_class_head(w))[0];
    CHECK(nc_score(h, stats, two_class_head(w), {1.0})[0] == doctest::Approx(p + 7.0));
}

TEST_CASE("config validation") {
    CHECK_THROWS_AS(NcScoreConfig{-1.0}.validate(), ContractError);
    CHECK_THROWS_AS((NcScoreConfig{0.1, FilterNorm::L1, 0.0}.validate()), ContractError);
    CHECK(parse_filter_norm("Linf") == FilterNorm::Linf);
    CHECK_THROWS_AS(parse_filter_norm("L3"), ContractError);
}

TEST_CASE("cosScore hand examples") {
    Matrix w(2, 2);
    w << 2, 0, 0, 1;
    const auto head = two_class_head(w);
    const auto stats = centered_stats(2, Vector::Ones(2));
    CHECK(cos_score(row({3, 4}), stats, head)[0] == doctest::Approx(0.6));
    CHECK(cos_score(row({9, 0}), stats, head)[0] == doctest::Approx(1.0));
    // Antiparallel to the predicted class's weight: class 0 wins because both logits are negative.
    Matrix w3(2, 2);
    w3 << 1, 0, 3, 0;
    CHECK(cos_score(row({-2, 0}), stats, two_class_head(w3))[0] == doctest::Approx(-1.0));
}

TEST_CASE("distScore hand examples") {
    FeatureSet train;
    train.features.resize(2, 2);
    train.features << 2, 0, -2, 0;
    train.labels = Labels{0, 1};
    Matrix w(2, 2);
    w << 1, 0, -1, 0.1;
    const ClassifierHead head(w, Vector::Zero(2));
    const TrainStats stats = compute_train_stats(train, head);
    REQUIRE(stats.lambda_c[0] == doctest::Approx(2.0));
    CHECK(dist_score(row({3, 4}), stats, head)[0] == doctest::Approx(-std::sqrt(17.0)));
    CHECK(dist_score(row({2, 0}), stats, head)[0] == doctest::Approx(0.0));
}

TEST_CASE("distScore is unchanged when every weight row is rescaled") {
    Rng rng(3);
    FeatureSet train;
    train.features = random_matrix(rng, 60, 4);
    Labels y(60);
    for (int i = 0; i < 60; ++i) y[static_cast<std::size_t>(i)] = i % 3;
    train.labels = y;
    const Matrix w = random_matrix(rng, 3, 4);
    const ClassifierHead head(w, Vector::Zero(3));
    const ClassifierHead scaled(3.5 * w, Vector::Zero(3));
    const Matrix test = random_matrix(rng, 40, 4);
    const Vector a = dist_score(test, compute_train_stats(train, head), head);
    const Vector b = dist_score(test, compute_train_stats(train, scaled), scaled);
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("property: pScore == cosScore * ||w_c|| elementwise") {
    Rng rng(11);
    const ClassifierHead head(random_matrix(rng, 7, 9, 3.0), random_matrix(rng, 7, 1).col(0));
    auto stats = centered_stats(9, Vector::Ones(7));
    stats.mu_G = random_matrix(rng, 9, 1).col(0);
    const Matrix x = random_matrix(rng, 500, 9, 2.0);
    const Vector p = p_score(x, stats, head);
    const Vector c = cos_score(x, stats, head);
    const Labels pred = predict_classes(head, x);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        CHECK(std::abs(p[i] - c[i] * head.weights().row(pred[static_cast<std::size_t>(i)]).norm()) < 1e-9);
        CHECK(c[i] <= 1.0 + 1e-15);
        CHECK(c[i] >= -1.0 - 1e-15);
    }
}

TEST_CASE("property: pScore is invariant to positive rescaling of the centered feature") {
    Rng rng(12);
    // Zero bias and mu_G = 0 keep the predicted class fixed under g -> t g.
    const ClassifierHead head(random_matrix(rng, 5, 6), Vector::Zero(5));
    const auto stats = centered_stats(6, Vector::Ones(5));
    const Matrix g = random_matrix(rng, 100, 6);
    const Vector base = p_score(g, stats, head);
    for (double t : {1e-3, 0.5, 7.0, 1e4}) {
        CHECK((p_score(t * g, stats, head) - base).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("property: NCScore(alpha = 0) == pScore and NCScore is nondecreasing in alpha") {
    Rng rng(13);
    const ClassifierHead head(random_matrix(rng, 4, 5), Vector::Zero(4));
    auto stats = centered_stats(5, Vector::Ones(4));
    stats.mu_G = random_matrix(rng, 5, 1).col(0);
    const Matrix x = random_matrix(rng, 200, 5);
    CHECK(nc_score(x, stats, head, {0.0}) == p_score(x, stats, head));
    for (auto norm : {FilterNorm::L1, FilterNorm::L2, FilterNorm::Linf}) {
        Vector prev = nc_score(x, stats, head, {0.0, norm});
        for (double alpha : {0.001, 0.01, 0.1, 1.0, 10.0}) {
            const Vector cur = nc_score(x, stats, head, {alpha, norm});
            CHECK((cur - prev).minCoeff() >= 0.0);
            prev = cur;
        }
    }
}

TEST_CASE("property: distScore <= 0 with equality exactly at lambda_c w_c") {
    Rng rng(14);
    const Matrix w = random_matrix(rng, 3, 4);
    const ClassifierHead head(w, Vector::Zero(3));
    Vector lambda(3);
    lambda << 0.5, 2.0, 3.0;
    const auto stats = centered_stats(4, lambda);
    const Matrix x = random_matrix(rng, 300, 4, 3.0);
    CHECK(dist_score(x, stats, head).maxCoeff() <= 0.0);

    // lambda_c w_c is predicted as class c only when that logit wins; test the ones that do.
    for (Eigen::Index c = 0; c < 3; ++c) {
        const Matrix at = lambda[c] * w.row(c);
        if (predict_classes(head, at)[0] == c) CHECK(dist_score(at, stats, head)[0] == 0.0);
    }
}

TEST_CASE("property: thresholding pScore selects a hypercone around w_c") {
    Rng rng(15);
    Matrix w(3, 3);
    w << 2, 0, 0, 0, 1.5, 0, 0, 0, 1;
    const ClassifierHead head(w, Vector::Zero(3));
    const auto stats = centered_stats(3, Vector::Ones(3));
    const double tau = 1.2;
    int inside = 0;
    int outside = 0;
    for (int i = 0; i < 2000; ++i) {
        const Matrix g = random_matrix(rng, 1, 3, 1.0 + 5.0 * rng.uniform());
        const auto c = predict_classes(head, g)[0];
        const double cos = g.row(0).dot(w.row(c)) / (g.norm() * w.row(c).norm());
        const bool in_cone = cos >= tau / w.row(c).norm();
        const bool selected = p_score(g, stats, head)[0] >= tau;
        CHECK(in_cone == selected);
        (in_cone ? inside : outside)++;
    }
    CHECK(inside > 0);
    CHECK(outside > 0);
}
