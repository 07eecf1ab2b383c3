#include "ncood/collapse_lab.hpp"
#include "ncood/error.hpp"
#include "ncood/synth_geometry.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace ncood;

namespace {

MlpConfig small_config() {
    MlpConfig cfg;
    cfg.layer_widths = {6, 12, 8};
    cfg.epochs = 40;
    cfg.lr_schedule = {{0, 0.2}};
    cfg.weight_decay = 1e-3;
    return cfg;
}

BlobsDataset small_blobs() { return make_blobs(3, 6, 10, 6.0, 1.0, 5); }

}  // namespace

TEST_CASE("blobs are deterministic and noiseless blobs sit on their centers") {
    const auto a = make_blobs(BlobsSpec{});
    const auto b = make_blobs(BlobsSpec{});
    CHECK(a.inputs == b.inputs);
    CHECK(a.labels == b.labels);
    CHECK(a.inputs.rows() == 200);

    const auto clean = make_blobs(4, 16, 5, 10.0, 0.0, 3);
    for (Eigen::Index i = 0; i < clean.inputs.rows(); ++i) {
        CHECK(clean.inputs.row(i) == clean.class_centers.row(clean.labels[static_cast<std::size_t>(i)]));
    }
    for (int p = 0; p < 4; ++p) {
        for (int q = p + 1; q < 4; ++q) CHECK((clean.class_centers.row(p) - clean.class_centers.row(q)).norm() >= 10.0);
    }
}

TEST_CASE("blobs report an impossible spread") {
    CHECK_THROWS_AS(make_blobs(20, 1, 2, 1e6, 1.0, 1), GenerationError);
    CHECK_THROWS_AS(make_blobs(1, 4, 2, 1.0, 1.0, 1), ContractError);
}

TEST_CASE("config validation and activation names") {
    MlpConfig cfg = small_config();
    cfg.layer_widths = {6};
    CHECK_THROWS_AS(cfg.validate(), ContractError);
    cfg = small_config();
    cfg.lr_schedule = {{3, 0.1}};
    CHECK_THROWS_AS(cfg.validate(), ContractError);
    cfg = small_config();
    cfg.lr_schedule = {{0, 0.1}, {10, 0.01}};
    CHECK(cfg.learning_rate(9) == 0.1);
    CHECK(cfg.learning_rate(10) == 0.01);
    CHECK(parse_activation("relu") == Activation::relu);
    CHECK_THROWS_AS(parse_activation("gelu"), ContractError);

    MlpConfig wrong = small_config();
    wrong.layer_widths = {5, 8};
    CHECK_THROWS_AS(train_mlp(wrong, small_blobs()), ContractError);
}

TEST_CASE("learning rate 0 leaves the weights unchanged") {
    MlpConfig cfg = small_config();
    cfg.epochs = 1;
    cfg.lr_schedule = {{0, 0.0}};
    const auto data = small_blobs();
    const Mlp fresh(cfg, 3);
    const auto trained = train_mlp(cfg, data);
    for (std::size_t l = 0; l < fresh.layers().size(); ++l) {
        CHECK(trained.model.layers()[l].weight == fresh.layers()[l].weight);
        CHECK(trained.model.layers()[l].bias == fresh.layers()[l].bias);
    }
}

TEST_CASE("training is bit-reproducible, including minibatches") {
    const auto data = small_blobs();
    for (int batch : {0, 7}) {
        MlpConfig cfg = small_config();
        cfg.batch_size = batch;
        std::ostringstream a;
        std::ostringstream b;
        write_trace_csv(a, train_mlp(cfg, data).trace);
        write_trace_csv(b, train_mlp(cfg, data).trace);
        CHECK(a.str() == b.str());
    }
}

TEST_CASE("full-batch loss decreases at a small step size") {
    MlpConfig cfg = small_config();
    cfg.epochs = 60;
    cfg.lr_schedule = {{0, 0.05}};
    const auto trace = train_mlp(cfg, small_blobs()).trace;
    REQUIRE(trace.records.size() == 60);
    for (std::size_t i = 1; i < trace.records.size(); ++i) {
        CHECK(trace.records[i].train_loss <= trace.records[i - 1].train_loss);
    }
    CHECK(trace.records.front().epoch == 0);
}

TEST_CASE("loss includes the weight penalty") {
    const MlpConfig cfg = small_config();
    const auto data = small_blobs();
    const Mlp model(cfg, 3);
    double sq = 0.0;
    for (const auto& l : model.layers()) sq += l.weight.squaredNorm();
    CHECK(mlp_loss(model, data.inputs, data.labels, 0.3) - mlp_loss(model, data.inputs, data.labels, 0.0) ==
          doctest::Approx(0.15 * sq));
}

TEST_CASE("nc metrics in the collapsed limit") {
    const auto frame = simplex_etf(4, 6);
    Matrix features(8, 6);
    Labels labels(8);
    for (int i = 0; i < 8; ++i) {
        features.row(i) = 3.0 * frame.vectors.row(i % 4);
        labels[static_cast<std::size_t>(i)] = i % 4;
    }
    const ClassifierHead head(frame.vectors, Vector::Zero(4));
    const NcReport r = nc_metrics(features, labels, head);
    CHECK(r.nc1 == doctest::Approx(0.0));
    CHECK(r.nc2_norm_spread < 1e-12);
    CHECK(r.nc2_angle_gap < 1e-12);
    CHECK(r.nc3_duality_gap < 1e-12);
    CHECK(r.nc4_agreement == 1.0);
    CHECK(r.theorem1_alignment == doctest::Approx(1.0));

    // Positive rescaling of each weight row keeps self-duality.
    Matrix scaled = frame.vectors;
    for (int c = 0; c < 4; ++c) scaled.row(c) *= 1.0 + c;
    CHECK(nc_metrics(features, labels, ClassifierHead(scaled, Vector::Zero(4))).nc3_duality_gap < 1e-12);

    Labels missing = labels;
    for (auto& y : missing) y = y == 3 ? 0 : y;
    CHECK_THROWS_AS(nc_metrics(features, missing, head), ContractError);
}

TEST_CASE("finite differences") {
    // A power-of-two step keeps every intermediate exact.
    CHECK(central_difference([](double w) { return w * w; }, 1.0, 0x1p-10) == 2.0);
    CHECK(central_difference([](double w) { return w * w; }, 1.0, 1e-3) == doctest::Approx(2.0));
    CHECK(relative_error(2.0, 2.0) == 0.0);
    CHECK(relative_error(0.0, 1e-9) == doctest::Approx(1e-3));
    CHECK(relative_error(1.0, 0.5) == doctest::Approx(0.5));

    const auto data = small_blobs();
    const Mlp model(small_config(), 3);
    CHECK(grad_check(model, data.inputs, data.labels, 1e-3, 0, 1e-5, 1) == 0.0);
    CHECK(grad_check(model, data.inputs, data.labels, 1e-3, 100000, 1e-5, 1) < 1e-5);
}

TEST_CASE("parameter indexing covers every weight and bias") {
    Mlp model(small_config(), 3);
    CHECK(model.parameter_count() == 6 * 12 + 12 + 12 * 8 + 8 + 8 * 3 + 3);
    model.parameter(0) = 42.0;
    CHECK(model.layers()[0].weight(0, 0) == 42.0);
    model.parameter(model.parameter_count() - 1) = -1.0;
    CHECK(model.layers().back().bias[2] == -1.0);
    CHECK_THROWS_AS(model.parameter(model.parameter_count()), ContractError);

    const TensorMap t = model.to_tensors();
    CHECK(t.count("weights") == 1);
    CHECK(t.count("layer0.weight") == 1);
    CHECK(model.classifier_head().num_classes() == 3);
}

TEST_CASE("trace CSV round trip") {
    const auto trace = train_mlp(small_config(), small_blobs()).trace;
    std::ostringstream out;
    write_trace_csv(out, trace);
    std::istringstream in(out.str());
    const TrainTrace back = read_trace_csv(in);
    REQUIRE(back.records.size() == trace.records.size());
    for (std::size_t i = 0; i < back.records.size(); ++i) {
        CHECK(back.records[i].epoch == trace.records[i].epoch);
        CHECK(back.records[i].train_loss == trace.records[i].train_loss);
        CHECK(back.records[i].nc.theorem1_alignment == trace.records[i].nc.theorem1_alignment);
    }
    std::istringstream bad("epoch,oops\n");
    CHECK_THROWS_AS(read_trace_csv(bad), FormatError);
}
