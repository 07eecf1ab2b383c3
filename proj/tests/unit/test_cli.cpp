#include "commands.hpp"

#include "ncood/detectors.hpp"
#include "ncood/tensor_store.hpp"

#include "temp_dir.hpp"

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

using namespace ncood;
using ncood::testing::TempDir;

namespace {

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome run_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "ncood");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out;
    std::ostringstream err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::vector<double> scores_at(const std::filesystem::path& p) {
    std::ifstream in(p);
    return read_scores_csv(in);
}

void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

// Two labelled training points with an identity head.
void write_tiny_train(const std::filesystem::path& dir, bool with_labels) {
    Matrix x(2, 2);
    x << 1, 0, 0, 1;
    TensorMap t;
    t.emplace("features", Tensor::from_matrix(x));
    if (with_labels) t.emplace("labels", Tensor::from_labels(Labels{0, 1}));
    t.emplace("weights", Tensor::from_matrix(Matrix::Identity(2, 2)));
    t.emplace("bias", Tensor::from_vector(Vector::Zero(2)));
    write_bundle(make_manifest("tiny", t), t, dir);
}

}  // namespace

TEST_CASE("usage errors exit 2") {
    CHECK(run_cli({}).code == cli::kExitUsage);
    CHECK(run_cli({"frobnicate"}).code == cli::kExitUsage);

    TempDir tmp("cli_usage");
    const auto bogus = run_cli({"synth", "--ood-mode", "bogus", "--out", (tmp / "w").string()});
    CHECK(bogus.code == cli::kExitUsage);
    CHECK(bogus.err.find("--ood-mode") != std::string::npos);
}

TEST_CASE("stats: missing labels exit 2 naming labels, reruns are byte-identical") {
    TempDir tmp("cli_stats");
    write_tiny_train(tmp / "nolabels", false);
    const auto missing = run_cli({"stats", "--train", (tmp / "nolabels").string(), "--out", (tmp / "s").string()});
    CHECK(missing.code == cli::kExitUsage);
    CHECK(missing.err.find("labels") != std::string::npos);

    write_tiny_train(tmp / "train", true);
    REQUIRE(run_cli({"stats", "--train", (tmp / "train").string(), "--out", (tmp / "s1").string()}).code == 0);
    REQUIRE(run_cli({"stats", "--train", (tmp / "train").string(), "--out", (tmp / "s2").string()}).code == 0);
    for (const auto& entry : std::filesystem::directory_iterator(tmp / "s1")) {
        const auto name = entry.path().filename();
        CHECK(slurp(entry.path()) == slurp(tmp / "s2" / name));
    }
    CHECK(read_bundle(tmp / "s1").has("sigma_W"));

    CHECK(run_cli({"stats", "--train", (tmp / "absent").string(), "--out", (tmp / "s3").string()}).code ==
          cli::kExitIo);
}

TEST_CASE("score: energy of zero logits is log 2, unknown detectors exit 2") {
    TempDir tmp("cli_score");
    write_tiny_train(tmp / "train", true);
    TensorMap t;
    t.emplace("features", Tensor::from_matrix(Matrix::Zero(1, 2)));
    write_bundle(make_manifest("zero", t), t, tmp / "zero");

    const auto ok = run_cli({"score", "--detector", "energy", "--train", (tmp / "train").string(), "--features",
                             (tmp / "zero").string(), "--out", (tmp / "e.csv").string()});
    REQUIRE(ok.code == 0);
    CHECK(scores_at(tmp / "e.csv")[0] == doctest::Approx(std::log(2.0)));

    const auto odin = run_cli({"score", "--detector", "odin", "--train", (tmp / "train").string(), "--features",
                               (tmp / "zero").string(), "--out", (tmp / "o.csv").string()});
    CHECK(odin.code == cli::kExitUsage);
    CHECK(odin.err.find("knn") != std::string::npos);

    // ncood without --alpha is a usage error; with alpha 0 it reproduces pscore.
    CHECK(run_cli({"score", "--detector", "ncood", "--train", (tmp / "train").string(), "--features",
                   (tmp / "train").string(), "--out", (tmp / "n.csv").string()})
              .code == cli::kExitUsage);
    REQUIRE(run_cli({"score", "--detector", "ncood", "--alpha", "0", "--train", (tmp / "train").string(),
                     "--features", (tmp / "train").string(), "--out", (tmp / "n.csv").string()})
                .code == 0);
    REQUIRE(run_cli({"score", "--detector", "pscore", "--train", (tmp / "train").string(), "--features",
                     (tmp / "train").string(), "--out", (tmp / "p.csv").string()})
                .code == 0);
    CHECK(scores_at(tmp / "n.csv") == scores_at(tmp / "p.csv"));
}

TEST_CASE("eval: perfect separation, single-set average, malformed files") {
    TempDir tmp("cli_eval");
    write_text(tmp / "id.csv", "index,predicted_class,score\n0,0,5\n1,1,6\n");
    write_text(tmp / "far.csv", "index,predicted_class,score\n0,0,1\n1,0,2\n");
    write_text(tmp / "empty.csv", "index,predicted_class,score\n");
    write_text(tmp / "broken.csv", "index,predicted_class,score\n0,0,1\n1,zero\n");

    const auto ok = run_cli({"eval", "--id", (tmp / "id.csv").string(), "--ood", (tmp / "far.csv").string(), "--out",
                             (tmp / "r.csv").string()});
    REQUIRE(ok.code == 0);
    CHECK(slurp(tmp / "r.csv") ==
          "detector,ood_set,auroc,fpr95,n_id,n_ood\ndetector,far,1,0,2,2\ndetector,Average,1,0,2,2\n");

    CHECK(run_cli({"eval", "--id", (tmp / "id.csv").string(), "--ood", (tmp / "empty.csv").string()}).code ==
          cli::kExitUsage);
    const auto broken = run_cli({"eval", "--id", (tmp / "id.csv").string(), "--ood", (tmp / "broken.csv").string()});
    CHECK(broken.code == cli::kExitUsage);
    CHECK(broken.err.find("line 3") != std::string::npos);
}

TEST_CASE("synth, sweep-alpha and hist run end to end deterministically") {
    TempDir tmp("cli_synth");
    const std::vector<std::string> common = {"--classes", "4",       "--dim",   "8",     "--n-per-class",
                                             "30",        "--n-ood", "200",     "--ood-mode",
                                             "in_cone_near_origin", "--n-test-per-class", "30"};
    auto synth_into = [&](const std::string& name) {
        auto args = common;
        args.insert(args.begin(), "synth");
        args.push_back("--out");
        args.push_back((tmp / name).string());
        return run_cli(args).code;
    };
    REQUIRE(synth_into("a") == 0);
    REQUIRE(synth_into("b") == 0);
    for (const char* part : {"train", "id_test", "id_val", "ood", "noise_val"}) {
        for (const auto& entry : std::filesystem::directory_iterator(tmp / "a" / part)) {
            CHECK(slurp(entry.path()) == slurp(tmp / "b" / part / entry.path().filename()));
        }
    }

    const auto train = (tmp / "a" / "train").string();
    const auto sweep = run_cli({"sweep-alpha", "--train", train, "--id-val", (tmp / "a" / "id_val").string(),
                                "--noise-val", (tmp / "a" / "noise_val").string(), "--grid", "0"});
    REQUIRE(sweep.code == 0);
    CHECK(sweep.out.find("best alpha = 0 ") != std::string::npos);

    REQUIRE(run_cli({"score", "--detector", "msp", "--train", train, "--features", (tmp / "a" / "id_test").string(),
                     "--out", (tmp / "id.csv").string()})
                .code == 0);
    REQUIRE(run_cli({"score", "--detector", "msp", "--train", train, "--features", (tmp / "a" / "ood").string(),
                     "--out", (tmp / "ood.csv").string()})
                .code == 0);
    CHECK(scores_at(tmp / "id.csv").size() == 120);
    REQUIRE(run_cli({"hist", "--scores", "id=" + (tmp / "id.csv").string(), "--scores",
                     "ood=" + (tmp / "ood.csv").string(), "--bins", "10", "--out", (tmp / "h.csv").string()})
                .code == 0);
    CHECK(slurp(tmp / "h.csv").rfind("bin,lo,hi,id,ood\n", 0) == 0);
}

TEST_CASE("collapse writes one trace row per epoch") {
    TempDir tmp("cli_collapse");
    const auto r = run_cli({"collapse", "--epochs", "12", "--widths", "16,10,6", "--out", tmp.path().string()});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("final nc1=") != std::string::npos);
    std::ifstream in(tmp / "trace.csv");
    const TrainTrace trace = read_trace_csv(in);
    CHECK(trace.records.size() == 12);
    CHECK(read_bundle(tmp / "model").has("layer0.weight"));

    CHECK(run_cli({"collapse", "--activation", "swish", "--out", tmp.path().string()}).code == cli::kExitUsage);
}
