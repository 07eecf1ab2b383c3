#include "commands.hpp"

#include "ncood/error.hpp"
#include "ncood/format.hpp"
#include "ncood/tensor_store.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

namespace ncood::cli {

namespace {

std::ofstream open_output(const fs::path& path) {
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
        if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    return out;
}

std::vector<double> load_scores(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open score file " + path.string());
    return read_scores_csv(in, path.string());
}

// "name=path" or a bare path named by its stem.
std::pair<std::string, fs::path> named_path(const std::string& spec) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos) return {fs::path(spec).stem().string(), fs::path(spec)};
    if (eq == 0 || eq + 1 == spec.size()) throw ContractError("expected NAME=PATH, got \"" + spec + "\"");
    return {spec.substr(0, eq), fs::path(spec.substr(eq + 1))};
}

ClassifierHead load_head(const std::optional<fs::path>& head, const std::optional<fs::path>& fallback) {
    if (head) return head_from_bundle(read_bundle(*head));
    if (fallback) return head_from_bundle(read_bundle(*fallback));
    throw ContractError("no classifier head given (use --head)");
}

TrainStats load_stats(const std::optional<fs::path>& stats, const std::optional<fs::path>& train,
                      const ClassifierHead& head) {
    if (stats) return stats_from_bundle(read_bundle(*stats));
    if (train) return compute_train_stats(feature_set_from_bundle(read_bundle(*train)), head);
    throw ContractError("need training statistics: pass --stats or --train");
}

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

void write_feature_bundle(const FeatureSet& fs, const ClassifierHead* head, const fs::path& dir) {
    TensorMap t = feature_set_tensors(fs, DType::f64);
    if (head) t.merge(head_tensors(*head, DType::f64));
    write_bundle(make_manifest(fs.name, t), t, dir);
}

std::string format_nc_report(const NcReport& r) {
    std::ostringstream s;
    s.precision(6);
    s << "nc1=" << r.nc1 << " nc2_norm_spread=" << r.nc2_norm_spread << " nc2_angle_gap=" << r.nc2_angle_gap
      << " nc3_duality_gap=" << r.nc3_duality_gap << " nc4_agreement=" << r.nc4_agreement
      << " theorem1_alignment=" << r.theorem1_alignment;
    return s.str();
}

}  // namespace

int report_exception(std::ostream& err) {
    try {
        throw;
    } catch (const IoError& e) {
        err << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const FormatError& e) {
        err << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const NumericalError& e) {
        err << "error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitIo;
    }
}

void cmd_stats(const StatsOptions& opt, std::ostream& out) {
    const Bundle train_bundle = read_bundle(opt.train);
    const ClassifierHead head = opt.head ? head_from_bundle(read_bundle(*opt.head)) : head_from_bundle(train_bundle);
    const FeatureSet train = feature_set_from_bundle(train_bundle);
    if (!train.labels) {
        throw ContractError("training bundle \"" + train.name + "\" has no \"labels\" tensor");
    }
    const TrainStats stats = compute_train_stats(train, head);
    const TensorMap tensors = stats_tensors(stats);
    BundleManifest m = make_manifest(train.name + "_stats", tensors);
    m.metadata["source"] = train.name;
    const auto path = write_bundle(m, tensors, opt.out);
    out << "wrote statistics for " << train.size() << " samples, " << stats.num_classes() << " classes, D = "
        << stats.dim() << " to " << path.string() << "\n";
}

void cmd_score(const ScoreOptions& opt, std::ostream& out) {
    require_detector(opt.detector);
    const ClassifierHead head = load_head(opt.head, opt.train);
    const TrainStats stats = load_stats(opt.stats, opt.train, head);
    std::optional<FeatureSet> train;
    if (opt.train) train = feature_set_from_bundle(read_bundle(*opt.train));
    const FeatureSet features = feature_set_from_bundle(read_bundle(opt.features));
    const ScoreResult r = run_detector(opt.detector, opt.params, head, stats, train ? &*train : nullptr,
                                       features.features);
    auto file = open_output(opt.out);
    write_scores_csv(file, r);
    if (!file) throw IoError("failed writing " + opt.out.string());
    out << "scored " << r.scores.size() << " samples of \"" << features.name << "\" with "
        << config_digest(opt.detector, opt.params) << " -> " << opt.out.string() << "\n";
}

void cmd_eval(const EvalOptions& opt, std::ostream& out) {
    if (opt.ood.empty()) throw ContractError("no OOD score files given");
    const auto id = load_scores(opt.id_scores);
    std::map<std::string, std::vector<double>> ood;
    for (const auto& spec : opt.ood) {
        auto [name, path] = named_path(spec);
        if (ood.count(name)) throw ContractError("duplicate OOD set name \"" + name + "\"");
        ood.emplace(name, load_scores(path));
    }
    const auto reports = evaluate(opt.detector, id, ood);
    out << format_report_table(reports);
    if (opt.out) {
        auto file = open_output(*opt.out);
        write_report_csv(file, reports);
        if (!file) throw IoError("failed writing " + opt.out->string());
    }
}

AlphaSweep cmd_sweep_alpha(const SweepOptions& opt, std::ostream& out) {
    const ClassifierHead head = load_head(opt.head, opt.train);
    const TrainStats stats = load_stats(opt.stats, opt.train, head);
    const FeatureSet id_val = feature_set_from_bundle(read_bundle(opt.id_val));
    const FeatureSet noise_val = feature_set_from_bundle(read_bundle(opt.noise_val));
    const AlphaSweep sweep = sweep_alpha(stats, head, id_val.features, noise_val.features, opt.grid, opt.filter_norm);

    std::ostringstream table;
    table << "alpha,auroc\n";
    for (const auto& row : sweep.rows) table << format_double(row.alpha) << ',' << format_double(row.auroc) << '\n';
    out << table.str();
    out << "best alpha = " << sweep.best_alpha << " (AUROC " << sweep.best_auroc << ", filter "
        << filter_norm_name(opt.filter_norm) << ")\n";
    if (opt.out) {
        auto file = open_output(*opt.out);
        file << table.str();
        if (!file) throw IoError("failed writing " + opt.out->string());
    }
    return sweep;
}

void cmd_synth(const SynthOptions& opt, std::ostream& out) {
    const SynthWorld world = make_synth_world(opt.spec, opt.n_test_per_class);
    write_feature_bundle(world.train.train, &world.train.head, opt.out / "train");
    write_feature_bundle(world.id_test, nullptr, opt.out / "id_test");
    write_feature_bundle(world.id_val, nullptr, opt.out / "id_val");
    write_feature_bundle(world.ood_test, nullptr, opt.out / "ood");
    write_feature_bundle(world.noise_val, nullptr, opt.out / "noise_val");
    out << "wrote synthetic world (C = " << opt.spec.classes << ", D = " << opt.spec.dim << ", OOD mode "
        << ood_mode_name(opt.spec.ood_mode) << ", seed " << opt.spec.seed << ") to " << opt.out.string() << "\n";
}

NcReport cmd_collapse(const CollapseOptions& opt, std::ostream& out) {
    const BlobsDataset data = make_blobs(opt.blobs);
    const TrainResult result = train_mlp(opt.mlp, data);

    {
        auto trace = open_output(opt.out / "trace.csv");
        write_trace_csv(trace, result.trace);
        if (!trace) throw IoError("failed writing trace");
    }
    const Matrix features = result.model.penultimate(data.inputs);
    TensorMap tensors = result.model.to_tensors();
    tensors.emplace("features", Tensor::from_matrix(features));
    tensors.emplace("labels", Tensor::from_labels(data.labels));
    BundleManifest m = make_manifest("collapse_train", tensors);
    m.metadata["activation"] = activation_name(opt.mlp.activation);
    m.metadata["epochs"] = std::to_string(opt.mlp.epochs);
    m.metadata["seed"] = std::to_string(opt.mlp.seed);
    write_bundle(m, tensors, opt.out / "model");

    const NcReport final_report = nc_metrics(features, data.labels, result.model.classifier_head());
    out << "trained " << opt.mlp.epochs << " epochs; trace -> " << (opt.out / "trace.csv").string() << "\n";
    if (!result.trace.records.empty()) {
        const auto& last = result.trace.records.back();
        out << "last epoch: loss=" << last.train_loss << " accuracy=" << last.train_accuracy << "\n";
    }
    out << "final " << format_nc_report(final_report) << "\n";
    return final_report;
}

void cmd_hist(const HistOptions& opt, std::ostream& out) {
    std::map<std::string, std::vector<double>> sets;
    for (const auto& spec : opt.scores) {
        auto [name, path] = named_path(spec);
        sets[name] = load_scores(path);
    }
    const Histogram h = pooled_histogram(sets, opt.bins);
    auto file = open_output(opt.out);
    write_histogram_csv(file, h);
    if (!file) throw IoError("failed writing " + opt.out.string());
    out << "wrote " << opt.bins << "-bin histogram over [" << h.lo << ", " << h.hi << "] to " << opt.out.string()
        << "\n";
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"ncood: post-hoc OOD scoring from penultimate features and a linear head"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "ncood 0.1.0");

    auto add_params = [](CLI::App* sub, DetectorParams& p, std::string& norm) {
        sub->add_option("--alpha", p.alpha, "L1 filter strength for ncood");
        sub->add_option("--filter-norm", norm, "Norm for the filter term")
            ->check(CLI::IsMember({"L1", "L2", "Linf"}))
            ->capture_default_str();
        sub->add_option("--k", p.k, "Neighbour rank for knn")->capture_default_str();
        sub->add_option("--react-percentile", p.react_percentile, "Activation clip percentile for react")
            ->capture_default_str();
        sub->add_option("--dice-sparsity", p.dice_sparsity, "Weight sparsity percentile for dice")
            ->capture_default_str();
        sub->add_option("--ridge", p.ridge, "Covariance ridge for mahalanobis (default 1e-6 trace/D)");
    };

    StatsOptions stats_opt;
    auto* stats = app.add_subcommand("stats", "Fit training statistics (mu_G, class means, Sigma_W, lambda_c)");
    stats->add_option("--train", stats_opt.train, "Training bundle with features and labels")->required();
    stats->add_option("--head", stats_opt.head, "Bundle holding weights/bias (default: the training bundle)");
    stats->add_option("--out", stats_opt.out, "Output bundle directory")->required();

    ScoreOptions score_opt;
    std::string score_norm = "L1";
    auto* score = app.add_subcommand("score", "Score a feature bundle with one detector");
    score->add_option("--detector", score_opt.detector, "One of: ncood pscore cosscore distscore msp energy react "
                                                        "dice mahalanobis knn")
        ->required();
    score->add_option("--head", score_opt.head, "Bundle holding weights/bias");
    score->add_option("--stats", score_opt.stats, "Statistics bundle from `ncood stats`");
    score->add_option("--train", score_opt.train, "Training bundle (needed by react and knn)");
    score->add_option("--features", score_opt.features, "Bundle to score")->required();
    score->add_option("--out", score_opt.out, "Output score CSV")->required();
    add_params(score, score_opt.params, score_norm);

    EvalOptions eval_opt;
    auto* eval = app.add_subcommand("eval", "AUROC and FPR95 of ID scores against OOD score files");
    eval->add_option("--id", eval_opt.id_scores, "ID score CSV")->required();
    eval->add_option("--ood", eval_opt.ood, "OOD score CSVs as NAME=PATH or PATH")->required();
    eval->add_option("--detector", eval_opt.detector, "Detector label for the report")->capture_default_str();
    eval->add_option("--out", eval_opt.out, "Report CSV");

    SweepOptions sweep_opt;
    std::string sweep_norm = "L1";
    auto* sweep = app.add_subcommand("sweep-alpha", "Choose alpha by AUROC on ID vs noise validation features");
    sweep->add_option("--head", sweep_opt.head, "Bundle holding weights/bias");
    sweep->add_option("--stats", sweep_opt.stats, "Statistics bundle");
    sweep->add_option("--train", sweep_opt.train, "Training bundle (statistics computed on the fly)");
    sweep->add_option("--id-val", sweep_opt.id_val, "ID validation bundle")->required();
    sweep->add_option("--noise-val", sweep_opt.noise_val, "Noise validation bundle")->required();
    sweep->add_option("--grid", sweep_opt.grid, "Alpha candidates")->delimiter(',')->capture_default_str();
    sweep->add_option("--filter-norm", sweep_norm, "Norm for the filter term")
        ->check(CLI::IsMember({"L1", "L2", "Linf"}))
        ->capture_default_str();
    sweep->add_option("--out", sweep_opt.out, "AUROC-vs-alpha CSV");

    SynthOptions synth_opt;
    std::string ood_mode = "near_origin";
    auto* synth = app.add_subcommand("synth", "Generate a simplex-ETF synthetic feature world");
    synth->add_option("--classes", synth_opt.spec.classes)->capture_default_str();
    synth->add_option("--dim", synth_opt.spec.dim)->capture_default_str();
    synth->add_option("--n-per-class", synth_opt.spec.n_per_class)->capture_default_str();
    synth->add_option("--n-test-per-class", synth_opt.n_test_per_class)->capture_default_str();
    synth->add_option("--scale", synth_opt.spec.scale, "lambda")->capture_default_str();
    synth->add_option("--noise-sigma", synth_opt.spec.noise_sigma)->capture_default_str();
    synth->add_option("--ood-mode", ood_mode)
        ->check(CLI::IsMember({"near_origin", "random_direction", "in_cone_near_origin"}))
        ->capture_default_str();
    synth->add_option("--n-ood", synth_opt.spec.n_ood)->capture_default_str();
    synth->add_option("--ood-radius", synth_opt.spec.ood_radius_fraction, "OOD radius as a fraction of lambda*||w||")
        ->capture_default_str();
    synth->add_option("--seed", synth_opt.spec.seed)->capture_default_str();
    synth->add_option("--out", synth_opt.out, "Output directory")->required();

    CollapseOptions collapse_opt;
    std::string activation = "tanh";
    double lr = collapse_opt.mlp.lr_schedule.front().second;
    std::vector<std::string> lr_steps;
    auto* collapse = app.add_subcommand("collapse", "Train an MLP on blobs and trace neural-collapse metrics");
    collapse->add_option("--classes", collapse_opt.blobs.classes)->capture_default_str();
    collapse->add_option("--input-dim", collapse_opt.blobs.input_dim)->capture_default_str();
    collapse->add_option("--n-per-class", collapse_opt.blobs.n_per_class)->capture_default_str();
    collapse->add_option("--spread", collapse_opt.blobs.center_spread)->capture_default_str();
    collapse->add_option("--blob-sigma", collapse_opt.blobs.noise_sigma)->capture_default_str();
    collapse->add_option("--widths", collapse_opt.mlp.layer_widths, "input,hidden...,penultimate")
        ->delimiter(',')
        ->capture_default_str();
    collapse->add_option("--activation", activation)->check(CLI::IsMember({"relu", "tanh"}))->capture_default_str();
    collapse->add_option("--epochs", collapse_opt.mlp.epochs)->capture_default_str();
    collapse->add_option("--lr", lr, "Initial learning rate")->capture_default_str();
    collapse->add_option("--lr-step", lr_steps, "Later schedule entries as EPOCH:RATE");
    collapse->add_option("--weight-decay", collapse_opt.mlp.weight_decay)->capture_default_str();
    collapse->add_option("--batch-size", collapse_opt.mlp.batch_size, "0 = full batch")->capture_default_str();
    collapse->add_option("--seed", collapse_opt.mlp.seed)->capture_default_str();
    collapse->add_option("--out", collapse_opt.out, "Output directory")->required();

    HistOptions hist_opt;
    auto* hist = app.add_subcommand("hist", "Pooled uniform-bin histogram of score files");
    hist->add_option("--scores", hist_opt.scores, "Score CSVs as NAME=PATH or PATH")->required();
    hist->add_option("--bins", hist_opt.bins)->capture_default_str();
    hist->add_option("--out", hist_opt.out, "Histogram CSV")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        std::ostringstream o, r;
        const int code = app.exit(e, o, r);
        out << o.str();
        err << r.str();
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (stats->parsed()) {
            cmd_stats(stats_opt, out);
        } else if (score->parsed()) {
            score_opt.params.filter_norm = parse_filter_norm(score_norm);
            cmd_score(score_opt, out);
        } else if (eval->parsed()) {
            cmd_eval(eval_opt, out);
        } else if (sweep->parsed()) {
            sweep_opt.filter_norm = parse_filter_norm(sweep_norm);
            cmd_sweep_alpha(sweep_opt, out);
        } else if (synth->parsed()) {
            synth_opt.spec.ood_mode = parse_ood_mode(ood_mode);
            cmd_synth(synth_opt, out);
        } else if (collapse->parsed()) {
            collapse_opt.mlp.activation = parse_activation(activation);
            collapse_opt.blobs.seed = collapse_opt.mlp.seed;
            collapse_opt.mlp.lr_schedule = {{0, lr}};
            for (const auto& step : lr_steps) {
                const auto colon = step.find(':');
                if (colon == std::string::npos) throw ContractError("--lr-step expects EPOCH:RATE, got " + step);
                collapse_opt.mlp.lr_schedule.emplace_back(std::stoi(step.substr(0, colon)),
                                                          std::stod(step.substr(colon + 1)));
            }
            if (collapse_opt.mlp.layer_widths.front() != collapse_opt.blobs.input_dim) {
                throw ContractError("--widths must start with --input-dim (" +
                                    std::to_string(collapse_opt.blobs.input_dim) + ")");
            }
            cmd_collapse(collapse_opt, out);
        } else if (hist->parsed()) {
            cmd_hist(hist_opt, out);
        }
    } catch (...) {
        return report_exception(err);
    }
    return kExitOk;
}

}  // namespace ncood::cli
