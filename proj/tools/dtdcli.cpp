// Command-line front end: dataset synthesis, training, explaining single
// samples, evaluating a heatmapper, and side-by-side method comparison.
// Exit codes: 0 success, 1 usage/config error, 2 runtime failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dtd/baselines.hpp"
#include "dtd/diagnostics.hpp"
#include "dtd/idx.hpp"
#include "dtd/network.hpp"
#include "dtd/pairs.hpp"
#include "dtd/pgm.hpp"
#include "dtd/relevance.hpp"
#include "dtd/rulespec.hpp"

namespace {

using namespace dtd;

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct DatasetOptions {
    std::string images, labels;
    std::size_t per_class = 100;
    std::size_t count = 1000;
    std::uint64_t seed = 0;
    bool translate = false;
};

void add_dataset_options(CLI::App* cmd, DatasetOptions& opt) {
    cmd->add_option("--images", opt.images, "IDX image file (synthesized glyphs if omitted)");
    cmd->add_option("--labels", opt.labels, "IDX label file");
    cmd->add_option("--per-class", opt.per_class,
                    "glyphs per class when synthesizing the digit pool");
    cmd->add_option("--samples", opt.count, "number of paired samples");
    cmd->add_flag("--translate", opt.translate, "randomly translate digits on the canvas");
}

std::vector<PairedSample> make_pairs(const DatasetOptions& opt) {
    if (opt.images.empty() != opt.labels.empty())
        throw UsageError("--images and --labels must be given together");
    IdxDataset pool = opt.images.empty() ? synthetic_digits(opt.per_class, opt.seed)
                                         : load_idx(opt.images, opt.labels);
    PairConfig cfg;
    cfg.count = opt.count;
    cfg.seed = opt.seed + 1;  // decorrelated from the glyph jitter stream
    cfg.translate = opt.translate;
    return synthesize_pairs(pool, cfg);
}

Heatmapper make_heatmapper(const std::string& method, const Network& net,
                           const RuleAssignment& rules) {
    if (method == "deep-taylor")
        return [&net, rules](const Tensor& x) {
            return deep_taylor(net, forward(net, x, BoundsPolicy::Ignore), rules);
        };
    if (method == "sensitivity")
        return [&net](const Tensor& x) {
            return sensitivity_heatmap(net, x, SensitivityMode::Raw);
        };
    if (method == "sensitivity-rescaled")
        return [&net](const Tensor& x) {
            return sensitivity_heatmap(net, x, SensitivityMode::Rescaled);
        };
    if (method == "nearest-root")
        return [&net](const Tensor& x) {
            RootSearchConfig cfg;
            cfg.box_lower = net.input_lower;
            cfg.box_upper = net.input_upper;
            return nearest_root_taylor(net, x, cfg);
        };
    if (method.rfind("lrp-ab", 0) == 0) {  // lrp-ab or lrp-ab=alpha:beta
        double alpha = 2.0, beta = 1.0;
        if (const auto eq = method.find('='); eq != std::string::npos) {
            const std::string params = method.substr(eq + 1);
            const auto colon = params.find(':');
            if (colon == std::string::npos) throw UsageError("lrp-ab needs '=alpha:beta'");
            alpha = std::stod(params.substr(0, colon));
            beta = std::stod(params.substr(colon + 1));
        }
        return [&net, alpha, beta](const Tensor& x) {
            return uniform_rule_heatmap(net, x, RelevanceRule::alphabeta(alpha, beta));
        };
    }
    if (method.rfind("lrp-eps", 0) == 0) {  // lrp-eps or lrp-eps=value
        double epsilon = 10.0;
        if (const auto eq = method.find('='); eq != std::string::npos)
            epsilon = std::stod(method.substr(eq + 1));
        return [&net, epsilon](const Tensor& x) {
            return uniform_rule_heatmap(net, x, RelevanceRule::eps(epsilon));
        };
    }
    throw UsageError("unknown method '" + method +
                     "' (expected deep-taylor, sensitivity, sensitivity-rescaled, "
                     "nearest-root, lrp-ab[=a:b], lrp-eps[=e])");
}

int cmd_synth(const std::string& images, const std::string& labels, std::size_t per_class,
              std::uint64_t seed) {
    const IdxDataset ds = synthetic_digits(per_class, seed);
    save_idx(ds, images, labels);
    std::cout << "wrote " << ds.count() << " glyphs to " << images << " / " << labels << "\n";
    return 0;
}

int cmd_train(const DatasetOptions& data, const std::string& preset, const std::string& out,
              const TrainConfig& train_cfg) {
    const std::vector<PairedSample> pairs = make_pairs(data);
    Network net = make_preset(preset, train_cfg.seed);
    const TrainResult result = train_sgd(net, pairs, train_cfg);
    save_model(network_to_archive(net), out);
    std::cout << "trained " << preset << " for " << train_cfg.iterations << " iterations on "
              << pairs.size() << " samples\n"
              << "mse: initial " << result.initial_mse << ", final " << result.final_mse << "\n"
              << "model written to " << out << "\n";
    return 0;
}

int cmd_explain(const DatasetOptions& data, const std::string& model_path,
                const std::string& rule_spec, const std::string& method,
                const std::string& outdir, std::size_t count) {
    const Network net = network_from_archive(load_model(model_path));
    RuleAssignment rules = rule_spec.empty() ? default_assignment(net)
                                             : parse_rule_spec(rule_spec, net);
    const Heatmapper heatmapper = make_heatmapper(method, net, rules);

    DatasetOptions opts = data;
    opts.count = count;
    const std::vector<PairedSample> pairs = make_pairs(opts);
    std::filesystem::create_directories(outdir);

    std::cout.precision(10);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const Heatmap map = heatmapper(pairs[i].image);
        const Tensor img = map.relevance.reshaped(pairs[i].image.shape());
        const std::string stem = outdir + "/sample" + std::to_string(i);
        write_pgm(img, stem + ".pgm");
        write_csv(img, stem + ".csv");
        const double sum_r = total_sum(map.relevance);
        const double gap = std::abs(sum_r - map.output_relevance) /
                           std::max(map.output_relevance, 1e-9);
        std::cout << "sample " << i << ": f(x)=" << map.output_relevance << " sum_R=" << sum_r
                  << " rel_gap=" << gap << (map.converged ? "" : " (unconverged)") << "\n";
    }
    std::cout << "heatmaps written to " << outdir << "\n";
    return 0;
}

int cmd_evaluate(const DatasetOptions& data, const std::string& model_path,
                 const std::string& rule_spec, const std::string& method,
                 const std::string& outdir, const Tolerances& tol) {
    const Network net = network_from_archive(load_model(model_path));
    RuleAssignment rules = rule_spec.empty() ? default_assignment(net)
                                             : parse_rule_spec(rule_spec, net);
    const Heatmapper heatmapper = make_heatmapper(method, net, rules);

    const std::vector<PairedSample> pairs = make_pairs(data);
    std::vector<Tensor> inputs;
    inputs.reserve(pairs.size());
    for (const auto& p : pairs) inputs.push_back(p.image);

    const ConsistencyReport report = evaluate(heatmapper, inputs, tol);
    std::filesystem::create_directories(outdir);
    export_scatter(report, outdir + "/scatter.csv");
    export_histogram(report, outdir + "/histogram.csv");
    {
        std::ofstream f(outdir + "/report.txt");
        f << verdict_line(report) << "\n";
    }
    std::cout << verdict_line(report) << "\n"
              << "reports written to " << outdir << "\n";
    return 0;
}

int cmd_compare(const DatasetOptions& data, const std::string& model_path,
                const std::vector<std::string>& methods, const std::string& outdir,
                const Tolerances& tol) {
    const Network net = network_from_archive(load_model(model_path));
    const std::vector<PairedSample> pairs = make_pairs(data);
    std::vector<Tensor> inputs;
    inputs.reserve(pairs.size());
    for (const auto& p : pairs) inputs.push_back(p.image);

    std::filesystem::create_directories(outdir);
    std::ofstream table(outdir + "/comparison.txt");
    for (const std::string& method : methods) {
        RuleAssignment rules = default_assignment(net);
        if (method == "w2" || method == "z") {
            for (auto& r : rules)
                r = method == "w2" ? RelevanceRule::w2() : RelevanceRule::z();
        }
        const Heatmapper heatmapper =
            (method == "w2" || method == "z") ? make_heatmapper("deep-taylor", net, rules)
                                              : make_heatmapper(method, net, rules);
        ConsistencyReport report = evaluate(heatmapper, inputs, tol);
        if (report.method.empty() || method == "w2" || method == "z") report.method = method;
        const std::string line = verdict_line(report);
        std::cout << line << "\n";
        table << line << "\n";
    }
    std::cout << "comparison table written to " << outdir << "/comparison.txt\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"deep Taylor decomposition heatmaps for detection-pooling networks"};
    app.require_subcommand(1);

    DatasetOptions data;
    std::uint64_t seed = 0;
    app.add_option("--seed", seed, "master random seed")->capture_default_str();

    // synth
    auto* synth = app.add_subcommand("synth", "write a synthetic digit pool as IDX files");
    std::string synth_images = "digits-images.idx", synth_labels = "digits-labels.idx";
    std::size_t synth_per_class = 100;
    synth->add_option("--out-images", synth_images, "output IDX image path");
    synth->add_option("--out-labels", synth_labels, "output IDX label path");
    synth->add_option("--per-class", synth_per_class, "glyphs per digit class");

    // train
    auto* train = app.add_subcommand("train", "train a detection-pooling network");
    std::string preset = "mnist-one-layer", model_out = "model.dtd";
    TrainConfig train_cfg;
    train_cfg.iterations = 50000;
    add_dataset_options(train, data);
    train->add_option("--preset", preset, "mnist-one-layer | mnist-two-layer")
        ->capture_default_str();
    train->add_option("--out", model_out, "model archive output path")->capture_default_str();
    train->add_option("--iterations", train_cfg.iterations, "SGD iterations")
        ->capture_default_str();
    train->add_option("--minibatch", train_cfg.minibatch_size, "minibatch size")
        ->capture_default_str();
    train->add_option("--learning-rate", train_cfg.learning_rate, "SGD step size")
        ->capture_default_str();

    // shared explain/evaluate/compare options
    std::string model_path, rule_spec, method = "deep-taylor", outdir = "out";
    std::size_t explain_count = 4;
    Tolerances tol;

    auto* explain = app.add_subcommand("explain", "write per-sample heatmaps (PGM + CSV)");
    add_dataset_options(explain, data);
    explain->add_option("--model", model_path, "model archive")->required();
    explain->add_option("--rules", rule_spec, "rule assignment, e.g. zbox:first,zplus:rest");
    explain->add_option("--method", method, "heatmapping method")->capture_default_str();
    explain->add_option("--outdir", outdir, "output directory")->capture_default_str();
    explain->add_option("--count", explain_count, "number of samples")->capture_default_str();

    auto* eval = app.add_subcommand("evaluate", "run one heatmapper through the diagnostics");
    add_dataset_options(eval, data);
    eval->add_option("--model", model_path, "model archive")->required();
    eval->add_option("--rules", rule_spec, "rule assignment for deep-taylor");
    eval->add_option("--method", method, "heatmapping method")->capture_default_str();
    eval->add_option("--outdir", outdir, "output directory")->capture_default_str();
    eval->add_option("--conservation-tol", tol.conservation_rel, "relative conservation tolerance")
        ->capture_default_str();

    auto* compare = app.add_subcommand("compare", "side-by-side verdicts for several methods");
    std::vector<std::string> methods = {"deep-taylor", "w2",          "sensitivity",
                                        "nearest-root", "lrp-ab=2:1", "lrp-eps=10"};
    add_dataset_options(compare, data);
    compare->add_option("--model", model_path, "model archive")->required();
    compare->add_option("--methods", methods, "methods to compare")->capture_default_str();
    compare->add_option("--outdir", outdir, "output directory")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    data.seed = seed;
    train_cfg.seed = seed;

    try {
        if (synth->parsed()) return cmd_synth(synth_images, synth_labels, synth_per_class, seed);
        if (train->parsed()) return cmd_train(data, preset, model_out, train_cfg);
        if (explain->parsed())
            return cmd_explain(data, model_path, rule_spec, method, outdir, explain_count);
        if (eval->parsed()) return cmd_evaluate(data, model_path, rule_spec, method, outdir, tol);
        if (compare->parsed()) return cmd_compare(data, model_path, methods, outdir, tol);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const IoError& e) {
        // bad user-supplied paths and unreadable files are config errors
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
