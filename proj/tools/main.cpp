#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "symconv/arch.hpp"
#include "symconv/checkpoint.hpp"
#include "symconv/data.hpp"
#include "symconv/error.hpp"
#include "symconv/fastconv.hpp"
#include "symconv/report.hpp"
#include "symconv/train.hpp"
#include "symconv/verify.hpp"

namespace fs = std::filesystem;
using namespace symconv;

namespace {

// 0 = success, 2 = invariant failure, 3 = input/format error.
constexpr int kExitOk = 0;
constexpr int kExitInvariant = 2;
constexpr int kExitInput = 3;

struct CommonOpts {
    std::string arch = "small_cnn";
    std::string filter_config = "standard";
    std::string dataset = "cifar10";
    std::string data_dir;
    std::size_t subset = 0;
    int replace_up_to = 4;
};

std::string resolved_data_dir(const std::string& flag_value) {
    if (!flag_value.empty()) return flag_value;
    if (const char* env = std::getenv("SYMCONV_DATA_DIR")) return env;
    return ".";
}

ArchSpec resolve_arch(const CommonOpts& o, int classes) {
    if (is_builtin_arch(o.arch))
        return builtin_arch(o.arch, o.dataset, classes, o.replace_up_to);
    if (fs::exists(o.arch)) return ArchSpec::load(o.arch);
    // Unknown name: let builtin_arch raise the error listing the choices.
    return builtin_arch(o.arch, o.dataset, classes, o.replace_up_to);
}

Dataset load_split(const CommonOpts& o, const std::string& split) {
    const std::string dir = resolved_data_dir(o.data_dir) + "/" + o.dataset;
    Dataset d = o.dataset == "mnist" ? load_mnist(dir, split)
                                     : load_cifar10(dir, split);
    if (o.subset > 0) d = subset(d, o.subset, /*seed=*/12345, /*stratified=*/true);
    return d;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw FormatError("cannot write " + path);
    out << text;
}

// Forward a 1-sample probe so every conv layer caches its input shape, then
// sum naive and symmetry-reduced multiply counts over the conv layers.
void fill_multiply_counts(Model& model, const std::array<int, 3>& input_shape,
                          RunReport& report) {
    Tensor probe = Tensor::zeros({1, static_cast<std::size_t>(input_shape[0]),
                                  static_cast<std::size_t>(input_shape[1]),
                                  static_cast<std::size_t>(input_shape[2])});
    model.forward(probe, /*training=*/false);
    long long naive = 0, fast = 0;
    for (ConvLayer* conv : model.conv_layers()) {
        const auto& geom = conv->impl().geometry();
        const auto& in_shape = conv->cached_input().shape();
        const int oh = geom.out_size(static_cast<int>(in_shape[2]));
        const int ow = geom.out_size(static_cast<int>(in_shape[3]));
        naive += static_cast<long long>(naive_multiply_count(geom, 1, oh, ow));
        fast += static_cast<long long>(multiply_count(conv->impl(), 1, oh, ow));
    }
    report.multiplies_naive = naive;
    report.multiplies_fast = fast;
    report.multiply_ratio =
        naive > 0 ? static_cast<double>(fast) / static_cast<double>(naive) : 1.0;
}

int cmd_count_params(const CommonOpts& o, const std::string& out_path) {
    ArchSpec spec = resolve_arch(o, 10);
    FilterConfig config = FilterConfig::from_token(o.filter_config);
    Model model = build_model(spec, config);

    std::vector<ParamRow> rows;
    auto convs = model.conv_layers();
    for (std::size_t i = 0; i < convs.size(); ++i) {
        LayerParamCount lc = convs[i]->impl().count_params();
        ParamRow row;
        row.layer = "conv" + std::to_string(i);
        row.class_mix = class_mix_summary(convs[i]->impl().assignments());
        row.free_weights = lc.free_weights;
        row.standard_weights = lc.standard_weights;
        row.ratio = lc.weight_ratio();
        rows.push_back(std::move(row));
        std::printf("%-8s %-28s %9lld / %9lld weights  %s%%\n", rows.back().layer.c_str(),
                    rows.back().class_mix.c_str(), lc.free_weights,
                    lc.standard_weights, format_percent(lc.weight_ratio()).c_str());
    }
    ModelParamCount total = model.count_params();
    ParamRow total_row;
    total_row.layer = "total";
    total_row.class_mix = config.token;
    total_row.free_weights = total.total_free;
    total_row.standard_weights = total.total_standard;
    total_row.ratio = total.total_ratio();
    rows.push_back(total_row);
    std::printf("%-8s %-28s %9lld / %9lld params   %s%%\n", "total",
                config.token.c_str(), total.total_free, total.total_standard,
                format_percent(total.total_ratio()).c_str());
    std::printf("conv weights only: %lld / %lld  %s%%\n", total.conv_free_weights,
                total.conv_standard_weights,
                format_percent(total.conv_weight_ratio()).c_str());
    if (!out_path.empty()) write_text(out_path, param_csv(rows));
    return kExitOk;
}

int cmd_train(const CommonOpts& o, const std::string& config_path, int epochs_flag,
              long long seed_flag, const std::string& out_dir) {
    SgdConfig cfg = config_path.empty() ? SgdConfig{} : SgdConfig::load(config_path);
    if (epochs_flag > 0) cfg.epochs = epochs_flag;
    if (seed_flag >= 0) cfg.seed = static_cast<std::uint64_t>(seed_flag);
    cfg.validate();

    Dataset train_split = load_split(o, "train");
    CommonOpts full = o;
    full.subset = 0;  // evaluate on the whole held-out split
    Dataset val_split = load_split(full, "test");

    ArchSpec spec = resolve_arch(o, train_split.classes);
    FilterConfig config = FilterConfig::from_token(o.filter_config);
    Model model = build_model(spec, config);

    RunReport report;
    report.command = "train";
    report.arch = spec.name.empty() ? o.arch : spec.name;
    report.filter_config = config.token;
    report.dataset = o.dataset;
    report.subset = o.subset;
    report.config = cfg;
    report.seed = cfg.seed;
    report.run_id = report.arch + "-" + config.token + "-" + o.dataset + "-seed" +
                    std::to_string(cfg.seed);

    const bool augment_train = o.dataset == "cifar10";
    train_model(model, cfg, train_split, val_split, augment_train, report);

    ModelParamCount counts = model.count_params();
    report.params_free = counts.total_free;
    report.params_standard = counts.total_standard;
    report.param_ratio = counts.total_ratio();
    fill_multiply_counts(model, spec.input_shape, report);

    fs::create_directories(out_dir);
    CheckpointMeta meta;
    meta.arch = spec;
    meta.filter_config = config.token;
    meta.dataset = o.dataset;
    meta.seed = cfg.seed;
    meta.epochs_trained = cfg.epochs;
    save_checkpoint(out_dir + "/checkpoint.symc", model, meta);
    write_text(out_dir + "/report.json", report.to_json());
    write_metrics_csv(out_dir + "/metrics.csv", report);

    std::printf("run %s: %d epochs\n", report.run_id.c_str(), cfg.epochs);
    for (const auto& e : report.history)
        std::printf("  epoch %2d  lr %.4g  train loss %.4f  train err %.2f%%  "
                    "val err %.2f%%\n",
                    e.epoch, e.lr, e.train_loss, e.train_error, e.val_error);
    std::printf("params %lld/%lld (%s%%)  multiplies %lld/%lld (%s%%)\n",
                report.params_free, report.params_standard,
                format_percent(report.param_ratio).c_str(), report.multiplies_fast,
                report.multiplies_naive,
                format_percent(report.multiply_ratio).c_str());
    std::printf("wrote %s/{checkpoint.symc,report.json,metrics.csv}\n",
                out_dir.c_str());
    return kExitOk;
}

int cmd_eval(const CommonOpts& o, const std::string& checkpoint_path,
             const std::string& out_path) {
    LoadedCheckpoint loaded = load_checkpoint(checkpoint_path);
    CommonOpts eff = o;
    if (eff.dataset.empty()) eff.dataset = loaded.meta.dataset;
    Dataset test_split = load_split(eff, "test");
    EvalMetrics m = evaluate(loaded.model, test_split, 128);
    std::printf("eval %s on %s/test (%zu items): loss %.4f  error %.2f%%\n",
                checkpoint_path.c_str(), eff.dataset.c_str(), test_split.size(),
                m.loss, m.error);
    if (!out_path.empty()) {
        std::ostringstream os;
        os << "{\n  \"schema_version\": " << kReportSchemaVersion
           << ",\n  \"checkpoint\": \"" << checkpoint_path << "\",\n  \"dataset\": \""
           << eff.dataset << "\",\n  \"items\": " << test_split.size()
           << ",\n  \"loss\": " << m.loss << ",\n  \"error\": " << m.error << "\n}\n";
        write_text(out_path, os.str());
    }
    return kExitOk;
}

int cmd_verify(const std::string& suite, const std::string& data_dir,
               long long seed_flag) {
    const std::uint64_t seed = seed_flag >= 0 ? static_cast<std::uint64_t>(seed_flag) : 407;
    auto results = run_verify_suite(suite, resolved_data_dir(data_dir), seed);
    bool all_pass = true;
    for (const auto& r : results) {
        const char* status = r.skipped ? "SKIP" : (r.pass ? "PASS" : "FAIL");
        std::printf("%-4s %-40s max_err %.3e  %s\n", status, r.name.c_str(),
                    r.max_error, r.detail.c_str());
        if (!r.pass) all_pass = false;
    }
    std::printf("%s: %zu checks\n", all_pass ? "ok" : "FAILED", results.size());
    return all_pass ? kExitOk : kExitInvariant;
}

int cmd_bench(const CommonOpts& o, const std::string& out_path) {
    ArchSpec spec = resolve_arch(o, 10);
    FilterConfig config = FilterConfig::from_token(o.filter_config);
    Model model = build_model(spec, config);

    Tensor probe = Tensor::zeros({1, static_cast<std::size_t>(spec.input_shape[0]),
                                  static_cast<std::size_t>(spec.input_shape[1]),
                                  static_cast<std::size_t>(spec.input_shape[2])});
    model.forward(probe, /*training=*/false);

    Rng rng(407);
    std::vector<BenchRow> rows;
    auto convs = model.conv_layers();
    for (std::size_t i = 0; i < convs.size(); ++i) {
        const ConstrainedConv2dF& layer = convs[i]->impl();
        Tensor x = Tensor::zeros(convs[i]->cached_input().shape());
        for (std::size_t p = 0; p < x.size(); ++p)
            x[p] = static_cast<float>(rng.normal());

        Tensor naive = layer.forward(x);
        OpCounter counter;
        Tensor fast = fast_forward(layer, x, counter);
        double dev = 0.0;
        for (std::size_t p = 0; p < naive.size(); ++p)
            dev = std::max(dev, static_cast<double>(std::abs(naive[p] - fast[p])));

        const auto& out_shape = naive.shape();
        BenchRow row;
        row.layer = "conv" + std::to_string(i);
        row.class_mix = class_mix_summary(layer.assignments());
        row.naive_multiplies = static_cast<long long>(naive_multiply_count(
            layer.geometry(), 1, static_cast<int>(out_shape[2]),
            static_cast<int>(out_shape[3])));
        row.fast_multiplies = static_cast<long long>(
            multiply_count(layer, 1, static_cast<int>(out_shape[2]),
                           static_cast<int>(out_shape[3])));
        row.ratio = static_cast<double>(row.fast_multiplies) /
                    static_cast<double>(row.naive_multiplies);
        row.max_abs_deviation = dev;
        rows.push_back(std::move(row));
    }
    const std::string csv = bench_csv(rows);
    std::fputs(csv.c_str(), stdout);
    if (!out_path.empty()) write_text(out_path, csv);
    return kExitOk;
}

int cmd_project(const std::string& checkpoint_path, const std::string& config_token,
                const std::string& out_path) {
    if (out_path.empty())
        throw ConfigError("project-checkpoint needs --out for the projected copy");
    FilterConfig target = FilterConfig::from_token(config_token);
    auto rows = project_checkpoint(checkpoint_path, target, out_path);
    std::printf("%-8s %-28s %12s %12s\n", "layer", "class_mix", "residual",
                "relative");
    for (const auto& r : rows)
        std::printf("%-8s %-28s %12.6f %12.6f\n", r.layer.c_str(),
                    r.class_mix.c_str(), r.residual, r.relative);
    std::printf("projected checkpoint written to %s\n", out_path.c_str());
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"symmetry-constrained convolution toolkit"};
    app.require_subcommand(1);

    CommonOpts opts;
    std::string config_path, checkpoint_path, out_path, suite = "all";
    int epochs_flag = 0;
    long long seed_flag = -1;

    auto add_common = [&](CLI::App* cmd, bool with_dataset = true) {
        cmd->add_option("--arch", opts.arch, "built-in name or ArchSpec json path");
        cmd->add_option("--filter-config", opts.filter_config,
                        "named scheme or class:frac list");
        if (with_dataset) {
            cmd->add_option("--dataset", opts.dataset, "cifar10 or mnist");
            cmd->add_option("--data-dir", opts.data_dir,
                            "dataset root (default $SYMCONV_DATA_DIR)");
            cmd->add_option("--subset", opts.subset,
                            "stratified training subset size (0 = all)");
        }
        cmd->add_option("--replace-up-to", opts.replace_up_to,
                        "dwnet: constrain only the first N depthwise layers");
    };

    CLI::App* count = app.add_subcommand(
        "count-params", "per-layer and whole-model parameter accounting");
    add_common(count, false);
    count->add_option("--dataset", opts.dataset, "cifar10 or mnist (input shape)");
    count->add_option("--out", out_path, "write the table as CSV");

    CLI::App* train = app.add_subcommand("train", "train a model and write "
                                                  "checkpoint + reports");
    add_common(train);
    train->add_option("--config", config_path, "SgdConfig json");
    train->add_option("--epochs", epochs_flag, "override config epochs");
    train->add_option("--seed", seed_flag, "override config seed");
    train->add_option("--out", out_path, "output directory")->required();

    std::string eval_dataset;  // empty = take it from the checkpoint
    CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint on the "
                                                "test split");
    eval->add_option("--checkpoint", checkpoint_path, "checkpoint path")->required();
    eval->add_option("--dataset", eval_dataset, "cifar10 or mnist");
    eval->add_option("--data-dir", opts.data_dir, "dataset root");
    eval->add_option("--subset", opts.subset, "stratified eval subset size");
    eval->add_option("--out", out_path, "write metrics json");

    CLI::App* verify = app.add_subcommand("verify", "run verification suites");
    verify->add_option("suite", suite, "gradcheck|equivariance|fastconv|data|all");
    verify->add_option("--data-dir", opts.data_dir, "dataset root for data checks");
    verify->add_option("--seed", seed_flag, "suite rng seed");

    CLI::App* bench = app.add_subcommand(
        "bench", "naive vs symmetry-reduced multiply counts per layer");
    add_common(bench, false);
    bench->add_option("--dataset", opts.dataset, "cifar10 or mnist (input shape)");
    bench->add_option("--out", out_path, "write the table as CSV");

    CLI::App* project = app.add_subcommand(
        "project-checkpoint",
        "project an unconstrained checkpoint onto a filter config");
    project->add_option("--checkpoint", checkpoint_path, "source checkpoint")
        ->required();
    project->add_option("--filter-config", opts.filter_config, "target config");
    project->add_option("--out", out_path, "projected checkpoint path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitInput;
    }

    try {
        if (count->parsed()) return cmd_count_params(opts, out_path);
        if (train->parsed())
            return cmd_train(opts, config_path, epochs_flag, seed_flag, out_path);
        if (eval->parsed()) {
            opts.dataset = eval_dataset;
            return cmd_eval(opts, checkpoint_path, out_path);
        }
        if (verify->parsed()) return cmd_verify(suite, opts.data_dir, seed_flag);
        if (bench->parsed()) return cmd_bench(opts, out_path);
        if (project->parsed())
            return cmd_project(checkpoint_path, opts.filter_config, out_path);
    } catch (const FormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const Error& e) {
        std::cerr << "invariant failure: " << e.what() << "\n";
        return kExitInvariant;
    } catch (const std::exception& e) {
        std::cerr << "unexpected failure: " << e.what() << "\n";
        return kExitInvariant;
    }
    return kExitOk;
}
