#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "symconv/arch.hpp"
#include "symconv/checkpoint.hpp"
#include "symconv/error.hpp"
#include "symconv/optim.hpp"
#include "symconv/report.hpp"

using namespace symconv;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& tag) {
    auto dir = fs::temp_directory_path() / ("symconv_rep_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

RunReport sample_report() {
    RunReport r;
    r.run_id = "small_cnn-type_i-mnist-seed3";
    r.command = "train";
    r.arch = "small_cnn";
    r.filter_config = "type_i";
    r.dataset = "mnist";
    r.subset = 512;
    r.config.epochs = 2;
    r.config.seed = 3;
    r.seed = 3;
    r.history = {{0, 0.1, 1.25, 40.5, 12.5}, {1, 0.1, 0.5, 10.25, 8.0}};
    r.final_train_loss = 0.5;
    r.final_train_error = 10.25;
    r.final_val_error = 8.0;
    r.params_free = 6630;
    r.params_standard = 10362;
    r.param_ratio = 6630.0 / 10362.0;
    r.multiplies_naive = 1000;
    r.multiplies_fast = 600;
    r.multiply_ratio = 0.6;
    r.wall_seconds = 12.75;
    return r;
}

}  // namespace

TEST_SUITE("report") {

TEST_CASE("percent formatting truncates to two decimals") {
    CHECK(format_percent(2.0 / 3.0) == "66.66");
    CHECK(format_percent(1.0 / 3.0) == "33.33");
    CHECK(format_percent(0.5) == "50.00");
    CHECK(format_percent(1.0) == "100.00");
    CHECK(format_percent(0.0) == "0.00");
    CHECK(format_percent(0.502765) == "50.27");
    CHECK(format_percent(0.999999) == "99.99");
    CHECK(format_percent(0.0001) == "0.01");
}

TEST_CASE("run report JSON round-trips exactly") {
    auto r = sample_report();
    auto back = RunReport::from_json(r.to_json());
    CHECK(back == r);
    CHECK_THROWS_AS(RunReport::from_json("{"), FormatError);
}

TEST_CASE("metrics CSV carries the history rows") {
    auto dir = scratch("csv");
    auto path = (dir / "metrics.csv").string();
    write_metrics_csv(path, sample_report());
    auto text = slurp(path);
    CHECK(text.find("schema_version,epoch,lr,train_loss,train_error,val_error") == 0);
    CHECK(text.find("1,0,0.1,1.25,40.5,12.5") != std::string::npos);
    CHECK(text.find("1,1,0.1,0.5,10.25,8") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("bench and param CSV headers") {
    BenchRow b{"conv0", "hvd:4", 900, 300, 1.0 / 3.0, 5e-7};
    auto btext = bench_csv({b});
    CHECK(btext.find("schema_version,layer,class_mix,naive_multiplies,fast_multiplies,"
                     "ratio,max_abs_deviation") == 0);
    CHECK(btext.find("conv0,hvd:4,900,300") != std::string::npos);

    ParamRow p{"conv0", "hvd:4", 12, 36, 1.0 / 3.0};
    auto ptext = param_csv({p});
    CHECK(ptext.find("schema_version,layer,class_mix,free_weights,standard_weights,"
                     "ratio") == 0);
    CHECK(ptext.find("conv0,hvd:4,12,36") != std::string::npos);
}

TEST_CASE("class mix summaries run-length encode the assignment") {
    CHECK(class_mix_summary({SymmetryClass::H, SymmetryClass::H, SymmetryClass::V}) ==
          "h:2;v:1");
    CHECK(class_mix_summary({SymmetryClass::Standard}) == "standard:1");
}

TEST_CASE("checkpoint round-trip restores every state entry") {
    auto dir = scratch("ckpt");
    auto spec = small_cnn_spec("mnist", 10);
    auto model = build_model(spec, FilterConfig::from_token("type_i"));
    Rng rng(11);
    kaiming_init(model, rng);

    CheckpointMeta meta;
    meta.arch = spec;
    meta.filter_config = "type_i";
    meta.dataset = "mnist";
    meta.seed = 11;
    meta.epochs_trained = 0;
    auto path = (dir / "model.symc").string();
    save_checkpoint(path, model, meta);

    auto loaded = load_checkpoint(path);
    CHECK(loaded.meta.filter_config == "type_i");
    CHECK(loaded.meta.dataset == "mnist");
    CHECK(loaded.meta.seed == 11);
    CHECK(loaded.meta.arch.name == spec.name);

    auto s1 = model.state();
    auto s2 = loaded.model.state();
    REQUIRE(s1.size() == s2.size());
    for (std::size_t i = 0; i < s1.size(); ++i) {
        CHECK(s1[i].name == s2[i].name);
        REQUIRE(s1[i].data->size() == s2[i].data->size());
        for (std::size_t j = 0; j < s1[i].data->size(); ++j)
            CHECK((*s1[i].data)[j] == (*s2[i].data)[j]);
    }

    // bit-identical bytes when saved again
    auto path2 = (dir / "again.symc").string();
    save_checkpoint(path2, loaded.model, loaded.meta);
    CHECK(slurp(path) == slurp(path2));

    // corrupt magic
    auto bytes = slurp(path);
    bytes[0] = 'X';
    std::ofstream(path, std::ios::binary).write(bytes.data(), bytes.size());
    CHECK_THROWS_AS(load_checkpoint(path), FormatError);
    fs::remove_all(dir);
}

TEST_CASE("projection splits a dense checkpoint into symmetric plus residual") {
    auto dir = scratch("proj");
    auto spec = small_cnn_spec("mnist", 10);
    auto model = build_model(spec, FilterConfig::standard());
    Rng rng(21);
    kaiming_init(model, rng);

    CheckpointMeta meta;
    meta.arch = spec;
    meta.filter_config = "standard";
    meta.dataset = "mnist";
    auto src = (dir / "dense.symc").string();
    save_checkpoint(src, model, meta);

    auto out = (dir / "folded.symc").string();
    auto rows = project_checkpoint(src, FilterConfig::from_token("type_iic"), out);
    REQUIRE(rows.size() == 2);  // both convs
    for (const auto& row : rows) {
        CHECK(row.class_mix.find("hvd") != std::string::npos);
        CHECK(row.residual > 0.0);  // random kernels are not symmetric
        CHECK(row.relative > 0.0);
        CHECK(row.relative < 1.0);
    }

    // the projected checkpoint loads as a constrained model whose expanded
    // kernels are the per-orbit means of the dense ones
    auto loaded = load_checkpoint(out);
    CHECK(loaded.meta.filter_config == "type_iic");
    auto* dense_conv = model.conv_layers()[0];
    auto* proj_conv = loaded.model.conv_layers()[0];
    auto dense_k = dense_conv->impl().expand_kernels();
    auto proj_k = proj_conv->impl().expand_kernels();
    TyingMap map(SymmetryClass::HVD, 3);
    // filter 0, slice 0
    Tensor64 slice({3, 3});
    for (int p = 0; p < 9; ++p) slice[p] = dense_k[p];
    auto want = map.expand(map.project(slice));
    for (int p = 0; p < 9; ++p)
        CHECK(proj_k[p] == doctest::Approx(want[p]).epsilon(1e-6));

    // projecting an already-constrained checkpoint is refused
    CHECK_THROWS_AS(project_checkpoint(out, FilterConfig::from_token("type_i"),
                                       (dir / "again.symc").string()),
                    ConfigError);
    fs::remove_all(dir);
}

TEST_CASE("projection of a symmetric kernel is lossless") {
    auto dir = scratch("proj2");
    // hand-build a one-conv model whose kernel is already fully symmetric
    ArchSpec spec;
    spec.name = "probe";
    spec.input_shape = {1, 5, 5};
    spec.classes = 2;
    LayerDesc conv;
    conv.kind = "conv";
    conv.out_channels = 1;
    conv.kernel_size = 3;
    conv.padding = 1;
    conv.symmetrizable = true;
    LayerDesc gap;
    gap.kind = "avgpool";
    gap.global = true;
    LayerDesc fc;
    fc.kind = "fc";
    fc.out_features = 2;
    spec.layers = {conv, gap, fc};

    auto model = build_model(spec, FilterConfig::standard());
    auto* c = model.conv_layers()[0];
    // cross pattern: symmetric under the full group
    c->impl().free_weights() = {0, 1, 0, 1, 2, 1, 0, 1, 0};

    CheckpointMeta meta;
    meta.arch = spec;
    meta.filter_config = "standard";
    meta.dataset = "mnist";
    auto src = (dir / "sym.symc").string();
    save_checkpoint(src, model, meta);
    auto rows = project_checkpoint(src, FilterConfig::from_token("type_iic"),
                                   (dir / "out.symc").string());
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].residual == doctest::Approx(0.0).epsilon(1e-12));
    fs::remove_all(dir);
}

}  // TEST_SUITE
