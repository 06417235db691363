#include "symconv/report.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "symconv/error.hpp"

namespace symconv {

namespace {

using Json = nlohmann::ordered_json;

// Shortest-round-trip double formatting for CSV cells, so re-parsing gives
// back the same value the JSON carries.
std::string num(double v) {
    Json j = v;
    return j.dump();
}

}  // namespace

std::string RunReport::to_json() const {
    Json j;
    j["schema_version"] = schema_version;
    j["run_id"] = run_id;
    j["command"] = command;
    j["arch"] = arch;
    j["filter_config"] = filter_config;
    j["dataset"] = dataset;
    j["subset"] = subset;
    j["config"] = Json::parse(config.to_json());
    j["seed"] = seed;
    Json hist = Json::array();
    for (const auto& e : history) {
        Json r;
        r["epoch"] = e.epoch;
        r["lr"] = e.lr;
        r["train_loss"] = e.train_loss;
        r["train_error"] = e.train_error;
        r["val_error"] = e.val_error;
        hist.push_back(std::move(r));
    }
    j["history"] = std::move(hist);
    j["final_train_loss"] = final_train_loss;
    j["final_train_error"] = final_train_error;
    j["final_val_error"] = final_val_error;
    j["params_free"] = params_free;
    j["params_standard"] = params_standard;
    j["param_ratio"] = param_ratio;
    j["multiplies_naive"] = multiplies_naive;
    j["multiplies_fast"] = multiplies_fast;
    j["multiply_ratio"] = multiply_ratio;
    j["wall_seconds"] = wall_seconds;
    return j.dump(2);
}

RunReport RunReport::from_json(const std::string& text) {
    Json j;
    try {
        j = Json::parse(text);
    } catch (const std::exception& e) {
        throw FormatError(std::string("run report does not parse: ") + e.what());
    }
    RunReport r;
    r.schema_version = j.value("schema_version", kReportSchemaVersion);
    r.run_id = j.value("run_id", "");
    r.command = j.value("command", "");
    r.arch = j.value("arch", "");
    r.filter_config = j.value("filter_config", "");
    r.dataset = j.value("dataset", "");
    r.subset = j.value("subset", std::size_t{0});
    if (j.contains("config")) r.config = SgdConfig::from_json(j.at("config").dump());
    r.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("history")) {
        for (const auto& e : j.at("history")) {
            EpochRecord rec;
            rec.epoch = e.at("epoch").get<int>();
            rec.lr = e.at("lr").get<double>();
            rec.train_loss = e.at("train_loss").get<double>();
            rec.train_error = e.at("train_error").get<double>();
            rec.val_error = e.at("val_error").get<double>();
            r.history.push_back(rec);
        }
    }
    r.final_train_loss = j.value("final_train_loss", 0.0);
    r.final_train_error = j.value("final_train_error", 0.0);
    r.final_val_error = j.value("final_val_error", 0.0);
    r.params_free = j.value("params_free", 0LL);
    r.params_standard = j.value("params_standard", 0LL);
    r.param_ratio = j.value("param_ratio", 0.0);
    r.multiplies_naive = j.value("multiplies_naive", 0LL);
    r.multiplies_fast = j.value("multiplies_fast", 0LL);
    r.multiply_ratio = j.value("multiply_ratio", 0.0);
    r.wall_seconds = j.value("wall_seconds", 0.0);
    return r;
}

void write_metrics_csv(const std::string& path, const RunReport& report) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw FormatError("cannot open metrics csv for writing: " + path);
    out << "schema_version,epoch,lr,train_loss,train_error,val_error\n";
    for (const auto& e : report.history)
        out << report.schema_version << ',' << e.epoch << ',' << num(e.lr) << ','
            << num(e.train_loss) << ',' << num(e.train_error) << ','
            << num(e.val_error) << '\n';
    if (!out) throw FormatError("short write on metrics csv: " + path);
}

std::string bench_csv(const std::vector<BenchRow>& rows) {
    std::ostringstream out;
    out << "schema_version,layer,class_mix,naive_multiplies,fast_multiplies,ratio,"
           "max_abs_deviation\n";
    for (const auto& r : rows)
        out << kReportSchemaVersion << ',' << r.layer << ',' << r.class_mix << ','
            << r.naive_multiplies << ',' << r.fast_multiplies << ',' << num(r.ratio)
            << ',' << num(r.max_abs_deviation) << '\n';
    return out.str();
}

std::string param_csv(const std::vector<ParamRow>& rows) {
    std::ostringstream out;
    out << "schema_version,layer,class_mix,free_weights,standard_weights,ratio\n";
    for (const auto& r : rows)
        out << kReportSchemaVersion << ',' << r.layer << ',' << r.class_mix << ','
            << r.free_weights << ',' << r.standard_weights << ',' << num(r.ratio)
            << '\n';
    return out.str();
}

std::string format_percent(double fraction) {
    double scaled = fraction * 10000.0;
    // Guard against 66.659999... style representation error just below an
    // exact hundredth before truncating.
    long long t = static_cast<long long>(std::floor(scaled + 1e-7));
    char buf[32];
    std::snprintf(buf, sizeof buf, "%lld.%02lld", t / 100, t % 100);
    return buf;
}

}  // namespace symconv
