#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "specnhmc/benchmark.hpp"
#include "specnhmc/error.hpp"

using namespace specnhmc;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("specnhmc_test_benchmark_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// A tiny sweep: 5 classes x 8 spectra, 6/2 split, one worker.
std::string small_config(const std::string& sweep) {
    return R"({"seed": 3,
      "data": {"synthetic": {"min_per_class": 6, "max_per_class": 8}},
      "balance": {"target_per_class": 8},
      "split": {"train_per_class": 6, "test_per_class": 2},
      "model": {"levels": 6, "max_iter": 30},
      "svm": {"folds": 3, "c_values": [1, 32], "gamma_values": [0.001, 0.01]},
      "output": {"dir": "out"},
      "sweep": )" + sweep + "}";
}

std::string config_error(const std::string& text) {
    try {
        parse_benchmark_config(text);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "<no throw>";
}

}  // namespace

TEST_CASE("sweep rows form the cartesian product") {
    const auto dir = scratch("cartesian");
    const auto cfg = parse_benchmark_config(small_config(
        R"({"dmp": [0.8, 1.0], "k": [2, 3], "features": ["spectrum", "mog_sign"], "classifiers": ["nn-l2"]})"));
    const auto r = run_benchmark(cfg, dir.string(), 1);
    CHECK(r.rows.size() == 8);
    for (const auto& row : r.rows) {
        CHECK(row.status == "ok");
        REQUIRE(row.accuracy.has_value());
        CHECK(*row.accuracy >= 0.0);
        CHECK(*row.accuracy <= 1.0);
    }
    CHECK(r.rows.front().feature == FeatureKind::mog_sign);  // sorted by feature name
    CHECK(r.rows.back().feature == FeatureKind::spectrum);
    CHECK(r.rows[0].k == 2);
    CHECK(r.rows[1].k == 3);
    CHECK(r.rows[0].dmp == 0.8);
    CHECK(r.rows[2].dmp == 1.0);
    CHECK(fs::exists(dir / "out" / "models" / "gmm_dmp0.800_k3.json"));
    CHECK(fs::exists(dir / "out" / "models" / "mog_dmp1.000_k2.json"));
    for (const char* f : {"report.csv", "best_k.csv", "plot_data.csv", "timings.csv", "summary.txt", "metadata.json"})
        CHECK(fs::exists(dir / "out" / f));
}

TEST_CASE("self-classification of training spectra is perfect") {
    const auto dir = scratch("self");
    auto text = small_config(R"({"dmp": [1.0], "k": [2], "features": ["spectrum"], "classifiers": ["nn-l2"]})");
    text.replace(text.find(R"("test_per_class": 2)"), 19, R"("test_per_class": 2, "test_from_train": true)");
    const auto r = run_benchmark(parse_benchmark_config(text), dir.string(), 1);
    REQUIRE(r.rows.size() == 1);
    CHECK(r.rows[0].accuracy == 1.0);
}

TEST_CASE("reruns are byte-identical and worker count does not matter") {
    const auto a = scratch("rerun_a");
    const auto b = scratch("rerun_b");
    const auto cfg = parse_benchmark_config(small_config(
        R"({"dmp": [0.7, 1.0], "k": [3], "features": ["gmm_sign", "mog_labels"], "classifiers": ["nn-cosine", "svm"]})"));
    const auto ra = run_benchmark(cfg, a.string(), 1);
    write_benchmark_outputs(ra, (a / "out").string());
    const auto rb = run_benchmark(cfg, b.string(), 3);
    write_benchmark_outputs(rb, (b / "out").string());
    CHECK(format_report_csv(ra) == format_report_csv(rb));
    CHECK(slurp(a / "out" / "report.csv") == slurp(b / "out" / "report.csv"));
    CHECK(slurp(a / "out" / "best_k.csv") == slurp(b / "out" / "best_k.csv"));
    CHECK(slurp(a / "out" / "models" / "mog_dmp0.700_k3.json") == slurp(b / "out" / "models" / "mog_dmp0.700_k3.json"));
    CHECK(ra.config_hash == rb.config_hash);
    CHECK(ra.rows.size() == 8);
}

TEST_CASE("a failing configuration is isolated in its rows") {
    const auto dir = scratch("isolate");
    auto text = small_config(R"({"dmp": [1.0], "k": [2], "features": ["spectrum"], "classifiers": ["nn-l1", "svm"]})");
    text.replace(text.find(R"("folds": 3)"), 10, R"("folds": 7)");  // more folds than training spectra per class
    const auto r = run_benchmark(parse_benchmark_config(text), dir.string(), 1);
    REQUIRE(r.rows.size() == 2);
    const auto& nn = r.rows[0].classifier == "nn" ? r.rows[0] : r.rows[1];
    const auto& svm = r.rows[0].classifier == "svm" ? r.rows[0] : r.rows[1];
    CHECK(nn.status == "ok");
    CHECK(nn.accuracy.has_value());
    CHECK(svm.status.rfind("error: ", 0) == 0);
    CHECK_FALSE(svm.accuracy.has_value());
    const auto parsed = parse_report_csv(format_report_csv(r));
    REQUIRE(parsed.size() == 2);
    CHECK(parsed[0].status == r.rows[0].status);
    CHECK(parsed[1].accuracy == r.rows[1].accuracy);
}

TEST_CASE("best over k prefers the smaller k on ties") {
    std::vector<ReportRow> rows;
    for (std::size_t k : {2, 3, 4}) {
        ReportRow r;
        r.feature = FeatureKind::mog_sign;
        r.classifier = "nn";
        r.metric = "cosine";
        r.dmp = 0.9;
        r.k = k;
        r.accuracy = k == 2 ? 0.5 : 0.75;
        rows.push_back(r);
    }
    const auto csv = format_best_k_csv(rows);
    CHECK(csv.find("mog_sign,nn,cosine,0.9,3,0.75") != std::string::npos);
    const auto plot = format_plot_data_csv(rows);
    CHECK(plot.find("series,feature_kind,classifier,metric,dmp,accuracy\n") == 0);
    CHECK(plot.find("0.9,0.75") != std::string::npos);
}

TEST_CASE("config validation names the offending key") {
    CHECK(config_error(R"({"sweep": {"dmpz": [1.0]}})").find("sweep.dmpz") != std::string::npos);
    CHECK(config_error(R"({"bogus": 1})").find("bogus") != std::string::npos);
    CHECK(config_error(R"({"sweep": {"dmp": [0.05]}})").find("sweep.dmp") != std::string::npos);
    CHECK(config_error(R"({"sweep": {"k": [1]}})").find("sweep.k") != std::string::npos);
    CHECK(config_error(R"({"sweep": {"features": ["nope"]}})").find("sweep.features") != std::string::npos);
    CHECK(config_error(R"({"model": {"levels": "nine"}})").find("model.levels") != std::string::npos);
    CHECK(config_error("{not json").find("config") != std::string::npos);
    CHECK(config_error(R"({"data": {"source": "csv"}})").find("data.path") != std::string::npos);
}

TEST_CASE("canonical config JSON round trips") {
    const auto cfg = parse_benchmark_config(small_config(R"({"dmp": [0.75], "k": [4]})"));
    const auto text = benchmark_config_to_json(cfg);
    CHECK(benchmark_config_to_json(parse_benchmark_config(text)) == text);
    const auto defaults = parse_benchmark_config("{}");
    CHECK(defaults.levels == 9);
    CHECK(defaults.dmp_values.size() == 7);
    CHECK(defaults.k_values.front() == 2);
    CHECK(defaults.k_values.back() == 10);
}
