// specnhmc: command-line front end for the wavelet / hidden Markov chain
// spectral feature pipeline. Every path is relative to --workspace.

#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "specnhmc/benchmark.hpp"
#include "specnhmc/classify.hpp"
#include "specnhmc/dataset.hpp"
#include "specnhmc/error.hpp"
#include "specnhmc/labeling.hpp"
#include "specnhmc/mog.hpp"
#include "specnhmc/nhmc.hpp"
#include "specnhmc/parallel.hpp"
#include "specnhmc/semantics.hpp"
#include "text_util.hpp"

namespace fs = std::filesystem;
using namespace specnhmc;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

std::string g_workspace = ".";

std::string in_ws(const std::string& path) {
    const fs::path p(path);
    return p.is_absolute() ? p.string() : (fs::path(g_workspace) / p).string();
}

std::optional<std::vector<std::string>> class_list(const std::string& csv) {
    if (csv.empty()) return std::nullopt;
    return detail::split_csv(csv);
}

SpectralLibrary read_lib(const std::string& path, const std::string& classes = {}) {
    return load_library(in_ws(path), class_list(classes));
}

void write_lib(const SpectralLibrary& lib, const std::string& path) { save_library(lib, in_ws(path)); }

void print_histogram(const SpectralLibrary& lib) {
    for (const auto& [id, count] : lib.class_histogram())
        std::printf("  %-24s %zu\n", lib.class_names.at(id).c_str(), count);
}

/// Directory-safe file stem for a sample id.
std::string file_stem(std::string id) {
    for (char& ch : id)
        if (ch == '/' || ch == '\\' || ch == ':') ch = '_';
    return id;
}

struct LoadedModel {
    std::optional<NhmcModel> gmm;
    std::optional<MogModel> mog;
};

LoadedModel read_model(const std::string& path) {
    const std::string text = detail::read_file(in_ws(path));
    LoadedModel m;
    if (model_kind_of(text) == "mog") {
        m.mog = mog_model_from_json(text);
    } else {
        m.gmm = model_from_json(text);
    }
    return m;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Wavelet-domain hidden Markov chain features for spectral libraries"};
    app.require_subcommand(1);
    app.add_option("-w,--workspace", g_workspace, "Directory that relative paths resolve against")
        ->capture_default_str();

    std::function<void()> action;

    // synth ---------------------------------------------------------------
    auto* synth = app.add_subcommand("synth", "Generate a synthetic library with one absorption dip per class");
    std::string synth_out, synth_truth;
    std::uint64_t synth_seed = 0;
    SyntheticOptions synth_opts;
    synth->add_option("-o,--out", synth_out, "Library CSV")->required();
    synth->add_option("--truth", synth_truth, "Ground-truth dip CSV");
    synth->add_option("--seed", synth_seed)->capture_default_str();
    synth->add_option("--centers", synth_opts.dip_centers_um, "Dip centres in um, one class each");
    synth->add_option("--min-per-class", synth_opts.min_per_class)->capture_default_str();
    synth->add_option("--max-per-class", synth_opts.max_per_class)->capture_default_str();
    synth->add_option("--noise", synth_opts.noise_sigma)->capture_default_str();
    synth->callback([&] {
        action = [&] {
            const auto syn = synthesize_library(synth_opts, synth_seed);
            write_lib(syn.library, synth_out);
            if (!synth_truth.empty()) {
                std::string t = "sample_id,class,center_um,sigma_um,depth\n";
                for (const auto& d : syn.dips) {
                    t += d.sample_id + ',' + syn.library.class_names.at(d.class_id) + ',' + detail::format_double(d.center_um) +
                         ',' + detail::format_double(d.sigma_um) + ',' + detail::format_double(d.depth) + '\n';
                }
                detail::write_file(in_ws(synth_truth), t);
            }
            std::printf("wrote %zu spectra in %zu classes\n", syn.library.size(), syn.library.class_names.size());
        };
    });

    // ingest --------------------------------------------------------------
    auto* ingest = app.add_subcommand("ingest", "Validate a library CSV and rewrite it in canonical form");
    std::string ingest_in, ingest_out, ingest_classes;
    ingest->add_option("-i,--in", ingest_in)->required();
    ingest->add_option("-o,--out", ingest_out)->required();
    ingest->add_option("--classes", ingest_classes, "Comma-separated declared class names");
    ingest->callback([&] {
        action = [&] {
            const auto lib = read_lib(ingest_in, ingest_classes);
            lib.validate();
            write_lib(lib, ingest_out);
            std::printf("%zu spectra, %zu bands\n", lib.size(), lib.grid.size());
            print_histogram(lib);
        };
    });

    // preprocess ----------------------------------------------------------
    auto* prep = app.add_subcommand("preprocess", "Resample onto a uniform grid and normalize by the maximum");
    std::string prep_in, prep_out;
    PreprocessOptions prep_opts;
    prep->add_option("-i,--in", prep_in)->required();
    prep->add_option("-o,--out", prep_out)->required();
    prep->add_option("--lo", prep_opts.lo_um)->capture_default_str();
    prep->add_option("--hi", prep_opts.hi_um)->capture_default_str();
    prep->add_option("--step", prep_opts.step_um)->capture_default_str();
    prep->callback([&] {
        action = [&] {
            const auto r = preprocess(read_lib(prep_in), prep_opts);
            write_lib(r.library, prep_out);
            for (const auto& why : r.rejected) std::fprintf(stderr, "rejected: %s\n", why.c_str());
            std::printf("%zu spectra on %zu bands, %zu rejected\n", r.library.size(), r.library.grid.size(),
                        r.rejected.size());
        };
    });

    // balance -------------------------------------------------------------
    auto* bal = app.add_subcommand("balance", "Top every class up with convex mixtures of same-class spectra");
    std::string bal_in, bal_out;
    std::size_t bal_target = 65;
    std::uint64_t bal_seed = 0;
    bal->add_option("-i,--in", bal_in)->required();
    bal->add_option("-o,--out", bal_out)->required();
    bal->add_option("--target", bal_target)->capture_default_str();
    bal->add_option("--seed", bal_seed)->capture_default_str();
    bal->callback([&] {
        action = [&] {
            const auto r = balance_classes(read_lib(bal_in), bal_target, bal_seed);
            write_lib(r.library, bal_out);
            std::printf("%zu synthesized; %s\n", r.synthesized, r.mixing_note.c_str());
        };
    });

    // split ---------------------------------------------------------------
    auto* spl = app.add_subcommand("split", "Per-class random train / test split");
    std::string spl_in, spl_train, spl_test;
    std::size_t spl_ntrain = 52, spl_ntest = 13;
    std::uint64_t spl_seed = 0;
    spl->add_option("-i,--in", spl_in)->required();
    spl->add_option("--train-out", spl_train)->required();
    spl->add_option("--test-out", spl_test)->required();
    spl->add_option("--train-per-class", spl_ntrain)->capture_default_str();
    spl->add_option("--test-per-class", spl_ntest)->capture_default_str();
    spl->add_option("--seed", spl_seed)->capture_default_str();
    spl->callback([&] {
        action = [&] {
            const auto [train, test] = split_train_test(read_lib(spl_in), spl_ntrain, spl_ntest, spl_seed);
            write_lib(train, spl_train);
            write_lib(test, spl_test);
        };
    });

    // blur ----------------------------------------------------------------
    auto* blur = app.add_subcommand("blur", "Simulate spatial mixing with a 3x3 Gaussian kernel of given DMP");
    std::string blur_in, blur_out, blur_layout;
    double blur_dmp = 1.0;
    std::uint64_t blur_seed = 0;
    blur->add_option("-i,--in", blur_in)->required();
    blur->add_option("-o,--out", blur_out)->required();
    blur->add_option("--dmp", blur_dmp, "Dominant material percentage in (1/9, 1]")->required();
    blur->add_option("--seed", blur_seed)->capture_default_str();
    blur->add_option("--layout", blur_layout, "CSV of the grid placement");
    blur->callback([&] {
        action = [&] {
            const auto lib = read_lib(blur_in);
            const auto r = blur_library(lib, blur_dmp, blur_seed);
            write_lib(r.library, blur_out);
            if (!blur_layout.empty()) {
                std::string t = "row,col,sample_id\n";
                for (std::size_t cell = 0; cell < r.layout.cell_source.size(); ++cell) {
                    t += std::to_string(cell / r.layout.cols) + ',' + std::to_string(cell % r.layout.cols) + ',' +
                         lib.spectra[r.layout.cell_source[cell]].sample_id + '\n';
                }
                detail::write_file(in_ws(blur_layout), t);
            }
            std::printf("kernel variance %s, center weight %s\n", detail::format_double(r.kernel.variance).c_str(),
                        detail::format_double(r.kernel.center()).c_str());
        };
    });

    // train ---------------------------------------------------------------
    auto* train = app.add_subcommand("train", "Fit one GMM hidden Markov chain per wavelength");
    std::string train_in, train_out, train_wavelet = "haar";
    std::size_t train_k = 3, train_levels = 9;
    TrainConfig train_cfg;
    train_cfg.workers = default_workers();
    train->add_option("-i,--in", train_in)->required();
    train->add_option("-o,--out", train_out)->required();
    train->add_option("-k,--states", train_k)->capture_default_str();
    train->add_option("-L,--levels", train_levels)->capture_default_str();
    train->add_option("--wavelet", train_wavelet)->capture_default_str();
    train->add_option("--seed", train_cfg.em.seed)->capture_default_str();
    train->add_option("--max-iter", train_cfg.em.max_iter)->capture_default_str();
    train->add_option("--tol", train_cfg.em.tol)->capture_default_str();
    train->callback([&] {
        action = [&] {
            const auto lib = read_lib(train_in);
            const Wavelet w = wavelet_from_string(train_wavelet);
            std::vector<CoeffMatrix> coeffs;
            for (const auto& s : lib.spectra) coeffs.push_back(uwt(s.reflectance, train_levels, w));
            auto model = train_model(coeffs, train_k, train_cfg);
            model.grid = lib.grid;
            detail::write_file(in_ws(train_out), model_to_json(model));
            for (const auto& warn : model.warnings) std::fprintf(stderr, "warning: %s\n", warn.c_str());
            std::printf("trained %zu chains, total log-likelihood %s\n", model.bands(),
                        detail::format_double(model.total_log_likelihood).c_str());
        };
    });

    // collapse ------------------------------------------------------------
    auto* col = app.add_subcommand("collapse", "Collapse a GMM model into the binary MOG model");
    std::string col_in, col_out;
    col->add_option("-m,--model", col_in)->required();
    col->add_option("-o,--out", col_out)->required();
    col->callback([&] {
        action = [&] {
            const auto mog = collapse_model(model_from_json(detail::read_file(in_ws(col_in))));
            detail::write_file(in_ws(col_out), mog_model_to_json(mog));
            for (const auto& warn : mog.warnings) std::fprintf(stderr, "warning: %s\n", warn.c_str());
        };
    });

    // label ---------------------------------------------------------------
    auto* lab = app.add_subcommand("label", "Viterbi state labels of every spectrum (GMM or MOG model)");
    std::string lab_model, lab_in, lab_out;
    bool lab_sign = false;
    lab->add_option("-m,--model", lab_model)->required();
    lab->add_option("-i,--in", lab_in)->required();
    lab->add_option("-o,--out-dir", lab_out, "One <sample_id>.csv per spectrum")->required();
    lab->add_flag("--sign", lab_sign, "Multiply labels by the sign of the Haar coefficient");
    lab->callback([&] {
        action = [&] {
            const auto model = read_model(lab_model);
            const auto lib = read_lib(lab_in);
            for (const auto& s : lib.spectra) {
                LabelArray labels;
                CoeffMatrix coeffs;
                if (model.mog) {
                    check_on_grid(s, model.mog->grid);
                    coeffs = uwt(s.reflectance, model.mog->levels, model.mog->wavelet);
                    labels = label_coeffs_mog(coeffs, *model.mog);
                } else {
                    check_on_grid(s, model.gmm->grid);
                    coeffs = uwt(s.reflectance, model.gmm->levels, model.gmm->wavelet);
                    labels = label_coeffs(coeffs, *model.gmm);
                }
                if (lab_sign) labels = add_signs(labels, coeffs);
                detail::write_file(in_ws(lab_out) + "/" + file_stem(s.sample_id) + ".csv", format_labels_csv(labels));
            }
            std::printf("labeled %zu spectra\n", lib.size());
        };
    });

    // classify ------------------------------------------------------------
    auto* cls = app.add_subcommand("classify", "Train on one library, classify another, report accuracy");
    std::string cls_train, cls_test, cls_feature = "spectrum", cls_classifier = "nn-cosine", cls_model, cls_pred;
    std::size_t cls_levels = 9;
    std::uint64_t cls_seed = 0;
    cls->add_option("--train", cls_train)->required();
    cls->add_option("--test", cls_test)->required();
    cls->add_option("-f,--feature", cls_feature)->capture_default_str();
    cls->add_option("-c,--classifier", cls_classifier, "nn-l1, nn-l2, nn-cosine or svm")->capture_default_str();
    cls->add_option("-m,--model", cls_model, "GMM model (gmm_* features) or MOG / GMM model (mog_* features)");
    cls->add_option("-L,--levels", cls_levels, "Scales for coeffs / rivard features without a model")
        ->capture_default_str();
    cls->add_option("--seed", cls_seed, "Cross-validation seed for svm")->capture_default_str();
    cls->add_option("--predictions", cls_pred, "CSV of per-sample predictions");
    cls->callback([&] {
        action = [&] {
            const FeatureKind kind = feature_kind_from_string(cls_feature);
            const ClassifierSpec spec = classifier_from_string(cls_classifier);
            LoadedModel model;
            if (!cls_model.empty()) model = read_model(cls_model);
            if ((kind == FeatureKind::mog_labels || kind == FeatureKind::mog_sign) && model.gmm && !model.mog)
                model.mog = collapse_model(*model.gmm);
            if (is_nhmc_feature(kind) && cls_model.empty())
                throw ValidationError("feature '" + cls_feature + "' needs --model");
            std::size_t levels = cls_levels;
            Wavelet wavelet = Wavelet::haar;
            if (model.gmm) {
                levels = model.gmm->levels;
                wavelet = model.gmm->wavelet;
            } else if (model.mog) {
                levels = model.mog->levels;
                wavelet = model.mog->wavelet;
            }
            auto features = [&](const SpectralLibrary& lib) {
                std::vector<CoeffMatrix> coeffs;
                for (const auto& s : lib.spectra) coeffs.push_back(uwt(s.reflectance, levels, wavelet));
                return extract_features(kind, lib, coeffs, model.gmm ? &*model.gmm : nullptr,
                                        model.mog ? &*model.mog : nullptr);
            };
            const auto train_lib = read_lib(cls_train);
            auto test_lib = read_lib(cls_test);
            // Align the test library's class ids with the training ids by name.
            std::map<std::string, int> train_ids;
            for (const auto& [id, name] : train_lib.class_names) train_ids[name] = id;
            std::map<int, std::string> aligned;
            for (auto& s : test_lib.spectra) {
                const std::string& name = test_lib.class_names.at(s.class_id);
                const auto it = train_ids.find(name);
                if (it == train_ids.end())
                    throw ValidationError("test sample '" + s.sample_id + "' has class '" + name + "' absent from training");
                aligned[it->second] = name;
                s.class_id = it->second;
            }
            test_lib.class_names = aligned;
            SvmOptions svm;
            svm.seed = cls_seed;
            const auto out = classify_features(features(train_lib), features(test_lib), spec, svm);
            if (!cls_pred.empty()) {
                std::string t = "sample_id,truth,predicted\n";
                for (std::size_t i = 0; i < test_lib.size(); ++i) {
                    t += test_lib.spectra[i].sample_id + ',' + test_lib.class_names.at(test_lib.spectra[i].class_id) + ',' +
                         train_lib.class_names.at(out.predictions[i]) + '\n';
                }
                detail::write_file(in_ws(cls_pred), t);
            }
            std::printf("accuracy %s (%zu/%zu)\n", detail::format_double(out.accuracy.overall).c_str(),
                        out.accuracy.correct, out.accuracy.total);
            for (const auto& [id, acc] : out.accuracy.per_class)
                std::printf("  %-24s %s\n", train_lib.class_names.at(id).c_str(), detail::format_double(acc).c_str());
            if (out.svm) {
                std::printf("svm C=%s gamma=%s cv accuracy %s\n", detail::format_double(out.svm->c).c_str(),
                            detail::format_double(out.svm->gamma).c_str(),
                            detail::format_double(out.svm->cv_accuracy).c_str());
            }
        };
    });

    // semantics -----------------------------------------------------------
    auto* sem = app.add_subcommand("semantics", "Absorption bands and slope coloring from signed MOG labels");
    std::string sem_model, sem_in, sem_out;
    sem->add_option("-m,--model", sem_model, "MOG model, or a GMM model to collapse")->required();
    sem->add_option("-i,--in", sem_in)->required();
    sem->add_option("-o,--out-dir", sem_out, "<sample_id>.json and <sample_id>_segments.csv per spectrum")->required();
    sem->callback([&] {
        action = [&] {
            auto model = read_model(sem_model);
            if (!model.mog) model.mog = collapse_model(*model.gmm);
            const auto lib = read_lib(sem_in);
            for (const auto& s : lib.spectra) {
                check_on_grid(s, model.mog->grid);
                const auto coeffs = uwt(s.reflectance, model.mog->levels, model.mog->wavelet);
                const auto summary = summarize(add_signs(label_coeffs_mog(coeffs, *model.mog), coeffs), lib.grid);
                const std::string stem = in_ws(sem_out) + "/" + file_stem(s.sample_id);
                detail::write_file(stem + ".json", summary_to_json(summary, s.sample_id));
                detail::write_file(stem + "_segments.csv", format_colored_segments(summary, s));
            }
            std::printf("summarized %zu spectra\n", lib.size());
        };
    });

    // run -----------------------------------------------------------------
    auto* run = app.add_subcommand("run", "Run a benchmark sweep from a JSON config");
    std::string run_config;
    run->add_option("-c,--config", run_config)->required();
    run->callback([&] {
        action = [&] {
            const auto config = load_benchmark_config(in_ws(run_config));
            const auto report = run_benchmark(config, g_workspace, default_workers());
            std::fputs(format_summary_text(report).c_str(), stdout);
        };
    });

    // export-plot-data ----------------------------------------------------
    auto* plot = app.add_subcommand("export-plot-data", "(dmp, accuracy) series per feature from a report CSV");
    std::string plot_in, plot_out;
    plot->add_option("-r,--report", plot_in)->required();
    plot->add_option("-o,--out", plot_out, "Output CSV (stdout when omitted)");
    plot->callback([&] {
        action = [&] {
            const auto text = format_plot_data_csv(parse_report_csv(detail::read_file(in_ws(plot_in))));
            if (plot_out.empty()) {
                std::fputs(text.c_str(), stdout);
            } else {
                detail::write_file(in_ws(plot_out), text);
            }
        };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }
    try {
        if (action) action();
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitRuntime;
    }
    return 0;
}
