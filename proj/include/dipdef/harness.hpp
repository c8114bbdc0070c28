#ifndef DIPDEF_HARNESS_HPP
#define DIPDEF_HARNESS_HPP

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>
#include <opencv2/imgproc.hpp>

#include "dipdef/adapters.hpp"
#include "dipdef/attacks.hpp"
#include "dipdef/dataset.hpp"
#include "dipdef/image_io.hpp"
#include "dipdef/reconstruct.hpp"
#include "dipdef/report.hpp"

namespace dipdef {

// ---------------------------------------------------------------------------
// AdversarialBatch persistence: a directory of raw tensors + manifest.json,
// so attacks and defenses can run as separate CLI invocations.
// ---------------------------------------------------------------------------

inline void save_batch(const AdversarialBatch& batch, const std::vector<std::string>& ids,
                       const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    nlohmann::json manifest;
    manifest["method"] = to_string(batch.attack.method);
    manifest["epsilon_255"] = batch.attack.epsilon * 255.0f;
    manifest["steps"] = batch.attack.steps;
    manifest["step_size_255"] = batch.attack.step_size * 255.0f;
    manifest["random_start"] = batch.attack.random_start;
    manifest["momentum_decay"] = batch.attack.momentum_decay;
    manifest["seed"] = batch.attack.rng_seed;
    for (std::size_t i = 0; i < batch.adversarials.size(); ++i) {
        const std::string stem = ids[i];
        save_tensor(batch.adversarials[i], (fs::path(dir) / (stem + "_adv.ften")).string());
        save_tensor(batch.originals[i], (fs::path(dir) / (stem + "_orig.ften")).string());
        manifest["images"].push_back({{"id", stem},
                                      {"label", batch.true_labels[i]},
                                      {"adversarial", stem + "_adv.ften"},
                                      {"original", stem + "_orig.ften"}});
    }
    std::ofstream out(fs::path(dir) / "manifest.json");
    if (!out) throw InputError("cannot write manifest in " + dir);
    out << manifest.dump(2) << '\n';
}

inline std::pair<AdversarialBatch, std::vector<std::string>> load_batch(const std::string& dir) {
    namespace fs = std::filesystem;
    std::ifstream in(fs::path(dir) / "manifest.json");
    if (!in) throw InputError("cannot read manifest in " + dir);
    nlohmann::json manifest = nlohmann::json::parse(in);
    AdversarialBatch batch;
    batch.attack.method = attack_method_from_string(manifest.at("method").get<std::string>());
    batch.attack.epsilon = manifest.at("epsilon_255").get<float>() / 255.0f;
    batch.attack.steps = manifest.at("steps").get<int>();
    batch.attack.step_size = manifest.at("step_size_255").get<float>() / 255.0f;
    batch.attack.random_start = manifest.at("random_start").get<bool>();
    batch.attack.momentum_decay = manifest.at("momentum_decay").get<float>();
    batch.attack.rng_seed = manifest.at("seed").get<std::uint64_t>();
    std::vector<std::string> ids;
    for (const auto& entry : manifest.at("images")) {
        ids.push_back(entry.at("id").get<std::string>());
        batch.true_labels.push_back(entry.at("label").get<int>());
        batch.adversarials.push_back(
            load_tensor((fs::path(dir) / entry.at("adversarial").get<std::string>()).string()));
        batch.originals.push_back(
            load_tensor((fs::path(dir) / entry.at("original").get<std::string>()).string()));
    }
    return {std::move(batch), std::move(ids)};
}

// ---------------------------------------------------------------------------
// Experiment orchestration
// ---------------------------------------------------------------------------

struct ExperimentConfig {
    std::string dataset_dir;          // empty -> built-in procedural shapes set
    std::string label_file = "labels.csv";
    int sample_count = 100;
    int resize_to = 0;
    std::string adapter_name = "small-cnn";
    std::string eval_adapter_name;    // optional cross-model evaluation
    GeneratorConfig generator;
    DetectionConfig detection;
    ReconstructionConfig reconstruction;
    SsimConfig ssim_cfg;
    std::vector<std::pair<std::string, AttackConfig>> attacks;  // (tag, config)
    std::string output_dir = "out";
    std::uint64_t seed = 0;
    bool diagnostics = false;
    KeyValueConfig raw;

    static ExperimentConfig from_config(const KeyValueConfig& kv) {
        ExperimentConfig c;
        c.raw = kv;
        c.dataset_dir = kv.get("dataset.dir", "");
        c.label_file = kv.get("dataset.labels", c.label_file);
        c.sample_count = static_cast<int>(kv.get_int("dataset.sample_count", c.sample_count));
        c.resize_to = static_cast<int>(kv.get_int("dataset.resize_to", c.resize_to));
        c.adapter_name = kv.get("adapter.name", c.adapter_name);
        c.eval_adapter_name = kv.get("eval_adapter.name", "");
        c.generator = GeneratorConfig::from_config(kv);
        c.detection = DetectionConfig::from_config(kv);
        c.reconstruction = ReconstructionConfig::from_config(kv);
        c.ssim_cfg.window_size = static_cast<int>(kv.get_int("ssim.window_size", c.ssim_cfg.window_size));
        c.output_dir = kv.get("output.dir", c.output_dir);
        c.seed = static_cast<std::uint64_t>(kv.get_int("seed", 0));
        c.diagnostics = kv.get_bool("output.diagnostics", false);
        std::stringstream names(kv.get("attacks", ""));
        std::string name;
        while (std::getline(names, name, ',')) {
            if (name.empty()) continue;
            c.attacks.emplace_back(name, AttackConfig::from_config(kv, "attack." + name + "."));
        }
        if (c.sample_count < 1) throw ConfigError("dataset.sample_count must be >= 1");
        return c;
    }

    LabeledDataset load_data() const {
        if (dataset_dir.empty()) return shapes::make_dataset(sample_count, derive_seed(seed, 0xda7a));
        return load_dataset(dataset_dir, label_file, sample_count, resize_to);
    }

    std::map<std::string, std::string> snapshot() const {
        std::map<std::string, std::string> snap = raw.entries();
        snap["dataset.sample_count"] = std::to_string(sample_count);
        snap["seed"] = std::to_string(seed);
        return snap;
    }

    // Content hash of everything that affects per-image results, used to key
    // the resume cache.
    std::uint64_t result_hash() const {
        std::uint64_t h = 1469598103934665603ull;
        auto mix = [&h](const std::string& s) {
            for (const char ch : s) h = (h ^ static_cast<unsigned char>(ch)) * 1099511628211ull;
        };
        for (const auto& [k, v] : snapshot()) {
            mix(k);
            mix("=");
            mix(v);
            mix(";");
        }
        return h;
    }
};

using ProgressFn = std::function<void(const std::string&)>;

namespace detail {

inline std::uint64_t string_stream_id(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (const char ch : s) h = (h ^ static_cast<unsigned char>(ch)) * 1099511628211ull;
    return h;
}

}  // namespace detail

// Runs the full evaluation protocol: per image, clean prediction, then per
// attack: craft adversarial, score undefended, run the defense, score
// defended. Finished (image, condition) cells are cached under
// output_dir/cache keyed by the config hash, so interrupted runs resume.
inline EvaluationReport run_experiment(const ExperimentConfig& cfg, const ProgressFn& progress = {}) {
    namespace fs = std::filesystem;
    register_builtin_adapters();
    auto adapter = AdapterRegistry::instance().create(cfg.adapter_name, cfg.raw, "adapter.");
    std::unique_ptr<ClassifierAdapter> eval_adapter;
    if (!cfg.eval_adapter_name.empty())
        eval_adapter = AdapterRegistry::instance().create(cfg.eval_adapter_name, cfg.raw, "eval_adapter.");

    const LabeledDataset data = cfg.load_data();
    const std::uint64_t chash = cfg.result_hash();
    const fs::path cache_dir = fs::path(cfg.output_dir) / "cache";
    fs::create_directories(cache_dir);

    auto cached = [&](const std::string& key) -> std::optional<ReportRow> {
        const fs::path p = cache_dir / (key + ".json");
        if (!fs::exists(p)) return std::nullopt;
        std::ifstream in(p);
        nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
        if (j.is_discarded() || j.value("config_hash", 0ull) != chash) return std::nullopt;
        return row_from_json(j.at("row"));
    };
    auto store = [&](const std::string& key, const ReportRow& row) {
        nlohmann::json j{{"config_hash", chash}, {"row", row_to_json(row)}};
        std::ofstream out(cache_dir / (key + ".json"));
        out << j.dump() << '\n';
    };

    auto defend_one = [&](const Tensor& input, const Tensor& clean, std::uint64_t run_seed,
                          ReportRow& row) {
        GeneratorConfig gen = cfg.generator;
        gen.rng_seed = run_seed;
        const auto t0 = std::chrono::steady_clock::now();
        DefenseResult res = defend(input, *adapter, gen, cfg.detection, cfg.reconstruction,
                                   eval_adapter.get(), cfg.diagnostics, cfg.ssim_cfg);
        row.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        row.defended_pred = res.predicted_label;
        row.ssim_recon_vs_clean = ssim(res.reconstructed, clean, cfg.ssim_cfg);
        row.ssim_recon_vs_input = ssim(res.reconstructed, input, cfg.ssim_cfg);
        row.pairs_used = res.pairs_used;
        row.used_fallback = res.used_fallback;
        if (res.diagnostics) {
            row.alphas = res.diagnostics->alphas;
            row.gaps = res.diagnostics->gaps;
        }
    };

    ClassifierAdapter& undefended_scorer = eval_adapter ? *eval_adapter : *adapter;

    EvaluationReport report;
    report.config_snapshot = cfg.snapshot();
    for (std::size_t i = 0; i < data.images.size(); ++i) {
        const std::string& id = data.ids[i];
        const Tensor& clean = data.images[i];

        std::vector<std::pair<std::string, Tensor>> conditions;
        conditions.emplace_back("clean", clean);
        for (const auto& [tag, atk_template] : cfg.attacks) {
            const std::string key = id + "_" + tag;
            AttackConfig atk = atk_template;
            atk.rng_seed = derive_seed(cfg.seed, detail::string_stream_id(key));
            if (atk.method == AttackMethod::BPDA_PGD) {
                auto defense = [&](const Tensor& x) {
                    GeneratorConfig gen = cfg.generator;
                    gen.rng_seed = derive_seed(cfg.seed, detail::string_stream_id(key + "_bpda"));
                    return defend(x, *adapter, gen, cfg.detection, cfg.reconstruction, nullptr, false,
                                  cfg.ssim_cfg)
                        .reconstructed;
                };
                if (!cached(key)) {  // BPDA crafting is expensive; skip if the row is cached
                    conditions.emplace_back(tag, bpda_attack(*adapter, defense, clean, data.labels[i], atk));
                } else {
                    conditions.emplace_back(tag, clean);  // placeholder, row comes from cache
                }
            } else {
                conditions.emplace_back(tag, run_attack(*adapter, clean, data.labels[i], atk));
            }
        }

        for (const auto& [tag, input] : conditions) {
            const std::string key = id + "_" + tag;
            if (auto hit = cached(key)) {
                report.rows.push_back(*hit);
                continue;
            }
            ReportRow row;
            row.image_id = id;
            row.condition = tag;
            row.true_label = data.labels[i];
            row.undefended_pred = argmax_label(undefended_scorer.predict_one(input));
            defend_one(input, clean, derive_seed(cfg.seed, detail::string_stream_id(key + "_dip")), row);
            store(key, row);
            report.rows.push_back(std::move(row));
            if (progress) progress(key);
        }
    }
    return report;
}

// ---------------------------------------------------------------------------
// Plot emission (line plots rendered with OpenCV, CSV sidecar with the data)
// ---------------------------------------------------------------------------

struct CurveSeries {
    std::string name;
    std::vector<double> ys;
};

enum class CurveKind { bpda_iterations, epsilon_sweep, param_sensitivity };

inline CurveKind curve_kind_from_string(const std::string& s) {
    if (s == "bpda_iterations") return CurveKind::bpda_iterations;
    if (s == "epsilon_sweep") return CurveKind::epsilon_sweep;
    if (s == "param_sensitivity") return CurveKind::param_sensitivity;
    throw ConfigError("unknown curve kind: " + s);
}

namespace detail {

inline void render_line_plot(const std::vector<double>& xs, const std::vector<CurveSeries>& series,
                             const std::string& x_label, const std::string& title,
                             const std::string& png_path) {
    const int W = 900, H = 600, ml = 80, mr = 30, mt = 50, mb = 60;
    cv::Mat canvas(H, W, CV_8UC3, cv::Scalar(255, 255, 255));
    double xmin = xs.front(), xmax = xs.back();
    if (xmax == xmin) xmax = xmin + 1.0;
    auto px = [&](double x) { return ml + static_cast<int>((x - xmin) / (xmax - xmin) * (W - ml - mr)); };
    auto py = [&](double y) { return H - mb - static_cast<int>(y * (H - mt - mb)); };

    cv::line(canvas, {ml, H - mb}, {W - mr, H - mb}, cv::Scalar(0, 0, 0), 1);
    cv::line(canvas, {ml, mt}, {ml, H - mb}, cv::Scalar(0, 0, 0), 1);
    for (int i = 0; i <= 10; ++i) {
        const double y = i / 10.0;
        cv::line(canvas, {ml - 4, py(y)}, {ml, py(y)}, cv::Scalar(0, 0, 0), 1);
        cv::putText(canvas, cv::format("%.1f", y), {8, py(y) + 4}, cv::FONT_HERSHEY_SIMPLEX, 0.45,
                    cv::Scalar(0, 0, 0));
    }
    for (double x : xs) {
        cv::line(canvas, {px(x), H - mb}, {px(x), H - mb + 4}, cv::Scalar(0, 0, 0), 1);
        cv::putText(canvas, cv::format("%g", x), {px(x) - 12, H - mb + 22}, cv::FONT_HERSHEY_SIMPLEX,
                    0.45, cv::Scalar(0, 0, 0));
    }
    cv::putText(canvas, x_label, {W / 2 - 40, H - 15}, cv::FONT_HERSHEY_SIMPLEX, 0.55, cv::Scalar(0, 0, 0));
    cv::putText(canvas, title, {ml, 28}, cv::FONT_HERSHEY_SIMPLEX, 0.65, cv::Scalar(0, 0, 0), 2);

    const std::vector<cv::Scalar> palette = {{180, 60, 40},  {40, 110, 200}, {60, 160, 60},
                                             {150, 60, 160}, {30, 170, 200}, {90, 90, 90}};
    for (std::size_t s = 0; s < series.size(); ++s) {
        const cv::Scalar color = palette[s % palette.size()];
        for (std::size_t i = 0; i + 1 < xs.size(); ++i)
            cv::line(canvas, {px(xs[i]), py(series[s].ys[i])}, {px(xs[i + 1]), py(series[s].ys[i + 1])},
                     color, 2);
        for (std::size_t i = 0; i < xs.size(); ++i)
            cv::circle(canvas, {px(xs[i]), py(series[s].ys[i])}, 4, color, cv::FILLED);
        cv::putText(canvas, series[s].name, {W - mr - 220, mt + 22 * static_cast<int>(s) + 10},
                    cv::FONT_HERSHEY_SIMPLEX, 0.5, color, 2);
    }
    if (!cv::imwrite(png_path, canvas)) throw InputError("cannot write plot: " + png_path);
}

}  // namespace detail

// Accuracy-vs-swept-quantity line plots, one series per (attack, defense
// state), written as PNG plus the underlying CSV.
inline void emit_curves(const std::vector<std::pair<double, EvaluationReport>>& reports, CurveKind kind,
                        const std::string& path_prefix) {
    if (reports.empty()) throw InputError("emit_curves: no reports");
    std::vector<double> xs;
    std::vector<std::string> keys;
    for (const auto& [name, agg] : reports.front().second.aggregates()) keys.push_back(name);
    std::vector<CurveSeries> series;
    for (const std::string& key : keys) {
        series.push_back({key + " defended", {}});
        series.push_back({key + " undefended", {}});
    }
    for (const auto& [x, rep] : reports) {
        const auto agg = rep.aggregates();
        std::vector<std::string> these;
        for (const auto& [name, a] : agg) these.push_back(name);
        if (these != keys) throw InputError("emit_curves: reports do not share the same conditions");
        xs.push_back(x);
        for (std::size_t k = 0; k < keys.size(); ++k) {
            series[2 * k].ys.push_back(agg.at(keys[k]).defended_acc);
            series[2 * k + 1].ys.push_back(agg.at(keys[k]).undefended_acc);
        }
    }
    for (std::size_t i = 1; i < xs.size(); ++i)
        if (xs[i] <= xs[i - 1]) throw InputError("emit_curves: sweep axis must be strictly increasing");

    namespace fs = std::filesystem;
    const fs::path csv_path = path_prefix + ".csv";
    if (csv_path.has_parent_path()) fs::create_directories(csv_path.parent_path());
    std::ofstream csv(csv_path);
    csv << "x";
    for (const auto& s : series) csv << ',' << s.name;
    csv << '\n';
    for (std::size_t i = 0; i < xs.size(); ++i) {
        csv << xs[i];
        for (const auto& s : series) csv << ',' << s.ys[i];
        csv << '\n';
    }

    const char* label = kind == CurveKind::bpda_iterations ? "attack iterations"
                        : kind == CurveKind::epsilon_sweep ? "epsilon (0-255)"
                                                           : "parameter value";
    detail::render_line_plot(xs, series, label, "accuracy", path_prefix + ".png");
}

// Renders the decision-trace confidence curves with cross-boundary markers
// plus a strip of the reconstruction and on-boundary images.
inline void emit_defense_visualization(const DefenseDiagnostics& diag, const Tensor& reconstructed,
                                       const std::string& path_prefix) {
    if (diag.decisions.entries.empty())
        throw InputError("emit_defense_visualization: diagnostics are empty");
    namespace fs = std::filesystem;
    const fs::path p = path_prefix + "_trace.png";
    if (p.has_parent_path()) fs::create_directories(p.parent_path());

    const auto& entries = diag.decisions.entries;
    const int num_classes = static_cast<int>(entries.front().confidences.size());
    std::vector<double> xs;
    for (const auto& e : entries) xs.push_back(e.iteration);
    std::vector<CurveSeries> series;
    for (int c = 0; c < num_classes; ++c) {
        CurveSeries s{"class " + std::to_string(c), {}};
        for (const auto& e : entries) s.ys.push_back(e.confidences[static_cast<std::size_t>(c)]);
        series.push_back(std::move(s));
    }
    {
        CurveSeries q{"quality v", {}};
        for (const auto& e : entries) q.ys.push_back(std::max(0.0f, e.quality));
        series.push_back(std::move(q));
    }
    const int W = 900, H = 600;
    (void)W;
    (void)H;
    detail::render_line_plot(xs, series, "DIP iteration", "decision trace", p.string());

    // overlay cross-boundary markers
    cv::Mat canvas = cv::imread(p.string());
    const double xmin = xs.front(), xmax = std::max(xs.back(), xs.front() + 1.0);
    for (int t : diag.pair_indices) {
        const int x = 80 + static_cast<int>((t - xmin) / (xmax - xmin) * (900 - 80 - 30));
        cv::line(canvas, {x, 50}, {x, 600 - 60}, cv::Scalar(0, 0, 255), 1, cv::LINE_8);
    }
    cv::imwrite(p.string(), canvas);

    // image strip: reconstruction followed by the on-boundary images
    std::vector<Tensor> strip{reconstructed};
    for (const Tensor& t : diag.on_boundary) strip.push_back(t);
    const int side = 96;
    cv::Mat row(side, side * static_cast<int>(strip.size()), CV_8UC3, cv::Scalar(255, 255, 255));
    for (std::size_t i = 0; i < strip.size(); ++i) {
        cv::Mat cell(strip[i].h, strip[i].w, CV_8UC3);
        for (int y = 0; y < strip[i].h; ++y)
            for (int x = 0; x < strip[i].w; ++x)
                cell.at<cv::Vec3b>(y, x) =
                    cv::Vec3b(static_cast<uchar>(strip[i].at(2, y, x) * 255),
                              static_cast<uchar>(strip[i].at(1, y, x) * 255),
                              static_cast<uchar>(strip[i].at(0, y, x) * 255));
        cv::Mat resized;
        cv::resize(cell, resized, cv::Size(side, side), 0, 0, cv::INTER_NEAREST);
        resized.copyTo(row(cv::Rect(static_cast<int>(i) * side, 0, side, side)));
    }
    cv::imwrite(path_prefix + "_strip.png", row);
}

}  // namespace dipdef

#endif
