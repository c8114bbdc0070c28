// Command line front end: craft attacks, defend single images, run the full
// evaluation protocol, sweep a parameter, and render visualizations.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dipdef/harness.hpp"

namespace {

using namespace dipdef;

KeyValueConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
    KeyValueConfig kv = path.empty() ? KeyValueConfig{} : KeyValueConfig::parse_file(path);
    for (const std::string& o : overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos) throw ConfigError("override must be key=value: " + o);
        kv.set(o.substr(0, eq), o.substr(eq + 1));
    }
    // DIPDEF_OUTPUT_ROOT relocates relative cache/output directories
    if (const char* root = std::getenv("DIPDEF_OUTPUT_ROOT")) {
        const std::string dir = kv.get("output.dir", "out");
        if (!dir.empty() && dir.front() != '/')
            kv.set("output.dir", std::string(root) + "/" + dir);
    }
    return kv;
}

Tensor load_any_image(const std::string& path) {
    if (path.size() > 5 && path.substr(path.size() - 5) == ".ften") return load_tensor(path);
    return load_image(path);
}

int cmd_make_dataset(const std::string& out_dir, int count, std::uint64_t seed) {
    save_dataset(shapes::make_dataset(count, seed), out_dir);
    std::cout << "wrote " << count << " images to " << out_dir << "\n";
    return 0;
}

// Bilinear upsample of a coarse 8x8 perturbation grid to image size.
Tensor upsample_grid8(const Tensor& g) {
    Tensor up(3, shapes::kSide, shapes::kSide);
    const float scale = 7.0f / static_cast<float>(shapes::kSide - 1);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < up.h; ++y)
            for (int x = 0; x < up.w; ++x) {
                const float fy = y * scale, fx = x * scale;
                const int y0 = static_cast<int>(fy), x0 = static_cast<int>(fx);
                const int y1 = std::min(y0 + 1, 7), x1 = std::min(x0 + 1, 7);
                const float wy = fy - y0, wx = fx - x0;
                up.at(c, y, x) = (1 - wy) * ((1 - wx) * g.at(c, y0, x0) + wx * g.at(c, y0, x1)) +
                                 wy * ((1 - wx) * g.at(c, y1, x0) + wx * g.at(c, y1, x1));
            }
    return up;
}

// PGD restricted to smooth perturbations (the delta lives on an 8x8 grid).
// Used for adversarial training: it hardens the low-frequency bands that
// carry the figure while leaving the pixel-scale texture band untouched,
// so attacks within the usual budgets are pushed into high frequencies --
// the band a deep image prior fits last.
Tensor smooth_pgd(nn::SmallCnn& net, const Tensor& x, int label, float eps, float step, int steps) {
    Tensor grid(3, 8, 8, 0.0f);
    for (int s = 0; s < steps; ++s) {
        Tensor xin = x;
        const Tensor d = upsample_grid8(grid);
        for (std::size_t j = 0; j < xin.size(); ++j)
            xin.v[j] = std::clamp(xin.v[j] + d.v[j], 0.0f, 1.0f);
        std::vector<float> dlogits;
        nn::softmax_cross_entropy(net.logits(xin), label, dlogits);
        const Tensor gin = net.backward(dlogits);
        for (int c = 0; c < 3; ++c)
            for (int gy = 0; gy < 8; ++gy)
                for (int gx = 0; gx < 8; ++gx) {
                    float acc = 0.0f;
                    for (int y = gy * 4; y < gy * 4 + 4; ++y)
                        for (int x2 = gx * 4; x2 < gx * 4 + 4; ++x2) acc += gin.at(c, y, x2);
                    float& v = grid.at(c, gy, gx);
                    v = std::clamp(v + step * (acc > 0 ? 1.0f : -1.0f), -eps, eps);
                }
    }
    Tensor out = x;
    const Tensor d = upsample_grid8(grid);
    for (std::size_t j = 0; j < out.size(); ++j)
        out.v[j] = std::clamp(out.v[j] + d.v[j], 0.0f, 1.0f);
    return out;
}

// Victim training recipe. Besides plain supervised training this adds, in
// order of importance for the defense evaluation:
//  - faint-texture / blurred copies, so partially reconstructed images that
//    appear mid-way through a generator trace are classified correctly;
//  - smooth-grid adversarial training (see smooth_pgd);
//  - a fine-tuning pass on actual intermediate reconstructions from
//    generator traces of clean training images.
int cmd_train_victim(const std::string& out_path, int train_count, int test_count, int epochs,
                     int batch, float lr, std::uint64_t seed) {
    LabeledDataset train = shapes::make_dataset(train_count, derive_seed(seed, 1));
    const LabeledDataset test = shapes::make_dataset(test_count, derive_seed(seed, 2));
    const int n_base = static_cast<int>(train.images.size());

    Rng aug_rng(derive_seed(seed, 4));
    for (int i = 0; i < n_base * 3 / 4; ++i) {
        const int label = i % shapes::kNumClasses;
        const float amp = shapes::kTextureAmp * aug_rng.uniform(0.15f, 0.7f);
        Tensor img = shapes::make_image(label, derive_seed(derive_seed(seed, 5), i), amp);
        if (aug_rng.uniform() < 0.5f) shapes::detail::blur3(img);
        if (aug_rng.uniform() < 0.3f) shapes::detail::blur3(img);
        train.images.push_back(std::move(img));
        train.labels.push_back(label);
    }

    nn::SmallCnn net(shapes::kNumClasses, seed);
    nn::Adam opt(net.params(), lr);
    Rng rng(derive_seed(seed, 3));
    const float at_eps = 12.0f / 255.0f, at_step = 2.5f / 255.0f;
    const int at_steps = 4;

    auto test_acc = [&]() {
        long hits = 0;
        for (std::size_t i = 0; i < test.images.size(); ++i)
            if (argmax_label(net.logits(test.images[i])) == test.labels[i]) ++hits;
        return static_cast<double>(hits) / test.images.size();
    };

    std::vector<std::size_t> order(train.images.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::vector<std::size_t> identity = order;
    for (int e = 0; e < epochs; ++e) {
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[rng.index(i)]);
        // from epoch 4 on, replace every other image with a smooth
        // adversarial version crafted against the current weights
        std::vector<Tensor> imgs;
        std::vector<int> labels(order.size());
        imgs.reserve(order.size());
        for (std::size_t i = 0; i < order.size(); ++i) {
            const std::size_t idx = order[i];
            labels[i] = train.labels[idx];
            if (e >= 3 && i % 2 == 0)
                imgs.push_back(smooth_pgd(net, train.images[idx], labels[i], at_eps, at_step, at_steps));
            else
                imgs.push_back(train.images[idx]);
        }
        opt.zero_grad();
        const nn::TrainStats st = nn::train_epoch(net, opt, imgs, labels, identity, batch);
        std::cout << "epoch " << e + 1 << "/" << epochs << " loss=" << st.loss
                  << " train_acc=" << st.accuracy << " test_acc=" << test_acc() << "\n";
    }

    // fine-tune on intermediate trace reconstructions (skipped for the tiny
    // training sets used in smoke tests)
    const int dip_sources = n_base >= 500 ? std::min(250, n_base) : 0;
    if (dip_sources > 0) {
        std::cout << "collecting trace reconstructions from " << dip_sources << " images\n";
        std::vector<Tensor> ft_imgs = train.images;
        std::vector<int> ft_labels = train.labels;
        GeneratorConfig gen = GeneratorConfig::preset("medium");
        gen.max_iterations = 500;
        gen.trace_samples = 100;
        for (int i = 0; i < dip_sources; ++i) {
            gen.rng_seed = derive_seed(derive_seed(seed, 6), i);
            const DipTrace trace = run_dip_trace(train.images[i], gen);
            for (const int t : {54, 104, 154, 254, 404})
                for (const auto& s : trace.samples)
                    if (s.iteration == t) {
                        ft_imgs.push_back(s.image);
                        ft_labels.push_back(train.labels[i]);
                        break;
                    }
            if (i % 50 == 49) std::cout << "  " << i + 1 << "/" << dip_sources << "\n";
        }
        std::vector<std::size_t> ft_order(ft_imgs.size());
        for (std::size_t i = 0; i < ft_order.size(); ++i) ft_order[i] = i;
        for (int e = 0; e < 12; ++e) {
            for (std::size_t i = ft_order.size(); i > 1; --i)
                std::swap(ft_order[i - 1], ft_order[rng.index(i)]);
            const nn::TrainStats st = nn::train_epoch(net, opt, ft_imgs, ft_labels, ft_order, batch);
            std::cout << "fine-tune epoch " << e + 1 << "/12 loss=" << st.loss
                      << " train_acc=" << st.accuracy << " test_acc=" << test_acc() << "\n";
        }
    }

    net.save(out_path);
    std::cout << "saved weights to " << out_path << "\n";
    return 0;
}

int cmd_attack(const KeyValueConfig& kv, const std::string& out_dir) {
    const ExperimentConfig cfg = ExperimentConfig::from_config(kv);
    if (cfg.attacks.empty()) throw ConfigError("attack: config lists no attacks");
    register_builtin_adapters();
    auto adapter = AdapterRegistry::instance().create(cfg.adapter_name, kv, "adapter.");
    const LabeledDataset data = cfg.load_data();
    for (const auto& [tag, atk_template] : cfg.attacks) {
        AdversarialBatch batch;
        batch.attack = atk_template;
        for (std::size_t i = 0; i < data.images.size(); ++i) {
            AttackConfig atk = atk_template;
            atk.rng_seed = derive_seed(cfg.seed, detail::string_stream_id(data.ids[i] + "_" + tag));
            batch.originals.push_back(data.images[i]);
            batch.true_labels.push_back(data.labels[i]);
            batch.adversarials.push_back(run_attack(*adapter, data.images[i], data.labels[i], atk));
        }
        batch.check_invariants();
        long fooled = 0;
        for (std::size_t i = 0; i < batch.adversarials.size(); ++i)
            if (argmax_label(adapter->predict_one(batch.adversarials[i])) != batch.true_labels[i])
                ++fooled;
        const std::string dir = out_dir + "/" + tag;
        save_batch(batch, data.ids, dir);
        std::cout << tag << ": " << batch.adversarials.size() << " images, attack success rate "
                  << static_cast<double>(fooled) / batch.adversarials.size() << ", written to " << dir
                  << "\n";
    }
    return 0;
}

// Purifies every adversarial image of a persisted batch; writes one raw
// tensor per reconstruction plus a predictions CSV.
int cmd_defend_batch(const KeyValueConfig& kv, const std::string& batch_dir,
                     const std::string& out_dir) {
    namespace fs = std::filesystem;
    const ExperimentConfig cfg = ExperimentConfig::from_config(kv);
    register_builtin_adapters();
    auto adapter = AdapterRegistry::instance().create(cfg.adapter_name, kv, "adapter.");
    const auto [batch, ids] = load_batch(batch_dir);
    fs::create_directories(out_dir);
    std::ofstream csv(fs::path(out_dir) / "defended.csv");
    csv << "id,true_label,undefended_pred,defended_pred,used_fallback\n";
    long hits = 0;
    for (std::size_t i = 0; i < batch.adversarials.size(); ++i) {
        GeneratorConfig gen = cfg.generator;
        gen.rng_seed = derive_seed(cfg.seed, detail::string_stream_id(ids[i] + "_defend"));
        const DefenseResult res = defend(batch.adversarials[i], *adapter, gen, cfg.detection,
                                         cfg.reconstruction, nullptr, false, cfg.ssim_cfg);
        save_tensor(res.reconstructed, (fs::path(out_dir) / (ids[i] + "_recon.ften")).string());
        const int undef = argmax_label(adapter->predict_one(batch.adversarials[i]));
        csv << ids[i] << ',' << batch.true_labels[i] << ',' << undef << ',' << res.predicted_label
            << ',' << (res.used_fallback ? 1 : 0) << '\n';
        if (res.predicted_label == batch.true_labels[i]) ++hits;
        std::cout << ids[i] << ": " << undef << " -> " << res.predicted_label << " (true "
                  << batch.true_labels[i] << ")\n" << std::flush;
    }
    std::cout << "defended accuracy " << static_cast<double>(hits) / batch.adversarials.size()
              << ", outputs in " << out_dir << "\n";
    return 0;
}

int cmd_defend(const KeyValueConfig& kv, const std::string& input, const std::string& out_prefix,
               bool visualize) {
    if (std::filesystem::is_directory(input)) return cmd_defend_batch(kv, input, out_prefix);
    const ExperimentConfig cfg = ExperimentConfig::from_config(kv);
    register_builtin_adapters();
    auto adapter = AdapterRegistry::instance().create(cfg.adapter_name, kv, "adapter.");
    Tensor x = load_any_image(input);
    if (cfg.resize_to > 0 && (x.h != cfg.resize_to || x.w != cfg.resize_to))
        x = center_resize(x, cfg.resize_to);
    GeneratorConfig gen = cfg.generator;
    gen.rng_seed = derive_seed(cfg.seed, detail::string_stream_id(input));
    const DefenseResult res =
        defend(x, *adapter, gen, cfg.detection, cfg.reconstruction, nullptr, visualize, cfg.ssim_cfg);
    save_image(res.reconstructed, out_prefix + ".png");
    save_tensor(res.reconstructed, out_prefix + ".ften");
    std::cout << "input prediction: " << argmax_label(adapter->predict_one(x)) << "\n";
    std::cout << "defended prediction: " << res.predicted_label
              << " (confidence " << res.predicted_confidences[static_cast<std::size_t>(res.predicted_label)]
              << ")\n";
    std::cout << "cross-boundary pairs used: " << res.pairs_used
              << (res.used_fallback ? " (fallback: trace tail average)" : "") << "\n";
    if (visualize && res.diagnostics) {
        emit_defense_visualization(*res.diagnostics, res.reconstructed, out_prefix);
        std::cout << "wrote " << out_prefix << "_trace.png and " << out_prefix << "_strip.png\n";
    }
    return 0;
}

int cmd_evaluate(const KeyValueConfig& kv) {
    const ExperimentConfig cfg = ExperimentConfig::from_config(kv);
    const EvaluationReport report = run_experiment(
        cfg, [](const std::string& key) { std::cout << "done: " << key << "\n" << std::flush; });
    const std::string prefix = cfg.output_dir + "/report";
    emit_report(report, prefix);
    for (const auto& [name, a] : report.aggregates())
        std::cout << name << ": undefended_acc=" << a.undefended_acc
                  << " defended_acc=" << a.defended_acc << " n=" << a.count << "\n";
    std::cout << "report written to " << prefix << "_rows.csv / _summary.json\n";
    return 0;
}

int cmd_sweep(KeyValueConfig kv, const std::string& kind_name, const std::string& param,
              const std::vector<double>& values) {
    const CurveKind kind = curve_kind_from_string(kind_name);
    if (values.empty()) throw ConfigError("sweep: no values given");
    std::vector<std::pair<double, EvaluationReport>> reports;
    for (double v : values) {
        KeyValueConfig run_kv = kv;
        std::ostringstream vs;
        vs << v;
        ExperimentConfig probe = ExperimentConfig::from_config(kv);
        switch (kind) {
            case CurveKind::epsilon_sweep:
                for (const auto& [tag, atk] : probe.attacks)
                    run_kv.set("attack." + tag + ".epsilon", vs.str());
                break;
            case CurveKind::bpda_iterations:
                for (const auto& [tag, atk] : probe.attacks)
                    run_kv.set("attack." + tag + ".steps", vs.str());
                break;
            case CurveKind::param_sensitivity:
                if (param.empty()) throw ConfigError("sweep: param_sensitivity needs --param");
                run_kv.set(param, vs.str());
                break;
        }
        ExperimentConfig cfg = ExperimentConfig::from_config(run_kv);
        cfg.output_dir += "/sweep_" + vs.str();
        std::cout << "== sweep point " << vs.str() << " ==\n";
        reports.emplace_back(v, run_experiment(cfg));
    }
    const ExperimentConfig cfg = ExperimentConfig::from_config(kv);
    const std::string prefix = cfg.output_dir + "/curve_" + kind_name;
    emit_curves(reports, kind, prefix);
    std::cout << "curve written to " << prefix << ".png / .csv\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"decision-trace image purification: attacks, defense, evaluation"};
    app.require_subcommand(1);

    std::string config_path, input, output = "out", param, kind = "epsilon_sweep";
    std::vector<std::string> overrides;
    std::vector<double> values;
    bool visualize_flag = false;
    int count = 100, test_count = 200, epochs = 30, batch = 32;
    float lr = 1e-3f;
    std::uint64_t seed = 0;

    auto add_config = [&](CLI::App* sub, bool required) {
        auto* opt = sub->add_option("-c,--config", config_path, "key=value config file");
        if (required) opt->required();
        sub->add_option("-s,--set", overrides, "config overrides, key=value");
    };

    auto* atk = app.add_subcommand("attack", "craft adversarial examples for the configured dataset");
    add_config(atk, true);
    atk->add_option("-o,--output", output, "output directory");

    auto* def = app.add_subcommand("defend", "purify one image (PNG/JPEG/.ften)");
    add_config(def, true);
    def->add_option("-i,--input", input, "input image")->required();
    def->add_option("-o,--output", output, "output path prefix");
    def->add_flag("--diagnostics", visualize_flag, "also emit trace/strip visualizations");

    auto* eval = app.add_subcommand("evaluate", "run the clean + attacked evaluation protocol");
    add_config(eval, true);

    auto* swp = app.add_subcommand("sweep", "re-run the evaluation over a swept quantity");
    add_config(swp, true);
    swp->add_option("-k,--kind", kind, "epsilon_sweep | bpda_iterations | param_sensitivity");
    swp->add_option("-p,--param", param, "config key to sweep (param_sensitivity)");
    swp->add_option("-v,--values", values, "sweep values")->required();

    auto* vis = app.add_subcommand("visualize", "defend one image and render its decision trace");
    add_config(vis, true);
    vis->add_option("-i,--input", input, "input image")->required();
    vis->add_option("-o,--output", output, "output path prefix");

    auto* mkds = app.add_subcommand("make-dataset", "write the procedural dataset as PNG + labels.csv");
    mkds->add_option("-o,--output", output, "output directory")->required();
    mkds->add_option("-n,--count", count, "number of images");
    mkds->add_option("--seed", seed, "dataset seed");

    auto* tv = app.add_subcommand("train-victim", "train the small CNN victim on the procedural dataset");
    tv->add_option("-o,--output", output, "weights output path")->required();
    tv->add_option("-n,--count", count, "training set size")->default_val(2000);
    tv->add_option("--test-count", test_count, "held-out set size");
    tv->add_option("--epochs", epochs, "training epochs");
    tv->add_option("--batch", batch, "mini-batch size");
    tv->add_option("--lr", lr, "learning rate");
    tv->add_option("--seed", seed, "training seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand(mkds)) return cmd_make_dataset(output, count, seed);
        if (app.got_subcommand(tv))
            return cmd_train_victim(output, count, test_count, epochs, batch, lr, seed);
        const KeyValueConfig kv = load_config(config_path, overrides);
        if (app.got_subcommand(atk)) return cmd_attack(kv, output);
        if (app.got_subcommand(def)) return cmd_defend(kv, input, output, visualize_flag);
        if (app.got_subcommand(eval)) return cmd_evaluate(kv);
        if (app.got_subcommand(swp)) return cmd_sweep(kv, kind, param, values);
        if (app.got_subcommand(vis)) return cmd_defend(kv, input, output, /*visualize=*/true);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
