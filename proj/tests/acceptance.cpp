// Acceptance suite: one line of output per criterion, nonzero exit if any
// fail. Usage: acceptance [victim_weights] [output_dir] [criterion ...]
//
// The heavy end-to-end criteria (5-8) cache per-image results under
// output_dir, so an interrupted run resumes where it stopped.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dipdef/harness.hpp"
#include "dipdef/synthetic.hpp"

using namespace dipdef;
using Clock = std::chrono::steady_clock;

namespace {

// Frozen thresholds. kC5MeanSsim was frozen from a reference run of the
// medium generator on this dataset (measured mean 0.95; target region 0.9).
constexpr float kC5MeanSsim = 0.90f;
constexpr double kC6UndefendedMax = 0.10;
constexpr double kC6DefendedMin = 0.60;
constexpr double kC6CleanDefendedMin = 0.75;
constexpr float kC7MeanSsim = 0.85f;
constexpr double kC8Margin = 0.20;
constexpr double kC9RelTol = 1e-5;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string victim_weights = "data/victim_shapes10.bin";
std::string out_dir = "acceptance_out";
constexpr std::uint64_t kSeed = 20260824ull;

// --- criterion 1: grid localization obeys the 1/(2N) bound ----------------

bool criterion1(std::string& detail) {
    const auto t0 = Clock::now();
    // one-pixel 2-class linear model: logit gap = 2v, zero crossing at v = 0
    LinearClassifier clf({{1.0f}, {-1.0f}}, {0.0f, 0.0f});
    CrossBoundaryPair pair;
    pair.left = Tensor(1, 1, 1, 0.2f);    // gap +0.4
    pair.right = Tensor(1, 1, 1, -0.3f);  // gap -0.6
    pair.left_label = 0;
    pair.right_label = 1;
    const float alpha_true = analytic_boundary_alpha(0.4f, -0.6f);  // 0.6

    const OnBoundaryImage at20 = localize_on_boundary(pair, clf, 20);
    bool ok = std::abs(at20.alpha - alpha_true) <= 0.025f;
    for (int n : {10, 20, 100, 1000}) {
        const OnBoundaryImage bd = localize_on_boundary(pair, clf, n);
        ok = ok && std::abs(bd.alpha - alpha_true) <= 0.5f / n + 1e-6f;
    }
    // a second pair whose crossing is off every grid, same bound
    pair.left = Tensor(1, 1, 1, 0.315f);
    pair.right = Tensor(1, 1, 1, -0.185f);
    const float alpha2 = analytic_boundary_alpha(0.63f, -0.37f);
    for (int n : {10, 20, 100, 1000}) {
        const OnBoundaryImage bd = localize_on_boundary(pair, clf, n);
        ok = ok && std::abs(bd.alpha - alpha2) <= 0.5f / n + 1e-6f;
    }
    const double dt = seconds_since(t0);
    std::ostringstream os;
    os << "alpha(N=20)=" << at20.alpha << " target=" << alpha_true << ", " << dt << "s";
    detail = os.str();
    return ok && dt < 1.0;
}

// --- criterion 2: detection equals the brute-force predicate ---------------

bool criterion2(std::string& detail) {
    const auto t0 = Clock::now();
    Rng rng(kSeed);
    DetectionConfig cfg;
    long checked = 0;
    bool ok = true;
    for (int trial = 0; trial < 1000 && ok; ++trial) {
        const int n = 2 + static_cast<int>(rng.index(60));
        DipTrace trace;
        DecisionTrace decisions;
        int t = static_cast<int>(rng.index(40));
        for (int i = 0; i < n; ++i) {
            trace.samples.push_back({t, Tensor(1, 1, 1, static_cast<float>(i)), 0.0f});
            DecisionEntry e;
            e.iteration = t;
            e.label = static_cast<int>(rng.index(4));
            e.quality = rng.uniform();
            decisions.entries.push_back(std::move(e));
            t += 1 + static_cast<int>(rng.index(8));
        }
        cfg.tau = rng.uniform(0.1f, 0.95f);
        cfg.warmup_t0 = static_cast<int>(rng.index(80));

        const auto got = detect_cross_boundary(trace, decisions, cfg);
        std::vector<std::size_t> expected;
        for (std::size_t i = 0; i + 1 < decisions.entries.size(); ++i) {
            const auto& l = decisions.entries[i];
            if (l.label != decisions.entries[i + 1].label && l.quality >= cfg.tau &&
                l.iteration > cfg.warmup_t0)
                expected.push_back(i);
        }
        ok = got.size() == expected.size();
        for (std::size_t i = 0; ok && i < got.size(); ++i) {
            const std::size_t e = expected[i];
            ok = got[i].index == decisions.entries[e].iteration &&
                 got[i].left_label == decisions.entries[e].label &&
                 got[i].right_label == decisions.entries[e + 1].label &&
                 got[i].left.v[0] == static_cast<float>(e);
            ++checked;
        }
    }
    const double dt = seconds_since(t0);
    std::ostringstream os;
    os << "1000 randomized traces, " << checked << " pairs verified, " << dt << "s";
    detail = os.str();
    return ok && dt < 10.0;
}

// --- criterion 3: constant-label fallback is the exact tail mean -----------

bool criterion3(std::string& detail) {
    const auto t0 = Clock::now();
    // any classifier that never changes its mind
    LinearClassifier clf({{0, 0, 0, 0}, {0, 0, 0, 0}}, {1.0f, 0.0f});
    Rng rng(kSeed + 3);
    DipTrace trace;
    DecisionTrace decisions;
    for (int i = 0; i < 40; ++i) {
        Tensor img(1, 2, 2);
        for (float& v : img.v) v = rng.uniform();
        trace.samples.push_back({100 + i, img, 0.0f});
        DecisionEntry e;
        e.iteration = 100 + i;
        e.label = 0;
        e.quality = rng.uniform();
        decisions.entries.push_back(std::move(e));
    }
    trace.target = trace.samples.front().image;

    DetectionConfig det;  // K = 15
    const DefenseResult res = defend_from_decisions(trace, decisions, trace.target, clf, det, {});
    std::vector<Tensor> tail;
    for (std::size_t i = trace.samples.size() - 15; i < trace.samples.size(); ++i)
        tail.push_back(trace.samples[i].image);
    const bool ok = res.used_fallback && res.pairs_used == 0 && res.reconstructed.v == stitch(tail).v;
    const double dt = seconds_since(t0);
    std::ostringstream os;
    os << "bit-equal tail mean of last 15 samples, " << dt << "s";
    detail = os.str();
    return ok && dt < 1.0;
}

// --- criterion 4: attack reductions and invariants -------------------------

bool criterion4(std::string& detail) {
    const auto t0 = Clock::now();
    LinearClassifier clf = LinearClassifier::random(4, 3 * 8 * 8, kSeed + 4);
    Rng rng(kSeed + 4);
    bool ok = true;
    const float eps = 8.0f / 255.0f;
    int invariant_checked = 0;
    for (int i = 0; i < 100; ++i) {
        Tensor x(3, 8, 8);
        for (float& v : x.v) v = rng.uniform();
        const int label = static_cast<int>(rng.index(4));

        const Tensor f = fgsm(clf, x, label, eps);
        const Tensor p1 = pgd(clf, x, label, eps, 1, eps, false);
        ok = ok && f.v == p1.v;

        const Tensor b = bim(clf, x, label, eps, 8, eps / 4);
        const Tensor m0 = mifgsm(clf, x, label, eps, 8, eps / 4, 0.0f);
        ok = ok && b.v == m0.v;

        const Tensor pr = pgd(clf, x, label, eps, 8, eps / 4, true, kSeed + i);
        const Tensor mm = mifgsm(clf, x, label, eps, 8, eps / 4, 1.0f);
        for (const Tensor* adv : {&f, &b, &pr, &mm}) {
            ok = ok && linf_distance(*adv, x) <= eps + 1e-6f;
            for (float v : adv->v) ok = ok && v >= 0.0f && v <= 1.0f;
            ++invariant_checked;
        }
        if (!ok) break;
    }
    const double dt = seconds_since(t0);
    std::ostringstream os;
    os << "100-image batch, " << invariant_checked << " attack outputs within budget, " << dt << "s";
    detail = os.str();
    return ok && dt < 60.0;
}

// --- criterion 5: generator reconstruction sanity --------------------------

bool criterion5(std::string& detail) {
    GeneratorConfig gen = GeneratorConfig::medium();  // T = 1000, lr = 0.01
    const LabeledDataset data = shapes::make_dataset(10, derive_seed(kSeed, 0xda7a));
    bool mse_ok = true;
    double ssim_sum = 0.0;
    for (std::size_t i = 0; i < data.images.size(); ++i) {
        gen.rng_seed = derive_seed(kSeed, 500 + i);
        const DipTrace trace = run_dip_trace(data.images[i], gen);
        mse_ok = mse_ok && trace.samples.back().mse < trace.samples.front().mse;
        ssim_sum += ssim(trace.samples.back().image, data.images[i]);
        std::cout << "  [c5] image " << i << " mse " << trace.samples.front().mse << " -> "
                  << trace.samples.back().mse << "\n" << std::flush;
    }
    const double mean_ssim = ssim_sum / 10.0;
    std::ostringstream os;
    os << "mse decreased on 10/10, mean final ssim " << mean_ssim << " (>= " << kC5MeanSsim << ")";
    detail = os.str();
    return mse_ok && mean_ssim >= kC5MeanSsim;
}

// --- criteria 6 + 7: end-to-end recovery and reconstruction quality --------

KeyValueConfig victim_experiment(int samples, const std::string& sub) {
    KeyValueConfig kv;
    kv.set("dataset.sample_count", std::to_string(samples));
    kv.set("adapter.name", "small-cnn");
    kv.set("adapter.weights", victim_weights);
    kv.set("generator.preset", "medium");
    kv.set("output.dir", out_dir + "/" + sub);
    kv.set("seed", std::to_string(kSeed));
    return kv;
}

EvaluationReport c6_report;
bool c6_ran = false;

const EvaluationReport& run_c6() {
    if (!c6_ran) {
        KeyValueConfig kv = victim_experiment(100, "c6");
        kv.set("attacks", "pgd8");
        kv.set("attack.pgd8.method", "pgd");
        kv.set("attack.pgd8.epsilon", "8");
        kv.set("attack.pgd8.steps", "20");
        int done = 0;
        c6_report = run_experiment(ExperimentConfig::from_config(kv), [&done](const std::string& k) {
            if (++done % 10 == 0) std::cout << "  [c6] " << done << " cells done (" << k << ")\n"
                                            << std::flush;
        });
        c6_ran = true;
    }
    return c6_report;
}

bool criterion6(std::string& detail) {
    const auto agg = run_c6().aggregates();
    const double undef = agg.at("pgd8").undefended_acc;
    const double def = agg.at("pgd8").defended_acc;
    const double clean_def = agg.at("clean").defended_acc;
    std::ostringstream os;
    os << "pgd8 undefended " << undef << " (<= " << kC6UndefendedMax << "), defended " << def
       << " (>= " << kC6DefendedMin << "), clean defended " << clean_def << " (>= "
       << kC6CleanDefendedMin << ")";
    detail = os.str();
    return undef <= kC6UndefendedMax && def >= kC6DefendedMin && clean_def >= kC6CleanDefendedMin;
}

bool criterion7(std::string& detail) {
    const auto agg = run_c6().aggregates();
    const double s = agg.at("clean").mean_ssim_vs_clean;
    std::ostringstream os;
    os << "mean reconstruction ssim vs clean " << s << " (>= " << kC7MeanSsim << ")";
    detail = os.str();
    return s >= kC7MeanSsim;
}

// --- criterion 8: the defense survives its adaptive attack -----------------

bool criterion8(std::string& detail) {
    KeyValueConfig kv = victim_experiment(50, "c8");
    kv.set("attacks", "bpda2");
    kv.set("attack.bpda2.method", "bpda");
    kv.set("attack.bpda2.epsilon", "2");
    kv.set("attack.bpda2.steps", "15");
    int done = 0;
    const EvaluationReport rep =
        run_experiment(ExperimentConfig::from_config(kv), [&done](const std::string& k) {
            std::cout << "  [c8] cell " << ++done << " done (" << k << ")\n" << std::flush;
        });
    const double bpda_defended = rep.aggregates().at("bpda2").defended_acc;

    // reference point: plain PGD at the same budget against the bare model
    register_builtin_adapters();
    auto adapter = AdapterRegistry::instance().create("small-cnn", kv, "adapter.");
    const LabeledDataset data = shapes::make_dataset(50, derive_seed(kSeed, 0xda7a));
    long hits = 0;
    for (std::size_t i = 0; i < data.images.size(); ++i) {
        AttackConfig atk;
        atk.epsilon = 2.0f / 255.0f;
        atk.steps = 15;
        atk.rng_seed = derive_seed(kSeed, 900 + i);
        const Tensor adv = run_attack(*adapter, data.images[i], data.labels[i], atk);
        if (argmax_label(adapter->predict_one(adv)) == data.labels[i]) ++hits;
    }
    const double pgd_undefended = static_cast<double>(hits) / data.images.size();

    std::ostringstream os;
    os << "defended accuracy under its adaptive attack " << bpda_defended
       << " vs undefended pgd2 " << pgd_undefended << " (margin >= " << kC8Margin << ")";
    detail = os.str();
    return bpda_defended >= pgd_undefended + kC8Margin;
}

// --- criterion 9: closed-form gradients vs double-precision differences ----

bool criterion9(std::string& detail) {
    const auto t0 = Clock::now();
    const int classes = 5, dim = 48;
    LinearClassifier clf = LinearClassifier::random(classes, dim, kSeed + 9);
    const auto& W = clf.weights();
    const auto& B = clf.bias();

    // cross-entropy at label 0, computed entirely in double precision
    auto loss_double = [&](const std::vector<double>& x) {
        std::vector<double> logits(static_cast<std::size_t>(classes));
        double zmax = -1e300;
        for (int c = 0; c < classes; ++c) {
            double acc = B[static_cast<std::size_t>(c)];
            for (int i = 0; i < dim; ++i)
                acc += static_cast<double>(W[static_cast<std::size_t>(c)][static_cast<std::size_t>(i)]) *
                       x[static_cast<std::size_t>(i)];
            logits[static_cast<std::size_t>(c)] = acc;
            zmax = std::max(zmax, acc);
        }
        double denom = 0.0;
        for (double z : logits) denom += std::exp(z - zmax);
        return -(logits[0] - zmax - std::log(denom));
    };

    Rng rng(kSeed + 90);
    double worst = 0.0;
    bool ok = true;
    for (int trial = 0; trial < 100; ++trial) {
        Tensor x(1, 1, dim);
        std::vector<double> xd(static_cast<std::size_t>(dim));
        for (int i = 0; i < dim; ++i) {
            x.v[static_cast<std::size_t>(i)] = rng.uniform();
            xd[static_cast<std::size_t>(i)] = x.v[static_cast<std::size_t>(i)];
        }
        const Tensor analytic = clf.loss_input_gradient(x, 0);

        const double h = 1e-6;
        double num_norm = 0.0, diff_norm = 0.0;
        for (int i = 0; i < dim; ++i) {
            const double keep = xd[static_cast<std::size_t>(i)];
            xd[static_cast<std::size_t>(i)] = keep + h;
            const double lp = loss_double(xd);
            xd[static_cast<std::size_t>(i)] = keep - h;
            const double lm = loss_double(xd);
            xd[static_cast<std::size_t>(i)] = keep;
            const double g = (lp - lm) / (2.0 * h);
            num_norm += g * g;
            const double d = g - analytic.v[static_cast<std::size_t>(i)];
            diff_norm += d * d;
        }
        const double rel = std::sqrt(diff_norm) / std::sqrt(num_norm);
        worst = std::max(worst, rel);
        ok = ok && rel <= kC9RelTol;
    }
    const double dt = seconds_since(t0);
    std::ostringstream os;
    os << "worst relative error " << worst << " (<= " << kC9RelTol << ") over 100 points, " << dt
       << "s";
    detail = os.str();
    return ok && dt < 1.0;
}

}  // namespace

int main(int argc, char** argv) {
    if (argc > 1) victim_weights = argv[1];
    if (argc > 2) out_dir = argv[2];
    std::set<int> only;
    for (int i = 3; i < argc; ++i) only.insert(std::atoi(argv[i]));

    struct Criterion {
        int id;
        const char* name;
        bool (*fn)(std::string&);
    };
    const std::vector<Criterion> criteria = {
        {1, "boundary localization bound", criterion1},
        {2, "cross-boundary detection soundness", criterion2},
        {3, "constant-label fallback path", criterion3},
        {4, "attack reductions and invariants", criterion4},
        {5, "generator reconstruction sanity", criterion5},
        {6, "end-to-end defense recovery", criterion6},
        {7, "reconstruction quality", criterion7},
        {8, "adaptive-attack direction check", criterion8},
        {9, "gradient oracle", criterion9},
    };

    int failures = 0;
    for (const Criterion& c : criteria) {
        if (!only.empty() && !only.count(c.id)) continue;
        std::string detail;
        bool ok = false;
        try {
            ok = c.fn(detail);
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        std::cout << (ok ? "[PASS]" : "[FAIL]") << " criterion " << c.id << ": " << c.name << " — "
                  << detail << "\n"
                  << std::flush;
        if (!ok) ++failures;
    }
    return failures;
}
