#ifndef DIPDEF_DATASET_HPP
#define DIPDEF_DATASET_HPP

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "dipdef/errors.hpp"
#include "dipdef/image_io.hpp"
#include "dipdef/rng.hpp"
#include "dipdef/tensor.hpp"

namespace dipdef {

struct LabeledDataset {
    std::vector<Tensor> images;
    std::vector<int> labels;
    std::vector<std::string> ids;
};

namespace shapes {

// Deterministic procedural 10-class 32x32 dataset, used as the desk-scale
// stand-in where a real photo corpus is not available. The 10 classes are 5
// figure silhouettes x 2 fine textures: the silhouette alone only narrows an
// image down to a class *pair*, and a faint pixel-scale tile pattern stamped
// on the figure decides which member of the pair it is. This mirrors how
// photo classifiers behave under small-budget attacks: the coarse structure
// is easy and robust, while the deciding evidence is high-frequency and
// carries margins comparable to the usual 2-8/255 perturbation budgets
// (most images carry the tile at amplitude 0.05, a weak minority at 0.012).
constexpr int kNumClasses = 10;
constexpr int kSide = 32;
constexpr float kTextureAmp = 0.05f;
constexpr float kWeakTextureAmp = 0.012f;
constexpr float kWeakTextureFrac = 0.30f;

namespace detail {

inline void blur3(Tensor& t) {
    Tensor src = t;
    for (int c = 0; c < t.c; ++c)
        for (int y = 0; y < t.h; ++y)
            for (int x = 0; x < t.w; ++x) {
                float acc = 0.0f;
                int n = 0;
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int yy = y + dy, xx = x + dx;
                        if (yy < 0 || yy >= t.h || xx < 0 || xx >= t.w) continue;
                        acc += src.at(c, yy, xx);
                        ++n;
                    }
                t.at(c, y, x) = acc / static_cast<float>(n);
            }
}

}  // namespace detail

// texture_amp < 0 draws the amplitude from the dataset's own distribution;
// the trainer passes explicit values to imitate partially reconstructed
// images (see train-victim).
inline Tensor make_image(int class_id, std::uint64_t seed, float texture_amp = -1.0f) {
    if (class_id < 0 || class_id >= kNumClasses) throw InputError("shapes: bad class id");
    Rng rng(derive_seed(seed, 0x5ca1e));
    const int shape_id = class_id / 2;
    const int tex_id = class_id % 2;
    Tensor img(3, kSide, kSide);

    // background: smooth gradient between two random colors. The figure/
    // background intensity ranges overlap on purpose: with high-contrast
    // figures a small CNN ends up with decision margins far wider than the
    // perturbation budgets studied here, which makes it unrealistically
    // robust compared to classifiers trained on natural photos.
    float bg_a[3], bg_b[3], fg[3];
    for (int c = 0; c < 3; ++c) {
        bg_a[c] = rng.uniform(0.18f, 0.60f);
        bg_b[c] = rng.uniform(0.18f, 0.60f);
        fg[c] = rng.uniform(0.58f, 0.88f);
    }
    const bool horizontal = rng.uniform() < 0.5f;
    for (int y = 0; y < kSide; ++y)
        for (int x = 0; x < kSide; ++x) {
            const float t = (horizontal ? x : y) / static_cast<float>(kSide - 1);
            for (int c = 0; c < 3; ++c) img.at(c, y, x) = (1 - t) * bg_a[c] + t * bg_b[c];
        }

    const float cx = rng.uniform(11.0f, 21.0f);
    const float cy = rng.uniform(11.0f, 21.0f);
    const float r = rng.uniform(6.0f, 10.0f);

    auto inside = [&](int x, int y) -> bool {
        const float dx = x - cx, dy = y - cy;
        switch (shape_id) {
            case 0:  // disc
                return dx * dx + dy * dy <= r * r;
            case 1:  // square
                return std::abs(dx) <= r * 0.9f && std::abs(dy) <= r * 0.9f;
            case 2:  // triangle
                return dy >= -r && dy <= r && std::abs(dx) <= (dy + r) * 0.7f;
            case 3:  // full-width horizontal bar
                return std::abs(dy) <= r * 0.45f;
            case 4:  // diagonal half-plane
                return dx + dy <= 0.0f;
        }
        return false;
    };

    for (int y = 0; y < kSide; ++y)
        for (int x = 0; x < kSide; ++x)
            if (inside(x, y))
                for (int c = 0; c < 3; ++c) img.at(c, y, x) = fg[c];

    detail::blur3(img);

    // the pair-deciding texture: a fixed per-texture 4x4 sign tile, stamped
    // after the blur so it stays pixel-sharp
    float tile[16];
    {
        Rng trng(derive_seed(0x7e97, static_cast<std::uint64_t>(tex_id)));
        for (float& t : tile) t = trng.uniform() < 0.5f ? -1.0f : 1.0f;
    }
    float amp = rng.uniform() < kWeakTextureFrac ? kWeakTextureAmp : kTextureAmp;
    if (texture_amp >= 0.0f) amp = texture_amp;
    for (int y = 0; y < kSide; ++y)
        for (int x = 0; x < kSide; ++x)
            if (inside(x, y)) {
                const float d = amp * tile[(y % 4) * 4 + (x % 4)];
                for (int c = 0; c < 3; ++c) img.at(c, y, x) += d;
            }

    // faint sensor-style noise
    for (float& v : img.v) v += 0.01f * rng.normal();
    return img.clip(0.0f, 1.0f);
}

// n images with labels cycling through the classes; sample i is fully
// determined by (seed, i).
inline LabeledDataset make_dataset(int n, std::uint64_t seed) {
    LabeledDataset ds;
    for (int i = 0; i < n; ++i) {
        const int label = i % kNumClasses;
        ds.images.push_back(make_image(label, derive_seed(seed, static_cast<std::uint64_t>(i))));
        ds.labels.push_back(label);
        ds.ids.push_back("shapes_" + std::to_string(i));
    }
    return ds;
}

}  // namespace shapes

// Writes a dataset as PNG files plus a labels.csv (filename,label).
inline void save_dataset(const LabeledDataset& ds, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    std::ofstream csv(fs::path(dir) / "labels.csv");
    if (!csv) throw InputError("cannot write labels.csv in " + dir);
    csv << "filename,label\n";
    for (std::size_t i = 0; i < ds.images.size(); ++i) {
        const std::string name = ds.ids[i] + ".png";
        save_image(ds.images[i], (fs::path(dir) / name).string());
        csv << name << "," << ds.labels[i] << "\n";
    }
}

// Directory of PNG/JPEG files described by a CSV label file. Images larger
// than `resize_to` (when > 0) are center-cropped and resized.
inline LabeledDataset load_dataset(const std::string& dir, const std::string& label_csv = "labels.csv",
                                   int max_count = -1, int resize_to = 0) {
    namespace fs = std::filesystem;
    std::ifstream csv(fs::path(dir) / label_csv);
    if (!csv) throw ConfigError("cannot open label file " + label_csv + " in " + dir);
    LabeledDataset ds;
    std::string line;
    std::getline(csv, line);  // header
    while (std::getline(csv, line)) {
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw InputError("bad label row: " + line);
        const std::string name = line.substr(0, comma);
        const int label = std::stoi(line.substr(comma + 1));
        Tensor img = load_image((fs::path(dir) / name).string());
        if (resize_to > 0 && (img.h != resize_to || img.w != resize_to))
            img = center_resize(img, resize_to);
        ds.images.push_back(std::move(img));
        ds.labels.push_back(label);
        ds.ids.push_back(name);
        if (max_count > 0 && static_cast<int>(ds.images.size()) >= max_count) break;
    }
    if (ds.images.empty()) throw InputError("empty dataset in " + dir);
    return ds;
}

}  // namespace dipdef

#endif
