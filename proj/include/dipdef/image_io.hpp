#ifndef DIPDEF_IMAGE_IO_HPP
#define DIPDEF_IMAGE_IO_HPP

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "dipdef/errors.hpp"
#include "dipdef/tensor.hpp"

namespace dipdef {

// ---------------------------------------------------------------------------
// Raw float tensor format (".ften"):
//   bytes 0..3   magic "FTEN"
//   bytes 4..7   version (uint32 LE, currently 1)
//   bytes 8..11  ndims   (uint32 LE)
//   then ndims uint32 LE dims, then prod(dims) float32 LE, row-major.
// ---------------------------------------------------------------------------

inline void save_tensor(const Tensor& t, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot open for write: " + path);
    const char magic[4] = {'F', 'T', 'E', 'N'};
    const std::uint32_t version = 1, ndims = 3;
    const std::uint32_t dims[3] = {static_cast<std::uint32_t>(t.c), static_cast<std::uint32_t>(t.h),
                                   static_cast<std::uint32_t>(t.w)};
    out.write(magic, 4);
    out.write(reinterpret_cast<const char*>(&version), 4);
    out.write(reinterpret_cast<const char*>(&ndims), 4);
    out.write(reinterpret_cast<const char*>(dims), sizeof(dims));
    out.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size() * 4));
    if (!out) throw InputError("short write: " + path);
}

inline Tensor load_tensor(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open: " + path);
    char magic[4];
    std::uint32_t version = 0, ndims = 0;
    in.read(magic, 4);
    in.read(reinterpret_cast<char*>(&version), 4);
    in.read(reinterpret_cast<char*>(&ndims), 4);
    if (!in || std::memcmp(magic, "FTEN", 4) != 0) throw InputError("not a FTEN file: " + path);
    if (version != 1) throw InputError("unsupported FTEN version in " + path);
    if (ndims != 3) throw InputError("expected 3-d tensor in " + path);
    std::uint32_t dims[3];
    in.read(reinterpret_cast<char*>(dims), sizeof(dims));
    Tensor t(static_cast<int>(dims[0]), static_cast<int>(dims[1]), static_cast<int>(dims[2]));
    in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size() * 4));
    if (!in) throw InputError("truncated FTEN file: " + path);
    return t;
}

// ---------------------------------------------------------------------------
// PNG/JPEG via OpenCV. Images on disk are 8-bit BGR; in memory they are
// CxHxW float in [0,1] with RGB channel order.
// ---------------------------------------------------------------------------

inline Tensor load_image(const std::string& path) {
    cv::Mat img = cv::imread(path, cv::IMREAD_COLOR);
    if (img.empty()) throw InputError("cannot read image: " + path);
    Tensor t(3, img.rows, img.cols);
    for (int y = 0; y < img.rows; ++y)
        for (int x = 0; x < img.cols; ++x) {
            const cv::Vec3b px = img.at<cv::Vec3b>(y, x);
            t.at(0, y, x) = px[2] / 255.0f;
            t.at(1, y, x) = px[1] / 255.0f;
            t.at(2, y, x) = px[0] / 255.0f;
        }
    return t;
}

inline void save_image(const Tensor& t, const std::string& path) {
    if (t.c != 3 && t.c != 1) throw InputError("save_image: need 1 or 3 channels");
    cv::Mat img(t.h, t.w, CV_8UC3);
    auto q = [](float v) {
        const float s = std::min(1.0f, std::max(0.0f, v)) * 255.0f;
        return static_cast<std::uint8_t>(s + 0.5f);
    };
    for (int y = 0; y < t.h; ++y)
        for (int x = 0; x < t.w; ++x) {
            const int r = 0, g = t.c == 3 ? 1 : 0, b = t.c == 3 ? 2 : 0;
            img.at<cv::Vec3b>(y, x) = cv::Vec3b(q(t.at(b, y, x)), q(t.at(g, y, x)), q(t.at(r, y, x)));
        }
    if (!cv::imwrite(path, img)) throw InputError("cannot write image: " + path);
}

// Center-crop to square then resize (ImageNet-style ingestion rule).
inline Tensor center_resize(const Tensor& t, int side) {
    cv::Mat img(t.h, t.w, CV_32FC3);
    for (int y = 0; y < t.h; ++y)
        for (int x = 0; x < t.w; ++x)
            img.at<cv::Vec3f>(y, x) = cv::Vec3f(t.at(0, y, x), t.at(1, y, x), t.at(2, y, x));
    const int s = std::min(t.h, t.w);
    const cv::Rect roi((t.w - s) / 2, (t.h - s) / 2, s, s);
    cv::Mat resized;
    cv::resize(img(roi), resized, cv::Size(side, side), 0, 0, cv::INTER_AREA);
    Tensor out(3, side, side);
    for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x) {
            const cv::Vec3f px = resized.at<cv::Vec3f>(y, x);
            out.at(0, y, x) = px[0];
            out.at(1, y, x) = px[1];
            out.at(2, y, x) = px[2];
        }
    return out.clip(0.0f, 1.0f);
}

}  // namespace dipdef

#endif
