#include "core/image.hpp"

#include <algorithm>
#include <opencv2/imgcodecs.hpp>

#include "core/error.hpp"

namespace bsldm {

real Image::mean() const {
    real s = 0.0;
    for (real v : px) s += v;
    return px.empty() ? 0.0 : s / static_cast<real>(px.size());
}

real Image::min() const { return *std::min_element(px.begin(), px.end()); }
real Image::max() const { return *std::max_element(px.begin(), px.end()); }

Image load_png_gray(const std::string& path) {
    cv::Mat m = cv::imread(path, cv::IMREAD_UNCHANGED);
    require(!m.empty(), Status::Io, "cannot read image: " + path);
    require(m.channels() == 1, Status::InvalidArgument,
            "expected single-channel grayscale image: " + path);
    Image img(m.rows, m.cols);
    if (m.depth() == CV_16U) {
        for (int y = 0; y < m.rows; ++y)
            for (int x = 0; x < m.cols; ++x)
                img.at(y, x) = m.at<std::uint16_t>(y, x) / 65535.0;
    } else if (m.depth() == CV_8U) {
        for (int y = 0; y < m.rows; ++y)
            for (int x = 0; x < m.cols; ++x)
                img.at(y, x) = m.at<std::uint8_t>(y, x) / 255.0;
    } else {
        fail(Status::InvalidArgument, "unsupported image bit depth: " + path);
    }
    return img;
}

void save_png_gray16(const Image& img, const std::string& path) {
    cv::Mat m(img.h, img.w, CV_16U);
    for (int y = 0; y < img.h; ++y) {
        for (int x = 0; x < img.w; ++x) {
            real v = std::clamp(img.at(y, x), 0.0, 1.0);
            m.at<std::uint16_t>(y, x) = static_cast<std::uint16_t>(std::lround(v * 65535.0));
        }
    }
    bool ok = cv::imwrite(path, m);
    require(ok, Status::Io, "cannot write image: " + path);
}

Tensor image_to_tensor(const Image& img) {
    Tensor t({1, 1, img.h, img.w});
    std::copy(img.px.begin(), img.px.end(), t.data());
    return t;
}

Image tensor_to_image(const Tensor& t) {
    require(t.ndim() == 4 && t.dim(0) == 1 && t.dim(1) == 1, Status::InvalidArgument,
            "expected 1x1xHxW tensor, got " + t.shape_str());
    Image img(t.dim(2), t.dim(3));
    std::copy(t.data(), t.data() + t.size(), img.px.begin());
    return img;
}

}  // namespace bsldm
