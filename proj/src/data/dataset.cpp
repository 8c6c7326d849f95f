#include "data/dataset.hpp"

#include <algorithm>
#include <cmath>

#include <opencv2/imgproc.hpp>

#include "core/csv.hpp"
#include "core/error.hpp"
#include "core/rng.hpp"

namespace bsldm::data {

std::string split_name(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Val: return "val";
        case Split::Test: return "test";
    }
    fail(Status::Internal, "bad split");
}

Split split_from_name(const std::string& name) {
    if (name == "train") return Split::Train;
    if (name == "val") return Split::Val;
    if (name == "test") return Split::Test;
    fail(Status::InvalidArgument, "unknown split: " + name);
}

Image preprocess(const Image& raw, const PreprocessConfig& cfg) {
    require(raw.h > 0 && raw.w > 0, Status::InvalidArgument, "preprocess: empty image");
    require(cfg.target_size > 0, Status::InvalidArgument, "preprocess: bad target size");
    require(cfg.clahe_clip > 0.0 && cfg.clahe_grid > 0, Status::InvalidArgument,
            "preprocess: bad CLAHE parameters");

    cv::Mat m(raw.h, raw.w, CV_16UC1);
    for (int y = 0; y < raw.h; ++y)
        for (int x = 0; x < raw.w; ++x) {
            const real v = std::clamp(raw.px[static_cast<size_t>(y) * raw.w + x], 0.0, 1.0);
            m.at<std::uint16_t>(y, x) = static_cast<std::uint16_t>(std::lround(v * 65535.0));
        }

    if (cfg.clahe_enabled) {
        auto clahe = cv::createCLAHE(cfg.clahe_clip, cv::Size(cfg.clahe_grid, cfg.clahe_grid));
        clahe->apply(m, m);
    }

    if (raw.h != cfg.target_size || raw.w != cfg.target_size) {
        const bool shrink = cfg.target_size < std::min(raw.h, raw.w);
        cv::resize(m, m, cv::Size(cfg.target_size, cfg.target_size), 0, 0,
                   shrink ? cv::INTER_AREA : cv::INTER_LINEAR);
    }

    Image out;
    out.h = cfg.target_size;
    out.w = cfg.target_size;
    out.px.resize(static_cast<size_t>(out.h) * out.w);
    real lo = 1.0, hi = 0.0;
    for (int y = 0; y < out.h; ++y)
        for (int x = 0; x < out.w; ++x) {
            const real v = m.at<std::uint16_t>(y, x) / 65535.0;
            out.px[static_cast<size_t>(y) * out.w + x] = v;
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }

    if (cfg.normalize == NormalizeMode::MinMax) {
        if (hi > lo) {
            for (auto& v : out.px) v = (v - lo) / (hi - lo) * 2.0 - 1.0;
        } else {
            for (auto& v : out.px) v = 0.0;
        }
    } else {
        for (auto& v : out.px) v = std::clamp(v * 2.0 - 1.0, -1.0, 1.0);
    }
    return out;
}

Image jsrt_to_negative(const Image& img, real gamma) {
    require(gamma > 0.0, Status::InvalidArgument, "jsrt_to_negative: gamma must be positive");
    Image out = img;
    for (auto& v : out.px) {
        const real inv = std::clamp(1.0 - v, 0.0, 1.0);
        v = gamma == 1.0 ? inv : std::pow(inv, gamma);
    }
    return out;
}

std::array<int, 3> split_counts(int n, const std::array<real, 3>& ratios) {
    real sum = ratios[0] + ratios[1] + ratios[2];
    require(std::fabs(sum - 1.0) < 1e-9, Status::InvalidArgument, "split ratios must sum to 1");
    require(n > 0, Status::InvalidArgument, "split_dataset: empty dataset");

    std::array<int, 3> counts{};
    std::array<real, 3> frac{};
    int assigned = 0;
    for (int i = 0; i < 3; ++i) {
        const real exact = ratios[static_cast<size_t>(i)] * n;
        counts[static_cast<size_t>(i)] = static_cast<int>(std::floor(exact));
        frac[static_cast<size_t>(i)] = exact - std::floor(exact);
        assigned += counts[static_cast<size_t>(i)];
    }
    std::array<int, 3> order{0, 1, 2};
    // explicit index tie break: equal remainders favor train, then val
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (frac[static_cast<size_t>(a)] != frac[static_cast<size_t>(b)])
            return frac[static_cast<size_t>(a)] > frac[static_cast<size_t>(b)];
        return a < b;
    });
    for (int k = 0; assigned < n; ++k, ++assigned)
        ++counts[static_cast<size_t>(order[static_cast<size_t>(k % 3)])];
    return counts;
}

std::vector<Split> split_dataset(int n, const std::array<real, 3>& ratios, std::uint64_t seed) {
    const auto counts = split_counts(n, ratios);
    Rng rng(seed);
    const auto perm = shuffled_indices(n, rng);
    std::vector<Split> out(static_cast<size_t>(n), Split::Train);
    for (int i = 0; i < n; ++i) {
        Split s = Split::Train;
        if (i >= counts[0] + counts[1])
            s = Split::Test;
        else if (i >= counts[0])
            s = Split::Val;
        out[static_cast<size_t>(perm[static_cast<size_t>(i)])] = s;
    }
    return out;
}

void write_manifest(const std::string& path, const std::vector<ManifestRow>& rows) {
    CsvWriter csv(path, false);
    csv.row({"id", "split", "cxr", "tissue", "bone"});
    for (const auto& r : rows)
        csv.row({r.id, split_name(r.split), r.cxr_path, r.tissue_path, r.bone_path});
}

std::vector<ManifestRow> read_manifest(const std::string& path) {
    const auto table = read_csv(path);
    require(!table.empty(), Status::Io, "manifest empty or unreadable: " + path);
    require(table[0].size() == 5 && table[0][0] == "id", Status::Io,
            "manifest header mismatch: " + path);
    std::vector<ManifestRow> rows;
    rows.reserve(table.size() - 1);
    for (size_t i = 1; i < table.size(); ++i) {
        require(table[i].size() == 5, Status::Io, "manifest row width mismatch: " + path);
        ManifestRow r;
        r.id = table[i][0];
        r.split = split_from_name(table[i][1]);
        r.cxr_path = table[i][2];
        r.tissue_path = table[i][3];
        r.bone_path = table[i][4];
        rows.push_back(std::move(r));
    }
    return rows;
}

}  // namespace bsldm::data
