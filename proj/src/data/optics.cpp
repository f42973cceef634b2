#include "fump/data/optics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

namespace fump::data {

namespace {

double dist(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

void check_input(const FeatureMatrix& points, std::size_t min_pts) {
    if (min_pts == 0) throw std::invalid_argument("optics: min_pts must be >= 1");
    if (points.size() < min_pts) {
        throw std::invalid_argument("optics: " + std::to_string(points.size()) + " points but min_pts = " +
                                    std::to_string(min_pts));
    }
    for (const auto& p : points) {
        if (p.size() != points[0].size()) throw std::invalid_argument("optics: rows differ in width");
    }
}

void finish(ClusterResult& r) {
    r.cut = reachability_cut(r.reachability);
    r.labels = extract_flat(r.ordering, r.reachability, r.core_distance, r.cut);
    int n_clusters = 0;
    for (int l : r.labels) n_clusters = std::max(n_clusters, l + 1);
    r.cluster_sizes.assign(static_cast<std::size_t>(n_clusters), 0);
    for (int l : r.labels) {
        if (l >= 0) ++r.cluster_sizes[static_cast<std::size_t>(l)];
    }
}

}  // namespace

ClusterResult optics(const FeatureMatrix& points, std::size_t min_pts, double max_eps) {
    check_input(points, min_pts);
    const std::size_t n = points.size();
    std::vector<double> d(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) d[i * n + j] = d[j * n + i] = i == j ? 0.0 : dist(points[i], points[j]);
    }

    ClusterResult r;
    r.core_distance.resize(n);
    std::vector<double> row(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::copy_n(d.begin() + static_cast<std::ptrdiff_t>(i * n), n, row.begin());
        std::nth_element(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(min_pts - 1), row.end());
        const double c = row[min_pts - 1];
        r.core_distance[i] = c <= max_eps ? c : kInf;
    }

    r.reachability.assign(n, kInf);
    std::vector<char> done(n, 0);
    std::set<std::pair<double, std::size_t>> seeds;
    auto expand = [&](std::size_t p) {
        done[p] = 1;
        r.ordering.push_back(p);
        if (!std::isfinite(r.core_distance[p])) return;
        for (std::size_t q = 0; q < n; ++q) {
            const double dpq = d[p * n + q];
            if (done[q] || dpq > max_eps) continue;
            const double nr = std::max(r.core_distance[p], dpq);
            if (nr < r.reachability[q]) {
                if (std::isfinite(r.reachability[q])) seeds.erase({r.reachability[q], q});
                r.reachability[q] = nr;
                seeds.insert({nr, q});
            }
        }
    };
    for (std::size_t start = 0; start < n; ++start) {
        if (done[start]) continue;
        expand(start);
        while (!seeds.empty()) {
            const std::size_t q = seeds.begin()->second;
            seeds.erase(seeds.begin());
            expand(q);
        }
    }
    finish(r);
    return r;
}

ClusterResult optics_reference(const FeatureMatrix& points, std::size_t min_pts, double max_eps) {
    check_input(points, min_pts);
    const std::size_t n = points.size();
    ClusterResult r;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> ds;
        for (std::size_t j = 0; j < n; ++j) ds.push_back(dist(points[i], points[j]));
        std::sort(ds.begin(), ds.end());
        r.core_distance.push_back(ds[min_pts - 1] <= max_eps ? ds[min_pts - 1] : kInf);
    }
    r.reachability.assign(n, kInf);
    std::vector<char> done(n, 0);
    while (r.ordering.size() < n) {
        // Next point: smallest finite reachability among unprocessed points,
        // else the lowest unprocessed index.
        std::size_t next = n;
        for (std::size_t q = 0; q < n; ++q) {
            if (done[q] || !std::isfinite(r.reachability[q])) continue;
            if (next == n || r.reachability[q] < r.reachability[next]) next = q;
        }
        if (next == n) {
            next = 0;
            while (done[next]) ++next;
        }
        done[next] = 1;
        r.ordering.push_back(next);
        if (!std::isfinite(r.core_distance[next])) continue;
        for (std::size_t q = 0; q < n; ++q) {
            if (done[q]) continue;
            const double dq = dist(points[next], points[q]);
            if (dq > max_eps) continue;
            r.reachability[q] = std::min(r.reachability[q], std::max(r.core_distance[next], dq));
        }
    }
    finish(r);
    return r;
}

double reachability_cut(std::span<const double> reachability, double percentile, double dominant_ratio) {
    std::vector<double> v;
    for (double x : reachability) {
        if (std::isfinite(x)) v.push_back(x);
    }
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t lo = static_cast<std::size_t>(std::floor(percentile * static_cast<double>(v.size() - 1)));
    double best_ratio = 1.0;
    std::size_t best = lo;
    for (std::size_t i = lo; i + 1 < v.size(); ++i) {
        if (v[i + 1] <= v[i]) continue;
        const double ratio = v[i] > 0.0 ? v[i + 1] / v[i] : kInf;
        if (ratio > best_ratio) {
            best_ratio = ratio;
            best = i;
        }
    }
    if (best_ratio < dominant_ratio) return v[lo];
    return v[best] > 0.0 ? std::sqrt(v[best] * v[best + 1]) : 0.5 * v[best + 1];
}

std::vector<int> extract_flat(std::span<const std::size_t> ordering, std::span<const double> reachability,
                              std::span<const double> core_distance, double cut) {
    std::vector<int> labels(reachability.size(), -1);
    int current = -1;
    int next_id = 0;
    for (std::size_t p : ordering) {
        if (reachability[p] > cut) {
            if (core_distance[p] <= cut) {
                current = next_id++;
                labels[p] = current;
            } else {
                labels[p] = -1;
            }
        } else {
            labels[p] = current;
        }
    }
    return labels;
}

FeatureMatrix longtail_features(const std::vector<scene::Scene>& scenes) {
    FeatureMatrix out;
    out.reserve(scenes.size());
    for (const auto& s : scenes) {
        std::vector<double> f;
        for (const auto& p : s.ego_future_gt) {
            f.push_back(p.x);
            f.push_back(p.y);
        }
        out.push_back(std::move(f));
    }
    return out;
}

CurateResult curate_longtail(const std::vector<scene::Scene>& scenes, std::size_t k_smallest, std::size_t min_pts,
                             double max_eps) {
    CurateResult res;
    res.clusters = optics(longtail_features(scenes), min_pts, max_eps);
    const auto& sizes = res.clusters.cluster_sizes;
    std::vector<int> order(sizes.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return sizes[static_cast<std::size_t>(a)] < sizes[static_cast<std::size_t>(b)];
    });
    if (k_smallest > order.size()) {
        res.warning = "requested " + std::to_string(k_smallest) + " clusters but only " + std::to_string(order.size()) +
                      " were found; returning all clustered scenes";
        k_smallest = order.size();
    }
    res.selected_clusters.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k_smallest));
    std::sort(res.selected_clusters.begin(), res.selected_clusters.end());
    for (std::size_t i = 0; i < scenes.size(); ++i) {
        const int l = res.clusters.labels[i];
        if (l >= 0 && std::binary_search(res.selected_clusters.begin(), res.selected_clusters.end(), l)) {
            res.indices.push_back(i);
        }
    }
    return res;
}

}  // namespace fump::data
