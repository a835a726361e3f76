#include "xwm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>
#include <stdexcept>
#include <utility>

namespace xwm {

namespace {

// Pairs in sorted order, so every sum below is independent of input order.
std::vector<std::pair<double, double>> sorted_pairs(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw std::invalid_argument("correlation: samples differ in length");
    if (x.size() < 2) throw std::invalid_argument("correlation: need at least two points");
    std::vector<std::pair<double, double>> pairs(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!std::isfinite(x[i]) || !std::isfinite(y[i])) throw std::invalid_argument("correlation: non-finite value");
        pairs[i] = {x[i], y[i]};
    }
    std::sort(pairs.begin(), pairs.end());
    return pairs;
}

std::vector<double> mid_ranks(std::span<const double> values) {
    std::vector<std::size_t> order(values.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(values.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
        const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
        i = j + 1;
    }
    return ranks;
}

}  // namespace

double pearson(std::span<const double> x, std::span<const double> y) {
    const auto pairs = sorted_pairs(x, y);
    const double n = static_cast<double>(pairs.size());
    double mx = 0.0;
    double my = 0.0;
    for (const auto& [a, b] : pairs) {
        mx += a;
        my += b;
    }
    mx /= n;
    my /= n;
    double sxy = 0.0;
    double sxx = 0.0;
    double syy = 0.0;
    for (const auto& [a, b] : pairs) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if (sxx == 0.0 || syy == 0.0) throw std::invalid_argument("correlation: a sample has zero variance");
    return sxy / std::sqrt(sxx * syy);
}

double pcc(const StrengthSeries& series) {
    std::vector<double> before;
    std::vector<double> after;
    for (const auto& r : series.records) {
        before.push_back(r.before);
        after.push_back(r.after);
    }
    return pearson(before, after);
}

double spearman(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw std::invalid_argument("correlation: samples differ in length");
    const auto rx = mid_ranks(x);
    const auto ry = mid_ranks(y);
    return pearson(rx, ry);
}

std::vector<LengthBin> strength_vs_length_report(const StrengthSeries& series, std::size_t bin_width) {
    if (bin_width == 0) throw std::invalid_argument("length report: bin width must be positive");
    std::vector<const StrengthRecord*> sorted;
    for (const auto& r : series.records) {
        if (!std::isfinite(r.before) || !std::isfinite(r.after)) {
            throw std::invalid_argument("length report: non-finite strength for '" + r.text_id + "'");
        }
        sorted.push_back(&r);
    }
    std::sort(sorted.begin(), sorted.end(), [](const StrengthRecord* a, const StrengthRecord* b) {
        return std::tie(a->length, a->before, a->after) < std::tie(b->length, b->before, b->after);
    });
    std::map<std::size_t, LengthBin> bins;
    for (const auto* r : sorted) {
        const std::size_t k = r->length / bin_width;
        auto& bin = bins[k];
        bin.lower = k * bin_width;
        bin.upper = (k + 1) * bin_width;
        ++bin.count;
        bin.mean_before += r->before;
        bin.mean_after += r->after;
    }
    std::vector<LengthBin> out;
    for (auto& [k, bin] : bins) {
        bin.mean_before /= static_cast<double>(bin.count);
        bin.mean_after /= static_cast<double>(bin.count);
        out.push_back(bin);
    }
    return out;
}

double relative_error_normalized(std::span<const double> s, std::span<const double> s_hat, double epsilon) {
    if (s.size() != s_hat.size()) throw std::invalid_argument("relative error: series differ in length");
    double total = 0.0;
    std::size_t used = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (std::abs(s[i]) < epsilon) continue;
        total += std::abs(s_hat[i] - s[i]) / std::abs(s[i]);
        ++used;
    }
    if (used == 0) throw std::invalid_argument("relative error: every bin falls below epsilon");
    return 100.0 * total / static_cast<double>(used);
}

namespace {

void min_max_normalize(std::vector<double>& v, double lo, double hi) {
    const double range = hi - lo;
    for (double& x : v) x = range > 0.0 ? (x - lo) / range : 0.0;
}

}  // namespace

double relative_error(const StrengthSeries& series, const RelativeErrorConfig& config) {
    const auto bins = strength_vs_length_report(series, config.bin_width);
    if (bins.empty()) throw std::invalid_argument("relative error: empty series");
    std::vector<double> s;
    std::vector<double> s_hat;
    for (const auto& bin : bins) {
        s.push_back(bin.mean_before);
        s_hat.push_back(bin.mean_after);
    }
    const auto [s_lo, s_hi] = std::minmax_element(s.begin(), s.end());
    const auto [h_lo, h_hi] = std::minmax_element(s_hat.begin(), s_hat.end());
    if (config.normalization == Normalization::Joint) {
        const double lo = std::min(*s_lo, *h_lo);
        const double hi = std::max(*s_hi, *h_hi);
        min_max_normalize(s, lo, hi);
        min_max_normalize(s_hat, lo, hi);
    } else {
        const double a = *s_lo, b = *s_hi, c = *h_lo, d = *h_hi;
        min_max_normalize(s, a, b);
        min_max_normalize(s_hat, c, d);
    }
    return relative_error_normalized(s, s_hat, config.epsilon);
}

namespace {

void check_detection(std::span<const DetectionRecord> records, std::size_t& positives, std::size_t& negatives) {
    positives = 0;
    negatives = 0;
    for (const auto& r : records) {
        if (!std::isfinite(r.score)) throw std::invalid_argument("roc: non-finite score");
        (r.label == Label::Watermarked ? positives : negatives)++;
    }
    if (positives == 0 || negatives == 0) throw std::invalid_argument("roc: need both watermarked and clean records");
}

}  // namespace

RocCurve roc(std::span<const DetectionRecord> records) {
    std::size_t positives = 0;
    std::size_t negatives = 0;
    check_detection(records, positives, negatives);
    std::vector<DetectionRecord> sorted(records.begin(), records.end());
    std::sort(sorted.begin(), sorted.end(), [](const DetectionRecord& a, const DetectionRecord& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.label < b.label;
    });

    RocCurve curve;
    curve.thresholds.push_back(std::numeric_limits<double>::infinity());
    curve.fpr.push_back(0.0);
    curve.tpr.push_back(0.0);
    std::size_t tp = 0;
    std::size_t fp = 0;
    for (std::size_t i = 0; i < sorted.size();) {
        const double t = sorted[i].score;
        for (; i < sorted.size() && sorted[i].score == t; ++i) {
            (sorted[i].label == Label::Watermarked ? tp : fp)++;
        }
        curve.thresholds.push_back(t);
        curve.fpr.push_back(static_cast<double>(fp) / static_cast<double>(negatives));
        curve.tpr.push_back(static_cast<double>(tp) / static_cast<double>(positives));
    }
    for (std::size_t k = 1; k < curve.fpr.size(); ++k) {
        curve.auc += (curve.fpr[k] - curve.fpr[k - 1]) * 0.5 * (curve.tpr[k] + curve.tpr[k - 1]);
    }
    return curve;
}

double auc_rank_statistic(std::span<const DetectionRecord> records) {
    std::size_t positives = 0;
    std::size_t negatives = 0;
    check_detection(records, positives, negatives);
    std::vector<double> scores;
    for (const auto& r : records) scores.push_back(r.score);
    const auto ranks = mid_ranks(scores);
    double rank_sum = 0.0;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (records[i].label == Label::Watermarked) rank_sum += ranks[i];
    }
    const double np = static_cast<double>(positives);
    const double u = rank_sum - np * (np + 1.0) / 2.0;
    return u / (np * static_cast<double>(negatives));
}

double tpr_at_fpr(const RocCurve& curve, double fpr_target) {
    if (curve.fpr.empty()) throw std::invalid_argument("tpr_at_fpr: empty curve");
    double best = 0.0;
    for (std::size_t k = 0; k < curve.fpr.size(); ++k) {
        if (curve.fpr[k] <= fpr_target) best = std::max(best, curve.tpr[k]);
    }
    return best;
}

namespace {

void write_preamble(std::ostream& out, std::span<const std::string> preamble) {
    for (const auto& line : preamble) out << "# " << line << '\n';
}

}  // namespace

void write_length_report_csv(std::ostream& out, std::span<const LengthBin> bins, std::span<const std::string> preamble) {
    write_preamble(out, preamble);
    out << "length_lower,length_upper,count,mean_before,mean_after\n";
    for (const auto& bin : bins) {
        out << bin.lower << ',' << bin.upper << ',' << bin.count << ',' << bin.mean_before << ',' << bin.mean_after
            << '\n';
    }
}

void write_roc_csv(std::ostream& out, const RocCurve& curve, std::span<const std::string> preamble) {
    write_preamble(out, preamble);
    out << "threshold,fpr,tpr\n";
    for (std::size_t k = 0; k < curve.fpr.size(); ++k) {
        out << curve.thresholds[k] << ',' << curve.fpr[k] << ',' << curve.tpr[k] << '\n';
    }
}

}  // namespace xwm
