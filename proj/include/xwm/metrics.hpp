#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace xwm {

/// One text's watermark strength before (S) and after (S-hat) an attack or
/// translation.
struct StrengthRecord {
    std::string text_id;
    std::size_t length = 1;
    double before = 0.0;
    double after = 0.0;
};

struct StrengthSeries {
    std::vector<StrengthRecord> records;
};

/// Pearson correlation of two equally long samples. Throws
/// std::invalid_argument for fewer than two points or zero variance.
double pearson(std::span<const double> x, std::span<const double> y);

/// Pearson correlation between S and S-hat over the series.
double pcc(const StrengthSeries& series);

/// Spearman rank correlation (average ranks for ties).
double spearman(std::span<const double> x, std::span<const double> y);

struct LengthBin {
    std::size_t lower = 0;  // inclusive
    std::size_t upper = 0;  // exclusive
    std::size_t count = 0;
    double mean_before = 0.0;
    double mean_after = 0.0;
};

/// Groups records into [k*w, (k+1)*w) length bins and averages S and S-hat
/// within each non-empty bin. Bins are returned in increasing length order.
std::vector<LengthBin> strength_vs_length_report(const StrengthSeries& series, std::size_t bin_width);

enum class Normalization {
    /// One min and max over both S and S-hat bin means.
    Joint,
    /// S and S-hat each scaled by their own min and max.
    Separate,
};

struct RelativeErrorConfig {
    std::size_t bin_width = 25;
    /// Bins whose normalised S falls below this are skipped.
    double epsilon = 0.05;
    Normalization normalization = Normalization::Joint;
};

/// Mean over bins of |S-hat - S| / |S| in percent, on already normalised bin
/// means. Throws std::invalid_argument if every bin is skipped.
double relative_error_normalized(std::span<const double> s, std::span<const double> s_hat, double epsilon);

/// Length-binned, min-max normalised relative error in percent.
double relative_error(const StrengthSeries& series, const RelativeErrorConfig& config = {});

enum class Label { Watermarked, Clean };

struct DetectionRecord {
    double score = 0.0;
    Label label = Label::Clean;
};

/// Operating points for every distinct score, thresholds descending. Point 0
/// is (+inf, fpr 0, tpr 0); the last point has fpr = tpr = 1.
struct RocCurve {
    std::vector<double> thresholds;
    std::vector<double> fpr;
    std::vector<double> tpr;
    double auc = 0.0;
};

/// Threshold sweep with trapezoidal area, which counts ties as one half.
/// Throws std::invalid_argument unless both labels are present and all scores
/// are finite.
RocCurve roc(std::span<const DetectionRecord> records);

/// Mann-Whitney U / (n_w * n_c) from mid-ranks.
double auc_rank_statistic(std::span<const DetectionRecord> records);

/// Largest TPR among operating points whose FPR does not exceed the target,
/// i.e. the TPR at the lowest threshold that keeps FPR <= target.
double tpr_at_fpr(const RocCurve& curve, double fpr_target = 0.1);

/// CSV with a header row; `#` comment lines from `preamble` come first.
void write_length_report_csv(std::ostream& out, std::span<const LengthBin> bins,
                             std::span<const std::string> preamble = {});
void write_roc_csv(std::ostream& out, const RocCurve& curve, std::span<const std::string> preamble = {});

}  // namespace xwm
