#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

namespace crashcast {

// Counts are doubles so the same type carries exact tallies and the
// fractional counts induced by an interpolated EER operating point.
struct ConfusionMatrix2 {
    double tp = 0.0, fp = 0.0, fn = 0.0, tn = 0.0;
    double total() const { return tp + fp + fn + tn; }
};

struct BinaryRates {
    double tpr = 0.0, fpr = 0.0;
    double precision = 0.0;     // 1 - FPR (the identity Table 4 satisfies)
    double precision_ppv = 0.0; // TP / (TP + FP)
    bool tpr_defined = false, fpr_defined = false, ppv_defined = false;
};

struct RocPoint {
    double fpr = 0.0, tpr = 0.0, threshold = 0.0;
};

struct RocCurve {
    std::vector<RocPoint> points; // starts at (0,0,+inf), ends at (1,1,min score)
    std::size_t positives = 0, negatives = 0;
};

struct EerPoint {
    double tpr = 0.0, fpr = 0.0, threshold = 0.0;
};

struct RegressionMetrics {
    double mse = 0.0, rmse = 0.0, r = 0.0;
    bool r_defined = false; // false when SST == 0
    bool r_clamped = false; // true when SSE > SST forced the radicand to 0
};

struct ClassReport {
    bool present = false; // class had truth instances
    std::size_t observations = 0;
    double auc = 0.0;
    double eer_threshold = 0.0;
    double tpr = 0.0;
    double far = 0.0;           // FPR at the EER threshold
    double precision = 0.0;     // 1 - far
    double precision_ppv = 0.0; // fractional TP/(TP+FP) at the EER point
    bool ppv_defined = false;
    double tp = 0.0, fp = 0.0, fn = 0.0, tn = 0.0; // fractional counts
};

struct AggregateReport {
    double auc = 0.0, far = 0.0, precision = 0.0;
};

struct EvalReport {
    std::array<ClassReport, 3> classes; // indexed by class {0, 0.5, 1}
    AggregateReport micro, macro, weighted_macro;
    double micro_tpr = 0.0;
    double micro_eer_threshold = 0.0;
    double micro_precision_ppv = 0.0; // pooled sum(TP)/sum(TP+FP)
    bool micro_ppv_defined = false;
    RegressionMetrics regression;
    bool has_regression = false;
    std::size_t missing_classes = 0; // classes with no truth instances
};

ConfusionMatrix2 confusion_binary(const std::vector<bool>& predicted,
                                  const std::vector<bool>& truth);

BinaryRates binary_rates(const ConfusionMatrix2& cm);

// One curve point per unique score, descending; tied scores move together.
// Throws SingleClassError unless both a positive and a negative are present.
RocCurve roc_curve(const std::vector<double>& scores, const std::vector<bool>& truth);

double auc(const RocCurve& curve);

// Operating point where TPR = 1 - FPR, linearly interpolated between curve
// points when the crossing falls inside a segment.
EerPoint eer_threshold(const RocCurve& curve);

RegressionMetrics regression_metrics(const std::vector<double>& predicted,
                                     const std::vector<double>& observed);

struct RocSet {
    std::array<RocCurve, 3> per_class;
    std::array<bool, 3> present{};
    RocCurve micro;
};

// Full Table-4-style one-vs-rest evaluation. per_class_scores[c] holds the
// score column for class c in {0, 0.5, 1}; truth_labels holds the observed
// risk values; predicted_risk (may be empty) feeds the MSE/RMSE/R block.
// When curves is non-null the per-class and pooled ROC curves are copied out.
EvalReport one_vs_rest_report(const std::array<std::vector<double>, 3>& per_class_scores,
                              const std::vector<double>& truth_labels,
                              const std::vector<double>& predicted_risk,
                              RocSet* curves = nullptr);

extern const char* const kClassRowNames[3]; // "Class 0", "Class 0.5", "Class 1"

void write_report_csv(const std::string& path, const EvalReport& report);
void write_report_json(const std::string& path, const EvalReport& report,
                       const std::string& model_kind);
void write_roc_csv(const std::string& path, const RocCurve& curve);
void write_roc_svg(const std::string& path,
                   const std::vector<std::pair<std::string, RocCurve>>& curves);

} // namespace crashcast
