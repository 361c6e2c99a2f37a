#include "crashcast/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "crashcast/csv.hpp"
#include "crashcast/errors.hpp"

namespace crashcast {

namespace {

constexpr double kClassCenters[3] = {0.0, 0.5, 1.0};
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

} // namespace

const char* const kClassRowNames[3] = {"Class 0", "Class 0.5", "Class 1"};

ConfusionMatrix2 confusion_binary(const std::vector<bool>& predicted,
                                  const std::vector<bool>& truth) {
    if (predicted.size() != truth.size())
        throw LengthMismatchError("predicted/truth length mismatch");
    ConfusionMatrix2 cm;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i])
            (predicted[i] ? cm.tp : cm.fn) += 1.0;
        else
            (predicted[i] ? cm.fp : cm.tn) += 1.0;
    }
    return cm;
}

BinaryRates binary_rates(const ConfusionMatrix2& cm) {
    BinaryRates r;
    r.tpr_defined = cm.tp + cm.fn > 0.0;
    r.fpr_defined = cm.fp + cm.tn > 0.0;
    r.ppv_defined = cm.tp + cm.fp > 0.0;
    r.tpr = r.tpr_defined ? cm.tp / (cm.tp + cm.fn) : kNaN;
    r.fpr = r.fpr_defined ? cm.fp / (cm.fp + cm.tn) : kNaN;
    r.precision = r.fpr_defined ? 1.0 - r.fpr : kNaN;
    r.precision_ppv = r.ppv_defined ? cm.tp / (cm.tp + cm.fp) : kNaN;
    return r;
}

RocCurve roc_curve(const std::vector<double>& scores, const std::vector<bool>& truth) {
    if (scores.size() != truth.size())
        throw LengthMismatchError("scores/truth length mismatch");
    const std::size_t n = scores.size();
    std::size_t positives = 0;
    for (bool t : truth) positives += t ? 1 : 0;
    const std::size_t negatives = n - positives;
    if (positives == 0 || negatives == 0)
        throw SingleClassError("ROC needs at least one positive and one negative");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    RocCurve curve;
    curve.positives = positives;
    curve.negatives = negatives;
    curve.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
    double tp = 0.0, fp = 0.0;
    std::size_t i = 0;
    while (i < n) {
        double s = scores[order[i]];
        std::size_t j = i;
        while (j < n && scores[order[j]] == s) {
            (truth[order[j]] ? tp : fp) += 1.0;
            ++j;
        }
        curve.points.push_back({fp / static_cast<double>(negatives),
                                tp / static_cast<double>(positives), s});
        i = j;
    }
    return curve;
}

double auc(const RocCurve& curve) {
    double area = 0.0;
    for (std::size_t i = 1; i < curve.points.size(); ++i) {
        const RocPoint& a = curve.points[i - 1];
        const RocPoint& b = curve.points[i];
        area += (b.fpr - a.fpr) * (a.tpr + b.tpr) / 2.0;
    }
    return area;
}

EerPoint eer_threshold(const RocCurve& curve) {
    // d = TPR + FPR - 1 is non-decreasing along the curve, from -1 to +1.
    const auto& pts = curve.points;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        double d = pts[i].tpr + pts[i].fpr - 1.0;
        if (d < 0.0) continue;
        if (d == 0.0 || i == 0) return {pts[i].tpr, pts[i].fpr, pts[i].threshold};
        const RocPoint& a = pts[i - 1];
        const RocPoint& b = pts[i];
        double da = a.tpr + a.fpr - 1.0;
        double t = -da / (d - da);
        EerPoint p;
        p.tpr = a.tpr + t * (b.tpr - a.tpr);
        p.fpr = a.fpr + t * (b.fpr - a.fpr);
        // The curve opens with an infinite sentinel threshold; a crossing in
        // that first segment takes the first real threshold instead.
        p.threshold = i == 1 ? b.threshold : a.threshold + t * (b.threshold - a.threshold);
        return p;
    }
    const RocPoint& last = pts.back();
    return {last.tpr, last.fpr, last.threshold};
}

RegressionMetrics regression_metrics(const std::vector<double>& predicted,
                                     const std::vector<double>& observed) {
    if (predicted.size() != observed.size())
        throw LengthMismatchError("predicted/observed length mismatch");
    if (predicted.empty()) throw InputError("regression metrics need at least one sample");
    const double n = static_cast<double>(predicted.size());

    RegressionMetrics m;
    double sse = 0.0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        double e = predicted[i] - observed[i];
        sse += e * e;
    }
    m.mse = sse / n;
    m.rmse = std::sqrt(m.mse);

    double mean = std::accumulate(observed.begin(), observed.end(), 0.0) / n;
    double sst = 0.0;
    for (double o : observed) sst += (o - mean) * (o - mean);
    if (sst == 0.0) {
        m.r_defined = false;
        m.r = kNaN;
        return m;
    }
    double radicand = 1.0 - sse / sst;
    if (radicand < 0.0) {
        radicand = 0.0;
        m.r_clamped = true;
    }
    m.r = std::sqrt(radicand);
    m.r_defined = true;
    return m;
}

EvalReport one_vs_rest_report(const std::array<std::vector<double>, 3>& per_class_scores,
                              const std::vector<double>& truth_labels,
                              const std::vector<double>& predicted_risk, RocSet* curves) {
    const std::size_t n = truth_labels.size();
    for (const auto& col : per_class_scores)
        if (col.size() != n) throw LengthMismatchError("score column length mismatch");
    for (double label : truth_labels)
        if (label != 0.0 && label != 0.5 && label != 1.0)
            throw InputError("truth label outside {0, 0.5, 1}");

    EvalReport report;
    std::vector<double> pooled_scores;
    std::vector<bool> pooled_truth;

    for (std::size_t c = 0; c < 3; ++c) {
        ClassReport& cls = report.classes[c];
        std::vector<bool> truth(n);
        std::size_t count = 0;
        for (std::size_t i = 0; i < n; ++i) {
            truth[i] = truth_labels[i] == kClassCenters[c];
            count += truth[i] ? 1 : 0;
        }
        cls.observations = count;
        if (count == 0) {
            ++report.missing_classes; // excluded from macro and pooling
            continue;
        }
        cls.present = true;

        RocCurve curve = roc_curve(per_class_scores[c], truth);
        cls.auc = auc(curve);
        EerPoint eer = eer_threshold(curve);
        cls.eer_threshold = eer.threshold;
        cls.tpr = eer.tpr;
        cls.far = eer.fpr;
        cls.precision = 1.0 - eer.fpr;

        double P = static_cast<double>(curve.positives);
        double N = static_cast<double>(curve.negatives);
        cls.tp = eer.tpr * P;
        cls.fn = (1.0 - eer.tpr) * P;
        cls.fp = eer.fpr * N;
        cls.tn = (1.0 - eer.fpr) * N;
        cls.ppv_defined = cls.tp + cls.fp > 0.0;
        cls.precision_ppv = cls.ppv_defined ? cls.tp / (cls.tp + cls.fp) : kNaN;

        pooled_scores.insert(pooled_scores.end(), per_class_scores[c].begin(),
                             per_class_scores[c].end());
        pooled_truth.insert(pooled_truth.end(), truth.begin(), truth.end());

        if (curves) {
            curves->per_class[c] = std::move(curve);
            curves->present[c] = true;
        }
    }

    // Macro: unweighted mean over present classes (Eq 12 treatment).
    // Weighted-macro: truth-frequency weights (Eq 13).
    double present = 0.0, total_obs = 0.0;
    for (const auto& cls : report.classes) {
        if (!cls.present) continue;
        present += 1.0;
        total_obs += static_cast<double>(cls.observations);
        report.macro.auc += cls.auc;
        report.macro.far += cls.far;
        report.macro.precision += cls.precision;
    }
    if (present == 0.0) throw SingleClassError("no class has truth instances");
    report.macro.auc /= present;
    report.macro.far /= present;
    report.macro.precision /= present;
    for (const auto& cls : report.classes) {
        if (!cls.present) continue;
        double w = static_cast<double>(cls.observations) / total_obs;
        report.weighted_macro.auc += w * cls.auc;
        report.weighted_macro.far += w * cls.far;
        report.weighted_macro.precision += w * cls.precision;
    }

    // Micro: ROC over the pooled score/truth columns; precision_ppv is the
    // Eq 14 pooled sum(TP)/(sum(TP)+sum(FP)) at the per-class EER points.
    RocCurve pooled = roc_curve(pooled_scores, pooled_truth);
    report.micro.auc = auc(pooled);
    EerPoint micro_eer = eer_threshold(pooled);
    report.micro_eer_threshold = micro_eer.threshold;
    report.micro_tpr = micro_eer.tpr;
    report.micro.far = micro_eer.fpr;
    report.micro.precision = 1.0 - micro_eer.fpr;
    double sum_tp = 0.0, sum_fp = 0.0;
    for (const auto& cls : report.classes) {
        if (!cls.present) continue;
        sum_tp += cls.tp;
        sum_fp += cls.fp;
    }
    report.micro_ppv_defined = sum_tp + sum_fp > 0.0;
    report.micro_precision_ppv = report.micro_ppv_defined ? sum_tp / (sum_tp + sum_fp) : kNaN;
    if (curves) curves->micro = std::move(pooled);

    if (!predicted_risk.empty()) {
        report.regression = regression_metrics(predicted_risk, truth_labels);
        report.has_regression = true;
    }
    return report;
}

namespace {

std::string cell(double value, bool defined = true) {
    if (!defined || std::isnan(value)) return "undefined";
    return format_double(value);
}

} // namespace

void write_report_csv(const std::string& path, const EvalReport& report) {
    std::string buf = "metric,auc,false_alarm_rate,precision,mse,rmse,r\n";
    for (std::size_t c = 0; c < 3; ++c) {
        const ClassReport& cls = report.classes[c];
        buf += kClassRowNames[c];
        if (cls.present)
            buf += ',' + cell(cls.auc) + ',' + cell(cls.far) + ',' + cell(cls.precision);
        else
            buf += ",undefined,undefined,undefined";
        buf += ",,,\n";
    }
    buf += "Micro,";
    buf += cell(report.micro.auc) + ',' + cell(report.micro.far) + ',' +
           cell(report.micro.precision) + ',';
    if (report.has_regression) {
        buf += cell(report.regression.mse) + ',' + cell(report.regression.rmse) + ',' +
               cell(report.regression.r, report.regression.r_defined);
    } else {
        buf += ",,";
    }
    buf += '\n';
    buf += "Macro," + cell(report.macro.auc) + ',' + cell(report.macro.far) + ',' +
           cell(report.macro.precision) + ",,,\n";
    buf += "Weighted-macro," + cell(report.weighted_macro.auc) + ',' +
           cell(report.weighted_macro.far) + ',' + cell(report.weighted_macro.precision) +
           ",,,\n";
    write_entire_file(path, buf);
}

void write_report_json(const std::string& path, const EvalReport& report,
                       const std::string& model_kind) {
    using json = nlohmann::ordered_json;
    json j;
    j["model"] = model_kind;
    json classes = json::array();
    for (std::size_t c = 0; c < 3; ++c) {
        const ClassReport& cls = report.classes[c];
        json e;
        e["label"] = kClassCenters[c];
        e["present"] = cls.present;
        e["observations"] = cls.observations;
        if (cls.present) {
            e["auc"] = cls.auc;
            e["eer_threshold"] = cls.eer_threshold;
            e["tpr"] = cls.tpr;
            e["false_alarm_rate"] = cls.far;
            e["precision"] = cls.precision;
            if (cls.ppv_defined)
                e["precision_ppv"] = cls.precision_ppv;
            else
                e["precision_ppv"] = "undefined";
            e["tp"] = cls.tp;
            e["fp"] = cls.fp;
            e["fn"] = cls.fn;
            e["tn"] = cls.tn;
        }
        classes.push_back(e);
    }
    j["classes"] = classes;
    j["micro"] = {{"auc", report.micro.auc},
                  {"false_alarm_rate", report.micro.far},
                  {"precision", report.micro.precision},
                  {"tpr", report.micro_tpr},
                  {"eer_threshold", report.micro_eer_threshold}};
    if (report.micro_ppv_defined)
        j["micro"]["precision_ppv"] = report.micro_precision_ppv;
    else
        j["micro"]["precision_ppv"] = "undefined";
    j["macro"] = {{"auc", report.macro.auc},
                  {"false_alarm_rate", report.macro.far},
                  {"precision", report.macro.precision}};
    j["weighted_macro"] = {{"auc", report.weighted_macro.auc},
                           {"false_alarm_rate", report.weighted_macro.far},
                           {"precision", report.weighted_macro.precision}};
    if (report.has_regression) {
        json r;
        r["mse"] = report.regression.mse;
        r["rmse"] = report.regression.rmse;
        if (report.regression.r_defined)
            r["r"] = report.regression.r;
        else
            r["r"] = "undefined";
        r["r_clamped"] = report.regression.r_clamped;
        j["regression"] = r;
    }
    j["missing_classes"] = report.missing_classes;
    write_entire_file(path, j.dump(2) + "\n");
}

void write_roc_csv(const std::string& path, const RocCurve& curve) {
    std::string buf = "fpr,tpr,threshold\n";
    for (const RocPoint& p : curve.points) {
        buf += format_double(p.fpr);
        buf += ',';
        buf += format_double(p.tpr);
        buf += ',';
        buf += std::isinf(p.threshold) ? "inf" : format_double(p.threshold);
        buf += '\n';
    }
    write_entire_file(path, buf);
}

void write_roc_svg(const std::string& path,
                   const std::vector<std::pair<std::string, RocCurve>>& curves) {
    const double size = 520.0, margin = 60.0;
    const double plot = size - 2.0 * margin;
    const char* palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd"};
    const std::size_t palette_n = sizeof(palette) / sizeof(palette[0]);

    auto sx = [&](double fpr) { return margin + fpr * plot; };
    auto sy = [&](double tpr) { return margin + (1.0 - tpr) * plot; };
    auto num = [](double v) {
        char tmp[32];
        std::snprintf(tmp, sizeof(tmp), "%.2f", v);
        return std::string(tmp);
    };

    std::string buf;
    buf += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"520\" height=\"520\" "
           "viewBox=\"0 0 520 520\">\n";
    buf += "<rect width=\"520\" height=\"520\" fill=\"white\"/>\n";
    for (int g = 0; g <= 4; ++g) {
        double v = g / 4.0;
        buf += "<line x1=\"" + num(sx(v)) + "\" y1=\"" + num(sy(0)) + "\" x2=\"" + num(sx(v)) +
               "\" y2=\"" + num(sy(1)) + "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
        buf += "<line x1=\"" + num(sx(0)) + "\" y1=\"" + num(sy(v)) + "\" x2=\"" + num(sx(1)) +
               "\" y2=\"" + num(sy(v)) + "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
        buf += "<text x=\"" + num(sx(v)) + "\" y=\"" + num(sy(0) + 18.0) +
               "\" font-size=\"11\" text-anchor=\"middle\" fill=\"#333333\">" + num(v) +
               "</text>\n";
        buf += "<text x=\"" + num(sx(0) - 8.0) + "\" y=\"" + num(sy(v) + 4.0) +
               "\" font-size=\"11\" text-anchor=\"end\" fill=\"#333333\">" + num(v) +
               "</text>\n";
    }
    buf += "<line x1=\"" + num(sx(0)) + "\" y1=\"" + num(sy(1)) + "\" x2=\"" + num(sx(1)) +
           "\" y2=\"" + num(sy(0)) +
           "\" stroke=\"#999999\" stroke-width=\"1\" stroke-dasharray=\"5,4\"/>\n";
    buf += "<rect x=\"" + num(margin) + "\" y=\"" + num(margin) + "\" width=\"" + num(plot) +
           "\" height=\"" + num(plot) + "\" fill=\"none\" stroke=\"#333333\"/>\n";

    for (std::size_t k = 0; k < curves.size(); ++k) {
        const RocCurve& curve = curves[k].second;
        buf += "<polyline fill=\"none\" stroke=\"";
        buf += palette[k % palette_n];
        buf += "\" stroke-width=\"1.5\" points=\"";
        for (const RocPoint& p : curve.points) {
            buf += num(sx(p.fpr));
            buf += ',';
            buf += num(sy(p.tpr));
            buf += ' ';
        }
        buf += "\"/>\n";
        double ly = margin + 18.0 + 16.0 * static_cast<double>(k);
        buf += "<rect x=\"" + num(sx(0.62)) + "\" y=\"" + num(ly - 9.0) +
               "\" width=\"10\" height=\"10\" fill=\"" + palette[k % palette_n] + "\"/>\n";
        buf += "<text x=\"" + num(sx(0.62) + 15.0) + "\" y=\"" + num(ly) +
               "\" font-size=\"12\" fill=\"#333333\">" + curves[k].first + "</text>\n";
    }
    buf += "<text x=\"" + num(size / 2.0) + "\" y=\"" + num(size - 12.0) +
           "\" font-size=\"13\" text-anchor=\"middle\" fill=\"#333333\">False positive "
           "rate</text>\n";
    buf += "<text x=\"16\" y=\"" + num(size / 2.0) +
           "\" font-size=\"13\" text-anchor=\"middle\" fill=\"#333333\" transform=\"rotate(-90 "
           "16 " +
           num(size / 2.0) + ")\">True positive rate</text>\n";
    buf += "</svg>\n";
    write_entire_file(path, buf);
}

} // namespace crashcast
