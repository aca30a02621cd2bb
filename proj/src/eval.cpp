#include "ppgbp/eval.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <unordered_set>

namespace ppgbp::eval {

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

void PredictionSet::validate() const {
    if (predicted.size() != actual.size())
        throw ShapeError("prediction set: predicted/actual length mismatch");
    if (predicted.size() < 1)
        throw ArgumentError("prediction set: empty");
    if (!subject_ids.empty() &&
        static_cast<Index>(subject_ids.size()) != predicted.size())
        throw ShapeError("prediction set: subject_ids length mismatch");
    for (Index i = 0; i < predicted.size(); ++i) {
        if (!std::isfinite(predicted[i]) || !std::isfinite(actual[i]))
            throw ArgumentError("prediction set: non-finite value at row " +
                                std::to_string(i));
    }
}

int PredictionSet::distinct_subjects() const {
    if (subject_ids.empty()) return static_cast<int>(predicted.size());
    std::unordered_set<std::string> s(subject_ids.begin(), subject_ids.end());
    return static_cast<int>(s.size());
}

Metrics regression_metrics(const PredictionSet& p, bool require_r) {
    p.validate();
    const Index n = p.actual.size();
    Metrics m;
    double abs_sum = 0, sq_sum = 0;
    for (Index i = 0; i < n; ++i) {
        const double e = p.predicted[i] - p.actual[i];
        abs_sum += std::abs(e);
        sq_sum += e * e;
    }
    m.mae = abs_sum / static_cast<double>(n);
    m.mse = sq_sum / static_cast<double>(n);
    m.rmse = std::sqrt(m.mse);

    const double mean_actual = p.actual.mean();
    double base_sum = 0;
    for (Index i = 0; i < n; ++i) {
        const double d = p.actual[i] - mean_actual;
        base_sum += d * d;
    }
    const double mse_baseline = base_sum / static_cast<double>(n);
    if (mse_baseline <= 0.0) {
        if (require_r)
            throw DegenerateSignalError(
                "regression_metrics: constant actual vector, R undefined");
        return m;
    }
    if (m.mse > mse_baseline) {
        m.r = 0.0;
        m.worse_than_baseline = true;
    } else {
        m.r = std::sqrt(1.0 - m.mse / mse_baseline);
    }
    return m;
}

AamiVerdict aami_check(const PredictionSet& p) {
    p.validate();
    const Index n = p.actual.size();
    Vec err = p.predicted - p.actual;
    AamiVerdict v;
    v.error_mean = err.mean();
    if (n >= 2) {
        const double ss = (err.array() - v.error_mean).square().sum();
        v.error_sd = std::sqrt(ss / static_cast<double>(n - 1));
    }
    v.n_subjects = p.distinct_subjects();
    v.mean_ok = std::abs(v.error_mean) <= kAamiMeanMaxMmhg;
    v.sd_ok = v.error_sd <= kAamiSdMaxMmhg;
    v.subjects_ok = v.n_subjects >= kAamiMinSubjects;
    v.pass = v.mean_ok && v.sd_ok && v.subjects_ok;
    return v;
}

std::string to_string(BhsGrade g) {
    switch (g) {
        case BhsGrade::A: return "A";
        case BhsGrade::B: return "B";
        case BhsGrade::C: return "C";
        default: return "fail";
    }
}

BhsResult bhs_grade(const PredictionSet& p) {
    p.validate();
    const Index n = p.actual.size();
    Index c5 = 0, c10 = 0, c15 = 0;
    for (Index i = 0; i < n; ++i) {
        const double e = std::abs(p.predicted[i] - p.actual[i]);
        if (e <= 5.0) ++c5;
        if (e <= 10.0) ++c10;
        if (e <= 15.0) ++c15;
    }
    BhsResult r;
    const double dn = static_cast<double>(n);
    r.pct_le_5 = 100.0 * static_cast<double>(c5) / dn;
    r.pct_le_10 = 100.0 * static_cast<double>(c10) / dn;
    r.pct_le_15 = 100.0 * static_cast<double>(c15) / dn;

    struct Row {
        BhsGrade grade;
        double t5, t10, t15;
    };
    static constexpr Row rows[] = {
        {BhsGrade::A, 60.0, 85.0, 95.0},
        {BhsGrade::B, 50.0, 75.0, 90.0},
        {BhsGrade::C, 40.0, 65.0, 85.0},
    };
    r.grade = BhsGrade::fail;
    for (const Row& row : rows) {
        if (r.pct_le_5 >= row.t5 && r.pct_le_10 >= row.t10 &&
            r.pct_le_15 >= row.t15) {
            r.grade = row.grade;
            break;
        }
    }
    return r;
}

EvaluationReport evaluate_target(const std::string& target,
                                 const PredictionSet& p) {
    EvaluationReport rep;
    rep.target = target;
    rep.metrics = regression_metrics(p, /*require_r=*/false);
    rep.aami = aami_check(p);
    rep.bhs = bhs_grade(p);
    rep.n_records = static_cast<int>(p.actual.size());
    rep.n_subjects = p.distinct_subjects();
    return rep;
}

namespace {

nlohmann::json report_to_json(const EvaluationReport& r) {
    nlohmann::json j;
    j["target"] = r.target;
    j["n_records"] = r.n_records;
    j["n_subjects"] = r.n_subjects;
    j["metrics"] = {
        {"mae", r.metrics.mae},
        {"mse", r.metrics.mse},
        {"rmse", r.metrics.rmse},
        {"r", r.metrics.r ? nlohmann::json(*r.metrics.r) : nlohmann::json()},
        {"worse_than_baseline", r.metrics.worse_than_baseline},
    };
    j["aami"] = {
        {"error_mean_mmhg", r.aami.error_mean},
        {"error_sd_mmhg", r.aami.error_sd},
        {"n_subjects", r.aami.n_subjects},
        {"mean_ok", r.aami.mean_ok},
        {"sd_ok", r.aami.sd_ok},
        {"subjects_ok", r.aami.subjects_ok},
        {"pass", r.aami.pass},
    };
    j["bhs"] = {
        {"pct_le_5", r.bhs.pct_le_5},
        {"pct_le_10", r.bhs.pct_le_10},
        {"pct_le_15", r.bhs.pct_le_15},
        {"grade", to_string(r.bhs.grade)},
    };
    return j;
}

std::string scatter_csv(const PredictionSet& p) {
    std::string out = "actual,predicted\n";
    for (Index i = 0; i < p.actual.size(); ++i) {
        out += fmt_double(p.actual[i]);
        out += ',';
        out += fmt_double(p.predicted[i]);
        out += '\n';
    }
    return out;
}

}  // namespace

ReportArtifacts build_report(const PredictionSet& sbp,
                             const PredictionSet& dbp) {
    sbp.validate();
    dbp.validate();
    ReportArtifacts art;

    nlohmann::json j;
    j["version"] = 1;
    j["sbp"] = report_to_json(evaluate_target("sbp", sbp));
    j["dbp"] = report_to_json(evaluate_target("dbp", dbp));
    art.report_json = j.dump(2) + "\n";

    std::string csv = "target,subject_id,actual,predicted,error\n";
    auto append = [&csv](const char* target, const PredictionSet& p) {
        for (Index i = 0; i < p.actual.size(); ++i) {
            csv += target;
            csv += ',';
            csv += p.subject_ids.empty() ? std::to_string(i) : p.subject_ids[i];
            csv += ',';
            csv += fmt_double(p.actual[i]);
            csv += ',';
            csv += fmt_double(p.predicted[i]);
            csv += ',';
            csv += fmt_double(p.predicted[i] - p.actual[i]);
            csv += '\n';
        }
    };
    append("sbp", sbp);
    append("dbp", dbp);
    art.predictions_csv = std::move(csv);

    art.scatter_sbp_csv = scatter_csv(sbp);
    art.scatter_dbp_csv = scatter_csv(dbp);
    return art;
}

}  // namespace ppgbp::eval
