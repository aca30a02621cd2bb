#include "ppgbp/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <unordered_map>

namespace ppgbp::dataset {

namespace {

std::string lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double parse_double_token(const std::string& tok, const std::string& where) {
    double v = 0;
    const char* first = tok.data();
    const char* last = tok.data() + tok.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last)
        throw ParseError("malformed numeric token \"" + tok + "\" " + where);
    return v;
}

}  // namespace

void Demographics::validate() const {
    auto positive = [](double v, const char* name) {
        if (!std::isfinite(v) || v <= 0)
            throw InvariantError(std::string("demographics: ") + name +
                                 " must be finite and positive");
    };
    positive(age_years, "age");
    positive(height_cm, "height");
    positive(weight_kg, "weight");
    positive(bmi_kg_m2, "bmi");
    if (heart_rate_bpm) positive(*heart_rate_bpm, "heart rate");
    const double computed = weight_kg / std::pow(height_cm / 100.0, 2);
    if (std::abs(bmi_kg_m2 - computed) > 0.01 * computed)
        throw InvariantError("demographics: bmi inconsistent with height/weight");
}

void GroundTruth::validate() const {
    if (!(std::isfinite(sbp_mmhg) && std::isfinite(dbp_mmhg)))
        throw InvariantError("ground truth: non-finite blood pressure");
    if (!(sbp_mmhg > dbp_mmhg && dbp_mmhg > 0))
        throw InvariantError("ground truth: requires SBP > DBP > 0 (got SBP=" +
                             std::to_string(sbp_mmhg) + ", DBP=" +
                             std::to_string(dbp_mmhg) + ")");
}

RawSignal parse_signal_file(const std::filesystem::path& path,
                            double sample_rate_hz) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open signal file " + path.string());
    std::string content((std::istreambuf_iterator<char>(in)),
                        std::istreambuf_iterator<char>());

    RawSignal sig;
    sig.sample_rate_hz = sample_rate_hz;

    std::vector<double> samples;
    size_t i = 0;
    const size_t n = content.size();
    while (i < n) {
        while (i < n && std::isspace(static_cast<unsigned char>(content[i]))) ++i;
        if (i >= n) break;
        size_t start = i;
        while (i < n && !std::isspace(static_cast<unsigned char>(content[i]))) ++i;
        const std::string tok = content.substr(start, i - start);
        double v = 0;
        auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (ec != std::errc() || ptr != tok.data() + tok.size())
            throw ParseError("malformed token \"" + tok + "\" at byte offset " +
                             std::to_string(start) + " in " + path.string());
        samples.push_back(v);
    }
    if (samples.empty())
        throw ParseError("empty signal file " + path.string());
    sig.samples = Eigen::Map<const Vec>(samples.data(),
                                        static_cast<Index>(samples.size()));

    const std::string stem = path.stem().string();
    const size_t us = stem.rfind('_');
    if (us == std::string::npos || us == 0 || us + 1 >= stem.size())
        throw ParseError("filename \"" + path.filename().string() +
                         "\" does not match <subject>_<segment>.txt");
    sig.subject_id = stem.substr(0, us);
    const std::string seg = stem.substr(us + 1);
    int seg_id = 0;
    auto [ptr, ec] = std::from_chars(seg.data(), seg.data() + seg.size(), seg_id);
    if (ec != std::errc() || ptr != seg.data() + seg.size())
        throw ParseError("filename \"" + path.filename().string() +
                         "\": segment \"" + seg + "\" is not an integer");
    sig.segment_id = seg_id;
    return sig;
}

namespace {

// Minimal CSV with double-quote escaping; enough for exported info sheets.
std::vector<std::string> split_csv_row(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    bool quoted = false;
    for (size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(field);
            field.clear();
        } else if (c != '\r') {
            field += c;
        }
    }
    out.push_back(field);
    return out;
}

const std::vector<std::pair<std::string, std::vector<std::string>>>&
column_aliases() {
    static const std::vector<std::pair<std::string, std::vector<std::string>>>
        aliases = {
            {"subject_id", {"subject_id", "subject_ID", "subject id", "subject"}},
            {"sex", {"sex", "sex(m/f)", "gender"}},
            {"age", {"age", "age(year)", "age_years", "age (years)"}},
            {"height", {"height", "height(cm)", "height_cm"}},
            {"weight", {"weight", "weight(kg)", "weight_kg"}},
            {"sbp",
             {"sbp", "systolic blood pressure(mmhg)", "sbp_mmhg",
              "systolic blood pressure (mmhg)"}},
            {"dbp",
             {"dbp", "diastolic blood pressure(mmhg)", "dbp_mmhg",
              "diastolic blood pressure (mmhg)"}},
            {"heart_rate",
             {"heart_rate", "heart rate(b/m)", "hr", "heart rate",
              "heart_rate_bpm"}},
            {"bmi", {"bmi", "bmi(kg/m^2)", "bmi_kg_m2", "bmi (kg/m^2)"}},
        };
    return aliases;
}

Sex parse_sex(const std::string& raw, const std::string& where) {
    const std::string v = lower(trim(raw));
    if (v == "m" || v == "male" || v == "0") return Sex::male;
    if (v == "f" || v == "female" || v == "1") return Sex::female;
    throw ParseError("unrecognized sex value \"" + raw + "\" " + where);
}

}  // namespace

std::vector<SubjectInfo> parse_subject_table(
    const std::filesystem::path& path,
    const std::map<std::string, std::string>& column_map) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open subject table " + path.string());

    std::string header_line;
    if (!std::getline(in, header_line))
        throw SchemaError("subject table has no header row: " + path.string());
    const std::vector<std::string> header = split_csv_row(header_line);

    std::unordered_map<std::string, int> header_pos;
    for (size_t i = 0; i < header.size(); ++i)
        header_pos.emplace(lower(trim(header[i])), static_cast<int>(i));

    auto resolve = [&](const std::string& canonical) -> int {
        auto explicit_it = column_map.find(canonical);
        if (explicit_it != column_map.end()) {
            auto it = header_pos.find(lower(trim(explicit_it->second)));
            return it == header_pos.end() ? -1 : it->second;
        }
        for (const auto& [canon, names] : column_aliases()) {
            if (canon != canonical) continue;
            for (const std::string& name : names) {
                auto it = header_pos.find(name);
                if (it != header_pos.end()) return it->second;
            }
        }
        return -1;
    };

    struct Cols {
        int subject_id, sex, age, height, weight, sbp, dbp, heart_rate, bmi;
    } cols{};
    std::vector<std::string> missing;
    auto need = [&](const char* canonical) {
        int idx = resolve(canonical);
        if (idx < 0) missing.push_back(canonical);
        return idx;
    };
    cols.subject_id = need("subject_id");
    cols.sex = need("sex");
    cols.age = need("age");
    cols.height = need("height");
    cols.weight = need("weight");
    cols.sbp = need("sbp");
    cols.dbp = need("dbp");
    cols.heart_rate = need("heart_rate");
    cols.bmi = resolve("bmi");  // optional
    if (!missing.empty()) {
        std::string msg = "subject table missing required column(s):";
        for (const std::string& m : missing) msg += " " + m;
        throw SchemaError(msg);
    }

    std::vector<SubjectInfo> out;
    std::string line;
    int row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (trim(line).empty()) continue;
        const std::vector<std::string> f = split_csv_row(line);
        auto cell = [&](int idx) -> std::string {
            return idx >= 0 && idx < static_cast<int>(f.size()) ? trim(f[idx])
                                                                : "";
        };
        const std::string where = "(row " + std::to_string(row) + ")";

        SubjectInfo s;
        s.subject_id = cell(cols.subject_id);
        if (s.subject_id.empty())
            throw ParseError("empty subject id " + where);
        s.demo.sex = parse_sex(cell(cols.sex), where);
        s.demo.age_years = parse_double_token(cell(cols.age), where);
        s.demo.height_cm = parse_double_token(cell(cols.height), where);
        s.demo.weight_kg = parse_double_token(cell(cols.weight), where);
        s.truth.sbp_mmhg = parse_double_token(cell(cols.sbp), where);
        s.truth.dbp_mmhg = parse_double_token(cell(cols.dbp), where);
        const std::string hr = cell(cols.heart_rate);
        if (!hr.empty())
            s.demo.heart_rate_bpm = parse_double_token(hr, where);

        const double computed_bmi =
            s.demo.weight_kg / std::pow(s.demo.height_cm / 100.0, 2);
        const std::string bmi_cell = cell(cols.bmi);
        if (bmi_cell.empty()) {
            s.demo.bmi_kg_m2 = computed_bmi;
        } else {
            const double stated = parse_double_token(bmi_cell, where);
            // Tolerate rounded sheets; anything past 1% is replaced by the
            // recomputed value.
            s.demo.bmi_kg_m2 =
                std::abs(stated - computed_bmi) <= 0.01 * computed_bmi
                    ? stated
                    : computed_bmi;
        }
        s.demo.validate();
        s.truth.validate();
        out.push_back(std::move(s));
    }
    return out;
}

double skewness_sqi(const Eigen::Ref<const Vec>& samples) {
    const Index n = samples.size();
    if (n < 3) throw LengthError("skewness_sqi: need at least 3 samples");
    const double mean = samples.mean();
    const auto centered = samples.array() - mean;
    const double m2 = centered.square().sum() / static_cast<double>(n);
    if (!(m2 > 0))
        throw DegenerateSignalError("skewness_sqi: constant signal");
    const double m3 = centered.cube().sum() / static_cast<double>(n);
    return m3 / std::pow(std::sqrt(m2), 3);
}

QcPartition qc_filter(const std::vector<PpgRecord>& records, double threshold) {
    if (std::isnan(threshold))
        throw ArgumentError("qc_filter: threshold is NaN");
    QcPartition part;
    for (const PpgRecord& rec : records) {
        double sqi = std::numeric_limits<double>::quiet_NaN();
        bool ok = false;
        try {
            sqi = skewness_sqi(rec.signal.samples);
            ok = sqi >= threshold;
        } catch (const Error&) {
            ok = false;  // degenerate signals are never kept
        }
        if (ok) {
            part.accepted.push_back(rec);
            part.accepted_sqi.push_back(sqi);
        } else {
            part.rejected.push_back(rec);
            part.rejected_sqi.push_back(sqi);
        }
    }
    return part;
}

double calibrate_sqi_threshold(const std::vector<PpgRecord>& records,
                               int target_kept) {
    std::vector<double> sqis;
    sqis.reserve(records.size());
    for (const PpgRecord& rec : records) {
        try {
            sqis.push_back(skewness_sqi(rec.signal.samples));
        } catch (const Error&) {
            // degenerate: unkeepable at any finite threshold
        }
    }
    if (sqis.empty())
        throw ArgumentError("calibrate_sqi_threshold: no scorable records");
    std::sort(sqis.begin(), sqis.end(), std::greater<>());
    const int n = static_cast<int>(sqis.size());
    const int kept = std::clamp(target_kept, 0, n);
    if (kept == 0) return std::nextafter(sqis.front(), 1e300);
    if (kept == n) return sqis.back();
    // Threshold halfway between the last kept and first dropped score.
    return 0.5 * (sqis[kept - 1] + sqis[kept]);
}

namespace {

std::vector<Index> shuffled_indices(Index n, std::uint64_t seed) {
    std::vector<Index> idx(static_cast<size_t>(n));
    for (Index i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = i;
    std::mt19937_64 gen(seed);
    for (Index i = n - 1; i > 0; --i) {
        const Index j = static_cast<Index>(
            rng::bounded(gen, static_cast<std::uint64_t>(i) + 1));
        std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(j)]);
    }
    return idx;
}

}  // namespace

SplitIndices split_train_test(Index n, double test_fraction,
                              std::uint64_t seed) {
    if (n < 1) throw ArgumentError("split: empty record list");
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw ArgumentError("split: test_fraction must lie in (0,1)");
    const Index n_test = static_cast<Index>(
        std::llround(test_fraction * static_cast<double>(n)));
    const std::vector<Index> idx = shuffled_indices(n, seed);
    SplitIndices s;
    s.test.assign(idx.begin(), idx.begin() + n_test);
    s.train.assign(idx.begin() + n_test, idx.end());
    std::sort(s.test.begin(), s.test.end());
    std::sort(s.train.begin(), s.train.end());
    return s;
}

SplitIndices split_train_test_by_subject(
    const std::vector<std::string>& subject_ids, double test_fraction,
    std::uint64_t seed) {
    const Index n = static_cast<Index>(subject_ids.size());
    if (n < 1) throw ArgumentError("split: empty record list");
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw ArgumentError("split: test_fraction must lie in (0,1)");

    std::vector<std::string> subjects;
    std::unordered_map<std::string, std::vector<Index>> groups;
    for (Index i = 0; i < n; ++i) {
        auto [it, inserted] = groups.try_emplace(subject_ids[static_cast<size_t>(i)]);
        if (inserted) subjects.push_back(subject_ids[static_cast<size_t>(i)]);
        it->second.push_back(i);
    }
    const Index n_subj = static_cast<Index>(subjects.size());
    const std::vector<Index> order = shuffled_indices(n_subj, seed);
    const Index target = static_cast<Index>(
        std::llround(test_fraction * static_cast<double>(n)));

    SplitIndices s;
    Index test_count = 0;
    for (Index k = 0; k < n_subj; ++k) {
        const auto& members = groups[subjects[static_cast<size_t>(order[static_cast<size_t>(k)])]];
        if (test_count < target) {
            s.test.insert(s.test.end(), members.begin(), members.end());
            test_count += static_cast<Index>(members.size());
        } else {
            s.train.insert(s.train.end(), members.begin(), members.end());
        }
    }
    std::sort(s.test.begin(), s.test.end());
    std::sort(s.train.begin(), s.train.end());
    return s;
}

}  // namespace ppgbp::dataset
