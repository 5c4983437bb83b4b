#include "craniotk/metrics.hpp"

#include "craniotk/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace craniotk {

namespace {

using ojson = nlohmann::ordered_json;

std::vector<std::int64_t> surface_or_all(const VoxelGrid& m) {
    auto s = surface_indices(m);
    if (s.empty()) {
        for (std::int64_t n = 0; n < m.size(); ++n) {
            if (m.get(n)) {
                s.push_back(n);
            }
        }
    }
    return s;
}

double percentile_of(std::vector<double> v, double p) {
    if (v.empty()) {
        return 0.0;
    }
    std::sort(v.begin(), v.end());
    if (p >= 100.0) {
        return v.back();
    }
    const double pos = p / 100.0 * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

ojson optional_number(const std::optional<double>& v) { return v ? ojson(*v) : ojson(nullptr); }

std::optional<double> read_optional(const ojson& j, const char* key, const std::string& where) {
    if (!j.contains(key)) {
        fail(ErrorCode::SchemaViolation, where + "." + key + ": missing");
    }
    if (j.at(key).is_null()) {
        return std::nullopt;
    }
    if (!j.at(key).is_number()) {
        fail(ErrorCode::SchemaViolation, where + "." + key + ": expected number or null");
    }
    return j.at(key).get<double>();
}

double read_number(const ojson& j, const char* key, const std::string& where) {
    if (!j.contains(key) || !j.at(key).is_number()) {
        fail(ErrorCode::SchemaViolation, where + "." + key + ": expected number");
    }
    return j.at(key).get<double>();
}

} // namespace

double dice(const VoxelGrid& a, const VoxelGrid& b) {
    const std::int64_t inter = set_ops(a, b, SetOp::Intersect).count();
    const std::int64_t total = a.count() + b.count();
    if (total == 0) {
        return 1.0;
    }
    return 2.0 * static_cast<double>(inter) / static_cast<double>(total);
}

std::vector<double> directed_surface_distances(const VoxelGrid& from, const VoxelGrid& to) {
    if (!same_geometry(from.geometry(), to.geometry())) {
        fail(ErrorCode::GeometryMismatch, "surface distance: masks have different grid geometry");
    }
    if (from.empty() || to.empty()) {
        fail(ErrorCode::EmptyMask, "surface distance undefined for an empty mask");
    }
    const GridGeometry& g = from.geometry();
    const auto src = surface_or_all(from);
    const auto dst = surface_or_all(to);

    // Every seed and query voxel lies in the union of the two bounding boxes.
    const Box ba = *bounding_box(from);
    const Box bb = *bounding_box(to);
    Box box;
    for (int a = 0; a < 3; ++a) {
        box.lo[a] = std::min(ba.lo[a], bb.lo[a]);
        box.hi[a] = std::max(ba.hi[a], bb.hi[a]);
    }
    const Dims ext = box.extent();
    auto local = [&](std::int64_t n) {
        const Index3 v = g.unravel(n);
        return static_cast<std::size_t>((v[0] - box.lo[0]) + ext[0] * ((v[1] - box.lo[1]) + ext[1] * (v[2] - box.lo[2])));
    };
    std::vector<std::uint8_t> seeds(static_cast<std::size_t>(ext[0] * ext[1] * ext[2]), 0);
    for (std::int64_t n : dst) {
        seeds[local(n)] = 1;
    }
    const auto d2 = squared_edt(seeds, ext, g.spacing);
    std::vector<double> out;
    out.reserve(src.size());
    for (std::int64_t n : src) {
        out.push_back(std::sqrt(d2[local(n)]));
    }
    return out;
}

double hausdorff(const VoxelGrid& a, const VoxelGrid& b, double percentile) {
    if (!(percentile > 0.0 && percentile <= 100.0)) {
        fail(ErrorCode::InvalidArgument, "hausdorff percentile must lie in (0, 100]");
    }
    const auto ab = directed_surface_distances(a, b);
    const auto ba = directed_surface_distances(b, a);
    return std::max(percentile_of(ab, percentile), percentile_of(ba, percentile));
}

std::string to_string(Subset s) {
    switch (s) {
    case Subset::Test: return "test";
    case Subset::TestExtra: return "test-extra";
    case Subset::TrainVal: return "train-val";
    }
    return "unknown";
}

Subset subset_from_string(const std::string& name) {
    if (name == "test") return Subset::Test;
    if (name == "test-extra") return Subset::TestExtra;
    if (name == "train-val" || name == "train") return Subset::TrainVal;
    fail(ErrorCode::SchemaViolation, "unknown subset '" + name + "'");
}

MeanStd mean_std(const std::vector<double>& values) {
    MeanStd r;
    if (values.empty()) {
        return r;
    }
    const auto n = static_cast<double>(values.size());
    double sum = 0.0;
    for (double v : values) {
        sum += v;
    }
    r.mean = sum / n;
    double ss = 0.0;
    for (double v : values) {
        ss += (v - r.mean) * (v - r.mean);
    }
    r.std = std::sqrt(ss / n);
    return r;
}

EvaluationReport aggregate(std::vector<EvaluationRow> rows, double hd_percentile) {
    EvaluationReport report;
    report.hd_percentile = hd_percentile;
    auto summarise = [](const std::vector<const EvaluationRow*>& sel) {
        Aggregate agg;
        std::vector<double> d;
        std::vector<double> h;
        for (const auto* r : sel) {
            d.push_back(r->dice);
            if (r->hd_mm) {
                h.push_back(*r->hd_mm);
            }
        }
        agg.n = static_cast<int>(d.size());
        agg.n_hd = static_cast<int>(h.size());
        const MeanStd md = mean_std(d);
        agg.mean_dice = md.mean;
        agg.std_dice = md.std;
        if (!h.empty()) {
            const MeanStd mh = mean_std(h);
            agg.mean_hd = mh.mean;
            agg.std_hd = mh.std;
        }
        return agg;
    };
    std::vector<const EvaluationRow*> all;
    for (const auto& r : rows) {
        all.push_back(&r);
    }
    for (Subset s : {Subset::Test, Subset::TestExtra, Subset::TrainVal}) {
        std::vector<const EvaluationRow*> sel;
        for (const auto& r : rows) {
            if (r.subset == s) {
                sel.push_back(&r);
            }
        }
        if (!sel.empty()) {
            report.aggregates[to_string(s)] = summarise(sel);
        }
    }
    if (!all.empty()) {
        report.aggregates["overall"] = summarise(all);
    }
    report.rows = std::move(rows);
    return report;
}

std::string format_mean_std(double mean, double std) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f (%.3f)", mean, std);
    return buf;
}

std::string report_to_json(const EvaluationReport& report) {
    ojson j;
    j["meta"] = {{"format", "craniotk-evaluation"},
                 {"format_version", 1},
                 {"hd_percentile", report.hd_percentile},
                 {"std_kind", "population"},
                 {"hd_undefined", "rows with an empty mask carry hd_mm null and are excluded from HD statistics"}};
    ojson rows = ojson::array();
    for (const auto& r : report.rows) {
        rows.push_back({{"case_id", r.case_id},
                        {"subset", to_string(r.subset)},
                        {"dice", r.dice},
                        {"hd_mm", optional_number(r.hd_mm)}});
    }
    j["rows"] = std::move(rows);
    ojson aggs = ojson::object();
    ojson table = ojson::object();
    for (const char* key : {"test", "test-extra", "train-val", "overall"}) {
        const auto it = report.aggregates.find(key);
        if (it == report.aggregates.end()) {
            continue;
        }
        const Aggregate& a = it->second;
        aggs[key] = {{"n", a.n},
                     {"n_hd", a.n_hd},
                     {"mean_dice", a.mean_dice},
                     {"std_dice", a.std_dice},
                     {"mean_hd", optional_number(a.mean_hd)},
                     {"std_hd", optional_number(a.std_hd)}};
        table[key] = {{"n", a.n},
                      {"dice", format_mean_std(a.mean_dice, a.std_dice)},
                      {"hd_mm", a.mean_hd ? ojson(format_mean_std(*a.mean_hd, *a.std_hd)) : ojson(nullptr)}};
    }
    j["aggregates"] = std::move(aggs);
    j["table"] = std::move(table);
    return j.dump(2) + "\n";
}

EvaluationReport report_from_json(const std::string& text) {
    ojson j;
    try {
        j = ojson::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        fail(ErrorCode::SchemaViolation, std::string("report: invalid JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("meta") || !j.contains("rows") || !j.contains("aggregates") ||
        !j.at("rows").is_array() || !j.at("aggregates").is_object()) {
        fail(ErrorCode::SchemaViolation, "report: expected object with meta, rows and aggregates");
    }
    EvaluationReport r;
    r.hd_percentile = read_number(j.at("meta"), "hd_percentile", "meta");
    for (std::size_t i = 0; i < j.at("rows").size(); ++i) {
        const auto& row = j.at("rows").at(i);
        const std::string where = "rows[" + std::to_string(i) + "]";
        if (!row.is_object() || !row.contains("case_id") || !row.at("case_id").is_string() || !row.contains("subset") ||
            !row.at("subset").is_string()) {
            fail(ErrorCode::SchemaViolation, where + ": case_id and subset must be strings");
        }
        EvaluationRow er;
        er.case_id = row.at("case_id").get<std::string>();
        er.subset = subset_from_string(row.at("subset").get<std::string>());
        er.dice = read_number(row, "dice", where);
        er.hd_mm = read_optional(row, "hd_mm", where);
        r.rows.push_back(std::move(er));
    }
    for (const auto& [key, a] : j.at("aggregates").items()) {
        const std::string where = "aggregates." + key;
        Aggregate agg;
        agg.n = static_cast<int>(read_number(a, "n", where));
        agg.n_hd = static_cast<int>(read_number(a, "n_hd", where));
        agg.mean_dice = read_number(a, "mean_dice", where);
        agg.std_dice = read_number(a, "std_dice", where);
        agg.mean_hd = read_optional(a, "mean_hd", where);
        agg.std_hd = read_optional(a, "std_hd", where);
        r.aggregates[key] = agg;
    }
    return r;
}

std::string report_to_csv(const EvaluationReport& report) {
    // Shortest text that reads back to the same double.
    auto num = [](double v) {
        char buf[32];
        const auto res = std::to_chars(buf, buf + sizeof buf, v);
        return std::string(buf, res.ptr);
    };
    std::ostringstream os;
    os << "case_id,subset,dice,hd_mm\n";
    for (const auto& r : report.rows) {
        os << r.case_id << ',' << to_string(r.subset) << ',' << num(r.dice) << ',';
        if (r.hd_mm) {
            os << num(*r.hd_mm);
        }
        os << '\n';
    }
    return os.str();
}

} // namespace craniotk
