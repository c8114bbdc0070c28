#ifndef DIPDEF_REPORT_HPP
#define DIPDEF_REPORT_HPP

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dipdef/errors.hpp"
#include "dipdef/metrics.hpp"

namespace dipdef {

// One evaluated (image, condition) cell. condition is "clean" or an attack
// tag like "pgd_eps8".
struct ReportRow {
    std::string image_id;
    std::string condition;
    int true_label = -1;
    int undefended_pred = -1;
    int defended_pred = -1;
    float ssim_recon_vs_clean = 0.0f;
    float ssim_recon_vs_input = 0.0f;
    int pairs_used = 0;
    bool used_fallback = false;
    double wall_time_s = 0.0;
    std::vector<float> alphas, gaps;
};

struct ConditionAggregate {
    int count = 0;
    double undefended_acc = 0.0;
    double defended_acc = 0.0;
    double mean_ssim_vs_clean = 0.0;
    double mean_ssim_vs_input = 0.0;
    double fallback_rate = 0.0;
};

struct EvaluationReport {
    std::vector<ReportRow> rows;
    std::map<std::string, std::string> config_snapshot;

    // Aggregates are always recomputed from the rows, never cached.
    std::map<std::string, ConditionAggregate> aggregates() const {
        std::map<std::string, ConditionAggregate> agg;
        for (const ReportRow& r : rows) {
            ConditionAggregate& a = agg[r.condition];
            ++a.count;
            a.undefended_acc += r.undefended_pred == r.true_label ? 1.0 : 0.0;
            a.defended_acc += r.defended_pred == r.true_label ? 1.0 : 0.0;
            a.mean_ssim_vs_clean += r.ssim_recon_vs_clean;
            a.mean_ssim_vs_input += r.ssim_recon_vs_input;
            a.fallback_rate += r.used_fallback ? 1.0 : 0.0;
        }
        for (auto& [name, a] : agg) {
            a.undefended_acc /= a.count;
            a.defended_acc /= a.count;
            a.mean_ssim_vs_clean /= a.count;
            a.mean_ssim_vs_input /= a.count;
            a.fallback_rate /= a.count;
        }
        return agg;
    }

    // Mean defended accuracy over the non-clean conditions.
    double mean_attack_defended_acc() const {
        const auto agg = aggregates();
        double sum = 0.0;
        int n = 0;
        for (const auto& [name, a] : agg)
            if (name != "clean") {
                sum += a.defended_acc;
                ++n;
            }
        return n > 0 ? sum / n : 0.0;
    }
};

namespace detail {

inline std::string join_floats(const std::vector<float>& xs) {
    std::ostringstream os;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) os << ';';
        os << xs[i];
    }
    return os.str();
}

inline std::vector<float> split_floats(const std::string& s) {
    std::vector<float> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ';'))
        if (!item.empty()) out.push_back(std::stof(item));
    return out;
}

}  // namespace detail

inline nlohmann::json row_to_json(const ReportRow& r) {
    return nlohmann::json{{"image_id", r.image_id},
                          {"condition", r.condition},
                          {"true_label", r.true_label},
                          {"undefended_pred", r.undefended_pred},
                          {"defended_pred", r.defended_pred},
                          {"ssim_recon_vs_clean", r.ssim_recon_vs_clean},
                          {"ssim_recon_vs_input", r.ssim_recon_vs_input},
                          {"pairs_used", r.pairs_used},
                          {"used_fallback", r.used_fallback},
                          {"wall_time_s", r.wall_time_s},
                          {"alphas", r.alphas},
                          {"gaps", r.gaps}};
}

inline ReportRow row_from_json(const nlohmann::json& j) {
    ReportRow r;
    r.image_id = j.at("image_id").get<std::string>();
    r.condition = j.at("condition").get<std::string>();
    r.true_label = j.at("true_label").get<int>();
    r.undefended_pred = j.at("undefended_pred").get<int>();
    r.defended_pred = j.at("defended_pred").get<int>();
    r.ssim_recon_vs_clean = j.at("ssim_recon_vs_clean").get<float>();
    r.ssim_recon_vs_input = j.at("ssim_recon_vs_input").get<float>();
    r.pairs_used = j.at("pairs_used").get<int>();
    r.used_fallback = j.at("used_fallback").get<bool>();
    r.wall_time_s = j.at("wall_time_s").get<double>();
    r.alphas = j.at("alphas").get<std::vector<float>>();
    r.gaps = j.at("gaps").get<std::vector<float>>();
    return r;
}

// Writes rows as CSV and aggregates + config snapshot as JSON next to it.
inline void emit_report(const EvaluationReport& report, const std::string& path_prefix) {
    if (report.rows.empty()) throw InputError("emit_report: empty report");
    namespace fs = std::filesystem;
    const fs::path csv_path = path_prefix + "_rows.csv";
    if (csv_path.has_parent_path()) fs::create_directories(csv_path.parent_path());
    std::ofstream csv(csv_path);
    if (!csv) throw InputError("cannot write " + csv_path.string());
    csv << "image_id,condition,true_label,undefended_pred,defended_pred,"
           "ssim_recon_vs_clean,ssim_recon_vs_input,pairs_used,used_fallback,wall_time_s,"
           "alphas,gaps\n";
    for (const ReportRow& r : report.rows) {
        csv << r.image_id << ',' << r.condition << ',' << r.true_label << ',' << r.undefended_pred
            << ',' << r.defended_pred << ',' << r.ssim_recon_vs_clean << ',' << r.ssim_recon_vs_input
            << ',' << r.pairs_used << ',' << (r.used_fallback ? 1 : 0) << ',' << r.wall_time_s << ','
            << detail::join_floats(r.alphas) << ',' << detail::join_floats(r.gaps) << '\n';
    }

    nlohmann::json j;
    j["config"] = report.config_snapshot;
    auto agg = report.aggregates();
    for (const auto& [name, a] : agg) {
        j["aggregates"][name] = {{"count", a.count},
                                 {"undefended_acc", a.undefended_acc},
                                 {"defended_acc", a.defended_acc},
                                 {"mean_ssim_vs_clean", a.mean_ssim_vs_clean},
                                 {"mean_ssim_vs_input", a.mean_ssim_vs_input},
                                 {"fallback_rate", a.fallback_rate}};
    }
    j["mean_attack_defended_acc"] = report.mean_attack_defended_acc();
    std::ofstream js(path_prefix + "_summary.json");
    if (!js) throw InputError("cannot write summary json at " + path_prefix);
    js << j.dump(2) << '\n';
}

inline EvaluationReport load_report_rows(const std::string& path_prefix) {
    std::ifstream csv(path_prefix + "_rows.csv");
    if (!csv) throw InputError("cannot read report at " + path_prefix);
    EvaluationReport rep;
    std::string line;
    std::getline(csv, line);  // header
    while (std::getline(csv, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        cells.resize(12);
        ReportRow r;
        r.image_id = cells[0];
        r.condition = cells[1];
        r.true_label = std::stoi(cells[2]);
        r.undefended_pred = std::stoi(cells[3]);
        r.defended_pred = std::stoi(cells[4]);
        r.ssim_recon_vs_clean = std::stof(cells[5]);
        r.ssim_recon_vs_input = std::stof(cells[6]);
        r.pairs_used = std::stoi(cells[7]);
        r.used_fallback = cells[8] == "1";
        r.wall_time_s = std::stod(cells[9]);
        r.alphas = detail::split_floats(cells[10]);
        r.gaps = detail::split_floats(cells[11]);
        rep.rows.push_back(std::move(r));
    }
    return rep;
}

}  // namespace dipdef

#endif
