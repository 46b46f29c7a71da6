#pragma once

// Instance-set evaluation: mean raster IoU, footprint-area RMSE in world
// units, and ground-truth-area-weighted coverage.

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "dsac/dataset.hpp"
#include "dsac/geometry.hpp"

namespace dsac {

struct PerInstanceEval {
    std::string id;
    double iou = 0.0;
    double area_pred = 0.0;  // world units
    double area_gt = 0.0;
};

struct EvalReport {
    double mean_iou = 0.0;
    double area_rmse = 0.0;
    double weighted_coverage = 0.0;
    std::vector<PerInstanceEval> per_instance;

    nlohmann::json to_json() const {
        nlohmann::json per = nlohmann::json::array();
        for (const auto& e : per_instance)
            per.push_back({{"id", e.id},
                           {"iou", e.iou},
                           {"area_pred", e.area_pred},
                           {"area_gt", e.area_gt}});
        return {{"mean_iou", mean_iou},
                {"area_rmse", area_rmse},
                {"weighted_coverage", weighted_coverage},
                {"per_instance", per}};
    }

    std::string to_table() const {
        char buf[256];
        std::string out;
        out += "id                          iou    area_pred    area_gt\n";
        for (const auto& e : per_instance) {
            std::snprintf(buf, sizeof(buf), "%-24s %6.3f %12.2f %10.2f\n", e.id.c_str(), e.iou,
                          e.area_pred, e.area_gt);
            out += buf;
        }
        std::snprintf(buf, sizeof(buf),
                      "mean IoU %.4f | area RMSE %.3f | weighted coverage %.4f | n=%zu\n",
                      mean_iou, area_rmse, weighted_coverage, per_instance.size());
        out += buf;
        return out;
    }
};

// One prediction per instance, evaluated against that instance's ground
// truth (each instance is its own crop, so cross-instance matching is the
// identity). Areas are mapped back to world units through scale_factor.
inline EvalReport evaluate(const std::vector<Contour>& preds,
                           const std::vector<Instance>& instances) {
    if (preds.size() != instances.size())
        throw std::invalid_argument("evaluate: prediction/instance count mismatch");
    EvalReport rep;
    double iou_sum = 0.0, sq_err_sum = 0.0, cov_num = 0.0, cov_den = 0.0;
    for (size_t i = 0; i < preds.size(); ++i) {
        const Instance& inst = instances[i];
        PerInstanceEval e;
        e.id = inst.id;
        const double s2 = inst.meta.scale_factor * inst.meta.scale_factor;
        e.area_gt = std::abs(signed_area(inst.gt)) / s2;
        if (preds[i].size() >= 4) {
            e.iou = iou(preds[i], inst.gt, inst.patch.width, inst.patch.height);
            e.area_pred = std::abs(signed_area(preds[i])) / s2;
        }
        iou_sum += e.iou;
        sq_err_sum += (e.area_pred - e.area_gt) * (e.area_pred - e.area_gt);
        cov_num += e.area_gt * e.iou;
        cov_den += e.area_gt;
        rep.per_instance.push_back(std::move(e));
    }
    const double n = static_cast<double>(preds.size());
    if (n > 0) {
        rep.mean_iou = iou_sum / n;
        rep.area_rmse = std::sqrt(sq_err_sum / n);
        rep.weighted_coverage = cov_den > 0.0 ? cov_num / cov_den : 0.0;
    }
    return rep;
}

}  // namespace dsac
