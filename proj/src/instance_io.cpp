#include "wdro/instance_io.hpp"

#include "wdro/wrlr.hpp"

namespace wdro {
namespace {

UncertaintySet set_from_json(const nlohmann::json& j, int label) {
    UncertaintySet set;
    set.label = label;
    if (j.contains("box") && !j.at("box").is_null())
        set.box = BoxRegion(j.at("box").at("lower").get<Vector>(), j.at("box").at("upper").get<Vector>(), label);
    set.points = j.value("points", std::vector<Vector>{});
    if (set.empty()) throw Error("support of class " + std::to_string(label) + " is empty");
    return set;
}

nlohmann::json set_to_json(const UncertaintySet& set) {
    nlohmann::json j;
    j["box"] = set.box ? nlohmann::json{{"lower", set.box->lower}, {"upper", set.box->upper}} : nlohmann::json();
    j["points"] = set.points;
    return j;
}

}  // namespace

ProblemData problem_from_json(const nlohmann::json& j) {
    std::vector<Sample> samples;
    for (const auto& s : j.at("samples")) samples.push_back({s.at("x").get<Vector>(), s.at("y").get<int>()});
    Dataset dataset(std::move(samples), j.value("feature_names", std::vector<std::string>{}));
    const double r0 = j.at("r0").get<double>();
    if (!(r0 > 0.0)) throw Error("instance r0 must be positive");
    const double radius = j.value("theta_radius", 10.0);

    std::array<UncertaintySet, 2> support;
    if (j.contains("support")) {
        const auto& sj = j.at("support");
        for (int y : {0, 1}) {
            const std::string key = std::to_string(y);
            if (sj.contains(key)) {
                support[y] = set_from_json(sj.at(key), y);
            } else if (dataset.count_label(y) > 0) {
                throw Error("support for class " + key + " is missing");
            } else {
                support[y].label = y;
            }
        }
    } else {
        support = build_support(dataset);
    }
    return make_problem(std::move(dataset), std::move(support), std::make_shared<LogisticLoss>(), r0,
                        ThetaBox::symmetric(j.at("samples").at(0).at("x").size() + 1, radius));
}

nlohmann::json problem_to_json(const ProblemData& data) {
    nlohmann::json samples = nlohmann::json::array();
    for (const Sample& s : data.dataset.samples()) samples.push_back({{"x", s.features}, {"y", s.label}});
    nlohmann::json support;
    for (int y : {0, 1})
        if (!data.support[y].empty()) support[std::to_string(y)] = set_to_json(data.support[y]);
    return {{"samples", samples},
            {"r0", data.r0},
            {"theta_radius", data.theta_box.upper.empty() ? 10.0 : data.theta_box.upper[0]},
            {"support", support}};
}

}  // namespace wdro
