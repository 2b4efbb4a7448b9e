#include "cknn/model_io.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace cknn {

namespace {

using nlohmann::json;

constexpr int kFormatVersion = 1;
constexpr const char* kFormatName = "cknn-regime-model";

std::string policy_name(DecidePolicy policy) {
    return policy == DecidePolicy::LiteralZeroCompetes ? "literal" : "default";
}

DecidePolicy policy_from_name(const std::string& name) {
    if (name == "default") return DecidePolicy::PositiveWeightOnly;
    if (name == "literal") return DecidePolicy::LiteralZeroCompetes;
    throw ModelFormatError("unknown decide policy '" + name + "'");
}

}  // namespace

std::string model_to_json(const RegimeModel& model) {
    json doc;
    doc["format"] = kFormatName;
    doc["version"] = kFormatVersion;
    doc["policy"] = policy_name(model.policy());
    doc["n_arms"] = model.n_arms();
    doc["p"] = model.p();
    if (model.is_constant()) {
        doc["kind"] = "constant";
        doc["arm"] = model.constant_arm();
    } else {
        doc["kind"] = "cnn";
        doc["k"] = model.k();
        doc["scaling"] = {{"min", model.scaling().min}, {"max", model.scaling().max}};
        doc["metric"] = {{"sigma2", model.metric().sigma2}};
        const TrialDataset& train = model.training();
        doc["training"] = {{"n", train.n()},
                           {"covariates", train.covariates()},
                           {"treatments", train.treatments()},
                           {"outcomes", train.outcomes()},
                           {"propensities", train.propensities()}};
    }
    return doc.dump();
}

RegimeModel model_from_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw ModelFormatError(std::string("cannot parse model file: ") + e.what());
    }
    try {
        if (doc.value("format", "") != kFormatName)
            throw ModelFormatError("not a regime model file");
        const int version = doc.at("version").get<int>();
        if (version > kFormatVersion)
            throw ModelFormatError("model file version " + std::to_string(version) +
                                   " is newer than supported version " +
                                   std::to_string(kFormatVersion));
        const DecidePolicy policy = policy_from_name(doc.at("policy").get<std::string>());
        const int n_arms = doc.at("n_arms").get<int>();
        const int p = doc.at("p").get<int>();
        const std::string kind = doc.at("kind").get<std::string>();
        if (kind == "constant")
            return RegimeModel::constant(doc.at("arm").get<int>(), n_arms, p, policy);
        if (kind != "cnn") throw ModelFormatError("unknown model kind '" + kind + "'");

        ScalingParams scaling;
        scaling.min = doc.at("scaling").at("min").get<std::vector<double>>();
        scaling.max = doc.at("scaling").at("max").get<std::vector<double>>();
        DiagonalMetric metric;
        metric.sigma2 = doc.at("metric").at("sigma2").get<std::vector<double>>();
        const auto& tr = doc.at("training");
        const int n = tr.at("n").get<int>();
        TrialDataset training(tr.at("covariates").get<std::vector<double>>(), n, p,
                              tr.at("treatments").get<std::vector<int>>(),
                              tr.at("outcomes").get<std::vector<double>>(),
                              tr.at("propensities").get<std::vector<double>>(), n_arms);
        return RegimeModel::cnn(std::move(training), std::move(scaling), std::move(metric),
                                doc.at("k").get<int>(), policy);
    } catch (const json::exception& e) {
        throw ModelFormatError(std::string("malformed model file: ") + e.what());
    }
}

void write_file_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("io", "cannot open file for writing: " + tmp);
        out << content;
        if (!out) throw Error("io", "write failed: " + tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw Error("io", "cannot rename " + tmp + " to " + path + ": " + ec.message());
}

void save_model(const RegimeModel& model, const std::string& path) {
    write_file_atomic(path, model_to_json(model));
}

RegimeModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ModelFormatError("cannot open model file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return model_from_json(buf.str());
}

}  // namespace cknn
