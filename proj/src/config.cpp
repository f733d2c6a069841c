#include "daq8/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace daq8 {

using nlohmann::json;

double LrSchedule::at(int epoch) const {
    double lr = base;
    if (kind == "multistep")
        for (int m : milestones)
            if (epoch >= m) lr *= gamma;
    return lr;
}

void LrSchedule::validate() const {
    if (kind != "constant" && kind != "multistep")
        throw ContractViolation("lr schedule kind must be constant or multistep, got '" + kind +
                                "'");
    if (!(base > 0.0)) throw ContractViolation("lr base must be positive");
    if (kind == "multistep" && !(gamma > 0.0))
        throw ContractViolation("lr gamma must be positive");
}

void TrainConfig::validate() const {
    hyper.validate();
    lr.validate();
    if (epochs < 0) throw ContractViolation("epochs must be >= 0");
    if (batch_size < 1) throw ContractViolation("batch_size must be >= 1");
    if (metrics_every < 1) throw ContractViolation("metrics_every must be >= 1");
    if (!(momentum >= 0.0 && momentum < 1.0))
        throw ContractViolation("momentum must lie in [0,1)");
    if (alpha < 0.0) throw ContractViolation("alpha must be non-negative");
    if (dataset.source != "synthetic" && dataset.source != "idx")
        throw ContractViolation("dataset source must be synthetic or idx, got '" + dataset.source +
                                "'");
}

void TrainConfig::reseed(uint64_t master) {
    seed_init = derive_key(master, 1);
    seed_shuffle = derive_key(master, 2);
    seed_round = derive_key(master, 3);
    dataset.synthetic.seed = derive_key(master, 4);
}

TrainConfig default_train_config() { return TrainConfig{}; }

namespace {

std::vector<StageSpec> parse_stages(const json& arr) {
    std::vector<StageSpec> stages;
    for (const json& j : arr) {
        const std::string type = j.at("type").get<std::string>();
        if (type == "conv") {
            ConvLayerSpec c;
            c.out_channels = j.at("out").get<int>();
            const int k = j.value("kernel", 3);
            c.conv.kernel_h = j.value("kernel_h", k);
            c.conv.kernel_w = j.value("kernel_w", k);
            const int s = j.value("stride", 1);
            c.conv.stride_h = j.value("stride_h", s);
            c.conv.stride_w = j.value("stride_w", s);
            const int p = j.value("pad", 0);
            c.conv.pad_h = j.value("pad_h", p);
            c.conv.pad_w = j.value("pad_w", p);
            c.bias = j.value("bias", true);
            stages.emplace_back(c);
        } else if (type == "relu") {
            stages.emplace_back(ReluSpec{});
        } else if (type == "pool") {
            PoolSpec p;
            p.kernel = j.value("kernel", 2);
            p.stride = j.value("stride", p.kernel);
            stages.emplace_back(p);
        } else if (type == "linear") {
            LinearSpec l;
            l.out_features = j.at("out").get<int>();
            l.bias = j.value("bias", true);
            stages.emplace_back(l);
        } else {
            throw FormatError("unknown layer type '" + type + "'");
        }
    }
    return stages;
}

json stages_to_json(const std::vector<StageSpec>& stages) {
    json arr = json::array();
    for (const StageSpec& st : stages) {
        json j;
        if (const auto* c = std::get_if<ConvLayerSpec>(&st)) {
            j["type"] = "conv";
            j["out"] = c->out_channels;
            j["kernel_h"] = c->conv.kernel_h;
            j["kernel_w"] = c->conv.kernel_w;
            j["stride_h"] = c->conv.stride_h;
            j["stride_w"] = c->conv.stride_w;
            j["pad_h"] = c->conv.pad_h;
            j["pad_w"] = c->conv.pad_w;
            j["bias"] = c->bias;
        } else if (std::get_if<ReluSpec>(&st)) {
            j["type"] = "relu";
        } else if (const auto* p = std::get_if<PoolSpec>(&st)) {
            j["type"] = "pool";
            j["kernel"] = p->kernel;
            j["stride"] = p->stride;
        } else if (const auto* l = std::get_if<LinearSpec>(&st)) {
            j["type"] = "linear";
            j["out"] = l->out_features;
            j["bias"] = l->bias;
        }
        arr.push_back(j);
    }
    return arr;
}

} // namespace

TrainConfig parse_train_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw FormatError(std::string("config is not valid JSON: ") + e.what());
    }
    TrainConfig cfg;
    try {
        if (j.contains("mode")) cfg.mode = precision_from_name(j["mode"].get<std::string>());
        if (j.contains("hyper")) {
            const json& h = j["hyper"];
            cfg.hyper.k = h.value("k", cfg.hyper.k);
            cfg.hyper.A = h.value("A", cfg.hyper.A);
            cfg.hyper.lambda = h.value("lambda", cfg.hyper.lambda);
            cfg.hyper.allow_ka_above_one = h.value("allow_ka_above_one", false);
        }
        cfg.epochs = j.value("epochs", cfg.epochs);
        cfg.batch_size = j.value("batch_size", cfg.batch_size);
        if (j.contains("lr")) {
            const json& l = j["lr"];
            cfg.lr.kind = l.value("kind", cfg.lr.kind);
            cfg.lr.base = l.value("base", cfg.lr.base);
            cfg.lr.gamma = l.value("gamma", cfg.lr.gamma);
            if (l.contains("milestones")) cfg.lr.milestones = l["milestones"].get<std::vector<int>>();
        }
        cfg.momentum = j.value("momentum", cfg.momentum);
        if (j.contains("seeds")) {
            const json& s = j["seeds"];
            cfg.seed_init = s.value("init", cfg.seed_init);
            cfg.seed_shuffle = s.value("shuffle", cfg.seed_shuffle);
            cfg.seed_round = s.value("rounding", cfg.seed_round);
        }
        if (j.contains("dataset")) {
            const json& d = j["dataset"];
            cfg.dataset.source = d.value("source", cfg.dataset.source);
            cfg.dataset.classes = d.value("classes", cfg.dataset.classes);
            cfg.dataset.val_samples = d.value("val_samples", cfg.dataset.val_samples);
            cfg.dataset.synthetic.samples = d.value("train_samples", cfg.dataset.synthetic.samples);
            cfg.dataset.synthetic.channels = d.value("channels", cfg.dataset.synthetic.channels);
            cfg.dataset.synthetic.size = d.value("image_size", cfg.dataset.synthetic.size);
            cfg.dataset.synthetic.classes = cfg.dataset.classes;
            cfg.dataset.synthetic.noise = d.value("noise", cfg.dataset.synthetic.noise);
            cfg.dataset.synthetic.seed = d.value("seed", cfg.dataset.synthetic.seed);
            cfg.dataset.train_images = d.value("train_images", std::string());
            cfg.dataset.train_labels = d.value("train_labels", std::string());
            cfg.dataset.val_images = d.value("val_images", std::string());
            cfg.dataset.val_labels = d.value("val_labels", std::string());
        }
        if (j.contains("model")) cfg.stages = parse_stages(j["model"]);
        cfg.metrics_every = j.value("metrics_every", cfg.metrics_every);
        cfg.alpha = j.value("alpha", cfg.alpha);
        cfg.exempt_first_last = j.value("exempt_first_last", cfg.exempt_first_last);
        cfg.strict_alg1_gx_scales = j.value("strict_alg1_gx_scales", cfg.strict_alg1_gx_scales);
        cfg.dump_gradients = j.value("dump_gradients", cfg.dump_gradients);
    } catch (const json::exception& e) {
        throw FormatError(std::string("config field error: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

TrainConfig load_train_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_train_config(ss.str());
}

std::string train_config_to_json(const TrainConfig& cfg) {
    json j;
    j["mode"] = precision_name(cfg.mode);
    j["hyper"] = {{"k", cfg.hyper.k},
                  {"A", cfg.hyper.A},
                  {"lambda", cfg.hyper.lambda},
                  {"allow_ka_above_one", cfg.hyper.allow_ka_above_one}};
    j["epochs"] = cfg.epochs;
    j["batch_size"] = cfg.batch_size;
    j["lr"] = {{"kind", cfg.lr.kind},
               {"base", cfg.lr.base},
               {"gamma", cfg.lr.gamma},
               {"milestones", cfg.lr.milestones}};
    j["momentum"] = cfg.momentum;
    j["seeds"] = {{"init", cfg.seed_init}, {"shuffle", cfg.seed_shuffle}, {"rounding", cfg.seed_round}};
    j["dataset"] = {{"source", cfg.dataset.source},
                    {"classes", cfg.dataset.classes},
                    {"val_samples", cfg.dataset.val_samples},
                    {"train_samples", cfg.dataset.synthetic.samples},
                    {"channels", cfg.dataset.synthetic.channels},
                    {"image_size", cfg.dataset.synthetic.size},
                    {"noise", cfg.dataset.synthetic.noise},
                    {"seed", cfg.dataset.synthetic.seed}};
    if (cfg.dataset.source == "idx") {
        j["dataset"]["train_images"] = cfg.dataset.train_images;
        j["dataset"]["train_labels"] = cfg.dataset.train_labels;
        j["dataset"]["val_images"] = cfg.dataset.val_images;
        j["dataset"]["val_labels"] = cfg.dataset.val_labels;
    }
    if (!cfg.stages.empty()) j["model"] = stages_to_json(cfg.stages);
    j["metrics_every"] = cfg.metrics_every;
    j["alpha"] = cfg.alpha;
    j["exempt_first_last"] = cfg.exempt_first_last;
    j["strict_alg1_gx_scales"] = cfg.strict_alg1_gx_scales;
    j["dump_gradients"] = cfg.dump_gradients;
    return j.dump(2);
}

} // namespace daq8
