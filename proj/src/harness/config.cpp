#include "pcgl/harness/config.h"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "pcgl/common.h"

namespace pcgl::harness {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

[[noreturn]] void bad_value(const std::string& field, const std::string& value,
                            const char* want) {
    throw std::runtime_error("config " + field + ": '" + value + "' is not " + want);
}

long long to_int(const std::string& field, const std::string& value) {
    std::size_t pos = 0;
    long long v = 0;
    try {
        v = std::stoll(value, &pos);
    } catch (const std::exception&) {
        bad_value(field, value, "an integer");
    }
    if (pos != value.size()) bad_value(field, value, "an integer");
    return v;
}

double to_double(const std::string& field, const std::string& value) {
    std::size_t pos = 0;
    double v = 0;
    try {
        v = std::stod(value, &pos);
    } catch (const std::exception&) {
        bad_value(field, value, "a number");
    }
    if (pos != value.size()) bad_value(field, value, "a number");
    return v;
}

bool to_bool(const std::string& field, const std::string& value) {
    if (value == "true" || value == "1" || value == "on") return true;
    if (value == "false" || value == "0" || value == "off") return false;
    bad_value(field, value, "a boolean (true/false)");
}

}  // namespace

void RunConfig::validate() const {
    PCGL_CHECK(label_fraction > 0.0 && label_fraction <= 1.0,
               "config run.label_fraction: " << label_fraction << " outside (0, 1]");
    PCGL_CHECK(pretrain.epochs >= 1, "config pretrain.epochs: must be >= 1");
    PCGL_CHECK(pretrain.batch >= 2, "config pretrain.batch: contrastive batches need >= 2");
    PCGL_CHECK(pretrain.lr > 0, "config pretrain.lr: must be positive");
    PCGL_CHECK(pretrain.schedule == "cosine" || pretrain.schedule == "constant",
               "config pretrain.schedule: '" << pretrain.schedule
                                             << "' is not cosine or constant");
    PCGL_CHECK(proto.epochs >= 1, "config proto.epochs: must be >= 1");
    PCGL_CHECK(proto.lr > 0, "config proto.lr: must be positive");
    PCGL_CHECK(proto.weight_decay >= 0, "config proto.weight_decay: must be >= 0");
    PCGL_CHECK(proto.clip > 0, "config proto.clip: must be positive");
    PCGL_CHECK(proto.per_class >= 2, "config proto.per_class: must be >= 2");
    PCGL_CHECK(proto.k_shot >= 1, "config proto.k_shot: must be >= 1");
    PCGL_CHECK(baseline.epochs >= 1, "config baseline.epochs: must be >= 1");
    PCGL_CHECK(baseline.head_lr > 0, "config baseline.head_lr: must be positive");
    PCGL_CHECK(baseline.backbone_lr > 0, "config baseline.backbone_lr: must be positive");
    PCGL_CHECK(baseline.freeze_epochs >= 0 && baseline.freeze_epochs <= baseline.epochs,
               "config baseline.freeze_epochs: " << baseline.freeze_epochs
                                                 << " outside [0, epochs]");
    PCGL_CHECK(baseline.schedule == "plateau" || baseline.schedule == "constant",
               "config baseline.schedule: '" << baseline.schedule
                                             << "' is not plateau or constant");
    loss.validate();
}

RunConfig parse_run_config(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[') {
            PCGL_CHECK(t.back() == ']', "config line " << lineno << ": unterminated section");
            section = trim(t.substr(1, t.size() - 2));
            PCGL_CHECK(section == "run" || section == "pretrain" || section == "proto" ||
                           section == "baseline" || section == "ablation" || section == "loss",
                       "unknown config section '" << section << "'");
            continue;
        }
        const std::size_t eq = t.find('=');
        PCGL_CHECK(eq != std::string::npos,
                   "config line " << lineno << ": expected key = value, got '" << t << "'");
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        PCGL_CHECK(!key.empty(), "config line " << lineno << ": empty key");
        const std::string field = (section.empty() ? "run" : section) + "." + key;

        if (field == "run.seed")
            cfg.seed = static_cast<std::uint64_t>(to_int(field, value));
        else if (field == "run.label_fraction")
            cfg.label_fraction = to_double(field, value);
        else if (field == "pretrain.epochs")
            cfg.pretrain.epochs = static_cast<int>(to_int(field, value));
        else if (field == "pretrain.batch")
            cfg.pretrain.batch = static_cast<int>(to_int(field, value));
        else if (field == "pretrain.lr")
            cfg.pretrain.lr = to_double(field, value);
        else if (field == "pretrain.schedule")
            cfg.pretrain.schedule = value;
        else if (field == "proto.epochs")
            cfg.proto.epochs = static_cast<int>(to_int(field, value));
        else if (field == "proto.lr")
            cfg.proto.lr = to_double(field, value);
        else if (field == "proto.weight_decay")
            cfg.proto.weight_decay = to_double(field, value);
        else if (field == "proto.clip")
            cfg.proto.clip = to_double(field, value);
        else if (field == "proto.per_class")
            cfg.proto.per_class = static_cast<int>(to_int(field, value));
        else if (field == "proto.k_shot")
            cfg.proto.k_shot = static_cast<int>(to_int(field, value));
        else if (field == "baseline.epochs")
            cfg.baseline.epochs = static_cast<int>(to_int(field, value));
        else if (field == "baseline.head_lr")
            cfg.baseline.head_lr = to_double(field, value);
        else if (field == "baseline.backbone_lr")
            cfg.baseline.backbone_lr = to_double(field, value);
        else if (field == "baseline.freeze_epochs")
            cfg.baseline.freeze_epochs = static_cast<int>(to_int(field, value));
        else if (field == "baseline.schedule")
            cfg.baseline.schedule = value;
        else if (field == "ablation.dual_path")
            cfg.ablation.dual_path = to_bool(field, value);
        else if (field == "ablation.enhanced_encoders")
            cfg.ablation.enhanced_encoders = to_bool(field, value);
        else if (field == "ablation.hybrid_loss")
            cfg.ablation.hybrid_loss = to_bool(field, value);
        else if (field == "ablation.proto_head")
            cfg.ablation.proto_head = to_bool(field, value);
        else if (field == "loss.temperature")
            cfg.loss.temperature = to_double(field, value);
        else if (field == "loss.alpha")
            cfg.loss.alpha = to_double(field, value);
        else if (field == "loss.sinkhorn_epsilon")
            cfg.loss.sinkhorn.epsilon = to_double(field, value);
        else if (field == "loss.sinkhorn_iters")
            cfg.loss.sinkhorn.max_iters = static_cast<int>(to_int(field, value));
        else
            throw std::runtime_error("unknown config key '" + field + "'");
    }
    cfg.validate();
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    PCGL_CHECK(in, "cannot open config file " << path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_run_config(buf.str());
}

nlohmann::json run_config_json(const RunConfig& cfg) {
    return nlohmann::json{
        {"run", {{"seed", cfg.seed}, {"label_fraction", cfg.label_fraction}}},
        {"pretrain",
         {{"epochs", cfg.pretrain.epochs},
          {"batch", cfg.pretrain.batch},
          {"lr", cfg.pretrain.lr},
          {"schedule", cfg.pretrain.schedule}}},
        {"proto",
         {{"epochs", cfg.proto.epochs},
          {"lr", cfg.proto.lr},
          {"weight_decay", cfg.proto.weight_decay},
          {"clip", cfg.proto.clip},
          {"per_class", cfg.proto.per_class},
          {"k_shot", cfg.proto.k_shot}}},
        {"baseline",
         {{"epochs", cfg.baseline.epochs},
          {"head_lr", cfg.baseline.head_lr},
          {"backbone_lr", cfg.baseline.backbone_lr},
          {"freeze_epochs", cfg.baseline.freeze_epochs},
          {"schedule", cfg.baseline.schedule}}},
        {"ablation",
         {{"dual_path", cfg.ablation.dual_path},
          {"enhanced_encoders", cfg.ablation.enhanced_encoders},
          {"hybrid_loss", cfg.ablation.hybrid_loss},
          {"proto_head", cfg.ablation.proto_head}}},
        {"loss",
         {{"temperature", cfg.loss.temperature},
          {"alpha", cfg.loss.alpha},
          {"sinkhorn_epsilon", cfg.loss.sinkhorn.epsilon},
          {"sinkhorn_iters", cfg.loss.sinkhorn.max_iters}}},
    };
}

RunConfig run_config_from_json(const nlohmann::json& j) {
    RunConfig cfg;
    cfg.seed = j.at("run").at("seed").get<std::uint64_t>();
    cfg.label_fraction = j.at("run").at("label_fraction").get<double>();
    const auto& p = j.at("pretrain");
    cfg.pretrain.epochs = p.at("epochs").get<int>();
    cfg.pretrain.batch = p.at("batch").get<int>();
    cfg.pretrain.lr = p.at("lr").get<double>();
    cfg.pretrain.schedule = p.at("schedule").get<std::string>();
    const auto& q = j.at("proto");
    cfg.proto.epochs = q.at("epochs").get<int>();
    cfg.proto.lr = q.at("lr").get<double>();
    cfg.proto.weight_decay = q.at("weight_decay").get<double>();
    cfg.proto.clip = q.at("clip").get<double>();
    cfg.proto.per_class = q.at("per_class").get<int>();
    cfg.proto.k_shot = q.at("k_shot").get<int>();
    const auto& b = j.at("baseline");
    cfg.baseline.epochs = b.at("epochs").get<int>();
    cfg.baseline.head_lr = b.at("head_lr").get<double>();
    cfg.baseline.backbone_lr = b.at("backbone_lr").get<double>();
    cfg.baseline.freeze_epochs = b.at("freeze_epochs").get<int>();
    cfg.baseline.schedule = b.at("schedule").get<std::string>();
    const auto& a = j.at("ablation");
    cfg.ablation.dual_path = a.at("dual_path").get<bool>();
    cfg.ablation.enhanced_encoders = a.at("enhanced_encoders").get<bool>();
    cfg.ablation.hybrid_loss = a.at("hybrid_loss").get<bool>();
    cfg.ablation.proto_head = a.at("proto_head").get<bool>();
    const auto& l = j.at("loss");
    cfg.loss.temperature = l.at("temperature").get<double>();
    cfg.loss.alpha = l.at("alpha").get<double>();
    cfg.loss.sinkhorn.epsilon = l.at("sinkhorn_epsilon").get<double>();
    cfg.loss.sinkhorn.max_iters = l.at("sinkhorn_iters").get<int>();
    cfg.validate();
    return cfg;
}

encoders::EncoderConfig encoder_config(const RunConfig& cfg) {
    encoders::EncoderConfig ec;
    ec.tcn_dilated = cfg.ablation.enhanced_encoders;
    ec.enc2d_skips = cfg.ablation.enhanced_encoders;
    return ec;
}

objectives::LossConfig effective_loss(const RunConfig& cfg) {
    objectives::LossConfig lc = cfg.loss;
    if (!cfg.ablation.hybrid_loss) lc.alpha = 0.0;
    return lc;
}

}  // namespace pcgl::harness
