#include "nmtattack/config.hpp"

#include "nmtattack/corpus.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace nmtattack {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    std::size_t b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

int parse_int(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const int v = std::stoi(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "' expects an integer, got '" + value + "'");
    }
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "' expects a number, got '" + value + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "no") return false;
    throw ConfigError("config key '" + key + "' expects a boolean, got '" + value + "'");
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const unsigned long long v = std::stoull(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "' expects an unsigned integer, got '" + value + "'");
    }
}

void apply_model_key(ModelConfig& m, const std::string& full_key, const std::string& key,
                     const std::string& value) {
    if (key == "d_model")
        m.d_model = parse_int(full_key, value);
    else if (key == "n_heads")
        m.n_heads = parse_int(full_key, value);
    else if (key == "n_layers")
        m.n_layers = parse_int(full_key, value);
    else if (key == "ffn_width")
        m.ffn_width = parse_int(full_key, value);
    else if (key == "max_len")
        m.max_len = parse_int(full_key, value);
    else if (key == "dropout")
        m.dropout = parse_double(full_key, value);
    else
        throw ConfigError("unknown config key '" + full_key + "'");
}

}  // namespace

RunConfig RunConfig::from_string(const std::string& text) {
    RunConfig cfg;
    std::istringstream is(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const std::size_t comment = line.find_first_of("#;");
        if (comment != std::string::npos) line = line.substr(0, comment);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("config line " + std::to_string(lineno) + ": malformed section '" +
                                  line + "'");
            section = trim(line.substr(1, line.size() - 2));
            if (section != "nmt" && section != "lm" && section != "corpus" && section != "train" &&
                section != "attack" && section != "run")
                throw ConfigError("unknown config section '" + section + "'");
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value, got '" +
                              line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const std::string full_key = section.empty() ? key : section + "." + key;
        if (section.empty())
            throw ConfigError("config key '" + key + "' appears before any [section]");

        if (section == "nmt") {
            apply_model_key(cfg.nmt, full_key, key, value);
        } else if (section == "lm") {
            apply_model_key(cfg.lm, full_key, key, value);
        } else if (section == "corpus") {
            if (key == "task")
                cfg.corpus_task = value;
            else if (key == "n_train")
                cfg.n_train = parse_int(full_key, value);
            else if (key == "n_test")
                cfg.n_test = parse_int(full_key, value);
            else if (key == "len_min")
                cfg.len_min = parse_int(full_key, value);
            else if (key == "len_max")
                cfg.len_max = parse_int(full_key, value);
            else if (key == "vocab_size")
                cfg.vocab_size = parse_int(full_key, value);
            else
                throw ConfigError("unknown config key '" + full_key + "'");
        } else if (section == "train") {
            if (key == "nmt_epochs")
                cfg.nmt_epochs = parse_int(full_key, value);
            else if (key == "nmt_lr")
                cfg.nmt_lr = parse_double(full_key, value);
            else if (key == "lm_epochs")
                cfg.lm_epochs = parse_int(full_key, value);
            else if (key == "lm_lr")
                cfg.lm_lr = parse_double(full_key, value);
            else if (key == "batch_size")
                cfg.batch_size = parse_int(full_key, value);
            else
                throw ConfigError("unknown config key '" + full_key + "'");
        } else if (section == "attack") {
            if (key == "alpha")
                cfg.attack.alpha = parse_double(full_key, value);
            else if (key == "lr")
                cfg.attack.lr = parse_double(full_key, value);
            else if (key == "iterations")
                cfg.attack.iterations = parse_int(full_key, value);
            else if (key == "batch")
                cfg.attack.batch = parse_int(full_key, value);
            else if (key == "tau")
                cfg.attack.tau = parse_double(full_key, value);
            else if (key == "init_value")
                cfg.attack.init_value = parse_double(full_key, value);
            else if (key == "n_samples")
                cfg.attack.n_samples = parse_int(full_key, value);
            else if (key == "forbid_specials")
                cfg.attack.forbid_specials = parse_bool(full_key, value);
            else
                throw ConfigError("unknown config key '" + full_key + "'");
        } else if (section == "run") {
            if (key == "seed")
                cfg.seed = parse_u64(full_key, value);
            else
                throw ConfigError("unknown config key '" + full_key + "'");
        }
    }
    cfg.validate();
    return cfg;
}

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot read config " + path);
    std::ostringstream buf;
    buf << f.rdbuf();
    return from_string(buf.str());
}

void RunConfig::validate() const {
    parse_task(corpus_task);
    if (n_train < 1) throw ConfigError("corpus.n_train must be positive");
    if (n_test < 0) throw ConfigError("corpus.n_test must be >= 0");
    if (len_min < 1 || len_max < len_min) throw ConfigError("invalid corpus length range");
    if (vocab_size <= Vocabulary::N_SPECIAL)
        throw ConfigError("corpus.vocab_size must exceed " + std::to_string(Vocabulary::N_SPECIAL));
    if (len_max + 2 > nmt.max_len || len_max + 2 > lm.max_len)
        throw ConfigError("corpus.len_max + 2 exceeds a model max_len");
    if (nmt_epochs < 0 || lm_epochs < 0) throw ConfigError("epochs must be >= 0");
    if (nmt_lr <= 0 || lm_lr <= 0) throw ConfigError("learning rates must be positive");
    if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
    attack.validate();
}

nlohmann::ordered_json RunConfig::to_json() const {
    nlohmann::ordered_json j;
    auto model_json = [](const ModelConfig& m) {
        return nlohmann::ordered_json{{"d_model", m.d_model},     {"n_heads", m.n_heads},
                                      {"n_layers", m.n_layers},   {"ffn_width", m.ffn_width},
                                      {"max_len", m.max_len},     {"dropout", m.dropout}};
    };
    j["nmt"] = model_json(nmt);
    j["lm"] = model_json(lm);
    j["corpus"] = {{"task", corpus_task}, {"n_train", n_train},       {"n_test", n_test},
                   {"len_min", len_min},  {"len_max", len_max},       {"vocab_size", vocab_size}};
    j["train"] = {{"nmt_epochs", nmt_epochs},
                  {"nmt_lr", nmt_lr},
                  {"lm_epochs", lm_epochs},
                  {"lm_lr", lm_lr},
                  {"batch_size", batch_size}};
    j["attack"] = {{"alpha", attack.alpha},
                   {"lr", attack.lr},
                   {"iterations", attack.iterations},
                   {"batch", attack.batch},
                   {"tau", attack.tau},
                   {"init_value", attack.init_value},
                   {"n_samples", attack.n_samples},
                   {"forbid_specials", attack.forbid_specials}};
    j["run"] = {{"seed", seed}};
    return j;
}

std::string RunConfig::hash() const {
    const std::string canon = to_json().dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : canon) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

}  // namespace nmtattack
