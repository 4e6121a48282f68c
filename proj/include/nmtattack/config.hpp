#pragma once

#include <cstdint>
#include <string>

#include "nmtattack/attack.hpp"
#include "nmtattack/model.hpp"

#include <json.hpp>

namespace nmtattack {

// Resolved run configuration, parsed from an INI-style file with [section]
// headers and key = value lines. Unknown sections or keys are rejected.
struct RunConfig {
    ModelConfig nmt;  // vocab_size filled in from the vocabulary at run time
    ModelConfig lm;

    std::string corpus_task = "cipher";
    int n_train = 1200;
    int n_test = 50;
    int len_min = 4;
    int len_max = 12;
    int vocab_size = 64;

    int nmt_epochs = 30;
    double nmt_lr = 1e-3;
    int lm_epochs = 20;
    double lm_lr = 1e-3;
    int batch_size = 8;

    AttackConfig attack;

    std::uint64_t seed = 42;

    static RunConfig from_file(const std::string& path);
    static RunConfig from_string(const std::string& text);

    void validate() const;
    nlohmann::ordered_json to_json() const;
    // FNV-1a of the canonical serialization; embedded in every output file.
    std::string hash() const;
};

}  // namespace nmtattack
