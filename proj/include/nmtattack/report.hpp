#pragma once

#include <string>

#include <json.hpp>

#include "nmtattack/attack.hpp"
#include "nmtattack/metrics.hpp"
#include "nmtattack/vocab.hpp"

namespace nmtattack {

nlohmann::ordered_json metric_report_json(const MetricReport& r);
MetricReport metric_report_from_json(const nlohmann::json& j);

nlohmann::ordered_json attack_config_json(const AttackConfig& cfg);

// One JSONL line per attacked sentence. Wall-clock time is deliberately not
// serialized so repeated runs are byte-identical.
nlohmann::ordered_json attack_line_json(int index, const AttackResult& result,
                                        const MetricReport& report, const Vocabulary& vocab,
                                        const std::string& config_hash, std::uint64_t run_seed);

nlohmann::ordered_json summary_json(const CorpusSummary& s);

// Aligned plain-text table in the ASR / RDBLEU / RDchrF / Sim. / Perp. / TER
// column order.
std::string summary_table(const CorpusSummary& s);

}  // namespace nmtattack
