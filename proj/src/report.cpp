#include "nmtattack/report.hpp"

#include <cstdio>
#include <sstream>

namespace nmtattack {

using nlohmann::ordered_json;

ordered_json metric_report_json(const MetricReport& r) {
    ordered_json j;
    j["bleu_clean"] = r.bleu_clean;
    j["bleu_adv"] = r.bleu_adv;
    j["chrf_clean"] = r.chrf_clean;
    j["chrf_adv"] = r.chrf_adv;
    if (r.rdbleu_defined)
        j["rdbleu"] = r.rdbleu;
    else
        j["rdbleu"] = nullptr;
    if (r.rdchrf_defined)
        j["rdchrf"] = r.rdchrf;
    else
        j["rdchrf"] = nullptr;
    j["success"] = r.success;
    j["similarity"] = r.similarity;
    j["perplexity"] = r.perplexity;
    j["ter"] = r.ter;
    return j;
}

MetricReport metric_report_from_json(const nlohmann::json& j) {
    MetricReport r;
    r.bleu_clean = j.at("bleu_clean").get<double>();
    r.bleu_adv = j.at("bleu_adv").get<double>();
    r.chrf_clean = j.at("chrf_clean").get<double>();
    r.chrf_adv = j.at("chrf_adv").get<double>();
    r.rdbleu_defined = !j.at("rdbleu").is_null();
    if (r.rdbleu_defined) r.rdbleu = j.at("rdbleu").get<double>();
    r.rdchrf_defined = !j.at("rdchrf").is_null();
    if (r.rdchrf_defined) r.rdchrf = j.at("rdchrf").get<double>();
    r.success = j.at("success").get<bool>();
    r.similarity = j.at("similarity").get<double>();
    r.perplexity = j.at("perplexity").get<double>();
    r.ter = j.at("ter").get<double>();
    return r;
}

ordered_json attack_config_json(const AttackConfig& cfg) {
    ordered_json j;
    j["alpha"] = cfg.alpha;
    j["lr"] = cfg.lr;
    j["iterations"] = cfg.iterations;
    j["batch"] = cfg.batch;
    j["tau"] = cfg.tau;
    j["init_value"] = cfg.init_value;
    j["n_samples"] = cfg.n_samples;
    j["forbid_specials"] = cfg.forbid_specials;
    j["sentence_seed"] = cfg.seed;
    return j;
}

ordered_json attack_line_json(int index, const AttackResult& result, const MetricReport& report,
                              const Vocabulary& vocab, const std::string& config_hash,
                              std::uint64_t run_seed) {
    ordered_json j;
    j["index"] = index;
    j["original"] = vocab.decode(result.original);
    j["adversarial"] = vocab.decode(result.adversarial);
    j["metrics"] = metric_report_json(report);
    j["candidates"] = static_cast<int>(result.candidates.size());
    j["unique_candidates"] = result.unique_candidates;
    j["queries"] = result.queries;
    j["loss_trace"] = ordered_json{{"adv", result.trace.adv},
                                   {"nmt", result.trace.nmt},
                                   {"sim", result.trace.sim},
                                   {"total", result.trace.total}};
    j["config"] = attack_config_json(result.config);
    j["config_hash"] = config_hash;
    j["seed"] = run_seed;
    return j;
}

ordered_json summary_json(const CorpusSummary& s) {
    ordered_json j;
    j["sentences"] = s.sentences;
    j["asr"] = s.asr;
    j["rdbleu"] = s.mean_rdbleu;
    j["rdchrf"] = s.mean_rdchrf;
    j["similarity"] = s.mean_similarity;
    j["perplexity"] = s.mean_perplexity;
    j["ter"] = s.mean_ter;
    j["undefined_rdbleu"] = s.undefined_rdbleu;
    j["undefined_rdchrf"] = s.undefined_rdchrf;
    return j;
}

std::string summary_table(const CorpusSummary& s) {
    std::ostringstream os;
    char line[256];
    std::snprintf(line, sizeof(line), "%10s %8s %8s %8s %8s %10s %8s\n", "sentences", "ASR",
                  "RDBLEU", "RDchrF", "Sim.", "Perp.", "TER");
    os << line;
    std::snprintf(line, sizeof(line), "%10d %8.2f %8.3f %8.3f %8.3f %10.2f %8.2f\n", s.sentences,
                  s.asr, s.mean_rdbleu, s.mean_rdchrf, s.mean_similarity, s.mean_perplexity,
                  s.mean_ter);
    os << line;
    if (s.undefined_rdbleu > 0 || s.undefined_rdchrf > 0) {
        std::snprintf(line, sizeof(line),
                      "excluded from ratios: %d (BLEU), %d (chrF) with zero clean score\n",
                      s.undefined_rdbleu, s.undefined_rdchrf);
        os << line;
    }
    return os.str();
}

}  // namespace nmtattack
