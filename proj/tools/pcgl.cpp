// Command-line front end for the murmur-detection pipeline: corpus synthesis,
// window preparation, the three training stages, evaluation, paired model
// comparison, data-efficiency curves and embedding export.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pcgl/corpus/synth.h"
#include "pcgl/harness/config.h"
#include "pcgl/harness/data.h"
#include "pcgl/harness/stats.h"
#include "pcgl/harness/train.h"
#include "pcgl/substrate/checkpoint.h"

namespace fs = std::filesystem;
using namespace pcgl;

namespace {

void write_json_file(const fs::path& path, const nlohmann::json& j) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    PCGL_CHECK(out, "cannot write " << path.string());
    out << j.dump(2) << '\n';
    PCGL_CHECK(out.good(), "write failed for " << path.string());
}

// Provenance record dropped next to every produced artifact.
void write_run_manifest(const fs::path& artifact, bool is_dir, const std::string& command,
                        const harness::RunConfig& cfg, const nlohmann::json& args) {
    const fs::path path = is_dir ? artifact / "run_manifest.json"
                                 : fs::path(artifact.string() + ".run.json");
    write_json_file(path, nlohmann::json{{"command", command},
                                         {"seed", cfg.seed},
                                         {"config", harness::run_config_json(cfg)},
                                         {"args", args}});
}

const std::vector<windows::Window>& pick_split(const harness::PreparedDataset& ds,
                                               const std::string& name) {
    if (name == "train") return ds.train;
    if (name == "val") return ds.val;
    PCGL_CHECK(name == "test", "unknown split '" << name << "'");
    return ds.test;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"self-supervised phonocardiogram murmur pipeline"};
    app.fallthrough();
    app.require_subcommand(1);

    std::uint64_t seed = 42;
    std::string config_path;
    auto* seed_opt = app.add_option("--seed", seed, "global RNG seed")->capture_default_str();
    app.add_option("--config", config_path, "run configuration file (sectioned key = value)");

    auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
    corpus::SynthSpec spec;
    std::string synth_out;
    synth->add_option("--patients", spec.n_patients)->capture_default_str();
    synth->add_option("--recordings", spec.recordings_per_patient)->capture_default_str();
    synth->add_option("--duration", spec.duration_s, "seconds per recording")
        ->capture_default_str();
    synth->add_option("--prevalence", spec.murmur_prevalence)->capture_default_str();
    synth->add_option("--murmur-snr", spec.murmur_snr_db, "murmur vs heart-sound RMS, dB")
        ->capture_default_str();
    synth->add_option("--background-snr", spec.background_snr_db)->capture_default_str();
    synth->add_option("--out", synth_out, "corpus directory")->required();

    auto* prepare = app.add_subcommand("prepare", "windows, splits and oversampling plan");
    std::string prep_corpus, prep_out;
    prepare->add_option("--corpus", prep_corpus, "corpus directory")->required();
    prepare->add_option("--out", prep_out, "prepared dataset directory")->required();

    auto* pretrain_cmd = app.add_subcommand("pretrain", "contrastive pretraining");
    std::string pre_data, pre_out;
    pretrain_cmd->add_option("--data", pre_data, "prepared dataset directory")->required();
    pretrain_cmd->add_option("--out", pre_out, "checkpoint path")->required();

    auto* proto_cmd = app.add_subcommand("train-proto", "prototypical fine-tuning");
    std::string proto_data, proto_init, proto_out;
    proto_cmd->add_option("--data", proto_data)->required();
    proto_cmd->add_option("--init", proto_init, "pretraining checkpoint")->required();
    proto_cmd->add_option("--out", proto_out, "checkpoint path")->required();

    auto* linear_cmd = app.add_subcommand("train-linear", "linear-probe baseline");
    std::string lin_data, lin_init, lin_out;
    linear_cmd->add_option("--data", lin_data)->required();
    linear_cmd->add_option("--init", lin_init,
                           "pretraining checkpoint (omit to train from scratch)");
    linear_cmd->add_option("--out", lin_out, "checkpoint path")->required();

    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a split");
    std::string eval_data, eval_model, eval_split = "test", eval_out, eval_preds;
    eval_cmd->add_option("--data", eval_data)->required();
    eval_cmd->add_option("--model", eval_model, "checkpoint path")->required();
    eval_cmd->add_option("--split", eval_split, "train|val|test")->capture_default_str();
    eval_cmd->add_option("--out", eval_out, "report JSON path")->required();
    eval_cmd->add_option("--predictions", eval_preds, "also write patient_id,label,score lines");

    auto* compare_cmd = app.add_subcommand(
        "compare", "paired significance tests on two prediction files");
    std::string cmp_a, cmp_b, cmp_out;
    compare_cmd->add_option("--a", cmp_a, "prediction file A")->required();
    compare_cmd->add_option("--b", cmp_b, "prediction file B")->required();
    compare_cmd->add_option("--out", cmp_out, "report JSON path")->required();

    auto* eff_cmd = app.add_subcommand("efficiency", "label-fraction data-efficiency curve");
    std::string eff_data, eff_init, eff_out;
    std::vector<double> eff_fracs{0.25, 0.5, 0.75, 1.0};
    eff_cmd->add_option("--data", eff_data)->required();
    eff_cmd->add_option("--init", eff_init, "reuse a pretraining checkpoint");
    eff_cmd->add_option("--fractions", eff_fracs)->delimiter(',')->capture_default_str();
    eff_cmd->add_option("--out", eff_out, "curve JSON path")->required();

    auto* embed_cmd = app.add_subcommand("embed", "export embeddings for projection tools");
    std::string emb_data, emb_model, emb_split = "test", emb_out;
    embed_cmd->add_option("--data", emb_data)->required();
    embed_cmd->add_option("--model", emb_model)->required();
    embed_cmd->add_option("--split", emb_split, "train|val|test")->capture_default_str();
    embed_cmd->add_option("--out", emb_out, "float32 payload path")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        harness::RunConfig cfg;
        if (!config_path.empty()) cfg = harness::load_run_config(config_path);
        if (seed_opt->count() > 0 || config_path.empty()) cfg.seed = seed;

        if (app.got_subcommand(synth)) {
            spec.seed = cfg.seed;
            corpus::SynthCorpus corpus = corpus::synth_corpus(spec);
            corpus::write_corpus(corpus, synth_out);
            write_run_manifest(synth_out, true, "synth", cfg,
                               {{"patients", spec.n_patients},
                                {"recordings", spec.recordings_per_patient},
                                {"duration_s", spec.duration_s},
                                {"prevalence", spec.murmur_prevalence},
                                {"murmur_snr_db", spec.murmur_snr_db},
                                {"background_snr_db", spec.background_snr_db},
                                {"out", synth_out}});
            std::cout << "wrote " << corpus.recordings.size() << " recordings to "
                      << synth_out << "\n";
        } else if (app.got_subcommand(prepare)) {
            harness::PreparedDataset ds = harness::prepare_dataset(prep_corpus, cfg.seed);
            harness::save_prepared(prep_out, ds, cfg.seed);
            write_run_manifest(prep_out, true, "prepare", cfg,
                               {{"corpus", prep_corpus}, {"out", prep_out}});
            std::cout << "windows: train " << ds.train.size() << ", val " << ds.val.size()
                      << ", test " << ds.test.size() << " (dropped " << ds.dropped_quality
                      << " on quality)\n";
        } else if (app.got_subcommand(pretrain_cmd)) {
            const auto ds = harness::load_prepared(pre_data);
            harness::PretrainResult res = harness::pretrain(cfg, ds);
            substrate::save_checkpoint(pre_out, res.checkpoint);
            write_run_manifest(pre_out, false, "pretrain", cfg,
                               {{"data", pre_data}, {"out", pre_out}});
            std::printf("pretrain: %d epochs, loss %.4f -> %.4f\n", cfg.pretrain.epochs,
                        res.epoch_loss.front(), res.epoch_loss.back());
        } else if (app.got_subcommand(proto_cmd)) {
            const auto ds = harness::load_prepared(proto_data);
            const auto init = substrate::load_checkpoint(proto_init);
            harness::FinetuneResult res = harness::train_proto(cfg, ds, init);
            substrate::save_checkpoint(proto_out, res.checkpoint);
            write_run_manifest(proto_out, false, "train-proto", cfg,
                               {{"data", proto_data}, {"init", proto_init},
                                {"out", proto_out}});
            std::printf("train-proto: val F1 %.4f -> %.4f, threshold %.4f\n",
                        res.val_metric.front(), res.val_metric.back(), res.threshold);
        } else if (app.got_subcommand(linear_cmd)) {
            const auto ds = harness::load_prepared(lin_data);
            substrate::Checkpoint init;
            if (!lin_init.empty()) init = substrate::load_checkpoint(lin_init);
            harness::FinetuneResult res =
                harness::train_linear(cfg, ds, lin_init.empty() ? nullptr : &init);
            substrate::save_checkpoint(lin_out, res.checkpoint);
            write_run_manifest(lin_out, false, "train-linear", cfg,
                               {{"data", lin_data},
                                {"init", lin_init.empty() ? "scratch" : lin_init},
                                {"out", lin_out}});
            std::printf("train-linear: val loss %.4f -> %.4f, threshold %.4f\n",
                        res.val_metric.front(), res.val_metric.back(), res.threshold);
        } else if (app.got_subcommand(eval_cmd)) {
            const auto ds = harness::load_prepared(eval_data);
            const auto ckpt = substrate::load_checkpoint(eval_model);
            const auto& split = pick_split(ds, eval_split);
            const harness::EvalReport report = harness::evaluate(ckpt, split);
            write_json_file(eval_out, harness::report_json(report));
            if (!eval_preds.empty())
                harness::save_predictions(eval_preds, harness::predict(ckpt, split));
            write_run_manifest(eval_out, false, "eval", cfg,
                               {{"data", eval_data},
                                {"model", eval_model},
                                {"split", eval_split},
                                {"out", eval_out}});
            std::printf("eval[%s]: f1 %.4f auroc %.4f auprc %.4f ece %.4f\n",
                        eval_split.c_str(), report.f1, report.auroc, report.auprc,
                        report.ece);
        } else if (app.got_subcommand(compare_cmd)) {
            const harness::Predictions a = harness::load_predictions(cmp_a);
            const harness::Predictions b = harness::load_predictions(cmp_b);
            PCGL_CHECK(a.patient_ids == b.patient_ids && a.labels == b.labels,
                       "compare: prediction files are not paired (patients or labels differ)");
            harness::ComparisonReport r;
            r.delong = harness::delong_test(a.scores, b.scores, a.labels);
            std::vector<bool> ca(a.scores.size()), cb(a.scores.size());
            for (std::size_t i = 0; i < a.scores.size(); ++i) {
                ca[i] = (a.scores[i] > 0.5) == (a.labels[i] == 1);
                cb[i] = (b.scores[i] > 0.5) == (b.labels[i] == 1);
            }
            r.mcnemar = harness::mcnemar_test(ca, cb);
            r.bootstrap_auprc = harness::bootstrap_auprc(a.scores, b.scores, a.labels,
                                                         a.patient_ids, 2000, cfg.seed);
            write_json_file(cmp_out, harness::comparison_json(r));
            write_run_manifest(cmp_out, false, "compare", cfg,
                               {{"a", cmp_a}, {"b", cmp_b}, {"out", cmp_out}});
            std::printf("compare: dAUC %+0.4f (p %.4f), McNemar p %.4f, dAUPRC %+0.4f "
                        "(p %.4f)\n",
                        r.delong.delta, r.delong.p, r.mcnemar.p, r.bootstrap_auprc.delta,
                        r.bootstrap_auprc.p);
        } else if (app.got_subcommand(eff_cmd)) {
            const auto ds = harness::load_prepared(eff_data);
            substrate::Checkpoint init;
            const substrate::Checkpoint* initp = nullptr;
            if (!eff_init.empty()) {
                init = substrate::load_checkpoint(eff_init);
                initp = &init;
            }
            const auto pts = harness::efficiency_curve(cfg, ds, eff_fracs, initp);
            write_json_file(eff_out, harness::efficiency_json(pts));
            write_run_manifest(eff_out, false, "efficiency", cfg,
                               {{"data", eff_data},
                                {"fractions", eff_fracs},
                                {"init", eff_init.empty() ? "none" : eff_init},
                                {"out", eff_out}});
            for (const auto& p : pts)
                std::printf("fraction %.2f: ssl F1 %.4f vs supervised %.4f\n", p.fraction,
                            p.ssl_f1, p.supervised_f1);
        } else if (app.got_subcommand(embed_cmd)) {
            const auto ds = harness::load_prepared(emb_data);
            const auto ckpt = substrate::load_checkpoint(emb_model);
            harness::export_embeddings(ckpt, pick_split(ds, emb_split), emb_out);
            write_run_manifest(emb_out, false, "embed", cfg,
                               {{"data", emb_data},
                                {"model", emb_model},
                                {"split", emb_split},
                                {"out", emb_out}});
            std::cout << "wrote embeddings to " << emb_out << "\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
