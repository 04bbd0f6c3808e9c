// Command-line surface for the patent-classification pipeline:
//   ingest   apply the utility/date-window/first-claim/CPC predicates to a dump
//   vocab    build a label vocabulary from labeled examples
//   train    fine-tune a model on labeled examples
//   eval     top-k precision/recall/F1 from a checkpoint or a predictions file
//   predict  ranked labels with probabilities for a single text
//
// Exit codes: 0 ok, 1 data, 2 I/O or config, 3 numerics, 4 shape/vocab
// mismatch.

#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include <nlohmann/json.hpp>

#include "patclass/patclass.hpp"

namespace {

using nlohmann::json;
using namespace patclass;

std::string iso_utc_now() {
    const std::time_t t = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

// Paths named in a config must be openable at command start; a missing file is
// a configuration problem (exit 2), not a data problem.
void require_readable(const std::string& path, const std::string& what) {
    if (path.empty()) throw ConfigError("no " + what + " path given");
    std::ifstream probe(path);
    if (!probe) throw ConfigError("cannot open " + what + ": " + path);
}

json load_config_file(const std::string& path) {
    if (path.empty()) return json::object();
    require_readable(path, "config");
    std::ifstream in(path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
    }
}

// Overwrites `value` with the config entry at a dotted key, when present.
template <typename T>
void merge_json(const json& cfg, const std::string& key, T& value) {
    const json* node = &cfg;
    std::string rest = key;
    for (auto dot = rest.find('.'); dot != std::string::npos; dot = rest.find('.')) {
        if (!node->contains(rest.substr(0, dot))) return;
        node = &node->at(rest.substr(0, dot));
        rest = rest.substr(dot + 1);
    }
    if (!node->contains(rest)) return;
    try {
        value = node->at(rest).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError("config key " + key + ": " + e.what());
    }
}

// Command-line flag wins, then the config file, then the built-in default
// already sitting in `value`.
template <typename T>
void merge_option(const CLI::App* cmd, const std::string& flag, const json& cfg,
                  const std::string& key, T& value) {
    if (cmd->count(flag) > 0) return;
    merge_json(cfg, key, value);
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const NumericsError*>(&e)) return 3;
    if (dynamic_cast<const ShapeError*>(&e) || dynamic_cast<const VocabRangeError*>(&e) ||
        dynamic_cast<const CacheError*>(&e)) {
        return 4;
    }
    if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const RangeError*>(&e) ||
        dynamic_cast<const FormatError*>(&e) || dynamic_cast<const CorruptError*>(&e)) {
        return 2;
    }
    if (dynamic_cast<const Error*>(&e)) return 1;  // remaining library errors are data problems
    return 2;
}

// ---------------------------------------------------------------------------
// ingest
// ---------------------------------------------------------------------------

struct IngestArgs {
    std::string input;
    std::string format = "jsonl";
    std::string window_start;
    std::string window_end;
    std::string type = "utility";
    std::string label_mode = "cpc";
    std::string output;
    std::string summary_path;
};

int cmd_ingest(const IngestArgs& args) {
    // The window is validated before any input is read.
    DateWindow window{parse_date(args.window_start), parse_date(args.window_end)};
    window.validate();
    const LabelScheme scheme = label_scheme_from_string(args.label_mode);
    const DatasetFormat format = dataset_format_from_string(args.format);

    require_readable(args.input, "input");
    std::ifstream in(args.input);

    std::vector<LabeledExample> kept;
    IngestSummary summary;
    if (format == DatasetFormat::jsonl) {
        const std::vector<PatentRecord> records = load_patents_jsonl(in);
        if (records.empty()) throw DataError("no records in " + args.input);
        auto [examples, s] = run_ingest(records, window, args.type, scheme);
        kept = std::move(examples);
        summary = s;
    } else {
        // TSV rows are already aggregated (type and claim structure are gone),
        // so only the date-window predicate applies.
        std::vector<LabeledExample> rows = load_labeled_tsv(in, scheme);
        if (rows.empty()) throw DataError("no records in " + args.input);
        for (LabeledExample& ex : rows) {
            if (window.contains(ex.date)) {
                ++summary.kept;
                kept.push_back(std::move(ex));
            } else {
                ++summary.out_of_window;
            }
        }
    }

    std::ofstream out(args.output);
    if (!out) throw ConfigError("cannot open output: " + args.output);
    write_labeled_jsonl(out, std::move(kept));
    out.flush();
    if (!out) throw ConfigError("write failed: " + args.output);

    const json report = summary;
    std::cout << report.dump() << "\n";
    if (!args.summary_path.empty()) {
        std::ofstream sout(args.summary_path);
        if (!sout) throw ConfigError("cannot open summary output: " + args.summary_path);
        sout << report.dump(2) << "\n";
    }
    return 0;
}

// ---------------------------------------------------------------------------
// vocab
// ---------------------------------------------------------------------------

struct VocabArgs {
    std::string input;
    std::string format = "jsonl";
    std::string label_mode = "cpc";
    std::string output;
};

int cmd_vocab(const VocabArgs& args) {
    require_readable(args.input, "input");
    const LabelScheme scheme = label_scheme_from_string(args.label_mode);
    const std::vector<LabeledExample> examples =
        load_dataset(args.input, dataset_format_from_string(args.format), scheme);
    const LabelVocabulary vocab = build_label_vocab(examples);

    std::ofstream out(args.output);
    if (!out) throw ConfigError("cannot open output: " + args.output);
    write_label_vocab(out, vocab);
    out.flush();
    if (!out) throw ConfigError("write failed: " + args.output);
    std::cout << json{{"labels", vocab.size()}, {"examples", examples.size()}}.dump() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
    std::string dataset;
    std::string dataset_format = "jsonl";
    std::string vocab;
    std::string labels;
    std::string output_dir;
    std::string init_checkpoint;
    bool reinit_classifier = false;
    int max_seq_length = 128;
    std::string preset = "base";
    ModelConfig model;  // dimension flags land here before resolution
    TrainConfig train;
};

ModelConfig preset_config(const std::string& preset) {
    if (preset == "base") return ModelConfig::base(2);
    if (preset == "tiny") return ModelConfig::tiny(2, 2);
    throw ConfigError("unknown preset: " + preset);
}

int cmd_train(CLI::App* cmd, const json& cfg, TrainArgs& args, bool seed_from_flag) {
    merge_option(cmd, "--dataset", cfg, "dataset", args.dataset);
    merge_option(cmd, "--dataset-format", cfg, "dataset_format", args.dataset_format);
    merge_option(cmd, "--vocab", cfg, "vocab", args.vocab);
    merge_option(cmd, "--labels", cfg, "labels", args.labels);
    merge_option(cmd, "--output-dir", cfg, "output_dir", args.output_dir);
    merge_option(cmd, "--init-checkpoint", cfg, "init_checkpoint", args.init_checkpoint);
    merge_option(cmd, "--reinit-classifier", cfg, "reinit_classifier", args.reinit_classifier);
    merge_option(cmd, "--max-seq-length", cfg, "max_seq_length", args.max_seq_length);
    merge_option(cmd, "--batch-size", cfg, "train.batch_size", args.train.batch_size);
    merge_option(cmd, "--base-lr", cfg, "train.base_lr", args.train.base_lr);
    merge_option(cmd, "--epochs", cfg, "train.epochs", args.train.epochs);
    merge_option(cmd, "--warmup-fraction", cfg, "train.warmup_fraction",
                 args.train.warmup_fraction);
    merge_option(cmd, "--grad-clip-norm", cfg, "train.grad_clip_norm", args.train.grad_clip_norm);
    merge_option(cmd, "--preset", cfg, "model.preset", args.preset);
    if (!seed_from_flag) merge_json(cfg, "train.seed", args.train.seed);
    std::string reduction = to_string(args.train.reduction);
    merge_option(cmd, "--loss-reduction", cfg, "train.loss_reduction", reduction);
    args.train.reduction = loss_reduction_from_string(reduction);

    require_readable(args.vocab, "vocabulary");
    require_readable(args.dataset, "dataset");
    if (args.output_dir.empty()) throw ConfigError("no output directory given");
    std::filesystem::create_directories(args.output_dir);

    const Vocabulary vocab = load_vocab_file(args.vocab);
    const std::vector<LabeledExample> dataset =
        load_dataset(args.dataset, dataset_format_from_string(args.dataset_format));
    if (dataset.empty()) throw DataError("no records in " + args.dataset);

    LabelVocabulary label_vocab;
    if (!args.labels.empty()) {
        require_readable(args.labels, "label vocabulary");
        label_vocab = load_label_vocab_file(args.labels);
    } else {
        label_vocab = build_label_vocab(dataset);
    }

    bool cfg_has_dims = false;
    if (cfg.contains("model") && cfg.at("model").is_object()) {
        for (const auto& item : cfg.at("model").items()) {
            if (item.key() != "preset" && item.key() != "dropout") cfg_has_dims = true;
        }
    }
    const bool has_dim_settings =
        cmd->count("--n-layers") || cmd->count("--hidden") || cmd->count("--n-heads") ||
        cmd->count("--ffn-dim") || cmd->count("--max-positions") || cfg_has_dims;

    ModelConfig model;
    std::optional<ParameterStore<float>> initial;
    if (!args.init_checkpoint.empty()) {
        if (has_dim_settings) {
            throw ConfigError("model dimensions come from --init-checkpoint; "
                              "drop the explicit dimension settings");
        }
        require_readable(args.init_checkpoint, "initial checkpoint");
        auto [loaded, loaded_cfg] = load_checkpoint(args.init_checkpoint);
        model = loaded_cfg;
        if (cmd->count("--dropout") > 0) {
            model.dropout = args.model.dropout;
        } else {
            merge_json(cfg, "model.dropout", model.dropout);
        }
        if (model.vocab_size != vocab.size()) {
            throw ShapeError("checkpoint vocab_size " + std::to_string(model.vocab_size) +
                             " does not match the vocabulary file (" +
                             std::to_string(vocab.size()) + " tokens)");
        }
        if (static_cast<std::size_t>(model.n_labels) != label_vocab.size()) {
            if (!args.reinit_classifier) {
                throw ShapeError("checkpoint has " + std::to_string(model.n_labels) +
                                 " labels but the label vocabulary has " +
                                 std::to_string(label_vocab.size()) +
                                 " (use --reinit-classifier to replace the head)");
            }
            // Keep the encoder weights, draw a fresh classification head.
            ModelConfig target = model;
            target.n_labels = static_cast<int>(label_vocab.size());
            ParameterStore<float> fresh = init_params<float>(target, args.train.seed);
            std::vector<Tensor<float>*> dst;
            for_each_tensor(fresh, [&](const std::string& name, Tensor<float>& t) {
                if (name.rfind("classifier.", 0) != 0) dst.push_back(&t);
            });
            std::size_t i = 0;
            for_each_tensor(loaded, [&](const std::string& name, Tensor<float>& t) {
                if (name.rfind("classifier.", 0) != 0) *dst.at(i++) = std::move(t);
            });
            model = target;
            initial = std::move(fresh);
        } else {
            initial = std::move(loaded);
        }
        initial->config = model;
    } else {
        model = preset_config(args.preset);
        const json mcfg = cfg.value("model", json::object());
        // The dimension flags are bound to args.model, not to this preset-based
        // config, so an explicit flag has to be copied over by hand.
        auto resolve_dim = [&](const std::string& flag, const std::string& key,
                               const auto& flag_value, auto& out) {
            if (cmd->count(flag) > 0) {
                out = flag_value;
            } else {
                merge_json(mcfg, key, out);
            }
        };
        resolve_dim("--n-layers", "n_layers", args.model.n_layers, model.n_layers);
        resolve_dim("--hidden", "hidden", args.model.hidden, model.hidden);
        resolve_dim("--n-heads", "n_heads", args.model.n_heads, model.n_heads);
        resolve_dim("--ffn-dim", "ffn_dim", args.model.ffn_dim, model.ffn_dim);
        resolve_dim("--max-positions", "max_positions", args.model.max_positions,
                    model.max_positions);
        resolve_dim("--dropout", "dropout", args.model.dropout, model.dropout);
        model.vocab_size = vocab.size();
        model.n_labels = static_cast<int>(label_vocab.size());
    }
    model.validate();

    // The log header carries the full resolved configuration; the timestamp is
    // the only non-reproducible field in the file.
    const std::string log_path = args.output_dir + "/train_log.jsonl";
    std::ofstream log(log_path);
    if (!log) throw ConfigError("cannot open log: " + log_path);
    const json header{{"config",
                       {{"model", model},
                        {"train", args.train},
                        {"max_seq_length", args.max_seq_length},
                        {"dataset", args.dataset},
                        {"vocab", args.vocab},
                        {"labels", args.labels},
                        {"init_checkpoint", args.init_checkpoint},
                        {"reinit_classifier", args.reinit_classifier},
                        {"output_dir", args.output_dir}}},
                      {"timestamp", iso_utc_now()}};
    log << header.dump() << "\n";

    EpochCallback<float> on_epoch = [&](int epoch, const ParameterStore<float>& params) {
        save_checkpoint(params, args.output_dir + "/epoch_" + std::to_string(epoch) + ".ckpt");
    };
    const TrainOutput<float> result =
        train<float>(model, args.train, dataset, vocab, label_vocab, args.max_seq_length,
                     initial ? &*initial : nullptr, on_epoch);

    for (const StepRecord& rec : result.log) {
        log << json{{"step", rec.step}, {"lr", rec.lr}, {"loss", rec.loss}}.dump() << "\n";
    }
    log.flush();
    if (!log) throw ConfigError("write failed: " + log_path);

    std::cout << json{{"steps", result.log.size()},
                      {"final_loss", result.log.back().loss},
                      {"output_dir", args.output_dir}}
                     .dump()
              << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// eval / predict
// ---------------------------------------------------------------------------

// Scores every example with the checkpoint, batched, dropout off.
std::vector<PredictionRecord> score_dataset(const ParameterStore<float>& params,
                                            const std::vector<LabeledExample>& dataset,
                                            const Vocabulary& vocab,
                                            const LabelVocabulary& label_vocab,
                                            int max_seq_length, int batch_size, bool lenient,
                                            std::size_t* dropped_labels_out,
                                            std::size_t* skipped_docs_out) {
    std::vector<PredictionRecord> records;
    std::size_t dropped_total = 0, skipped = 0;

    std::vector<TokenizedExample> batch;
    std::vector<const LabeledExample*> batch_src;
    auto flush = [&]() {
        if (batch.empty()) return;
        const auto [logits, cache] = forward(params, batch, /*train_mode=*/false, /*seed=*/0);
        for (std::size_t i = 0; i < batch.size(); ++i) {
            PredictionRecord rec;
            rec.doc_id = batch_src[i]->id;
            rec.scores.assign(logits.row(i), logits.row(i) + logits.dim(1));
            std::size_t dropped = 0;
            const std::vector<std::uint8_t> hot =
                encode_labels(batch_src[i]->labels, label_vocab, lenient, &dropped);
            dropped_total += dropped;
            for (std::size_t c = 0; c < hot.size(); ++c) {
                if (hot[c]) rec.gold.push_back(static_cast<int>(c));
            }
            if (rec.gold.empty()) {
                ++skipped;  // lenient mode dropped every gold label
            } else {
                records.push_back(std::move(rec));
            }
        }
        batch.clear();
        batch_src.clear();
    };

    for (const LabeledExample& ex : dataset) {
        batch.push_back(encode(ex.text, static_cast<std::size_t>(max_seq_length), vocab));
        batch_src.push_back(&ex);
        if (batch.size() == static_cast<std::size_t>(batch_size)) flush();
    }
    flush();

    if (dropped_labels_out) *dropped_labels_out = dropped_total;
    if (skipped_docs_out) *skipped_docs_out = skipped;
    return records;
}

struct EvalArgs {
    std::string checkpoint;
    std::string predictions;
    std::string dataset;
    std::string dataset_format = "jsonl";
    std::string vocab;
    std::string labels;
    std::vector<int> ks = {1, 5};
    bool lenient = false;
    int batch_size = 32;
    int max_seq_length = 128;
    std::string output;
};

int cmd_eval(CLI::App* cmd, const json& cfg, EvalArgs& args) {
    merge_option(cmd, "--checkpoint", cfg, "checkpoint", args.checkpoint);
    merge_option(cmd, "--predictions", cfg, "predictions", args.predictions);
    merge_option(cmd, "--dataset", cfg, "dataset", args.dataset);
    merge_option(cmd, "--dataset-format", cfg, "dataset_format", args.dataset_format);
    merge_option(cmd, "--vocab", cfg, "vocab", args.vocab);
    merge_option(cmd, "--labels", cfg, "labels", args.labels);
    merge_option(cmd, "--ks", cfg, "ks", args.ks);
    merge_option(cmd, "--batch-size", cfg, "train.batch_size", args.batch_size);
    merge_option(cmd, "--max-seq-length", cfg, "max_seq_length", args.max_seq_length);
    merge_option(cmd, "--output", cfg, "report", args.output);

    if (args.ks.empty()) throw ConfigError("at least one k is required (--ks)");
    if (args.checkpoint.empty() == args.predictions.empty()) {
        throw ConfigError("pass exactly one of --checkpoint or --predictions");
    }

    EvalReport report;
    if (!args.predictions.empty()) {
        require_readable(args.predictions, "predictions");
        std::ifstream in(args.predictions);
        const std::vector<PredictionRecord> records = load_predictions(in);
        report = evaluate(records, args.ks);
    } else {
        require_readable(args.checkpoint, "checkpoint");
        require_readable(args.vocab, "vocabulary");
        require_readable(args.labels, "label vocabulary");
        require_readable(args.dataset, "dataset");

        const auto [params, model] = load_checkpoint(args.checkpoint);
        const Vocabulary vocab = load_vocab_file(args.vocab);
        const LabelVocabulary label_vocab = load_label_vocab_file(args.labels);
        if (static_cast<std::size_t>(model.n_labels) != label_vocab.size()) {
            throw ShapeError("checkpoint has " + std::to_string(model.n_labels) +
                             " labels but the label vocabulary has " +
                             std::to_string(label_vocab.size()));
        }
        if (model.vocab_size != vocab.size()) {
            throw ShapeError("checkpoint vocab_size " + std::to_string(model.vocab_size) +
                             " does not match the vocabulary file (" +
                             std::to_string(vocab.size()) + " tokens)");
        }
        if (args.max_seq_length > model.max_positions) {
            throw ConfigError("max_seq_length exceeds the model's max_positions");
        }

        const std::vector<LabeledExample> dataset =
            load_dataset(args.dataset, dataset_format_from_string(args.dataset_format));
        if (dataset.empty()) throw DataError("no records in " + args.dataset);

        std::size_t dropped = 0, skipped = 0;
        const std::vector<PredictionRecord> records =
            score_dataset(params, dataset, vocab, label_vocab, args.max_seq_length,
                          args.batch_size, args.lenient, &dropped, &skipped);
        if (args.lenient && (dropped > 0 || skipped > 0)) {
            std::cerr << "note: lenient mode dropped " << dropped << " unknown labels and skipped "
                      << skipped << " documents with no known gold labels\n";
        }
        if (records.empty()) throw DataError("no evaluable documents");
        report = evaluate(records, args.ks);
    }

    std::cout << render_report_table(report);
    const json report_json = report;
    if (!args.output.empty()) {
        std::ofstream out(args.output);
        if (!out) throw ConfigError("cannot open output: " + args.output);
        out << report_json.dump(2) << "\n";
    } else {
        std::cout << report_json.dump() << "\n";
    }
    return 0;
}

struct PredictArgs {
    std::string checkpoint;
    std::string vocab;
    std::string labels;
    std::string text;
    std::string file;
    int k = 5;
    int max_seq_length = 128;
};

int cmd_predict(CLI::App* cmd, const json& cfg, PredictArgs& args) {
    merge_option(cmd, "--checkpoint", cfg, "checkpoint", args.checkpoint);
    merge_option(cmd, "--vocab", cfg, "vocab", args.vocab);
    merge_option(cmd, "--labels", cfg, "labels", args.labels);
    merge_option(cmd, "--max-seq-length", cfg, "max_seq_length", args.max_seq_length);

    if (args.text.empty() == args.file.empty()) {
        throw ConfigError("pass exactly one of --text or --file");
    }
    std::string text = args.text;
    if (!args.file.empty()) {
        require_readable(args.file, "input text");
        std::ifstream in(args.file);
        text.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    }

    require_readable(args.checkpoint, "checkpoint");
    require_readable(args.vocab, "vocabulary");
    require_readable(args.labels, "label vocabulary");
    const auto [params, model] = load_checkpoint(args.checkpoint);
    const Vocabulary vocab = load_vocab_file(args.vocab);
    const LabelVocabulary label_vocab = load_label_vocab_file(args.labels);
    if (static_cast<std::size_t>(model.n_labels) != label_vocab.size()) {
        throw ShapeError("checkpoint has " + std::to_string(model.n_labels) +
                         " labels but the label vocabulary has " +
                         std::to_string(label_vocab.size()));
    }
    if (model.vocab_size != vocab.size()) {
        throw ShapeError("checkpoint vocab_size does not match the vocabulary file");
    }
    if (args.max_seq_length > model.max_positions) {
        throw ConfigError("max_seq_length exceeds the model's max_positions");
    }

    const std::vector<TokenizedExample> batch = {
        encode(text, static_cast<std::size_t>(args.max_seq_length), vocab)};
    const auto [logits, cache] = forward(params, batch, /*train_mode=*/false, /*seed=*/0);
    const std::vector<double> scores(logits.row(0), logits.row(0) + logits.dim(1));
    for (int idx : top_k(scores, args.k)) {
        // Probabilities are for display; the ranking is by raw logit.
        std::printf("%s\t%.6f\n", label_vocab.at(static_cast<std::size_t>(idx)).c_str(),
                    stable_sigmoid(scores[static_cast<std::size_t>(idx)]));
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"patclass — patent claim classification pipeline"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path, "JSON config file; flags override its values");
    std::uint64_t seed = 0;
    app.add_option("--seed", seed, "seed overriding the config file's");

    IngestArgs ingest_args;
    CLI::App* ingest = app.add_subcommand("ingest", "filter a patent dump into labeled examples");
    ingest->fallthrough();
    ingest->add_option("--input", ingest_args.input)->required();
    ingest->add_option("--format", ingest_args.format)->check(CLI::IsMember({"jsonl", "tsv"}));
    ingest->add_option("--window-start", ingest_args.window_start)->required();
    ingest->add_option("--window-end", ingest_args.window_end)->required();
    ingest->add_option("--type", ingest_args.type);
    ingest->add_option("--label-mode", ingest_args.label_mode)
        ->check(CLI::IsMember({"cpc", "ipc"}));
    ingest->add_option("--output", ingest_args.output)->required();
    ingest->add_option("--summary", ingest_args.summary_path);

    VocabArgs vocab_args;
    CLI::App* vocab = app.add_subcommand("vocab", "build a label vocabulary");
    vocab->fallthrough();
    vocab->add_option("--input", vocab_args.input)->required();
    vocab->add_option("--format", vocab_args.format)->check(CLI::IsMember({"jsonl", "tsv"}));
    vocab->add_option("--label-mode", vocab_args.label_mode)
        ->check(CLI::IsMember({"cpc", "ipc"}));
    vocab->add_option("--output", vocab_args.output)->required();

    TrainArgs train_args;
    CLI::App* train = app.add_subcommand("train", "fine-tune on labeled examples");
    train->fallthrough();
    train->add_option("--dataset", train_args.dataset);
    train->add_option("--dataset-format", train_args.dataset_format)
        ->check(CLI::IsMember({"jsonl", "tsv"}));
    train->add_option("--vocab", train_args.vocab);
    train->add_option("--labels", train_args.labels);
    train->add_option("--output-dir", train_args.output_dir);
    train->add_option("--init-checkpoint", train_args.init_checkpoint);
    train->add_flag("--reinit-classifier", train_args.reinit_classifier);
    train->add_option("--max-seq-length", train_args.max_seq_length);
    train->add_option("--preset", train_args.preset)->check(CLI::IsMember({"base", "tiny"}));
    train->add_option("--n-layers", train_args.model.n_layers);
    train->add_option("--hidden", train_args.model.hidden);
    train->add_option("--n-heads", train_args.model.n_heads);
    train->add_option("--ffn-dim", train_args.model.ffn_dim);
    train->add_option("--max-positions", train_args.model.max_positions);
    train->add_option("--dropout", train_args.model.dropout);
    train->add_option("--batch-size", train_args.train.batch_size);
    train->add_option("--base-lr", train_args.train.base_lr);
    train->add_option("--epochs", train_args.train.epochs);
    train->add_option("--warmup-fraction", train_args.train.warmup_fraction);
    train->add_option("--grad-clip-norm", train_args.train.grad_clip_norm);
    train->add_option("--loss-reduction", train_args.train.reduction,
                      "mean_elements or sum_labels_mean_batch")
        ->transform(CLI::CheckedTransformer(
            std::map<std::string, LossReduction>{
                {"mean_elements", LossReduction::mean_elements},
                {"sum_labels_mean_batch", LossReduction::sum_labels_mean_batch}},
            CLI::ignore_case));

    EvalArgs eval_args;
    CLI::App* eval = app.add_subcommand("eval", "top-k metrics for a checkpoint or predictions");
    eval->fallthrough();
    eval->add_option("--checkpoint", eval_args.checkpoint);
    eval->add_option("--predictions", eval_args.predictions);
    eval->add_option("--dataset", eval_args.dataset);
    eval->add_option("--dataset-format", eval_args.dataset_format)
        ->check(CLI::IsMember({"jsonl", "tsv"}));
    eval->add_option("--vocab", eval_args.vocab);
    eval->add_option("--labels", eval_args.labels);
    eval->add_option("--ks", eval_args.ks)->delimiter(',');
    eval->add_flag("--lenient", eval_args.lenient, "drop unknown gold labels instead of failing");
    eval->add_option("--batch-size", eval_args.batch_size);
    eval->add_option("--max-seq-length", eval_args.max_seq_length);
    eval->add_option("--output", eval_args.output, "write the JSON report here");

    PredictArgs predict_args;
    CLI::App* predict = app.add_subcommand("predict", "ranked labels for one text");
    predict->fallthrough();
    predict->add_option("--checkpoint", predict_args.checkpoint);
    predict->add_option("--vocab", predict_args.vocab);
    predict->add_option("--labels", predict_args.labels);
    predict->add_option("--text", predict_args.text);
    predict->add_option("--file", predict_args.file);
    predict->add_option("--k", predict_args.k);
    predict->add_option("--max-seq-length", predict_args.max_seq_length);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;  // bad flags are a config problem
    }

    try {
        const json cfg = load_config_file(config_path);
        const bool seed_from_flag = app.count("--seed") > 0;
        if (seed_from_flag) train_args.train.seed = seed;
        if (ingest->parsed()) return cmd_ingest(ingest_args);
        if (vocab->parsed()) return cmd_vocab(vocab_args);
        if (train->parsed()) return cmd_train(train, cfg, train_args, seed_from_flag);
        if (eval->parsed()) return cmd_eval(eval, cfg, eval_args);
        if (predict->parsed()) return cmd_predict(predict, cfg, predict_args);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e);
    }
    return 0;
}
