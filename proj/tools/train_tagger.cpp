// Trains perceptron tagger weights from a word<TAB>tag corpus.

#include "qabench/error.hpp"
#include "qabench/tagger.hpp"

#include <iostream>

#include <CLI11.hpp>
#include <fmt/format.h>

int main(int argc, char** argv)
{
    CLI::App app{"Train part-of-speech tagger weights", "qabench-train-tagger"};
    std::string corpus, out, eval;
    qabench::PerceptronTrainer::Options options;
    app.add_option("--corpus", corpus, "Training file, word<TAB>tag lines, blank line between sentences")->required();
    app.add_option("--out", out, "Weights file to write")->required();
    app.add_option("--eval", eval, "Held-out file in the same format");
    app.add_option("--iterations", options.iterations, "Training passes")->check(CLI::PositiveNumber);
    app.add_option("--seed", options.seed, "Shuffle seed");
    CLI11_PARSE(app, argc, argv);

    try {
        auto sentences = qabench::read_tagged_corpus(corpus);
        const auto n = sentences.size();
        const auto model = qabench::PerceptronTrainer::train(std::move(sentences), options);
        model.save(out);
        std::cout << fmt::format("trained on {} sentences, {} features, {} classes -> {}\n", n,
                                 model.feature_count(), model.classes().size(), out);
        if (!eval.empty()) {
            const auto gold = qabench::read_tagged_corpus(eval);
            std::cout << fmt::format("held-out accuracy {:.4f}\n", qabench::tagging_accuracy(model, gold));
        }
    }
    catch (const qabench::IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    catch (const qabench::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
