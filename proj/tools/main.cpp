#include <iostream>

#include <CLI11.hpp>

#include "app.hpp"

namespace app = boxtax::app;

int main(int argc, char** argv) {
  CLI::App cli{"Multi-level topic taxonomies from box embeddings"};
  cli.require_subcommand(1);

  app::CommonOptions common;
  auto add_common = [&common](CLI::App* sub) {
    sub->add_option("--config", common.config, "INI config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", common.seed, "random seed");
    sub->add_option("--out-dir", common.out_dir, "output directory");
    sub->add_option("--set", common.overrides, "config override, section.key=value")->take_all();
  };

  std::filesystem::path input;
  auto* pre = cli.add_subcommand("preprocess", "tokenize a one-document-per-line file into corpus artifacts");
  pre->add_option("input", input, "raw text, one document per line")->required();
  add_common(pre);

  app::TrainOptions train;
  auto* tr = cli.add_subcommand("train", "train the model and build the taxonomy");
  tr->add_option("--corpus", train.corpus_dir, "preprocessed corpus directory")->required();
  tr->add_option("--epochs", train.epochs, "number of epochs");
  tr->add_option("--k", train.levels, "taxonomy depth");
  tr->add_option("--leaf-topics", train.leaf_topics, "number of leaf topics");
  tr->add_flag("--resume", train.resume, "continue from <out-dir>/checkpoint.json");
  tr->add_flag("--quiet", train.quiet, "no per-epoch output");
  add_common(tr);

  std::filesystem::path checkpoint, corpus_dir;
  auto* ev = cli.add_subcommand("eval", "score a checkpoint with C, D, C*D and HC");
  ev->add_option("--checkpoint", checkpoint)->required();
  ev->add_option("--corpus", corpus_dir)->required();
  add_common(ev);

  std::string format = "json";
  int top_n = 15;
  auto* ex = cli.add_subcommand("export", "write the taxonomy as JSON or indented text");
  ex->add_option("--checkpoint", checkpoint)->required();
  ex->add_option("--format", format, "json or text");
  ex->add_option("--top-n", top_n, "keywords per topic");
  add_common(ex);

  int length = 50, count = 1;
  auto* sa = cli.add_subcommand("sample", "draw documents from the generative model");
  sa->add_option("--checkpoint", checkpoint)->required();
  sa->add_option("--length", length, "words per document");
  sa->add_option("--count", count, "number of documents");
  add_common(sa);

  CLI11_PARSE(cli, argc, argv);

  try {
    if (pre->parsed()) return app::cmd_preprocess(input, common, std::cout);
    if (tr->parsed()) return app::cmd_train(train, common, std::cout);
    if (ev->parsed()) return app::cmd_eval(checkpoint, corpus_dir, common, std::cout);
    if (ex->parsed()) return app::cmd_export(checkpoint, format, top_n, common, std::cout);
    if (sa->parsed()) return app::cmd_sample(checkpoint, length, count, common, std::cout);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
