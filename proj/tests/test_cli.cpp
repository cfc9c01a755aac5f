#include <doctest.h>

#include <cstdlib>
#include <string>
#include <vector>

#include "clinsim/feature_pipeline.hpp"
#include "synthetic_corpus.hpp"
#include "test_util.hpp"

namespace {

/// Runs the CLI binary, capturing combined stdout/stderr into `log`.
int run_cli(const std::string& args, const std::string& log) {
  const std::string cmd = std::string(CLINSIM_CLI_PATH) + " " + args + " >" + log + " 2>&1";
  const int rc = std::system(cmd.c_str());
  return WEXITSTATUS(rc);
}

}  // namespace

TEST_CASE("cli featurize is reproducible and exits 0") {
  testutil::TempDir dir("cli_featurize");
  const auto files = synthetic::write_corpus(dir.path.string(), 20, 5, 101);
  const std::string log = dir.file("log.txt");

  const std::string args = "featurize --pairs " + files.train_pairs + " --embeddings " +
                           files.embeddings + " --out " + dir.file("features.tsv");
  CHECK(run_cli(args, log) == 0);
  const std::string first = testutil::read_file(dir.file("features.tsv"));
  CHECK(first.rfind("id\tf0", 0) == 0);

  const clinsim::FeatureMatrix m = clinsim::read_features(dir.file("features.tsv"));
  CHECK(m.rows.size() == 20);
  REQUIRE(m.gold.has_value());

  // Re-run: byte-identical output, manifest written alongside.
  CHECK(run_cli(args, log) == 0);
  CHECK(testutil::read_file(dir.file("features.tsv")) == first);
  CHECK(!testutil::read_file(dir.file("features.tsv") + ".manifest.json").empty());
}

TEST_CASE("cli featurize reports missing inputs on exit code 2") {
  testutil::TempDir dir("cli_missing");
  const std::string log = dir.file("log.txt");
  const int rc = run_cli("featurize --pairs " + dir.file("nope.tsv") + " --embeddings " +
                             dir.file("nope.txt") + " --out " + dir.file("out.tsv"),
                         log);
  CHECK(rc == 2);
  CHECK(testutil::read_file(log).find("nope") != std::string::npos);
}

TEST_CASE("cli rejects unknown flags with exit code 2") {
  testutil::TempDir dir("cli_badflag");
  CHECK(run_cli("featurize --definitely-not-a-flag", dir.file("log.txt")) == 2);
}

TEST_CASE("cli end-to-end: featurize, train, predict, evaluate, stack, ablate") {
  testutil::TempDir dir("cli_pipeline");
  const std::string d = dir.path.string();
  const auto files = synthetic::write_corpus(d, 60, 20, 202);
  const std::string log = dir.file("log.txt");

  // featurize train and test, idf from the training partition only.
  CHECK(run_cli("featurize --pairs " + files.train_pairs + " --embeddings " + files.embeddings +
                    " --idf-from-train-partition --split-seed 42 --train-count 45 --val-count 15" +
                    " --out " + d + "/ftrain.tsv",
                log) == 0);
  CHECK(run_cli("featurize --pairs " + files.test_pairs + " --embeddings " + files.embeddings +
                    " --idf-from " + files.train_pairs +
                    " --idf-from-train-partition --split-seed 42 --train-count 45 --val-count 15" +
                    " --out " + d + "/ftest.tsv",
                log) == 0);

  // train-rf with validation outputs for the stacker.
  CHECK(run_cli("train-rf --features " + d + "/ftrain.tsv --split-seed 42 --train-count 45" +
                    " --val-count 15 --trees 30 --seed 5 --out-model " + d + "/rf.json" +
                    " --report " + d + "/rf_report.json --val-preds " + d + "/rf_val.txt" +
                    " --val-gold " + d + "/val_gold.txt",
                log) == 0);
  CHECK(!testutil::read_file(d + "/rf_report.json").empty());

  // Deterministic re-train produces the identical model file.
  const std::string rf_bytes = testutil::read_file(d + "/rf.json");
  CHECK(run_cli("train-rf --features " + d + "/ftrain.tsv --split-seed 42 --train-count 45" +
                    " --val-count 15 --trees 30 --seed 5 --out-model " + d + "/rf2.json",
                log) == 0);
  CHECK(testutil::read_file(d + "/rf2.json") == rf_bytes);

  // Two encoder runs with different seeds.
  const std::string enc_common =
      std::string("train-encoder --pairs ") + files.train_pairs + " --embeddings " +
      files.embeddings + " --split-seed 42 --train-count 45 --val-count 15" +
      " --hidden 16 8 --lr 0.005 --l2 0 --dropout 0.2 --patience 40 --max-epochs 150 --batch 8";
  CHECK(run_cli(enc_common + " --seed 1 --out-model " + d + "/enc1.json --report " + d +
                    "/enc1_report.json --val-preds " + d + "/enc1_val.txt",
                log) == 0);
  CHECK(run_cli(enc_common + " --seed 2 --out-model " + d + "/enc2.json --val-preds " + d +
                    "/enc2_val.txt",
                log) == 0);
  CHECK(testutil::read_file(d + "/enc1.json") != testutil::read_file(d + "/enc2.json"));

  // Stack on validation predictions.
  CHECK(run_cli("stack --base-preds " + d + "/rf_val.txt " + d + "/enc1_val.txt " + d +
                    "/enc2_val.txt --gold " + d + "/val_gold.txt --out-model " + d + "/stack.json",
                log) == 0);

  // Predict every model on the test set.
  CHECK(run_cli("predict --model " + d + "/rf.json --features " + d + "/ftest.tsv --out " + d +
                    "/rf_test.txt",
                log) == 0);
  CHECK(run_cli("predict --model " + d + "/enc1.json --pairs " + files.test_pairs +
                    " --embeddings " + files.embeddings + " --out " + d + "/enc1_test.txt",
                log) == 0);
  CHECK(run_cli("predict --model " + d + "/enc2.json --pairs " + files.test_pairs +
                    " --embeddings " + files.embeddings + " --out " + d + "/enc2_test.txt",
                log) == 0);
  CHECK(run_cli("predict --model " + d + "/stack.json --base-preds " + d + "/rf_test.txt " + d +
                    "/enc1_test.txt " + d + "/enc2_test.txt --out " + d + "/stack_test.txt",
                log) == 0);

  // Prediction files align line-for-line with their inputs.
  const clinsim::FeatureMatrix ftest = clinsim::read_features(d + "/ftest.tsv");
  std::ifstream preds(d + "/rf_test.txt");
  std::size_t lines = 0;
  std::string line;
  while (std::getline(preds, line)) {
    if (!line.empty()) ++lines;
  }
  CHECK(lines == ftest.rows.size());

  // evaluate: identity prediction scores pearson 1.
  CHECK(run_cli("evaluate --pred " + d + "/val_gold.txt --gold " + d + "/val_gold.txt" +
                    " --out-report " + d + "/identity_report.json",
                log) == 0);
  const std::string identity = testutil::read_file(log);
  CHECK(identity.find("pearson 1.000000") != std::string::npos);

  // evaluate the stack on test gold, with per-feature correlations.
  CHECK(run_cli("evaluate --pred " + d + "/stack_test.txt --gold " + files.test_pairs +
                    " --features " + d + "/ftest.tsv --out-report " + d + "/report.json",
                log) == 0);
  const std::string report = testutil::read_file(d + "/report.json");
  CHECK(report.find("\"pearson\"") != std::string::npos);
  CHECK(report.find("\"regions\"") != std::string::npos);
  CHECK(report.find("\"per_feature\"") != std::string::npos);

  // ablate writes the 6-row study.
  CHECK(run_cli("ablate --features " + d + "/ftrain.tsv --test-features " + d + "/ftest.tsv" +
                    " --split-seed 42 --train-count 45 --val-count 15 --trees 10 --seed 5" +
                    " --out-report " + d + "/ablation.json",
                log) == 0);
  const std::string ablation_text = testutil::read_file(d + "/ablation.json");
  CHECK(ablation_text.find("\"sequence\"") != std::string::npos);

  // export-dot emits a digraph for a stored tree.
  CHECK(run_cli("export-dot --model " + d + "/rf.json --tree-index 0 --out " + d + "/tree.dot",
                log) == 0);
  CHECK(testutil::read_file(d + "/tree.dot").find("digraph") != std::string::npos);
}

TEST_CASE("cli evaluate prints the largest absolute errors on request") {
  testutil::TempDir dir("cli_toperr");
  const std::string pred = dir.file("p.txt");
  testutil::write_file(pred, "1.0\n2.0\n5.0\n4.0\n");
  const std::string gold = dir.file("g.txt");
  testutil::write_file(gold, "1.0\n2.5\n1.0\n4.0\n");
  const std::string log = dir.file("log.txt");
  CHECK(run_cli("evaluate --pred " + pred + " --gold " + gold + " --top-errors 2", log) == 0);
  const std::string out = testutil::read_file(log);
  CHECK(out.find("top 2 absolute errors") != std::string::npos);
  CHECK(out.find("pair 2") != std::string::npos);  // |5.0 - 1.0| is the worst
}

TEST_CASE("cli train-encoder exits 3 when pairs lack gold scores") {
  testutil::TempDir dir("cli_encgold");
  const auto files = synthetic::write_corpus(dir.path.string(), 8, 2, 606);
  // Strip the gold column.
  const std::string unlabeled = dir.file("unlabeled.tsv");
  {
    std::ifstream in(files.train_pairs);
    std::ofstream out(unlabeled);
    std::string line;
    while (std::getline(in, line)) {
      const std::size_t cut = line.rfind('\t');
      out << line.substr(0, cut) << "\n";
    }
  }
  const int rc = run_cli("train-encoder --pairs " + unlabeled + " --embeddings " +
                             files.embeddings +
                             " --split-seed 1 --train-count 6 --val-count 2 --hidden 4" +
                             " --max-epochs 5 --out-model " + dir.file("enc.json"),
                         dir.file("log.txt"));
  CHECK(rc == 3);
}

TEST_CASE("cli stack exits 3 on collinear base predictions") {
  testutil::TempDir dir("cli_rank");
  const std::string preds = dir.file("p.txt");
  testutil::write_file(preds, "1.0\n2.0\n3.0\n4.0\n");
  const std::string gold = dir.file("g.txt");
  testutil::write_file(gold, "1.0\n2.0\n3.0\n4.0\n");
  const int rc = run_cli("stack --base-preds " + preds + " " + preds + " --gold " + gold +
                             " --out-model " + dir.file("s.json"),
                         dir.file("log.txt"));
  CHECK(rc == 3);
}

TEST_CASE("cli honors the stopword environment override, flags win") {
  testutil::TempDir dir("cli_env");
  const std::string d = dir.path.string();
  const auto files = synthetic::write_corpus(d, 6, 2, 404);
  const std::string log = dir.file("log.txt");

  // A stopword list swallowing the entire synthetic vocabulary.
  std::string all_words;
  for (std::size_t i = 0; i < 80; ++i) all_words += synthetic::word(i) + "\n";
  const std::string swallow = dir.file("swallow.txt");
  testutil::write_file(swallow, all_words);
  const std::string none = dir.file("none.txt");
  testutil::write_file(none, "# empty list\n");

  const std::string base_args = "featurize --pairs " + files.train_pairs + " --embeddings " +
                                files.embeddings + " --out ";
  CHECK(run_cli(base_args + d + "/plain.tsv", log) == 0);
  const int rc_env = std::system(("CLINSIM_STOPWORDS=" + swallow + " " + CLINSIM_CLI_PATH + " " +
                                  base_args + d + "/env.tsv >" + log + " 2>&1")
                                     .c_str());
  CHECK(WEXITSTATUS(rc_env) == 0);
  const int rc_flag = std::system(("CLINSIM_STOPWORDS=" + swallow + " " + CLINSIM_CLI_PATH + " " +
                                   base_args + d + "/flag.tsv --stopwords " + none + " >" + log +
                                   " 2>&1")
                                      .c_str());
  CHECK(WEXITSTATUS(rc_flag) == 0);

  // With every token a stopword, token sets are empty and jaccard is 1.0 on
  // every pair; without, the corpus has varied overlap.
  const clinsim::FeatureMatrix env_m = clinsim::read_features(d + "/env.tsv");
  for (const auto& row : env_m.rows) CHECK(row[clinsim::kJaccard] == 1.0);
  const clinsim::FeatureMatrix flag_m = clinsim::read_features(d + "/flag.tsv");
  const clinsim::FeatureMatrix plain_m = clinsim::read_features(d + "/plain.tsv");
  CHECK(flag_m.rows == plain_m.rows);
}

TEST_CASE("cli featurize --no-gold enforces the two-column format") {
  testutil::TempDir dir("cli_nogold");
  const auto files = synthetic::write_corpus(dir.path.string(), 4, 2, 505);
  const std::string log = dir.file("log.txt");
  // The corpus has three columns; forcing --no-gold must fail the parse.
  const int rc = run_cli("featurize --pairs " + files.train_pairs + " --embeddings " +
                             files.embeddings + " --no-gold --out " + dir.file("f.tsv"),
                         log);
  CHECK(rc == 2);
}

TEST_CASE("cli train-rf exits 3 on a split size mismatch") {
  testutil::TempDir dir("cli_split");
  const auto files = synthetic::write_corpus(dir.path.string(), 10, 2, 303);
  const std::string log = dir.file("log.txt");
  CHECK(run_cli("featurize --pairs " + files.train_pairs + " --embeddings " + files.embeddings +
                    " --out " + dir.file("f.tsv"),
                log) == 0);
  const int rc = run_cli("train-rf --features " + dir.file("f.tsv") +
                             " --out-model " + dir.file("rf.json"),
                         log);
  CHECK(rc == 3);  // 10 rows cannot split into the default 600/150
}
