#include <array>
#include <cstdio>
#include <sys/wait.h>

#include <catch2/catch_amalgamated.hpp>
#include <json.hpp>

#include "helpers.hpp"
#include "skillmatch/checkpoint.hpp"
#include "skillmatch/corpus.hpp"
#include "skillmatch/embeddings.hpp"
#include "skillmatch/index.hpp"

using namespace skillmatch;
using nlohmann::json;

namespace {

struct Run {
  int code = -1;
  std::string out;  // stdout
  std::string err;  // stderr
};

Run run(const std::string& args) {
  const auto err_path = std::filesystem::temp_directory_path() / "skillmatch_cli_stderr.txt";
  const std::string cmd = std::string(SKILLMATCH_CLI) + " " + args + " 2>'" + err_path.string() + "'";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), buf.size(), pipe)) r.out += buf.data();
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.err = testing::slurp(err_path);
  return r;
}

std::string q(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

}  // namespace

TEST_CASE("command-line pipeline", "[cli]") {
  testing::TempDir dir("cli");
  const auto corpus = dir / "corpus.jsonl";
  const auto model = dir / "model.smck";
  const auto profiles = dir / "profiles.jsonl";
  const auto index = dir / "profiles.smix";

  auto r = run("synth --seed 3 --freelancers 300 --projects 30 --out " + q(corpus));
  INFO(r.err);
  REQUIRE(r.code == 0);
  const auto c = load_corpus(corpus);
  REQUIRE(c.profiles().size() == 300);
  REQUIRE(c.proposals().size() == 30);

  r = run("train --corpus " + q(corpus) + " --out " + q(model) + " --history " + q(dir / "h.csv") +
          " --loss infonce --epochs 1 --max-steps 5 --d-model 16 --backbone-layers 1 --head-layers 1");
  INFO(r.err);
  REQUIRE(r.code == 0);
  REQUIRE(load_checkpoint(model).backbone.d_model == 16);
  REQUIRE(testing::slurp(dir / "h.csv").rfind("step,", 0) == 0);

  r = run("encode --corpus " + q(corpus) + " --model " + q(model) + " --side profiles --out " + q(profiles));
  INFO(r.err);
  REQUIRE(r.code == 0);
  const auto emb = read_embeddings(profiles);
  REQUIRE(emb.embeddings.size() == 300);
  REQUIRE(emb.dim == 16);

  r = run("index-build --embeddings " + q(profiles) + " --out " + q(index));
  INFO(r.err);
  REQUIRE(r.code == 0);
  REQUIRE(VectorIndex::load(index)->size() == 300);

  const auto& p = c.proposals()[0];
  json doc{{"id", p.id}, {"kind", "proposal"}, {"category", p.category}, {"sections", json::object()}};
  for (const auto& s : p.sections) doc["sections"][s.label] = s.text;
  std::ofstream(dir / "q.json") << doc.dump();
  r = run("retrieve --model " + q(model) + " --index " + q(index) + " --proposal " + q(dir / "q.json") +
          " --k 5 --filter category=" + p.category);
  INFO(r.err);
  REQUIRE(r.code == 0);
  const auto hits = json::parse(r.out).at("results");
  REQUIRE(hits.size() == 5);
  for (const auto& h : hits) REQUIRE(c.profile_at(h.at("doc_id").get<std::string>()).category == p.category);

  r = run("eval --corpus " + q(corpus) + " --model " + q(model) + " --out " + q(dir / "eval.json") + " --k 5,20");
  INFO(r.err);
  REQUIRE(r.code == 0);
  REQUIRE(r.out.find("recall_all") != std::string::npos);
  const auto report = json::parse(testing::slurp(dir / "eval.json"));
  REQUIRE(report.at("overall").contains("category_overlap@20"));

  r = run("export-embeddings --embeddings " + q(profiles) + " --out " + q(dir / "p.csv"));
  INFO(r.err);
  REQUIRE(r.code == 0);
  REQUIRE(testing::slurp(dir / "p.csv").rfind("id,category,language,v0,", 0) == 0);
}

TEST_CASE("command-line errors", "[cli]") {
  testing::TempDir dir("cli_err");
  REQUIRE(run("--help").code == 0);
  REQUIRE(run("train --help").code == 0);
  REQUIRE(run("no-such-command").code == 2);
  REQUIRE(run("synth").code == 2);  // --out is required
  REQUIRE(run("train --corpus " + q(dir / "missing.jsonl") + " --out " + q(dir / "m.smck")).code == 2);  // missing input files are usage errors
  std::ofstream(dir / "junk.jsonl") << "not json\n";
  REQUIRE(run("index-build --embeddings " + q(dir / "junk.jsonl") + " --out " + q(dir / "i.smix")).code == 1);
  REQUIRE(run("synth --out " + q(dir / "c.jsonl") + " --projects 0").code != 0);

  SECTION("print-config shows every default") {
    const auto r = run("synth --out " + q(dir / "c.jsonl") + " --print-config");
    REQUIRE(r.code == 0);
    const auto j = json::parse(r.out);
    REQUIRE(j.at("n_categories") == 8);
    REQUIRE(j.at("n_freelancers") == 2000);
    REQUIRE(j.at("n_projects") == 200);
  }
}
