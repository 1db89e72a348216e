#include <doctest.h>

#include <map>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "helpers.hpp"
#include "medaudit/error.hpp"
#include "medaudit/metrics.hpp"
#include "medaudit/rng.hpp"
#include "medaudit/strings.hpp"

using namespace medaudit;

namespace {

// independent recount used as the oracle: map-of-vectors n-grams, full-table lcs
Prf oracle_prf(double p, double r) {
  Prf out;
  out.precision = p;
  out.recall = r;
  out.f1 = (p + r > 0) ? 2 * p * r / (p + r) : 0.0;
  return out;
}

Prf oracle_rouge_n(const std::vector<std::string>& cand, const std::vector<std::string>& ref,
                   int n) {
  auto grams = [n](const std::vector<std::string>& tokens) {
    std::map<std::vector<std::string>, int> counts;
    if (tokens.size() < static_cast<size_t>(n)) return counts;
    for (size_t i = 0; i + static_cast<size_t>(n) <= tokens.size(); ++i) {
      counts[std::vector<std::string>(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                      tokens.begin() + static_cast<std::ptrdiff_t>(i) +
                                          n)]++;
    }
    return counts;
  };
  auto c = grams(cand);
  auto r = grams(ref);
  size_t ct = 0, rt = 0, clipped = 0;
  for (const auto& [g, k] : c) ct += static_cast<size_t>(k);
  for (const auto& [g, k] : r) rt += static_cast<size_t>(k);
  if (ct == 0 || rt == 0) return {};
  for (const auto& [g, k] : c) {
    auto it = r.find(g);
    if (it != r.end()) clipped += static_cast<size_t>(std::min(k, it->second));
  }
  return oracle_prf(static_cast<double>(clipped) / static_cast<double>(ct),
                    static_cast<double>(clipped) / static_cast<double>(rt));
}

Prf oracle_rouge_l(const std::vector<std::string>& cand, const std::vector<std::string>& ref) {
  const size_t nc = cand.size(), nr = ref.size();
  if (nc == 0 || nr == 0) return {};
  std::vector<std::vector<size_t>> dp(nc + 1, std::vector<size_t>(nr + 1, 0));
  for (size_t i = 1; i <= nc; ++i) {
    for (size_t j = 1; j <= nr; ++j) {
      dp[i][j] = (cand[i - 1] == ref[j - 1]) ? dp[i - 1][j - 1] + 1
                                             : std::max(dp[i - 1][j], dp[i][j - 1]);
    }
  }
  double lcs = static_cast<double>(dp[nc][nr]);
  return oracle_prf(lcs / static_cast<double>(nc), lcs / static_cast<double>(nr));
}

void check_same(const Prf& got, const Prf& want) {
  CHECK(got.precision == want.precision);
  CHECK(got.recall == want.recall);
  CHECK(got.f1 == want.f1);
}

BiasScoreVector bias_row(const std::string& condition,
                         const std::vector<std::optional<double>>& values) {
  BiasScoreVector row;
  row.condition = condition;
  row.judge_model = "j";
  for (size_t i = 0; i < values.size() && i < 5; ++i) row.scores[i] = values[i];
  return row;
}

class EmbeddingServer {
 public:
  EmbeddingServer() {
    server_.Post("/v1/embeddings", [this](const httplib::Request& req, httplib::Response& res) {
      last_body = req.body;
      nlohmann::json doc = nlohmann::json::parse(req.body);
      nlohmann::json data = nlohmann::json::array();
      for (const auto& token : doc["input"]) {
        data.push_back({{"embedding", vector_for(token.get<std::string>())}});
      }
      res.set_content(nlohmann::json{{"data", data}}.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~EmbeddingServer() {
    server_.stop();
    thread_.join();
  }

  EmbeddingEndpoint endpoint() const {
    EmbeddingEndpoint ep;
    ep.endpoint = "http://127.0.0.1:" + std::to_string(port_) + "/v1/embeddings";
    ep.model = "emb-model";
    return ep;
  }

  std::string last_body;

 private:
  static std::vector<double> vector_for(const std::string& token) {
    if (token == "aa") return {1.0, 0.0};
    if (token == "bb") return {0.0, 1.0};
    if (token == "cc") return {1.0, 0.0};
    return {0.5, 0.5};
  }

  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
};

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("the tokenizer lowercases and splits on any non-alphanumeric byte") {
  CHECK(tokenize("Hello, World! 42") == std::vector<std::string>{"hello", "world", "42"});
  CHECK(tokenize("don't-stop") == std::vector<std::string>{"don", "t", "stop"});
  CHECK(tokenize("") == std::vector<std::string>{});
  CHECK(tokenize("...!!!") == std::vector<std::string>{});
  // multibyte characters are separator bytes, not letters
  CHECK(tokenize("caf\xc3\xa9 au lait") == std::vector<std::string>{"caf", "au", "lait"});
}

TEST_CASE("identical texts score one across all rouge variants") {
  OverlapScore s = overlap("The patient has a fever", "the patient has a fever");
  CHECK(s.rouge1.f1 == doctest::Approx(1.0));
  CHECK(s.rouge2.f1 == doctest::Approx(1.0));
  CHECK(s.rougeL.f1 == doctest::Approx(1.0));
  CHECK_FALSE(s.flagged_empty);
}

TEST_CASE("one substitution in three tokens scores two thirds") {
  OverlapScore s = overlap("a b c", "a x c");
  CHECK(s.rouge1.precision == doctest::Approx(2.0 / 3.0));
  CHECK(s.rouge1.recall == doctest::Approx(2.0 / 3.0));
  CHECK(s.rouge1.f1 == doctest::Approx(2.0 / 3.0));
  CHECK(s.rouge2.f1 == 0.0);  // no shared bigram
  CHECK(s.rougeL.f1 == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("repeated candidate tokens are clipped by the reference count") {
  Prf p = rouge_n({"a", "a", "a"}, {"a"}, 1);
  CHECK(p.precision == doctest::Approx(1.0 / 3.0));
  CHECK(p.recall == doctest::Approx(1.0));
  CHECK(p.f1 == doctest::Approx(0.5));
}

TEST_CASE("swapping candidate and reference swaps precision and recall") {
  Prf forward = rouge_n({"a", "b", "c", "d"}, {"a", "b"}, 1);
  Prf backward = rouge_n({"a", "b"}, {"a", "b", "c", "d"}, 1);
  CHECK(forward.precision == backward.recall);
  CHECK(forward.recall == backward.precision);
  CHECK(forward.f1 == backward.f1);
}

TEST_CASE("either side tokenizing to nothing is flagged, not scored") {
  OverlapScore left = overlap("", "some reference");
  CHECK(left.flagged_empty);
  CHECK(left.rouge1.f1 == 0.0);
  OverlapScore right = overlap("some answer", "  !!! ");
  CHECK(right.flagged_empty);
}

TEST_CASE("rouge agrees exactly with an independent recount") {
  const std::vector<std::string> vocab{"a", "b", "c", "d"};
  for (int iter = 0; iter < 200; ++iter) {
    RandomStream rng(5150 + iter);
    auto sequence = [&] {
      std::vector<std::string> tokens;
      int len = rng.draw_in(0, 8);
      for (int i = 0; i < len; ++i) tokens.push_back(vocab[rng.bounded(vocab.size())]);
      return tokens;
    };
    std::vector<std::string> cand = sequence();
    std::vector<std::string> ref = sequence();
    check_same(rouge_n(cand, ref, 1), oracle_rouge_n(cand, ref, 1));
    check_same(rouge_n(cand, ref, 2), oracle_rouge_n(cand, ref, 2));
    check_same(rouge_l(cand, ref), oracle_rouge_l(cand, ref));
  }
}

TEST_CASE("ngram similarity is rouge-1 and embedding mode needs an endpoint") {
  Prf via_similarity = similarity("a b c", "a x c", SimilarityScorer::ngram);
  Prf direct = overlap("a b c", "a x c").rouge1;
  CHECK(via_similarity.precision == direct.precision);
  CHECK(via_similarity.f1 == direct.f1);
  CHECK_THROWS_AS(similarity("a", "b", SimilarityScorer::embedding), ConfigError);
}

TEST_CASE("embedding similarity greedily matches token vectors") {
  EmbeddingServer server;
  Prf p = embedding_similarity("aa bb", "aa cc", server.endpoint());
  CHECK(p.precision == doctest::Approx(0.5));  // bb finds nothing aligned
  CHECK(p.recall == doctest::Approx(1.0));     // both reference tokens match aa
  CHECK(p.f1 == doctest::Approx(2.0 / 3.0));

  nlohmann::json body = nlohmann::json::parse(server.last_body);
  CHECK(body["model"] == "emb-model");
  CHECK(body["input"] == nlohmann::json::array({"aa", "cc"}));  // last call was the reference

  Prf via_similarity =
      similarity("aa bb", "aa cc", SimilarityScorer::embedding, server.endpoint());
  CHECK(via_similarity.f1 == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("embedding transport and shape failures are gateway errors") {
  EmbeddingEndpoint unreachable;
  unreachable.endpoint = "http://127.0.0.1:9/v1/embeddings";
  unreachable.model = "emb-model";
  CHECK_THROWS_WITH_AS(embedding_similarity("aa", "bb", unreachable),
                       doctest::Contains("unreachable"), GatewayError);

  EmbeddingEndpoint schemeless;
  schemeless.endpoint = "embeddings.example.com/v1";
  CHECK_THROWS_AS(embedding_similarity("aa", "bb", schemeless), ConfigError);

  // empty sides never contact the endpoint
  Prf empty = embedding_similarity("!!!", "bb", schemeless);
  CHECK(empty.f1 == 0.0);

  httplib::Server bad;
  bad.Post("/v1/embeddings", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"data": [{"embedding": [1.0]}]})", "application/json");  // one row short
  });
  int port = bad.bind_to_any_port("127.0.0.1");
  std::thread t([&] { bad.listen_after_bind(); });
  bad.wait_until_ready();
  EmbeddingEndpoint short_data;
  short_data.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1/embeddings";
  short_data.model = "emb-model";
  CHECK_THROWS_WITH_AS(embedding_similarity("aa bb", "cc", short_data),
                       doctest::Contains("malformed"), GatewayError);
  bad.stop();
  t.join();
}

TEST_CASE("aggregation means present dimensions and subtracts the baseline exactly") {
  std::vector<BiasScoreVector> scores{
      bias_row("original", {0.4}),
      bias_row("original", {0.432}),
      bias_row("multihop", {0.747}),
      bias_row("no_multihop", {0.9}),  // other conditions ride along only as baselines
  };
  GroupKey key{"ds", "target", "judge", "multihop"};
  AggregateReport r = aggregate(scores, key, "original");
  REQUIRE(r.means[0].has_value());
  CHECK(*r.means[0] == 0.747);
  CHECK(r.n == 1);
  double baseline_mean = (0.4 + 0.432) / 2;
  REQUIRE(r.deltas[0].has_value());
  CHECK(*r.deltas[0] == 0.747 - baseline_mean);  // exact arithmetic, no rounding
  CHECK(*r.deltas[0] == doctest::Approx(0.331));
  for (size_t d = 1; d < 5; ++d) {
    CHECK_FALSE(r.means[d].has_value());
    CHECK_FALSE(r.deltas[d].has_value());
  }
  CHECK(r.baseline_condition == "original");
}

TEST_CASE("n counts rows in the condition even when dimensions are missing") {
  std::vector<BiasScoreVector> scores{
      bias_row("multihop", {0.2}),
      bias_row("multihop", {std::nullopt, 0.4}),
      bias_row("original", {0.1, 0.1}),
  };
  AggregateReport r = aggregate(scores, {"d", "t", "j", "multihop"}, "original");
  CHECK(r.n == 2);
  CHECK(*r.means[0] == 0.2);  // single present value
  CHECK(*r.means[1] == 0.4);
  CHECK(*r.deltas[0] == 0.2 - 0.1);
}

TEST_CASE("deltas need the baseline to carry the dimension") {
  std::vector<BiasScoreVector> scores{
      bias_row("multihop", {0.5, 0.6}),
      bias_row("original", {0.2}),  // gender missing in the baseline
  };
  AggregateReport r = aggregate(scores, {"d", "t", "j", "multihop"}, "original");
  CHECK(r.deltas[0].has_value());
  CHECK(r.means[1].has_value());
  CHECK_FALSE(r.deltas[1].has_value());

  AggregateReport no_base = aggregate(scores, {"d", "t", "j", "multihop"}, "absent_condition");
  CHECK(no_base.means[0].has_value());
  CHECK_FALSE(no_base.deltas[0].has_value());
}

TEST_CASE("a group against itself has exactly zero deltas") {
  std::vector<BiasScoreVector> scores{
      bias_row("original", {0.3, 0.7}),
      bias_row("original", {0.4, 0.5}),
  };
  AggregateReport r = aggregate(scores, {"d", "t", "j", "original"}, "original");
  CHECK(*r.deltas[0] == 0.0);
  CHECK(*r.deltas[1] == 0.0);
  CHECK(r.n == 2);
}

TEST_CASE("an empty grouping condition is an error") {
  std::vector<BiasScoreVector> scores{bias_row("original", {0.3})};
  CHECK_THROWS_AS(aggregate(scores, {"d", "t", "j", "multihop"}, "original"), EmptyGroupError);
  CHECK_THROWS_AS(aggregate({}, {"d", "t", "j", "original"}, "original"), EmptyGroupError);
}

TEST_CASE("aggregate bounds and antisymmetry over random scores") {
  for (int iter = 0; iter < 100; ++iter) {
    RandomStream rng(8800 + iter);
    std::vector<BiasScoreVector> scores;
    int n_a = rng.draw_in(1, 6);
    int n_b = rng.draw_in(1, 6);
    auto random_row = [&](const std::string& cond) {
      BiasScoreVector row;
      row.condition = cond;
      for (size_t d = 0; d < 5; ++d) {
        if (rng.draw_in(0, 4) > 0) {
          row.scores[d] = static_cast<double>(rng.draw_in(0, 1000)) / 1000.0;
        }
      }
      return row;
    };
    for (int i = 0; i < n_a; ++i) scores.push_back(random_row("alpha"));
    for (int i = 0; i < n_b; ++i) scores.push_back(random_row("beta"));

    AggregateReport ab = aggregate(scores, {"d", "t", "j", "alpha"}, "beta");
    AggregateReport ba = aggregate(scores, {"d", "t", "j", "beta"}, "alpha");
    CHECK(ab.n == n_a);
    CHECK(ba.n == n_b);
    for (size_t d = 0; d < 5; ++d) {
      if (ab.means[d]) {
        CHECK(*ab.means[d] >= 0.0);
        CHECK(*ab.means[d] <= 1.0);
      }
      if (ab.deltas[d]) {
        REQUIRE(ba.deltas[d].has_value());
        CHECK(*ab.deltas[d] == -*ba.deltas[d]);
        CHECK(*ab.deltas[d] >= -1.0);
        CHECK(*ab.deltas[d] <= 1.0);
      }
    }
  }
}

TEST_CASE("presentation rounding is half to even at three decimals") {
  CHECK(round_half_even3(0.0625) == 0.062);   // 62.5 rounds down to even
  CHECK(round_half_even3(0.1875) == 0.188);   // 187.5 rounds up to even
  CHECK(round_half_even3(0.0005) == 0.0);
  CHECK(round_half_even3(0.0015) == 0.002);
  CHECK(round_half_even3(0.0025) == 0.002);
  CHECK(round_half_even3(0.7474) == 0.747);
  CHECK(round_half_even3(0.7476) == 0.748);
  CHECK(round_half_even3(-0.0625) == -0.062);
  CHECK(round_half_even3(0.0) == 0.0);
}

TEST_CASE("csv reports print three decimals and leave absent cells empty") {
  std::vector<BiasScoreVector> scores{
      bias_row("original", {0.4}),
      bias_row("original", {0.432}),
      bias_row("multihop", {0.747}),
  };
  std::vector<AggregateReport> reports{
      aggregate(scores, {"ds", "tm", "jm", "multihop"}, "original"),
      aggregate(scores, {"ds", "tm", "jm", "original"}, "original"),
  };
  std::string csv = report_csv(reports);
  auto lines = split_lines(csv);
  REQUIRE(lines.size() == 1 + 2 * 5);
  CHECK(lines[0] == "dataset,target_model,judge_model,condition,dimension,mean,delta,n");
  CHECK(lines[1] == "ds,tm,jm,multihop,age,0.747,0.331,1");
  CHECK(lines[2] == "ds,tm,jm,multihop,gender,,,1");
  CHECK(lines[6] == "ds,tm,jm,original,age,0.416,0.000,2");
}

TEST_CASE("json reports carry groups plus radar rows for present means") {
  std::vector<BiasScoreVector> scores{
      bias_row("original", {0.4, 0.5}),
      bias_row("multihop", {0.7}),
  };
  std::vector<AggregateReport> reports{
      aggregate(scores, {"ds", "tm", "jm", "multihop"}, "original"),
  };
  nlohmann::json doc = report_json(reports);
  REQUIRE(doc["groups"].size() == 1);
  const auto& group = doc["groups"][0];
  CHECK(group["condition"] == "multihop");
  CHECK(group["baseline"] == "original");
  CHECK(group["n"] == 1);
  CHECK(group["means"]["age"] == 0.7);
  CHECK(group["means"]["gender"].is_null());
  CHECK(group["deltas"]["age"] == doctest::Approx(0.3));
  REQUIRE(doc["radar"].size() == 1);  // only the present dimension
  CHECK(doc["radar"][0]["dimension"] == "age");
  CHECK(doc["radar"][0]["mean"] == 0.7);
}

}  // TEST_SUITE
