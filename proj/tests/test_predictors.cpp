#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <mutex>
#include <thread>

#include "doctest.h"
#include "fixtures.hpp"
#include "httplib.h"
#include "mixens/error.hpp"
#include "mixens/remote_predictor.hpp"

using namespace mixens;
using fixtures::ab_vocab;

namespace {

std::unique_ptr<NGramModel> ngram_from(const std::string& text, std::size_t order, double alpha) {
  return fixtures::train_char(text, order, alpha, ab_vocab());
}

std::vector<TokenId> ids(const std::string& text) { return encode(*ab_vocab(), tokenize(text, Tokenization::Char)); }

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an Error");
  return ErrorKind::Io;
}

}  // namespace

TEST_CASE("n-gram counts on abab") {
  const auto m = ngram_from("abab", 2, 0.0);
  CHECK(m->conditional(ids("a")).probs() == std::vector<double>{0.0, 1.0});
  CHECK(m->conditional(ids("b")).probs() == std::vector<double>{1.0, 0.0});

  // (2 + 1) / (2 + 2)
  const auto laplace = ngram_from("abab", 2, 1.0);
  CHECK(laplace->conditional(ids("a"))[1] == doctest::Approx(0.75));
  CHECK(laplace->conditional(ids("b"))[0] == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("unigram counts on aab") {
  const auto m = ngram_from("aab", 1, 0.0);
  const auto d = m->conditional({});
  CHECK(d[0] == doctest::Approx(2.0 / 3.0));
  CHECK(d[1] == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("n-gram unseen contexts") {
  const auto v = make_vocabulary({"a", "b", "c"});
  const auto m = fixtures::train_char("abab", 2, 0.0, v);
  // Context 'c' never occurs; with alpha 0 the fallback is uniform.
  const auto d = m->conditional(std::vector<TokenId>{2});
  for (double p : d.probs()) CHECK(p == doctest::Approx(1.0 / 3.0));

  const auto smoothed = fixtures::train_char("abab", 2, 0.5, v);
  double sum = 0.0;
  for (TokenId c = 0; c < 3; ++c) {
    const auto row = smoothed->conditional(std::vector<TokenId>{c});
    sum = 0.0;
    for (double p : row.probs()) sum += p;
    CHECK(std::abs(sum - 1.0) < 1e-9);
  }
}

TEST_CASE("n-gram training errors") {
  CHECK(kind_of([] { NGramModel::train({}, 2, 0.0, ab_vocab()); }) == ErrorKind::EmptyCorpus);
  const auto one = ids("a");
  CHECK(kind_of([&] { NGramModel::train(one, 2, 0.0, ab_vocab()); }) == ErrorKind::OrderTooLargeForCorpus);
  const auto corpus = ids("abab");
  CHECK(kind_of([&] { NGramModel::train(corpus, 0, 0.0, ab_vocab()); }) == ErrorKind::InvalidConfig);
  CHECK(kind_of([&] { NGramModel::train(corpus, 2, -1.0, ab_vocab()); }) == ErrorKind::InvalidConfig);
  const std::vector<TokenId> bad{0, 5};
  CHECK(kind_of([&] { NGramModel::train(bad, 1, 0.0, ab_vocab()); }) == ErrorKind::VocabMismatch);
}

TEST_CASE("n-gram predict follows the cache") {
  auto m = ngram_from("abab", 2, 0.0);
  const auto prefix = ids("aba");
  CHECK(m->extend_cache(0, prefix) == WorkReceipt{0, 3});
  CHECK(m->predict(prefix).probs() == std::vector<double>{0.0, 1.0});
  CHECK(m->total_work() == WorkReceipt{1, 3});
}

TEST_CASE("table model lookup") {
  const auto v = ab_vocab();
  TableModel::Table table;
  table.emplace(std::vector<TokenId>{0}, Distribution(v, {0.1, 0.9}));
  TableModel m(Distribution(v, {0.6, 0.4}), 1, std::move(table));
  CHECK(m.lookup(ids("")).probs() == std::vector<double>{0.6, 0.4});
  CHECK(m.lookup(ids("ba")).probs() == std::vector<double>{0.1, 0.9});
  CHECK(m.lookup(ids("ab")).probs() == std::vector<double>{0.6, 0.4});

  auto flat = TableModel::context_free(Distribution(v, {0.6, 0.4}));
  flat->extend_cache(0, ids("abba"));
  CHECK(flat->predict(ids("abba")).probs() == std::vector<double>{0.6, 0.4});
}

TEST_CASE("extend_cache bookkeeping") {
  auto m = ngram_from("abab", 2, 0.0);
  CHECK(m->extend_cache(0, {}) == WorkReceipt{0, 0});
  m->extend_cache(0, ids("ababa"));
  CHECK(m->cached_length() == 5);
  CHECK(m->extend_cache(5, ids("baba")) == WorkReceipt{0, 4});
  CHECK(m->cached_length() == 9);
  CHECK(kind_of([&] { m->extend_cache(3, ids("a")); }) == ErrorKind::GapError);
  CHECK(kind_of([&] { m->extend_cache(10, ids("a")); }) == ErrorKind::GapError);
}

TEST_CASE("predict rejects a prefix other than the cached content") {
  auto m = ngram_from("abab", 2, 0.0);
  m->extend_cache(0, ids("ab"));
  CHECK(kind_of([&] { m->predict(ids("a")); }) == ErrorKind::CacheDesync);
  CHECK(kind_of([&] { m->predict(ids("aba")); }) == ErrorKind::CacheDesync);
  CHECK(kind_of([&] { m->predict(ids("bb")); }) == ErrorKind::CacheDesync);
  CHECK(kind_of([&] { m->accept_token(0); }) == ErrorKind::CacheDesync);
  m->predict(ids("ab"));
  m->accept_token(0);
  CHECK(m->cached_length() == 3);
  CHECK(m->total_work() == WorkReceipt{1, 2});
  CHECK(kind_of([&] { m->accept_token(0); }) == ErrorKind::CacheDesync);
}

TEST_CASE("receipts add up over a session") {
  auto m = ngram_from("abab", 2, 0.0);
  WorkReceipt sum;
  sum += m->extend_cache(0, ids("ab"));
  std::vector<TokenId> seq = ids("ab");
  for (int i = 0; i < 5; ++i) {
    m->predict(seq);
    sum += WorkReceipt{1, 0};
    seq.push_back(1);
    m->accept_token(1);
  }
  sum += m->extend_cache(seq.size(), ids("aa"));
  CHECK(m->total_work() == sum);
  m->reset();
  CHECK(m->total_work() == WorkReceipt{});
  CHECK(m->cached_length() == 0);
}

TEST_CASE("cache transparency over every split") {
  const auto v = make_vocabulary({"a", "b", "c"});
  const auto model = fixtures::train_char("abcabbacbcaacbbcab", 3, 0.3, v);
  std::size_t checked = 0;
  std::vector<TokenId> prefix;
  // Enumerates every prefix over {a, b, c} up to length 8.
  std::function<void(std::size_t)> visit = [&](std::size_t depth) {
    const auto scratch = model->conditional(std::span<const TokenId>(prefix).last(std::min<std::size_t>(2, prefix.size())));
    auto whole = model->fork_session();
    whole->extend_cache(0, prefix);
    const auto reference = whole->predict(prefix);
    if (prefix.size() >= 2) CHECK(reference.probs() == scratch.probs());
    for (std::size_t cut = 0; cut <= prefix.size(); ++cut) {
      auto split = model->fork_session();
      split->extend_cache(0, std::span<const TokenId>(prefix).first(cut));
      split->extend_cache(cut, std::span<const TokenId>(prefix).subspan(cut));
      const auto d = split->predict(prefix);
      if (d.probs() != reference.probs()) {
        FAIL("split at " << cut << " of a length " << prefix.size() << " prefix differs");
      }
      ++checked;
    }
    if (depth == 8) return;
    for (TokenId t = 0; t < 3; ++t) {
      prefix.push_back(t);
      visit(depth + 1);
      prefix.pop_back();
    }
  };
  visit(0);
  std::size_t expected = 0;
  for (std::size_t len = 0, count = 1; len <= 8; ++len, count *= 3) expected += count * (len + 1);
  CHECK(checked == expected);
}

TEST_CASE("accept_token matches prefill") {
  const auto model = fixtures::train_char("abbabaabba", 3, 0.1, ab_vocab());
  auto decoded = model->fork_session();
  std::vector<TokenId> seq;
  SeededRng rng(11);
  for (int i = 0; i < 20; ++i) {
    const auto d = decoded->predict(seq);
    auto fresh = model->fork_session();
    fresh->extend_cache(0, seq);
    CHECK(fresh->predict(seq).probs() == d.probs());
    const TokenId t = sample_token(d, rng);
    decoded->accept_token(t);
    seq.push_back(t);
  }
}

TEST_CASE("model JSON round trip") {
  const auto m = fixtures::train_char(fixtures::corpus_a(), 2, 0.25);
  const auto doc = m->to_json();
  const auto back = NGramModel::from_json(doc);
  CHECK(back->to_json() == doc);
  CHECK(back->order() == 2);
  CHECK(back->alpha() == 0.25);
  const auto ctx = encode(*fixtures::corpus_vocab(), tokenize("t", Tokenization::Char));
  CHECK(back->conditional(ctx).probs() == m->conditional(ctx).probs());

  const auto v = ab_vocab();
  TableModel::Table table;
  table.emplace(std::vector<TokenId>{1}, Distribution(v, {0.3, 0.7}));
  const TableModel t(Distribution(v, {0.6, 0.4}), 1, std::move(table));
  const auto tdoc = t.to_json();
  CHECK(TableModel::from_json(tdoc)->to_json() == tdoc);

  CHECK(kind_of([] { NGramModel::from_json(nlohmann::json{{"order", 2}}); }) == ErrorKind::InvalidConfig);
}

// --- remote predictor ---------------------------------------------------

namespace {

class MockEndpoint {
 public:
  using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

  explicit MockEndpoint(Handler handler) {
    server_.Post("/v1/completions", [this, handler](const httplib::Request& req, httplib::Response& res) {
      {
        std::lock_guard<std::mutex> lock(mutex_);
        requests_.push_back(req);
      }
      handler(req, res);
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~MockEndpoint() {
    server_.stop();
    thread_.join();
  }

  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1/completions"; }
  std::vector<httplib::Request> requests() {
    std::lock_guard<std::mutex> lock(mutex_);
    return requests_;
  }

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::mutex mutex_;
  std::vector<httplib::Request> requests_;
};

void reply_logprobs(httplib::Response& res, const nlohmann::json& top) {
  const nlohmann::json body{{"choices", {{{"text", "a"}, {"logprobs", {{"top_logprobs", {top}}}}}}}};
  res.set_content(body.dump(), "application/json");
}

RemoteConfig config_for(const MockEndpoint& mock) {
  RemoteConfig cfg;
  cfg.endpoint = mock.url();
  cfg.model = "mock";
  cfg.top_logprobs = 2;
  cfg.timeout = std::chrono::milliseconds(1000);
  return cfg;
}

}  // namespace

TEST_CASE("remote predictor reads top logprobs") {
  MockEndpoint mock([](const httplib::Request&, httplib::Response& res) {
    reply_logprobs(res, {{"a", std::log(0.7)}, {"b", std::log(0.3)}});
  });
  RemotePredictor remote(ab_vocab(), config_for(mock));
  remote.extend_cache(0, ids("ab"));
  const auto d = remote.predict(ids("ab"));
  CHECK(d[0] == doctest::Approx(0.7).epsilon(1e-6));
  CHECK(d[1] == doctest::Approx(0.3).epsilon(1e-6));
  CHECK(std::abs(d[0] - 0.7) < 1e-6);
  CHECK(remote.total_work() == WorkReceipt{1, 2});

  const auto reqs = mock.requests();
  REQUIRE(reqs.size() == 1);
  const auto body = nlohmann::json::parse(reqs[0].body);
  CHECK(body["prompt"] == "ab");
  CHECK(body["max_tokens"] == 1);
  CHECK(body["logprobs"] == 2);
  CHECK(body["model"] == "mock");
  CHECK_FALSE(reqs[0].has_header("Authorization"));
}

TEST_CASE("remote predictor sends the bearer token from the environment") {
  MockEndpoint mock([](const httplib::Request&, httplib::Response& res) {
    reply_logprobs(res, {{"a", std::log(0.5)}, {"b", std::log(0.5)}});
  });
  ::setenv("MIXENS_TEST_TOKEN", "s3cret", 1);
  auto cfg = config_for(mock);
  cfg.auth_env = "MIXENS_TEST_TOKEN";
  RemotePredictor remote(ab_vocab(), cfg);
  remote.predict({});
  const auto reqs = mock.requests();
  REQUIRE(reqs.size() == 1);
  CHECK(reqs[0].get_header_value("Authorization") == "Bearer s3cret");
  ::unsetenv("MIXENS_TEST_TOKEN");
}

TEST_CASE("remote predictor retries a timed-out request once") {
  std::atomic<int> calls{0};
  MockEndpoint mock([&](const httplib::Request&, httplib::Response& res) {
    if (calls++ == 0) std::this_thread::sleep_for(std::chrono::milliseconds(400));
    reply_logprobs(res, {{"a", std::log(0.7)}, {"b", std::log(0.3)}});
  });
  auto cfg = config_for(mock);
  cfg.timeout = std::chrono::milliseconds(150);
  RemotePredictor remote(ab_vocab(), cfg);
  const auto d = remote.predict({});
  CHECK(d[0] == doctest::Approx(0.7));
  CHECK(calls.load() == 2);
}

TEST_CASE("remote predictor surfaces failures") {
  std::atomic<int> calls{0};
  MockEndpoint slow([&](const httplib::Request&, httplib::Response& res) {
    ++calls;
    std::this_thread::sleep_for(std::chrono::milliseconds(300));
    reply_logprobs(res, {{"a", 0.0}});
  });
  auto cfg = config_for(slow);
  cfg.timeout = std::chrono::milliseconds(100);
  RemotePredictor remote(ab_vocab(), cfg);
  CHECK(kind_of([&] { remote.predict({}); }) == ErrorKind::RemoteError);
  CHECK(calls.load() == 2);

  MockEndpoint broken([](const httplib::Request&, httplib::Response& res) { res.status = 500; });
  RemotePredictor failing(ab_vocab(), config_for(broken));
  CHECK(kind_of([&] { failing.predict({}); }) == ErrorKind::RemoteError);
}

TEST_CASE("top logprob completion spreads the missing mass") {
  const auto v = make_vocabulary({"a", "b", "c", "d"});
  const auto d = complete_top_logprobs(v, {{"a", std::log(0.5)}, {"b", std::log(0.3)}, {"zz", std::log(0.1)}},
                                       Tokenization::Char);
  CHECK(d[0] == doctest::Approx(0.5));
  CHECK(d[1] == doctest::Approx(0.3));
  CHECK(d[2] == doctest::Approx(0.1));
  CHECK(d[3] == doctest::Approx(0.1));

  const nlohmann::json chat{
      {"choices",
       {{{"logprobs",
          {{"content", {{{"token", "a"}, {"top_logprobs", {{{"token", "a"}, {"logprob", -0.1}}}}}}}}}}}}};
  const auto parsed = parse_top_logprobs(chat);
  REQUIRE(parsed.size() == 1);
  CHECK(parsed[0].first == "a");
  CHECK(parsed[0].second == -0.1);
  CHECK(kind_of([] { parse_top_logprobs(nlohmann::json::object()); }) == ErrorKind::RemoteError);
}
