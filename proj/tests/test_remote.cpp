#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <memory>

#include "yarnlab/remote.hpp"
#include "yarnlab/stub_server.hpp"

using namespace yarnlab;
using namespace yarnlab::lm;

namespace {

std::shared_ptr<NGramLm> toy_model() {
  NGramOptions options;
  options.order = 2;
  return std::make_shared<NGramLm>(
      build_ngram_from_lines({"a b c", "b c a", "c a b", "a b a"}, options));
}

RemoteLmOptions client_options(const StubServer& server) {
  RemoteLmOptions options;
  options.base_url = server.url();
  options.backoff_ms = 10;  // keep retry tests fast
  return options;
}

}  // namespace

TEST_CASE("remote client reproduces the stub distribution exactly") {
  auto model = toy_model();
  StubServer server(model, {});
  server.start();
  RemoteLm client(client_options(server));

  CHECK(client.vocab_fingerprint() == model->vocab_fingerprint());
  CHECK(client.vocab_size() == model->vocab_size());

  TokenSeq context = model->tokenize("a");
  context.vocab_fingerprint.clear();  // ids are shared; client fills its own fingerprint
  const auto remote = client.next_distribution(context);
  const auto local = model->next_distribution(model->tokenize("a"));
  REQUIRE(remote.complete());
  REQUIRE(remote.entries().size() == model->vocab_size());
  for (const auto& entry : remote.entries()) {
    CHECK(entry.logprob ==
          doctest::Approx(std::log(local.probs()[entry.id])).epsilon(1e-9));
  }
  CHECK(argmax(remote) == argmax(local));
}

TEST_CASE("remote client honors top_k and the complete flag") {
  auto model = toy_model();
  StubServer server(model, {});
  server.start();
  RemoteLm client(client_options(server));

  TokenSeq context;
  context.vocab_fingerprint = client.vocab_fingerprint();
  const auto dist = client.next_distribution(context, 3);
  CHECK(dist.entries().size() == 3);
  CHECK(!dist.complete());
  for (std::size_t i = 1; i < dist.entries().size(); ++i)
    CHECK(dist.entries()[i].logprob <= dist.entries()[i - 1].logprob);
}

TEST_CASE("remote client reconstructs the vocabulary and tokenizes") {
  auto model = toy_model();
  StubServer server(model, {});
  server.start();
  RemoteLm client(client_options(server));

  CHECK(client.vocabulary().fingerprint() == model->vocab_fingerprint());
  const auto seq = client.tokenize("a b c");
  CHECK(seq.ids == model->tokenize("a b c").ids);
  CHECK(client.detokenize(seq) == "a b c");
  CHECK(client.eos_id() == model->eos_id());
}

TEST_CASE("fingerprint mismatch moves the provider into a failed state") {
  auto model = toy_model();
  StubServerOptions options;
  options.fingerprint_override = std::string(64, '0');
  StubServer server(model, options);
  server.start();
  RemoteLm client(client_options(server));

  TokenSeq context;
  context.vocab_fingerprint = client.vocab_fingerprint();
  CHECK_THROWS_AS(client.next_distribution(context), VocabMismatchError);
  // provider is now failed: further calls are rejected without touching the wire
  CHECK_THROWS_AS(client.next_distribution(context), VocabMismatchError);
}

TEST_CASE("injected 500s are retried; persistent 500s surface as TransportError") {
  auto model = toy_model();
  StubServer server(model, {});
  server.start();
  RemoteLm client(client_options(server));
  TokenSeq context;
  context.vocab_fingerprint = client.vocab_fingerprint();

  server.inject_failures(2);  // 3 attempts: two 500s then success
  const auto dist = client.next_distribution(context);
  CHECK(dist.entries().size() == model->vocab_size());

  server.inject_failures(100);
  try {
    client.next_distribution(context);
    FAIL("expected TransportError");
  } catch (const TransportError& e) {
    CHECK(e.status() == 500);
  }
}

TEST_CASE("client errors are not retried") {
  auto model = toy_model();
  StubServer server(model, {});
  server.start();
  RemoteLm client(client_options(server));
  TokenSeq context;
  context.vocab_fingerprint = client.vocab_fingerprint();
  context.ids = {static_cast<TokenId>(model->vocab_size() + 7)};
  try {
    client.next_distribution(context);
    FAIL("expected TransportError");
  } catch (const TransportError& e) {
    CHECK(e.status() == 400);
  }
}

TEST_CASE("bearer auth is required when the server holds a token") {
  auto model = toy_model();
  StubServerOptions server_options;
  server_options.bearer_token = "sesame";
  StubServer server(model, server_options);
  server.start();

  RemoteLmOptions no_token = client_options(server);
  no_token.bearer_token.clear();
  // make sure the environment does not supply the token behind our back
  const char* env = std::getenv("YARNLAB_LM_TOKEN");
  if (!env) {
    RemoteLm unauthorized(no_token);
    CHECK_THROWS_AS(unauthorized.vocab_fingerprint(), TransportError);
  }

  RemoteLmOptions with_token = client_options(server);
  with_token.bearer_token = "sesame";
  RemoteLm authorized(with_token);
  CHECK(authorized.vocab_fingerprint() == model->vocab_fingerprint());
}
