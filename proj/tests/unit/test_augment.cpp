#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <memory>
#include <thread>

#include <gtest/gtest.h>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "citl/augment.hpp"
#include "citl/dataset.hpp"
#include "citl/errors.hpp"

using namespace citl;

namespace {

InstructionDoc original(const std::string& text) { return split_sub_instructions(tokenize(text)); }

// Local text-edit service: appends "please" and counts contextual requests.
class EchoServer {
 public:
  EchoServer() {
    server_.Post("/edit", [this](const httplib::Request& req, httplib::Response& res) {
      const auto j = nlohmann::json::parse(req.body);
      if (j.at("provenance") == "contextual") ++contextual_;
      res.set_content(nlohmann::json{{"text", j.at("text").get<std::string>() + " please"}}.dump(),
                      "application/json");
    });
    server_.Post("/slow", [](const httplib::Request&, httplib::Response& res) {
      std::this_thread::sleep_for(std::chrono::milliseconds(600));
      res.set_content(R"({"text":"late"})", "application/json");
    });
    server_.Post("/broken", [](const httplib::Request&, httplib::Response& res) { res.status = 500; });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~EchoServer() {
    server_.stop();
    thread_.join();
  }
  int port() const { return port_; }
  int contextual() const { return contextual_; }

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<int> contextual_{0};
};

}  // namespace

TEST(Lexicon, Validation) {
  EXPECT_THROW(validate_lexicon({{"walk", {}}}), ConfigError);
  EXPECT_THROW(validate_lexicon({{"walk", {"walk"}}}), ConfigError);
  EXPECT_THROW(validate_lexicon({{"walk", {"go", "go"}}}), ConfigError);
  EXPECT_NO_THROW(validate_lexicon(default_lexicon()));
}

TEST(Lexicon, LoadFromFile) {
  const auto path = std::filesystem::temp_directory_path() / "citl_test_lexicon.json";
  std::ofstream(path) << R"({"walk": ["go", "move"]})";
  const Lexicon lex = load_lexicon(path);
  EXPECT_EQ(lex.at("walk"), (std::vector<std::string>{"go", "move"}));
  std::ofstream(path) << R"({"walk": ["walk"]})";
  EXPECT_THROW(load_lexicon(path), ConfigError);
  std::filesystem::remove(path);
  EXPECT_THROW(load_lexicon(path), ConfigError);
}

TEST(Augment, ForcedSynonymHit) {
  AugmenterConfig cfg;
  cfg.synonym_lexicon = {{"walk", {"go"}}};
  cfg.replace_prob = 1.0;
  const auto out = augment_positive(original("walk straight"), cfg, AugmentMethod::synonym);
  EXPECT_EQ(out.text(), "go straight");
  EXPECT_EQ(out.provenance, Provenance::synonym);
}

TEST(Augment, NoOpYieldsOriginalCopy) {
  const AugmenterConfig cfg;
  const auto doc = original("walk straight , then turn left");
  for (auto m : {AugmentMethod::synonym, AugmentMethod::contextual, AugmentMethod::backtranslation}) {
    const auto out = augment_positive(doc, cfg, m);
    EXPECT_EQ(out.tokens, doc.tokens);
    EXPECT_EQ(out.sub_spans, doc.sub_spans);
    EXPECT_EQ(out.provenance, Provenance::original_copy);
  }
}

TEST(Augment, StubBacktranslation) {
  AugmenterConfig cfg;
  cfg.normalization_table = {{"go", "walk"}, {"sofa", "couch"}};
  const auto out = augment_positive(original("go towards the sofa"), cfg, AugmentMethod::backtranslation);
  EXPECT_EQ(out.text(), "walk towards the couch");
  EXPECT_EQ(out.provenance, Provenance::backtranslated);
}

TEST(Augment, SynonymPreservesSpansAndIsDeterministic) {
  AugmenterConfig cfg;
  cfg.synonym_lexicon = default_lexicon();
  cfg.rng_seed = 17;
  const auto doc = original("walk to the sofa , then turn and go to the table .");
  const auto a = augment_positive(doc, cfg, AugmentMethod::synonym);
  const auto b = augment_positive(doc, cfg, AugmentMethod::synonym);
  EXPECT_EQ(a.tokens, b.tokens);
  EXPECT_EQ(a.sub_spans, doc.sub_spans);
  validate(a);
}

TEST(Augment, OnlyOriginalsAccepted) {
  auto doc = original("turn left");
  doc.provenance = Provenance::synonym;
  EXPECT_THROW(augment_positive(doc, AugmenterConfig{}, AugmentMethod::synonym), std::invalid_argument);
}

TEST(Augment, ClientRealignsSpans) {
  AugmenterConfig cfg;
  cfg.mt_client = std::make_shared<FunctionClient>([](const TextEditRequest& r) {
    return TextEditResponse{"slowly " + r.text, true};
  });
  const auto doc = original("walk ahead , turn left");
  const auto out = augment_positive(doc, cfg, AugmentMethod::backtranslation);
  EXPECT_EQ(out.text(), "slowly walk ahead , slowly turn left");
  EXPECT_EQ(out.sub_spans, (std::vector<Span>{{0, 4}, {4, 7}}));
  validate(out);
}

TEST(Augment, FailedClientKeepsSpan) {
  AugmenterConfig cfg;
  cfg.lm_client = std::make_shared<FunctionClient>([](const TextEditRequest&) { return TextEditResponse{}; });
  const auto doc = original("walk ahead , turn left");
  const auto out = augment_positive(doc, cfg, AugmentMethod::contextual);
  EXPECT_EQ(out.tokens, doc.tokens);
  EXPECT_EQ(out.provenance, Provenance::original_copy);
}

TEST(HttpClient, RoundTripAgainstLocalServer) {
  EchoServer server;
  AugmenterConfig cfg;
  cfg.lm_client = std::make_shared<HttpTextEditClient>("127.0.0.1", server.port(), "/edit");
  const auto out = augment_positive(original("walk ahead , turn left"), cfg, AugmentMethod::contextual);
  EXPECT_EQ(out.text(), "walk ahead , please turn left please");
  EXPECT_EQ(out.provenance, Provenance::contextual);
  EXPECT_EQ(server.contextual(), 2);
}

TEST(HttpClient, FailuresAndTimeouts) {
  EchoServer server;
  const HttpTextEditClient broken("127.0.0.1", server.port(), "/broken");
  EXPECT_FALSE(broken.edit({"walk", Provenance::contextual, std::chrono::milliseconds(500)}).ok);
  const HttpTextEditClient slow("127.0.0.1", server.port(), "/slow");
  EXPECT_FALSE(slow.edit({"walk", Provenance::contextual, std::chrono::milliseconds(100)}).ok);
  const HttpTextEditClient ok("127.0.0.1", server.port(), "/edit");
  const auto r = ok.edit({"walk", Provenance::backtranslated, std::chrono::milliseconds(1000)});
  EXPECT_TRUE(r.ok);
  EXPECT_EQ(r.text, "walk please");
}
