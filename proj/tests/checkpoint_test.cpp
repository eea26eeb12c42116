#include <filesystem>
#include <sstream>

#include <gtest/gtest.h>

#include "anlf/checkpoint.hpp"
#include "anlf/config.hpp"
#include "anlf/verify.hpp"

using namespace anlf;

namespace {

Checkpoint sample_checkpoint() {
  Checkpoint ck;
  ck.model = tiny_config(Variant::anlf, 11);
  ck.stats = {3012.25, 411.0 / 3.0, 11.5, 6.1};
  ck.holidays = "/data/calendars/us holidays.csv";
  ck.params = init_params(ck.model);
  return ck;
}

std::string text_of(const Checkpoint& ck) {
  std::ostringstream os;
  save_checkpoint(os, ck);
  return os.str();
}

RunConfig parse(const std::string& text, const std::filesystem::path& base = {}) {
  std::istringstream in(text);
  return parse_run_config(in, "run.cfg", base);
}

template <class E>
std::string message_of(const std::string& text) {
  try {
    parse(text);
  } catch (const E& e) {
    return e.what();
  }
  return "no exception";
}

}  // namespace

TEST(Checkpoint, RoundTripIsBitExact) {
  const auto ck = sample_checkpoint();
  std::istringstream in(text_of(ck));
  const auto back = load_checkpoint(in, "ck");
  EXPECT_EQ(back.model, ck.model);
  EXPECT_EQ(back.stats.load_mean, ck.stats.load_mean);
  EXPECT_EQ(back.stats.load_std, ck.stats.load_std);
  EXPECT_EQ(back.holidays, ck.holidays);
  std::vector<std::vector<double>> a, b;
  ck.params.visit([&](const std::string&, const Tensor& t) { a.emplace_back(t.values().begin(), t.values().end()); });
  back.params.visit([&](const std::string&, const Tensor& t) { b.emplace_back(t.values().begin(), t.values().end()); });
  EXPECT_EQ(a, b);
  EXPECT_EQ(text_of(back), text_of(ck));
}

TEST(Checkpoint, EveryVariantRoundTrips) {
  for (auto v : kAllVariants) {
    auto ck = sample_checkpoint();
    ck.model = tiny_config(v, 2);
    ck.params = init_params(ck.model);
    std::istringstream in(text_of(ck));
    EXPECT_EQ(text_of(load_checkpoint(in, "ck")), text_of(ck)) << variant_name(v);
  }
}

TEST(Checkpoint, BadHeaderNamesLine) {
  std::istringstream in("\nnot-a-checkpoint\n");
  try {
    load_checkpoint(in, "x.anlf");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("x.anlf:2"), std::string::npos) << e.what();
  }
}

TEST(Checkpoint, ShapeMismatchIsParseError) {
  auto text = text_of(sample_checkpoint());
  const auto pos = text.find("model.hidden 4");
  ASSERT_NE(pos, std::string::npos);
  text.replace(pos, 14, "model.hidden 5");
  std::istringstream in(text);
  EXPECT_THROW(load_checkpoint(in, "ck"), ParseError);
}

TEST(Checkpoint, TruncatedIsParseError) {
  const auto text = text_of(sample_checkpoint());
  std::istringstream in(text.substr(0, text.size() / 2));
  EXPECT_THROW(load_checkpoint(in, "ck"), ParseError);
}

TEST(Checkpoint, MissingFileIsIoError) {
  EXPECT_THROW(load_checkpoint("/nonexistent/ck.anlf"), IoError);
}

TEST(RunConfig, DefaultsFollowVariant) {
  const auto c = parse("model.variant = EDLSTM\ndata.synthetic = true\n");
  EXPECT_EQ(c.model.variant, Variant::ed_lstm);
  EXPECT_EQ(c.model.hidden, default_hidden_size(Variant::ed_lstm));
  EXPECT_EQ(c.train.batch, default_train_config(Variant::ed_lstm).batch);
  EXPECT_EQ(c.train.epochs, default_train_config(Variant::ed_lstm).epochs);
}

TEST(RunConfig, ExplicitKeysOverrideDefaults) {
  const auto c = parse(
      "# comment\n"
      "train.batch = 4   # trailing\n"
      "model.hidden = 32\n"
      "model.variant = ANLF\n"
      "train.lr = 5e-3\n"
      "data.synthetic = yes\n"
      "output.timing = true\n");
  EXPECT_EQ(c.train.batch, 4u);
  EXPECT_EQ(c.model.hidden, 32u);
  EXPECT_EQ(c.train.learning_rate, 5e-3);
  EXPECT_TRUE(c.record_timing);
}

TEST(RunConfig, ErrorsNameTheLine) {
  EXPECT_NE(message_of<ConfigError>("data.synthetic = true\nmodel.bogus = 1\n").find("run.cfg:2"), std::string::npos);
  EXPECT_NE(message_of<ConfigError>("data.synthetic = true\ndata.synthetic = true\n").find("duplicate"),
            std::string::npos);
  EXPECT_NE(message_of<ConfigError>("data.synthetic = true\ntrain.batch = -3\n").find("run.cfg:2"),
            std::string::npos);
  EXPECT_NE(message_of<ConfigError>("data.synthetic\n").find("run.cfg:1"), std::string::npos);
  EXPECT_NE(message_of<ConfigError>("train.lr =\n").find("empty"), std::string::npos);
  EXPECT_THROW(parse("data.synthetic = true\nmodel.variant = GRU\n"), ConfigError);
}

TEST(RunConfig, DataRequiredUnlessSynthetic) {
  EXPECT_THROW(parse("model.variant = ANLF\n"), ConfigError);
  EXPECT_THROW(parse("data.synthetic = true\ndata.synthetic_days = 10\ndata.synthetic_train_days = 5\n"
                     "data.synthetic_validation_days = 5\n"),
               ConfigError);
  EXPECT_NO_THROW(parse("data.train = a.csv\ndata.validation = b.csv\ndata.holidays = h.csv\n"));
}

TEST(RunConfig, RelativePathsResolveAgainstBase) {
  const auto c = parse("data.train = a.csv\ndata.validation = /abs/b.csv\ndata.holidays = ../h.csv\n", "/cfg/dir");
  EXPECT_EQ(c.data.train, "/cfg/dir/a.csv");
  EXPECT_EQ(c.data.validation, "/abs/b.csv");
  EXPECT_EQ(c.data.holidays, "/cfg/h.csv");
  EXPECT_EQ(c.output_dir, "/cfg/dir/anlf-run");
}

TEST(RunConfig, EntriesEchoEveryKeyAndReparse) {
  const auto c = parse("data.synthetic = true\nmodel.hidden = 16\ntrain.lr = 0.002\n");
  const auto e = c.entries();
  EXPECT_EQ(e.size(), 31u);
  EXPECT_TRUE(std::is_sorted(e.begin(), e.end()));
  std::string text;
  for (const auto& [k, v] : e)
    if (!v.empty()) text += k + " = " + v + "\n";
  const auto again = parse(text);
  EXPECT_EQ(again.model, c.model);
  EXPECT_EQ(again.train, c.train);
  EXPECT_EQ(again.entries(), e);
}

TEST(RunConfig, MissingFileIsConfigError) {
  EXPECT_THROW(load_run_config("/nonexistent/run.cfg"), ConfigError);
}

TEST(RunConfig, OverridesReplaceFileEntries) {
  std::istringstream in("model.variant = ANLF\ntrain.epochs = 9\n");
  const auto c = parse_run_config(in, "run.cfg", {}, {{"data.synthetic", "true"}, {"train.epochs", "2"}});
  EXPECT_TRUE(c.data.synthetic);
  EXPECT_EQ(c.train.epochs, 2u);
  std::istringstream again("data.synthetic = true\n");
  EXPECT_THROW(parse_run_config(again, "run.cfg", {}, {{"train.epoch", "2"}}), ConfigError);
}
