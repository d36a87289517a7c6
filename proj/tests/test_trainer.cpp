#include <filesystem>
#include <fstream>
#include <sstream>

#include "fone/trainer.hpp"
#include "json.hpp"
#include "test_util.hpp"

using namespace fone;

namespace {

std::filesystem::path fresh_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "fone_tests" / name;
    std::filesystem::remove_all(dir);
    return dir;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

RunConfig tiny_run() {
    RunConfig run;
    run.task = TaskSpec::parse("int-add-2");
    run.sizes = {2000, 200, 400};
    run.epochs = 3;
    run.batch_size = 128;
    run.seed = 5;
    return run;
}

}  // namespace

TEST_CASE("r squared") {
    const std::vector<double> y = {1, 2, 3, 4};
    CHECK(r_squared(y, y) == 1.0);
    const std::vector<double> mean(4, 2.5);
    CHECK(r_squared(y, mean) == 0.0);
    // SS_res = 1, SS_tot = 5
    CHECK(r_squared(y, std::vector<double>{1, 2, 3, 5}) == doctest::Approx(0.8).epsilon(1e-15));
    // worse than the mean goes negative
    CHECK(r_squared(y, std::vector<double>{4, 3, 2, 1}) == doctest::Approx(1.0 - 20.0 / 5.0));
    const std::vector<double> flat(3, 7.0);
    CHECK(r_squared(flat, flat) == 1.0);
    CHECK(r_squared(flat, std::vector<double>{7, 7, 8}) == 0.0);
    CHECK_KIND(r_squared(y, flat), size_error);
}

TEST_CASE("exact match") {
    const std::vector<std::string> t = {"12", "0.50", "7"};
    CHECK(exact_match(t, t) == 1.0);
    CHECK(exact_match(t, std::vector<std::string>{"12", "0.5", "7"}) == doctest::Approx(2.0 / 3.0));
    CHECK(exact_match(std::vector<std::string>{}, std::vector<std::string>{}) == 0.0);
}

TEST_CASE("placed digits") {
    CHECK(placed_digits("567", NumberFormat(4, 0)) == std::vector<int>{7, 6, 5, 0});
    CHECK(placed_digits("4.1", NumberFormat(2, 2)) == std::vector<int>{0, 1, 4, 0});
    CHECK(placed_digits("", NumberFormat(2, 0)) == std::vector<int>{0, 0});
    CHECK(placed_digits("1x2", NumberFormat(3, 0)) == std::vector<int>{2, 1, 0});
}

TEST_CASE("error share") {
    EvalReport r;
    r.per_digit_confusion.assign(2, DigitConfusion{});
    r.per_digit_confusion[0][2][7] = 9;
    r.per_digit_confusion[0][3][3] = 50;
    r.per_digit_confusion[1][8][9] = 1;
    CHECK(r.digit_errors() == 10);
    CHECK(r.error_share_at(5) == doctest::Approx(0.9));
    CHECK(r.error_share_at(1) == doctest::Approx(0.1));
    CHECK(EvalReport{}.error_share_at(5) == 0.0);
}

TEST_CASE("model config per scheme") {
    RunConfig run;
    auto cfg = make_model_config(run, make_encoder(run));
    CHECK(cfg.payload_mode == PayloadMode::add);
    CHECK(cfg.payload_dim == 8);
    CHECK(cfg.hidden_size == 64);
    run.adapter = Adapter::linear;
    CHECK(make_model_config(run, make_encoder(run)).payload_mode == PayloadMode::project);
    run.scheme = Scheme::xval;
    cfg = make_model_config(run, make_encoder(run));
    CHECK(cfg.payload_mode == PayloadMode::scale);
    CHECK(cfg.aux_outputs == 1);
    run.scheme = Scheme::digitwise;
    cfg = make_model_config(run, make_encoder(run));
    CHECK(cfg.payload_mode == PayloadMode::none);
    CHECK(cfg.vocab_size == 19);
    run.task = TaskSpec::parse("classify");
    CHECK(make_model_config(run, make_encoder(run)).aux_outputs == 2);
}

TEST_CASE("training is deterministic and writes a run directory") {
    auto run = tiny_run();
    run.output_dir = fresh_dir("tiny");
    const auto a = train(run);
    REQUIRE(a.failure.empty());
    CHECK(a.epochs_run == 3);
    CHECK(a.history.size() == 3);
    CHECK(a.history[2].train_loss < a.history[0].train_loss);
    CHECK(a.test.count == 400);
    for (const auto& table : a.test.per_digit_confusion) {
        std::uint64_t total = 0;
        for (const auto& row : table) for (auto n : row) total += n;
        CHECK(total == 400);
    }
    CHECK(a.test.tokens_per_number == 1);

    for (const char* f : {"config.txt", "checkpoint.fone", "history.csv", "summary.json"}) {
        CHECK_MESSAGE(std::filesystem::exists(run.output_dir / f), f);
    }
    const auto summary = nlohmann::json::parse(slurp(run.output_dir / "summary.json"));
    CHECK(summary["epochs_run"] == 3);
    CHECK(summary["test"]["count"] == 400);
    CHECK(summary["test"]["exact_match"].get<double>() == a.test.exact_match);
    const auto replay = RunConfig::from_config(KeyValueConfig::load(run.output_dir / "config.txt"));
    CHECK(replay.to_config().to_text() == run.to_config().to_text());
    CHECK(slurp(run.output_dir / "history.csv").rfind("epoch,train_loss,val_exact_match,seconds\n", 0) == 0);

    auto run2 = run;
    run2.output_dir.clear();
    const auto b = train(run2);
    REQUIRE(b.history.size() == a.history.size());
    for (std::size_t k = 0; k < a.history.size(); ++k) {
        CHECK(a.history[k].train_loss == b.history[k].train_loss);
        CHECK(a.history[k].val_exact_match == b.history[k].val_exact_match);
    }
    CHECK(a.checkpoint.model.parameters() == b.checkpoint.model.parameters());

    // re-evaluation from the saved checkpoint reproduces the test report
    const auto data = generate_splits(run.task, run.sizes, run.seed);
    const auto ckpt = load_checkpoint(run.output_dir / "checkpoint.fone");
    const auto again = evaluate(ckpt, data.test, run.task);
    CHECK(again.exact_match == a.test.exact_match);
    CHECK(again.r_squared == a.test.r_squared);
    CHECK(again.per_digit_confusion == a.test.per_digit_confusion);

    CHECK_KIND(evaluate(ckpt, data.test, TaskSpec::parse("int-mul-2")), task_mismatch);
    const std::vector<ArithRecord> wrong = {ArithRecord::from_text("123456+1=123457")};
    CHECK_KIND(evaluate(ckpt, wrong), task_mismatch);
}

TEST_CASE("every scheme trains a step") {
    for (Scheme s : {Scheme::fone, Scheme::digitwise, Scheme::subword, Scheme::xval, Scheme::direct}) {
        auto run = tiny_run();
        run.scheme = s;
        run.epochs = 1;
        run.sizes = {300, 50, 50};
        const auto r = train(run);
        CHECK_MESSAGE(r.failure.empty(), to_string(s));
        CHECK(r.epochs_run == 1);
        CHECK(std::isfinite(r.history[0].train_loss));
        CHECK(r.test.exact_match >= 0.0);
        CHECK(r.test.exact_match <= 1.0);
    }
    auto cls = tiny_run();
    cls.task = TaskSpec::parse("classify");
    cls.epochs = 1;
    cls.sizes = {300, 50, 50};
    const auto r = train(cls);
    CHECK(r.failure.empty());
    REQUIRE(r.test.per_digit_confusion.size() == 1);
}

TEST_CASE("a perfect predictor scores 1") {
    // tiny task trained to completion
    auto run = tiny_run();
    run.task = TaskSpec::parse("int-add-1");
    run.sizes = {45, 5, 5};
    run.epochs = 400;
    run.batch_size = 16;
    const auto r = train(run);
    const auto all = generate(run.task, 55, 1);
    const auto rep = evaluate(r.checkpoint, all);
    if (rep.exact_match == 1.0) {
        CHECK(rep.r_squared == 1.0);
        CHECK(rep.digit_errors() == 0);
    }
    CHECK(rep.exact_match <= 1.0);
    // R^2 of 1 only with every answer exact on integer tasks
    CHECK((rep.r_squared == 1.0) == (rep.exact_match == 1.0));
}

TEST_CASE("sweeps and ablations") {
    auto base = tiny_run();
    base.epochs = 1;
    CHECK(sweep(SweepAxis::data_size, std::vector<double>{}, base).empty());
    base.output_dir = fresh_dir("sweep");
    const std::vector<Scheme> schemes = {Scheme::fone, Scheme::digitwise};
    const auto rows = sweep(SweepAxis::data_size, std::vector<double>{200, 400}, base, schemes);
    REQUIRE(rows.size() == 4);
    CHECK(rows[0].value == 200);
    CHECK(rows[0].scheme == Scheme::fone);
    CHECK(rows[3].scheme == Scheme::digitwise);
    CHECK(std::filesystem::exists(base.output_dir / "data-size-400-digitwise" / "summary.json"));
    const auto csv = sweep_csv(rows);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
    CHECK_KIND(sweep(SweepAxis::model_size, std::vector<double>{7}, base), config_error);

    base.output_dir.clear();
    const auto ab = run_ablation(AblationKind::periods, base);
    REQUIRE(ab.size() == 4);
    CHECK(ab[0].variant == "2,5,10");
    CHECK(ab[1].variant == "10");
    CHECK(ab[2].variant == "5");
    CHECK(ab[3].variant == "7");
    const auto text = ablation_csv(ab);
    CHECK(text.rfind("variant,exact_match,r_squared,digit_errors,error_share_at_5,epochs,failure\n", 0) == 0);
    const auto ad = run_ablation(AblationKind::adapter, base);
    REQUIRE(ad.size() == 2);
    CHECK(ad[0].variant == "zero-pad");
    CHECK(ad[1].variant == "linear");
    const auto dd = run_ablation(AblationKind::direct, base);
    REQUIRE(dd.size() == 2);
    CHECK(dd[1].variant == "direct");
}

TEST_CASE("report json") {
    EvalReport r;
    r.count = 2;
    r.exact_match = 0.5;
    r.r_squared = 0.25;
    r.tokens_per_number = 1;
    r.per_digit_confusion.assign(1, DigitConfusion{});
    r.per_digit_confusion[0][1][1] = 2;
    const auto j = nlohmann::json::parse(report_json(r));
    CHECK(j["count"] == 2);
    CHECK(j["exact_match"] == 0.5);
    CHECK(j["per_digit_confusion"][0][1][1] == 2);
}
