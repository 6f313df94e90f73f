#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

namespace fs = std::filesystem;

#ifndef VISTAT_CLI_PATH
#error "VISTAT_CLI_PATH must point at the built command-line tool"
#endif

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

fs::path scratch(const std::string& name) {
  const fs::path p = fs::path(VISTAT_TEST_SCRATCH) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

Run vistat(const std::string& args, const fs::path& dir, const std::string& env = "") {
  const auto out = dir / "stdout.txt";
  const auto err = dir / "stderr.txt";
  const std::string cmd = env + " '" + std::string(VISTAT_CLI_PATH) + "' " + args + " >'" + out.string() +
                          "' 2>'" + err.string() + "'";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

// Noisy sinusoid in OHLCV form with consecutive calendar dates.
void write_sine(const fs::path& p, std::size_t rows, double noise, std::uint64_t seed,
                std::size_t constant_tail = 0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  std::ostringstream s;
  s.precision(12);
  s << "date,open,high,low,close,volume\n";
  int y = 2000, m = 1, d = 1;
  double last = 0.0;
  for (std::size_t i = 0; i < rows; ++i) {
    double c = 10.0 + std::sin(2.0 * M_PI * static_cast<double>(i) / 40.0) + noise * n01(rng);
    if (constant_tail > 0 && i + constant_tail >= rows) c = last;
    last = c;
    char date[32];
    std::snprintf(date, sizeof date, "%04d-%02d-%02d", y % 10000, m % 100, d % 100);
    s << date << ',' << c << ',' << c + 0.1 << ',' << c - 0.1 << ',' << c << ',' << 1000 + (i % 7) << '\n';
    if (++d > 28) {
      d = 1;
      if (++m > 12) {
        m = 1;
        ++y;
      }
    }
  }
  spit(p, s.str());
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string l;
  while (std::getline(in, l)) out.push_back(l);
  return out;
}

}  // namespace

TEST_CASE("cli: help, version and bad flags") {
  const auto dir = scratch("basics");
  CHECK(vistat("--help", dir).code == 0);
  CHECK(vistat("--version", dir).code == 0);
  CHECK(vistat("vg --no-such-flag", dir).code == 2);
  CHECK(vistat("", dir).code == 2);
}

TEST_CASE("cli: vg") {
  const auto dir = scratch("vg");
  auto r = vistat("vg --values 3,1,2", dir);
  CHECK(r.code == 0);
  CHECK(r.out == "src,dst\n0,1\n0,2\n1,2\n");

  r = vistat("vg --values 1,3,1,3,1 --directed", dir);
  CHECK(r.code == 0);
  CHECK(lines(r.out).size() == 1 + 5);

  spit(dir / "empty.csv", "");
  r = vistat("vg --input " + (dir / "empty.csv").string(), dir);
  CHECK(r.code == 2);
  CHECK_FALSE(r.err.empty());

  write_sine(dir / "s.csv", 50, 0.1, 1);
  r = vistat("vg --input " + (dir / "s.csv").string() + " --window 10 --end 20 --format dense --output " +
                 (dir / "a.csv").string() + " --degrees " + (dir / "deg.csv").string(),
             dir);
  CHECK(r.code == 0);
  CHECK(lines(slurp(dir / "a.csv")).size() == 10);
  CHECK(lines(slurp(dir / "deg.csv")).size() == 11);

  r = vistat("vg --generate regular --n 100 --k 30 --degrees " + (dir / "reg.csv").string() + " --output " +
                 (dir / "reg_edges.csv").string(),
             dir);
  CHECK(r.code == 0);
  const auto deg = lines(slurp(dir / "reg.csv"));
  REQUIRE(deg.size() == 101);
  CHECK(std::all_of(deg.begin() + 1, deg.end(), [](const std::string& l) { return l.ends_with(",30"); }));

  r = vistat("vg --values 1,x,2", dir);
  CHECK(r.code == 2);
  r = vistat("vg --values 1", dir);
  CHECK(r.code == 2);
}

TEST_CASE("cli: normalize and window dump") {
  const auto dir = scratch("normalize");
  write_sine(dir / "s.csv", 200, 0.1, 2);
  const auto r = vistat("normalize --input " + (dir / "s.csv").string() +
                            " --columns close,volume --norm-window 20 --output " + (dir / "z.csv").string() +
                            " --dump-windows " + (dir / "win").string() + " --m 4 --horizon 2",
                        dir);
  CHECK(r.code == 0);
  const auto z = lines(slurp(dir / "z.csv"));
  REQUIRE(z.size() == 1 + 200 - 20 + 1);
  CHECK(z[0] == "date,close,close_mean,close_std,volume,volume_mean,volume_std");
  for (const char* part : {"train.csv", "val.csv", "test.csv"}) {
    const auto w = lines(slurp(dir / "win" / part));
    REQUIRE_FALSE(w.empty());
    CHECK(w[0] == "t_index,feature_0,feature_1,feature_2,feature_3,feature_4,feature_5,feature_6,feature_7,y_0,y_1");
  }

  spit(dir / "flat.csv", "date,open,high,low,close,volume\n2020-01-01,1,1,1,1,1\n2020-01-02,1,1,1,1,1\n"
                         "2020-01-03,1,1,1,1,1\n");
  CHECK(vistat("normalize --input " + (dir / "flat.csv").string() + " --norm-window 3", dir).code == 3);
}

TEST_CASE("cli: train determinism, structure and metadata") {
  const auto dir = scratch("train");
  write_sine(dir / "SINE.csv", 400, 0.1, 3);
  const std::string common = "train --input " + (dir / "SINE.csv").string() + " --cell rnn --epochs 40 --seed 5 ";

  REQUIRE(vistat(common + "--out-dir " + (dir / "a").string(), dir).code == 0);
  REQUIRE(vistat(common + "--out-dir " + (dir / "b").string(), dir).code == 0);
  const auto ck_a = slurp(dir / "a" / "SINE.tg-rnn.ckpt");
  CHECK_FALSE(ck_a.empty());
  CHECK(ck_a == slurp(dir / "b" / "SINE.tg-rnn.ckpt"));
  CHECK(slurp(dir / "a" / "SINE.tg-rnn.log.csv") == slurp(dir / "b" / "SINE.tg-rnn.log.csv"));

  REQUIRE(vistat(common + "--model baseline --out-dir " + (dir / "a").string(), dir).code == 0);
  const auto ck_b = slurp(dir / "a" / "SINE.baseline-rnn.ckpt");
  CHECK(ck_a.find("param geo.") != std::string::npos);
  CHECK(ck_b.find("param geo.") == std::string::npos);

  // Validation loss improves on the toy series.
  const auto log = lines(slurp(dir / "a" / "SINE.tg-rnn.log.csv"));
  REQUIRE(log.size() > 2);
  auto val = [](const std::string& row) { return std::stod(row.substr(row.rfind(',') + 1)); };
  double best = val(log[1]);
  for (std::size_t i = 2; i < log.size(); ++i) best = std::min(best, val(log[i]));
  CHECK(best < val(log[1]));

  // Metadata carries seed, preset and a 40-hex config hash.
  std::string meta;
  for (const auto& l : lines(ck_a))
    if (l.starts_with("meta ")) meta = l.substr(5);
  const auto j = nlohmann::json::parse(meta);
  CHECK(j["seed"] == 5);
  CHECK(j["preset"] == "desk");
  const std::string hash = j["config_hash"];
  CHECK(hash.size() == 40);
  CHECK(hash.find_first_not_of("0123456789abcdef") == std::string::npos);
}

TEST_CASE("cli: seed fallback and config precedence") {
  const auto dir = scratch("config");
  write_sine(dir / "SINE.csv", 300, 0.1, 4);
  const std::string input = " --input " + (dir / "SINE.csv").string();

  REQUIRE(vistat("train" + input + " --epochs 3 --out-dir " + (dir / "env").string(), dir, "VISTAT_SEED=17").code == 0);
  REQUIRE(vistat("train" + input + " --epochs 3 --seed 17 --out-dir " + (dir / "flag").string(), dir).code == 0);
  CHECK(slurp(dir / "env" / "SINE.tg-rnn.ckpt") == slurp(dir / "flag" / "SINE.tg-rnn.ckpt"));

  spit(dir / "run.json", R"({"epochs": 6, "seed": 17, "model_config": {"time_hidden": 4, "patience": 50}})");
  REQUIRE(vistat("train --config " + (dir / "run.json").string() + input + " --epochs 2 --out-dir " +
                     (dir / "cfg").string(),
                 dir, "VISTAT_SEED=99")
              .code == 0);
  const auto ck = slurp(dir / "cfg" / "SINE.tg-rnn.ckpt");
  CHECK(ck.find("\"time_hidden\":4") != std::string::npos);
  CHECK(ck.find("\"max_epochs\":2") != std::string::npos);
  CHECK(ck.find("\"seed\":17") != std::string::npos);

  spit(dir / "bad.json", R"({"epoch": 6})");
  const auto r = vistat("train --config " + (dir / "bad.json").string() + input, dir);
  CHECK(r.code == 2);
  CHECK(r.err.find("epoch") != std::string::npos);
  CHECK(vistat("train --input " + (dir / "missing.csv").string(), dir).code == 2);
}

TEST_CASE("cli: failed training leaves no partial outputs") {
  const auto dir = scratch("partial");
  write_sine(dir / "SINE.csv", 300, 0.1, 5);
  // A directory squatting on the log path makes the second write fail.
  fs::create_directories(dir / "out" / "SINE.tg-rnn.log.csv");
  const auto r = vistat("train --input " + (dir / "SINE.csv").string() + " --epochs 2 --out-dir " +
                            (dir / "out").string(),
                        dir);
  CHECK(r.code == 2);
  CHECK_FALSE(fs::exists(dir / "out" / "SINE.tg-rnn.ckpt"));
}

TEST_CASE("cli: manifest with parallel jobs matches sequential runs") {
  const auto dir = scratch("manifest");
  write_sine(dir / "A.csv", 300, 0.1, 6);
  write_sine(dir / "B.csv", 300, 0.2, 7);
  spit(dir / "list.txt", "# instruments\nA.csv\n\nB.csv\n");
  REQUIRE(vistat("train --manifest " + (dir / "list.txt").string() + " --epochs 3 --seed 10 --jobs 2 --out-dir " +
                     (dir / "par").string(),
                 dir)
              .code == 0);
  REQUIRE(vistat("train --input " + (dir / "B.csv").string() + " --epochs 3 --seed 11 --out-dir " +
                     (dir / "seq").string(),
                 dir)
              .code == 0);
  CHECK(slurp(dir / "par" / "B.tg-rnn.ckpt") == slurp(dir / "seq" / "B.tg-rnn.ckpt"));
  CHECK(fs::exists(dir / "par" / "A.tg-rnn.ckpt"));
}

TEST_CASE("cli: evaluate") {
  const auto dir = scratch("evaluate");
  write_sine(dir / "SINE.csv", 400, 0.02, 8);
  REQUIRE(vistat("train --input " + (dir / "SINE.csv").string() + " --epochs 150 --patience 150 --seed 1 --out-dir " +
                     (dir / "run").string(),
                 dir)
              .code == 0);
  const auto ck = (dir / "run" / "SINE.tg-rnn.ckpt").string();

  // Scoring the data the model was fitted on.
  auto r = vistat("evaluate --checkpoint " + ck + " --input " + (dir / "SINE.csv").string() + " --partition train",
                  dir);
  REQUIRE(r.code == 0);
  const auto rows = lines(r.out);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0] == "dataset,algorithm,horizon,rmse,mae,mape,mase,M");
  std::vector<std::string> f;
  std::stringstream ss(rows[1]);
  for (std::string x; std::getline(ss, x, ',');) f.push_back(x);
  REQUIRE(f.size() == 8);
  CHECK(f[0] == "SINE");
  CHECK(f[1] == "tg-rnn");
  CHECK(std::stod(f[6]) < 0.5);

  // Horizon mismatch is an input error.
  CHECK(vistat("evaluate --checkpoint " + ck + " --input " + (dir / "SINE.csv").string() + " --horizon 5", dir).code ==
        2);

  // A 5-step model reports horizon 5.
  REQUIRE(vistat("train --input " + (dir / "SINE.csv").string() + " --horizon 5 --epochs 3 --out-dir " +
                     (dir / "h5").string(),
                 dir)
              .code == 0);
  r = vistat("evaluate --checkpoint " + (dir / "h5" / "SINE.tg-rnn.ckpt").string() + " --input " +
                 (dir / "SINE.csv").string() + " --output " + (dir / "m.csv").string(),
             dir);
  REQUIRE(r.code == 0);
  CHECK(lines(slurp(dir / "m.csv"))[1].rfind("SINE,tg-rnn,5,", 0) == 0);

  // Constant actuals in the test partition make MASE undefined.
  write_sine(dir / "FLAT.csv", 129, 0.1, 9, 17);
  REQUIRE(vistat("train --input " + (dir / "FLAT.csv").string() + " --m 4 --epochs 2 --out-dir " +
                     (dir / "flat").string(),
                 dir)
              .code == 0);
  r = vistat("evaluate --checkpoint " + (dir / "flat" / "FLAT.tg-rnn.ckpt").string() + " --input " +
                 (dir / "FLAT.csv").string() + " --output " + (dir / "flat.csv").string(),
             dir);
  CHECK(r.code == 3);
  CHECK(r.err.find("MASE") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "flat.csv"));
}

TEST_CASE("cli: compare") {
  const auto dir = scratch("compare");
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(1.0, 5.0);
  std::ostringstream m;
  m << "dataset,LSTM,TG(LSTM),RNN,RNN_copy\n";
  for (int i = 0; i < 90; ++i) {
    const double b = u(rng);
    m << "S" << i << ',' << b << ',' << 0.9 * b << ',' << b << ',' << b << '\n';
  }
  spit(dir / "rmse.csv", m.str());
  auto r = vistat("compare --matrix " + (dir / "rmse.csv").string() +
                      " --pairs LSTM:TG\\(LSTM\\) --pairs RNN:RNN_copy --output " + (dir / "rep.csv").string(),
                  dir);
  REQUIRE(r.code == 0);
  CHECK(r.out.find("R(90)") != std::string::npos);
  const auto rep = lines(slurp(dir / "rep.csv"));
  REQUIRE(rep.size() == 1 + 6);
  CHECK(rep[0] == "test,metric,horizon,pair_or_family,statistic,critical,decision,warnings");
  for (std::size_t i = 4; i <= 6; ++i) {
    CHECK(rep[i].find(",accept,") != std::string::npos);
    CHECK(rep[i].find(",\"\"") == std::string::npos);  // each carries a warning
  }

  r = vistat("compare --matrix " + (dir / "rmse.csv").string() + " --pairs LSTM:GRU", dir);
  CHECK(r.code == 2);
  CHECK(r.err.find("GRU") != std::string::npos);
  CHECK(vistat("compare --matrix " + (dir / "rmse.csv").string() + " --pairs LSTM", dir).code == 2);
}

TEST_CASE("cli: rank recovers a reference Friedman statistic from a reconstructed matrix") {
  // Build a 90 x 16 matrix of per-row rank permutations whose column averages
  // approach the reference average ranks, by hill-climbing adjacent swaps.
  const std::array<double, 16> target = {5.71, 7.50, 8.21,  4.86,  13.74, 6.05,  15.75, 14.07,
                                         5.34, 6.91, 8.07,  4.74,  13.60, 7.60, 12.56, 1.23};
  constexpr int N = 90, K = 16;
  std::vector<std::array<int, K>> rows(N);
  std::array<int, K> order{};
  for (int j = 0; j < K; ++j) order[static_cast<std::size_t>(j)] = j;
  std::sort(order.begin(), order.end(), [&](int a, int b) { return target[static_cast<std::size_t>(a)] < target[static_cast<std::size_t>(b)]; });
  for (auto& row : rows)
    for (int k = 0; k < K; ++k) row[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])] = k + 1;
  std::array<double, K> sums{};
  for (const auto& row : rows)
    for (int j = 0; j < K; ++j) sums[static_cast<std::size_t>(j)] += row[static_cast<std::size_t>(j)];

  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> pick_row(0, N - 1), pick_rank(1, K - 1);
  for (int it = 0; it < 400000; ++it) {
    auto& row = rows[static_cast<std::size_t>(pick_row(rng))];
    const int r = pick_rank(rng);
    const auto a = static_cast<std::size_t>(std::find(row.begin(), row.end(), r) - row.begin());
    const auto b = static_cast<std::size_t>(std::find(row.begin(), row.end(), r + 1) - row.begin());
    // Swapping gives a one more rank, b one less.
    const double before = std::pow(sums[a] - N * target[a], 2) + std::pow(sums[b] - N * target[b], 2);
    const double after = std::pow(sums[a] + 1 - N * target[a], 2) + std::pow(sums[b] - 1 - N * target[b], 2);
    if (after < before) {
      std::swap(row[a], row[b]);
      sums[a] += 1;
      sums[b] -= 1;
    }
  }

  const auto dir = scratch("rank");
  std::ostringstream m;
  m << "dataset";
  for (int j = 0; j < K; ++j) m << ",M" << j;
  m << '\n';
  for (int u = 0; u < N; ++u) {
    m << "S" << u;
    for (int j = 0; j < K; ++j) m << ',' << rows[static_cast<std::size_t>(u)][static_cast<std::size_t>(j)] * 0.01;
    m << '\n';
  }
  spit(dir / "rmse.csv", m.str());
  const auto r = vistat("rank --matrix " + (dir / "rmse.csv").string() + " --output " + (dir / "f.csv").string() +
                            " --ranks " + (dir / "avg.csv").string(),
                        dir);
  REQUIRE(r.code == 0);
  const auto avg = lines(slurp(dir / "avg.csv"));
  REQUIRE(avg.size() == K + 1);
  for (int j = 0; j < K; ++j) {
    const auto& l = avg[static_cast<std::size_t>(j) + 1];
    CHECK(std::stod(l.substr(l.find(',') + 1)) == doctest::Approx(target[static_cast<std::size_t>(j)]).epsilon(0.01));
  }
  const auto f = lines(slurp(dir / "f.csv"));
  REQUIRE(f.size() == 2);
  std::vector<std::string> cells;
  std::stringstream ss(f[1]);
  for (std::string x; std::getline(ss, x, ',');) cells.push_back(x);
  const double chi2 = std::stod(cells[4]);
  CHECK(std::abs(chi2 - 1041.0) / 1041.0 < 0.01);
  CHECK(cells[6] == "reject");
  CHECK(r.out.find("CD = 2.5003") != std::string::npos);
  CHECK(r.out.find('*') != std::string::npos);
}
