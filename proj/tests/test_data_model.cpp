#include "curefit/data_model.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

using namespace curefit;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "curefit_tests";
  fs::create_directories(dir);
  return dir / name;
}

fs::path write_file(const std::string& name, const std::string& body) {
  const auto path = scratch(name);
  std::ofstream(path) << body;
  return path;
}

CovariateSpec ecog_spec() {
  return {"FAILTIME", "FAILCENS", {"TRT", "AGE", "SEX"}, {"TRT", "AGE", "SEX"}, {"AGE"}};
}

}  // namespace

TEST_CASE("e1684 loads with intercept and centered age") {
  const auto data = load_csv(fs::path(CUREFIT_DATA_DIR) / "e1684.csv", ecog_spec());
  CHECK(data.size() == 284);
  CHECK(data.w_dim() == 4);
  CHECK(data.z_dim() == 3);
  CHECK(data.event_count() == 196);
  CHECK(data.w().col(0).isOnes());
  CHECK(std::abs(data.z().col(1).mean()) < 1e-12);
  CHECK(data.w().col(2).isApprox(data.z().col(1)));
  CHECK(data.w_names() == std::vector<std::string>{"Intercept", "TRT", "AGE", "SEX"});
  CHECK(data.z_names() == std::vector<std::string>{"TRT", "AGE", "SEX"});
}

TEST_CASE("single row with one binary covariate") {
  const auto path = write_file("single.csv", "time,event,x\n1.0,1,1\n");
  const auto data = load_csv(path, {"time", "event", {"x"}, {"x"}, {}});
  REQUIRE(data.size() == 1);
  CHECK(data.w().row(0) == Eigen::RowVector2d(1, 1));
  CHECK(data.z()(0, 0) == 1.0);
  CHECK(data.time()(0) == 1.0);
  CHECK(data.event()(0) == 1);
}

TEST_CASE("event outside {0,1} names the offending row") {
  std::string body = "t,d,x\n";
  for (int r = 1; r <= 9; ++r) body += std::to_string(r) + "," + (r == 7 ? "2" : "1") + "," + std::to_string(r % 2) + "\n";
  const auto path = write_file("bad_event.csv", body);
  try {
    load_csv(path, {"t", "d", {"x"}, {"x"}, {}});
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("row 7") != std::string::npos);
  }
}

TEST_CASE("spec and file validation") {
  const auto path = write_file("basic.csv", "t,d,x,y\n1,1,0,2\n2,0,1,3\n3,1,1,1\n");
  CHECK_THROWS_AS(load_csv(path, {"t", "t", {"x"}, {"x"}, {}}), ConfigError);
  CHECK_THROWS_AS(load_csv(path, {"t", "d", {}, {"x"}, {}}), ConfigError);
  CHECK_THROWS_AS(load_csv(path, {"t", "d", {"x"}, {}, {}}), ConfigError);
  CHECK_THROWS_AS(load_csv(path, {"t", "missing", {"x"}, {"x"}, {}}), ConfigError);
  CHECK_THROWS_AS(load_csv(path, {"t", "d", {"x"}, {"x"}, {"zz"}}), ConfigError);
  CHECK_THROWS_AS(load_csv(scratch("does_not_exist.csv"), {"t", "d", {"x"}, {"x"}, {}}), ConfigError);

  const auto constant = write_file("constant.csv", "t,d,x\n1,1,5\n2,0,5\n");
  CHECK_THROWS_AS(load_csv(constant, {"t", "d", {"x"}, {"x"}, {}}), DataError);
  const auto text = write_file("text.csv", "t,d,x\n1,1,abc\n");
  CHECK_THROWS_AS(load_csv(text, {"t", "d", {"x"}, {"x"}, {}}), DataError);
  const auto negative = write_file("negative.csv", "t,d,x\n-1,1,0\n2,1,1\n");
  CHECK_THROWS_AS(load_csv(negative, {"t", "d", {"x"}, {"x"}, {}}), DataError);
}

TEST_CASE("rows with missing cells are dropped before centering") {
  const auto path = write_file("missing.csv", "t,d,x,y\n1,1,0,2\n2,0,NA,3\n3,1,1,\n4,0,1,4\n5,1,0,6\n");
  const auto data = load_csv(path, {"t", "d", {"x"}, {"y"}, {"y"}});
  CHECK(data.size() == 3);
  CHECK(data.dropped_rows == 2);
  CHECK(std::abs(data.z().col(0).sum()) < 1e-12);
  CHECK(data.z()(0, 0) == doctest::Approx(-2.0));
}

TEST_CASE("sort_by_time") {
  CHECK(sort_by_time<double>(Eigen::Vector3d(3, 1, 2)) == std::vector<Index>{1, 2, 0});
  CHECK(sort_by_time<double>(Eigen::Vector3d(1, 2, 3)) == std::vector<Index>{0, 1, 2});
  CHECK(sort_by_time<double>(Eigen::Vector3d(2, 2, 1)) == std::vector<Index>{2, 0, 1});

  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 10; ++rep) {
    const auto data = oracle::random_dataset(rng, 25, 2, 1);
    const auto& idx = data.sort_index();
    std::vector<Index> seen = idx;
    std::sort(seen.begin(), seen.end());
    for (Index i = 0; i < data.size(); ++i) CHECK(seen[static_cast<std::size_t>(i)] == i);
    for (std::size_t k = 1; k < idx.size(); ++k) {
      CHECK(data.time()(idx[k - 1]) <= data.time()(idx[k]));
      if (data.time()(idx[k - 1]) == data.time()(idx[k])) CHECK(idx[k - 1] < idx[k]);
    }
    // Sorting an already-sorted vector is the identity.
    const auto sorted = data.subset(idx);
    const auto again = sorted.sort_index();
    for (std::size_t k = 0; k < again.size(); ++k) CHECK(again[k] == static_cast<Index>(k));
  }
}

TEST_CASE("dataset invariants are enforced") {
  Eigen::VectorXd t(2);
  t << 1, 2;
  Eigen::VectorXi e(2);
  e << 1, 0;
  Eigen::MatrixXd w(2, 1), z(2, 1);
  w << 1, 1;
  z << 0, 1;
  CHECK_NOTHROW(CureDataset(t, e, w, z));
  Eigen::MatrixXd bad_w = w;
  bad_w(1, 0) = 2;
  CHECK_THROWS_AS(CureDataset(t, e, bad_w, z), DataError);
  Eigen::VectorXi no_events = Eigen::VectorXi::Zero(2);
  CHECK_THROWS_AS(CureDataset(t, no_events, w, z), DataError);
  Eigen::MatrixXd short_z(1, 1);
  short_z << 0;
  CHECK_THROWS_AS(CureDataset(t, e, w, short_z), DimensionError);
  Eigen::MatrixXd nan_z = z;
  nan_z(0, 0) = std::nan("");
  CHECK_THROWS_AS(CureDataset(t, e, w, nan_z), DataError);
}

TEST_CASE("records round-trip") {
  std::mt19937_64 rng(3);
  const auto data = oracle::random_dataset(rng, 12, 2, 2);
  std::vector<SubjectRecord<double>> recs;
  for (Index i = 0; i < data.size(); ++i) recs.push_back(data.record(i));
  const auto back = CureDataset::from_records(recs);
  CHECK(back.time() == data.time());
  CHECK(back.event() == data.event());
  CHECK(back.w() == data.w());
  CHECK(back.z() == data.z());
}

TEST_CASE("CSV write then load is bit-exact") {
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 5; ++rep) {
    auto data = oracle::random_dataset(rng, 40, 2, 3, 0.0);
    const auto path = scratch("roundtrip_" + std::to_string(rep) + ".csv");
    write_csv(data, path);
    const auto back = load_csv(path, covariate_spec_of(data));
    CHECK(back.time() == data.time());
    CHECK(back.event() == data.event());
    CHECK(back.w() == data.w());
    CHECK(back.z() == data.z());
  }
}
