#include <doctest.h>

#include <cmath>
#include <sstream>

#include "cnhpp/error.hpp"
#include "cnhpp/ingest.hpp"
#include "support.hpp"

using namespace cnhpp;
using testing::TempDir;

namespace {

const char* kNetwork =
    "segment_id,x1,y1,x2,y2\n"
    "0,0,0,1,0\n"
    "1,1,0,2,0\n"
    "2,2,0,3,0\n";

std::string panel_csv(int first, int last, int skip = 1000) {
  std::ostringstream out;
  out << "t,segment_id,x1,x2\n";
  for (int t = first; t <= last; ++t) {
    if (t == skip) continue;
    for (int i = 0; i < 3; ++i) out << t << ',' << i << ',' << t + i << ',' << 0.5 * i << '\n';
  }
  return out.str();
}

std::string error_of(auto&& f) {
  try {
    f();
  } catch (const InputError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("a well-formed three-segment bundle loads") {
  TempDir dir;
  const auto net = load_network(dir.write("net.csv", kNetwork), NeighborConfig{});
  CHECK(net.size() == 3);
  CHECK(net.edge_count() == 2);
  const auto panel = load_panel(dir.write("panel.csv", panel_csv(-2, 4)), net.size());
  CHECK(panel.burn_in() == 2);
  CHECK(panel.window_steps() == 5);
  CHECK(panel.n_covariates() == 2);
  CHECK(panel.at(-2)(1, 1) == -1.0);
  CHECK(panel.at(3)(2, 2) == 1.0);
  const auto ev = load_events(dir.write("events.csv", "segment_id,t\n0,0.5\n2,4.99\n1,5\n"), 3, 5);
  CHECK(ev.size() == 3);
  CHECK(ev.step_of(ev.events()[2]) == 4);
}

TEST_CASE("segments in JSON load like CSV") {
  TempDir dir;
  const auto a = load_segments(dir.write(
      "net.json", R"([{"segment_id":1,"x1":1,"y1":0,"x2":2,"y2":0},{"segment_id":0,"x1":0,"y1":0,"x2":1,"y2":0}])"));
  CHECK(a.size() == 2);
  CHECK(a[0].b.x == 1.0);
  const auto b = load_segments(dir.write("wrapped.json", R"({"segments":[{"segment_id":0,"x1":0,"y1":0,"x2":1,"y2":0}]})"));
  CHECK(b.size() == 1);
  CHECK_THROWS_AS(load_segments(dir.write("bad.json", "[1,2")), InputError);
}

TEST_CASE("an explicit adjacency file overrides snapping") {
  TempDir dir;
  const auto net = load_network(dir.write("net.csv", kNetwork), NeighborConfig{},
                                dir.write("adj.csv", "segment_id,neighbor_id\n0,2\n"));
  CHECK(net.edge_count() == 1);
  CHECK(net.adjacent(0).front() == 2);
}

TEST_CASE("event on an unknown segment names the row") {
  TempDir dir;
  const auto msg = error_of([&] { load_events(dir.write("e.csv", "segment_id,t\n0,1.0\n99,2.0\n"), 3, 10); });
  CHECK(msg.find("99") != std::string::npos);
  CHECK(msg.find("row 2") != std::string::npos);
  CHECK(msg.find("e.csv") != std::string::npos);
}

TEST_CASE("a panel with a missing step is non-uniform") {
  TempDir dir;
  const auto msg = error_of([&] { load_panel(dir.write("p.csv", panel_csv(0, 10, 5)), 3); });
  CHECK(msg.find("non-uniform steps") != std::string::npos);
  CHECK(msg.find("5") != std::string::npos);
}

TEST_CASE("malformed inputs are structured errors") {
  TempDir dir;
  CHECK(error_of([&] { load_panel(dir.path() / "absent.csv"); }).find("absent.csv") != std::string::npos);
  CHECK_FALSE(error_of([&] { load_panel(dir.write("dup.csv", panel_csv(0, 1) + "1,2,0,0\n"), 3); }).empty());
  CHECK_FALSE(error_of([&] { load_panel(dir.write("hole.csv", "t,segment_id,x1\n0,0,1\n0,2,1\n"), 3); }).empty());
  CHECK_FALSE(error_of([&] { load_panel(dir.write("nan.csv", "t,segment_id,x1\n0,0,abc\n"), 1); }).empty());
  CHECK_FALSE(error_of([&] { load_panel(dir.write("cols.csv", "t,segment_id,x1\n0,0\n"), 1); }).empty());
  CHECK_FALSE(error_of([&] { load_segments(dir.write("ids.csv", "segment_id,x1,y1,x2,y2\n1,0,0,1,0\n")); }).empty());
  CHECK_FALSE(error_of([&] { load_segments(dir.write("hdr.csv", "id,x1,y1,x2,y2\n0,0,0,1,0\n")); }).empty());
  CHECK_FALSE(error_of([&] { load_events(dir.write("late.csv", "segment_id,t\n0,11\n"), 3, 10); }).empty());
  CHECK_FALSE(error_of([&] { load_network(dir.write("dupgeo.csv", "segment_id,x1,y1,x2,y2\n0,0,0,1,0\n1,1,0,0,0\n"), NeighborConfig{}); }).empty());
}

TEST_CASE("standardization") {
  std::vector<Eigen::MatrixXd> raw;
  raw.push_back((Eigen::MatrixXd(1, 2) << 5.0, 0.0).finished());
  raw.push_back((Eigen::MatrixXd(1, 2) << 5.0, 2.0).finished());
  const auto panel = CovariatePanel::from_covariates(raw, 0);
  const auto [z, stats] = standardize(panel);
  CHECK(z.at(0)(0, 1) == 0.0);
  CHECK(z.at(1)(0, 1) == 0.0);
  CHECK(z.at(0)(0, 2) == -1.0);
  CHECK(z.at(1)(0, 2) == 1.0);
  CHECK(stats.sd(0) == 0.0);
  CHECK(stats.mean(1) == 1.0);
}

TEST_CASE("standardization uses window statistics and round-trips") {
  std::mt19937_64 rng(4);
  const auto panel = testing::random_panel(7, 15, 3, 3, rng, 2.0);
  const auto [z, stats] = standardize(panel);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(3), sq = Eigen::VectorXd::Zero(3);
  for (int t = 0; t < z.window_steps(); ++t) {
    mean += z.at(t).rightCols(3).colwise().sum().transpose();
    sq += z.at(t).rightCols(3).colwise().squaredNorm().transpose();
  }
  mean /= 7.0 * 12;
  sq /= 7.0 * 12;
  CHECK(mean.lpNorm<Eigen::Infinity>() < 1e-12);
  CHECK((sq.array() - 1.0).abs().maxCoeff() < 1e-12);

  const auto back = destandardize(z, stats);
  for (int t = -3; t < 12; ++t) CHECK((back.at(t) - panel.at(t)).lpNorm<Eigen::Infinity>() < 1e-12);

  // stored statistics are applied, never recomputed
  const auto again = apply_standardization(panel, StandardizationStats::from_json(stats.to_json()));
  for (int t = -3; t < 12; ++t) CHECK(again.at(t) == z.at(t));
  CHECK_THROWS_AS(apply_standardization(panel, StandardizationStats{Eigen::VectorXd::Zero(2), Eigen::VectorXd::Ones(2)}),
                  InputError);
}

TEST_CASE("NDVI") {
  CHECK(compute_ndvi(0.4, 0.4) == 0.0);
  CHECK(compute_ndvi(0.6, 0.2) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(compute_ndvi(0.0, 0.3) == -1.0);
  CHECK_THROWS_AS(compute_ndvi(0.0, 0.0), std::domain_error);
  for (double nir = 0.0; nir <= 1.0; nir += 0.1)
    for (double red = 0.05; red <= 1.0; red += 0.1) {
      const double v = compute_ndvi(nir, red);
      CHECK((v >= -1.0 && v <= 1.0));
    }
}

TEST_CASE("reflectance files become NDVI fields") {
  TempDir dir;
  const auto f = load_reflectance(dir.write("r.csv", "x,y,rho_red,rho_nir\n0,0,0.2,0.6\n1,0,0.3,0.0\n"));
  CHECK(f.values[0] == doctest::Approx(0.5));
  CHECK(f.values[1] == -1.0);
  CHECK_THROWS_AS(load_reflectance(dir.write("z.csv", "x,y,rho_red,rho_nir\n0,0,0,0\n")), InputError);
  CHECK_THROWS_AS(load_grid_field(dir.write("d.csv", "x,y,value\n0,0,1\n0,0,2\n")), InputError);
}

TEST_CASE("nearest grid point assignment") {
  const auto net = testing::chain(3);  // midpoints (0.5,0), (1.5,0), (2.5,0)
  GridField one{{{10, 10}}, {7.0}};
  CHECK(assign_grid_to_segments(one, net) == Eigen::Vector3d(7, 7, 7));

  GridField exact{{{1.5, 0.0}, {1.5, 0.2}}, {1.0, 2.0}};
  CHECK(assign_grid_to_segments(exact, net)(1) == 1.0);

  GridField two{{{1.5, 2.0}, {1.5, -1.0}}, {3.0, 4.0}};  // distances 2 and 1 from segment 1
  CHECK(assign_grid_to_segments(two, net)(1) == 4.0);

  GridField tie{{{0.5, 1.0}, {0.5, -1.0}}, {5.0, 6.0}};
  CHECK(assign_grid_to_segments(tie, net)(0) == 5.0);
}

TEST_CASE("writers round-trip through loaders") {
  const auto net = gen_network(Topology::binary_tree, 7);
  std::stringstream seg, adj;
  write_segments_csv(seg, net);
  write_adjacency_csv(adj, net);
  TempDir dir;
  const auto back = load_network(dir.write("n.csv", seg.str()), NeighborConfig{}, dir.write("a.csv", adj.str()));
  CHECK(back.size() == 7);
  CHECK(back.edge_count() == net.edge_count());
  for (Index i = 0; i < 7; ++i)
    CHECK(std::vector<Index>(back.adjacent(i).begin(), back.adjacent(i).end()) ==
          std::vector<Index>(net.adjacent(i).begin(), net.adjacent(i).end()));
}
