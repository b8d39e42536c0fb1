#include <doctest.h>

#include <chrono>
#include <filesystem>
#include <fstream>

#include "sci3d/dataset.hpp"
#include "sci3d/io.hpp"
#include "sci3d/rng.hpp"

using namespace sci3d;

namespace {

namespace fs = std::filesystem;

struct TempDir {
  fs::path path;
  TempDir() {
    const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path = fs::temp_directory_path() /
           ("sci3d_test_" + std::to_string(Rng(static_cast<uint64_t>(stamp)).next_u64()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

std::vector<char> slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::vector<char>((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
}

}  // namespace

TEST_SUITE_BEGIN("io");

TEST_CASE("grid checkpoint round-trips bit-identically") {
  TempDir dir;
  Rng rng(3);
  RadianceGrid grid = make_grid(Eigen::Vector3i(6, 5, 4), Eigen::Vector3d(-1, -2, 0),
                                Eigen::Vector3d(1, 0, 3), 1);
  for (double& d : grid.density_raw) d = static_cast<float>(rng.uniform() * 4 - 2);
  for (double& c : grid.sh_coeffs) c = static_cast<float>(rng.uniform());

  const std::string path = dir.file("grid.scgr");
  write_grid(path, grid);
  const RadianceGrid loaded = read_grid(path);
  CHECK(loaded.resolution == grid.resolution);
  CHECK(loaded.bbox_min == grid.bbox_min);
  CHECK(loaded.bbox_max == grid.bbox_max);
  CHECK(loaded.sh_degree == grid.sh_degree);
  CHECK(loaded.density_raw == grid.density_raw);
  CHECK(loaded.sh_coeffs == grid.sh_coeffs);

  const std::string again = dir.file("grid2.scgr");
  write_grid(again, loaded);
  CHECK(slurp(path) == slurp(again));
}

TEST_CASE("mask stack round-trips bit-identically") {
  TempDir dir;
  const MaskStack stack = generate_masks(9, 7, 5, 0.2, 42);
  const std::string path = dir.file("masks.scmk");
  write_masks(path, stack);
  const MaskStack loaded = read_masks(path);
  CHECK(loaded.n == stack.n);
  CHECK(loaded.seed == stack.seed);
  CHECK(loaded.bits == stack.bits);
  CHECK(loaded.target_or == doctest::Approx(stack.target_or));
  const std::string again = dir.file("masks2.scmk");
  write_masks(again, loaded);
  CHECK(slurp(path) == slurp(again));
}

TEST_CASE("measurement round-trips through the f32 file format") {
  TempDir dir;
  Rng rng(5);
  Measurement m(6, 8, 3);
  m.noise_sigma = 0.25;
  for (double& v : m.pixels) v = static_cast<float>(rng.uniform() * 3.0);

  const std::string path = dir.file("m.scms");
  write_measurement(path, m);
  const Measurement loaded = read_measurement(path);
  CHECK(loaded.height == 6);
  CHECK(loaded.width == 8);
  CHECK(loaded.channels == 3);
  CHECK(loaded.pixels == m.pixels);  // values were f32-exact
  const std::string again = dir.file("m2.scms");
  write_measurement(again, loaded);
  CHECK(slurp(path) == slurp(again));
}

TEST_CASE("tensor files reject bad payloads and round-trip") {
  TempDir dir;
  const std::vector<uint32_t> dims = {2, 3, 4};
  std::vector<float> data(24);
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = static_cast<float>(i) * 0.5f;
  CHECK_THROWS_AS(write_tensor(dir.file("bad.sctf"), dims, std::vector<float>(7)),
                  DimensionMismatch);
  write_tensor(dir.file("t.sctf"), dims, data);
  std::vector<uint32_t> loaded_dims;
  const std::vector<float> loaded = read_tensor(dir.file("t.sctf"), loaded_dims);
  CHECK(loaded_dims == dims);
  CHECK(loaded == data);
}

TEST_CASE("frames round-trip as a rank-4 tensor") {
  TempDir dir;
  Rng rng(7);
  std::vector<Image> frames(3, Image(5, 4, 3));
  for (Image& f : frames)
    for (float& v : f.data) v = static_cast<float>(rng.uniform());
  write_frames(dir.file("f.sctf"), frames);
  const std::vector<Image> loaded = read_frames(dir.file("f.sctf"));
  REQUIRE(loaded.size() == frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) CHECK(loaded[i].data == frames[i].data);
}

TEST_CASE("pose text files round-trip to full precision") {
  TempDir dir;
  Rng rng(9);
  std::vector<Pose> poses;
  for (int i = 0; i < 4; ++i) {
    Twist xi;
    for (int a = 0; a < 3; ++a) {
      xi.rho[a] = rng.uniform() * 2 - 1;
      xi.phi[a] = rng.uniform() - 0.5;
    }
    poses.push_back(se3_exp(xi));
  }
  write_poses(dir.file("poses.txt"), poses);
  const std::vector<Pose> loaded = read_poses(dir.file("poses.txt"));
  REQUIRE(loaded.size() == poses.size());
  for (std::size_t i = 0; i < poses.size(); ++i) {
    CHECK((loaded[i].rotation - poses[i].rotation).cwiseAbs().maxCoeff() == 0.0);
    CHECK((loaded[i].translation - poses[i].translation).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("png export writes a parsable file") {
  TempDir dir;
  Image img(8, 8, 3);
  for (int r = 0; r < 8; ++r)
    for (int c = 0; c < 8; ++c) img.at(r, c, 0) = static_cast<float>(r) / 8.0f;
  write_png(dir.file("img.png"), img);
  const auto bytes = slurp(dir.file("img.png"));
  REQUIRE(bytes.size() > 8);
  CHECK(static_cast<unsigned char>(bytes[1]) == 'P');
  CHECK(static_cast<unsigned char>(bytes[2]) == 'N');
  CHECK(static_cast<unsigned char>(bytes[3]) == 'G');
}

TEST_CASE("datasets write, reload, and re-encode bit-exactly") {
  TempDir dir;
  DatasetSpec spec;
  spec.scene = preset_scene("orbs");
  spec.intrinsics.width = 24;
  spec.intrinsics.height = 24;
  spec.intrinsics.fx = spec.intrinsics.fy = 21.6;
  spec.intrinsics.cx = spec.intrinsics.cy = 12.0;
  spec.trajectory_start.translation = Eigen::Vector3d(0, 0, -2.5);
  spec.trajectory_end = spec.trajectory_start;
  spec.trajectory_end.translation.x() += 0.2;
  spec.frame_count = 4;
  spec.overlap_rate = 0.5;
  spec.seed = 11;
  spec.bake_resolution = Eigen::Vector3i(32, 32, 32);
  spec.sampling = SamplingConfig{1.2, 4.2, 24, false};
  spec.threads = 2;

  const Dataset ds = make_dataset(spec);
  REQUIRE(ds.gt_frames.size() == 4);

  // measurement equals the masked frame sum by construction
  const Measurement recoded = encode_measurement(ds.gt_frames, ds.masks, 0.0);
  CHECK(recoded.pixels == ds.measurement.pixels);

  save_dataset(ds, dir.file("ds"), true);
  const Dataset loaded = load_dataset(dir.file("ds"));
  CHECK(loaded.masks.bits == ds.masks.bits);
  CHECK(loaded.spec.frame_count == 4);
  CHECK(loaded.gt_frames.size() == 4);
  for (int i = 0; i < 4; ++i) CHECK(loaded.gt_frames[i].data == ds.gt_frames[i].data);
  CHECK(loaded.spec.intrinsics.fx == doctest::Approx(21.6));
  // measurement survives the f32 file format (values are sums of f32 frames)
  for (std::size_t i = 0; i < ds.measurement.pixels.size(); ++i)
    CHECK(loaded.measurement.pixels[i] ==
          doctest::Approx(ds.measurement.pixels[i]).epsilon(1e-7));

  // reproducibility: same spec, fresh dataset, byte-identical artifacts
  const Dataset again = make_dataset(spec);
  save_dataset(again, dir.file("ds2"), false);
  CHECK(slurp(dir.file("ds/measurement.scms")) == slurp(dir.file("ds2/measurement.scms")));
  CHECK(slurp(dir.file("ds/masks.scmk")) == slurp(dir.file("ds2/masks.scmk")));
  CHECK(slurp(dir.file("ds/frames_gt.sctf")) == slurp(dir.file("ds2/frames_gt.sctf")));
}

TEST_CASE("zero-length trajectory produces identical frames") {
  DatasetSpec spec;
  spec.scene = preset_scene("orbs");
  spec.intrinsics.width = 16;
  spec.intrinsics.height = 16;
  spec.intrinsics.fx = spec.intrinsics.fy = 14.4;
  spec.intrinsics.cx = spec.intrinsics.cy = 8.0;
  spec.trajectory_start.translation = Eigen::Vector3d(0, 0, -2.5);
  spec.trajectory_end = spec.trajectory_start;
  spec.frame_count = 3;
  spec.overlap_rate = 1.0 / 3.0;
  spec.bake_resolution = Eigen::Vector3i(24, 24, 24);
  spec.sampling = SamplingConfig{1.2, 4.2, 16, false};
  const Dataset ds = make_dataset(spec);
  CHECK(ds.gt_frames[0].data == ds.gt_frames[1].data);
  CHECK(ds.gt_frames[0].data == ds.gt_frames[2].data);
}

TEST_CASE("config files parse sections, comments, and overrides") {
  IniConfig cfg;
  cfg.parse("# comment\n[train]\niterations = 100\nlr = 5e-4 ; tail\n[scene]\npreset=orbs\n");
  CHECK(cfg.get_int("train", "iterations", 0) == 100);
  CHECK(cfg.get_double("train", "lr", 0.0) == doctest::Approx(5e-4));
  CHECK(cfg.get_string("scene", "preset", "") == "orbs");
  cfg.apply_override("train.iterations=250");
  CHECK(cfg.get_int("train", "iterations", 0) == 250);
  CHECK_THROWS_AS(cfg.apply_override("bogus"), ConfigError);
  CHECK_THROWS_AS((void)cfg.get_int("train", "lr", 0), ConfigError);
  CHECK_THROWS_AS((void)cfg.get_required("train", "missing"), ConfigError);
}

TEST_SUITE_END();
