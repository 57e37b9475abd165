#include "doctest.h"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>

#include "fssc/data.hpp"
#include "fssc/metrics.hpp"
#include "fssc/rng.hpp"

using namespace fssc;

TEST_CASE("mse") {
  Eigen::VectorXd x(2), y(2);
  x << 0, 0;
  y << 1, 1;
  CHECK(mse(x, x) == 0.0);
  CHECK(mse(x, y) == 1.0);
  Rng rng(1);
  Eigen::VectorXd a(1000), b(1000);
  for (Index i = 0; i < 1000; ++i) {
    a[i] = rng.uniform();
    b[i] = rng.uniform();
  }
  double naive = 0.0;
  for (Index i = 0; i < 1000; ++i) naive += (a[i] - b[i]) * (a[i] - b[i]);
  CHECK(std::abs(mse(a, b) - naive / 1000) < 1e-12);
  CHECK(mse(a, b) == mse(b, a));
  CHECK_THROWS_AS(mse(a, Eigen::VectorXd(3)), DimensionError);
  CHECK_THROWS_AS(mse(Tensor<double>::zeros({2, 3}), Tensor<double>::zeros({3, 2})), DimensionError);

  // Batch mse is the mean of per-image mse.
  Eigen::MatrixXd p = Eigen::MatrixXd::Random(4, 12), q = Eigen::MatrixXd::Random(4, 12);
  double per = 0.0;
  for (Index r = 0; r < 4; ++r) per += mse(p.row(r), q.row(r));
  CHECK(std::abs(mse(p, q) - per / 4) < 1e-12);
}

TEST_CASE("psnr") {
  CHECK(psnr_from_mse(0.01) == doctest::Approx(20.0));
  CHECK(psnr_from_mse(0.0) == kPsnrCap);
  Eigen::VectorXd x = Eigen::VectorXd::Constant(5, 0.3);
  CHECK(psnr(x, x) == kPsnrCap);
  Rng rng(2);
  Eigen::VectorXd img(300), gray = Eigen::VectorXd::Constant(300, 0.5);
  for (Index i = 0; i < 300; ++i) img[i] = rng.uniform();
  const double m = (img - gray).squaredNorm() / 300;
  CHECK(psnr(gray, img) == doctest::Approx(10 * std::log10(1.0 / m)).epsilon(1e-12));
  CHECK(psnr_from_mse(0.02) < psnr_from_mse(0.01));
  CHECK(psnr_from_mse(650.25, kEightBitPeak) == doctest::Approx(20.0));
  const auto rec = MetricRecord::from_mse(3, "global", 12.0, 0.001);
  CHECK(rec.psnr_db == doctest::Approx(30.0));
}

TEST_CASE("synthetic images") {
  const auto c = synth_images(3, SynthKind::Constant, 1);
  for (Index r = 0; r < 3; ++r) CHECK(c.pixels.row(r).maxCoeff() == c.pixels.row(r).minCoeff());
  const auto k = synth_images(4, SynthKind::Checker, 2);
  for (Index r = 0; r < 4; ++r) {
    std::set<float> values(k.pixels.row(r).begin(), k.pixels.row(r).end());
    CHECK(values.size() == 2);
  }
  for (SynthKind kind :
       {SynthKind::Constant, SynthKind::Gradient, SynthKind::Checker, SynthKind::GaussianBlobs}) {
    const auto a = synth_images(5, kind, 7), b = synth_images(5, kind, 7);
    CHECK(a.pixels == b.pixels);
    CHECK(a.pixels.minCoeff() >= 0.0f);
    CHECK(a.pixels.maxCoeff() <= 1.0f);
    CHECK(a.size() == 5);
    CHECK(a.values_per_image() == 3072);
    CHECK(synth_kind_from_string(to_string(kind)) == kind);
  }
  CHECK(synth_images(2, SynthKind::GaussianBlobs, 1).pixels != synth_images(2, SynthKind::GaussianBlobs, 2).pixels);
  CHECK_THROWS_AS(synth_images(0, SynthKind::Constant, 1), ConfigError);
}

TEST_CASE("dataset batches") {
  const auto d = synth_images(6, SynthKind::Gradient, 3);
  const auto b = d.batch<double>({4, 1});
  CHECK(b.shape() == Shape{2, 3, 32, 32});
  CHECK(b.value()[3072 + 100] == doctest::Approx(d.pixels(1, 100)));
  CHECK(d.image<float>(2).shape() == Shape{3, 32, 32});
  CHECK(d.slice(2, 5).size() == 3);
  const auto [val, test] = split_validation(d, 2);
  CHECK(val.size() == 2);
  CHECK(test.size() == 4);
  CHECK(test.pixels.row(0) == d.pixels.row(2));
  CHECK_THROWS_AS(split_validation(d, 7), ConfigError);
}

namespace {
void write_bytes(const std::string& path, const std::vector<unsigned char>& bytes) {
  std::ofstream os(path, std::ios::binary);
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}
std::vector<unsigned char> read_bytes(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}
}  // namespace

TEST_CASE("CIFAR-10 records") {
  write_bytes("cifar_ones.bin", std::vector<unsigned char>(3073, 255));
  const auto ones = load_cifar10_file("cifar_ones.bin", DatasetSource::Cifar10Test);
  CHECK(ones.size() == 1);
  CHECK((ones.pixels.array() == 1.0f).all());

  std::vector<unsigned char> two(2 * 3073);
  Rng rng(4);
  for (auto& v : two) v = static_cast<unsigned char>(rng.uniform_int(256));
  write_bytes("cifar_two.bin", two);
  const auto loaded = load_cifar10_file("cifar_two.bin", DatasetSource::Cifar10Train, 2);
  CHECK(loaded.pixels(1, 0) == doctest::Approx(two[3074] / 255.0f));
  CHECK(loaded.labels[1] == two[3073]);
  write_cifar10_file("cifar_back.bin", loaded);
  CHECK(read_bytes("cifar_back.bin") == two);

  try {
    load_cifar10_file("cifar_two.bin", DatasetSource::Cifar10Train, 3);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("9219") != std::string::npos);
    CHECK(msg.find("6146") != std::string::npos);
  }
  write_bytes("cifar_bad.bin", std::vector<unsigned char>(3000, 1));
  CHECK_THROWS_AS(load_cifar10_file("cifar_bad.bin", DatasetSource::Cifar10Test), FormatError);
  CHECK_THROWS_AS(load_cifar10("no_such_dir", CifarSplit::Test), FileError);
  for (const char* f : {"cifar_ones.bin", "cifar_two.bin", "cifar_back.bin", "cifar_bad.bin"}) {
    std::remove(f);
  }
}
