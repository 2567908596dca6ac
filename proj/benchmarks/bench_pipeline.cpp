#include <benchmark/benchmark.h>

#include "refacer/anonymize.hpp"
#include "refacer/metrics.hpp"
#include "refacer/phantom.hpp"
#include "refacer/slicing.hpp"

namespace {

void BM_RenderPhantom(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    auto subject = refacer::generate_subject(0, {side, side, side}, 42);
    benchmark::DoNotOptimize(subject.volume.data.data());
  }
}
BENCHMARK(BM_RenderPhantom)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_BlurFace(benchmark::State& state) {
  auto subject = refacer::generate_subject(0, {64, 64, 64}, 42);
  const double threshold = refacer::default_skin_threshold(subject.volume);
  const auto mask = refacer::compute_face_mask(subject.volume, 8.0, threshold);
  for (auto _ : state) {
    auto out = refacer::blur_face(subject.volume, mask, 2.0);
    benchmark::DoNotOptimize(out.data.data());
  }
}
BENCHMARK(BM_BlurFace)->Unit(benchmark::kMillisecond);

void BM_Ssim(benchmark::State& state) {
  auto subject = refacer::generate_subject(0, {64, 64, 64}, 42);
  const auto slices = refacer::extract_slices(subject.volume, {2, 0.6});
  const auto a = refacer::front_half(slices[0]);
  const auto b = refacer::front_half(slices[1]);
  for (auto _ : state) benchmark::DoNotOptimize(refacer::ssim(a, b));
}
BENCHMARK(BM_Ssim);

void BM_Percentile(benchmark::State& state) {
  auto subject = refacer::generate_subject(0, {64, 64, 64}, 42);
  for (auto _ : state) benchmark::DoNotOptimize(refacer::percentile(subject.volume.data, 99.5));
}
BENCHMARK(BM_Percentile)->Unit(benchmark::kMillisecond);

}  // namespace
