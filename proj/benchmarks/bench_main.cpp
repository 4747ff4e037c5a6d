#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "zoneval/assigners.hpp"
#include "zoneval/dataset.hpp"
#include "zoneval/zone_eval.hpp"

using namespace zoneval;

namespace {

std::vector<BBox> random_boxes(std::size_t n, unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> pos(0.0, 900.0);
    std::uniform_real_distribution<double> size(8.0, 100.0);
    std::vector<BBox> boxes;
    boxes.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        boxes.push_back({pos(rng), pos(rng), size(rng), size(rng)});
    }
    return boxes;
}

// ~100 images, 3 categories, 12 detections per image.
struct EvalData {
    DetectionDataset ds;
    DetectionSet dets;
    EvalData() {
        std::mt19937 rng(7);
        std::uniform_real_distribution<double> pos(0.0, 900.0);
        std::uniform_real_distribution<double> size(10.0, 90.0);
        std::uniform_real_distribution<double> jitter(-8.0, 8.0);
        std::uniform_real_distribution<double> score(0.05, 1.0);
        std::uniform_int_distribution<int> cat(1, 3);
        for (int c = 1; c <= 3; ++c) {
            ds.categories.push_back({c, "c" + std::to_string(c)});
        }
        std::vector<Detection> raw;
        std::int64_t ann = 1;
        for (int i = 1; i <= 100; ++i) {
            ds.images.push_back({i, 1000.0, 1000.0});
            for (int g = 0; g < 8; ++g) {
                const BBox b{pos(rng), pos(rng), size(rng), size(rng)};
                const int c = cat(rng);
                ds.annotations.push_back({ann++, i, c, b, false});
                raw.push_back({i, c, BBox{b.x + jitter(rng), b.y + jitter(rng), b.w, b.h},
                               score(rng)});
            }
            for (int d = 0; d < 4; ++d) {
                raw.push_back({i, cat(rng), BBox{pos(rng), pos(rng), size(rng), size(rng)},
                               score(rng)});
            }
        }
        dets = make_detection_set(raw, ds);
    }
};

const EvalData& eval_data() {
    static EvalData data;
    return data;
}

}  // namespace

static void BM_Iou(benchmark::State& state) {
    const auto boxes = random_boxes(1024, 11);
    std::size_t i = 0;
    for (auto _ : state) {
        const double v = iou(boxes[i % 1024], boxes[(i * 7 + 13) % 1024]);
        benchmark::DoNotOptimize(v);
        ++i;
    }
}
BENCHMARK(BM_Iou);

static void BM_ZoneContains(benchmark::State& state) {
    const auto zones = annular_zones(5);
    const auto boxes = random_boxes(1024, 13);
    std::size_t i = 0;
    for (auto _ : state) {
        const bool in = zones[i % 5].contains(boxes[i % 1024].center(), 1000.0, 1000.0);
        benchmark::DoNotOptimize(in);
        ++i;
    }
}
BENCHMARK(BM_ZoneContains);

static void BM_ZoneEvaluation(benchmark::State& state) {
    const auto& data = eval_data();
    EvalOptions opt = default_eval_options();
    opt.threads = static_cast<int>(state.range(0));
    for (auto _ : state) {
        const auto report = zone_evaluation(data.ds, data.dets, 5, opt);
        benchmark::DoNotOptimize(report.sp);
    }
}
BENCHMARK(BM_ZoneEvaluation)->Arg(1)->Arg(4);

static void BM_GridEvaluation11x11(benchmark::State& state) {
    const auto& data = eval_data();
    EvalOptions opt;
    opt.iou_thresholds = {0.5};
    opt.threads = static_cast<int>(state.range(0));
    for (auto _ : state) {
        const auto grid = grid_evaluation(data.ds, data.dets, 11, 11, opt);
        benchmark::DoNotOptimize(grid.cells.size());
    }
}
BENCHMARK(BM_GridEvaluation11x11)->Arg(1)->Arg(4);

static void BM_AtssAssign(benchmark::State& state) {
    const auto grid = AnchorGrid::build(640.0, 640.0, {8.0, 16.0, 32.0, 64.0, 128.0}, 8.0);
    auto gts = random_boxes(16, 17);
    for (auto& b : gts) {
        b.x *= 0.5;
        b.y *= 0.5;
    }
    for (auto _ : state) {
        const auto result = atss_assign(grid, gts, 9);
        benchmark::DoNotOptimize(result.positives_per_gt.size());
    }
}
BENCHMARK(BM_AtssAssign);

static void BM_SelaAssign(benchmark::State& state) {
    const auto grid = AnchorGrid::build(640.0, 640.0, {8.0, 16.0, 32.0, 64.0, 128.0}, 8.0);
    auto gts = random_boxes(16, 17);
    for (auto& b : gts) {
        b.x *= 0.5;
        b.y *= 0.5;
    }
    for (auto _ : state) {
        const auto result = sela_assign(grid, gts, 9, 0.2);
        benchmark::DoNotOptimize(result.positives_per_gt.size());
    }
}
BENCHMARK(BM_SelaAssign);

BENCHMARK_MAIN();
