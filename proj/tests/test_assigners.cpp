#include <doctest.h>

#include <cmath>
#include <random>

#include "zoneval/assigners.hpp"
#include "zoneval/errors.hpp"

using namespace zoneval;

namespace {

// 64x64 image, stride 32, scale 2: four 64px anchors centered on
// (0,0), (32,0), (0,32), (32,32).
AnchorGrid tiny_grid() {
    return AnchorGrid::build(64.0, 64.0, {32.0}, 2.0);
}

bool results_equal(const AssignmentResult& a, const AssignmentResult& b) {
    return a.labels == b.labels && a.loss_weight == b.loss_weight &&
           a.positives_per_gt == b.positives_per_gt && a.gt_threshold == b.gt_threshold;
}

}  // namespace

TEST_CASE("anchor grid construction") {
    const auto grid = AnchorGrid::build(640.0, 640.0, {8.0, 16.0, 32.0}, 8.0);
    REQUIRE(grid.levels.size() == 3);
    CHECK(grid.levels[0].centers.size() == 80 * 80);
    CHECK(grid.levels[1].centers.size() == 40 * 40);
    CHECK(grid.levels[2].centers.size() == 20 * 20);
    CHECK(grid.total == 6400 + 1600 + 400);
    for (const auto& level : grid.levels) {
        for (const auto& c : level.centers) {
            CHECK(c.x >= 0.0);
            CHECK(c.x <= 640.0);
            CHECK(c.y >= 0.0);
            CHECK(c.y <= 640.0);
        }
        CHECK(level.boxes.front().w == level.stride * 8.0);
    }
    CHECK_THROWS_AS(AnchorGrid::build(0.0, 10.0, {8.0}, 8.0), ConfigError);
    CHECK_THROWS_AS(AnchorGrid::build(64.0, 64.0, {}, 8.0), ConfigError);
    CHECK_THROWS_AS(AnchorGrid::build(64.0, 64.0, {8.0}, 0.0), ConfigError);
}

TEST_CASE("atss_threshold arithmetic") {
    const std::vector<double> nine{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
    // mean 0.5, population std sqrt(0.6/9)
    CHECK(atss_threshold(nine) == doctest::Approx(0.7582).epsilon(1e-4));
    CHECK(atss_threshold({0.42}) == doctest::Approx(0.42).epsilon(1e-15));
    CHECK_THROWS_AS(atss_threshold({}), InputError);

    // The relaxation rule on the worked numbers: IoU 0.60 fails the plain
    // threshold but passes it once relaxed by gamma*alpha = 0.2.
    const double t = atss_threshold(nine);
    CHECK(0.60 < t);
    CHECK(0.60 >= t - 0.2 * 1.0);
}

TEST_CASE("max_iou_assign") {
    const auto grid = tiny_grid();

    SUBCASE("anchor identical to GT is positive") {
        const std::vector<BBox> gts{BBox{0, 0, 64, 64}};  // anchor (32,32)'s box
        const auto result = max_iou_assign(grid, gts, 0.5, 0.3);
        CHECK(result.labels[3] == 0);
        CHECK(result.positives_per_gt[0] >= 1);
        CHECK(std::isnan(result.gt_threshold[0]));
    }

    SUBCASE("threshold bands: positive / ignore / negative") {
        const std::vector<BBox> gts{BBox{0, 0, 64, 64}};
        // IoUs to the four anchors: 1/7, 1/3, 1/3, 1.0
        const auto result = max_iou_assign(grid, gts, 0.5, 0.3);
        CHECK(result.labels[0] == AssignmentResult::kNegative);
        CHECK(result.labels[1] == AssignmentResult::kIgnore);
        CHECK(result.labels[2] == AssignmentResult::kIgnore);
        CHECK(result.labels[3] == 0);
    }

    SUBCASE("anchor disjoint from all GTs is negative") {
        const std::vector<BBox> gts{BBox{0, 0, 10, 10}};
        const auto result = max_iou_assign(grid, gts, 0.5, 0.3);
        // anchor (32,32) box [0,64]^2 overlaps; anchor centers away still
        // overlap in this tiny grid, so check the far corner anchor via a
        // bigger grid instead.
        const auto wide = AnchorGrid::build(256.0, 256.0, {32.0}, 1.0);
        const auto r2 = max_iou_assign(wide, gts, 0.5, 0.3);
        bool saw_negative = false;
        for (std::size_t a = 0; a < wide.total; ++a) {
            const auto& box = wide.box(a);
            if (iou(box, gts[0]) == 0.0) {
                CHECK(r2.labels[a] == AssignmentResult::kNegative);
                saw_negative = true;
            }
        }
        CHECK(saw_negative);
        (void)result;
    }

    SUBCASE("low-quality rescue claims the best anchor") {
        const std::vector<BBox> gts{BBox{20, 20, 24, 24}};  // max IoU well below 0.5
        const auto result = max_iou_assign(grid, gts, 0.9, 0.85);
        CHECK(result.positives_per_gt[0] == 1);
    }

    SUBCASE("bad thresholds rejected") {
        CHECK_THROWS_AS(max_iou_assign(grid, {}, 0.3, 0.5), ConfigError);
    }
}

TEST_CASE("atss_assign") {
    SUBCASE("single candidate: threshold equals its IoU") {
        const auto grid = tiny_grid();
        const std::vector<BBox> gts{BBox{0, 0, 64, 64}};
        const auto result = atss_assign(grid, gts, 1);
        CHECK(result.gt_threshold[0] == doctest::Approx(1.0).epsilon(1e-15));
        CHECK(result.positives_per_gt[0] == 1);
        CHECK(result.labels[3] == 0);
    }

    SUBCASE("GT containing no anchor centers gets no positives") {
        const auto grid = tiny_grid();
        const std::vector<BBox> gts{BBox{5, 5, 20, 20}};  // centers at 0/32 all outside
        const auto result = atss_assign(grid, gts, 4);
        CHECK(result.positives_per_gt[0] == 0);
    }

    SUBCASE("threshold stays within candidate IoU bounds") {
        std::mt19937 rng(13);
        std::uniform_real_distribution<double> pos(40.0, 560.0);
        std::uniform_real_distribution<double> size(30.0, 120.0);
        const auto grid = AnchorGrid::build(640.0, 640.0, {8.0, 16.0, 32.0}, 8.0);
        for (int trial = 0; trial < 20; ++trial) {
            const double w = size(rng);
            const double h = size(rng);
            const std::vector<BBox> gts{BBox{pos(rng) - w / 2, pos(rng) - h / 2, w, h}};
            const auto result = atss_assign(grid, gts, 9);
            // recompute candidate IoU range by scanning all anchors
            double max_iou = 0.0;
            for (std::size_t a = 0; a < grid.total; ++a) {
                max_iou = std::max(max_iou, iou(grid.box(a), gts[0]));
            }
            CHECK(result.gt_threshold[0] >= 0.0);
            CHECK(result.gt_threshold[0] <= 2.0 * max_iou + 1e-12);  // mean+std <= 2*max
        }
    }

    SUBCASE("empty grid rejected") {
        AnchorGrid empty;
        CHECK_THROWS_AS(atss_assign(empty, {}, 9), InputError);
        const auto grid = tiny_grid();
        CHECK_THROWS_AS(atss_assign(grid, {}, 0), ConfigError);
    }

    SUBCASE("conflicting anchor goes to the higher-IoU GT") {
        const auto grid = tiny_grid();
        // Both GTs pull in anchor (32,32); the second overlaps it more.
        const std::vector<BBox> gts{BBox{8, 8, 56, 56}, BBox{2, 2, 62, 62}};
        const auto result = atss_assign(grid, gts, 4);
        const double iou0 = iou(grid.box(3), gts[0]);
        const double iou1 = iou(grid.box(3), gts[1]);
        REQUIRE(iou1 > iou0);
        if (result.labels[3] >= 0) {
            CHECK(result.labels[3] == 1);
        }
    }
}

TEST_CASE("sela_assign") {
    SUBCASE("gamma zero reproduces ATSS bit for bit") {
        std::mt19937 rng(21);
        std::uniform_real_distribution<double> pos(30.0, 600.0);
        std::uniform_real_distribution<double> size(24.0, 150.0);
        for (int trial = 0; trial < 10; ++trial) {
            const auto grid = AnchorGrid::build(640.0, 640.0, {8.0, 16.0, 32.0}, 8.0);
            std::vector<BBox> gts;
            for (int g = 0; g < 3; ++g) {
                const double w = size(rng);
                const double h = size(rng);
                gts.push_back(BBox{pos(rng) - w / 2, pos(rng) - h / 2, w, h});
            }
            CHECK(results_equal(atss_assign(grid, gts, 9), sela_assign(grid, gts, 9, 0.0)));
        }
    }

    SUBCASE("per-GT positives are non-decreasing in gamma on separated GTs") {
        const auto grid = AnchorGrid::build(640.0, 640.0, {8.0, 16.0, 32.0}, 8.0);
        const std::vector<BBox> gts{
            BBox{60, 60, 80, 80},    // near top-left border
            BBox{280, 280, 80, 80},  // center
            BBox{500, 500, 80, 80},  // near bottom-right border
        };
        std::vector<std::int64_t> prev(gts.size(), -1);
        for (double gamma : {0.0, 0.1, 0.2, 0.3, 0.4}) {
            const auto result = sela_assign(grid, gts, 9, gamma);
            for (std::size_t g = 0; g < gts.size(); ++g) {
                if (prev[g] >= 0) {
                    CHECK(result.positives_per_gt[g] >= prev[g]);
                }
                prev[g] = result.positives_per_gt[g];
            }
        }
        // Relaxation must actually add positives for a border GT at the top
        // gamma, otherwise this fixture tests nothing.
        const auto base = atss_assign(grid, gts, 9);
        const auto relaxed = sela_assign(grid, gts, 9, 0.4);
        CHECK(relaxed.positives_per_gt[0] > base.positives_per_gt[0]);
    }

    SUBCASE("exactly centered candidate is gamma invariant") {
        const auto grid = AnchorGrid::build(640.0, 640.0, {8.0, 16.0, 32.0}, 8.0);
        const std::vector<BBox> gts{BBox{288, 288, 64, 64}};  // centered at (320,320)
        const auto base = atss_assign(grid, gts, 1);
        for (double gamma : {0.1, 0.2, 0.4}) {
            const auto relaxed = sela_assign(grid, gts, 1, gamma);
            CHECK(results_equal(base, relaxed));
        }
    }

    SUBCASE("negative gamma rejected") {
        CHECK_THROWS_AS(sela_assign(tiny_grid(), {}, 9, -0.1), ConfigError);
    }
}

TEST_CASE("sela_loss_weight") {
    const double W = 640.0;
    const double H = 480.0;
    CHECK(sela_loss_weight({W / 2, H / 2}, W, H, 0.3) == 1.0);
    CHECK(sela_loss_weight({0.0, 0.0}, W, H, 0.1) == doctest::Approx(1.1).epsilon(1e-12));
    CHECK(sela_loss_weight({W / 4, H / 2}, W, H, 0.2) == doctest::Approx(1.1).epsilon(1e-12));
    CHECK_THROWS_AS(sela_loss_weight({0.0, 0.0}, W, H, -1.0), ConfigError);
}

TEST_CASE("cost-sensitive strategy weights positives only") {
    const auto grid = AnchorGrid::build(640.0, 640.0, {8.0, 16.0, 32.0}, 8.0);
    const std::vector<BBox> gts{BBox{40, 280, 80, 80}};
    AssignConfig config;
    config.strategy = AssignStrategy::SelaCost;
    config.gamma = 0.2;
    const auto result = assign(grid, gts, config);

    const auto plain = atss_assign(grid, gts, config.top_k);
    CHECK(result.labels == plain.labels);  // selection is unchanged
    bool saw_weighted = false;
    for (std::size_t a = 0; a < grid.total; ++a) {
        if (result.labels[a] >= 0) {
            const double expected =
                sela_loss_weight(grid.center(a), 640.0, 640.0, config.gamma);
            CHECK(result.loss_weight[a] == expected);
            CHECK(result.loss_weight[a] >= 1.0);
            if (result.loss_weight[a] > 1.0) {
                saw_weighted = true;
            }
        } else {
            CHECK(result.loss_weight[a] == 1.0);
        }
    }
    CHECK(saw_weighted);
}

TEST_CASE("assignment_zone_stats") {
    const auto grid = AnchorGrid::build(640.0, 640.0, {8.0, 16.0, 32.0}, 8.0);

    SUBCASE("GT counts land in the right rings") {
        const std::vector<BBox> gts{BBox{288, 288, 64, 64}};  // image center
        const auto result = atss_assign(grid, gts, 9);
        const auto stats = assignment_zone_stats(result, gts, annular_zones(5));
        CHECK(stats.gt_count == std::vector<std::int64_t>{0, 0, 0, 0, 1});
        for (int i = 0; i < 4; ++i) {
            CHECK(stats.positives[i] == 0);
            CHECK_FALSE(stats.mean_positives_per_gt[i].has_value());
        }
        CHECK(stats.positives[4] == result.positives_per_gt[0]);
    }

    SUBCASE("discard-left filter zeroes the left half") {
        const std::vector<BBox> gts{BBox{60, 280, 80, 80}, BBox{500, 280, 80, 80}};
        AssignConfig config;
        config.zone_filter = ZoneFilter{FilterMode::Discard, HalfRegion::Left};
        const auto result = assign(grid, gts, config);
        CHECK(result.positives_per_gt[0] == 0);
        CHECK(std::isnan(result.gt_threshold[0]));
        CHECK(result.positives_per_gt[1] > 0);

        const auto stats = assignment_zone_stats(result, gts, grid_zones(1, 2));
        CHECK(stats.gt_count == std::vector<std::int64_t>{1, 1});
        CHECK(stats.positives[0] == 0);
        CHECK(stats.positives[1] > 0);
    }

    SUBCASE("keep-one filter caps filtered GTs at one positive") {
        const std::vector<BBox> gts{BBox{60, 280, 80, 80}, BBox{500, 280, 80, 80}};
        AssignConfig config;
        config.zone_filter = ZoneFilter{FilterMode::KeepOne, HalfRegion::Left};
        const auto unfiltered = assign(grid, gts, AssignConfig{});
        REQUIRE(unfiltered.positives_per_gt[0] > 1);
        const auto result = assign(grid, gts, config);
        CHECK(result.positives_per_gt[0] == 1);
        CHECK(result.positives_per_gt[1] == unfiltered.positives_per_gt[1]);
    }

    SUBCASE("SELA lifts border-zone sampling over ATSS") {
        const std::vector<BBox> gts{BBox{20, 280, 80, 80}, BBox{288, 288, 64, 64}};
        const auto rings = annular_zones(5);
        const auto atss_stats =
            assignment_zone_stats(atss_assign(grid, gts, 9), gts, rings);
        const auto sela_stats =
            assignment_zone_stats(sela_assign(grid, gts, 9, 0.4), gts, rings);
        REQUIRE(atss_stats.mean_positives_per_gt[0].has_value());
        REQUIRE(sela_stats.mean_positives_per_gt[0].has_value());
        CHECK(*sela_stats.mean_positives_per_gt[0] > *atss_stats.mean_positives_per_gt[0]);
    }

    SUBCASE("result must match the GT list") {
        const std::vector<BBox> gts{BBox{60, 280, 80, 80}};
        const auto result = atss_assign(grid, gts, 9);
        CHECK_THROWS_AS(assignment_zone_stats(result, {}, annular_zones(5)), InputError);
    }
}

TEST_CASE("scene files") {
    SUBCASE("full scene parses") {
        const char* text = R"({
          "image": {"width": 640, "height": 640},
          "anchors": {"strides": [8, 16, 32], "scale": 8},
          "gts": [{"bbox": [20, 280, 80, 80]}, {"bbox": [288, 288, 64, 64]}]
        })";
        const Scene scene = parse_scene(text);
        CHECK(scene.width == 640.0);
        CHECK(scene.strides == std::vector<double>{8, 16, 32});
        CHECK(scene.gts.size() == 2);
        const auto grid = scene.build_grid();
        CHECK(grid.total == 6400 + 1600 + 400);
    }

    SUBCASE("defaults apply when anchors omitted") {
        const Scene scene = parse_scene(
            R"({"image": {"width": 256, "height": 256}, "gts": []})");
        CHECK(scene.strides == std::vector<double>{8, 16, 32, 64, 128});
        CHECK(scene.scale == 8.0);
    }

    SUBCASE("schema errors") {
        CHECK_THROWS_AS(parse_scene("{"), ParseError);
        CHECK_THROWS_AS(parse_scene(R"({"gts": []})"), SchemaError);
        CHECK_THROWS_AS(parse_scene(R"({"image": {"width": 10, "height": 10}})"),
                        SchemaError);
        CHECK_THROWS_AS(
            parse_scene(
                R"({"image": {"width": 64, "height": 64}, "gts": [{"bbox": [0, 0, 2]}]})"),
            SchemaError);
        CHECK_THROWS_AS(
            parse_scene(
                R"({"image": {"width": 64, "height": 64}, "gts": [{"bbox": [200, 0, 4, 4]}]})"),
            RangeError);
    }
}
