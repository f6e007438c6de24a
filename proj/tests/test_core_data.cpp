#include <pearl/dataset.hpp>
#include <pearl/folds.hpp>
#include <pearl/seed.hpp>

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

using namespace pearl;

namespace {

std::vector<Index> sorted_sizes(const FoldPlan& plan)
{
    auto s = plan.sizes();
    std::sort(s.begin(), s.end(), std::greater<>());
    return s;
}

} // namespace

TEST(Dataset, ParsesThreeRows)
{
    std::istringstream in("y,a,x1,x2\n1.5,1,0.1,0.2\n-2,-1,3,4\n0,1,5,6\n");
    const auto d = parse_dataset(in, {});
    EXPECT_EQ(d.n(), 3);
    EXPECT_EQ(d.p(), 2);
    EXPECT_EQ(d.column_name(1), "x2");
    EXPECT_EQ(d.a()(1), -1);
    EXPECT_DOUBLE_EQ(d.y()(0), 1.5);
    EXPECT_DOUBLE_EQ(d.x()(2, 1), 6.0);
}

TEST(Dataset, RecodesZeroOneTreatment)
{
    ColumnSpec spec;
    spec.treatment = "trt";
    spec.outcome = "out";
    spec.treatment_coding = {{"0", -1}, {"1", 1}};
    std::istringstream in("trt,out,z\n0,1,2\n1,3,4\n1,5,6\n");
    const auto d = parse_dataset(in, spec);
    EXPECT_EQ(d.a()(0), -1);
    EXPECT_EQ(d.a()(1), 1);
    EXPECT_EQ(d.a()(2), 1);
    EXPECT_EQ(d.p(), 1);
}

TEST(Dataset, NaNNamesRowAndColumn)
{
    std::istringstream in("y,a,x1,x2\n1,1,0,0\n1,-1,NaN,0\n");
    try {
        parse_dataset(in, {});
        FAIL() << "expected a validation error";
    } catch (const ValidationError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("row 2"), std::string::npos) << msg;
        EXPECT_NE(msg.find("x1"), std::string::npos) << msg;
    }
}

TEST(Dataset, RejectsBadRowsAndCodes)
{
    std::istringstream short_row("y,a,x1\n1,1\n");
    EXPECT_THROW(parse_dataset(short_row, {}), ValidationError);
    std::istringstream bad_code("y,a,x1\n1,2,0\n");
    EXPECT_THROW(parse_dataset(bad_code, {}), ValidationError);
    std::istringstream inf("y,a,x1\n1,1,inf\n");
    EXPECT_THROW(parse_dataset(inf, {}), ValidationError);
    EXPECT_THROW(load_dataset("/nonexistent/file.csv"), IoError);
}

TEST(Dataset, WriteReloadIsExact)
{
    Matrix x(2, 2);
    x << 0.1, 1.0 / 3.0, -2.5e-17, 7.0;
    Eigen::VectorXi a(2);
    a << 1, -1;
    Vector y(2);
    y << std::acos(-1.0), -0.2;
    const Dataset d(x, a, y);
    std::stringstream buf;
    write_dataset(buf, d);
    const auto back = parse_dataset(buf, {});
    EXPECT_EQ(back.x(), d.x());
    EXPECT_EQ(back.y(), d.y());
    EXPECT_EQ(back.a(), d.a());
}

TEST(Folds, SizesFollowDivision)
{
    EXPECT_EQ(sorted_sizes(make_folds(10, 3, SeedStream(1))), (std::vector<Index>{4, 3, 3}));
    EXPECT_EQ(sorted_sizes(make_folds(9, 3, SeedStream(1))), (std::vector<Index>{3, 3, 3}));
}

TEST(Folds, DeterministicAndPartition)
{
    const auto a = make_folds(57, 5, SeedStream(9).derive("folds"));
    const auto b = make_folds(57, 5, SeedStream(9).derive("folds"));
    EXPECT_EQ(a.assignments(), b.assignments());
    const auto c = make_folds(57, 5, SeedStream(9).derive("other"));
    EXPECT_NE(a.assignments(), c.assignments());

    std::set<Index> seen;
    for (int k = 0; k < a.folds(); ++k) {
        const auto rows = a.indices(k);
        EXPECT_TRUE(rows.size() == 11 || rows.size() == 12);
        for (Index i : rows)
            EXPECT_TRUE(seen.insert(i).second);
        EXPECT_EQ(rows.size() + a.complement(k).size(), 57u);
    }
    EXPECT_EQ(seen.size(), 57u);
}

TEST(Folds, RejectsBadK)
{
    EXPECT_THROW(make_folds(10, 1, SeedStream(1)), ValidationError);
    EXPECT_THROW(make_folds(3, 4, SeedStream(1)), ValidationError);
}

TEST(Split, HalfSizes)
{
    const auto h = split_half(100, 0.5, SeedStream(3));
    EXPECT_EQ(h.first.size(), 50u);
    EXPECT_EQ(h.second.size(), 50u);

    const auto odd = split_half(101, 0.5, SeedStream(3));
    const auto again = split_half(101, 0.5, SeedStream(3));
    EXPECT_EQ(odd.first, again.first);
    const std::set<std::size_t> sizes{odd.first.size(), odd.second.size()};
    EXPECT_EQ(sizes, (std::set<std::size_t>{50, 51}));

    std::vector<Index> all(odd.first);
    all.insert(all.end(), odd.second.begin(), odd.second.end());
    std::sort(all.begin(), all.end());
    for (Index i = 0; i < 101; ++i)
        EXPECT_EQ(all[static_cast<std::size_t>(i)], i);

    EXPECT_THROW(split_half(1, 0.5, SeedStream(3)), ValidationError);
    EXPECT_THROW(split_half(10, 1.0, SeedStream(3)), ValidationError);
}

TEST(Seed, PathsAreDistinctAndStable)
{
    const SeedStream root(42);
    EXPECT_EQ(root.derive("x").key(), SeedStream(42).derive("x").key());
    EXPECT_NE(root.derive("x").key(), root.derive("y").key());
    EXPECT_NE(root.derive("r", 1).key(), root.derive("r", 2).key());
    EXPECT_NE(root.derive("a").derive("b").key(), root.derive("b").derive("a").key());
    auto e1 = root.derive("x").engine();
    auto e2 = root.derive("x").engine();
    for (int i = 0; i < 10; ++i)
        EXPECT_EQ(e1(), e2());
}
