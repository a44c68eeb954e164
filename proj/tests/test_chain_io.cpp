#include <gtest/gtest.h>

#include <limits>
#include <sstream>

#include "histbayes/chain_io.hpp"

using namespace histbayes;

namespace {

Chain make(std::vector<double> draws, std::size_t stream) {
    Chain c;
    c.param_names = {"mu", "bkg_norm"};
    c.n_draws = draws.size() / 2;
    c.draws = std::move(draws);
    c.stream = stream;
    return c;
}

std::vector<Chain> read(const std::string& text) {
    std::istringstream in(text);
    return read_chains_csv(in);
}

}  // namespace

TEST(ChainCsv, RoundTripIsBitExact) {
    const double awkward[] = {0.1, 1.0 / 3.0, 1e-300, std::numeric_limits<double>::denorm_min(), 123456789.123456789,
                              std::nextafter(1.0, 2.0)};
    std::vector<double> a(std::begin(awkward), std::end(awkward));
    const std::vector<Chain> chains{make(a, 0), make({2.0, 3.0, 4.0, 5.0}, 1)};
    std::ostringstream out;
    write_chains_csv(out, chains);
    const auto back = read(out.str());
    ASSERT_EQ(back.size(), 2u);
    for (std::size_t c = 0; c < 2; ++c) {
        EXPECT_EQ(back[c].param_names, chains[c].param_names);
        EXPECT_EQ(back[c].n_draws, chains[c].n_draws);
        EXPECT_EQ(back[c].draws, chains[c].draws);
        EXPECT_EQ(back[c].stream, c);
    }
}

TEST(ChainCsv, HeaderLayout) {
    std::ostringstream out;
    write_chains_csv(out, {make({1.5, 2.0}, 0)});
    EXPECT_EQ(out.str(), "chain,draw,mu,bkg_norm\n0,0,1.5,2\n");
}

TEST(ChainCsv, AcceptsCrlf) {
    const auto c = read("chain,draw,mu\r\n0,0,1.5\r\n0,1,2\r\n");
    ASSERT_EQ(c.size(), 1u);
    EXPECT_EQ(c[0].draws, (std::vector<double>{1.5, 2.0}));
}

TEST(ChainCsv, MalformedInput) {
    EXPECT_THROW(read(""), SchemaError);
    EXPECT_THROW(read("a,b,c\n"), SchemaError);
    EXPECT_THROW(read("chain,draw\n"), SchemaError);
    EXPECT_THROW(read("chain,draw,mu\n0,0\n"), SchemaError);
    EXPECT_THROW(read("chain,draw,mu\n0,0,abc\n"), SchemaError);
    EXPECT_THROW(read("chain,draw,mu\n0,1,1.0\n"), SchemaError);
    EXPECT_THROW(read("chain,draw,mu\n"), InsufficientDataError);
    std::ostringstream out;
    EXPECT_THROW(write_chains_csv(out, {}), EmptyChainError);
}
