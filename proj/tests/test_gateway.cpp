#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "dime/error.hpp"
#include "dime/external_model.hpp"
#include "dime/modality.hpp"
#include "dime/model.hpp"

#include <string>
#include <vector>

using namespace dime;

namespace {

const std::string kStub = DIME_STUB_PATH;

ModalityPair dense_pair(std::vector<double> a, std::vector<double> b) {
    return {ModalityValue::dense(std::move(a)), ModalityValue::dense(std::move(b))};
}

}  // namespace

TEST_CASE("echo stub handshake and loopback") {
    ExternalModelSession session(kStub + " --classes 2 --mode echo");
    CHECK(session.num_classes() == 2);
    REQUIRE(session.modality_kinds().size() == 2);
    CHECK(session.modality_kinds()[0] == ModalityValue::Kind::Dense);
    CHECK(session.modality_kinds()[1] == ModalityValue::Kind::Dense);

    const auto out = session.evaluate_batch({dense_pair({1, 2}, {10, 20})});
    REQUIRE(out.size() == 1);
    CHECK(out[0][0] == doctest::Approx(3.0));    // sum of x1
    CHECK(out[0][1] == doctest::Approx(30.0));   // sum of x2
    CHECK(session.alive());
}

TEST_CASE("product stub on signed scalars") {
    ExternalModelSession session(kStub + " --classes 1 --mode product");
    const auto out = session.evaluate_batch({dense_pair({1}, {1}), dense_pair({1}, {-1}),
                                             dense_pair({-1}, {1}), dense_pair({-1}, {-1})});
    REQUIRE(out.size() == 4);
    CHECK(out[0][0] == doctest::Approx(1.0));
    CHECK(out[1][0] == doctest::Approx(-1.0));
    CHECK(out[2][0] == doctest::Approx(-1.0));
    CHECK(out[3][0] == doctest::Approx(1.0));
}

TEST_CASE("token and grid payloads cross the wire") {
    ExternalModelSession session(kStub +
                                 " --classes 2 --mode additive --kinds token-sequence,grid-raster");
    CHECK(session.modality_kinds()[0] == ModalityValue::Kind::Tokens);
    CHECK(session.modality_kinds()[1] == ModalityValue::Kind::Grid);
    GridRaster g;
    g.rows = 2;
    g.cols = 2;
    g.cells = {1, 2, 3, 4};
    const auto out = session.evaluate_batch(
        {{ModalityValue::tokens_from_text("what color is it"), ModalityValue::grid(g)}});
    // additive stub: logit0 = 1*count(x1) - 0.5*sum(cells) = 4 - 5
    CHECK(out[0][0] == doctest::Approx(4.0 - 0.5 * 10.0));
}

TEST_CASE("wrong-length logits are a schema mismatch") {
    ExternalModelSession session(kStub + " --classes 2 --mode zero --bad-logits");
    CHECK_THROWS_AS(session.evaluate_batch({dense_pair({1}, {2})}), ProtocolError);
    CHECK_FALSE(session.alive());
}

TEST_CASE("mismatched response ids are a protocol error") {
    ExternalModelSession session(kStub + " --classes 2 --mode zero --wrong-id");
    CHECK_THROWS_AS(session.evaluate_batch({dense_pair({1}, {2})}), ProtocolError);
    CHECK_FALSE(session.alive());
}

TEST_CASE("mid-session crash carries the failing batch index and kills the session") {
    ExternalModelOptions options;
    options.max_pairs_per_request = 2;
    options.response_timeout_seconds = 10.0;
    ExternalModelSession session(kStub + " --classes 2 --mode zero --fail-after-requests 1",
                                 options);
    // 6 pairs -> 3 requests; the stub answers the first and dies on the second.
    std::vector<ModalityPair> pairs;
    for (int i = 0; i < 6; ++i) {
        pairs.push_back(dense_pair({static_cast<double>(i)}, {1}));
    }
    try {
        session.evaluate_batch(pairs);
        FAIL("expected GatewayError");
    } catch (const GatewayError& e) {
        CHECK(e.batch_index() == 2);
    }
    CHECK_FALSE(session.alive());
    CHECK_THROWS_AS(session.evaluate_batch({dense_pair({1}, {1})}), GatewayError);
}

TEST_CASE("handshake timeout") {
    ExternalModelOptions options;
    options.handshake_timeout_seconds = 0.3;
    CHECK_THROWS_AS(ExternalModelSession(kStub + " --stall", options), ProtocolError);
}

TEST_CASE("handshake schema validation") {
    CHECK_THROWS_AS(ExternalModelSession(kStub + " --classes 2 --kinds dense-vector"),
                    ProtocolError);
    CHECK_THROWS_AS(
        ExternalModelSession(kStub + " --classes 2 --kinds dense-vector,bogus-kind"),
        ProtocolError);
    CHECK_THROWS_AS(ExternalModelSession(kStub + " --classes 0"), ProtocolError);
    CHECK_THROWS_AS(ExternalModelSession("false"), ProtocolError);
}

TEST_CASE("counting wrapper tracks per-pair evaluations") {
    ExternalModelSession inner(kStub + " --classes 2 --mode zero");
    CountingModel counter(inner);
    CHECK(counter.num_classes() == 2);
    counter.evaluate_batch({dense_pair({1}, {2}), dense_pair({3}, {4})});
    counter.evaluate_batch({dense_pair({5}, {6})});
    CHECK(counter.evaluation_count() == 3);
    counter.reset_count();
    CHECK(counter.evaluation_count() == 0);
}
