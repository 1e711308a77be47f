#include <doctest.h>

#include "winres/records.hpp"

using namespace winres;

namespace {

LongRow row(const std::string& id, int arm, double time, int status, int type) {
  LongRow r;
  r.id = id;
  r.arm = arm;
  r.time = time;
  r.status = status;
  r.event_type = type;
  r.covariates = Eigen::VectorXd::Zero(1);
  return r;
}

}  // namespace

TEST_CASE("censored follow-up with no component events") {
  std::vector<LongRow> rows = {row("a", 1, 10.0, 0, 0)};
  auto recs = restrict_records(rows, 12.0, {1, 2});
  REQUIRE(recs.size() == 1);
  const auto& r = recs[0];
  CHECK(r.y_tilde == std::vector<double>{10.0, 10.0});
  CHECK(r.delta == std::vector<int>{0, 0});
  CHECK(r.bar_delta == std::vector<int>{1, 1});
  CHECK(r.gate_u == std::vector<double>{12.0, 10.0});
  CHECK(r.censor_status == 1);
  CHECK(r.censor_time == 10.0);
}

TEST_CASE("top-priority event closes the gate below it") {
  std::vector<LongRow> rows = {row("a", 0, 11.0, 0, 0), row("a", 0, 5.0, 1, 1)};
  auto recs = restrict_records(rows, 12.0, {1, 2});
  const auto& r = recs[0];
  CHECK(r.y_tilde[0] == 5.0);
  CHECK(r.delta[0] == 1);
  CHECK(r.bar_delta[1] == 0);
  CHECK(r.gate_u[1] == 12.0);  // convention when the gate is already closed
}

TEST_CASE("second-priority event observed before censoring") {
  std::vector<LongRow> rows = {row("a", 1, 7.0, 0, 0), row("a", 1, 3.0, 1, 2)};
  auto recs = restrict_records(rows, 12.0, {1, 2});
  const auto& r = recs[0];
  CHECK(r.y_tilde == std::vector<double>{7.0, 3.0});
  CHECK(r.delta == std::vector<int>{0, 1});
  CHECK(r.bar_delta == std::vector<int>{1, 1});
  CHECK(r.gate_u == std::vector<double>{12.0, 7.0});
}

TEST_CASE("follow-up at or beyond tau is complete observation") {
  std::vector<LongRow> rows = {row("a", 1, 40.0, 0, 0), row("b", 1, 12.0, 0, 0),
                               row("c", 1, 9.0, 1, 0)};
  auto recs = restrict_records(rows, 12.0, {1, 2});
  for (const auto& r : recs) {
    CHECK(r.censor_status == 0);
    // status 1 before tau means followed beyond the recorded end: the subject
    // is treated as completely observed through tau
    CHECK(r.y_tilde[0] == 12.0);
  }
  // the censoring-model observation is still masked at the recorded end
  CHECK(recs[2].censor_time == 9.0);
  CHECK(recs[0].censor_time == 12.0);
}

TEST_CASE("events exactly at tau count as observed") {
  std::vector<LongRow> rows = {row("a", 1, 20.0, 0, 0), row("a", 1, 12.0, 1, 1)};
  auto recs = restrict_records(rows, 12.0, {1, 2});
  CHECK(recs[0].delta[0] == 1);
  CHECK(recs[0].y_tilde[0] == 12.0);
}

TEST_CASE("ingestion errors") {
  // no follow-up row
  CHECK_THROWS_AS(restrict_records({row("a", 1, 5.0, 1, 1)}, 12.0, {1, 2}),
                  std::invalid_argument);
  // duplicate component rows
  CHECK_THROWS_AS(restrict_records({row("a", 1, 9.0, 0, 0), row("a", 1, 2.0, 1, 1),
                                    row("a", 1, 3.0, 1, 1)},
                                   12.0, {1, 2}),
                  std::invalid_argument);
  // component event after follow-up end
  CHECK_THROWS_AS(restrict_records({row("a", 1, 5.0, 0, 0), row("a", 1, 7.0, 1, 1)},
                                   12.0, {1, 2}),
                  std::invalid_argument);
  // duplicate follow-up row
  CHECK_THROWS_AS(restrict_records({row("a", 1, 5.0, 0, 0), row("a", 1, 6.0, 0, 0)},
                                   12.0, {1, 2}),
                  std::invalid_argument);
  // event_type 0 listed as a component
  CHECK_THROWS_AS(restrict_records({row("a", 1, 5.0, 0, 0)}, 12.0, {0, 1}),
                  std::invalid_argument);
}

TEST_CASE("record order follows first appearance and ignores unknown event types") {
  std::vector<LongRow> rows = {row("b", 1, 9.0, 0, 0), row("a", 0, 8.0, 0, 0),
                               row("b", 1, 2.0, 1, 7)};
  auto recs = restrict_records(rows, 12.0, {1, 2});
  REQUIRE(recs.size() == 2);
  CHECK(recs[0].subject_id == "b");
  CHECK(recs[1].subject_id == "a");
  CHECK(recs[0].delta == std::vector<int>{0, 0});  // event_type 7 is outside the hierarchy
}
