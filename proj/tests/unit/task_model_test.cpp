#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include "crowdsched/csv.hpp"
#include "crowdsched/task_model.hpp"
#include "support.hpp"

namespace crowdsched {
namespace {

using testing::make_task;

const char* kThreeRows =
    "task_id,registration_start,registration_end,submission_end,winner_prize,runnerup_prize,task_type,"
    "technologies,platform_count,registrations,submissions,valid_submissions,requirement_text\n"
    "T1,0,5,14,500,250,Code,java|sql,1,10,3,1,build REST API\n"
    "T2,2,4,6,1000,,Assembly,java,2,4,0,0,\"fix, then deploy\"\n"
    "T3,6,9,9,0,0,Test,,1,0,0,0,\n";

TEST(TaskModel, ThreeRowCsvLoads) {
  const auto ds = parse_csv_dataset(kThreeRows);
  ASSERT_EQ(ds.tasks.size(), 3u);
  EXPECT_EQ(ds.tasks[0].technologies, (std::set<std::string>{"java", "sql"}));
  EXPECT_EQ(ds.tasks[1].requirement_text, "fix, then deploy");
  EXPECT_EQ(ds.tasks[1].runnerup_prize, 0.0);
  EXPECT_TRUE(ds.tasks[2].technologies.empty());
}

TEST(TaskModel, OrderingViolationNamesTask) {
  std::string text = kThreeRows;
  text += "BAD,10,12,8,100,0,Code,java,1,1,1,1,x\n";
  try {
    parse_csv_dataset(text);
    FAIL() << "expected DatasetError";
  } catch (const DatasetError& e) {
    ASSERT_EQ(e.task_ids().size(), 1u);
    EXPECT_EQ(e.task_ids()[0], "BAD");
    EXPECT_EQ(e.row(), 5);
    EXPECT_NE(std::string(e.what()).find("BAD"), std::string::npos);
  }
}

TEST(TaskModel, RecordInvariantsAreChecked) {
  auto base = make_task("A", 0, 2, 4);
  auto expect_bad = [](TaskRecord t) {
    Dataset ds;
    ds.tasks = {std::move(t)};
    EXPECT_THROW(validate_dataset(ds), DatasetError);
  };
  auto t = base;
  t.registration_end = 5;  // past submission_end
  expect_bad(t);
  t = base;
  t.valid_submissions = 3;  // more than submissions
  expect_bad(t);
  t = base;
  t.submissions = 6;  // more than registrations
  expect_bad(t);
  t = base;
  t.winner_prize = -1;
  expect_bad(t);
  t = base;
  t.runnerup_prize = -1;
  expect_bad(t);
  t = base;
  t.registration_start = -1;
  expect_bad(t);

  Dataset dup;
  dup.tasks = {base, base};
  EXPECT_THROW(validate_dataset(dup), DatasetError);
  EXPECT_THROW(validate_dataset(Dataset{}), DatasetError);
}

TEST(TaskModel, OutcomeFollowsValidSubmissions) {
  auto t = make_task("A", 0, 1, 2);
  t.valid_submissions = 0;
  EXPECT_TRUE(task_outcome(t).failed);
  t.valid_submissions = 1;
  EXPECT_FALSE(task_outcome(t).failed);
}

TEST(TaskModel, DurationAndPrize) {
  EXPECT_EQ(task_duration(make_task("A", 0, 0, 14)), 14);
  EXPECT_EQ(task_duration(make_task("A", 5, 5, 5)), 0);
  auto t = make_task("A", 0, 0, 1, 500);
  t.runnerup_prize = 250;
  EXPECT_EQ(actual_prize(t), 750.0);
  t.winner_prize = 0;
  t.runnerup_prize = 0;
  EXPECT_EQ(actual_prize(t), 0.0);
  t.winner_prize = 1000;
  EXPECT_EQ(actual_prize(t), 1000.0);
}

TEST(TaskModel, CsvRoundTripIsBitExact) {
  const auto& ds = testing::small_corpus().dataset;
  const std::string first = to_csv(ds);
  const auto back = parse_csv_dataset(first);
  EXPECT_EQ(back.tasks, ds.tasks);
  EXPECT_EQ(to_csv(back), first);
}

TEST(TaskModel, AwkwardTextSurvivesRoundTrip) {
  auto t = make_task("Q", 0, 1, 2);
  t.requirement_text = "line one\nline \"two\", with comma  ";
  t.winner_prize = 0.1 + 0.2;
  Dataset ds;
  ds.tasks = {t};
  const auto back = parse_csv_dataset(to_csv(ds));
  EXPECT_EQ(back.tasks[0], t);
  const auto from_json = parse_json_dataset(to_json(ds));
  EXPECT_EQ(from_json.tasks[0], t);
}

TEST(TaskModel, JsonRoundTrip) {
  const auto& ds = testing::small_corpus().dataset;
  const auto back = parse_json_dataset(to_json(ds));
  EXPECT_EQ(back.tasks, ds.tasks);
}

TEST(TaskModel, ShiftedMovesEveryDate) {
  const auto t = shifted(make_task("A", 3, 5, 9), 2);
  EXPECT_EQ(t.registration_start, 5);
  EXPECT_EQ(t.registration_end, 7);
  EXPECT_EQ(t.submission_end, 11);
}

TEST(TaskModel, CancelledTasksCanBeExcluded) {
  std::string text =
      "task_id,registration_start,registration_end,submission_end,winner_prize,runnerup_prize,task_type,"
      "technologies,platform_count,registrations,submissions,valid_submissions,requirement_text,cancelled\n"
      "A,0,1,2,10,0,Code,java,1,1,1,1,x,false\n"
      "B,0,1,2,10,0,Code,java,1,1,0,0,x,true\n";
  EXPECT_EQ(parse_csv_dataset(text).tasks.size(), 2u);
  EXPECT_EQ(parse_csv_dataset(text, {.exclude_cancelled = true}).tasks.size(), 1u);
}

TEST(TaskModel, MalformedFieldReportsLineAndField) {
  std::string text = kThreeRows;
  text += "T4,abc,1,2,10,0,Code,java,1,1,1,1,x\n";
  try {
    parse_csv_dataset(text);
    FAIL();
  } catch (const DatasetError& e) {
    EXPECT_EQ(e.row(), 5);
    EXPECT_EQ(e.field(), "registration_start");
  }
}

TEST(Csv, QuotedFieldsAndCrlf) {
  const auto rows = csv::parse("a,\"b,c\"\r\n\"d\"\"e\",\"f\ng\"\r\n");
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].fields[1], "b,c");
  EXPECT_EQ(rows[1].fields[0], "d\"e");
  EXPECT_EQ(rows[1].fields[1], "f\ng");
  EXPECT_EQ(rows[1].line, 2);
  EXPECT_THROW(csv::parse("\"open"), std::runtime_error);
}

TEST(FormatDouble, ShortestRoundTrip) {
  for (double v : {0.0, 0.1, 1.0 / 3.0, 1e-300, 123456789.125, 0.1 + 0.2}) {
    EXPECT_EQ(std::stod(format_double(v)), v);
  }
  EXPECT_EQ(format_double(0.1), "0.1");
}

}  // namespace
}  // namespace crowdsched
