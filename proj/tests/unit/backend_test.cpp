#include "tdump/backend.hpp"

#include <gtest/gtest.h>

#include <bit>
#include <thread>

#include "fixtures.hpp"
#include "tdump/error.hpp"
#include "tdump/reference_backend.hpp"

namespace tdump {
namespace {

std::vector<Row> query_all(Connector& c, const std::string& sql) {
  auto cursor = c.query(sql);
  std::vector<Row> out;
  Row row;
  while (cursor->next(row)) out.push_back(row);
  return out;
}

ErrorCode error_code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorCode::kIo;
}

// ---------------------------------------------------------------------------
// map_cell

TEST(MapCell, SupportedKinds) {
  EXPECT_EQ(map_cell(native::Null{}), Value::null());
  EXPECT_EQ(map_cell(native::Integer{-3}), Value::integer(-3));
  EXPECT_EQ(map_cell(native::Float64{2.5}), Value::real(2.5));
  EXPECT_EQ(map_cell(native::Text{"é"}), Value::text("é"));
  EXPECT_EQ(map_cell(native::Octets{{0, 255}}), Value::bytes({0, 255}));
}

TEST(MapCell, Float32WidensExactly) {
  const auto v = map_cell(native::Float32{1.3273f});
  EXPECT_EQ(std::bit_cast<std::uint64_t>(v.as_float()), std::bit_cast<std::uint64_t>(1.327299952507019));
  EXPECT_EQ(map_cell(native::Float32{-0.0f}), Value::real(-0.0));
}

TEST(MapCell, WideIntegers) {
  EXPECT_EQ(map_cell(native::WideInteger{false, 42, 0}), Value::integer(42));
  EXPECT_EQ(map_cell(native::WideInteger{true, 1ull << 63, 0}), Value::integer(INT64_MIN));
  EXPECT_THROW(map_cell(native::WideInteger{false, 1ull << 63, 0}), UnsupportedTypeError);
  EXPECT_THROW(map_cell(native::WideInteger{false, 0, 1}), UnsupportedTypeError);
}

TEST(MapCell, RejectsUnserializableTypes) {
  const std::vector<std::pair<NativeCell, std::string>> cases = {
      {native::Date{1993, 11, 22}, "date"},
      {native::Timestamp{1993, 11, 22, 0, 0, 0, 0}, "timestamp"},
      {native::Decimal{12345, 2}, "decimal"},
      {native::BlobHandle{1}, "blob"},
      {native::Text{"\xFF"}, "varchar (not valid UTF-8)"},
  };
  for (const auto& [cell, name] : cases) {
    try {
      map_cell(cell);
      ADD_FAILURE() << name;
    } catch (const UnsupportedTypeError& e) {
      EXPECT_EQ(e.code(), ErrorCode::kUnsupportedType);
      EXPECT_EQ(e.type_name(), name);
      EXPECT_NE(std::string(e.what()).find("cast this column to text in select_sql"), std::string::npos);
    }
  }
}

// Every alternative yields a Value or UnsupportedType, nothing else.
TEST(MapCell, TotalOverNativeUniverse) {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 5000; ++i) {
    NativeCell cell;
    switch (rng() % std::variant_size_v<NativeCell>) {
      case 0:
        cell = native::Null{};
        break;
      case 1:
        cell = native::Integer{static_cast<std::int64_t>(rng())};
        break;
      case 2:
        cell = native::WideInteger{rng() % 2 == 0, rng(), rng() % 3 == 0 ? rng() : 0};
        break;
      case 3:
        cell = native::Float32{std::bit_cast<float>(static_cast<std::uint32_t>(rng()))};
        break;
      case 4:
        cell = native::Float64{std::bit_cast<double>(rng())};
        break;
      case 5:
        cell = native::Text{std::string(1, static_cast<char>(rng()))};
        break;
      case 6:
        cell = native::Octets{{static_cast<std::uint8_t>(rng())}};
        break;
      case 7:
        cell = native::Date{1990, 1, 1};
        break;
      case 8:
        cell = native::Timestamp{1990, 1, 1, 1, 1, 1, 1};
        break;
      case 9:
        cell = native::Decimal{static_cast<std::int64_t>(rng()), 2};
        break;
      default:
        cell = native::BlobHandle{rng()};
        break;
    }
    try {
      map_cell(cell);
    } catch (const UnsupportedTypeError&) {
    } catch (...) {
      ADD_FAILURE() << "unexpected exception for " << native_type_name(cell);
    }
  }
}

// ---------------------------------------------------------------------------
// Reference backend

class ReferenceBackend : public ::testing::Test {
 protected:
  void SetUp() override {
    db_ = ReferenceDatabase::create();
    db_->execute_script(testing::kCrossRateScript);
  }
  std::shared_ptr<ReferenceDatabase> db_;
};

TEST_F(ReferenceBackend, CrossRateScriptLoads) {
  EXPECT_EQ(db_->dialect(), 1);
  EXPECT_EQ(db_->row_count("cross_rate"), 13u);
  EXPECT_EQ(db_->row_count("CROSS_RATE"), 13u);
  const auto& def = db_->table_def("cross_rate");
  EXPECT_EQ(def.primary_key, (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(def.columns[2].kind, ColumnKind::kFloat);
}

TEST_F(ReferenceBackend, TextCastSelectMatchesOriginalDump) {
  auto c = db_->connect();
  EXPECT_EQ(query_all(*c, testing::cross_rate_spec().select_sql), testing::cross_rate_rows());
}

TEST_F(ReferenceBackend, RawDateColumnIsUnsupportedAndNamed) {
  auto c = db_->connect();
  try {
    query_all(*c, "select from_currency, update_date from cross_rate");
    FAIL();
  } catch (const UnsupportedTypeError& e) {
    EXPECT_EQ(e.type_name(), "date");
    EXPECT_EQ(e.where().column, 2u);
    EXPECT_EQ(e.where().column_name, "update_date");
    EXPECT_NE(std::string(e.what()).find("update_date"), std::string::npos);
  }
}

TEST_F(ReferenceBackend, StarAndColumnNames) {
  auto c = db_->connect();
  auto cursor = c->query("select * from cross_rate");
  EXPECT_EQ(cursor->column_names(),
            (std::vector<std::string>{"from_currency", "to_currency", "conv_rate", "update_date"}));
}

TEST_F(ReferenceBackend, CastTooNarrowFails) {
  auto c = db_->connect();
  EXPECT_EQ(error_code_of([&] { query_all(*c, "select cast(update_date as char(10)) from cross_rate"); }),
            ErrorCode::kQueryFailed);
}

TEST_F(ReferenceBackend, UnknownTableAndColumn) {
  auto c = db_->connect();
  EXPECT_EQ(error_code_of([&] { c->query("select a from nope"); }), ErrorCode::kUnknownTable);
  EXPECT_EQ(error_code_of([&] { c->query("select nope from cross_rate"); }), ErrorCode::kUnknownColumn);
  EXPECT_EQ(error_code_of([&] { c->query("delete from cross_rate"); }), ErrorCode::kQueryFailed);
}

TEST_F(ReferenceBackend, DuplicateKey) {
  auto c = db_->connect();
  const auto row = testing::cross_rate_rows().front();
  const auto sql = testing::cross_rate_spec().insert_sql;
  EXPECT_EQ(error_code_of([&] { c->insert(sql, row); }), ErrorCode::kDuplicateKey);

  // Within one uncommitted transaction as well.
  Row fresh{Value::text("Euro"), Value::text("Yen"), Value::real(1.0), Value::null()};
  c->insert(sql, fresh);
  EXPECT_EQ(error_code_of([&] { c->insert(sql, fresh); }), ErrorCode::kDuplicateKey);
  c->commit();
  EXPECT_EQ(db_->row_count("cross_rate"), 14u);
}

TEST_F(ReferenceBackend, RollbackDiscardsPendingInserts) {
  auto c = db_->connect();
  const auto sql = testing::cross_rate_spec().insert_sql;
  for (int i = 0; i < 3; ++i) {
    c->insert(sql, {Value::text("X" + std::to_string(i)), Value::text("Y"), Value::real(1.0), Value::null()});
  }
  EXPECT_EQ(db_->row_count("cross_rate"), 13u);
  c->rollback();
  c->commit();
  EXPECT_EQ(db_->row_count("cross_rate"), 13u);
}

TEST_F(ReferenceBackend, ReadsSeeOnlyCommittedRows) {
  auto writer = db_->connect();
  auto reader = db_->connect();
  writer->insert(testing::cross_rate_spec().insert_sql,
                 {Value::text("A"), Value::text("B"), Value::real(1.0), Value::null()});
  EXPECT_EQ(query_all(*reader, "select from_currency from cross_rate").size(), 13u);
  writer->commit();
  EXPECT_EQ(query_all(*reader, "select from_currency from cross_rate").size(), 14u);
}

TEST_F(ReferenceBackend, ConcurrentCommitsAcrossConnectors) {
  std::vector<std::jthread> workers;
  for (int w = 0; w < 4; ++w) {
    workers.emplace_back([this, w] {
      auto c = db_->connect();
      for (int i = 0; i < 250; ++i) {
        c->insert("insert into cross_rate values (?, ?, ?, ?)",
                  {Value::text("W" + std::to_string(w)), Value::text(std::to_string(i)), Value::real(i),
                   Value::null()});
        if (i % 10 == 9) c->commit();
      }
      c->commit();
    });
  }
  workers.clear();
  EXPECT_EQ(db_->row_count("cross_rate"), 13u + 1000u);
}

TEST_F(ReferenceBackend, ConnectionLossInjection) {
  db_->inject_connection_loss_after(2);
  auto c = db_->connect();
  const auto sql = testing::cross_rate_spec().insert_sql;
  c->insert(sql, {Value::text("A"), Value::text("1"), Value::real(1.0), Value::null()});
  c->insert(sql, {Value::text("A"), Value::text("2"), Value::real(1.0), Value::null()});
  EXPECT_EQ(error_code_of([&] {
              c->insert(sql, {Value::text("A"), Value::text("3"), Value::real(1.0), Value::null()});
            }),
            ErrorCode::kConnectionLost);
  EXPECT_EQ(error_code_of([&] { c->commit(); }), ErrorCode::kConnectionLost);
  EXPECT_EQ(db_->row_count("cross_rate"), 13u);
}

TEST_F(ReferenceBackend, InsertCoercionAndConstraints) {
  auto c = db_->connect();
  const auto sql = testing::cross_rate_spec().insert_sql;
  // NOT NULL
  EXPECT_EQ(error_code_of(
                [&] { c->insert(sql, {Value::null(), Value::text("x"), Value::real(1), Value::null()}); }),
            ErrorCode::kConstraintViolation);
  // varchar(10)
  EXPECT_NE(error_code_of([&] {
              c->insert(sql, {Value::text("ABCDEFGHIJK"), Value::text("x"), Value::real(1), Value::null()});
            }),
            ErrorCode::kDuplicateKey);
  // Wrong parameter count
  EXPECT_EQ(error_code_of([&] { c->insert(sql, {Value::text("a")}); }), ErrorCode::kQueryFailed);
}

TEST(ReferenceDatabaseScript, SaveOpenRoundtrip) {
  testing::TempDir dir;
  auto db = ReferenceDatabase::create();
  db->execute_script(testing::kCrossRateScript);
  db->execute_script(
      "create table misc (id bigint not null, d double precision, b varbinary(8), s char(3), n decimal(9,2),"
      " primary key (id));"
      "insert into misc values (1, -0.0, x'00ff', 'a''', 12.50);"
      "insert into misc values (2, NULL, NULL, NULL, NULL);");
  const auto path = dir / "db.sql";
  db->save(path);
  auto again = ReferenceDatabase::open(path);
  EXPECT_EQ(again->to_script(), db->to_script());
  EXPECT_EQ(again->dialect(), 1);
  auto c = again->connect();
  EXPECT_EQ(query_all(*c, testing::cross_rate_spec().select_sql), testing::cross_rate_rows());
  const auto misc = query_all(*c, "select id, d, b, s, cast(n as varchar(20)) from misc");
  ASSERT_EQ(misc.size(), 2u);
  EXPECT_EQ(misc[0], (Row{Value::integer(1), Value::real(-0.0), Value::bytes({0x00, 0xFF}),
                          Value::text("a' "), Value::text("12.50")}));
}

TEST(ReferenceDatabaseScript, JournalReplaysCommitsAfterCrash) {
  testing::TempDir dir;
  const auto path = dir / "db.sql";
  {
    auto db = ReferenceDatabase::create();
    db->execute_script(testing::kCrossRateSchema);
    db->save(path);
  }
  {
    auto db = ReferenceDatabase::open(path);
    auto c = db->connect();
    const auto rows = testing::cross_rate_rows();
    for (std::size_t i = 0; i < 5; ++i) {
      c->insert(testing::cross_rate_spec().insert_sql, rows[i]);
      c->commit();
    }
    c->insert(testing::cross_rate_spec().insert_sql, rows[5]);  // never committed
    // No save(): the process "crashes" here.
  }
  // A torn trailing entry is ignored.
  {
    std::ofstream j(ReferenceDatabase::journal_path(path), std::ios::app | std::ios::binary);
    j << "insert into cross_rate values ('Torn";
  }
  auto db = ReferenceDatabase::open(path);
  EXPECT_EQ(db->row_count("cross_rate"), 5u);
  db->save(path);
  EXPECT_FALSE(std::filesystem::exists(ReferenceDatabase::journal_path(path)));
  EXPECT_EQ(ReferenceDatabase::open(path)->row_count("cross_rate"), 5u);
}

TEST(ReferenceDatabaseScript, DialectThreeDateCast) {
  auto db = ReferenceDatabase::create();
  db->execute_script(
      "create table d (x date, t timestamp); insert into d values ('1993-11-22', '1993-11-22 10:20:30');");
  auto c = db->connect();
  EXPECT_EQ(query_all(*c, "select cast(x as varchar(30)), cast(t as varchar(30)) from d"),
            (std::vector<Row>{{Value::text("1993-11-22"), Value::text("1993-11-22 10:20:30.0000")}}));
  EXPECT_THROW(query_all(*c, "select t from d"), UnsupportedTypeError);
}

TEST(ReferenceDatabaseScript, TwoDigitYearPivot) {
  auto db = ReferenceDatabase::create();
  db->execute_script(
      "create table d (x date); insert into d values ('01/02/49'); insert into d values ('01/02/50');");
  auto c = db->connect();
  EXPECT_EQ(query_all(*c, "select cast(x as varchar(10)) from d"),
            (std::vector<Row>{{Value::text("2049-01-02")}, {Value::text("1950-01-02")}}));
}

TEST(ReferenceDatabaseScript, MissingFile) {
  EXPECT_EQ(error_code_of([] { ReferenceDatabase::open("/nonexistent/db.sql"); }), ErrorCode::kIo);
}

}  // namespace
}  // namespace tdump
