#include "tdump/backend.hpp"

#include "tdump/error.hpp"

namespace tdump {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

}  // namespace

std::string native_type_name(const NativeCell& cell) {
  return std::visit(Overloaded{
                        [](const native::Null&) { return std::string("null"); },
                        [](const native::Integer&) { return std::string("integer"); },
                        [](const native::WideInteger&) { return std::string("int128"); },
                        [](const native::Float32&) { return std::string("float"); },
                        [](const native::Float64&) { return std::string("double precision"); },
                        [](const native::Text&) { return std::string("varchar"); },
                        [](const native::Octets&) { return std::string("varbinary"); },
                        [](const native::Date&) { return std::string("date"); },
                        [](const native::Timestamp&) { return std::string("timestamp"); },
                        [](const native::Decimal&) { return std::string("decimal"); },
                        [](const native::BlobHandle&) { return std::string("blob"); },
                    },
                    cell);
}

Value map_cell(const NativeCell& cell) {
  return std::visit(Overloaded{
                        [](const native::Null&) { return Value::null(); },
                        [](const native::Integer& v) { return Value::integer(v.value); },
                        [](const native::WideInteger& v) -> Value {
                          // Values that fit in int64 are still exact integers.
                          if (v.high == 0) {
                            if (!v.negative && v.low <= static_cast<std::uint64_t>(INT64_MAX)) {
                              return Value::integer(static_cast<std::int64_t>(v.low));
                            }
                            if (v.negative && v.low <= static_cast<std::uint64_t>(INT64_MAX) + 1) {
                              return Value::integer(static_cast<std::int64_t>(0 - v.low));
                            }
                          }
                          throw UnsupportedTypeError("int128");
                        },
                        [](const native::Float32& v) { return Value::real(static_cast<double>(v.value)); },
                        [](const native::Float64& v) { return Value::real(v.value); },
                        [](const native::Text& v) -> Value {
                          if (!is_valid_utf8(v.value))
                            throw UnsupportedTypeError("varchar (not valid UTF-8)");
                          return Value::text(v.value);
                        },
                        [](const native::Octets& v) { return Value::bytes(v.value); },
                        [](const native::Date&) -> Value { throw UnsupportedTypeError("date"); },
                        [](const native::Timestamp&) -> Value { throw UnsupportedTypeError("timestamp"); },
                        [](const native::Decimal&) -> Value { throw UnsupportedTypeError("decimal"); },
                        [](const native::BlobHandle&) -> Value { throw UnsupportedTypeError("blob"); },
                    },
                    cell);
}

}  // namespace tdump
