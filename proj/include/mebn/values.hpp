#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mebn {

inline constexpr std::string_view kAbsurd = "Absurd";
inline constexpr std::string_view kTrue = "True";
inline constexpr std::string_view kFalse = "False";

/// Truth value of a context term. Absurd marks a category error
/// (asking whether a zone is one's own starship), not falsehood.
enum class ContextValue { True, False, Absurd };

std::string_view to_string(ContextValue v);
ContextValue context_value_from(std::string_view state);

/// Ordered finite list of declared values. Absurd is never declared; it is
/// always present as the last state.
class StateSpace {
 public:
  StateSpace() = default;
  explicit StateSpace(std::vector<std::string> declared);

  static StateSpace boolean();

  /// Number of states including Absurd.
  std::size_t size() const { return declared_.size() + 1; }
  std::size_t absurd_index() const { return declared_.size(); }
  std::span<const std::string> declared() const { return declared_; }
  std::string_view operator[](std::size_t i) const;
  std::optional<std::size_t> index_of(std::string_view value) const;
  bool contains(std::string_view value) const { return index_of(value).has_value(); }
  std::vector<std::string> all() const;

  bool operator==(const StateSpace&) const = default;

 private:
  std::vector<std::string> declared_;
};

}  // namespace mebn
