#pragma once

// Built-in logical MFrags. Connective tables are Absurd-strict: any Absurd
// input gives Absurd, otherwise the classical table applies.

#include <string>
#include <string_view>

#include "mebn/core_model.hpp"

namespace mebn {

/// Local expression of a connective over parents X1 (and X2 for binary kinds).
/// Kinds: Not, And, Or, Implies, Iff.
const LocalExpression& connective_local(Formula::Kind kind);

/// A schematic MFrag carrying the connective's local expression. The resident
/// is `<Kind>(a)` with inputs X1(a) and X2(a).
MFrag connective_mfrag(Formula::Kind kind);

/// Eq(a, b) over two value nodes: True iff both are the same non-Absurd value.
MFrag equality_mfrag();
std::string_view equality_value(std::string_view a, std::string_view b);

/// Direct table evaluation; agrees with connective_local on every cell.
ContextValue apply_connective(Formula::Kind kind, ContextValue a, ContextValue b = ContextValue::True);

/// forall x: T . body  ->  And(body[x:=id1], body[x:=id2], ...) folded left
/// over the registered identifiers of T; Exists uses Or. One identifier gives
/// the body itself. Throws EmptyDomain.
Formula expand_quantifier(const Formula& q, const EntityRegistry& registry);

}  // namespace mebn
