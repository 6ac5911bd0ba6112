"""Surface language: a gradually typed object calculus.

A program is a class table plus a main expression. Types are either the
dynamic type ``any`` or a class name; subtyping is structural (a class is a
subtype of another when it offers all of its methods at contra/co-variantly
compatible types), with an assumption set cutting recursion through the
class graph. Convertibility layers implicit coercions to and from ``any``
on top of subtyping and is deliberately not transitive.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Optional

# A type is the dynamic type ANY or a class name. Plain strings keep
# equality, hashing, and printing trivial.
Type = str
ANY: Type = "any"

# (line, column), 1-based.
Pos = tuple[int, int]


class StaticTypeError(Exception):
    """A single static error, with a source position when one is known."""

    def __init__(self, message: str, pos: Optional[Pos] = None):
        super().__init__(message)
        self.message = message
        self.pos = pos

    def __str__(self) -> str:
        if self.pos is None:
            return self.message
        line, col = self.pos
        return f"{line}:{col}: {self.message}"


class UnknownClassError(StaticTypeError):
    def __init__(self, name: str, pos: Optional[Pos] = None):
        super().__init__(f"unknown class '{name}'", pos)
        self.name = name


class StaticTypeErrors(Exception):
    """Aggregate of every static error found while checking a program."""

    def __init__(self, errors: list[StaticTypeError]):
        super().__init__("; ".join(str(e) for e in errors))
        self.errors = errors


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------

class SurfaceExpr:
    __slots__ = ()


@dataclass(frozen=True, slots=True)
class Var(SurfaceExpr):
    name: str
    pos: Optional[Pos] = field(default=None, compare=False)


@dataclass(frozen=True, slots=True)
class This(SurfaceExpr):
    pos: Optional[Pos] = field(default=None, compare=False)


@dataclass(frozen=True, slots=True)
class FieldRead(SurfaceExpr):
    # Field access is restricted to the self-reference, so the receiver
    # (always `this`) is implicit.
    field_name: str
    pos: Optional[Pos] = field(default=None, compare=False)


@dataclass(frozen=True, slots=True)
class FieldWrite(SurfaceExpr):
    field_name: str
    value: SurfaceExpr
    pos: Optional[Pos] = field(default=None, compare=False)


@dataclass(frozen=True, slots=True)
class Invoke(SurfaceExpr):
    receiver: SurfaceExpr
    method: str
    arg: SurfaceExpr
    pos: Optional[Pos] = field(default=None, compare=False)


@dataclass(frozen=True, slots=True)
class New(SurfaceExpr):
    class_name: str
    args: tuple[SurfaceExpr, ...]
    pos: Optional[Pos] = field(default=None, compare=False)


@dataclass(frozen=True, slots=True)
class FieldDef:
    name: str
    type: Type
    pos: Optional[Pos] = field(default=None, compare=False)


@dataclass(frozen=True, slots=True)
class MethodDef:
    name: str
    param: str
    param_type: Type
    return_type: Type
    body: SurfaceExpr
    pos: Optional[Pos] = field(default=None, compare=False)


@dataclass(frozen=True, slots=True)
class ClassDef:
    name: str
    fields: tuple[FieldDef, ...]
    methods: tuple[MethodDef, ...]
    pos: Optional[Pos] = field(default=None, compare=False)

    def method(self, name: str) -> Optional[MethodDef]:
        for m in self.methods:
            if m.name == name:
                return m
        return None

    def field_def(self, name: str) -> Optional[FieldDef]:
        for f in self.fields:
            if f.name == name:
                return f
        return None


@dataclass(frozen=True, slots=True)
class SurfaceProgram:
    classes: tuple[ClassDef, ...]
    main: SurfaceExpr

    def table(self) -> "ClassTable":
        return ClassTable(self.classes)


class ClassTable:
    """Ordered, name-indexed view of a list of class definitions."""

    __slots__ = ("classes", "_by_name", "_subtype_cache")

    def __init__(self, classes: Iterable[ClassDef]):
        self.classes = tuple(classes)
        self._by_name = {c.name: c for c in self.classes}
        self._subtype_cache: dict[tuple[Type, Type], bool] = {}

    def get(self, name: str) -> ClassDef:
        try:
            return self._by_name[name]
        except KeyError:
            raise UnknownClassError(name) from None

    def has(self, name: str) -> bool:
        return name in self._by_name

    def class_names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.classes)

    def __iter__(self) -> Iterator[ClassDef]:
        return iter(self.classes)

    def __len__(self) -> int:
        return len(self.classes)


# ---------------------------------------------------------------------------
# Subtyping and convertibility
# ---------------------------------------------------------------------------

# The assumption set threads pairs (sub, sup) already under derivation, so
# recursive class references are discharged instead of looping.
SubtypeAssumptions = frozenset

EMPTY_ASSUMPTIONS: frozenset[tuple[str, str]] = frozenset()


def subtype(assume: frozenset, table, t1: Type, t2: Type) -> bool:
    """Decide t1 <: t2 under the given assumptions.

    ``any`` is related only to itself; classes are compared structurally:
    every method of the supertype must be matched by name in the subtype
    with a contravariant parameter and covariant return. Fields never
    participate.
    """
    if t1 == ANY or t2 == ANY:
        return t1 == t2
    # Both are class names; unknown ones are an error, not a "no".
    table.get(t1)
    table.get(t2)
    if t1 == t2:
        return True
    if (t1, t2) in assume:
        return True
    cache = table._subtype_cache if not assume else None
    if cache is not None:
        hit = cache.get((t1, t2))
        if hit is not None:
            return hit
    result = _subtype_classes(assume, table, t1, t2)
    if cache is not None:
        cache[(t1, t2)] = result
    return result


def _subtype_classes(assume: frozenset, table, t1: Type, t2: Type) -> bool:
    extended = assume | {(t1, t2)}
    sub_methods = table.get(t1).methods
    for need in table.get(t2).methods:
        if not any(
            m.name == need.name
            and subtype(extended, table, need.param_type, m.param_type)
            and subtype(extended, table, m.return_type, need.return_type)
            for m in sub_methods
        ):
            return False
    return True


def convertible(table, t_from: Type, t_to: Type) -> bool:
    """Implicit-coercion relation: subtyping, or a conversion to or from any.

    Not closed under transitivity: A conv any and any conv B never combine
    into A conv B.
    """
    if t_to == ANY or t_from == ANY:
        # Still reject unknown class names on the other side.
        if t_to != ANY:
            table.get(t_to)
        if t_from != ANY:
            table.get(t_from)
        return True
    return subtype(EMPTY_ASSUMPTIONS, table, t_from, t_to)


# ---------------------------------------------------------------------------
# Type checking
# ---------------------------------------------------------------------------

TypeEnv = Mapping[str, Type]


def type_surface_expr(env: TypeEnv, table, e: SurfaceExpr) -> Type:
    """Compute the unique type of an expression, or raise StaticTypeError."""
    if isinstance(e, Var):
        t = env.get(e.name)
        if t is None:
            raise StaticTypeError(f"unbound variable '{e.name}'", e.pos)
        return t
    if isinstance(e, This):
        t = env.get("this")
        if t is None:
            raise StaticTypeError("'this' is not bound here", e.pos)
        return t
    if isinstance(e, FieldRead):
        return _field_type(env, table, e.field_name, e.pos)
    if isinstance(e, FieldWrite):
        ft = _field_type(env, table, e.field_name, e.pos)
        vt = type_surface_expr(env, table, e.value)
        if not convertible(table, vt, ft):
            raise StaticTypeError(
                f"cannot assign '{vt}' to field '{e.field_name}' of type '{ft}'",
                e.pos,
            )
        return ft
    if isinstance(e, Invoke):
        rt = type_surface_expr(env, table, e.receiver)
        at = type_surface_expr(env, table, e.arg)
        if rt == ANY:
            return ANY
        md = table.get(rt).method(e.method)
        if md is None:
            raise StaticTypeError(f"class '{rt}' has no method '{e.method}'", e.pos)
        if not convertible(table, at, md.param_type):
            raise StaticTypeError(
                f"argument of type '{at}' is not convertible to "
                f"'{md.param_type}' in call to '{e.method}'",
                e.pos,
            )
        return md.return_type
    if isinstance(e, New):
        cls = table.get(e.class_name)
        if len(e.args) != len(cls.fields):
            raise StaticTypeError(
                f"'new {e.class_name}' expects {len(cls.fields)} argument(s), "
                f"got {len(e.args)}",
                e.pos,
            )
        for arg, fd in zip(e.args, cls.fields):
            at = type_surface_expr(env, table, arg)
            if not convertible(table, at, fd.type):
                raise StaticTypeError(
                    f"argument of type '{at}' is not convertible to field "
                    f"'{fd.name}:{fd.type}' of '{e.class_name}'",
                    e.pos,
                )
        return e.class_name
    raise StaticTypeError(f"cannot type expression {e!r}")


def _field_type(env: TypeEnv, table, name: str, pos: Optional[Pos]) -> Type:
    this_t = env.get("this")
    if this_t is None:
        raise StaticTypeError("field access outside of a method body", pos)
    if this_t == ANY:
        raise StaticTypeError("field access on a dynamically typed receiver", pos)
    fd = table.get(this_t).field_def(name)
    if fd is None:
        raise StaticTypeError(f"class '{this_t}' has no field '{name}'", pos)
    return fd.type


def check_program(program: SurfaceProgram) -> Type:
    """Check the whole program; return the type of main.

    Every method body must type at a type convertible to its declared
    return type. All errors are collected and raised together.
    """
    errors: list[StaticTypeError] = []
    seen: set[str] = set()
    for c in program.classes:
        if c.name in seen:
            errors.append(StaticTypeError(f"duplicate class '{c.name}'", c.pos))
        seen.add(c.name)
    table = program.table()

    for c in program.classes:
        field_names: set[str] = set()
        for fd in c.fields:
            if fd.name in field_names:
                errors.append(
                    StaticTypeError(f"duplicate field '{fd.name}' in class '{c.name}'", fd.pos)
                )
            field_names.add(fd.name)
            errors.extend(_check_type_exists(table, fd.type, fd.pos))
        method_names: set[str] = set()
        for md in c.methods:
            if md.name in method_names:
                errors.append(
                    StaticTypeError(f"duplicate method '{md.name}' in class '{c.name}'", md.pos)
                )
            method_names.add(md.name)
            errors.extend(_check_type_exists(table, md.param_type, md.pos))
            errors.extend(_check_type_exists(table, md.return_type, md.pos))
            try:
                body_t = type_surface_expr({md.param: md.param_type, "this": c.name}, table, md.body)
                if not convertible(table, body_t, md.return_type):
                    errors.append(
                        StaticTypeError(
                            f"body of '{c.name}.{md.name}' has type '{body_t}', "
                            f"not convertible to declared return '{md.return_type}'",
                            md.pos,
                        )
                    )
            except StaticTypeError as err:
                errors.append(err)

    main_type: Type = ANY
    try:
        main_type = type_surface_expr({}, table, program.main)
    except StaticTypeError as err:
        errors.append(err)

    if errors:
        raise StaticTypeErrors(errors)
    return main_type


def _check_type_exists(table, t: Type, pos: Optional[Pos]) -> list[StaticTypeError]:
    if t != ANY and not table.has(t):
        return [UnknownClassError(t, pos)]
    return []
