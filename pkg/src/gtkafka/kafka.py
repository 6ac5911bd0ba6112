"""KafKa core calculus: IR, static semantics, and pretty printer.

KafKa is the statically typed target the surface language is compiled to.
Implicit conversions become explicit casts (``<t>e`` checks a subtype
relation at run time, ``<<t>>e`` wraps the value in a generated proxy
class), and invocation is split into a statically checked form
``e.m(e'){t->t'}`` and a dynamic form ``e@m(e')`` that may get stuck.

Classes allow limited overloading: per method name at most one "untyped"
method (parameter and return both ``any``) and at most one "typed" method.
The class table grows at run time as behavioral casts generate wrappers,
so tables are persistent values extended without mutation.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import islice
from typing import Iterable, Iterator, Mapping, Optional

from .surface import (
    ANY,
    EMPTY_ASSUMPTIONS,
    FieldDef,
    StaticTypeError,
    Type,
    UnknownClassError,
    subtype,
)

# ---------------------------------------------------------------------------
# IR
# ---------------------------------------------------------------------------

Address = int


class KafkaExpr:
    __slots__ = ()


@dataclass(frozen=True, slots=True)
class KVar(KafkaExpr):
    name: str


@dataclass(frozen=True, slots=True)
class KThis(KafkaExpr):
    pass


@dataclass(frozen=True, slots=True)
class KThat(KafkaExpr):
    """The wrapped object inside a generated wrapper; reads the reserved
    field ``that`` on this."""


@dataclass(frozen=True, slots=True)
class KFieldRead(KafkaExpr):
    field_name: str


@dataclass(frozen=True, slots=True)
class KFieldWrite(KafkaExpr):
    field_name: str
    value: KafkaExpr


@dataclass(frozen=True, slots=True)
class KNew(KafkaExpr):
    class_name: str
    args: tuple[KafkaExpr, ...]


@dataclass(frozen=True, slots=True)
class StaticCall(KafkaExpr):
    receiver: KafkaExpr
    method: str
    arg: KafkaExpr
    arg_type: Type
    return_type: Type


@dataclass(frozen=True, slots=True)
class DynCall(KafkaExpr):
    receiver: KafkaExpr
    method: str
    arg: KafkaExpr


@dataclass(frozen=True, slots=True)
class SubCast(KafkaExpr):
    target: Type
    body: KafkaExpr


@dataclass(frozen=True, slots=True)
class BehCast(KafkaExpr):
    target: Type
    body: KafkaExpr


@dataclass(frozen=True, slots=True)
class Seq(KafkaExpr):
    first: KafkaExpr
    second: KafkaExpr


@dataclass(frozen=True, slots=True)
class Addr(KafkaExpr):
    address: Address


@dataclass(frozen=True, slots=True)
class AddrFieldRead(KafkaExpr):
    address: Address
    field_name: str


@dataclass(frozen=True, slots=True)
class AddrFieldWrite(KafkaExpr):
    address: Address
    field_name: str
    value: KafkaExpr


@dataclass(frozen=True, slots=True)
class KafkaMethodDef:
    name: str
    param: str
    param_type: Type
    return_type: Type
    body: KafkaExpr

    def is_untyped(self) -> bool:
        return self.param_type == ANY and self.return_type == ANY


@dataclass(frozen=True, slots=True)
class KafkaClassDef:
    name: str
    fields: tuple[FieldDef, ...]
    methods: tuple[KafkaMethodDef, ...]

    def field_def(self, name: str) -> Optional[FieldDef]:
        for f in self.fields:
            if f.name == name:
                return f
        return None

    def field_index(self, name: str) -> Optional[int]:
        for i, f in enumerate(self.fields):
            if f.name == name:
                return i
        return None


# Initial character of generated class names; not a surface identifier
# character, so generated names can never collide with source ones.
RESERVED_NAME_PREFIX = "$"


class KafkaClassTable:
    """Ordered, append-only class table.

    Tables in one lineage share a backing list and name index (plus the
    subtype and well-formedness caches), with each table seeing only its
    own prefix; extension is O(1) on the newest table. Sharing is sound
    because extensions always carry fresh names, which earlier classes
    cannot reference.
    """

    __slots__ = ("_store", "_index", "_count", "generated_count",
                 "_subtype_cache", "_wf_ok")

    def __init__(self, classes: Iterable[KafkaClassDef] = ()):
        self._store: list[KafkaClassDef] = list(classes)
        self._index = {c.name: i for i, c in enumerate(self._store)}
        self._count = len(self._store)
        self.generated_count = sum(
            1 for c in self._store if c.name.startswith(RESERVED_NAME_PREFIX)
        )
        self._subtype_cache: dict[tuple[Type, Type], bool] = {}
        self._wf_ok: set[str] = set()

    def get(self, name: str) -> KafkaClassDef:
        i = self._index.get(name)
        if i is None or i >= self._count:
            raise UnknownClassError(name)
        return self._store[i]

    def has(self, name: str) -> bool:
        i = self._index.get(name)
        return i is not None and i < self._count

    def extend(self, cls: KafkaClassDef) -> "KafkaClassTable":
        if self.has(cls.name):
            raise ValueError(f"class '{cls.name}' already defined")
        if len(self._store) != self._count:
            # This prefix was already extended along another lineage;
            # branch off a fresh table (rare).
            branched = KafkaClassTable(self._store[: self._count])
            return branched.extend(cls)
        new = KafkaClassTable.__new__(KafkaClassTable)
        self._store.append(cls)
        self._index[cls.name] = self._count
        new._store = self._store
        new._index = self._index
        new._count = self._count + 1
        new.generated_count = self.generated_count + (
            1 if cls.name.startswith(RESERVED_NAME_PREFIX) else 0
        )
        new._subtype_cache = self._subtype_cache
        new._wf_ok = self._wf_ok
        return new

    @property
    def classes(self) -> tuple[KafkaClassDef, ...]:
        return tuple(islice(self._store, self._count))

    def class_names(self) -> tuple[str, ...]:
        return tuple(c.name for c in islice(self._store, self._count))

    def __iter__(self) -> Iterator[KafkaClassDef]:
        return islice(self._store, self._count)

    def __len__(self) -> int:
        return self._count


# Maps addresses to the class of the object stored there.
HeapTyping = Mapping[Address, str]

TypeEnv = Mapping[str, Type]


# ---------------------------------------------------------------------------
# Expression typing
# ---------------------------------------------------------------------------

def type_kafka_expr(env: TypeEnv, heap_typing: HeapTyping, table: KafkaClassTable,
                    e: KafkaExpr) -> Type:
    """Synthesize the type of a core expression.

    Subtyping (never convertibility) is the implicit coercion: a position
    demanding a class accepts any subtype of it, while a position demanding
    ``any`` accepts only ``any`` itself or a heap address, which can always
    be retyped at ``any``.
    """
    if isinstance(e, KVar):
        t = env.get(e.name)
        if t is None:
            raise StaticTypeError(f"unbound variable '{e.name}'")
        return t
    if isinstance(e, KThis):
        t = env.get("this")
        if t is None:
            raise StaticTypeError("'this' is not bound here")
        return t
    if isinstance(e, KThat):
        return _this_field_type(env, table, "that")
    if isinstance(e, KFieldRead):
        return _this_field_type(env, table, e.field_name)
    if isinstance(e, KFieldWrite):
        ft = _this_field_type(env, table, e.field_name)
        _demand(env, heap_typing, table, e.value, ft)
        return ft
    if isinstance(e, KNew):
        cls = table.get(e.class_name)
        if len(e.args) != len(cls.fields):
            raise StaticTypeError(
                f"'new {e.class_name}' expects {len(cls.fields)} argument(s), "
                f"got {len(e.args)}"
            )
        for arg, fd in zip(e.args, cls.fields):
            _demand(env, heap_typing, table, arg, fd.type)
        return e.class_name
    if isinstance(e, StaticCall):
        recv_t = type_kafka_expr(env, heap_typing, table, e.receiver)
        if recv_t == ANY:
            raise StaticTypeError(
                f"static call to '{e.method}' on a receiver of type any"
            )
        _check_type_known(table, e.arg_type)
        _check_type_known(table, e.return_type)
        _resolve_static_target(table, recv_t, e.method, e.arg_type, e.return_type)
        _demand(env, heap_typing, table, e.arg, e.arg_type)
        return e.return_type
    if isinstance(e, DynCall):
        _demand(env, heap_typing, table, e.receiver, ANY)
        _demand(env, heap_typing, table, e.arg, ANY)
        return ANY
    if isinstance(e, (SubCast, BehCast)):
        _check_type_known(table, e.target)
        type_kafka_expr(env, heap_typing, table, e.body)
        return e.target
    if isinstance(e, Seq):
        type_kafka_expr(env, heap_typing, table, e.first)
        return type_kafka_expr(env, heap_typing, table, e.second)
    if isinstance(e, Addr):
        t = heap_typing.get(e.address)
        if t is None:
            raise StaticTypeError(f"dangling address #{e.address}")
        return t
    if isinstance(e, AddrFieldRead):
        return _addr_field_type(heap_typing, table, e.address, e.field_name)
    if isinstance(e, AddrFieldWrite):
        ft = _addr_field_type(heap_typing, table, e.address, e.field_name)
        _demand(env, heap_typing, table, e.value, ft)
        return ft
    raise StaticTypeError(f"cannot type expression {e!r}")


def _demand(env: TypeEnv, heap_typing: HeapTyping, table: KafkaClassTable,
            e: KafkaExpr, want: Type) -> None:
    got = type_kafka_expr(env, heap_typing, table, e)
    if got == want:
        return
    if want == ANY:
        # Only addresses may be retyped at any.
        if isinstance(e, Addr):
            return
        raise StaticTypeError(f"expected any, got '{got}'")
    if got != ANY and subtype(EMPTY_ASSUMPTIONS, table, got, want):
        return
    raise StaticTypeError(f"expected '{want}', got '{got}'")


def _this_field_type(env: TypeEnv, table: KafkaClassTable, name: str) -> Type:
    this_t = env.get("this")
    if this_t is None:
        raise StaticTypeError("field access outside of a method body")
    if this_t == ANY:
        raise StaticTypeError("field access on a receiver of type any")
    fd = table.get(this_t).field_def(name)
    if fd is None:
        raise StaticTypeError(f"class '{this_t}' has no field '{name}'")
    return fd.type


def _addr_field_type(heap_typing: HeapTyping, table: KafkaClassTable,
                     address: Address, name: str) -> Type:
    cls_name = heap_typing.get(address)
    if cls_name is None:
        raise StaticTypeError(f"dangling address #{address}")
    fd = table.get(cls_name).field_def(name)
    if fd is None:
        raise StaticTypeError(f"class '{cls_name}' has no field '{name}'")
    return fd.type


def _check_type_known(table: KafkaClassTable, t: Type) -> None:
    if t != ANY and not table.has(t):
        raise UnknownClassError(t)


def _resolve_static_target(table: KafkaClassTable, recv_t: Type, method: str,
                           arg_type: Type, return_type: Type) -> None:
    """A static call is well-typed when the receiver can be typed at some
    class carrying the annotated signature exactly. The receiver's own
    class is tried first, then its supertypes (needed once receivers have
    reduced to addresses of subtype classes)."""
    if _has_exact(table.get(recv_t), method, arg_type, return_type):
        return
    for cls in table:
        if (
            cls.name != recv_t
            and _has_exact(cls, method, arg_type, return_type)
            and subtype(EMPTY_ASSUMPTIONS, table, recv_t, cls.name)
        ):
            return
    raise StaticTypeError(
        f"no class typing the receiver declares "
        f"'{method}({arg_type}):{return_type}' (receiver type '{recv_t}')"
    )


def _has_exact(cls: KafkaClassDef, method: str, arg_type: Type, return_type: Type) -> bool:
    return any(
        m.name == method and m.param_type == arg_type and m.return_type == return_type
        for m in cls.methods
    )


# ---------------------------------------------------------------------------
# Well-formedness
# ---------------------------------------------------------------------------

def well_formed_class(table: KafkaClassTable, cls: KafkaClassDef) -> list[StaticTypeError]:
    """Check one class: overloading restriction, declared types exist, and
    each body types at a subtype of its declared return type."""
    errors: list[StaticTypeError] = []

    field_names: set[str] = set()
    for fd in cls.fields:
        if fd.name in field_names:
            errors.append(StaticTypeError(f"duplicate field '{fd.name}' in '{cls.name}'"))
        field_names.add(fd.name)
        if fd.type != ANY and not table.has(fd.type):
            errors.append(UnknownClassError(fd.type))

    typed_seen: set[str] = set()
    untyped_seen: set[str] = set()
    for md in cls.methods:
        bucket = untyped_seen if md.is_untyped() else typed_seen
        if md.name in bucket:
            kind = "untyped" if md.is_untyped() else "typed"
            errors.append(
                StaticTypeError(
                    f"class '{cls.name}' has more than one {kind} method '{md.name}'"
                )
            )
        bucket.add(md.name)
        for t in (md.param_type, md.return_type):
            if t != ANY and not table.has(t):
                errors.append(UnknownClassError(t))

    for md in cls.methods:
        try:
            body_t = type_kafka_expr(
                {md.param: md.param_type, "this": cls.name}, {}, table, md.body
            )
            if body_t != md.return_type and not (
                body_t != ANY
                and md.return_type != ANY
                and subtype(EMPTY_ASSUMPTIONS, table, body_t, md.return_type)
            ):
                errors.append(
                    StaticTypeError(
                        f"body of '{cls.name}.{md.name}' has type '{body_t}', "
                        f"not a subtype of declared return '{md.return_type}'"
                    )
                )
        except StaticTypeError as err:
            errors.append(
                StaticTypeError(f"in '{cls.name}.{md.name}': {err.message}")
            )

    return errors


def heap_typing_of(heap) -> dict[Address, str]:
    """Derive the heap typing: each address maps to its object's class."""
    return {address: obj.class_name for address, obj in heap.items()}


def well_formed_state(table: KafkaClassTable, e: KafkaExpr, heap) -> list[StaticTypeError]:
    """Check a whole machine state: every class well-formed, every heap
    object's class defined with a matching field count, and the expression
    well-typed under the heap typing (closed, so an empty environment)."""
    errors: list[StaticTypeError] = []
    for cls in table:
        if cls.name in table._wf_ok:
            continue
        cls_errors = well_formed_class(table, cls)
        if cls_errors:
            errors.extend(cls_errors)
        else:
            table._wf_ok.add(cls.name)

    for address, obj in heap.unchecked_items():
        if not table.has(obj.class_name):
            errors.append(
                StaticTypeError(
                    f"heap object #{address} has unknown class '{obj.class_name}'"
                )
            )
        elif len(obj.fields) != len(table.get(obj.class_name).fields):
            errors.append(
                StaticTypeError(
                    f"heap object #{address} of class '{obj.class_name}' has "
                    f"{len(obj.fields)} field value(s), expected "
                    f"{len(table.get(obj.class_name).fields)}"
                )
            )
        else:
            heap.mark_checked(address)

    try:
        type_kafka_expr({}, heap.typing_view(), table, e)
    except StaticTypeError as err:
        errors.append(err)
    return errors


# ---------------------------------------------------------------------------
# Pretty printer
# ---------------------------------------------------------------------------

_ATOMIC = (KVar, KThis, KThat, Addr, KFieldRead, AddrFieldRead)
_PAREN_RECEIVER = (SubCast, BehCast, Seq, KFieldWrite, AddrFieldWrite)


def print_expr(e: KafkaExpr) -> str:
    if isinstance(e, KVar):
        return e.name
    if isinstance(e, KThis):
        return "this"
    if isinstance(e, KThat):
        return "this.that"
    if isinstance(e, KFieldRead):
        return f"this.{e.field_name}"
    if isinstance(e, KFieldWrite):
        return f"this.{e.field_name} = {print_expr(e.value)}"
    if isinstance(e, KNew):
        return f"new {e.class_name}({', '.join(print_expr(a) for a in e.args)})"
    if isinstance(e, StaticCall):
        return (
            f"{_receiver(e.receiver)}.{e.method}({print_expr(e.arg)})"
            f"{{{e.arg_type}->{e.return_type}}}"
        )
    if isinstance(e, DynCall):
        return f"{_receiver(e.receiver)}@{e.method}({print_expr(e.arg)})"
    if isinstance(e, SubCast):
        return f"<{e.target}>{_cast_body(e.body)}"
    if isinstance(e, BehCast):
        return f"<<{e.target}>>{_cast_body(e.body)}"
    if isinstance(e, Seq):
        return f"{print_expr(e.first)} ; {print_expr(e.second)}"
    if isinstance(e, Addr):
        return f"#{e.address}"
    if isinstance(e, AddrFieldRead):
        return f"#{e.address}.{e.field_name}"
    if isinstance(e, AddrFieldWrite):
        return f"#{e.address}.{e.field_name} = {print_expr(e.value)}"
    raise TypeError(f"not a KafkaExpr: {e!r}")


def _receiver(e: KafkaExpr) -> str:
    text = print_expr(e)
    return f"({text})" if isinstance(e, _PAREN_RECEIVER) else text


def _cast_body(e: KafkaExpr) -> str:
    text = print_expr(e)
    if isinstance(e, _ATOMIC) or isinstance(e, (SubCast, BehCast)):
        return text
    return f" {text}"


def print_method(md: KafkaMethodDef) -> str:
    return (
        f"{md.name}({md.param}:{md.param_type}):{md.return_type} "
        f"{{ {print_expr(md.body)} }}"
    )


def print_class(cls: KafkaClassDef) -> str:
    lines = [f"class {cls.name} {{"]
    lines.extend(f"  {fd.name}:{fd.type}" for fd in cls.fields)
    lines.extend(f"  {print_method(md)}" for md in cls.methods)
    lines.append("}")
    return "\n".join(lines)


def print_table(table: KafkaClassTable) -> str:
    return "\n".join(print_class(c) for c in table)


def print_program(table: KafkaClassTable, main: KafkaExpr) -> str:
    if len(table) == 0:
        return print_expr(main)
    return f"{print_table(table)}\n\n{print_expr(main)}"
