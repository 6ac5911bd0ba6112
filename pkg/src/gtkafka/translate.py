"""Type-driven translations from the surface language to KafKa.

Four enforcement semantics share one pipeline:

* optional   — erase every annotation; all calls become dynamic.
* transient  — erase signatures but re-check arguments, variables, and
  field reads against their (erased) declared types with subtype casts;
  checks are shallow because the casts run against the erased table.
* behavioral — keep signatures; values crossing a typed/untyped boundary
  are wrapped by behavioral casts that keep enforcing the boundary type.
* concrete   — keep signatures; boundaries are guarded by plain subtype
  casts, and each typed method gets an untyped sibling that re-checks the
  argument before delegating, so typed code stays reachable dynamically.

Expression translation is bidirectional: a synthesis form for expressions
used at whatever type they have, and an assertive form used where context
requires a type, which inserts a cast exactly when the synthesized type is
not already a subtype of the requirement.
"""

from __future__ import annotations

from enum import Enum

from .kafka import (
    BehCast,
    DynCall,
    KafkaClassDef,
    KafkaClassTable,
    KafkaExpr,
    KafkaMethodDef,
    KFieldRead,
    KFieldWrite,
    KNew,
    KThis,
    KVar,
    Seq,
    StaticCall,
    SubCast,
)
from .surface import (
    ANY,
    EMPTY_ASSUMPTIONS,
    ClassDef,
    FieldDef,
    FieldRead,
    FieldWrite,
    Invoke,
    New,
    SurfaceExpr,
    SurfaceProgram,
    This,
    Type,
    TypeEnv,
    Var,
    check_program,
    subtype,
)


class Semantics(Enum):
    OPTIONAL = "optional"
    TRANSIENT = "transient"
    BEHAVIORAL = "behavioral"
    CONCRETE = "concrete"


# Recognized by the litmus matrix and CLI, but it has no translation.
MONOTONIC = "monotonic"

SEMANTICS_NAMES = tuple(s.value for s in Semantics) + (MONOTONIC,)


class UnsupportedSemanticsError(Exception):
    def __init__(self, name: str):
        super().__init__(f"no translation exists for the '{name}' semantics")
        self.name = name


def translate_program(semantics: Semantics, program: SurfaceProgram) -> tuple[KafkaClassTable, KafkaExpr]:
    """Translate a statically well-typed program; the result is a
    well-formed KafKa class table and closed main expression."""
    if not isinstance(semantics, Semantics):
        raise UnsupportedSemanticsError(str(semantics))
    check_program(program)
    table = program.table()
    classes = tuple(translate_class(semantics, table, c) for c in program.classes)
    main = synth_expr(semantics, {}, table, program.main)
    return KafkaClassTable(classes), main


def translate_class(semantics: Semantics, table, cls: ClassDef) -> KafkaClassDef:
    if semantics is Semantics.OPTIONAL:
        fields = tuple(FieldDef(f.name, ANY) for f in cls.fields)
        methods = tuple(
            KafkaMethodDef(md.name, md.param, ANY, ANY, _optional(md.body))
            for md in cls.methods
        )
        return KafkaClassDef(cls.name, fields, methods)

    if semantics is Semantics.TRANSIENT:
        fields = tuple(FieldDef(f.name, ANY) for f in cls.fields)
        methods = []
        for md in cls.methods:
            env = {md.param: md.param_type, "this": cls.name}
            body = Seq(
                SubCast(md.param_type, KVar(md.param)),
                assert_expr(semantics, env, table, md.body, ANY),
            )
            methods.append(KafkaMethodDef(md.name, md.param, ANY, ANY, body))
        return KafkaClassDef(cls.name, fields, tuple(methods))

    if semantics is Semantics.BEHAVIORAL:
        fields = tuple(FieldDef(f.name, f.type) for f in cls.fields)
        methods = tuple(
            KafkaMethodDef(
                md.name, md.param, md.param_type, md.return_type,
                assert_expr(
                    semantics,
                    {md.param: md.param_type, "this": cls.name},
                    table, md.body, md.return_type,
                ),
            )
            for md in cls.methods
        )
        return KafkaClassDef(cls.name, fields, methods)

    if semantics is Semantics.CONCRETE:
        fields = tuple(FieldDef(f.name, f.type) for f in cls.fields)
        methods = [
            KafkaMethodDef(
                md.name, md.param, md.param_type, md.return_type,
                assert_expr(
                    semantics,
                    {md.param: md.param_type, "this": cls.name},
                    table, md.body, md.return_type,
                ),
            )
            for md in cls.methods
        ]
        # Untyped guards so typed methods stay callable from untyped code;
        # a method whose parameter is already `any` needs none.
        for md in cls.methods:
            if md.param_type != ANY:
                methods.append(
                    KafkaMethodDef(
                        md.name, md.param, ANY, ANY,
                        SubCast(ANY, StaticCall(
                            KThis(), md.name,
                            SubCast(md.param_type, KVar(md.param)),
                            md.param_type, md.return_type,
                        )),
                    )
                )
        return KafkaClassDef(cls.name, fields, tuple(methods))

    raise UnsupportedSemanticsError(str(semantics))


def synth_expr(semantics: Semantics, env: TypeEnv, table, e: SurfaceExpr) -> KafkaExpr:
    """Translate an expression used at whatever type it synthesizes."""
    if semantics is Semantics.OPTIONAL:
        return _optional(e)
    return _synth(semantics, env, table, e)[0]


def assert_expr(semantics: Semantics, env: TypeEnv, table, e: SurfaceExpr,
                required: Type) -> KafkaExpr:
    """Translate an expression that context requires to have a type.

    When the synthesized type is already a subtype of the requirement the
    synthesis result is returned unchanged; otherwise a cast to the
    requirement is wrapped around it (behavioral for the behavioral
    semantics, subtype cast for transient and concrete).
    """
    if semantics is Semantics.OPTIONAL:
        raise UnsupportedSemanticsError("optional has no assertive translation")
    translated, actual = _synth(semantics, env, table, e)
    if subtype(EMPTY_ASSUMPTIONS, table, actual, required):
        return translated
    if semantics is Semantics.BEHAVIORAL:
        return BehCast(required, translated)
    return SubCast(required, translated)


def _optional(e: SurfaceExpr) -> KafkaExpr:
    # Type-agnostic: erase annotations, make every call dynamic. The cast
    # on `this` gives it the dynamic type expected by the erased methods.
    if isinstance(e, Var):
        return KVar(e.name)
    if isinstance(e, This):
        return SubCast(ANY, KThis())
    if isinstance(e, FieldRead):
        return KFieldRead(e.field_name)
    if isinstance(e, FieldWrite):
        return KFieldWrite(e.field_name, _optional(e.value))
    if isinstance(e, Invoke):
        return DynCall(_optional(e.receiver), e.method, _optional(e.arg))
    if isinstance(e, New):
        return SubCast(ANY, KNew(e.class_name, tuple(_optional(a) for a in e.args)))
    raise TypeError(f"not a surface expression: {e!r}")


def _synth(semantics: Semantics, env: TypeEnv, table,
           e: SurfaceExpr) -> tuple[KafkaExpr, Type]:
    transient = semantics is Semantics.TRANSIENT

    if isinstance(e, Var):
        t = env[e.name]
        # Transient re-checks every variable use against its static type.
        return (SubCast(t, KVar(e.name)) if transient else KVar(e.name)), t
    if isinstance(e, This):
        return KThis(), env["this"]
    if isinstance(e, FieldRead):
        ft = table.get(env["this"]).field_def(e.field_name).type
        read = KFieldRead(e.field_name)
        return (SubCast(ft, read) if transient else read), ft
    if isinstance(e, FieldWrite):
        ft = table.get(env["this"]).field_def(e.field_name).type
        value = assert_expr(semantics, env, table, e.value, ANY if transient else ft)
        write = KFieldWrite(e.field_name, value)
        # Transient erases field types, so a write (like a read) is re-cast
        # to the field's static type; otherwise its result could not be
        # used where that type is required.
        return (SubCast(ft, write) if transient else write), ft
    if isinstance(e, New):
        fields = table.get(e.class_name).fields
        args = tuple(
            assert_expr(semantics, env, table, arg, ANY if transient else fd.type)
            for arg, fd in zip(e.args, fields)
        )
        return KNew(e.class_name, args), e.class_name
    if isinstance(e, Invoke):
        return _synth_invoke_parts(semantics, env, table, e)
    raise TypeError(f"not a surface expression: {e!r}")


def _synth_invoke_parts(semantics: Semantics, env: TypeEnv, table,
                        e: Invoke) -> tuple[KafkaExpr, Type]:
    receiver, recv_t = _synth(semantics, env, table, e.receiver)
    if recv_t == ANY:
        arg = assert_expr(semantics, env, table, e.arg, ANY)
        return DynCall(receiver, e.method, arg), ANY
    md = table.get(recv_t).method(e.method)
    if semantics is Semantics.TRANSIENT:
        # The signature is erased, so the call is annotated any->any and
        # the declared return type is re-checked on the way out.
        arg = assert_expr(semantics, env, table, e.arg, ANY)
        call = StaticCall(receiver, e.method, arg, ANY, ANY)
        return SubCast(md.return_type, call), md.return_type
    arg = assert_expr(semantics, env, table, e.arg, md.param_type)
    call = StaticCall(receiver, e.method, arg, md.param_type, md.return_type)
    return call, md.return_type
