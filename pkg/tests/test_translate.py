import pytest

from gtkafka.kafka import (
    BehCast,
    DynCall,
    KNew,
    KThis,
    KVar,
    StaticCall,
    SubCast,
    print_class,
    print_expr,
    well_formed_state,
)
from gtkafka.litmus import LITMUS_CASES, litmus_program
from gtkafka.parser import parse_expr, parse_program
from gtkafka.surface import ANY, StaticTypeErrors
from gtkafka.translate import (
    MONOTONIC,
    Semantics,
    UnsupportedSemanticsError,
    assert_expr,
    synth_expr,
    translate_class,
    translate_program,
)
from gtkafka.vm import Heap


def l3_class(name: str):
    program = litmus_program("L3")
    return program.table(), next(c for c in program.classes if c.name == name)


# Frozen golden translations of the two interesting classes of L3. The
# transient guard re-checks the declared parameter type, typed semantics
# keep signatures, and concrete adds untyped guards for typed methods.
GOLDEN_F = {
    Semantics.OPTIONAL: (
        "class F {\n"
        "  m(x:any):any { x }\n"
        "  n(x:any):any { (<any>this)@m(x) }\n"
        "}"
    ),
    Semantics.TRANSIENT: (
        "class F {\n"
        "  m(x:any):any { <E>x ; <any><E>x }\n"
        "  n(x:any):any { <any>x ; <any><E> this.m(<any>x){any->any} }\n"
        "}"
    ),
    Semantics.BEHAVIORAL: (
        "class F {\n"
        "  m(x:E):E { x }\n"
        "  n(x:any):any { <<any>> this.m(<<E>>x){E->E} }\n"
        "}"
    ),
    Semantics.CONCRETE: (
        "class F {\n"
        "  m(x:E):E { x }\n"
        "  n(x:any):any { <any> this.m(<E>x){E->E} }\n"
        "  m(x:any):any { <any> this.m(<E>x){E->E} }\n"
        "}"
    ),
}

GOLDEN_E = {
    Semantics.OPTIONAL: "class E {\n  a(x:any):any { x }\n}",
    Semantics.TRANSIENT: "class E {\n  a(x:any):any { <D>x ; <any><D>x }\n}",
    Semantics.BEHAVIORAL: "class E {\n  a(x:D):D { x }\n}",
    Semantics.CONCRETE: (
        "class E {\n"
        "  a(x:D):D { x }\n"
        "  a(x:any):any { <any> this.a(<D>x){D->D} }\n"
        "}"
    ),
}


@pytest.mark.parametrize("semantics", list(Semantics))
def test_golden_translation_of_l3_f(semantics):
    table, cls = l3_class("F")
    assert print_class(translate_class(semantics, table, cls)) == GOLDEN_F[semantics]


@pytest.mark.parametrize("semantics", list(Semantics))
def test_golden_translation_of_l3_e(semantics):
    table, cls = l3_class("E")
    assert print_class(translate_class(semantics, table, cls)) == GOLDEN_E[semantics]


def test_concrete_guard_appears_verbatim():
    table, cls = l3_class("F")
    printed = print_class(translate_class(Semantics.CONCRETE, table, cls))
    assert "n(x:any):any { <any> this.m(<E>x){E->E} }" in printed


def test_optional_translation_of_variables_and_this():
    table = litmus_program("L3").table()
    assert synth_expr(Semantics.OPTIONAL, {}, table, parse_expr("x")) == KVar("x")
    assert synth_expr(Semantics.OPTIONAL, {}, table, parse_expr("this")) == SubCast(ANY, KThis())


def test_optional_new_is_cast_to_any():
    table = litmus_program("L1").table()
    out = synth_expr(Semantics.OPTIONAL, {}, table, parse_expr("new T()"))
    assert out == SubCast(ANY, KNew("T", ()))
    assert print_expr(out) == "<any> new T()"


def test_optional_calls_are_dynamic():
    table = litmus_program("L1").table()
    out = synth_expr(Semantics.OPTIONAL, {}, table, parse_expr("this.s(x)"))
    assert out == DynCall(SubCast(ANY, KThis()), "s", KVar("x"))


def test_transient_variable_casts_to_static_type():
    table = litmus_program("L3").table()
    out = synth_expr(Semantics.TRANSIENT, {"x": "E"}, table, parse_expr("x"))
    assert out == SubCast("E", KVar("x"))
    assert print_expr(out) == "<E>x"


def test_transient_field_read_casts_to_field_type():
    table = litmus_program("L4").table()
    out = synth_expr(Semantics.TRANSIENT, {"this": "T"}, table, parse_expr("this.f1"))
    assert print_expr(out) == "<C>this.f1"


def test_transient_field_write_casts_like_a_read():
    source = "class A {} class C { f:A  set(x:*):* { this.f = x } } new A()"
    table, _ = translate_program(Semantics.TRANSIENT, parse_program(source))
    printed = print_class(table.get("C"))
    assert "set(x:any):any { <any>x ; <any><A> this.f = <any>x }" in printed


def test_assert_no_op_when_subtype_holds():
    table = litmus_program("L3").table()
    env = {"x": "E"}
    synthesized = synth_expr(Semantics.CONCRETE, env, table, parse_expr("x"))
    asserted = assert_expr(Semantics.CONCRETE, env, table, parse_expr("x"), "E")
    assert asserted == synthesized == KVar("x")


def test_assert_behavioral_wraps_any_at_class():
    table = litmus_program("L3").table()
    out = assert_expr(Semantics.BEHAVIORAL, {"x": ANY}, table, parse_expr("x"), "E")
    assert out == BehCast("E", KVar("x"))


def test_assert_transient_wraps_class_at_any():
    # A class type is not a subtype of any, so the cast is inserted (and
    # is trivially satisfiable at run time).
    table = litmus_program("L3").table()
    out = assert_expr(Semantics.TRANSIENT, {"x": "C"}, table, parse_expr("x"), ANY)
    assert out == SubCast(ANY, SubCast("C", KVar("x")))


def test_assert_concrete_uses_subtype_casts():
    table = litmus_program("L3").table()
    out = assert_expr(Semantics.CONCRETE, {"x": ANY}, table, parse_expr("x"), "E")
    assert out == SubCast("E", KVar("x"))


def test_behavioral_main_of_l3():
    _, main = translate_program(Semantics.BEHAVIORAL, litmus_program("L3"))
    assert print_expr(main) == (
        "new F().n(<<any>> new C()){any->any}@a(<<any>> new C())"
    )


def test_optional_main_of_l1():
    _, main = translate_program(Semantics.OPTIONAL, litmus_program("L1"))
    assert print_expr(main) == "(<any> new T())@t(<any> new A())"


def test_monotonic_has_no_translation():
    with pytest.raises(UnsupportedSemanticsError):
        translate_program(MONOTONIC, litmus_program("L1"))


def test_translation_requires_well_typed_input():
    program = parse_program("new Missing()")
    with pytest.raises(StaticTypeErrors):
        translate_program(Semantics.OPTIONAL, program)


def test_nothing_to_guard_translates_cast_free():
    program = parse_program("class A {} new A()")
    table, main = translate_program(Semantics.CONCRETE, program)
    assert main == KNew("A", ())
    assert table.get("A").methods == ()


def test_all_litmus_translations_are_well_formed():
    for case in LITMUS_CASES:
        program = litmus_program(case)
        for semantics in Semantics:
            table, main = translate_program(semantics, program)
            assert well_formed_state(table, main, Heap.empty()) == [], (case, semantics)


def test_semantics_names():
    assert [s.value for s in Semantics] == [
        "optional", "transient", "behavioral", "concrete",
    ]
    assert MONOTONIC == "monotonic"
