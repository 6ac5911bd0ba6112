"""Gradual-typing workbench.

A gradually typed surface object calculus, four enforcement semantics
(optional, transient, behavioral, concrete) translated into the KafKa core
calculus, a small-step interpreter with run-time wrapper generation, and a
litmus-test matrix differentiating the semantics by their run-time errors.
"""

from .parser import ParseError, parse_expr, parse_program
from .surface import (
    ANY,
    EMPTY_ASSUMPTIONS,
    ClassDef,
    ClassTable,
    FieldDef,
    MethodDef,
    StaticTypeError,
    StaticTypeErrors,
    SurfaceProgram,
    Type,
    UnknownClassError,
    check_program,
    convertible,
    subtype,
    type_surface_expr,
)
from .kafka import (
    KafkaClassDef,
    KafkaClassTable,
    KafkaExpr,
    KafkaMethodDef,
    heap_typing_of,
    print_expr,
    print_program,
    type_kafka_expr,
    well_formed_class,
    well_formed_state,
)
from .translate import (
    MONOTONIC,
    Semantics,
    UnsupportedSemanticsError,
    assert_expr,
    synth_expr,
    translate_class,
    translate_program,
)
from .vm import (
    DEFAULT_FUEL,
    FuelExhausted,
    Heap,
    HeapObject,
    MachineState,
    Outcome,
    Stuck,
    StuckKind,
    Value,
    bcast,
    find_redex,
    run,
    step,
)
from .litmus import LITMUS_CASES, LITMUS_SOURCES, LitmusReport, litmus_program, run_matrix

__version__ = "0.1.0"

__all__ = [
    "ANY",
    "DEFAULT_FUEL",
    "EMPTY_ASSUMPTIONS",
    "LITMUS_CASES",
    "LITMUS_SOURCES",
    "MONOTONIC",
    "ClassDef",
    "ClassTable",
    "FieldDef",
    "FuelExhausted",
    "Heap",
    "HeapObject",
    "KafkaClassDef",
    "KafkaClassTable",
    "KafkaExpr",
    "KafkaMethodDef",
    "LitmusReport",
    "MachineState",
    "MethodDef",
    "Outcome",
    "ParseError",
    "Semantics",
    "StaticTypeError",
    "StaticTypeErrors",
    "Stuck",
    "StuckKind",
    "SurfaceProgram",
    "Type",
    "UnknownClassError",
    "UnsupportedSemanticsError",
    "Value",
    "assert_expr",
    "bcast",
    "check_program",
    "convertible",
    "find_redex",
    "heap_typing_of",
    "litmus_program",
    "parse_expr",
    "parse_program",
    "print_expr",
    "print_program",
    "run",
    "run_matrix",
    "step",
    "subtype",
    "synth_expr",
    "translate_class",
    "translate_program",
    "type_kafka_expr",
    "type_surface_expr",
    "well_formed_class",
    "well_formed_state",
]
