"""Execution-level properties over randomly generated programs."""

from gtkafka.translate import Semantics, translate_program
from gtkafka.vm import run

from tests.support import gen_program, run_checked


def test_runs_are_deterministic():
    # Same program, same semantics: identical outcome and identical trace
    # (fresh wrapper names and addresses restart per run).
    for seed in range(30):
        program = gen_program(seed)
        for semantics in Semantics:
            table1, main1 = translate_program(semantics, program)
            table2, main2 = translate_program(semantics, program)
            out1, trace1 = run(table1, main1, fuel=300, trace=True)
            out2, trace2 = run(table2, main2, fuel=300, trace=True)
            assert out1 == out2
            assert trace1 == trace2


def test_step_and_run_agree():
    # The one-step API and the driver classify programs identically.
    from gtkafka.vm import FuelExhausted, Stuck, Value
    for seed in range(25):
        program = gen_program(seed)
        for semantics in Semantics:
            table, main = translate_program(semantics, program)
            via_run, _ = run(table, main, fuel=150)
            via_steps, _ = run_checked(table, main, fuel=150)
            assert type(via_run) is type(via_steps)
            if isinstance(via_run, Value):
                assert via_run == via_steps
            if isinstance(via_run, Stuck):
                assert via_run.kind == via_steps.kind


def test_checked_execution_on_a_sample():
    # Smoke-scale version of the soundness corpus; the full corpus runs in
    # the acceptance suite.
    for seed in range(40):
        program = gen_program(seed)
        for semantics in Semantics:
            table, main = translate_program(semantics, program)
            run_checked(table, main, fuel=120)


def test_untyped_generator_emits_only_dynamic_types():
    from gtkafka.surface import ANY
    for seed in range(20):
        program = gen_program(seed, untyped=True)
        for cls in program.classes:
            assert all(f.type == ANY for f in cls.fields)
            for md in cls.methods:
                assert md.param_type == ANY and md.return_type == ANY
