"""Shared test machinery: a random generator for well-typed surface
programs, an independent fixpoint oracle for structural subtyping, and a
driver that re-validates machine states after every evaluation step."""

from __future__ import annotations

import random
import sys
from typing import Iterator, Optional

# Checked execution re-types the whole (recursively traversed) expression
# after every step; long runs nest expressions past the default limit.
sys.setrecursionlimit(50_000)

from gtkafka.kafka import (
    Addr,
    AddrFieldRead,
    AddrFieldWrite,
    BehCast,
    DynCall,
    KafkaClassDef,
    KafkaClassTable,
    KafkaExpr,
    KFieldWrite,
    KNew,
    Seq,
    StaticCall,
    SubCast,
    print_expr,
    well_formed_state,
)
from gtkafka.surface import (
    ANY,
    EMPTY_ASSUMPTIONS,
    ClassDef,
    ClassTable,
    FieldDef,
    FieldRead,
    FieldWrite,
    Invoke,
    MethodDef,
    New,
    SurfaceExpr,
    SurfaceProgram,
    This,
    Var,
    convertible,
    subtype,
)
from gtkafka.vm import (
    BehavioralCastError,
    FuelExhausted,
    Heap,
    MachineState,
    Stuck,
    StuckKind,
    Value,
    bcast,
    find_redex,
    step,
)

CLASS_NAMES = ("A", "B", "C", "D")
METHOD_NAMES = ("m", "n", "p")
FIELD_NAMES = ("f", "g")


# ---------------------------------------------------------------------------
# Random well-typed programs
# ---------------------------------------------------------------------------

class ProgramGen:
    """Type-directed random program generator.

    The first class never has fields, so every program has a constructible
    base; method return types that are classes are drawn only from
    constructible classes so a body of that type always exists.
    """

    def __init__(self, rng: random.Random, max_classes: int = 4,
                 max_methods: int = 3, max_fields: int = 2,
                 max_depth: int = 5, untyped: bool = False):
        self.rng = rng
        self.max_classes = max_classes
        self.max_methods = max_methods
        self.max_fields = max_fields
        self.max_depth = max_depth
        self.untyped = untyped

    def program(self) -> SurfaceProgram:
        rng = self.rng
        names = CLASS_NAMES[: rng.randint(1, self.max_classes)]

        fields_by_class: dict[str, tuple[FieldDef, ...]] = {}
        for i, name in enumerate(names):
            count = 0 if i == 0 else rng.randint(0, self.max_fields)
            fields_by_class[name] = tuple(
                FieldDef(FIELD_NAMES[j], self._pick_type(names))
                for j in range(count)
            )

        constructible = self._constructible(names, fields_by_class)

        sigs_by_class: dict[str, tuple[tuple[str, str, str], ...]] = {}
        for name in names:
            sigs = []
            for j in range(rng.randint(1, self.max_methods)):
                param_t = self._pick_type(names)
                ret_t = self._pick_type(constructible)
                sigs.append((METHOD_NAMES[j], param_t, ret_t))
            sigs_by_class[name] = tuple(sigs)

        # Signature-only table: subtyping and convertibility ignore bodies.
        skeleton = ClassTable(
            ClassDef(
                name,
                fields_by_class[name],
                tuple(MethodDef(m, "x", pt, rt, This()) for m, pt, rt in sigs_by_class[name]),
            )
            for name in names
        )
        self.table = skeleton
        self.constructible = constructible

        classes = []
        for name in names:
            methods = tuple(
                MethodDef(
                    m, "x", pt, rt,
                    self.expr({"x": pt, "this": name}, rng.randint(0, self.max_depth - 1), rt),
                )
                for m, pt, rt in sigs_by_class[name]
            )
            classes.append(ClassDef(name, fields_by_class[name], methods))

        main = self.expr({}, rng.randint(1, self.max_depth), None)
        return SurfaceProgram(tuple(classes), main)

    def _pick_type(self, class_pool) -> str:
        if self.untyped or not class_pool:
            return ANY
        return self.rng.choice((ANY,) + tuple(class_pool))

    @staticmethod
    def _constructible(names, fields_by_class) -> tuple[str, ...]:
        done: set[str] = set()
        changed = True
        while changed:
            changed = False
            for name in names:
                if name in done:
                    continue
                if all(
                    (fd.type == ANY and done) or fd.type in done
                    for fd in fields_by_class[name]
                ):
                    done.add(name)
                    changed = True
        return tuple(n for n in names if n in done)

    def _fits(self, t: str, want: Optional[str]) -> bool:
        return want is None or convertible(self.table, t, want)

    def _satisfiable(self, env: dict[str, str], want: str) -> bool:
        """Some closed expression of a type convertible to `want` can be
        generated in this scope."""
        if want == ANY:
            return True
        if any(t == ANY for name, t in env.items() if name != "this"):
            return True
        return any(
            subtype(EMPTY_ASSUMPTIONS, self.table, c, want)
            for c in self.constructible
        )

    def expr(self, env: dict[str, str], depth: int, want: Optional[str]) -> SurfaceExpr:
        rng = self.rng
        builders = []

        for name, t in env.items():
            if name != "this" and self._fits(t, want):
                builders.append((3, lambda name=name: Var(name)))
        if "this" in env and self._fits(env["this"], want):
            builders.append((2, This))
        if "this" in env:
            this_cls = self.table.get(env["this"])
            for fd in this_cls.fields:
                if self._fits(fd.type, want):
                    builders.append((2, lambda fd=fd: FieldRead(fd.name)))
            if depth > 0:
                for fd in this_cls.fields:
                    if self._fits(fd.type, want) and self._satisfiable(env, fd.type):
                        builders.append((1, lambda fd=fd: FieldWrite(
                            fd.name, self.expr(env, depth - 1, fd.type))))
        for cls_name in self.constructible:
            if self._fits(cls_name, want):
                cost_ok = depth > 0 or not self.table.get(cls_name).fields
                if cost_ok:
                    builders.append((2, lambda c=cls_name: self.new_of(env, depth, c)))
        if depth > 0:
            builders.append((4, lambda: self.invoke(env, depth, want)))

        if not builders:
            return self.fallback(env, want)
        total = sum(w for w, _ in builders)
        roll = rng.uniform(0, total)
        for weight, build in builders:
            roll -= weight
            if roll <= 0:
                return build()
        return builders[-1][1]()

    def new_of(self, env: dict[str, str], depth: int, cls_name: str) -> SurfaceExpr:
        fields = self.table.get(cls_name).fields
        args = tuple(
            self.expr(env, max(depth - 1, 0), fd.type) for fd in fields
        )
        return New(cls_name, args)

    def invoke(self, env: dict[str, str], depth: int, want: Optional[str]) -> SurfaceExpr:
        rng = self.rng
        for _ in range(3):
            receiver = self.expr(env, depth - 1, None)
            recv_t = self._type_of(env, receiver)
            if recv_t == ANY:
                # A call on a dynamic receiver has type any, which fits
                # every requirement.
                arg = self.expr(env, depth - 1, None)
                return Invoke(receiver, rng.choice(METHOD_NAMES), arg)
            methods = [
                md for md in self.table.get(recv_t).methods
                if self._fits(md.return_type, want)
                and self._satisfiable(env, md.param_type)
            ]
            if methods:
                md = rng.choice(methods)
                arg = self.expr(env, depth - 1, md.param_type)
                return Invoke(receiver, md.name, arg)
        return self.fallback(env, want)

    def _type_of(self, env, e) -> str:
        from gtkafka.surface import type_surface_expr
        return type_surface_expr(env, self.table, e)

    def fallback(self, env: dict[str, str], want: Optional[str]) -> SurfaceExpr:
        """A canonical expression for a demand already vetted as
        satisfiable: a constructible exact/sub-class value, or any value at
        all when the demand is `any` (or absent)."""
        if want is not None and want != ANY:
            for cls_name in self.constructible:
                if subtype(EMPTY_ASSUMPTIONS, self.table, cls_name, want):
                    return self.min_new(cls_name)
            for name, t in env.items():
                if name != "this" and t == ANY:
                    return Var(name)
            raise AssertionError(f"unsatisfiable demand '{want}'")
        for name, t in env.items():
            if name != "this":
                return Var(name)
        return self.min_new(self.constructible[0])

    def min_new(self, cls_name: str) -> SurfaceExpr:
        args = tuple(
            self.min_new(fd.type if fd.type != ANY else self.constructible[0])
            for fd in self.table.get(cls_name).fields
        )
        return New(cls_name, args)


def gen_program(seed: int, untyped: bool = False) -> SurfaceProgram:
    return ProgramGen(random.Random(seed), untyped=untyped).program()


# ---------------------------------------------------------------------------
# Independent subtyping oracle
# ---------------------------------------------------------------------------

def subtype_fixpoint(table) -> set[tuple[str, str]]:
    """Greatest-fixpoint subtyping computed by iterated removal: start from
    all class pairs and delete any pair whose method obligations fail under
    the current relation, until stable. Independent of the assumption-set
    derivation used by the checker."""
    names = [c.name for c in table]
    rel = {(a, b) for a in names for b in names}

    def le(t1: str, t2: str) -> bool:
        if t1 == ANY or t2 == ANY:
            return t1 == t2
        return (t1, t2) in rel

    changed = True
    while changed:
        changed = False
        for pair in sorted(rel):
            sub_cls, sup_cls = table.get(pair[0]), table.get(pair[1])
            ok = all(
                any(
                    m.name == need.name
                    and le(need.param_type, m.param_type)
                    and le(m.return_type, need.return_type)
                    for m in sub_cls.methods
                )
                for need in sup_cls.methods
            )
            if not ok:
                rel.discard(pair)
                changed = True
    return rel


# ---------------------------------------------------------------------------
# Checked execution (soundness-as-tests)
# ---------------------------------------------------------------------------

class SoundnessViolation(AssertionError):
    pass


def run_checked(table: KafkaClassTable, expr: KafkaExpr, fuel: int):
    """Run a program re-validating the soundness invariants at every step:
    the state stays well formed, heap and class table grow monotonically,
    existing addresses keep their class, and any stuck state is one of the
    three justified shapes."""
    state = MachineState(table, expr, Heap.empty())
    _assert_well_formed(state)
    steps = 0
    while True:
        if isinstance(state.expr, Addr):
            return Value(state.expr.address), steps
        if steps >= fuel:
            return FuelExhausted(steps), steps
        redex = find_redex(state.expr)
        result = step(state)
        if isinstance(result, Stuck):
            _assert_stuck_shape(state, redex, result)
            return result, steps
        _assert_well_formed(result)
        _assert_monotone(state, result)
        state = result
        steps += 1


def _assert_well_formed(state: MachineState) -> None:
    errors = well_formed_state(state.table, state.expr, state.heap)
    if errors:
        raise SoundnessViolation(
            f"state not well formed: {[str(e) for e in errors]}\n"
            f"expr: {print_expr(state.expr)}"
        )


def _assert_monotone(before: MachineState, after: MachineState) -> None:
    before_names = set(before.table.class_names())
    after_names = set(after.table.class_names())
    if not before_names <= after_names:
        raise SoundnessViolation("class table lost classes")
    for address, obj in before.heap.items():
        if address not in after.heap:
            raise SoundnessViolation(f"heap lost address #{address}")
        if after.heap.get(address).class_name != obj.class_name:
            raise SoundnessViolation(f"address #{address} changed class")


def _assert_stuck_shape(state: MachineState, redex, stuck: Stuck) -> None:
    if redex is None:
        raise SoundnessViolation("stuck without a redex")
    if print_expr(redex) != stuck.at:
        raise SoundnessViolation(
            f"stuck location {stuck.at!r} is not the redex {print_expr(redex)!r}"
        )
    heap, table = state.heap, state.table
    if stuck.kind is StuckKind.NO_SUCH_METHOD_DYNAMIC:
        if not (isinstance(redex, DynCall) and isinstance(redex.receiver, Addr)
                and isinstance(redex.arg, Addr)):
            raise SoundnessViolation(f"bad dynamic-call stuck shape: {stuck.at}")
        cls = table.get(heap.get(redex.receiver.address).class_name)
        if any(m.name == redex.method and m.is_untyped() for m in cls.methods):
            raise SoundnessViolation("dynamic call stuck despite untyped method")
    elif stuck.kind is StuckKind.SUBTYPE_CAST_FAILURE:
        if not (isinstance(redex, SubCast) and isinstance(redex.body, Addr)
                and redex.target != ANY):
            raise SoundnessViolation(f"bad subtype-cast stuck shape: {stuck.at}")
        cls_name = heap.get(redex.body.address).class_name
        if table.has(redex.target) and subtype(
            EMPTY_ASSUMPTIONS, table, cls_name, redex.target
        ):
            raise SoundnessViolation("subtype cast stuck despite holding")
    elif stuck.kind is StuckKind.BEHAVIORAL_CAST_FAILURE:
        if not (isinstance(redex, BehCast) and isinstance(redex.body, Addr)):
            raise SoundnessViolation(f"bad behavioral-cast stuck shape: {stuck.at}")
        try:
            bcast(redex.body.address, redex.target, heap, table)
        except BehavioralCastError:
            pass
        else:
            raise SoundnessViolation("behavioral cast stuck despite succeeding")
    else:
        raise SoundnessViolation(f"unknown stuck kind {stuck.kind}")


# ---------------------------------------------------------------------------
# Expression walking
# ---------------------------------------------------------------------------

def walk_kafka(e: KafkaExpr) -> Iterator[KafkaExpr]:
    yield e
    if isinstance(e, (SubCast, BehCast)):
        yield from walk_kafka(e.body)
    elif isinstance(e, Seq):
        yield from walk_kafka(e.first)
        yield from walk_kafka(e.second)
    elif isinstance(e, (StaticCall, DynCall)):
        yield from walk_kafka(e.receiver)
        yield from walk_kafka(e.arg)
    elif isinstance(e, KNew):
        for arg in e.args:
            yield from walk_kafka(arg)
    elif isinstance(e, (KFieldWrite, AddrFieldWrite)):
        yield from walk_kafka(e.value)


def class_type_positions(cls: KafkaClassDef) -> Iterator[str]:
    """Every type annotation occurring in a class definition."""
    for fd in cls.fields:
        yield fd.type
    for md in cls.methods:
        yield md.param_type
        yield md.return_type
        for node in walk_kafka(md.body):
            if isinstance(node, (SubCast, BehCast)):
                yield node.target
            elif isinstance(node, StaticCall):
                yield node.arg_type
                yield node.return_type
