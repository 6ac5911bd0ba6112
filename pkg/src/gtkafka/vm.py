"""Small-step evaluator for KafKa.

A machine state is a class table, the expression under evaluation, and a
heap mapping addresses to objects. Each step contracts the unique redex
determined by the evaluation contexts (field-write value, call receiver
then argument, cast body, object-creation arguments left to right,
sequence head). Behavioral casts extend the class table with a freshly
named wrapper class, so the table is part of the state and grows
monotonically; the heap never drops or re-tags an address.

Evaluation can only get stuck at a dynamic invocation whose receiver lacks
the method, a subtype cast whose operand's class is not a subtype of the
target, or a behavioral cast whose target demands methods the operand does
not have.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterator, Optional, Union

from .kafka import (
    Addr,
    AddrFieldRead,
    AddrFieldWrite,
    Address,
    BehCast,
    DynCall,
    KafkaClassDef,
    KafkaClassTable,
    KafkaExpr,
    KafkaMethodDef,
    KFieldRead,
    KFieldWrite,
    KNew,
    KThat,
    KThis,
    KVar,
    Seq,
    StaticCall,
    SubCast,
    print_expr,
)
from .surface import ANY, EMPTY_ASSUMPTIONS, FieldDef, Type, UnknownClassError, subtype

DEFAULT_FUEL = 100_000

WRAPPER_PREFIX = "$W"  # '$' is not a surface identifier character, so
                       # generated names can never collide with source ones.


class KafkaRuntimeError(Exception):
    """An impossible transition: the state was not well formed."""


class BehavioralCastError(Exception):
    """Raised by bcast when the operand cannot implement the target type."""


@dataclass(frozen=True, slots=True)
class HeapObject:
    class_name: str
    fields: tuple[Address, ...]


class _TypingView:
    """Read-only heap-typing view: address -> class name, no dict copy."""

    __slots__ = ("_objects",)

    def __init__(self, objects: dict[Address, HeapObject]):
        self._objects = objects

    def get(self, address: Address) -> Optional[str]:
        obj = self._objects.get(address)
        return None if obj is None else obj.class_name


class Heap:
    """Address -> object map with a monotone allocation counter.

    Heaps are persistent values: allocation and field writes return a new
    heap, addresses are never reused, and a write replaces a whole object
    with one of the same class. The checked watermark lets state
    well-formedness validation skip objects vetted on earlier steps.
    """

    __slots__ = ("_objects", "next_addr", "_checked_upto")

    def __init__(self) -> None:
        self._objects: dict[Address, HeapObject] = {}
        self.next_addr: Address = 0
        self._checked_upto: Address = 0

    @staticmethod
    def empty() -> "Heap":
        return Heap()

    @staticmethod
    def _from_parts(objects: dict[Address, HeapObject], next_addr: Address,
                    checked_upto: Address) -> "Heap":
        new = Heap.__new__(Heap)
        new._objects = objects
        new.next_addr = next_addr
        new._checked_upto = checked_upto
        return new

    def _copy(self) -> "Heap":
        return Heap._from_parts(dict(self._objects), self.next_addr,
                                self._checked_upto)

    def alloc(self, obj: HeapObject) -> tuple[Address, "Heap"]:
        new = self._copy()
        address = new.next_addr
        new._objects[address] = obj
        new.next_addr = address + 1
        return address, new

    def write(self, address: Address, index: int, value: Address) -> "Heap":
        obj = self.get(address)
        fields = obj.fields[:index] + (value,) + obj.fields[index + 1:]
        new = self._copy()
        new._objects[address] = HeapObject(obj.class_name, fields)
        return new

    def get(self, address: Address) -> HeapObject:
        try:
            return self._objects[address]
        except KeyError:
            raise KafkaRuntimeError(f"dangling address #{address}") from None

    def items(self) -> Iterator[tuple[Address, HeapObject]]:
        return iter(self._objects.items())

    def addresses(self) -> set[Address]:
        return set(self._objects)

    def typing_view(self) -> _TypingView:
        return _TypingView(self._objects)

    def unchecked_items(self) -> Iterator[tuple[Address, HeapObject]]:
        for address in range(self._checked_upto, self.next_addr):
            yield address, self._objects[address]

    def mark_checked(self, address: Address) -> None:
        if address == self._checked_upto:
            self._checked_upto = address + 1

    def __contains__(self, address: Address) -> bool:
        return address in self._objects

    def __len__(self) -> int:
        return len(self._objects)


@dataclass(frozen=True, slots=True)
class MachineState:
    table: KafkaClassTable
    expr: KafkaExpr
    heap: Heap


class StuckKind(Enum):
    NO_SUCH_METHOD_DYNAMIC = "NoSuchMethodDynamic"
    SUBTYPE_CAST_FAILURE = "SubtypeCastFailure"
    BEHAVIORAL_CAST_FAILURE = "BehavioralCastFailure"


@dataclass(frozen=True, slots=True)
class Value:
    address: Address


@dataclass(frozen=True, slots=True)
class Stuck:
    kind: StuckKind
    at: str  # pretty-printed stuck redex


@dataclass(frozen=True, slots=True)
class FuelExhausted:
    steps: int


Outcome = Union[Value, Stuck, FuelExhausted]


@dataclass(frozen=True, slots=True)
class TraceStep:
    step: int
    redex: str
    heap_size: int
    class_count: int


# Context frames identify which child of a node is under evaluation; the
# machine below threads them on an explicit stack, so evaluation depth is
# never limited by (and never overruns) the interpreter's call stack.
_NEW, _RECV, _ARG, _CAST, _WRITE, _SEQ = range(6)


# ---------------------------------------------------------------------------
# Wrapper generation (behavioral cast)
# ---------------------------------------------------------------------------

def bcast(address: Address, target: Type, heap: Heap,
          table: KafkaClassTable) -> tuple[KafkaClassTable, Address, Heap]:
    """Wrap the object at `address` so it behaves as the target type.

    For a class target, the operand must offer every method name the
    target declares; shared methods get adapters re-casting argument and
    result on each call, and the remaining methods get pass-throughs so a
    later cast can still reach them (transparent wrappers). For target
    ``any``, every method is re-exposed as untyped, casting the argument
    back to the wrapped method's declared type.

    Raises BehavioralCastError when the operand cannot implement the
    target; neither consumed method list may use overloading.
    """
    obj = heap.get(address)
    wrapper = _generate_wrapper(table.get(obj.class_name), target, table)
    new_table = table.extend(wrapper)
    new_address, new_heap = heap.alloc(HeapObject(wrapper.name, (address,)))
    return new_table, new_address, new_heap


def _generate_wrapper(wrapped_cls: KafkaClassDef, target: Type,
                      table: KafkaClassTable) -> KafkaClassDef:
    _require_unique_names(wrapped_cls)
    wrapper_name = f"{WRAPPER_PREFIX}{table.generated_count}"

    methods: list[KafkaMethodDef] = []
    if target == ANY:
        for md in wrapped_cls.methods:
            methods.append(
                KafkaMethodDef(
                    md.name, "x", ANY, ANY,
                    BehCast(ANY, StaticCall(
                        KThat(), md.name,
                        BehCast(md.param_type, KVar("x")),
                        md.param_type, md.return_type,
                    )),
                )
            )
    else:
        try:
            target_cls = table.get(target)
        except UnknownClassError:
            raise BehavioralCastError(f"unknown target class '{target}'") from None
        _require_unique_names(target_cls)
        wrapped_names = {md.name for md in wrapped_cls.methods}
        missing = [md.name for md in target_cls.methods if md.name not in wrapped_names]
        if missing:
            raise BehavioralCastError(
                f"object of class '{wrapped_cls.name}' lacks method(s) "
                f"{', '.join(sorted(missing))} required by '{target}'"
            )
        target_by_name = {md.name: md for md in target_cls.methods}
        for md in wrapped_cls.methods:
            enforced = target_by_name.get(md.name)
            if enforced is not None:
                methods.append(
                    KafkaMethodDef(
                        md.name, "x", enforced.param_type, enforced.return_type,
                        BehCast(enforced.return_type, StaticCall(
                            KThat(), md.name,
                            BehCast(md.param_type, KVar("x")),
                            md.param_type, md.return_type,
                        )),
                    )
                )
            else:
                methods.append(
                    KafkaMethodDef(
                        md.name, "x", md.param_type, md.return_type,
                        StaticCall(KThat(), md.name, KVar("x"),
                                   md.param_type, md.return_type),
                    )
                )

    return KafkaClassDef(
        wrapper_name,
        fields=(FieldDef("that", wrapped_cls.name),),
        methods=tuple(methods),
    )


def _require_unique_names(cls: KafkaClassDef) -> None:
    names = [md.name for md in cls.methods]
    if len(names) != len(set(names)):
        raise BehavioralCastError(
            f"class '{cls.name}' overloads a method name; it cannot be wrapped"
        )


# ---------------------------------------------------------------------------
# Stepping
# ---------------------------------------------------------------------------

def find_redex(e: KafkaExpr) -> Optional[KafkaExpr]:
    """The unique next-to-fire subexpression, or None if e is a value."""
    while True:
        if isinstance(e, Addr):
            return None
        child: Optional[KafkaExpr] = None
        if isinstance(e, KNew):
            child = next((a for a in e.args if not isinstance(a, Addr)), None)
        elif isinstance(e, (StaticCall, DynCall)):
            if not isinstance(e.receiver, Addr):
                child = e.receiver
            elif not isinstance(e.arg, Addr):
                child = e.arg
        elif isinstance(e, (SubCast, BehCast)):
            if not isinstance(e.body, Addr):
                child = e.body
        elif isinstance(e, AddrFieldWrite):
            if not isinstance(e.value, Addr):
                child = e.value
        elif isinstance(e, Seq):
            if not isinstance(e.first, Addr):
                child = e.first
        # AddrFieldRead is itself a redex; anything else is an open term
        # and is reported as the point where evaluation fails.
        if child is None:
            return e
        e = child


class _Machine:
    """Evaluation with an explicit context stack.

    The stack holds (frame kind, original node) pairs recording which child
    of the node is in focus; plugging the focus back into the frames
    reconstitutes the whole expression. One `tick` performs exactly one
    reduction (several decomposition moves may precede it), so stepping is
    iterative and untroubled by deeply nested expressions. The machine
    owns a private mutable copy of the heap, making a reduction O(1) in
    heap size; `heap()` re-wraps it as a value when a caller needs one.
    """

    __slots__ = ("table", "objects", "next_addr", "checked_upto", "focus", "stack")

    def __init__(self, state: MachineState):
        self.table = state.table
        self.objects: dict[Address, HeapObject] = dict(state.heap._objects)
        self.next_addr = state.heap.next_addr
        self.checked_upto = state.heap._checked_upto
        self.focus = state.expr
        self.stack: list[tuple[int, KafkaExpr]] = []

    def heap(self) -> Heap:
        return Heap._from_parts(self.objects, self.next_addr, self.checked_upto)

    def snapshot_expr(self) -> KafkaExpr:
        e = self.focus
        for kind, node in reversed(self.stack):
            e = _plug(kind, node, e)
        return e

    def _get(self, address: Address) -> HeapObject:
        try:
            return self.objects[address]
        except KeyError:
            raise KafkaRuntimeError(f"dangling address #{address}") from None

    def _alloc(self, obj: HeapObject) -> Address:
        address = self.next_addr
        self.objects[address] = obj
        self.next_addr = address + 1
        return address

    def tick(self) -> Union[KafkaExpr, Stuck, None]:
        """Advance by one reduction; returns the contracted redex, a Stuck
        outcome, or None when the whole expression is already a value."""
        while True:
            e = self.focus
            if isinstance(e, Addr):
                if not self.stack:
                    return None
                kind, node = self.stack.pop()
                self.focus = _plug(kind, node, e)
                continue

            if isinstance(e, KNew):
                pending = next((a for a in e.args if not isinstance(a, Addr)), None)
                if pending is not None:
                    self.stack.append((_NEW, e))
                    self.focus = pending
                    continue
                cls = self.table.get(e.class_name)
                if len(e.args) != len(cls.fields):
                    raise KafkaRuntimeError(
                        f"new {e.class_name}: wrong number of field values"
                    )
                address = self._alloc(
                    HeapObject(e.class_name, tuple(a.address for a in e.args))
                )
                self.focus = Addr(address)
                return e

            if isinstance(e, AddrFieldRead):
                obj = self._get(e.address)
                index = self.table.get(obj.class_name).field_index(e.field_name)
                if index is None:
                    raise KafkaRuntimeError(
                        f"class '{obj.class_name}' has no field '{e.field_name}'"
                    )
                self.focus = Addr(obj.fields[index])
                return e

            if isinstance(e, AddrFieldWrite):
                if not isinstance(e.value, Addr):
                    self.stack.append((_WRITE, e))
                    self.focus = e.value
                    continue
                obj = self._get(e.address)
                index = self.table.get(obj.class_name).field_index(e.field_name)
                if index is None:
                    raise KafkaRuntimeError(
                        f"class '{obj.class_name}' has no field '{e.field_name}'"
                    )
                fields = obj.fields[:index] + (e.value.address,) + obj.fields[index + 1:]
                self.objects[e.address] = HeapObject(obj.class_name, fields)
                self.focus = e.value
                return e

            if isinstance(e, StaticCall):
                if not isinstance(e.receiver, Addr):
                    self.stack.append((_RECV, e))
                    self.focus = e.receiver
                    continue
                if not isinstance(e.arg, Addr):
                    self.stack.append((_ARG, e))
                    self.focus = e.arg
                    continue
                obj = self._get(e.receiver.address)
                md = _lookup_static(
                    self.table, obj.class_name, e.method, e.arg_type, e.return_type
                )
                if md is None:
                    raise KafkaRuntimeError(
                        f"static call lookup failed: {obj.class_name}.{e.method}"
                        f"{{{e.arg_type}->{e.return_type}}}"
                    )
                self.focus = substitute(
                    md.body, e.receiver.address, md.param, e.arg.address
                )
                return e

            if isinstance(e, DynCall):
                if not isinstance(e.receiver, Addr):
                    self.stack.append((_RECV, e))
                    self.focus = e.receiver
                    continue
                if not isinstance(e.arg, Addr):
                    self.stack.append((_ARG, e))
                    self.focus = e.arg
                    continue
                obj = self._get(e.receiver.address)
                md = next(
                    (m for m in self.table.get(obj.class_name).methods
                     if m.name == e.method and m.is_untyped()),
                    None,
                )
                if md is None:
                    return Stuck(StuckKind.NO_SUCH_METHOD_DYNAMIC, print_expr(e))
                self.focus = substitute(
                    md.body, e.receiver.address, md.param, e.arg.address
                )
                return e

            if isinstance(e, SubCast):
                if not isinstance(e.body, Addr):
                    self.stack.append((_CAST, e))
                    self.focus = e.body
                    continue
                if e.target != ANY:
                    cls_name = self._get(e.body.address).class_name
                    try:
                        ok = subtype(EMPTY_ASSUMPTIONS, self.table, cls_name, e.target)
                    except UnknownClassError:
                        # A cast to an undefined class can never succeed.
                        ok = False
                    if not ok:
                        return Stuck(StuckKind.SUBTYPE_CAST_FAILURE, print_expr(e))
                self.focus = e.body
                return e

            if isinstance(e, BehCast):
                if not isinstance(e.body, Addr):
                    self.stack.append((_CAST, e))
                    self.focus = e.body
                    continue
                obj = self._get(e.body.address)
                try:
                    wrapper = _generate_wrapper(
                        self.table.get(obj.class_name), e.target, self.table
                    )
                except BehavioralCastError:
                    return Stuck(StuckKind.BEHAVIORAL_CAST_FAILURE, print_expr(e))
                self.table = self.table.extend(wrapper)
                address = self._alloc(HeapObject(wrapper.name, (e.body.address,)))
                self.focus = Addr(address)
                return e

            if isinstance(e, Seq):
                if not isinstance(e.first, Addr):
                    self.stack.append((_SEQ, e))
                    self.focus = e.first
                    continue
                self.focus = e.second
                return e

            raise KafkaRuntimeError(
                f"no reduction applies to open term: {print_expr(e)}"
            )


def _plug(kind: int, node: KafkaExpr, child: KafkaExpr) -> KafkaExpr:
    if kind == _NEW:
        index = next(
            i for i, a in enumerate(node.args) if not isinstance(a, Addr)
        )
        args = node.args[:index] + (child,) + node.args[index + 1:]
        return KNew(node.class_name, args)
    if kind == _RECV:
        if isinstance(node, StaticCall):
            return StaticCall(child, node.method, node.arg,
                              node.arg_type, node.return_type)
        return DynCall(child, node.method, node.arg)
    if kind == _ARG:
        if isinstance(node, StaticCall):
            return StaticCall(node.receiver, node.method, child,
                              node.arg_type, node.return_type)
        return DynCall(node.receiver, node.method, child)
    if kind == _CAST:
        if isinstance(node, SubCast):
            return SubCast(node.target, child)
        return BehCast(node.target, child)
    if kind == _WRITE:
        return AddrFieldWrite(node.address, node.field_name, child)
    assert kind == _SEQ
    return Seq(child, node.second)


def step(state: MachineState) -> Union[MachineState, Stuck]:
    """Perform exactly one reduction, or report why none applies."""
    if isinstance(state.expr, Addr):
        raise KafkaRuntimeError("cannot step a value")
    machine = _Machine(state)
    result = machine.tick()
    if isinstance(result, Stuck):
        return result
    assert result is not None
    return MachineState(machine.table, machine.snapshot_expr(), machine.heap())


def _lookup_static(table: KafkaClassTable, cls_name: str, method: str,
                   arg_type: Type, return_type: Type) -> Optional[KafkaMethodDef]:
    """Run-time static-call dispatch: a method of the receiver's class whose
    declared signature is compatible with the call annotation (argument
    contravariant, return covariant). Exact annotation matches win, then
    typed methods, making dispatch deterministic under overloading."""
    def compatible(md: KafkaMethodDef) -> bool:
        if md.name != method:
            return False
        try:
            return (
                subtype(EMPTY_ASSUMPTIONS, table, arg_type, md.param_type)
                and subtype(EMPTY_ASSUMPTIONS, table, md.return_type, return_type)
            )
        except UnknownClassError:
            return False

    candidates = [md for md in table.get(cls_name).methods if compatible(md)]
    if not candidates:
        return None
    for md in candidates:
        if md.param_type == arg_type and md.return_type == return_type:
            return md
    for md in candidates:
        if not md.is_untyped():
            return md
    return candidates[0]


def substitute(e: KafkaExpr, self_address: Address, param: str,
               arg_address: Address) -> KafkaExpr:
    """[a/this, a'/x]e; field accesses on this become address field
    accesses, and `this.that` resolves against the receiver address."""
    if isinstance(e, KVar):
        return Addr(arg_address) if e.name == param else e
    if isinstance(e, KThis):
        return Addr(self_address)
    if isinstance(e, KThat):
        return AddrFieldRead(self_address, "that")
    if isinstance(e, KFieldRead):
        return AddrFieldRead(self_address, e.field_name)
    if isinstance(e, KFieldWrite):
        return AddrFieldWrite(
            self_address, e.field_name,
            substitute(e.value, self_address, param, arg_address),
        )
    if isinstance(e, KNew):
        return KNew(
            e.class_name,
            tuple(substitute(a, self_address, param, arg_address) for a in e.args),
        )
    if isinstance(e, StaticCall):
        return StaticCall(
            substitute(e.receiver, self_address, param, arg_address),
            e.method,
            substitute(e.arg, self_address, param, arg_address),
            e.arg_type,
            e.return_type,
        )
    if isinstance(e, DynCall):
        return DynCall(
            substitute(e.receiver, self_address, param, arg_address),
            e.method,
            substitute(e.arg, self_address, param, arg_address),
        )
    if isinstance(e, SubCast):
        return SubCast(e.target, substitute(e.body, self_address, param, arg_address))
    if isinstance(e, BehCast):
        return BehCast(e.target, substitute(e.body, self_address, param, arg_address))
    if isinstance(e, Seq):
        return Seq(
            substitute(e.first, self_address, param, arg_address),
            substitute(e.second, self_address, param, arg_address),
        )
    if isinstance(e, Addr):
        return e
    if isinstance(e, AddrFieldRead):
        return e
    if isinstance(e, AddrFieldWrite):
        return AddrFieldWrite(
            e.address, e.field_name,
            substitute(e.value, self_address, param, arg_address),
        )
    raise KafkaRuntimeError(f"cannot substitute into {e!r}")


# ---------------------------------------------------------------------------
# Driver
# ---------------------------------------------------------------------------

def run(table: KafkaClassTable, expr: KafkaExpr, fuel: int = DEFAULT_FUEL,
        trace: bool = False) -> tuple[Outcome, list[TraceStep]]:
    """Iterate step until a value, a stuck state, or fuel runs out.

    One machine persists across steps, so run time is proportional to the
    number of reductions even when the expression grows without bound.
    """
    machine = _Machine(MachineState(table, expr, Heap.empty()))
    records: list[TraceStep] = []
    steps = 0
    while True:
        if isinstance(machine.focus, Addr) and not machine.stack:
            return Value(machine.focus.address), records
        if steps >= fuel:
            return FuelExhausted(steps), records
        result = machine.tick()
        if result is None:
            return Value(machine.focus.address), records
        if isinstance(result, Stuck):
            return result, records
        if trace:
            records.append(
                TraceStep(steps, print_expr(result),
                          len(machine.objects), len(machine.table))
            )
        steps += 1
