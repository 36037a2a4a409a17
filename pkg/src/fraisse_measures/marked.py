"""Marked structures, extraneous points, and minimal marked classes.

A marked structure is a member with one distinguished point.  A point other
than the mark is extraneous when it is separated from the mark; deleting it
does not change which generator of the measure ring the marked structure
names, so repeated deletion (reduction) lands on a well-defined minimal
marked class whatever the deletion order.  A class has the finiteness
property this package needs exactly when only finitely many minimal marked
classes exist; the enumeration below certifies that up to a size bound by
noticing that no minimal class appears at the bound itself.
"""

from __future__ import annotations

from dataclasses import dataclass

from .amalgamation import _separated
from .parallel import parallel_map
from .structures import (
    ClassDefinition,
    Structure,
    canonical_form,
    enumerate_structures,
)


@dataclass(frozen=True)
class MarkedStructure:
    """A member structure with one distinguished point."""

    structure: Structure
    mark: int

    def __post_init__(self):
        if not 0 <= self.mark < self.structure.size:
            raise ValueError(f"mark {self.mark} out of range for size {self.structure.size}")


class MinimalMarkedClass:
    """An isomorphism class of minimal marked structures.

    The representative is canonical with the mark at index 0; the certificate
    is the mark-pinned canonical certificate.  var_id is the dense variable
    index used by relation systems, assigned in certificate order by
    enumerate_minimal_marked (certificates sort by size first, so ids are
    stable when the enumeration bound grows).
    """

    __slots__ = ("structure", "mark", "certificate", "size", "var_id")

    def __init__(self, structure: Structure, certificate: bytes):
        self.structure = structure
        self.mark = 0
        self.certificate = certificate
        self.size = structure.size
        self.var_id = None

    def __eq__(self, other):
        return isinstance(other, MinimalMarkedClass) and self.certificate == other.certificate

    def __hash__(self):
        return hash(self.certificate)

    def __repr__(self):
        return f"MinimalMarkedClass(size={self.size}, cert={self.certificate.decode('ascii')})"


def _intern_minimal(cls: ClassDefinition, structure: Structure, mark: int) -> MinimalMarkedClass:
    ctx = cls.context()
    form = canonical_form(structure, pins=(mark,))
    known = ctx.minimal_by_certificate.get(form.certificate)
    if known is None:
        known = MinimalMarkedClass(form.structure, form.certificate)
        ctx.minimal_by_certificate[form.certificate] = known
    return known


def is_extraneous(cls: ClassDefinition, marked: MarkedStructure, point: int) -> bool:
    """Whether `point` is separated from the mark (and hence deletable)."""
    if point == marked.mark:
        raise ValueError("the mark itself cannot be extraneous")
    if not 0 <= point < marked.structure.size:
        raise ValueError(f"point {point} out of range")
    return _separated(cls, marked.structure, (point,), (marked.mark,))


def reduce(cls: ClassDefinition, marked: MarkedStructure) -> MinimalMarkedClass:
    """Delete extraneous points until none remain; memoised per class.

    The result does not depend on deletion order.  The highest-index
    extraneous point is taken first: callers that extend a structure place
    new points at the top indices, so this order makes their chains collapse
    onto keys the memo already holds.
    """
    return _reduce_raw(cls, marked.structure, marked.mark)


def _reduce_raw(cls: ClassDefinition, structure: Structure, mark: int) -> MinimalMarkedClass:
    memo = cls.context().reduce_memo
    chain = []
    while True:
        key = (structure, mark)
        hit = memo.get(key)
        if hit is not None:
            result = hit
            break
        chain.append(key)
        extraneous = None
        for y in range(structure.size - 1, -1, -1):
            if y != mark and _separated(cls, structure, (y,), (mark,)):
                extraneous = y
                break
        if extraneous is None:
            result = _intern_minimal(cls, structure, mark)
            break
        structure = structure.delete(extraneous)
        if extraneous < mark:
            mark -= 1
    for key in chain:
        memo[key] = result
    return result


def enumerate_minimal_marked(cls: ClassDefinition, bound: int, jobs: int = 1):
    """All minimal marked classes of size <= bound, sorted by certificate,
    with a completeness flag (true when none appears at the bound itself, so
    the inventory provably has everything).

    Assigns var_id on the returned classes in list order.
    """
    if bound < 1:
        raise ValueError("bound must be at least 1")
    ctx = cls.context()
    cached = ctx.minimal_cache.get(bound)
    if cached is None:
        if ctx.cache_store is not None:
            cached = ctx.cache_store.load_minimal(cls, bound)
    if cached is None:
        found = {}
        for size in range(1, bound + 1):
            for certificate, masks in _minimal_level(cls, size, jobs):
                if certificate not in found:
                    found[certificate] = Structure.raw(cls.signature, size, masks)
        complete = all(s.size < bound for s in found.values())
        cached = (
            tuple(
                (certificate, found[certificate]) for certificate in sorted(found)
            ),
            complete,
        )
    ctx.minimal_cache[bound] = cached
    if ctx.cache_store is not None:
        ctx.cache_store.save_minimal(cls, bound, cached)

    classes = []
    pairs, complete = cached
    for certificate, structure in pairs:
        known = ctx.minimal_by_certificate.get(certificate)
        if known is None:
            known = MinimalMarkedClass(structure, certificate)
            ctx.minimal_by_certificate[certificate] = known
        classes.append(known)
    for var_id, item in enumerate(classes):
        item.var_id = var_id
    return classes, complete


def _minimal_level(cls: ClassDefinition, size: int, jobs: int):
    """(certificate, masks) for each minimal marked class found at one size."""
    reps = enumerate_structures(cls, size, jobs=jobs)

    def scan(rep):
        out = []
        seen_marks = set()
        for mark in range(size):
            if rep.aut_order > 1:
                # Marks in one automorphism orbit give the same marked class;
                # rigid structures never repeat, so skip the pinned form then.
                pinned = canonical_form(rep.structure, pins=(mark,)).certificate
                if pinned in seen_marks:
                    continue
                seen_marks.add(pinned)
            reduced = _reduce_raw(cls, rep.structure, mark)
            if reduced.size == size:
                out.append((reduced.certificate, reduced.structure.masks))
        return out

    level = []
    for chunk in parallel_map(scan, reps, jobs):
        level.extend(chunk)
    return level


@dataclass(frozen=True)
class FmmCertificate:
    """Outcome of a minimal-marked enumeration up to a bound."""

    complete: bool
    count: int
    max_size: int
    bound: int
    by_size: dict


def fmm_certificate(cls: ClassDefinition, bound: int, jobs: int = 1) -> FmmCertificate:
    """Summarise the minimal marked inventory up to `bound`."""
    classes, complete = enumerate_minimal_marked(cls, bound, jobs=jobs)
    by_size = {}
    for item in classes:
        by_size.setdefault(item.size, []).append(item.certificate.decode("ascii"))
    return FmmCertificate(
        complete=complete,
        count=len(classes),
        max_size=max((item.size for item in classes), default=0),
        bound=bound,
        by_size=by_size,
    )
