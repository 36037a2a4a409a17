"""Amalgamation diagrams, separation, and parity/property scans.

An amalgamation of Y and Z over X (along embeddings i: X -> Y, j: X -> Z) is
a member W covered by embeddings of Y and Z that agree on X.  Diagrams are
enumerated up to equivalence using a fixed labeling convention: the result
keeps Y's indices, and right-hand points not identified with left-hand ones
are appended in order.  Under that convention the connecting isomorphism
between equivalent diagrams is unique and forced to be the identity, so two
diagrams are equivalent exactly when their results are equal as labeled
structures.  Enumeration therefore walks partial matchings between Y\\X and
Z\\X, checks each matching for consistency, and completes the mixed (left
loose point vs new right point) tuple slots per relation according to the
relation's axiom tag.  Tagged axioms hold for every completion by
construction; only forbidden-substructure filters can reject a candidate.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .parallel import parallel_map
from .structures import (
    ClassDefinition,
    Embedding,
    FraisseError,
    Structure,
    canonical_form,
    enumerate_structures,
    is_member,
    one_point_extensions,
    _chain_mask,
    _passes_filters,
)

# Separation queries on structures up to this size are memoised per class.
_SEPARATION_MEMO_MAX_SIZE = 6


class NotAMemberError(FraisseError):
    """An amalgamation endpoint is not a member of the class."""


@dataclass(frozen=True)
class AmalgamationDiagram:
    """One amalgamation of left.codomain and right.codomain over the base."""

    base: Structure
    left: Embedding
    right: Embedding
    result: Structure
    left_leg: Embedding
    right_leg: Embedding

    @property
    def identified_count(self) -> int:
        free = self.left.codomain.size + self.right.codomain.size - self.base.size
        return free - self.result.size

    def check(self, cls: ClassDefinition) -> None:
        """Validate every diagram invariant (test helper; raises on failure)."""
        revalidated = [
            Embedding(self.left.domain, self.left.codomain, self.left.map),
            Embedding(self.right.domain, self.right.codomain, self.right.map),
            Embedding(self.left_leg.domain, self.left_leg.codomain, self.left_leg.map),
            Embedding(self.right_leg.domain, self.right_leg.codomain, self.right_leg.map),
        ]
        del revalidated
        if self.left.domain != self.base or self.right.domain != self.base:
            raise AssertionError("legs do not share the base")
        through_left = self.left.compose(self.left_leg)
        through_right = self.right.compose(self.right_leg)
        if through_left != through_right:
            raise AssertionError("diagram does not commute")
        covered = set(self.left_leg.map) | set(self.right_leg.map)
        if covered != set(range(self.result.size)):
            raise AssertionError("legs do not cover the result")
        if not is_member(cls, self.result):
            raise AssertionError("result escapes the class")


def _matchings(free_left, free_right):
    """Partial injective matchings, by decreasing size then pair order."""
    limit = min(len(free_left), len(free_right))
    for t in range(limit, -1, -1):
        for ys in itertools.combinations(free_left, t):
            for zs in itertools.permutations(free_right, t):
                yield tuple(zip(ys, zs))


def _matching_frame(left: Embedding, right: Embedding, pairs):
    """Forced data for one matching, or None if Y and Z disagree on it.

    Returns (result_size, i_prime, forced_masks, loose_left, new_right)
    where i_prime maps right-codomain points into the result.
    """
    Y = left.codomain
    Z = right.codomain
    sig = Y.signature
    matched_right = {z: y for y, z in pairs}
    matched_left = {y for y, _ in pairs}
    image_left = set(left.map)
    j_inverse = {right.map[x]: x for x in range(right.domain.size)}

    new_right = [
        z
        for z in range(Z.size)
        if z not in j_inverse and z not in matched_right
    ]
    m = Y.size + len(new_right)
    position = {z: Y.size + k for k, z in enumerate(new_right)}

    i_prime = [0] * Z.size
    for z in range(Z.size):
        if z in j_inverse:
            i_prime[z] = left.map[j_inverse[z]]
        elif z in matched_right:
            i_prime[z] = matched_right[z]
        else:
            i_prime[z] = position[z]

    overlap = image_left | matched_left
    forced = []
    for r in range(len(sig)):
        mapped = set()
        mapped_in_left_part = set()
        for t in Z.tuples(r):
            mt = tuple(i_prime[v] for v in t)
            mapped.add(mt)
            if all(v < Y.size for v in mt):
                mapped_in_left_part.add(mt)
        left_in_overlap = {
            t for t in Y.tuples(r) if all(v in overlap for v in t)
        }
        if left_in_overlap != mapped_in_left_part:
            return None
        mask = 0
        for t in itertools.chain(Y.tuples(r), mapped):
            idx = 0
            for v in t:
                idx = idx * m + v
            mask |= 1 << idx
        forced.append(mask)

    loose_left = [y for y in range(Y.size) if y not in image_left and y not in matched_left]
    return m, tuple(i_prime), forced, loose_left, new_right


def _topo_orders(m, edges):
    """All strict total orders on 0..m-1 extending the given before-pairs."""
    indeg = [0] * m
    succs = [[] for _ in range(m)]
    for u, v in edges:
        succs[u].append(v)
        indeg[v] += 1
    placed = [False] * m
    seq = []

    def rec():
        if len(seq) == m:
            yield tuple(seq)
            return
        for v in range(m):
            if not placed[v] and indeg[v] == 0:
                placed[v] = True
                seq.append(v)
                for w in succs[v]:
                    indeg[w] -= 1
                yield from rec()
                for w in succs[v]:
                    indeg[w] += 1
                seq.pop()
                placed[v] = False

    yield from rec()


def _count_topo_orders(m, edges) -> int:
    indeg = [0] * m
    succs = [[] for _ in range(m)]
    for u, v in edges:
        succs[u].append(v)
        indeg[v] += 1
    placed = [False] * m

    def rec(done):
        if done == m:
            return 1
        total = 0
        for v in range(m):
            if not placed[v] and indeg[v] == 0:
                placed[v] = True
                for w in succs[v]:
                    indeg[w] -= 1
                total += rec(done + 1)
                for w in succs[v]:
                    indeg[w] += 1
                placed[v] = False
        return total

    return rec(0)


def _mixed_slots(sig, rel_index, m, loose_left, new_right_start):
    """Tuple slots left undetermined by the matching: at least one loose left
    point and at least one new right point."""
    arity = sig.arity(rel_index)
    loose = set(loose_left)
    slots = []
    for t in itertools.product(range(m), repeat=arity):
        if any(v >= new_right_start for v in t) and any(v in loose for v in t):
            slots.append(t)
    return slots


def _completion_units(cls, sig, m, forced, loose_left, new_right_start):
    """Per-relation lists of OR-masks completing the forced contents, or
    None when an order relation admits no completion."""
    order_set = set(cls.order_relations)
    sym_set = set(cls.symmetric_relations)
    units = []
    for r in range(len(sig)):
        if r in order_set:
            edges = []
            mask = forced[r]
            while mask:
                low = mask & -mask
                idx = low.bit_length() - 1
                mask ^= low
                edges.append((idx // m, idx % m))
            orders = [_chain_mask(seq, m) for seq in _topo_orders(m, edges)]
            if not orders:
                return None
            units.append(orders)
        elif r in sym_set:
            pairs = [
                (u, v)
                for u in loose_left
                for v in range(new_right_start, m)
            ]
            choices = []
            for bits in range(1 << len(pairs)):
                mask = 0
                for k, (u, v) in enumerate(pairs):
                    if bits >> k & 1:
                        mask |= 1 << (u * m + v)
                        mask |= 1 << (v * m + u)
                choices.append(mask)
            units.append(choices)
        elif sig.arity(r) == 1:
            units.append([0])
        else:
            slots = _mixed_slots(sig, r, m, loose_left, new_right_start)
            choices = []
            for bits in range(1 << len(slots)):
                mask = 0
                for k, t in enumerate(slots):
                    if bits >> k & 1:
                        idx = 0
                        for v in t:
                            idx = idx * m + v
                        mask |= 1 << idx
                choices.append(mask)
            units.append(choices)
    return units


def iter_amalgamations(cls: ClassDefinition, left: Embedding, right: Embedding):
    """Yield amalgamation diagrams of (left, right) in deterministic order:
    matchings by decreasing identification size, results by encoding within
    each matching."""
    Y = left.codomain
    Z = right.codomain
    sig = Y.signature
    free_left = [p for p in range(Y.size) if p not in set(left.map)]
    free_right = [p for p in range(Z.size) if p not in set(right.map)]

    for pairs in _matchings(free_left, free_right):
        frame = _matching_frame(left, right, pairs)
        if frame is None:
            continue
        m, i_prime, forced, loose_left, new_right = frame
        units = _completion_units(cls, sig, m, forced, loose_left, Y.size)
        if units is None:
            continue
        results = []
        for combo in itertools.product(*units):
            masks = tuple(f | extra for f, extra in zip(forced, combo))
            candidate = Structure.raw(sig, m, masks)
            if _passes_filters(cls, candidate):
                results.append(candidate)
        results.sort(key=lambda s: s.masks)
        for W in results:
            yield AmalgamationDiagram(
                base=left.domain,
                left=left,
                right=right,
                result=W,
                left_leg=Embedding(Y, W, tuple(range(Y.size)), validate=False),
                right_leg=Embedding(Z, W, i_prime, validate=False),
            )


def enumerate_amalgamations(cls: ClassDefinition, left: Embedding, right: Embedding):
    """All amalgamation diagrams of (left, right), validated and listed."""
    if left.domain != right.domain:
        raise ValueError("left and right embeddings must share their domain")
    for name, endpoint in (("base", left.domain), ("left", left.codomain), ("right", right.codomain)):
        if not is_member(cls, endpoint):
            raise NotAMemberError(f"{name} structure is not a member of {cls.name}")
    return list(iter_amalgamations(cls, left, right))


def count_amalgamations(cls: ClassDefinition, left: Embedding, right: Embedding) -> int:
    """Number of amalgamation diagrams; avoids materialising them when the
    class has no forbidden substructures (completions are then all valid)."""
    if cls.has_forbidden():
        return sum(1 for _ in iter_amalgamations(cls, left, right))
    Y = left.codomain
    Z = right.codomain
    sig = Y.signature
    order_set = set(cls.order_relations)
    sym_set = set(cls.symmetric_relations)
    free_left = [p for p in range(Y.size) if p not in set(left.map)]
    free_right = [p for p in range(Z.size) if p not in set(right.map)]
    total = 0
    for pairs in _matchings(free_left, free_right):
        frame = _matching_frame(left, right, pairs)
        if frame is None:
            continue
        m, _, forced, loose_left, new_right = frame
        product = 1
        for r in range(len(sig)):
            if r in order_set:
                edges = []
                mask = forced[r]
                while mask:
                    low = mask & -mask
                    idx = low.bit_length() - 1
                    mask ^= low
                    edges.append((idx // m, idx % m))
                product *= _count_topo_orders(m, edges)
            elif r in sym_set:
                product *= 1 << (len(loose_left) * len(new_right))
            elif sig.arity(r) >= 2:
                product *= 1 << len(_mixed_slots(sig, r, m, loose_left, Y.size))
            if product == 0:
                break
        total += product
    return total


# ---------------------------------------------------------------------------
# separation


@dataclass(frozen=True)
class SeparationQuery:
    """Disjoint point groups A and B inside one structure."""

    structure: Structure
    group_a: tuple
    group_b: tuple

    def __post_init__(self):
        a = tuple(sorted(set(self.group_a)))
        b = tuple(sorted(set(self.group_b)))
        object.__setattr__(self, "group_a", a)
        object.__setattr__(self, "group_b", b)
        n = self.structure.size
        if any(not 0 <= p < n for p in a + b):
            raise ValueError("group points out of range")
        if set(a) & set(b):
            raise ValueError("groups must be disjoint")


def _inclusion_of(structure: Structure, inner_points, outer_points) -> Embedding:
    inner = structure.induced(inner_points)
    outer = structure.induced(outer_points)
    index_in_outer = {p: k for k, p in enumerate(outer_points)}
    return Embedding(
        inner, outer, tuple(index_in_outer[p] for p in inner_points), validate=False
    )


def is_separated(cls: ClassDefinition, query: SeparationQuery) -> bool:
    """Whether the groups are separated: the whole structure is the unique
    amalgamation of (X minus A) and (X minus B) over (X minus both)."""
    return _separated(cls, query.structure, query.group_a, query.group_b)


def _separated(cls: ClassDefinition, structure: Structure, a: tuple, b: tuple) -> bool:
    """Separation on pre-validated sorted disjoint groups (hot path)."""
    memo = None
    if structure.size <= _SEPARATION_MEMO_MAX_SIZE:
        memo = cls.context().separation_memo
        key = (structure, a, b)
        hit = memo.get(key)
        if hit is not None:
            return hit
    dropped = set(a) | set(b)
    rest = [p for p in range(structure.size) if p not in dropped]
    left_points = [p for p in range(structure.size) if p not in set(a)]
    right_points = [p for p in range(structure.size) if p not in set(b)]
    left = _inclusion_of(structure, rest, left_points)
    right = _inclusion_of(structure, rest, right_points)
    gen = iter_amalgamations(cls, left, right)
    first = next(gen, None)
    result = first is not None and next(gen, None) is None
    if memo is not None:
        memo[key] = result
    return result


# ---------------------------------------------------------------------------
# extension classes over a fixed base


def extension_classes_over(cls: ClassDefinition, base: Structure, max_size: int):
    """Structures extending `base` (as the identity prefix inclusion) by one
    or more points, up to isomorphism over the base, sizes <= max_size."""
    out = []
    current = [base]
    pins = tuple(range(base.size))
    for _ in range(base.size + 1, max_size + 1):
        seen = {}
        for y in current:
            for extension, _ in one_point_extensions(cls, y):
                cert = canonical_form(extension, pins=pins).certificate
                seen.setdefault(cert, extension)
        current = [seen[c] for c in sorted(seen)]
        out.extend(current)
    return out


# ---------------------------------------------------------------------------
# scans


@dataclass(frozen=True)
class ScanReport:
    passed: bool
    bound: int
    mode: str
    checked: int
    counterexample: dict | None


def _pair_record(base, left_struct, right_struct, count):
    return {
        "base": base.to_dict(),
        "left": left_struct.to_dict(),
        "right": right_struct.to_dict(),
        "count": count,
    }


def oddness_scan(
    cls: ClassDefinition, bound: int, mode: str = "one-point", jobs: int = 1
) -> ScanReport:
    """Check amalgamation counts are odd.

    one-point mode: all pairs of one point extensions of bases of size
    < bound (these counts generate the parity behaviour of the class).
    exhaustive mode: all pairs of extension classes over bases, with every
    structure involved of size <= bound.  Reports the first even count.
    """
    if mode not in ("one-point", "exhaustive"):
        raise ValueError(f"unknown oddness mode {mode!r}")
    checked = 0
    if mode == "one-point":
        for size in range(bound):
            reps = enumerate_structures(cls, size, jobs=jobs)

            def level(rep):
                base = rep.structure
                exts = one_point_extensions(cls, base)
                found = None
                local = 0
                for k, (left_struct, _) in enumerate(exts):
                    left = Embedding.inclusion(base, left_struct)
                    for right_struct, _ in exts[k:]:
                        right = Embedding.inclusion(base, right_struct)
                        count = count_amalgamations(cls, left, right)
                        local += 1
                        if count % 2 == 0 and found is None:
                            found = _pair_record(base, left_struct, right_struct, count)
                return local, found

            for local, found in parallel_map(level, reps, jobs):
                checked += local
                if found is not None:
                    return ScanReport(False, bound, mode, checked, found)
    else:
        for size in range(bound + 1):
            for rep in enumerate_structures(cls, size):
                base = rep.structure
                classes = extension_classes_over(cls, base, bound)
                for k, left_struct in enumerate(classes):
                    left = Embedding.inclusion(base, left_struct)
                    for right_struct in classes[k:]:
                        right = Embedding.inclusion(base, right_struct)
                        count = count_amalgamations(cls, left, right)
                        checked += 1
                        if count % 2 == 0:
                            return ScanReport(
                                False,
                                bound,
                                mode,
                                checked,
                                _pair_record(base, left_struct, right_struct, count),
                            )
    return ScanReport(True, bound, mode, checked, None)


def self_pair_class_count(cls: ClassDefinition, base: Structure, extension: Structure) -> int:
    """Non-identifying self-amalgamations of a one point extension over its
    base, counted up to swapping the two copies."""
    if extension.size != base.size + 1:
        raise ValueError("extension must add exactly one point to the base")
    inclusion = Embedding.inclusion(base, extension)
    transpose = list(range(base.size + 2))
    transpose[base.size], transpose[base.size + 1] = transpose[base.size + 1], transpose[base.size]
    seen = set()
    count = 0
    for diagram in iter_amalgamations(cls, inclusion, inclusion):
        if diagram.result.size != base.size + 2:
            continue
        enc = diagram.result.masks
        if enc in seen:
            continue
        seen.add(enc)
        seen.add(diagram.result.relabel(transpose).masks)
        count += 1
    return count


def amalgamation_property_scan(cls: ClassDefinition, bound: int) -> ScanReport:
    """Check every pair of extensions (sizes <= bound) admits at least one
    amalgamation; reports the first failing pair."""
    return _existence_scan(cls, bound, require_empty_matching=False, mode="amalgamation")


def strong_amalgamation_scan(cls: ClassDefinition, bound: int) -> ScanReport:
    """Check every pair admits an amalgamation identifying nothing."""
    return _existence_scan(cls, bound, require_empty_matching=True, mode="strong")


def _existence_scan(cls, bound, require_empty_matching, mode) -> ScanReport:
    checked = 0
    for size in range(bound + 1):
        for rep in enumerate_structures(cls, size):
            base = rep.structure
            classes = extension_classes_over(cls, base, bound)
            for k, left_struct in enumerate(classes):
                left = Embedding.inclusion(base, left_struct)
                for right_struct in classes[k:]:
                    right = Embedding.inclusion(base, right_struct)
                    checked += 1
                    found = False
                    expected = left_struct.size + right_struct.size - base.size
                    for diagram in iter_amalgamations(cls, left, right):
                        if not require_empty_matching or diagram.result.size == expected:
                            found = True
                            break
                    if not found:
                        return ScanReport(
                            False,
                            bound,
                            mode,
                            checked,
                            _pair_record(base, left_struct, right_struct, 0),
                        )
    return ScanReport(True, bound, mode, checked, None)
