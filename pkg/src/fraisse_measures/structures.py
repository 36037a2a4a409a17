"""Finite relational structures and the classes they form.

Everything downstream (amalgamation search, marked-structure reduction, the
measure solver) works with the immutable types defined here.

Conventions used throughout the package:

* Points of a size-n structure are the integers 0 .. n-1.
* A relation of arity k is stored as a bitmask over the n**k tuple slots,
  with tuple (t0, .., t_{k-1}) at bit t0*n**(k-1) + .. + t_{k-1}.  Structures
  stay tiny (a dozen points at most), so a relation fits in one int and
  hashing structures, which memoisation does constantly, is cheap.
* Certificates are byte strings.  Equal certificates mean isomorphic
  structures (respecting pinned points), certificates of smaller structures
  sort first, and the bytes are stable across runs and processes.
* A class is described by per-relation axiom tags (strict total order,
  irreflexive symmetric, unary exactly-one-of-group), a list of forbidden
  induced substructures, and optional projections onto other classes used by
  the join/colored combinators.  Membership is decidable from that data
  alone, and every class built this way is hereditary by construction.
"""

from __future__ import annotations

import functools
import hashlib
import itertools
import json
from dataclasses import dataclass
from math import gcd

import yaml

from .parallel import parallel_map


class FraisseError(Exception):
    """Base for errors raised by this package."""


class SignatureMismatchError(FraisseError):
    """A structure was used with a class or structure over another signature."""


class ClassFileError(FraisseError):
    """A user class file or structure file failed validation."""


# Axiom tags accepted in class files.
TAG_ORDER = "strict-total-order"
TAG_SYMMETRIC = "irreflexive-symmetric"


# ---------------------------------------------------------------------------
# signatures and structures


class Signature:
    """An ordered list of named relations with arities."""

    __slots__ = ("relations", "_hash")

    def __init__(self, relations):
        rels = []
        seen = set()
        for name, arity in relations:
            name = str(name)
            arity = int(arity)
            if not name:
                raise ValueError("relation names must be nonempty")
            if name in seen:
                raise ValueError(f"duplicate relation name {name!r}")
            if arity < 1:
                raise ValueError(f"relation {name!r} has arity {arity} < 1")
            seen.add(name)
            rels.append((name, arity))
        self.relations = tuple(rels)
        self._hash = hash(self.relations)

    def arity(self, index: int) -> int:
        return self.relations[index][1]

    def name(self, index: int) -> str:
        return self.relations[index][0]

    def index_of(self, name: str) -> int:
        for i, (rname, _) in enumerate(self.relations):
            if rname == name:
                return i
        raise KeyError(name)

    def __len__(self):
        return len(self.relations)

    def __eq__(self, other):
        return isinstance(other, Signature) and self.relations == other.relations

    def __hash__(self):
        return self._hash

    def __repr__(self):
        inner = ", ".join(f"{n}/{a}" for n, a in self.relations)
        return f"Signature({inner})"


@functools.lru_cache(maxsize=1 << 18)
def _decode_mask(mask: int, n: int, arity: int):
    """Decode a relation bitmask into tuples, ascending by slot index."""
    out = []
    while mask:
        low = mask & -mask
        idx = low.bit_length() - 1
        mask ^= low
        t = []
        for _ in range(arity):
            t.append(idx % n)
            idx //= n
        t.reverse()
        out.append(tuple(t))
    return tuple(out)


def _encode_tuples(tuples, n: int) -> int:
    mask = 0
    for t in tuples:
        idx = 0
        for v in t:
            idx = idx * n + v
        mask |= 1 << idx
    return mask


class Structure:
    """An immutable finite relational structure on points 0 .. size-1."""

    __slots__ = ("signature", "size", "masks", "_hash")

    def __init__(self, signature: Signature, size: int, contents):
        if size < 0:
            raise ValueError("size must be nonnegative")
        contents = tuple(tuple(map(tuple, rel)) for rel in contents)
        if len(contents) != len(signature):
            raise ValueError(
                f"expected contents for {len(signature)} relations, got {len(contents)}"
            )
        masks = []
        for rel_index, rel in enumerate(contents):
            arity = signature.arity(rel_index)
            for t in rel:
                if len(t) != arity:
                    raise ValueError(
                        f"relation {signature.name(rel_index)!r} expects "
                        f"{arity}-tuples, got {t!r}"
                    )
                for v in t:
                    if not isinstance(v, int) or not 0 <= v < size:
                        raise ValueError(f"tuple entry {v!r} out of range for size {size}")
            masks.append(_encode_tuples(rel, size))
        self.signature = signature
        self.size = size
        self.masks = tuple(masks)
        self._hash = hash((self.signature, self.size, self.masks))

    @classmethod
    def raw(cls, signature: Signature, size: int, masks) -> "Structure":
        """Fast constructor for masks already known to be valid."""
        self = object.__new__(cls)
        self.signature = signature
        self.size = size
        self.masks = tuple(masks)
        self._hash = hash((signature, self.size, self.masks))
        return self

    def tuples(self, rel_index: int):
        """The tuples of one relation, ascending by slot index."""
        return _decode_mask(self.masks[rel_index], self.size, self.signature.arity(rel_index))

    @property
    def contents(self):
        return tuple(frozenset(self.tuples(i)) for i in range(len(self.signature)))

    def has(self, rel_index: int, t) -> bool:
        idx = 0
        for v in t:
            idx = idx * self.size + v
        return bool(self.masks[rel_index] >> idx & 1)

    def relabel(self, perm) -> "Structure":
        """Apply a permutation of the points; perm[old] = new."""
        n = self.size
        masks = []
        for i in range(len(self.signature)):
            mask = 0
            for t in self.tuples(i):
                idx = 0
                for v in t:
                    idx = idx * n + perm[v]
                mask |= 1 << idx
            masks.append(mask)
        return Structure.raw(self.signature, n, masks)

    def induced(self, points) -> "Structure":
        """The induced substructure on the given points, reindexed in order."""
        points = tuple(points)
        where = [-1] * self.size
        for i, p in enumerate(points):
            if not 0 <= p < self.size:
                raise ValueError(f"induced point {p} out of range")
            if where[p] != -1:
                raise ValueError("induced points must be distinct")
            where[p] = i
        m = len(points)
        masks = []
        for i in range(len(self.signature)):
            mask = 0
            for t in self.tuples(i):
                idx = 0
                for v in t:
                    w = where[v]
                    if w < 0:
                        idx = -1
                        break
                    idx = idx * m + w
                if idx >= 0:
                    mask |= 1 << idx
            masks.append(mask)
        return Structure.raw(self.signature, m, masks)

    def delete(self, point: int) -> "Structure":
        """The induced substructure dropping one point."""
        return self.induced(tuple(p for p in range(self.size) if p != point))

    def reduct(self, signature: Signature, rel_indices) -> "Structure":
        """The structure over `signature` keeping the selected relations."""
        return Structure.raw(signature, self.size, tuple(self.masks[i] for i in rel_indices))

    def to_dict(self) -> dict:
        return {
            "signature": [[n, a] for n, a in self.signature.relations],
            "size": self.size,
            "relations": {
                self.signature.name(i): sorted(self.tuples(i))
                for i in range(len(self.signature))
            },
        }

    def __eq__(self, other):
        return (
            isinstance(other, Structure)
            and self.size == other.size
            and self.masks == other.masks
            and self.signature == other.signature
        )

    def __hash__(self):
        return self._hash

    def __repr__(self):
        parts = [f"size={self.size}"]
        for i in range(len(self.signature)):
            parts.append(f"{self.signature.name(i)}={sorted(self.tuples(i))}")
        return "Structure(" + "; ".join(parts) + ")"


def structure_from_dict(payload: dict) -> Structure:
    """Parse the dict form produced by Structure.to_dict (also used in files)."""
    try:
        signature = Signature(payload["signature"])
        size = int(payload["size"])
        rels = payload.get("relations", {})
        unknown = set(rels) - {n for n, _ in signature.relations}
        if unknown:
            raise ValueError(f"relations not in signature: {sorted(unknown)}")
        contents = [rels.get(name, ()) for name, _ in signature.relations]
        return Structure(signature, size, contents)
    except (KeyError, TypeError, ValueError) as exc:
        raise ClassFileError(f"bad structure description: {exc}") from exc


# ---------------------------------------------------------------------------
# embeddings


class Embedding:
    """An injective map of structures that preserves and reflects relations."""

    __slots__ = ("domain", "codomain", "map", "_hash")

    def __init__(self, domain: Structure, codomain: Structure, image_map, validate=True):
        image_map = tuple(image_map)
        if validate:
            if domain.signature != codomain.signature:
                raise SignatureMismatchError("embedding endpoints have different signatures")
            if len(image_map) != domain.size:
                raise ValueError("embedding map must assign every domain point")
            if len(set(image_map)) != len(image_map):
                raise ValueError("embedding map must be injective")
            for v in image_map:
                if not 0 <= v < codomain.size:
                    raise ValueError(f"image point {v} out of range")
            for rel_index in range(len(domain.signature)):
                arity = domain.signature.arity(rel_index)
                for t in itertools.product(range(domain.size), repeat=arity):
                    if domain.has(rel_index, t) != codomain.has(
                        rel_index, tuple(image_map[v] for v in t)
                    ):
                        raise ValueError(
                            f"map does not preserve and reflect relation "
                            f"{domain.signature.name(rel_index)!r} on {t}"
                        )
        self.domain = domain
        self.codomain = codomain
        self.map = image_map
        self._hash = hash((domain, codomain, image_map))

    @classmethod
    def inclusion(cls, domain: Structure, codomain: Structure) -> "Embedding":
        """The identity-on-indices inclusion of a prefix substructure."""
        return cls(domain, codomain, tuple(range(domain.size)))

    def compose(self, outer: "Embedding") -> "Embedding":
        """outer after self (self: X -> Y, outer: Y -> Z)."""
        if outer.domain != self.codomain:
            raise ValueError("embeddings do not compose")
        return Embedding(
            self.domain, outer.codomain, tuple(outer.map[v] for v in self.map), validate=False
        )

    def __eq__(self, other):
        return (
            isinstance(other, Embedding)
            and self.map == other.map
            and self.domain == other.domain
            and self.codomain == other.codomain
        )

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"Embedding({self.domain.size}->{self.codomain.size}; map={self.map})"


def embeddings(domain: Structure, codomain: Structure, max_count=None):
    """All embeddings of `domain` into `codomain`, ordered by image tuple.

    `max_count` stops the search early (handy for existence checks).
    """
    if domain.signature != codomain.signature:
        raise SignatureMismatchError("embedding endpoints have different signatures")
    m, n = domain.size, codomain.size
    out = []
    if m > n:
        return out
    sig = domain.signature
    image = [0] * m
    used = [False] * n

    def consistent(k: int) -> bool:
        # Check every tuple over the assigned prefix that mentions point k:
        # presence in the domain must match presence of the image tuple.
        for rel_index in range(len(sig)):
            arity = sig.arity(rel_index)
            for t in itertools.product(range(k + 1), repeat=arity):
                if k not in t:
                    continue
                mapped = tuple(image[v] for v in t)
                if domain.has(rel_index, t) != codomain.has(rel_index, mapped):
                    return False
        return True

    def extend(k: int) -> bool:
        if k == m:
            out.append(Embedding(domain, codomain, tuple(image), validate=False))
            return max_count is not None and len(out) >= max_count
        for u in range(n):
            if used[u]:
                continue
            image[k] = u
            if consistent(k):
                used[u] = True
                stop = extend(k + 1)
                used[u] = False
                if stop:
                    return True
        return False

    extend(0)
    return out


# ---------------------------------------------------------------------------
# canonical forms


@dataclass(frozen=True)
class CanonicalStructure:
    """A canonical representative with its certificate and automorphism count.

    For pinned canonical forms, aut_order counts only automorphisms fixing
    every pin, and the pins occupy indices 0 .. len(pins)-1 of `structure`.
    """

    structure: Structure
    certificate: bytes
    aut_order: int


def _refine_colors(n, rel_tuples, colors):
    """Iterate degree-signature refinement to a fixpoint; returns rank colors."""
    colors = list(colors)
    ncolors = len(set(colors))
    while True:
        sigs = [[] for _ in range(n)]
        for rel_index, tuples in enumerate(rel_tuples):
            for t in tuples:
                key = tuple(colors[u] for u in t)
                for pos, u in enumerate(t):
                    sigs[u].append((rel_index, pos) + key)
        for s in sigs:
            s.sort()
        order = sorted(range(n), key=lambda v: (colors[v], sigs[v]))
        new_colors = [0] * n
        rank = 0
        prev_key = None
        for v in order:
            key = (colors[v], sigs[v])
            if prev_key is not None and key != prev_key:
                rank += 1
            new_colors[v] = rank
            prev_key = key
        if rank + 1 == ncolors or rank + 1 == n:
            return new_colors
        colors = new_colors
        ncolors = rank + 1


def canonical_form(structure: Structure, pins=()) -> CanonicalStructure:
    """Canonical relabeling by individualization/refinement.

    Pinned points become the lowest indices, in pin order, and only
    relabelings fixing every pin are considered; so two structures have equal
    certificates exactly when some isomorphism matches them and sends pin to
    pin.  aut_order is exact: it counts the leaves of the search tree that
    achieve the minimal encoding, which form one orbit of the (pin-fixing)
    automorphism group acting freely.
    """
    n = structure.size
    pins = tuple(pins)
    if len(set(pins)) != len(pins) or any(not 0 <= p < n for p in pins):
        raise ValueError(f"bad pins {pins!r} for size {n}")
    sig = structure.signature
    rel_tuples = [structure.tuples(i) for i in range(len(sig))]

    base_colors = [len(pins)] * n
    for i, p in enumerate(pins):
        base_colors[p] = i

    best = {"enc": None, "count": 0}

    def encode(perm) -> tuple:
        masks = []
        for tuples in rel_tuples:
            mask = 0
            for t in tuples:
                idx = 0
                for v in t:
                    idx = idx * n + perm[v]
                mask |= 1 << idx
            masks.append(mask)
        return tuple(masks)

    def search(colors):
        cell_color = None
        for v in range(n):
            c = colors[v]
            if colors.count(c) > 1 and (cell_color is None or c < cell_color):
                cell_color = c
        if cell_color is None:
            enc = encode(colors)
            if best["enc"] is None or enc < best["enc"]:
                best["enc"] = enc
                best["count"] = 1
            elif enc == best["enc"]:
                best["count"] += 1
            return
        members = [v for v in range(n) if colors[v] == cell_color]
        for v in members:
            branched = [c if c < cell_color else c + 1 for c in colors]
            branched[v] = cell_color
            search(_refine_colors(n, rel_tuples, branched))

    if n == 0:
        enc = tuple(0 for _ in range(len(sig)))
        canonical = Structure.raw(sig, 0, enc)
        return CanonicalStructure(canonical, _certificate(canonical, len(pins)), 1)

    search(_refine_colors(n, rel_tuples, base_colors))
    canonical = Structure.raw(sig, n, best["enc"])
    return CanonicalStructure(canonical, _certificate(canonical, len(pins)), best["count"])


def _certificate(structure: Structure, pin_count: int) -> bytes:
    body = ",".join(format(m, "x") for m in structure.masks)
    return f"{structure.size:02d}|{pin_count}|{body}".encode("ascii")


# ---------------------------------------------------------------------------
# class definitions


class ClassContext:
    """Per-class caches shared by the enumeration and reduction machinery."""

    __slots__ = (
        "reps",
        "extensions",
        "reduce_memo",
        "separation_memo",
        "minimal_cache",
        "minimal_by_certificate",
        "cache_store",
    )

    def __init__(self):
        self.reps = {}
        self.extensions = {}
        self.reduce_memo = {}
        self.separation_memo = {}
        self.minimal_cache = {}
        self.minimal_by_certificate = {}
        self.cache_store = None


class ClassDefinition:
    """A hereditary class of finite structures over one signature.

    Axiom tags drive both membership checks and constructive search (one
    point extensions, amalgamation completions); forbidden substructures and
    projections only ever filter.  Projections delegate membership of a
    reduct to another class and are how join/colored classes express their
    inherited constraints.
    """

    def __init__(
        self,
        signature: Signature,
        name: str,
        order_relations=(),
        symmetric_relations=(),
        unary_groups=(),
        forbidden=(),
        projections=(),
        aut_base=None,
    ):
        self.signature = signature
        self.name = str(name)
        self.order_relations = tuple(sorted(set(map(int, order_relations))))
        self.symmetric_relations = tuple(sorted(set(map(int, symmetric_relations))))
        self.unary_groups = tuple(tuple(map(int, g)) for g in unary_groups)
        self.forbidden = tuple(forbidden)
        self.projections = tuple((child, tuple(map(int, rmap))) for child, rmap in projections)
        self.aut_base = None if aut_base is None else int(aut_base)

        nrel = len(signature)
        for r in self.order_relations + self.symmetric_relations:
            if not 0 <= r < nrel:
                raise ValueError(f"axiom tag on unknown relation index {r}")
            if signature.arity(r) != 2:
                raise ValueError(f"relation {signature.name(r)!r} must be binary for its tag")
        if set(self.order_relations) & set(self.symmetric_relations):
            raise ValueError("a relation cannot be both an order and symmetric")
        grouped = [r for g in self.unary_groups for r in g]
        if len(grouped) != len(set(grouped)):
            raise ValueError("unary groups must not overlap")
        for r in grouped:
            if not 0 <= r < nrel or signature.arity(r) != 1:
                raise ValueError(f"unary group member {r} must be a unary relation")
        for f in self.forbidden:
            if f.signature != signature:
                raise SignatureMismatchError("forbidden structure over the wrong signature")
        for child, rmap in self.projections:
            if len(rmap) != len(child.signature):
                raise ValueError("projection map must cover the child signature")
            for child_index, own_index in enumerate(rmap):
                if signature.arity(own_index) != child.signature.arity(child_index):
                    raise ValueError("projection map must preserve arities")
        if self.aut_base is not None and self.aut_base < 1:
            raise ValueError("aut_base must be a positive integer")

        self._context = None
        self._certificate = None

    def context(self) -> ClassContext:
        if self._context is None:
            self._context = ClassContext()
        return self._context

    def free_relations(self):
        """Relation indices with no axiom tag."""
        tagged = set(self.order_relations) | set(self.symmetric_relations)
        tagged.update(r for g in self.unary_groups for r in g)
        return tuple(r for r in range(len(self.signature)) if r not in tagged)

    def has_forbidden(self) -> bool:
        """Whether any forbidden substructure constrains this class (recursively)."""
        if self.forbidden:
            return True
        return any(child.has_forbidden() for child, _ in self.projections)

    @property
    def certificate(self) -> str:
        """A stable hex digest identifying the class; used to key disk caches."""
        if self._certificate is None:
            payload = {
                "signature": [[n, a] for n, a in self.signature.relations],
                "order": list(self.order_relations),
                "symmetric": list(self.symmetric_relations),
                "groups": [list(g) for g in self.unary_groups],
                "forbidden": sorted(
                    canonical_form(f).certificate.decode("ascii") for f in self.forbidden
                ),
                "projections": [
                    [child.certificate, list(rmap)] for child, rmap in self.projections
                ],
                "aut_base": self.aut_base,
            }
            blob = json.dumps(payload, sort_keys=True).encode("ascii")
            self._certificate = hashlib.sha256(blob).hexdigest()
        return self._certificate

    def __repr__(self):
        return f"ClassDefinition({self.name})"


# ---------------------------------------------------------------------------
# membership


def _is_strict_total_order(structure: Structure, rel_index: int) -> bool:
    n = structure.size
    pair_count = 0
    outdeg = [0] * n
    for u, v in structure.tuples(rel_index):
        if u == v:
            return False
        outdeg[u] += 1
        pair_count += 1
    if pair_count != n * (n - 1) // 2:
        return False
    by_rank = sorted(range(n), key=lambda p: -outdeg[p])
    expected = 0
    for i in range(n):
        for j in range(i + 1, n):
            idx = by_rank[i] * n + by_rank[j]
            expected |= 1 << idx
    return structure.masks[rel_index] == expected


def _is_irreflexive_symmetric(structure: Structure, rel_index: int) -> bool:
    for u, v in structure.tuples(rel_index):
        if u == v or not structure.has(rel_index, (v, u)):
            return False
    return True


def _satisfies_axioms(cls: ClassDefinition, structure: Structure) -> bool:
    for r in cls.order_relations:
        if not _is_strict_total_order(structure, r):
            return False
    for r in cls.symmetric_relations:
        if not _is_irreflexive_symmetric(structure, r):
            return False
    for group in cls.unary_groups:
        for p in range(structure.size):
            hits = sum(1 for r in group if structure.masks[r] >> p & 1)
            if hits != 1:
                return False
    return True


def _passes_filters(cls: ClassDefinition, structure: Structure) -> bool:
    """Forbidden-substructure and projection checks (axioms not rechecked)."""
    for f in cls.forbidden:
        if f.size <= structure.size and embeddings(f, structure, max_count=1):
            return False
    for child, rmap in cls.projections:
        if not is_member(child, structure.reduct(child.signature, rmap)):
            return False
    return True


def is_member(cls: ClassDefinition, structure: Structure) -> bool:
    """Whether the structure belongs to the class."""
    if structure.signature != cls.signature:
        raise SignatureMismatchError(
            f"structure over {structure.signature!r} checked against class "
            f"{cls.name!r} over {cls.signature!r}"
        )
    return _satisfies_axioms(cls, structure) and _passes_filters(cls, structure)


# ---------------------------------------------------------------------------
# one point extensions and enumeration


def _reencode(structure: Structure, new_size: int):
    """Masks of `structure` re-encoded in the radix of a larger point set."""
    masks = []
    for i in range(len(structure.signature)):
        mask = 0
        for t in structure.tuples(i):
            idx = 0
            for v in t:
                idx = idx * new_size + v
            mask |= 1 << idx
        masks.append(mask)
    return masks


def _order_sequence(structure: Structure, rel_index: int):
    """Points of a strict total order, ascending."""
    n = structure.size
    outdeg = [0] * n
    for u, _ in structure.tuples(rel_index):
        outdeg[u] += 1
    # The least point relates to every later one, so ascending order is
    # descending out-degree.
    return sorted(range(n), key=lambda p: -outdeg[p])


def _chain_mask(sequence, size: int) -> int:
    mask = 0
    for i in range(len(sequence)):
        for j in range(i + 1, len(sequence)):
            mask |= 1 << (sequence[i] * size + sequence[j])
    return mask


def one_point_extensions(cls: ClassDefinition, structure: Structure):
    """All class members extending `structure` by one point, up to
    isomorphism over it.

    The new point gets index structure.size, and structure sits inside each
    extension as the identity inclusion.  Isomorphism over the base fixes
    every old point, hence also the single new one, so distinct labeled
    extensions are automatically inequivalent: no canonical forms needed.
    Returns a list of (extension, new_point) pairs in a deterministic order.
    """
    ctx = cls.context()
    cached = ctx.extensions.get(structure)
    if cached is not None:
        return list(cached)

    n = structure.size
    m = n + 1
    new_point = n
    sig = cls.signature
    base = _reencode(structure, m)

    # Each unit owns some relations and offers the possible masks for them.
    units = []
    for r in cls.order_relations:
        seq = _order_sequence(structure, r)
        choices = []
        for pos in range(n + 1):
            extended = seq[:pos] + [new_point] + seq[pos:]
            choices.append((_chain_mask(extended, m),))
        units.append(((r,), choices))
    for r in cls.symmetric_relations:
        choices = []
        for bits in range(1 << n):
            mask = base[r]
            for u in range(n):
                if bits >> u & 1:
                    mask |= 1 << (u * m + new_point)
                    mask |= 1 << (new_point * m + u)
            choices.append((mask,))
        units.append(((r,), choices))
    for group in cls.unary_groups:
        choices = []
        for r in group:
            masks = [base[g] for g in group]
            masks[group.index(r)] |= 1 << new_point
            choices.append(tuple(masks))
        units.append((group, choices))
    for r in cls.free_relations():
        arity = sig.arity(r)
        slots = [
            t
            for t in itertools.product(range(m), repeat=arity)
            if new_point in t
        ]
        choices = []
        for bits in range(1 << len(slots)):
            mask = base[r]
            for i, t in enumerate(slots):
                if bits >> i & 1:
                    idx = 0
                    for v in t:
                        idx = idx * m + v
                    mask |= 1 << idx
            choices.append((mask,))
        units.append(((r,), choices))

    out = []
    owners = [u[0] for u in units]
    for combo in itertools.product(*[u[1] for u in units]):
        masks = list(base)
        for rels, chosen in zip(owners, combo):
            for rel_index, mask in zip(rels, chosen):
                masks[rel_index] = mask
        candidate = Structure.raw(sig, m, masks)
        if _passes_filters(cls, candidate):
            out.append(candidate)
    out.sort(key=lambda s: s.masks)
    result = tuple((s, new_point) for s in out)
    ctx.extensions[structure] = result
    return list(result)


def enumerate_structures(cls: ClassDefinition, n: int, jobs: int = 1):
    """Representatives of all isomorphism classes of size n, sorted by
    certificate."""
    if n < 0:
        raise ValueError("size must be nonnegative")
    ctx = cls.context()
    for k in range(n + 1):
        if k in ctx.reps:
            continue
        if ctx.cache_store is not None:
            loaded = ctx.cache_store.load_level(cls, k)
            if loaded is not None:
                ctx.reps[k] = loaded
                continue
        if k == 0:
            empty = Structure.raw(cls.signature, 0, (0,) * len(cls.signature))
            level = [canonical_form(empty)] if is_member(cls, empty) else []
        else:
            def canonical_extensions(rep):
                return [
                    (cf.certificate, cf.structure.masks, cf.aut_order)
                    for cf in map(
                        canonical_form,
                        (e for e, _ in one_point_extensions(cls, rep.structure)),
                    )
                ]

            seen = {}
            for chunk in parallel_map(canonical_extensions, ctx.reps[k - 1], jobs):
                for certificate, masks, aut_order in chunk:
                    if certificate not in seen:
                        seen[certificate] = CanonicalStructure(
                            Structure.raw(cls.signature, k, masks),
                            certificate,
                            aut_order,
                        )
            level = [seen[c] for c in sorted(seen)]
        ctx.reps[k] = level
        if ctx.cache_store is not None:
            ctx.cache_store.save_level(cls, k, level)
    return list(ctx.reps[n])


# ---------------------------------------------------------------------------
# automorphism base checks


def divides_power(value: int, base: int) -> bool:
    """Whether `value` divides some power of `base`."""
    value = abs(value)
    if value == 0:
        return False
    while value > 1:
        g = gcd(value, base)
        if g == 1:
            return False
        while value % g == 0:
            value //= g
    return True


@dataclass(frozen=True)
class AutCheckReport:
    passed: bool
    base: int
    bound: int
    checked: int
    violation: dict | None


def aut_check(cls: ClassDefinition, base: int, bound: int) -> AutCheckReport:
    """Verify |Aut(X)| divides a power of `base` for every member of size
    <= bound; reports the first violation in enumeration order."""
    if base < 1:
        raise ValueError("base must be a positive integer")
    checked = 0
    for size in range(bound + 1):
        for rep in enumerate_structures(cls, size):
            checked += 1
            if not divides_power(rep.aut_order, base):
                return AutCheckReport(
                    passed=False,
                    base=base,
                    bound=bound,
                    checked=checked,
                    violation={
                        "size": size,
                        "certificate": rep.certificate.decode("ascii"),
                        "aut_order": rep.aut_order,
                    },
                )
    return AutCheckReport(passed=True, base=base, bound=bound, checked=checked, violation=None)


# ---------------------------------------------------------------------------
# built-in classes and combinators


def finite_sets() -> ClassDefinition:
    """All finite sets (empty signature)."""
    return ClassDefinition(Signature(()), name="finite-sets", aut_base=None)


def linear_orders() -> ClassDefinition:
    """All finite strict linear orders."""
    return ClassDefinition(
        Signature((("lt", 2),)),
        name="linear-orders",
        order_relations=(0,),
        aut_base=1,
    )


def join(left: ClassDefinition, right: ClassDefinition, name=None) -> ClassDefinition:
    """Superpositions: structures carrying one member of each class on the
    same points.  Relations are renamed positionally (r0, r1, ..)."""
    nl = len(left.signature)
    nr = len(right.signature)
    relations = [(f"r{i}", left.signature.arity(i)) for i in range(nl)]
    relations += [(f"r{nl + i}", right.signature.arity(i)) for i in range(nr)]
    signature = Signature(relations)
    shift = nl
    if left.aut_base is not None and right.aut_base is not None:
        aut_base = min(left.aut_base, right.aut_base)
    else:
        aut_base = left.aut_base if left.aut_base is not None else right.aut_base
    return ClassDefinition(
        signature,
        name=name or f"join({left.name},{right.name})",
        order_relations=tuple(left.order_relations)
        + tuple(r + shift for r in right.order_relations),
        symmetric_relations=tuple(left.symmetric_relations)
        + tuple(r + shift for r in right.symmetric_relations),
        unary_groups=tuple(left.unary_groups)
        + tuple(tuple(r + shift for r in g) for g in right.unary_groups),
        projections=(
            (left, tuple(range(nl))),
            (right, tuple(range(nl, nl + nr))),
        ),
        aut_base=aut_base,
    )


def colored(base: ClassDefinition, colors: int, name=None) -> ClassDefinition:
    """Members of `base` with points colored by one of `colors` colors."""
    if colors < 1:
        raise ValueError("need at least one color")
    nl = len(base.signature)
    color_names = [f"c{i}" for i in range(colors)]
    taken = {n for n, _ in base.signature.relations}
    if taken & set(color_names):
        raise ValueError("base signature already uses a color relation name")
    signature = Signature(tuple(base.signature.relations) + tuple((c, 1) for c in color_names))
    return ClassDefinition(
        signature,
        name=name or f"colored({base.name},{colors})",
        order_relations=base.order_relations,
        symmetric_relations=base.symmetric_relations,
        unary_groups=tuple(base.unary_groups) + (tuple(range(nl, nl + colors)),),
        projections=((base, tuple(range(nl))),),
        aut_base=base.aut_base,
    )


def s_permutations(s: int) -> ClassDefinition:
    """Finite sets carrying s independent linear orders (s-fold join of
    linear orders)."""
    if s < 1:
        raise ValueError("need at least one order")
    signature = Signature(tuple((f"r{i}", 2) for i in range(s)))
    return ClassDefinition(
        signature,
        name=f"s-permutations:{s}",
        order_relations=tuple(range(s)),
        aut_base=1,
    )


def colored_linear_orders(s: int) -> ClassDefinition:
    """Linear orders with points colored by one of s colors."""
    return colored(linear_orders(), s, name=f"colored-linear-orders:{s}")


# ---------------------------------------------------------------------------
# class files


def _parse_forbidden_entry(signature: Signature, entry: dict) -> Structure:
    if not isinstance(entry, dict):
        raise ClassFileError("forbidden entries must be mappings")
    payload = {
        "signature": [[n, a] for n, a in signature.relations],
        "size": entry.get("size"),
        "relations": entry.get("relations", {}),
    }
    return structure_from_dict(payload)


def class_from_dict(payload: dict, name=None) -> ClassDefinition:
    """Build a user class from the class-file mapping."""
    if not isinstance(payload, dict):
        raise ClassFileError("class file must contain a mapping")
    try:
        signature = Signature(payload["signature"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ClassFileError(f"bad signature: {exc}") from exc

    order, symmetric = [], []
    axioms = payload.get("axioms", {}) or {}
    if not isinstance(axioms, dict):
        raise ClassFileError("axioms must map relation names to tags")
    for rel_name, tag in axioms.items():
        try:
            index = signature.index_of(rel_name)
        except KeyError:
            raise ClassFileError(f"axiom on unknown relation {rel_name!r}") from None
        if tag == TAG_ORDER:
            order.append(index)
        elif tag == TAG_SYMMETRIC:
            symmetric.append(index)
        else:
            raise ClassFileError(f"unknown axiom tag {tag!r} on {rel_name!r}")

    groups = []
    for group in payload.get("unary_groups", []) or []:
        try:
            groups.append(tuple(signature.index_of(n) for n in group))
        except KeyError as exc:
            raise ClassFileError(f"unary group names unknown relation {exc}") from None

    forbidden = [
        _parse_forbidden_entry(signature, entry) for entry in payload.get("forbidden", []) or []
    ]

    try:
        return ClassDefinition(
            signature,
            name=name or payload.get("name", "user-class"),
            order_relations=order,
            symmetric_relations=symmetric,
            unary_groups=groups,
            forbidden=forbidden,
            aut_base=payload.get("aut_base"),
        )
    except (ValueError, SignatureMismatchError) as exc:
        raise ClassFileError(str(exc)) from exc


def load_class_file(path) -> ClassDefinition:
    """Load a class definition from a YAML (or JSON) file."""
    with open(path, "r", encoding="utf-8") as handle:
        try:
            payload = yaml.safe_load(handle)
        except yaml.YAMLError as exc:
            raise ClassFileError(f"cannot parse {path}: {exc}") from exc
    return class_from_dict(payload)
