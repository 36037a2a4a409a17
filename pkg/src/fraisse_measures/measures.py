"""The measure ring machinery: relation systems, solving, verification.

A measure assigns a coefficient to every embedding so that isomorphisms get
one, composition multiplies, and an embedding's value is the sum over all
amalgamations with any one point extension of its base.  Minimal marked
classes generate everything, so a measure is pinned down by one value per
minimal marked class, subject to:

* linear relations, one per base X and ordered pair of one point extensions
  (Y, Z) of X: the reduced value of Y equals the number of amalgamations of
  Y and Z over X that identify the two new points, plus the sum of the
  reduced values (marked at Y's new point) of the non-identifying ones;
* quadratic relations, one per member W and point pair {a, b}: evaluating
  the two-point extension of W minus {a, b} through a first or through b
  first must agree.

Solving enumerates assignments over a coefficient domain: the integers
restricted to {-1, 0, 1} (sound when every automorphism group is trivial,
which forces all integer measure values into that set) or a prime field.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .amalgamation import iter_amalgamations, oddness_scan, self_pair_class_count
from .marked import MinimalMarkedClass, enumerate_minimal_marked, _reduce_raw
from .parallel import parallel_map
from .structures import (
    ClassDefinition,
    Embedding,
    FraisseError,
    Structure,
    aut_check,
    enumerate_structures,
    one_point_extensions,
)


class PreconditionError(FraisseError):
    """A documented precondition of an operation does not hold."""


class IncompleteMinimalMarkedError(PreconditionError):
    """The minimal marked inventory is not provably complete at the bound."""


class DomainValidityError(PreconditionError):
    """The coefficient domain is not valid for the class."""


# ---------------------------------------------------------------------------
# coefficient domains


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    d = 2
    while d * d <= n:
        if n % d == 0:
            return False
        d += 1
    return True


class RestrictedIntegers:
    """Integer coefficients; every measure value lies in {-1, 0, 1} when the
    class has only trivial automorphism groups."""

    name = "z"
    values = (-1, 0, 1)
    one = 1

    @staticmethod
    def is_zero(x: int) -> bool:
        return x == 0

    @staticmethod
    def is_unit(x: int) -> bool:
        return x in (-1, 1)

    @staticmethod
    def mul(a: int, b: int) -> int:
        return a * b

    @staticmethod
    def normalize(x: int) -> int:
        return x

    @classmethod
    def solve_scaled(cls, coeff: int, target: int):
        """The domain value v with coeff * v == target, or None."""
        for v in cls.values:
            if coeff * v == target:
                return v
        return None

    def __repr__(self):
        return "RestrictedIntegers()"

    def __eq__(self, other):
        return isinstance(other, RestrictedIntegers)

    def __hash__(self):
        return hash("z")


class PrimeField:
    """Coefficients modulo a prime p."""

    def __init__(self, p: int):
        if not _is_prime(p):
            raise DomainValidityError(f"{p} is not prime")
        self.p = p
        self.name = f"fp:{p}"
        self.values = tuple(range(p))
        self.one = 1 % p

    def is_zero(self, x: int) -> bool:
        return x % self.p == 0

    def is_unit(self, x: int) -> bool:
        return x % self.p != 0

    def mul(self, a: int, b: int) -> int:
        return a * b % self.p

    def normalize(self, x: int) -> int:
        return x % self.p

    def solve_scaled(self, coeff: int, target: int):
        coeff %= self.p
        if coeff == 0:
            return None
        return target * pow(coeff, self.p - 2, self.p) % self.p

    def __repr__(self):
        return f"PrimeField({self.p})"

    def __eq__(self, other):
        return isinstance(other, PrimeField) and self.p == other.p

    def __hash__(self):
        return hash(("fp", self.p))


def domain_from_name(name: str):
    """Parse a domain selector: "z" or "fp:<prime>"."""
    if name == "z":
        return RestrictedIntegers()
    if name.startswith("fp:"):
        try:
            p = int(name[3:])
        except ValueError:
            raise DomainValidityError(f"bad prime field selector {name!r}") from None
        return PrimeField(p)
    raise DomainValidityError(f"unknown coefficient domain {name!r}")


def validate_domain(cls: ClassDefinition, domain, bound: int) -> None:
    """Reject domains the theory does not license for this class.

    The declared automorphism base can only be refuted by scanning, so the
    check is: a declared base compatible with the domain, plus a scan up to
    `bound` confirming no member violates it.
    """
    if isinstance(domain, RestrictedIntegers):
        if cls.aut_base != 1:
            raise DomainValidityError(
                f"{cls.name}: restricted integer coefficients need automorphism "
                f"base 1, class declares {cls.aut_base}"
            )
        report = aut_check(cls, 1, bound)
    else:
        if cls.aut_base is None:
            raise DomainValidityError(
                f"{cls.name}: prime field coefficients need a declared "
                "automorphism base"
            )
        if cls.aut_base % domain.p == 0:
            raise DomainValidityError(
                f"{cls.name}: prime {domain.p} divides the automorphism base "
                f"{cls.aut_base}"
            )
        report = aut_check(cls, cls.aut_base, bound)
    if not report.passed:
        raise DomainValidityError(
            f"{cls.name}: automorphism base {report.base} refuted at size "
            f"{report.violation['size']} (|Aut| = {report.violation['aut_order']})"
        )


# ---------------------------------------------------------------------------
# relation systems


@dataclass(frozen=True)
class LinearRelation:
    """lhs = constant + sum of terms (variable ids, repeats allowed)."""

    lhs: int
    constant: int
    terms: tuple


@dataclass(frozen=True)
class QuadraticRelation:
    """left[0]*left[1] = right[0]*right[1] (variable ids)."""

    left: tuple
    right: tuple


@dataclass(frozen=True)
class RelationSystem:
    class_def: ClassDefinition
    bound: int
    variables: tuple
    linear: tuple
    quadratic: tuple


def build_relation_system(cls: ClassDefinition, bound: int, jobs: int = 1) -> RelationSystem:
    """Generate the full relation system at the given size bound.

    Requires the minimal marked inventory to be complete at the bound (else
    reduced values of bound-sized structures could name unknown variables).
    """
    classes, complete = enumerate_minimal_marked(cls, bound, jobs=jobs)
    if not complete:
        raise IncompleteMinimalMarkedError(
            f"{cls.name}: minimal marked classes still appear at size {bound}; "
            "raise the bound to certify completeness"
        )
    index = {item.certificate: item.var_id for item in classes}

    linear = set()
    for size in range(bound - 1):
        reps = enumerate_structures(cls, size, jobs=jobs)

        def linear_for(rep, size=size):
            base = rep.structure
            out = []
            exts = one_point_extensions(cls, base)
            arrows = [Embedding.inclusion(base, ext) for ext, _ in exts]
            reduced = [
                index[_reduce_raw(cls, ext, size).certificate] for ext, _ in exts
            ]
            for k, left in enumerate(arrows):
                for l, right in enumerate(arrows):
                    constant = 0
                    terms = []
                    for diagram in iter_amalgamations(cls, left, right):
                        if diagram.result.size == size + 1:
                            constant += 1
                        else:
                            terms.append(
                                index[_reduce_raw(cls, diagram.result, size).certificate]
                            )
                    out.append((reduced[k], constant, tuple(sorted(terms))))
            return out

        for chunk in parallel_map(linear_for, reps, jobs):
            linear.update(LinearRelation(*item) for item in chunk)

    quadratic = set()
    for size in range(2, bound + 1):
        reps = enumerate_structures(cls, size, jobs=jobs)

        def quadratic_for(rep):
            base = rep.structure
            out = []
            for a, b in itertools.combinations(range(base.size), 2):
                va = index[_reduce_raw(cls, base.delete(b), a).certificate]
                vb = index[_reduce_raw(cls, base, b).certificate]
                vc = index[_reduce_raw(cls, base.delete(a), b - 1).certificate]
                vd = index[_reduce_raw(cls, base, a).certificate]
                left = tuple(sorted((va, vb)))
                right = tuple(sorted((vc, vd)))
                if left == right:
                    continue
                if right < left:
                    left, right = right, left
                out.append((left, right))
            return out

        for chunk in parallel_map(quadratic_for, reps, jobs):
            quadratic.update(QuadraticRelation(*item) for item in chunk)

    return RelationSystem(
        class_def=cls,
        bound=bound,
        variables=tuple(classes),
        linear=tuple(sorted(linear, key=lambda r: (r.lhs, r.constant, r.terms))),
        quadratic=tuple(sorted(quadratic, key=lambda r: (r.left, r.right))),
    )


def export_relations(system: RelationSystem) -> str:
    """Plain text form: variable table then one relation per line."""
    lines = [
        f"# class: {system.class_def.name}",
        f"# bound: {system.bound}",
        f"# variables: {len(system.variables)}",
        f"# linear: {len(system.linear)}",
        f"# quadratic: {len(system.quadratic)}",
    ]
    for item in system.variables:
        lines.append(f"V {item.var_id} {item.size} {item.certificate.decode('ascii')}")
    for rel in system.linear:
        rhs = " + ".join([str(rel.constant)] + [f"v{t}" for t in rel.terms])
        lines.append(f"L v{rel.lhs} = {rhs}")
    for rel in system.quadratic:
        lines.append(
            f"Q v{rel.left[0]}*v{rel.left[1]} = v{rel.right[0]}*v{rel.right[1]}"
        )
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# assignments


class MeasureAssignment:
    """Values for every minimal marked class, over a coefficient domain."""

    __slots__ = ("class_def", "domain", "variables", "values", "_by_certificate")

    def __init__(self, class_def, domain, variables, values):
        self.class_def = class_def
        self.domain = domain
        self.variables = tuple(variables)
        self.values = tuple(values)
        if len(self.variables) != len(self.values):
            raise ValueError("one value per variable required")
        self._by_certificate = None

    def value_of(self, certificate: bytes):
        if self._by_certificate is None:
            self._by_certificate = {
                item.certificate: self.values[k] for k, item in enumerate(self.variables)
            }
        return self._by_certificate[certificate]

    def as_dict(self) -> dict:
        return {
            item.certificate.decode("ascii"): self.values[k]
            for k, item in enumerate(self.variables)
        }

    def is_regular(self) -> bool:
        return all(self.domain.is_unit(v) for v in self.values)

    def __eq__(self, other):
        return (
            isinstance(other, MeasureAssignment)
            and self.domain == other.domain
            and self.values == other.values
            and [i.certificate for i in self.variables]
            == [i.certificate for i in other.variables]
        )

    def __hash__(self):
        return hash((self.domain, self.values))

    def __repr__(self):
        return f"MeasureAssignment({self.domain.name}, {self.values})"


def regular_filter(assignments):
    """The assignments in which every generator value is a unit."""
    return [a for a in assignments if a.is_regular()]


# ---------------------------------------------------------------------------
# solving


def solve(system: RelationSystem, domain, validate: bool = True):
    """All measure assignments over the domain, in sorted value order.

    Backtracking over variables in certificate order with unit propagation
    on the linear relations and forcing on three-quarters-assigned
    quadratics.  A contradictory system yields an empty list.
    """
    if validate:
        validate_domain(system.class_def, domain, system.bound)
    r = len(system.variables)

    linear = []
    for rel in system.linear:
        coeffs = {rel.lhs: -1}
        for t in rel.terms:
            coeffs[t] = coeffs.get(t, 0) + 1
        constant = domain.normalize(rel.constant)
        items = tuple(
            (v, domain.normalize(c))
            for v, c in sorted(coeffs.items())
            if not domain.is_zero(c)
        )
        if not items:
            if not domain.is_zero(constant):
                return []
            continue
        linear.append((constant, items))
    quads = [
        (q.left[0], q.left[1], q.right[0], q.right[1]) for q in system.quadratic
    ]

    touching_linear = [[] for _ in range(r)]
    for idx, (_, items) in enumerate(linear):
        for v, _ in items:
            touching_linear[v].append(idx)
    touching_quad = [[] for _ in range(r)]
    for idx, q in enumerate(quads):
        for v in set(q):
            touching_quad[v].append(idx)

    assignment = [None] * r
    solutions = []

    def check_quad(idx, trail):
        a, b, c, d = quads[idx]
        va, vb, vc, vd = (assignment[x] for x in (a, b, c, d))
        known = [x is not None for x in (va, vb, vc, vd)]
        missing = known.count(False)
        if missing == 0:
            return domain.mul(va, vb) == domain.mul(vc, vd)
        if missing > 1:
            # Either two genuinely open slots, or one open variable squared.
            open_vars = {x for x, v in zip((a, b, c, d), (va, vb, vc, vd)) if v is None}
            if len(open_vars) != 1:
                return True
            var = open_vars.pop()
            if (a, b).count(var) == 2 and vc is not None and vd is not None:
                target = domain.mul(vc, vd)
            elif (c, d).count(var) == 2 and va is not None and vb is not None:
                target = domain.mul(va, vb)
            else:
                return True
            if domain.is_zero(target):
                return force(var, domain.normalize(0), trail)
            if isinstance(domain, RestrictedIntegers) and target != 1:
                return False
            return True
        # Exactly one open slot.
        if va is None or vb is None:
            var = a if va is None else b
            partner = vb if va is None else va
            target = domain.mul(vc, vd)
        else:
            var = c if vc is None else d
            partner = vd if vc is None else vc
            target = domain.mul(va, vb)
        if domain.is_zero(partner):
            return domain.is_zero(target)
        value = domain.solve_scaled(partner, target)
        if value is None:
            return False
        return force(var, value, trail)

    def force(var, value, trail):
        if assignment[var] is not None:
            return assignment[var] == value
        assignment[var] = value
        trail.append(var)
        return propagate(var, trail)

    def propagate(start, trail):
        queue = [start]
        while queue:
            v0 = queue.pop()
            for idx in touching_linear[v0]:
                constant, items = linear[idx]
                residual = constant
                open_item = None
                open_count = 0
                for v, c in items:
                    val = assignment[v]
                    if val is None:
                        open_count += 1
                        open_item = (v, c)
                        if open_count > 1:
                            break
                    else:
                        residual += c * val
                if open_count == 0:
                    if not domain.is_zero(residual):
                        return False
                elif open_count == 1:
                    var, coeff = open_item
                    value = domain.solve_scaled(coeff, domain.normalize(-residual))
                    if value is None:
                        return False
                    if assignment[var] is None:
                        assignment[var] = value
                        trail.append(var)
                        queue.append(var)
                    elif assignment[var] != value:
                        return False
            for idx in touching_quad[v0]:
                if not check_quad(idx, trail):
                    return False
        return True

    def dfs(pos):
        while pos < r and assignment[pos] is not None:
            pos += 1
        if pos == r:
            solutions.append(tuple(assignment))
            return
        for value in domain.values:
            trail = [pos]
            assignment[pos] = value
            if propagate(pos, trail):
                dfs(pos + 1)
            for v in trail:
                assignment[v] = None

    dfs(0)
    solutions.sort()
    return [
        MeasureAssignment(system.class_def, domain, system.variables, values)
        for values in solutions
    ]


@dataclass(frozen=True)
class BoundReport:
    """The solved count against the structural bound (count <= prime**r)."""

    count: int
    variable_count: int
    prime: int | None
    count_bound: int | None
    count_ok: bool | None
    regular_count: int
    regular_bound: int | None
    regular_ok: bool | None


def _smallest_prime_coprime_to(base: int) -> int:
    p = 2
    while True:
        if _is_prime(p) and base % p != 0:
            return p
        p += 1


def count_measures(cls: ClassDefinition, bound: int, domain, jobs: int = 1):
    """Solve and report the count with its theoretical bounds."""
    system = build_relation_system(cls, bound, jobs=jobs)
    assignments = solve(system, domain)
    regular = regular_filter(assignments)
    r = len(system.variables)
    if cls.aut_base is None:
        report = BoundReport(len(assignments), r, None, None, None, len(regular), None, None)
    else:
        p = _smallest_prime_coprime_to(cls.aut_base)
        report = BoundReport(
            count=len(assignments),
            variable_count=r,
            prime=p,
            count_bound=p**r,
            count_ok=len(assignments) <= p**r,
            regular_count=len(regular),
            regular_bound=(p - 1) ** r,
            regular_ok=len(regular) <= (p - 1) ** r,
        )
    return assignments, report


# ---------------------------------------------------------------------------
# evaluation and verification


def evaluate_embedding(assignment: MeasureAssignment, embedding: Embedding):
    """The measure of an embedding: the product of generator values along a
    one point factorization (any order gives the same answer)."""
    cls = assignment.class_def
    domain = assignment.domain
    current = embedding.codomain
    in_image = set(embedding.map)
    value = domain.one
    while current.size > len(in_image):
        point = max(p for p in range(current.size) if p not in in_image)
        reduced = _reduce_raw(cls, current, point)
        value = domain.mul(value, assignment.value_of(reduced.certificate))
        current = current.delete(point)
        in_image = {p if p < point else p - 1 for p in in_image}
    return value


@dataclass(frozen=True)
class VerificationReport:
    passed: bool
    bound: int
    checked: int
    violations: tuple


def verify_assignment(
    cls: ClassDefinition, assignment: MeasureAssignment, bound: int, max_violations: int = 20
) -> VerificationReport:
    """Check the defining sum rule on every embedding up to the bound.

    For each member Y of size <= bound, each induced base X, and each one
    point extension X' of X: the value of X -> Y must equal the sum of the
    values of X' -> W over all amalgamations of Y and X' over X.
    """
    domain = assignment.domain
    checked = 0
    violations = []
    for size in range(1, bound + 1):
        for rep in enumerate_structures(cls, size):
            whole = rep.structure
            for keep in itertools.chain.from_iterable(
                itertools.combinations(range(size), k) for k in range(size)
            ):
                base = whole.induced(keep)
                into_whole = Embedding(base, whole, keep, validate=False)
                lhs = evaluate_embedding(assignment, into_whole)
                for ext, _ in one_point_extensions(cls, base):
                    into_ext = Embedding.inclusion(base, ext)
                    total = 0
                    for diagram in iter_amalgamations(cls, into_whole, into_ext):
                        total += evaluate_embedding(assignment, diagram.right_leg)
                    checked += 1
                    if not domain.is_zero(domain.normalize(lhs - total)):
                        if len(violations) < max_violations:
                            violations.append(
                                {
                                    "whole": whole.to_dict(),
                                    "base_points": list(keep),
                                    "extension": ext.to_dict(),
                                    "lhs": lhs,
                                    "rhs_sum": domain.normalize(total),
                                }
                            )
    return VerificationReport(
        passed=not violations,
        bound=bound,
        checked=checked,
        violations=tuple(violations),
    )


# ---------------------------------------------------------------------------
# the closed-form regular measure


def sign_measure(cls: ClassDefinition, bound: int, oddness_mode: str = "one-point", jobs: int = 1) -> MeasureAssignment:
    """The regular measure of an odd rigid class, in closed form.

    Each minimal marked class (X, x), viewed as the one point extension of
    X minus x, gets (-1)**n where n counts the non-identifying self
    amalgamations of that extension over its base up to swapping the two
    copies.  Preconditions: trivial automorphism groups and odd amalgamation
    counts, both scanned up to the bound; and a complete minimal marked
    inventory at the bound."""
    report = aut_check(cls, 1, bound)
    if not report.passed:
        raise PreconditionError(
            f"{cls.name}: sign measure needs trivial automorphism groups; "
            f"violated at size {report.violation['size']}"
        )
    classes, complete = enumerate_minimal_marked(cls, bound, jobs=jobs)
    if not complete:
        raise IncompleteMinimalMarkedError(
            f"{cls.name}: minimal marked inventory incomplete at bound {bound}"
        )
    parity = oddness_scan(cls, bound, mode=oddness_mode, jobs=jobs)
    if not parity.passed:
        raise PreconditionError(
            f"{cls.name}: sign measure needs odd amalgamation counts; "
            f"found an even count over a base of size "
            f"{parity.counterexample['base']['size']}"
        )
    values = []
    for item in classes:
        n = item.size
        # Present the class as a one point extension: mark last.
        to_last = (n - 1,) + tuple(range(n - 1))
        relabeled = item.structure.relabel(to_last)
        base = relabeled.induced(tuple(range(n - 1)))
        pair_classes = self_pair_class_count(cls, base, relabeled)
        values.append((-1) ** pair_classes)
    return MeasureAssignment(cls, RestrictedIntegers(), classes, values)
