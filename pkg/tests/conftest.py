"""Shared helpers: small structure builders and brute-force oracles.

The oracles here enumerate candidates naively (all relation contents, all
label permutations) so the fast paths in the package can be checked against
something independently simple.
"""

import itertools

import pytest

from fraisse_measures.amalgamation import SeparationQuery, is_separated
from fraisse_measures.structures import (
    ClassDefinition,
    Signature,
    Structure,
    canonical_form,
    colored_linear_orders,
    embeddings,
    finite_sets,
    is_member,
    linear_orders,
    s_permutations,
)


def chain(n, signature=None, rel_index=0):
    """The linear order 0 < 1 < .. < n-1 (optionally inside a larger
    signature)."""
    signature = signature or Signature((("lt", 2),))
    contents = [[] for _ in range(len(signature))]
    contents[rel_index] = [(i, j) for i in range(n) for j in range(i + 1, n)]
    return Structure(signature, n, contents)


def order_structure(sequences):
    """A structure with one strict total order per sequence (ascending)."""
    n = len(sequences[0])
    signature = Signature(tuple((f"r{i}", 2) for i in range(len(sequences))))
    contents = []
    for seq in sequences:
        assert sorted(seq) == list(range(n))
        contents.append(
            [(seq[i], seq[j]) for i in range(n) for j in range(i + 1, n)]
        )
    return Structure(signature, n, contents)


def colored_chain(colors_in_order, num_colors=2):
    """A colored linear order 0 < 1 < .. with the given point colors."""
    n = len(colors_in_order)
    cls = colored_linear_orders(num_colors)
    contents = [[(i, j) for i in range(n) for j in range(i + 1, n)]]
    for c in range(num_colors):
        contents.append([(p,) for p in range(n) if colors_in_order[p] == c])
    return Structure(cls.signature, n, contents)


def set_structure(n):
    return Structure(Signature(()), n, ())


def all_structures_brute(signature, n):
    """Every structure of size n over the signature, by full enumeration of
    relation contents.  Exponential; keep n tiny."""
    slot_lists = [
        list(itertools.product(range(n), repeat=signature.arity(i)))
        for i in range(len(signature))
    ]
    per_relation = []
    for slots in slot_lists:
        rel_choices = []
        for bits in range(1 << len(slots)):
            rel_choices.append([slots[i] for i in range(len(slots)) if bits >> i & 1])
        per_relation.append(rel_choices)
    for combo in itertools.product(*per_relation):
        yield Structure(signature, n, combo)


def count_iso_classes_brute(cls, n):
    """Isomorphism class count at size n via the brute enumeration and the
    canonical labeler only."""
    seen = set()
    for s in all_structures_brute(cls.signature, n):
        if is_member(cls, s):
            seen.add(canonical_form(s).certificate)
    return len(seen)


def marked_cert(structure, mark):
    """Certificate of a structure with one pinned point."""
    return canonical_form(structure, pins=(mark,)).certificate


def reduce_all_orders(cls, structure, mark, memo=None):
    """Oracle for reduction: chase every deletion order of points separated
    from the mark and collect the certificates of all end states."""
    if memo is None:
        memo = {}
    key = (structure, mark)
    hit = memo.get(key)
    if hit is not None:
        return hit
    extraneous = [
        y
        for y in range(structure.size)
        if y != mark
        and is_separated(cls, SeparationQuery(structure, (y,), (mark,)))
    ]
    if not extraneous:
        result = {marked_cert(structure, mark)}
    else:
        result = set()
        for y in extraneous:
            next_mark = mark - 1 if y < mark else mark
            result |= reduce_all_orders(cls, structure.delete(y), next_mark, memo)
    memo[key] = result
    return result


def amalgamations_brute(cls, left, right, max_result=None):
    """Independent diagram enumeration: every candidate result over all
    relation contents, every compatible pair of covering legs, deduped by
    isomorphism search.  Exponential; only for tiny instances."""
    X, Y, Z = left.domain, left.codomain, right.codomain
    hi = Y.size + Z.size - X.size
    if max_result is not None:
        hi = min(hi, max_result)
    found = []
    for t in range(max(Y.size, Z.size), hi + 1):
        for W in all_structures_brute(cls.signature, t):
            if not is_member(cls, W):
                continue
            for left_leg in embeddings(Y, W):
                through_left = left.compose(left_leg)
                for right_leg in embeddings(Z, W):
                    if through_left.map != right.compose(right_leg).map:
                        continue
                    if set(left_leg.map) | set(right_leg.map) != set(range(t)):
                        continue
                    found.append((W, left_leg, right_leg))
    classes = []
    for diagram in found:
        if not any(diagrams_equivalent(diagram, other) for other in classes):
            classes.append(diagram)
    return classes


def diagrams_equivalent(d1, d2):
    """Whether two (result, left leg, right leg) triples are isomorphic as
    diagrams: some iso of the results commutes with both legs."""
    (w1, l1, r1), (w2, l2, r2) = d1, d2
    if w1.size != w2.size:
        return False
    for phi in embeddings(w1, w2):
        if all(phi.map[l1.map[y]] == l2.map[y] for y in range(len(l1.map))) and all(
            phi.map[r1.map[z]] == r2.map[z] for z in range(len(r1.map))
        ):
            return True
    return False


ACCEPTANCE_LINES = []


def record_acceptance(line):
    ACCEPTANCE_LINES.append(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("-", "acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def triangle_free_graphs():
    """A user-style class: graphs with no triangle."""
    signature = Signature((("edge", 2),))
    triangle = Structure(
        signature,
        3,
        [[(0, 1), (1, 0), (0, 2), (2, 0), (1, 2), (2, 1)]],
    )
    return ClassDefinition(
        signature,
        name="triangle-free",
        symmetric_relations=(0,),
        forbidden=(triangle,),
    )


BUILTIN_FACTORIES = {
    "finite-sets": finite_sets,
    "linear-orders": linear_orders,
    "s-permutations-2": lambda: s_permutations(2),
    "colored-linear-orders-2": lambda: colored_linear_orders(2),
}


@pytest.fixture
def lo():
    return linear_orders()


@pytest.fixture
def fs():
    return finite_sets()
