"""Structure layer: validation, canonical forms, embeddings, enumeration."""

import itertools
import random

import pytest

from fraisse_measures.structures import (
    AutCheckReport,
    ClassFileError,
    Embedding,
    Signature,
    SignatureMismatchError,
    Structure,
    aut_check,
    canonical_form,
    class_from_dict,
    colored,
    colored_linear_orders,
    embeddings,
    enumerate_structures,
    finite_sets,
    is_member,
    join,
    linear_orders,
    load_class_file,
    one_point_extensions,
    s_permutations,
    structure_from_dict,
)

from conftest import (
    all_structures_brute,
    chain,
    colored_chain,
    count_iso_classes_brute,
    order_structure,
    set_structure,
    triangle_free_graphs,
)


class TestValidation:
    def test_signature_rejects_duplicates_and_bad_arity(self):
        with pytest.raises(ValueError):
            Signature((("r", 2), ("r", 1)))
        with pytest.raises(ValueError):
            Signature((("r", 0),))

    def test_structure_rejects_out_of_range_entries(self):
        sig = Signature((("lt", 2),))
        with pytest.raises(ValueError):
            Structure(sig, 2, [[(0, 2)]])
        with pytest.raises(ValueError):
            Structure(sig, 2, [[(0,)]])
        with pytest.raises(ValueError):
            Structure(sig, 2, [])

    def test_membership_signature_mismatch(self):
        with pytest.raises(SignatureMismatchError):
            is_member(linear_orders(), set_structure(2))

    def test_roundtrip_dict(self):
        s = chain(3)
        assert structure_from_dict(s.to_dict()) == s

    def test_embedding_validation(self):
        c2, c3 = chain(2), chain(3)
        Embedding(c2, c3, (0, 2))
        with pytest.raises(ValueError):
            Embedding(c2, c3, (2, 0))
        with pytest.raises(ValueError):
            Embedding(c2, c3, (1, 1))


class TestStructureOps:
    def test_relabel_and_induced(self):
        s = chain(3)
        flipped = s.relabel((2, 1, 0))
        assert flipped.has(0, (2, 1)) and flipped.has(0, (1, 0))
        assert s.induced((0, 2)) == chain(2)
        assert s.delete(1) == chain(2)

    def test_contents_view(self):
        s = chain(3)
        assert s.contents[0] == frozenset({(0, 1), (0, 2), (1, 2)})


class TestCanonicalForm:
    def test_idempotent_on_examples(self):
        for s in [chain(4), set_structure(3), colored_chain([0, 1, 1])]:
            cf = canonical_form(s)
            again = canonical_form(cf.structure)
            assert again.structure == cf.structure
            assert again.certificate == cf.certificate
            assert again.aut_order == cf.aut_order

    def test_relabel_invariance_random(self):
        rng = random.Random(170)
        pool = [
            chain(5),
            colored_chain([0, 1, 0, 1]),
            order_structure([[0, 1, 2, 3], [2, 0, 3, 1]]),
            set_structure(5),
        ]
        for s in pool:
            cf = canonical_form(s)
            for _ in range(20):
                perm = list(range(s.size))
                rng.shuffle(perm)
                other = canonical_form(s.relabel(perm))
                assert other.certificate == cf.certificate
                assert other.structure == cf.structure

    def test_aut_order_examples(self):
        assert canonical_form(set_structure(4)).aut_order == 24
        assert canonical_form(chain(4)).aut_order == 1
        # Two colors placed symmetrically around a 2-chain still give a rigid
        # structure: the order breaks the symmetry.
        assert canonical_form(colored_chain([0, 1])).aut_order == 1

    def test_aut_order_matches_self_embeddings(self):
        pool = [
            set_structure(4),
            chain(3),
            colored_chain([0, 0, 1]),
            order_structure([[0, 1, 2], [1, 0, 2]]),
        ]
        for s in pool:
            assert canonical_form(s).aut_order == len(embeddings(s, s))

    def test_pinned_forms_separate_marks(self):
        s = chain(2)
        bottom = canonical_form(s, pins=(0,))
        top = canonical_form(s, pins=(1,))
        assert bottom.certificate != top.certificate
        # The pin lands at index 0 of the canonical structure.
        assert bottom.structure.has(0, (0, 1))
        assert top.structure.has(0, (1, 0))

    def test_pinned_aut_order(self):
        s = set_structure(4)
        assert canonical_form(s, pins=(2,)).aut_order == 6
        assert canonical_form(s, pins=(2, 0)).aut_order == 2

    def test_certificates_sort_smaller_sizes_first(self):
        small = canonical_form(chain(2)).certificate
        large = canonical_form(chain(11)).certificate
        assert small < large


class TestEmbeddings:
    def test_chain_counts(self):
        # A 2-chain embeds into a 3-chain one way per increasing pair.
        assert len(embeddings(chain(2), chain(3))) == 3
        assert len(embeddings(chain(1), chain(1))) == 1

    def test_edgeless_pair_count(self):
        sig = Signature((("edge", 2),))
        pair = Structure(sig, 2, [[]])
        for n in (2, 3, 4):
            target = Structure(sig, n, [[]])
            assert len(embeddings(pair, target)) == n * (n - 1)

    def test_embeddings_reflect(self):
        sig = Signature((("edge", 2),))
        pair = Structure(sig, 2, [[]])
        edge = Structure(sig, 2, [[(0, 1), (1, 0)]])
        assert embeddings(pair, edge) == []

    def test_deterministic_order(self):
        maps = [e.map for e in embeddings(chain(2), chain(4))]
        assert maps == sorted(maps)


class TestMembership:
    def test_linear_orders(self, lo):
        assert is_member(lo, chain(3))
        cyclic = Structure(lo.signature, 3, [[(0, 1), (1, 2), (2, 0)]])
        assert not is_member(lo, cyclic)
        reflexive = Structure(lo.signature, 1, [[(0, 0)]])
        assert not is_member(lo, reflexive)

    def test_s_permutations(self):
        cls = s_permutations(2)
        assert is_member(cls, order_structure([[0, 1, 2], [2, 1, 0]]))
        partial = Structure(cls.signature, 2, [[(0, 1)], []])
        assert not is_member(cls, partial)

    def test_colored(self):
        cls = colored_linear_orders(2)
        assert is_member(cls, colored_chain([0, 1, 0]))
        uncolored = Structure(cls.signature, 1, [[], [], []])
        assert not is_member(cls, uncolored)
        twice = Structure(cls.signature, 1, [[], [(0,)], [(0,)]])
        assert not is_member(cls, twice)

    def test_forbidden_user_class(self):
        cls = triangle_free_graphs()
        path = Structure(cls.signature, 3, [[(0, 1), (1, 0), (1, 2), (2, 1)]])
        tri = Structure(
            cls.signature, 3, [[(0, 1), (1, 0), (0, 2), (2, 0), (1, 2), (2, 1)]]
        )
        assert is_member(cls, path)
        assert not is_member(cls, tri)


class TestOnePointExtensions:
    def test_one_chain_has_two(self, lo):
        exts = one_point_extensions(lo, chain(1))
        assert len(exts) == 2
        structures = {s for s, _ in exts}
        assert chain(2) in structures
        assert chain(2).relabel((1, 0)) in structures

    def test_new_point_index_and_membership(self):
        cls = s_permutations(2)
        base = order_structure([[0, 1], [1, 0]])
        exts = one_point_extensions(cls, base)
        assert len(exts) == 9
        for ext, p in exts:
            assert p == 2
            assert ext.size == 3
            assert is_member(cls, ext)
            assert ext.induced((0, 1)) == base

    def test_extensions_distinct(self, fs):
        exts = one_point_extensions(fs, set_structure(3))
        assert len(exts) == 1


class TestEnumeration:
    @pytest.mark.parametrize(
        "factory,n,expected",
        [
            (linear_orders, 3, 1),
            (lambda: s_permutations(2), 3, 6),
            (lambda: colored_linear_orders(2), 1, 2),
            (lambda: colored_linear_orders(2), 3, 8),
            (lambda: join(linear_orders(), linear_orders()), 2, 2),
            (lambda: colored(finite_sets(), 2), 2, 3),
            (finite_sets, 5, 1),
        ],
    )
    def test_counts(self, factory, n, expected):
        assert len(enumerate_structures(factory(), n)) == expected

    @pytest.mark.parametrize(
        "factory,bound",
        [
            (linear_orders, 4),
            (lambda: s_permutations(2), 3),
            (lambda: colored_linear_orders(2), 3),
            (finite_sets, 4),
            (triangle_free_graphs, 4),
        ],
    )
    def test_against_brute_force(self, factory, bound):
        cls = factory()
        for n in range(bound + 1):
            expected = count_iso_classes_brute(cls, n)
            assert len(enumerate_structures(cls, n)) == expected

    def test_representatives_are_canonical_members_sorted(self):
        cls = s_permutations(2)
        reps = enumerate_structures(cls, 4)
        certs = [r.certificate for r in reps]
        assert certs == sorted(certs) and len(set(certs)) == len(certs)
        for rep in reps:
            assert is_member(cls, rep.structure)
            assert canonical_form(rep.structure).structure == rep.structure

    def test_hereditary_closure(self):
        cls = colored_linear_orders(2)
        level3 = {r.certificate for r in enumerate_structures(cls, 3)}
        for rep in enumerate_structures(cls, 4):
            for p in range(4):
                sub = rep.structure.delete(p)
                assert canonical_form(sub).certificate in level3

    def test_join_matches_s_permutations(self):
        twisted = join(linear_orders(), linear_orders())
        direct = s_permutations(2)
        for n in range(4):
            a = [r.certificate for r in enumerate_structures(twisted, n)]
            b = [r.certificate for r in enumerate_structures(direct, n)]
            assert a == b

    def test_join_with_finite_sets_is_padding(self):
        cls = join(linear_orders(), finite_sets())
        for n in range(4):
            assert len(enumerate_structures(cls, n)) == len(
                enumerate_structures(linear_orders(), n)
            )


class TestAutCheck:
    def test_rigid_classes_pass_base_one(self):
        for factory in (linear_orders, lambda: s_permutations(2)):
            report = aut_check(factory(), 1, 4)
            assert isinstance(report, AutCheckReport)
            assert report.passed and report.violation is None

    def test_finite_sets_fail_base_one(self, fs):
        report = aut_check(fs, 1, 3)
        assert not report.passed
        assert report.violation["size"] == 2
        assert report.violation["aut_order"] == 2

    def test_finite_sets_fail_every_base(self, fs):
        # |Aut| hits a fresh prime at size 5 regardless of the base.
        report = aut_check(fs, 6, 5)
        assert not report.passed


class TestClassFiles:
    def test_class_from_dict_graph(self):
        payload = {
            "name": "triangle-free",
            "signature": [["edge", 2]],
            "axioms": {"edge": "irreflexive-symmetric"},
            "forbidden": [
                {
                    "size": 3,
                    "relations": {
                        "edge": [
                            [0, 1], [1, 0], [0, 2], [2, 0], [1, 2], [2, 1]
                        ]
                    },
                }
            ],
        }
        cls = class_from_dict(payload)
        counts = [len(enumerate_structures(cls, n)) for n in range(5)]
        # Triangle-free graph counts: 1, 1, 2, 3, 7.
        assert counts == [1, 1, 2, 3, 7]

    def test_load_class_file_yaml(self, tmp_path):
        text = """
name: two-colored-sets
signature:
  - [red, 1]
  - [blue, 1]
unary_groups:
  - [red, blue]
"""
        path = tmp_path / "cls.yaml"
        path.write_text(text)
        cls = load_class_file(path)
        assert len(enumerate_structures(cls, 2)) == 3

    def test_bad_files_raise(self, tmp_path):
        with pytest.raises(ClassFileError):
            class_from_dict({"signature": [["r", 2]], "axioms": {"r": "no-such-tag"}})
        with pytest.raises(ClassFileError):
            class_from_dict({"signature": [["r", 2]], "axioms": {"missing": "strict-total-order"}})
        path = tmp_path / "bad.yaml"
        path.write_text("signature: [[r, 1]]\nforbidden: [{size: 1, relations: {q: [[0]]}}]\n")
        with pytest.raises(ClassFileError):
            load_class_file(path)

    def test_certificates_stable_and_distinct(self):
        a = s_permutations(2)
        b = s_permutations(2)
        assert a.certificate == b.certificate
        assert a.certificate != s_permutations(3).certificate
        assert linear_orders().certificate != colored_linear_orders(1).certificate
