"""Reduction of marked structures and minimal marked enumeration."""

import pytest

from fraisse_measures.marked import (
    FmmCertificate,
    MarkedStructure,
    MinimalMarkedClass,
    enumerate_minimal_marked,
    fmm_certificate,
    is_extraneous,
    reduce,
)
from fraisse_measures.structures import (
    Structure,
    colored_linear_orders,
    enumerate_structures,
    finite_sets,
    linear_orders,
    s_permutations,
)

from conftest import (
    chain,
    colored_chain,
    marked_cert,
    reduce_all_orders as _reduce_all_orders,
    set_structure,
    triangle_free_graphs,
)


class TestExtraneous:
    def test_chain_far_point_extraneous(self, lo):
        m = MarkedStructure(chain(3), 0)
        assert is_extraneous(lo, m, 2)
        assert not is_extraneous(lo, m, 1)

    def test_mark_rejected(self, lo):
        m = MarkedStructure(chain(3), 1)
        with pytest.raises(ValueError):
            is_extraneous(lo, m, 1)
        with pytest.raises(ValueError):
            is_extraneous(lo, m, 7)

    def test_finite_sets_nothing_extraneous(self, fs):
        m = MarkedStructure(set_structure(4), 2)
        for y in (0, 1, 3):
            assert not is_extraneous(fs, m, y)


class TestReduce:
    def test_already_minimal(self, lo):
        result = reduce(lo, MarkedStructure(chain(1), 0))
        assert isinstance(result, MinimalMarkedClass)
        assert result.size == 1 and result.mark == 0

    def test_four_chain_marked_second_gives_middle(self, lo):
        result = reduce(lo, MarkedStructure(chain(4), 1))
        expected = marked_cert(chain(3), 1)
        assert result.certificate == expected
        assert result.size == 3

    def test_four_chain_marked_bottom_gives_two_chain(self, lo):
        result = reduce(lo, MarkedStructure(chain(4), 0))
        assert result.certificate == marked_cert(chain(2), 0)

    def test_reduce_is_memoised_and_interned(self, lo):
        a = reduce(lo, MarkedStructure(chain(4), 0))
        b = reduce(lo, MarkedStructure(chain(5), 0))
        assert a is b

    def test_order_independence_exhaustive(self):
        cases = [
            (linear_orders(), 5),
            (colored_linear_orders(2), 4),
            (s_permutations(2), 4),
            (triangle_free_graphs(), 4),
        ]
        for cls, bound in cases:
            for size in range(1, bound + 1):
                for rep in enumerate_structures(cls, size):
                    for mark in range(size):
                        target = reduce(cls, MarkedStructure(rep.structure, mark))
                        finals = _reduce_all_orders(cls, rep.structure, mark)
                        assert finals == {target.certificate}

    def test_deleting_extraneous_point_preserves_class(self, lo):
        # The identity behind reduction: dropping an extraneous point names
        # the same minimal class.
        s = chain(4)
        m = MarkedStructure(s, 1)
        assert is_extraneous(lo, m, 3)
        dropped = reduce(lo, MarkedStructure(s.delete(3), 1))
        assert reduce(lo, m) is dropped


class TestEnumerateMinimalMarked:
    def test_linear_orders_inventory(self, lo):
        classes, complete = enumerate_minimal_marked(lo, 6)
        assert complete
        assert len(classes) == 4
        sizes = sorted(c.size for c in classes)
        assert sizes == [1, 2, 2, 3]
        certs = {c.certificate for c in classes}
        assert certs == {
            marked_cert(chain(1), 0),
            marked_cert(chain(2), 0),
            marked_cert(chain(2), 1),
            marked_cert(chain(3), 1),
        }

    def test_linear_orders_incomplete_at_low_bound(self, lo):
        classes, complete = enumerate_minimal_marked(lo, 3)
        assert not complete
        assert len(classes) == 4

    def test_var_ids_dense_and_stable(self, lo):
        classes, _ = enumerate_minimal_marked(lo, 5)
        assert [c.var_id for c in classes] == list(range(4))
        again, _ = enumerate_minimal_marked(lo, 6)
        assert [c.certificate for c in again] == [c.certificate for c in classes]

    def test_finite_sets_every_size_minimal(self, fs):
        classes, complete = enumerate_minimal_marked(fs, 4)
        assert not complete
        assert len(classes) == 4
        assert sorted(c.size for c in classes) == [1, 2, 3, 4]

    def test_colored_two_inventory(self):
        cls = colored_linear_orders(2)
        classes, complete = enumerate_minimal_marked(cls, 5)
        assert complete
        # Two marked points, eight marked two-chains (either mark, four
        # colorings), eight three-chains marked in the middle.
        assert len(classes) == 18
        assert max(c.size for c in classes) == 3

    def test_colored_minimal_project_to_minimal(self):
        # Forgetting the colors of a minimal marked colored order leaves a
        # minimal marked order.
        cls = colored_linear_orders(2)
        base = linear_orders()
        classes, _ = enumerate_minimal_marked(cls, 4)
        base_certs = {
            c.certificate for c in enumerate_minimal_marked(base, 4)[0]
        }
        for item in classes:
            reduct = item.structure.reduct(base.signature, (0,))
            reduced = reduce(base, MarkedStructure(reduct, item.mark))
            assert reduced.certificate in base_certs
            assert reduced.size == item.size

    def test_s_permutations_bounded_by_five(self):
        cls = s_permutations(2)
        classes, complete = enumerate_minimal_marked(cls, 6)
        assert complete
        assert max(c.size for c in classes) == 5

    def test_parallel_matches_serial(self):
        cls = colored_linear_orders(2)
        serial = enumerate_minimal_marked(cls, 4)
        fresh = colored_linear_orders(2)
        parallel = enumerate_minimal_marked(fresh, 4, jobs=2)
        assert [c.certificate for c in serial[0]] == [c.certificate for c in parallel[0]]
        assert serial[1] == parallel[1]


class TestFmmCertificate:
    def test_linear_orders(self, lo):
        cert = fmm_certificate(lo, 6)
        assert isinstance(cert, FmmCertificate)
        assert cert.complete and cert.count == 4 and cert.max_size == 3
        assert sorted(cert.by_size) == [1, 2, 3]
        assert len(cert.by_size[2]) == 2

    def test_finite_sets_incomplete_everywhere(self, fs):
        for bound in (1, 2, 3, 5):
            cert = fmm_certificate(fs, bound)
            assert not cert.complete
            assert cert.count == bound
