from fractions import Fraction as F
import pytest
from expertest.measures import BINARY, BayesMixture, Markov, ReferencePath, bernoulli
from expertest.testing import RejectionRegion, normalize_region, region_prob
from expertest.testing import epsilon_cylinder_partition, build_bd_test, rejection_time
from expertest.testing import tail_rejection_test, empty_test, type1_error
from expertest.util import AtomDetected, PreconditionViolated, is_prefix, parse_history


def h(text: str):
    return parse_history(text)


def markov() -> Markov:
    return Markov(
        BINARY, (F(1, 2), F(1, 2)), ((F(3, 4), F(1, 4)), (F(1, 3), F(2, 3))), label="markov"
    )


def mixture() -> BayesMixture:
    comps = (bernoulli(F(1, 3)), bernoulli(F(2, 3)))
    return BayesMixture(BINARY, comps, (F(1, 2), F(1, 2)), label="mix")


def test_normalize_region():
    region = normalize_region([h("01"), h("0"), h("110"), h("0")])
    assert region.cylinders == (h("0"), h("110"))
    assert normalize_region(region.cylinders) == region
    assert normalize_region([]).cylinders == ()


@pytest.mark.parametrize(
    "cylinders,expected",
    [(["0", "10", "11"], True), (["0"], False), ([], False), ([""], True)],
)
def test_full_cover(cylinders, expected):
    region = normalize_region([h(c) for c in cylinders])
    assert region.full_cover is expected


def test_region_contains():
    region = RejectionRegion((h("01"),))
    assert region.contains(h("011")) is True
    assert region.contains(h("01")) is True
    assert region.contains(h("0")) is None
    assert region.contains(h("1")) is False
    assert region.contains(h("00")) is False
    assert RejectionRegion().contains(()) is False


def test_region_prob():
    bern = bernoulli(F(1, 2))
    assert region_prob(bern, RejectionRegion((h("00000"),))) == F(1, 32)
    assert region_prob(bern, RejectionRegion()) == 0
    assert region_prob(bern, RejectionRegion((h("0"), h("1")))) == 1


@pytest.mark.parametrize("epsilon,n_cells", [(F(1, 4), 4), (F(1, 5), 8), (1, 1)])
def test_partition_fair_coin(epsilon, n_cells):
    partition = epsilon_cylinder_partition(bernoulli(F(1, 2)), epsilon, 10)
    assert len(partition.cells) == n_cells
    assert partition.total == 1


def test_partition_atom():
    with pytest.raises(AtomDetected) as excinfo:
        epsilon_cylinder_partition(bernoulli(0), F(1, 4), 12)
    assert excinfo.value.history == (0,) * 12
    assert excinfo.value.exit_code == 12


def test_partition_preconditions():
    with pytest.raises(PreconditionViolated):
        epsilon_cylinder_partition(bernoulli(F(1, 2)), 0, 5)
    with pytest.raises(PreconditionViolated):
        epsilon_cylinder_partition(bernoulli(F(1, 2)), F(1, 2), 0)


@pytest.mark.parametrize(
    "opinion", [bernoulli(F(1, 2)), bernoulli(F(1, 4)), markov(), mixture()],
    ids=lambda o: o.label,
)
@pytest.mark.parametrize("epsilon", [F(1, 4), F(1, 10), F(1, 100)])
def test_partition_is_a_cover_of_light_cells(opinion, epsilon):
    partition = epsilon_cylinder_partition(opinion, epsilon, 30)
    assert all(p <= epsilon for p in partition.probs)
    assert partition.total == 1
    assert normalize_region(partition.cells).full_cover
    for a, b in zip(partition.cells, partition.cells[1:]):
        assert not is_prefix(a, b)


def test_partition_tree():
    tree = epsilon_cylinder_partition(bernoulli(F(1, 2)), F(1, 4), 4).format_tree()
    lines = tree.splitlines()
    assert lines[0] == "Bern(1/2) (epsilon=1/4)"
    assert "    00: 1/4" in lines


@pytest.mark.parametrize(
    "opinion,epsilon,cylinder",
    [
        (bernoulli(F(1, 2)), F(1, 20), "00000"),
        (bernoulli(F(1, 4)), F(1, 20), "0" * 11),
        (bernoulli(F(1, 2)), 1, "0"),
    ],
)
def test_bd_test_cylinder(opinion, epsilon, cylinder):
    reference = ReferencePath.parse("(0)")
    test = build_bd_test(reference, epsilon)
    assert test(opinion).cylinders == (h(cylinder),)
    t = rejection_time(opinion, reference, epsilon, 200)
    assert t == len(cylinder)
    # Minimal: the previous cylinder still has mass at least epsilon
    assert region_prob(opinion, RejectionRegion((reference.head(t - 1),))) >= epsilon


@pytest.mark.parametrize("p", [F(k, 10) for k in range(1, 10)])
def test_bd_test_controls_type1_error(p):
    test = build_bd_test(ReferencePath.parse("(01)"), F(1, 20))
    assert type1_error(test, bernoulli(p)) < F(1, 20)


@pytest.mark.parametrize("opinion", [markov(), mixture()], ids=lambda o: o.label)
def test_bd_test_controls_type1_error_beyond_iid(opinion):
    test = build_bd_test(ReferencePath.parse("(01)"), F(1, 20))
    region = test(opinion)
    assert len(region.cylinders) == 1
    assert type1_error(test, opinion) < F(1, 20)


def test_bd_test_atom():
    test = build_bd_test(ReferencePath.parse("(0)"), F(1, 20), max_depth=30)
    with pytest.raises(AtomDetected):
        test(bernoulli(0))


def test_bd_test_preconditions():
    with pytest.raises(PreconditionViolated):
        build_bd_test(ReferencePath.parse("(0)"), 0)
    with pytest.raises(PreconditionViolated):
        build_bd_test(ReferencePath.parse("(0)"), F(3, 2))


def test_tail_test_fair_coin():
    test = tail_rejection_test(3, 0.3)
    region = test(bernoulli(F(1, 2)))
    # Ties go to the lexicographically smaller cylinders
    assert region.cylinders == (h("000"), h("001"))
    assert type1_error(test, bernoulli(F(1, 2))) == F(1, 4)
    assert test.params == {"horizon": 3}


def test_tail_test_unit_mass():
    test = tail_rejection_test(3, 0.3)
    region = test(bernoulli(0))
    assert len(region.cylinders) == 7
    assert h("000") not in region.cylinders
    assert type1_error(test, bernoulli(0)) == 0


@pytest.mark.parametrize("opinion", [bernoulli(F(1, 4)), markov(), mixture()])
def test_tail_test_controls_type1_error(opinion):
    test = tail_rejection_test(6, F(1, 10))
    assert type1_error(test, opinion) <= F(1, 10)
    assert test(opinion).depth == 6


def test_tail_test_preconditions():
    with pytest.raises(PreconditionViolated):
        tail_rejection_test(3, 1)
    with pytest.raises(PreconditionViolated):
        tail_rejection_test(3, -0.1)


def test_empty_test():
    test = empty_test()
    region = test(bernoulli(F(1, 2)))
    assert region.cylinders == ()
    assert region.depth == 0
    assert type1_error(test, mixture()) == 0
