from fractions import Fraction as F
import itertools
import pytest
from expertest.measures import BINARY, Alphabet, IID, DyadicIID, Markov, BayesMixture
from expertest.measures import TableKernel, TimeInhomogeneousIID, ReferencePath
from expertest.measures import next_distribution, cylinder_prob, condition
from expertest.measures import posterior_weights, cylinder_table, sample_path
from expertest.measures import make_example1_surrogate, iid, bernoulli, from_spec
from expertest.measures import _cached_table
from expertest.util import NumberMode, ConditioningOnNullEvent, PreconditionViolated
from expertest.util import EnumerationTooLarge, parse_history, enumerate_histories


def h(text: str):
    return parse_history(text)


def half_mixture(mode: NumberMode = NumberMode.rational) -> BayesMixture:
    half = mode.coerce(F(1, 2))
    comps = (bernoulli(F(1, 3), mode), bernoulli(F(2, 3), mode))
    return BayesMixture(BINARY, comps, (half, half), label="mix")


def corpus():
    markov = Markov(
        BINARY,
        (F(1, 2), F(1, 2)),
        ((F(3, 4), F(1, 4)), (F(1, 3), F(2, 3))),
        label="markov",
    )
    time_iid = TimeInhomogeneousIID(
        BINARY, ((F(1, 2), F(1, 2)), (F(1, 5), F(4, 5))), (F(2, 3), F(1, 3)), label="time"
    )
    ternary = iid([F(1, 2), F(1, 3), F(1, 6)], label="ternary")
    return [
        bernoulli(F(1, 2)),
        bernoulli(F(1, 4)),
        markov,
        time_iid,
        half_mixture(),
        DyadicIID(None),
        DyadicIID(2),
        ternary,
    ]


def test_next_distribution_examples():
    assert next_distribution(bernoulli(F(1, 2)), h("0110")) == (F(1, 2), F(1, 2))
    assert next_distribution(DyadicIID(None), h("0"))[0] == F(1, 4)
    mix = half_mixture()
    assert next_distribution(mix, h("1"))[1] == F(5, 9)


def test_next_distribution_null_history():
    unit = bernoulli(0)
    assert next_distribution(unit, h("000")) == (1, 0)
    with pytest.raises(ConditioningOnNullEvent):
        next_distribution(unit, h("01"))


@pytest.mark.parametrize(
    "opinion,history,expected",
    [
        (bernoulli(F(1, 2)), "010", F(1, 8)),
        (DyadicIID(None), "00", F(1, 8)),
        (DyadicIID(1), "00", F(1, 2)),
        (bernoulli(F(1, 2)), "", F(1)),
        (bernoulli(1), "111", F(1)),
        (bernoulli(1), "110", F(0)),
    ],
)
def test_cylinder_prob(opinion, history, expected):
    assert cylinder_prob(opinion, h(history)) == expected


@pytest.mark.parametrize("opinion", corpus(), ids=lambda o: o.label)
def test_chain_rule_consistency(opinion):
    size = opinion.alphabet.size
    for depth in range(4):
        for history in enumerate_histories(size, depth):
            children = sum(cylinder_prob(opinion, history + (a,)) for a in range(size))
            assert children == cylinder_prob(opinion, history)


@pytest.mark.parametrize("opinion", corpus(), ids=lambda o: o.label)
def test_conditioning_consistency(opinion):
    size = opinion.alphabet.size
    for history in itertools.chain.from_iterable(
        enumerate_histories(size, t) for t in range(3)
    ):
        base = cylinder_prob(opinion, history)
        if base == 0:
            with pytest.raises(ConditioningOnNullEvent):
                condition(opinion, history)
            continue
        conditioned = condition(opinion, history)
        for suffix in enumerate_histories(size, 2):
            joint = cylinder_prob(opinion, history + suffix)
            assert cylinder_prob(conditioned, suffix) * base == joint


@pytest.mark.parametrize("opinion", corpus(), ids=lambda o: o.label)
def test_cylinder_table_matches_cylinder_prob(opinion):
    size = opinion.alphabet.size
    table = cylinder_table(opinion, 3)
    expected = [cylinder_prob(opinion, x) for x in enumerate_histories(size, 3)]
    assert list(table) == expected
    assert sum(table) == 1
    assert not table.flags.writeable


def test_cylinder_table_float_and_rational_kept_apart():
    exact = cylinder_table(bernoulli(F(1, 2)), 2)
    approx = cylinder_table(bernoulli(0.5, NumberMode.float), 2)
    assert isinstance(exact[0], F)
    assert not isinstance(approx[0], F)


def test_cylinder_table_cache_is_bounded():
    for k in range(1, 200):
        table = cylinder_table(bernoulli(F(k, 200)), 2)
        assert table[0] == F(200 - k, 200) ** 2
    info = _cached_table.cache_info()
    assert info.maxsize is not None and info.maxsize <= 64
    assert info.currsize <= info.maxsize


def test_cylinder_table_guard():
    with pytest.raises(EnumerationTooLarge):
        cylinder_table(bernoulli(F(1, 2)), 23)


def test_condition_examples():
    bern = bernoulli(F(1, 3))
    assert condition(bern, h("0101")) == bern
    mix = half_mixture()
    assert condition(mix, ()) is mix
    conditioned = condition(mix, h("1"))
    assert isinstance(conditioned, BayesMixture)
    assert conditioned.weights == (F(1, 3), F(2, 3))


def test_mixture_linearity():
    mix = half_mixture()
    for history in enumerate_histories(2, 4):
        expected = sum(
            w * cylinder_prob(c, history) for w, c in zip(mix.weights, mix.components)
        )
        assert cylinder_prob(mix, history) == expected


@pytest.mark.parametrize(
    "history,expected",
    [("", (F(1, 2), F(1, 2))), ("1", (F(1, 3), F(2, 3))), ("11", (F(1, 5), F(4, 5)))],
)
def test_posterior_weights(history, expected):
    assert posterior_weights(half_mixture(), h(history)) == expected


def test_posterior_weights_errors():
    with pytest.raises(PreconditionViolated):
        posterior_weights(bernoulli(F(1, 2)), h("1"))
    mix = BayesMixture(BINARY, (bernoulli(0), bernoulli(0)), (F(1, 2), F(1, 2)), label="zeros")
    with pytest.raises(ConditioningOnNullEvent):
        posterior_weights(mix, h("1"))


def test_mixture_conditioning_drops_null_components():
    mix = BayesMixture(
        BINARY, (bernoulli(0), bernoulli(F(1, 2))), (F(1, 2), F(1, 2)), label="m"
    )
    conditioned = condition(mix, h("1"))
    assert conditioned.weights == (F(1),)
    assert cylinder_prob(conditioned, h("11")) == F(1, 4)


def test_sample_path():
    assert sample_path(bernoulli(F(1, 2)), 0, seed=0) == ()
    assert sample_path(bernoulli(1), 3, seed=1) == (1, 1, 1)
    path = sample_path(half_mixture(NumberMode.float), 20, seed=7)
    assert path == sample_path(half_mixture(NumberMode.float), 20, seed=7)
    assert len(path) == 20


def test_sample_path_frequency():
    bern = bernoulli(0.5, NumberMode.float)
    ones = sum(sample_path(bern, 1, seed=i)[0] for i in range(20000))
    assert abs(ones / 20000 - 0.5) < 0.02


@pytest.mark.parametrize("N,K", [(4, 2), (1, 1), (6, 3), (16, 8)])
def test_example1_surrogate_identity(N, K):
    surrogate = make_example1_surrogate(N, K)
    p_inf = surrogate.p_infinity
    for t in range(min(N, 8) + 1):
        for history in enumerate_histories(2, t):
            assert cylinder_prob(surrogate.opinion, history) == cylinder_prob(p_inf, history)


def test_example1_surrogate_examples():
    surrogate = make_example1_surrogate(4, 2)
    assert cylinder_prob(surrogate.opinion, h("0000")) == F(1, 1024)
    assert cylinder_prob(make_example1_surrogate(1, 1).opinion, h("0")) == F(1, 2)
    # The window {3} still agrees with the dyadic law through period 3
    small = make_example1_surrogate(2, 1).opinion
    assert cylinder_prob(small, h("000")) == F(1, 64)
    assert cylinder_prob(small, h("0000")) == F(17, 2048)
    assert cylinder_prob(DyadicIID(None), h("0000")) == F(1, 1024)


def test_example1_surrogate_preconditions():
    with pytest.raises(PreconditionViolated):
        make_example1_surrogate(0, 1)
    with pytest.raises(PreconditionViolated):
        make_example1_surrogate(3, 0)


def test_dyadic_tail_constants():
    assert DyadicIID(None).prob_ones_infinitely_often == 1
    assert DyadicIID(5).prob_ones_infinitely_often == 0
    assert DyadicIID(None).label == "P_inf"
    assert DyadicIID(3).label == "P_3"


def test_table_kernel():
    entries = ((h(""), (F(1, 2), F(1, 2))), (h("0"), (F(1), F(0))), (h("1"), (F(0), F(1))))
    tail = iid([F(1, 2), F(1, 2)], label="uniform")
    kernel = TableKernel(BINARY, 2, entries, tail, label="copy")
    assert cylinder_prob(kernel, h("00")) == F(1, 2)
    assert cylinder_prob(kernel, h("01")) == 0
    assert cylinder_prob(kernel, h("110")) == F(1, 4)
    with pytest.raises(ValueError, match="needs 3 entries"):
        TableKernel(BINARY, 2, entries[:2], tail)


@pytest.mark.parametrize(
    "kwargs,match",
    [
        ({"alphabet": BINARY, "p": (F(1, 2), F(1, 3))}, "sum to"),
        ({"alphabet": BINARY, "p": (F(3, 2), F(-1, 2))}, "negative"),
        ({"alphabet": Alphabet(3), "p": (F(1, 2), F(1, 2))}, "expected 3"),
    ],
)
def test_iid_invalid(kwargs, match):
    with pytest.raises(ValueError, match=match):
        IID(**kwargs)


def test_mixture_invalid():
    with pytest.raises(ValueError, match="positive"):
        BayesMixture(BINARY, (bernoulli(F(1, 2)), bernoulli(1)), (F(1), F(0)))
    with pytest.raises(ValueError, match="sum to 1"):
        BayesMixture(BINARY, (bernoulli(F(1, 2)),), (F(1, 2),))


def test_float_mode_tolerance():
    bern = iid([0.1, 0.2, 0.7], NumberMode.float)
    assert sum(cylinder_table(bern, 2)) == pytest.approx(1.0)
    assert NumberMode.rational.coerce(0.7) == F(7, 10)
    assert NumberMode.rational.coerce("1/3") == F(1, 3)


def test_reference_path():
    ref = ReferencePath.parse("1(01)")
    assert ref.head(0) == ()
    assert ref.head(4) == (1, 0, 1, 0)
    assert str(ref) == "1(01)"
    assert ReferencePath.parse("(0)").head(3) == (0, 0, 0)
    with pytest.raises(ValueError):
        ReferencePath.parse("0101")


@pytest.mark.parametrize(
    "spec,history,expected",
    [
        ({"kind": "bernoulli", "p": "1/3"}, "1", F(1, 3)),
        ({"kind": "iid", "p": [0.25, 0.75]}, "10", F(3, 16)),
        ({"kind": "dyadic", "n": 1}, "00", F(1, 2)),
        (
            {"kind": "markov", "initial": [1, 0], "transition": [["1/2", "1/2"], [0, 1]]},
            "011",
            F(1, 2),
        ),
        (
            {
                "kind": "mixture",
                "components": [
                    {"weight": "1/2", "opinion": {"kind": "bernoulli", "p": "1/3"}},
                    {"weight": "1/2", "opinion": {"kind": "bernoulli", "p": "2/3"}},
                ],
            },
            "1",
            F(1, 2),
        ),
        (
            {"kind": "time-iid", "periods": [[1, 0]], "tail": ["1/2", "1/2"]},
            "01",
            F(1, 2),
        ),
        ({"kind": "table", "depth": 1, "table": {"": [0, 1]}}, "11", F(1, 2)),
    ],
)
def test_from_spec(spec, history, expected):
    opinion = from_spec(spec)
    assert cylinder_prob(opinion, h(history)) == expected
    assert cylinder_prob(from_spec(opinion.to_spec()), h(history)) == expected


def test_from_spec_errors():
    with pytest.raises(ValueError, match="Unknown opinion kind"):
        from_spec({"kind": "poisson"})
    with pytest.raises(ValueError, match="Unknown keys"):
        from_spec({"kind": "bernoulli", "p": "1/2", "q": 1})
