from fractions import Fraction

from hypothesis import HealthCheck, settings, strategies as st

settings.register_profile("default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

rationals = st.fractions(min_value=-8, max_value=8, max_denominator=64)
unit = st.fractions(min_value=0, max_value=1, max_denominator=256)
bits = st.lists(st.integers(0, 1), max_size=12).map(tuple)
naturals = st.lists(st.integers(0, 5), max_size=10).map(tuple)


def seqs(alphabet: int = 2):
    from caristi.metric import Seq

    sym = st.integers(0, alphabet - 1)
    return st.builds(Seq, st.lists(sym, max_size=10).map(tuple), st.lists(sym, min_size=1, max_size=3).map(tuple))


def half(n: int) -> Fraction:
    return Fraction(1, 2**n)
