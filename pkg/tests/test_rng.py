from hypothesis import given, strategies as st

from grokbench.rng import Xoshiro256, splitmix64

# Reference outputs of the published C implementations.
XOSHIRO_1234 = [11520, 0, 1509978240, 1215971899390074240, 1216172134540287360,
                607988272756665600, 16172922978634559625, 8476171486693032832,
                10595114339597558777, 2904607092377533576]
SPLITMIX_1234567 = [6457827717110365317, 3203168211198807973, 9817491932198370423,
                    4593380528125082431, 16408922859458223821]


def test_xoshiro_reference_vector():
    r = Xoshiro256(state=[1, 2, 3, 4])
    assert [r.next_u64() for _ in range(10)] == XOSHIRO_1234


def test_splitmix_reference_vector():
    s, out = 1234567, []
    for _ in range(5):
        s, x = splitmix64(s)
        out.append(x)
    assert out == SPLITMIX_1234567


def test_same_seed_same_stream():
    a, b = Xoshiro256(42), Xoshiro256(42)
    assert [a.next_u64() for _ in range(20)] == [b.next_u64() for _ in range(20)]
    assert Xoshiro256(1).next_u64() != Xoshiro256(2).next_u64()


@given(st.integers(0, 2**64 - 1), st.integers(1, 1000))
def test_randbelow_in_range(seed, n):
    r = Xoshiro256(seed)
    assert all(0 <= r.randbelow(n) < n for _ in range(20))


@given(st.integers(0, 2**64 - 1), st.integers(0, 200))
def test_permutation_is_permutation(seed, n):
    assert sorted(Xoshiro256(seed).permutation(n)) == list(range(n))


def test_uniform_bounds_and_mean():
    u = Xoshiro256(7).uniform(-2.0, 3.0, 20000)
    assert min(u) >= -2.0 and max(u) < 3.0
    assert abs(sum(u) / len(u) - 0.5) < 0.05


def test_randbelow_roughly_uniform():
    r = Xoshiro256(3)
    counts = [0] * 6
    for _ in range(60000):
        counts[r.randbelow(6)] += 1
    assert max(counts) - min(counts) < 600
