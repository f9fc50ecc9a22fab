import numpy as np
import pytest

from pmds_lrs.gf import FieldError, FieldTower, ZeroInverse, arith, field_create


def test_canonical_gf16(gf16):
    assert gf16.modulus == (1, 1, 0, 0, 1)
    assert (gf16.p, gf16.q, gf16.order) == (2, 4, 16)
    assert gf16.gamma == 2
    # ω = γ^5 generates GF(4)*
    assert gf16.omega == 6
    assert gf16.subfield_elements() == (0, 1, 6, 7)
    assert gf16.gamma_basis == (1, 2)


@pytest.mark.parametrize(
    "p, e, h, modulus, gamma",
    [
        (2, 1, 1, (1, 1), 1),
        (3, 1, 1, (1, 1), 2),
        (5, 1, 1, (2, 1), 3),
        (7, 1, 1, (2, 1), 5),
        (3, 1, 2, (2, 1, 1), 3),
        (2, 3, 1, (1, 1, 0, 1), 2),
    ],
)
def test_least_primitive_modulus(p, e, h, modulus, gamma):
    tower = field_create(p, e, h)
    assert tower.modulus == modulus
    assert tower.gamma == gamma
    assert tower.power(gamma, tower.order - 1) == 1
    if tower.order > 2:
        assert tower.power(gamma, (tower.order - 1) // 2) != 1


def test_worked_values(gf16):
    g = gf16.gamma
    assert gf16.mul(g, gf16.power(g, 3)) == 3
    assert gf16.frobenius(g) == 3
    assert gf16.norm(g, 2) == gf16.power(g, 5)
    assert gf16.norm_i(g, 2) == gf16.norm(g, 2)
    assert gf16.d_op(g, 1, gf16.power(g, 3)) == gf16.power(g, 13) == 13
    assert gf16.coords(gf16.power(g, 2)) == (6, 1)


def test_array_operations(gf16):
    x = np.array([2, 4, 0])
    y = np.array([8, 8, 5])
    assert gf16.mul(x, y).tolist() == [3, 6, 0]
    assert gf16.add(x, y).tolist() == [10, 12, 5]
    assert gf16.frobenius(x).shape == (3,)
    assert gf16.coords(x).shape == (3, 2)
    assert isinstance(gf16.mul(2, 8), int)


def test_field_axioms(tower, rng):
    x, y, z = (tower.random_elements(rng, 64) for _ in range(3))
    assert np.array_equal(tower.mul(x, tower.mul(y, z)), tower.mul(tower.mul(x, y), z))
    assert np.array_equal(tower.mul(x, tower.add(y, z)), tower.add(tower.mul(x, y), tower.mul(x, z)))
    assert np.array_equal(tower.add(x, tower.neg(x)), np.zeros(64, dtype=np.int64))
    assert np.array_equal(tower.sub(tower.add(x, y), y), x)
    nonzero = x[x != 0]
    assert np.all(tower.mul(nonzero, tower.inv(nonzero)) == 1)
    c = tower.gamma
    assert np.array_equal(tower.div(tower.mul(nonzero, c), nonzero), np.full(nonzero.shape, c))


def test_frobenius_is_an_automorphism_fixing_the_subfield(tower, rng):
    x, y = tower.random_elements(rng, 64), tower.random_elements(rng, 64)
    assert np.array_equal(tower.frobenius(tower.add(x, y)), tower.add(tower.frobenius(x), tower.frobenius(y)))
    assert np.array_equal(tower.frobenius(tower.mul(x, y)), tower.mul(tower.frobenius(x), tower.frobenius(y)))
    assert np.array_equal(tower.frobenius(x, tower.h), x)
    assert np.array_equal(tower.frobenius(x, tower.h + 1), tower.frobenius(x))
    assert np.array_equal(tower.frobenius(x), tower.power(x, tower.q))
    sub = np.asarray(tower.subfield_elements())
    assert len(set(sub.tolist())) == tower.q
    assert np.all(tower.in_subfield(sub))
    assert np.array_equal(tower.frobenius(sub), sub)


def test_norm_and_d_op(tower, rng):
    alpha = int(tower.random_elements(rng, ()))
    beta = tower.random_elements(rng, 16)
    assert tower.norm(alpha, 0) == 1
    assert tower.norm(alpha, 1) == alpha
    # norms of subfield elements are plain powers
    c = tower.subfield_elements()[-1]
    assert tower.norm(c, 3) == tower.power(c, 3)
    # D^i_α is GF(q)-linear in β
    other = tower.random_elements(rng, 16)
    for i in range(3):
        lhs = tower.d_op(np.full(16, alpha), i, tower.add(beta, other))
        rhs = tower.add(tower.d_op(np.full(16, alpha), i, beta), tower.d_op(np.full(16, alpha), i, other))
        assert np.array_equal(lhs, rhs)
        scaled = tower.d_op(np.full(16, alpha), i, tower.mul(beta, c))
        assert np.array_equal(scaled, tower.mul(tower.d_op(np.full(16, alpha), i, beta), c))
    assert tower.d_op(alpha, 0, 1) == 1


def test_coords_and_combine(tower, rng):
    x = tower.random_elements(rng, 32)
    coefficients = tower.coords(x)
    assert coefficients.shape == (32, tower.h)
    assert np.all(tower.in_subfield(coefficients))
    assert np.array_equal(tower.combine(coefficients), x)
    assert tower.coords(0) == (0,) * tower.h
    assert tower.coords(1) == (1,) + (0,) * (tower.h - 1)


def test_gamma_basis(gf16):
    swapped = gf16.with_gamma_basis([2, 1])
    assert swapped.gamma_basis == (2, 1)
    assert swapped.coords(4) == (1, 6)
    assert swapped != gf16
    with pytest.raises(FieldError):
        gf16.with_gamma_basis([1, gf16.omega])
    with pytest.raises(FieldError):
        gf16.with_gamma_basis([1])


def test_description_round_trip(gf16):
    assert FieldTower.from_description(gf16.describe()) == gf16
    assert hash(FieldTower.from_description(gf16.describe())) == hash(gf16)
    described = dict(gf16.describe(), gamma_basis=["a", "a^0"])
    assert FieldTower.from_description(described).gamma_basis == (2, 1)
    with pytest.raises(FieldError):
        FieldTower.from_description({"p": 2})


@pytest.mark.parametrize(
    "args, kwargs",
    [
        ((4, 1, 1), {}),
        ((2, 0, 1), {}),
        ((2, 1, 0), {}),
        ((2, 63, 1), {}),
        # x^4 + x^3 + x^2 + x + 1 is irreducible but not primitive
        ((2, 2, 2), {"modulus": [1, 1, 1, 1, 1]}),
        ((2, 2, 2), {"modulus": [1, 1, 0, 1]}),
        ((3, 1, 1), {"modulus": [2, 1]}),
    ],
)
def test_invalid_towers(args, kwargs):
    with pytest.raises(FieldError):
        FieldTower(*args, **kwargs)


def test_explicit_modulus(gf16):
    other = FieldTower(2, 2, 2, modulus=[1, 0, 0, 1, 1])
    assert other.modulus == (1, 0, 0, 1, 1)
    assert other != gf16
    assert other.power(other.gamma, 15) == 1


def test_zero_inverse(gf16):
    with pytest.raises(ZeroInverse):
        gf16.inv(0)
    with pytest.raises(ZeroInverse):
        gf16.div(3, 0)
    with pytest.raises(ZeroInverse):
        gf16.power(0, -1)
    with pytest.raises(ZeroDivisionError):
        gf16.inv(np.array([1, 0]))
    assert gf16.power(0, 0) == 1
    assert gf16.power(2, -1) == gf16.inv(2)


def test_out_of_range_codes(gf16):
    with pytest.raises(FieldError):
        gf16.mul(16, 1)
    with pytest.raises(FieldError):
        gf16.add(-1, 1)


@pytest.mark.parametrize(
    "text, code",
    [("a^4", 3), ("gamma^1", 2), ("γ^0", 1), ("a", 2), ("7", 7), ("0", 0), (13, 13), ("a^-1", 9), ("a^15", 1)],
)
def test_parse_element(gf16, text, code):
    assert gf16.parse_element(text) == code


@pytest.mark.parametrize("text", ["b^2", "16", "", "a^x", None, 1.5])
def test_parse_element_errors(gf16, text):
    with pytest.raises(FieldError):
        gf16.parse_element(text)


def test_format_element(gf16):
    assert gf16.format_element(3) == 3
    assert gf16.format_element(3, power=True) == "a^4"
    assert gf16.format_element(1, power=True) == "a^0"
    assert gf16.format_element(0, power=True) == "0"
    assert all(gf16.parse_element(gf16.format_element(x, power=True)) == x for x in range(16))
    assert gf16.discrete_log(3) == 4
    with pytest.raises(FieldError):
        gf16.discrete_log(0)


def test_arith(gf16):
    assert arith(gf16, "mul", 2, 8) == 3
    assert arith(gf16, "add", 3, 3) == 0
    assert arith(gf16, "inv", 3) == gf16.power(2, 11)
    assert arith(gf16, "pow", 2, 4) == 3
    assert arith(gf16, "neg", 5) == 5
    with pytest.raises(FieldError):
        arith(gf16, "sqrt", 4)


def test_odd_characteristic(gf81):
    assert gf81.q == 9
    assert gf81.neg(1) == 2
    assert gf81.add(1, 2) == 0
    assert len(gf81.subfield_elements()) == 9
    assert gf81.in_subfield(gf81.omega)
    assert not gf81.in_subfield(gf81.gamma)


def test_large_field_without_tables():
    class SmallTableTower(FieldTower):
        table_limit = 16

    tower = SmallTableTower(2, 3, 2)
    reference = field_create(2, 3, 2)
    x = np.arange(64)
    assert np.array_equal(tower.frobenius(x), reference.frobenius(x))
    assert tower.coords(5) == reference.coords(5)
    with pytest.raises(FieldError):
        tower.discrete_log(5)


def test_random_elements(gf16, rng):
    sub = gf16.random_elements(rng, (4, 5), subfield=True)
    assert sub.shape == (4, 5)
    assert np.all(gf16.in_subfield(sub))
    top = gf16.random_elements(rng, 100)
    assert top.min() >= 0 and top.max() < 16


SMALL_TOWERS = [(2, 1, 4), (2, 2, 2), (3, 1, 1), (2, 3, 2), (3, 2, 2), (5, 1, 3), (2, 4, 2), (2, 2, 4)]


def _all_pairs(tower):
    x, y = np.meshgrid(np.arange(tower.order), np.arange(tower.order), indexing="ij")
    return x.ravel(), y.ravel()


@pytest.mark.slow
@pytest.mark.parametrize("field", SMALL_TOWERS)
def test_field_axioms_exhaustively(field):
    tower = field_create(*field)
    x, y = _all_pairs(tower)
    xy = tower.mul(x, y)
    x_plus_y = tower.add(x, y)
    assert np.array_equal(xy, tower.mul(y, x))
    assert np.array_equal(x_plus_y, tower.add(y, x))
    assert np.array_equal(tower.sub(x_plus_y, y), x)
    assert np.array_equal(tower.mul(x, 1), x)
    assert np.array_equal(tower.add(x, 0), x)
    for z in range(tower.order):
        assert np.array_equal(tower.mul(xy, z), tower.mul(x, tower.mul(y, z)))
        assert np.array_equal(tower.add(x_plus_y, z), tower.add(x, tower.add(y, z)))
        assert np.array_equal(tower.mul(x_plus_y, z), tower.add(tower.mul(x, z), tower.mul(y, z)))
    nonzero = np.arange(1, tower.order)
    assert np.all(tower.mul(nonzero, tower.inv(nonzero)) == 1)
    # no zero divisors
    assert np.all((xy == 0) == ((x == 0) | (y == 0)))


@pytest.mark.slow
@pytest.mark.parametrize("field", SMALL_TOWERS)
def test_frobenius_exhaustively(field):
    tower = field_create(*field)
    x, y = _all_pairs(tower)
    assert np.array_equal(tower.frobenius(tower.add(x, y)), tower.add(tower.frobenius(x), tower.frobenius(y)))
    assert np.array_equal(tower.frobenius(tower.mul(x, y)), tower.mul(tower.frobenius(x), tower.frobenius(y)))
    every = np.arange(tower.order)
    images = tower.frobenius(every)
    assert sorted(images.tolist()) == every.tolist()
    assert np.array_equal(tower.frobenius(every, tower.h), every)
    assert np.flatnonzero(images == every).tolist() == sorted(tower.subfield_elements())


@pytest.mark.parametrize("field", SMALL_TOWERS)
def test_generator_orders(field):
    tower = field_create(*field)
    gamma_powers = tower.power(tower.gamma, np.arange(tower.order - 1))
    assert len(set(gamma_powers.tolist())) == tower.order - 1
    assert tower.power(tower.gamma, tower.order - 1) == 1
    omega_powers = tower.power(tower.omega, np.arange(tower.q - 1))
    assert len(set(omega_powers.tolist())) == tower.q - 1
    assert tower.power(tower.omega, tower.q - 1) == 1
    assert tower.in_subfield(tower.omega)
