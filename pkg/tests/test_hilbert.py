import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from annni_fidelity._backend import available_backends
from annni_fidelity.errors import CapacityError, DimensionError, ValidationError
from annni_fidelity.hilbert import (ChainSpec, Hamiltonian, build_dense, diagonal_energy,
                                    normalize, reflect, spin_flip, translate)

sizes = st.sampled_from([4, 5, 6, 8])
alphas = st.floats(0.0, 1.5)
fields = st.floats(0.0, 1.0)


def _vec(n, seed):
    return np.random.default_rng(seed).standard_normal(1 << n)


def test_classical_energy_by_hand():
    # all up: each NN bond gives -1, each NNN bond +alpha
    spec = ChainSpec(4, 0.3, 0.0)
    assert diagonal_energy(spec, 0b1111) == pytest.approx(-4 + 4 * 0.3)
    # up up down down: NN bonds + - + -, NNN bonds all -1
    assert diagonal_energy(spec, 0b0011) == pytest.approx(0.0 - 4 * 0.3)


@given(sizes, alphas, fields)
def test_dense_is_symmetric(n, alpha, bx):
    h = build_dense(ChainSpec(n, alpha, bx))
    assert np.array_equal(h, h.T)


@given(sizes, alphas, fields, st.integers(0, 2**32 - 1))
def test_hermitian_form(n, alpha, bx, seed):
    h = Hamiltonian(ChainSpec(n, alpha, bx))
    rng = np.random.default_rng(seed)
    u, v = rng.standard_normal((2, 1 << n))
    assert u @ h.matvec(v) == pytest.approx(v @ h.matvec(u), rel=1e-12, abs=1e-12)


@given(sizes, alphas, fields, st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 2**32 - 1))
def test_linearity(n, alpha, bx, a, b, seed):
    h = Hamiltonian(ChainSpec(n, alpha, bx))
    rng = np.random.default_rng(seed)
    u, v = rng.standard_normal((2, 1 << n))
    lhs = h.matvec(a * u + b * v)
    rhs = a * h.matvec(u) + b * h.matvec(v)
    assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-11)


@given(sizes, alphas, fields, st.integers(0, 2**32 - 1))
def test_matvec_matches_dense(n, alpha, bx, seed):
    spec = ChainSpec(n, alpha, bx)
    v = _vec(n, seed)
    assert np.allclose(Hamiltonian(spec).matvec(v), build_dense(spec) @ v, atol=1e-12)


@given(sizes, alphas, fields, st.integers(0, 2**32 - 1))
def test_commutes_with_translation_flip_and_reflection(n, alpha, bx, seed):
    h = Hamiltonian(ChainSpec(n, alpha, bx))
    v = _vec(n, seed)
    hv = h.matvec(v)
    assert np.allclose(h.matvec(translate(v, n)), translate(hv, n), atol=1e-12)
    assert np.allclose(h.matvec(spin_flip(v)), spin_flip(hv), atol=1e-12)
    assert np.allclose(h.matvec(reflect(v, n)), reflect(hv, n), atol=1e-12)


def test_translation_has_order_n():
    v = _vec(6, 1)
    w = v
    for _ in range(6):
        w = translate(w, 6)
    assert np.array_equal(w, v)
    assert not np.array_equal(translate(v, 6), v)


@pytest.mark.skipif("compiled" not in available_backends(), reason="extension not built")
@given(st.sampled_from([4, 7, 10]), alphas, fields, st.integers(0, 2**32 - 1))
def test_backends_bitwise_equal(n, alpha, bx, seed):
    spec = ChainSpec(n, alpha, bx)
    v = _vec(n, seed)
    a = Hamiltonian(spec, backend="compiled").matvec(v)
    b = Hamiltonian(spec, backend="python").matvec(v)
    assert np.array_equal(a, b)


def test_matvec_is_deterministic():
    spec = ChainSpec(10, 0.37, 0.2)
    v = _vec(10, 3)
    h = Hamiltonian(spec)
    assert np.array_equal(h.matvec(v), h.matvec(v))


@pytest.mark.parametrize("kwargs, err", [
    (dict(n_sites=3, alpha=0.1, bx=0.1), CapacityError),
    (dict(n_sites=29, alpha=0.1, bx=0.1), CapacityError),
    (dict(n_sites=8.5, alpha=0.1, bx=0.1), ValidationError),
    (dict(n_sites=8, alpha=-0.1, bx=0.1), ValidationError),
    (dict(n_sites=8, alpha=float("nan"), bx=0.1), ValidationError),
    (dict(n_sites=8, alpha=0.1, bx=-1.0), ValidationError),
    (dict(n_sites=8, alpha=0.1, bx=0.1, boundary="open"), ValidationError),
])
def test_chain_validation(kwargs, err):
    with pytest.raises(err):
        ChainSpec(**kwargs)


def test_wrong_length_rejected():
    h = Hamiltonian(ChainSpec(6, 0.2, 0.2))
    with pytest.raises(DimensionError):
        h.matvec(np.ones(63))


def test_dense_size_cap():
    with pytest.raises(CapacityError):
        build_dense(ChainSpec(13, 0.2, 0.2))


def test_normalize_zero_vector():
    with pytest.raises(ValidationError):
        normalize(np.zeros(16))
