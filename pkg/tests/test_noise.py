import numpy as np

from cli.noise import NoiseSource


def test_same_seed_same_stream():
    a, b = NoiseSource(9), NoiseSource(9)
    np.testing.assert_array_equal(a.normal(7), b.normal(7))
    assert not np.array_equal(NoiseSource(9).normal(4), NoiseSource(10).normal(4))


def test_box_muller_pairs():
    u = np.random.Generator(np.random.PCG64(3)).random(4)
    z = NoiseSource(3).normal(3)
    rho = np.sqrt(-2.0 * np.log(1.0 - u[0::2]))
    expected = [rho[0] * np.cos(2 * np.pi * u[1]),
                rho[0] * np.sin(2 * np.pi * u[1]),
                rho[1] * np.cos(2 * np.pi * u[3])]
    np.testing.assert_allclose(z, expected, rtol=1e-15)


def test_normal_moments():
    z = NoiseSource(1).normal(200_000)
    assert abs(z.mean()) < 0.01
    assert abs(z.std() - 1.0) < 0.01


def test_gaussian_covariance():
    cov = np.array([[2.0, 0.6], [0.6, 0.5]])
    noise = NoiseSource(4)
    draws = np.array([noise.gaussian(cov) for _ in range(40_000)])
    np.testing.assert_allclose(np.cov(draws.T), cov, atol=0.05)


def test_conditioned_ud_factors():
    u, d = NoiseSource(2).conditioned_ud(5, 8.0)
    assert np.array_equal(np.diag(u), np.ones(5))
    assert np.array_equal(np.tril(u, -1), np.zeros((5, 5)))
    np.testing.assert_allclose(d, np.logspace(0.0, -8.0, 5))
    eig = np.linalg.eigvalsh(u @ np.diag(d) @ u.T)
    assert eig[0] > 0.0
    assert 1e6 < eig[-1] / eig[0] < 1e11
