import numpy as np
import pytest

import matchprior as mp
from matchprior.errors import NonFiniteLogDensity, StepTooLarge
from matchprior.models import Observation, check_point, sigmoid


def _fd_grad(model, data, theta, h=1e-5):
    d = model.dim
    out = np.zeros(d)
    for a in range(d):
        up, dn = theta.copy(), theta.copy()
        up[a] += h
        dn[a] -= h
        out[a] = (model.avg_loglik(data, up) - model.avg_loglik(data, dn)) / (2 * h)
    return out


def _fd_hess(model, data, theta, h=1e-5):
    d = model.dim
    out = np.zeros((d, d))
    for a in range(d):
        up, dn = theta.copy(), theta.copy()
        up[a] += h
        dn[a] -= h
        out[a] = (model.avg_grad(data, up) - model.avg_grad(data, dn)) / (2 * h)
    return 0.5 * (out + out.T)


def _cases(seed=0):
    rng = np.random.default_rng(seed)
    out = []
    m = mp.GaussianKnownMeanPrecision()
    out.append((m, m.sample(np.array([1.3]), 25, rng),
                lambda r: np.array([0.2 + 3.0 * r.random()])))
    m = mp.PoissonSequence(3)
    out.append((m, m.sample(np.array([0.5, 2.0, 4.0]), 25, rng),
                lambda r: 0.3 + 3.0 * r.random(3)))
    design = np.column_stack([np.linspace(-1, 1, 25), np.ones(25)])
    m = mp.LogisticGLM(design)
    out.append((m, m.sample(np.array([1.0, -0.3]), 25, rng),
                lambda r: r.normal(size=2)))
    m = mp.MultivariateCauchyLocation(2)
    out.append((m, m.sample(np.zeros(2), 25, rng),
                lambda r: r.normal(size=2)))
    return out


def test_grad_matches_fd():
    rng = np.random.default_rng(1)
    for model, data, draw in _cases():
        for _ in range(100):
            theta = np.atleast_1d(np.asarray(draw(rng), dtype=float))
            g = model.avg_grad(data, theta)
            fd = _fd_grad(model, data, theta)
            assert np.allclose(g, fd, rtol=1e-6, atol=1e-7), model.name


def test_hess_matches_fd_and_symmetry():
    rng = np.random.default_rng(2)
    for model, data, draw in _cases():
        for _ in range(20):
            theta = np.atleast_1d(np.asarray(draw(rng), dtype=float))
            h = model.avg_hess(data, theta)
            assert np.max(np.abs(h - h.T)) < 1e-10
            assert np.allclose(h, _fd_hess(model, data, theta),
                               rtol=1e-5, atol=1e-6), model.name


def test_third_matches_finite_diff():
    rng = np.random.default_rng(3)
    for model, data, draw in _cases():
        theta = np.atleast_1d(np.asarray(draw(rng), dtype=float))
        if model.name.startswith("poisson") or model.name.startswith("gaussian"):
            theta = np.maximum(theta, 0.5)
        t = mp.third_derivative_tensor(model, data, theta)
        fd = mp.finite_diff_third(model, data, theta, 1e-4)
        assert np.max(np.abs(t - fd)) < 1e-5, model.name
        for perm in [(1, 0, 2), (2, 1, 0), (0, 2, 1)]:
            assert np.allclose(t, t.transpose(perm), atol=1e-12)


def test_loglik_closed_values():
    pois = mp.PoissonRate()
    d0 = mp.Dataset(np.array([0.0]))
    assert mp.average_loglik(pois, d0, np.array([1.0])) == pytest.approx(-1.0)

    gauss = mp.GaussianKnownMeanPrecision()
    dg = mp.Dataset(np.array([0.0]))
    assert mp.average_loglik(gauss, dg, np.array([1.0])) == pytest.approx(
        -0.5 * np.log(2 * np.pi))

    design = np.array([[0.7, 1.0]])
    logi = mp.LogisticGLM(design)
    dl = mp.Dataset(np.array([1.0]), design)
    assert mp.average_loglik(logi, dl, np.zeros(2)) == pytest.approx(np.log(0.5))


def test_third_closed_values():
    pois = mp.PoissonRate()
    d = mp.Dataset(np.array([3.0]))
    t = mp.third_derivative_tensor(pois, d, np.array([2.0]))
    assert t[0, 0, 0] == pytest.approx(0.75)

    gauss = mp.GaussianKnownMeanPrecision()
    dg = mp.Dataset(np.array([1.0, -2.0]))
    th = np.array([0.7])
    # natural coordinates: third derivative is data-free
    assert gauss.avg_third(dg, th)[0, 0, 0] == pytest.approx(1.0 / 0.7**3)

    x = 1.4
    beta = np.array([0.6])
    logi = mp.LogisticGLM(np.array([[x]]))
    dl = mp.Dataset(np.array([1.0]), np.array([[x]]))
    p = sigmoid(x * 0.6)
    expect = -x**3 * p * (1 - p) * (1 - 2 * p)
    assert logi.avg_third(dl, beta)[0, 0, 0] == pytest.approx(expect, rel=1e-12)


def test_finite_diff_third_errors():
    pois = mp.PoissonRate()
    d = mp.Dataset(np.array([1.0]))
    with pytest.raises(StepTooLarge):
        mp.finite_diff_third(pois, d, np.array([2.0]), 0.0)
    with pytest.raises(StepTooLarge):
        mp.finite_diff_third(pois, d, np.array([0.001]), 0.01)


def test_natural_family_hessian_is_data_free_fisher():
    gauss = mp.GaussianKnownMeanPrecision()
    rng = np.random.default_rng(4)
    th = np.array([1.7])
    for _ in range(5):
        d = mp.Dataset(rng.normal(size=3))
        assert np.allclose(-gauss.avg_hess(d, th), gauss.fisher(th))


def test_logistic_fisher_is_weighted_design():
    design = np.column_stack([np.linspace(-1, 1, 9), np.ones(9)])
    logi = mp.LogisticGLM(design)
    beta = np.array([0.4, -0.2])
    p = sigmoid(design @ beta)
    w = p * (1 - p)
    expect = (design.T * w) @ design / 9
    assert np.allclose(logi.fisher(beta), expect)
    assert np.all(np.linalg.eigvalsh(logi.fisher(beta)) > 0)


def test_check_point_validation():
    pois = mp.PoissonRate()
    assert check_point(pois, [1.5])[0] == 1.5
    with pytest.raises(ValueError):
        check_point(pois, [1.0, 2.0])
    with pytest.raises(ValueError):
        check_point(pois, [-1.0])
    with pytest.raises(ValueError):
        check_point(pois, [np.nan])
    with pytest.raises(ValueError):
        check_point(pois, [0.0])  # boundary is outside the open support


def test_nonfinite_loglik_raises():
    pois = mp.PoissonRate()
    d = mp.Dataset(np.array([np.inf]))
    with pytest.raises(NonFiniteLogDensity):
        mp.average_loglik(pois, d, np.array([1.0]))


def test_dataset_shapes_and_observations():
    d = mp.Dataset(np.array([1.0, 2.0, 3.0]))
    assert d.responses.shape == (3, 1)
    assert d.n == 3
    obs = d.observation(1)
    assert obs.response[0] == 2.0 and obs.covariates is None

    d2 = mp.Dataset(np.array([0.0, 1.0]), np.array([[1.0, 2.0], [3.0, 4.0]]))
    assert d2.covariates.shape == (2, 2)
    with pytest.raises(ValueError):
        mp.Dataset(np.array([0.0, 1.0]), np.array([[1.0, 2.0]]))

    rebuilt = mp.Dataset.from_observations(
        [d2.observation(0), d2.observation(1)])
    assert np.allclose(rebuilt.responses, d2.responses)
    assert np.allclose(rebuilt.covariates, d2.covariates)


def test_cauchy_sample_and_median_init():
    model = mp.MultivariateCauchyLocation(3)
    rng = np.random.default_rng(5)
    data = model.sample(np.array([1.0, -2.0, 0.5]), 4000, rng)
    init = model.default_init(data)
    assert np.max(np.abs(init - np.array([1.0, -2.0, 0.5]))) < 0.2


def test_cauchy_mc_fisher_cached_and_sane():
    model = mp.MultivariateCauchyLocation(2, fisher_draws=200_000)
    g1 = model.fisher(np.zeros(2))
    g2 = model.fisher(np.zeros(2))
    assert g1 is g2
    # location family: g is constant and proportional to the identity
    assert np.allclose(g1, g1[0, 0] * np.eye(2), atol=5e-3)
    assert g1[0, 0] > 0


def test_csv_loaders(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("y,x1,x2\n1,0.5,1\n0,0.7,1\n")
    d = mp.load_dataset_csv(p)
    assert d.responses.shape == (2, 1)
    assert d.covariates.shape == (2, 2)

    p2 = tmp_path / "v.csv"
    p2.write_text("y1,y2\n1,4\n2,5\n")
    d2 = mp.load_dataset_csv(p2)
    assert d2.responses.shape == (2, 2)
    assert d2.covariates is None

    p3 = tmp_path / "bad.csv"
    p3.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        mp.load_dataset_csv(p3)

    p4 = tmp_path / "bank.csv"
    p4.write_text("1.2,0.3,-0.5,0.1,0\n-0.2,1.3,0.5,2.1,1\n")
    d4 = mp.load_banknote_csv(p4)
    assert d4.covariates.shape == (2, 4)
    assert d4.responses.ravel().tolist() == [0.0, 1.0]
    p5 = tmp_path / "bank_bad.csv"
    p5.write_text("1,2,3\n")
    with pytest.raises(ValueError):
        mp.load_banknote_csv(p5)


def test_single_observation_interface_matches_vectorized():
    pois = mp.PoissonSequence(2)
    obs = Observation(np.array([2.0, 0.0]))
    th = np.array([1.5, 0.7])
    d = mp.Dataset(np.array([[2.0, 0.0]]))
    assert pois.log_density(obs, th) == pytest.approx(pois.avg_loglik(d, th))
    assert np.allclose(pois.grad_logp(obs, th), pois.avg_grad(d, th))
    assert np.allclose(pois.hess_logp(obs, th), pois.avg_hess(d, th))
    assert np.allclose(pois.third_logp(obs, th), pois.avg_third(d, th))
