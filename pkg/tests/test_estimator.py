import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from dlvmc import Molecule, NeuralWavefunction

TINY = dict(n_det=1, width_one=8, width_aux=4, n_walkers=32, burn_in=5, n_pretrain=5, n_opt=5,
            eval_steps=10)


@pytest.fixture(scope="module")
def fitted():
    mol = Molecule.from_atoms([("He", (0.0, 0.0, 0.0))])
    return NeuralWavefunction(**TINY).fit(mol)


def test_params_and_clone():
    wf = NeuralWavefunction(**TINY, det_mode="block")
    assert wf.get_params()["det_mode"] == "block"
    twin = clone(wf).set_params(seed=3)
    assert twin.seed == 3 and wf.seed == 0


def test_unfitted_raises():
    with pytest.raises(NotFittedError):
        NeuralWavefunction().predict(np.zeros((2, 3)))


def test_fitted_attributes(fitted):
    assert len(fitted.history_) == 5 and len(fitted.pretrain_losses_) == 5
    assert fitted.walkers_.positions.shape == (32, 2, 3)
    assert np.isfinite(fitted.energy_.mean)
    assert fitted.score() == -fitted.energy_.mean


def test_predict_matches_single_and_batch(fitted):
    r = np.random.default_rng(0).normal(size=(4, 2, 3))
    batch = fitted.predict(r)
    single = np.array([fitted.predict(x) for x in r])
    np.testing.assert_allclose(batch, single, rtol=1e-12)
    e = fitted.local_energy(r)
    assert np.all(np.isfinite(e)) and fitted.local_energy(r[0]) == pytest.approx(e[0], rel=1e-12)
    with pytest.raises(ValueError):
        fitted.predict(np.zeros((3, 3)))


def test_evaluate_is_fresh(fitted):
    est = fitted.evaluate(4)
    assert est.n_samples == 4 * 32
