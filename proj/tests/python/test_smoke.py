import math

import numpy as np
import pytest

import skan


def test_pool_and_descriptors():
    pool = skan.default_pool()
    assert len(pool) == 16
    assert skan.BasisDescriptor("Chebyshev").param_count == 5
    with pytest.raises(skan.ContractError):
        skan.BasisDescriptor("NotAFamily")


def test_chebyshev_t1_is_tanh():
    d = skan.BasisDescriptor("Chebyshev")
    x = np.linspace(-2.0, 2.0, 9)
    y = skan.eval_basis(d, np.array([0.0, 1.0, 0.0, 0.0, 0.0]), x)
    assert y.shape == x.shape
    np.testing.assert_allclose(y, np.tanh(x), atol=1e-14)


def test_fit_functions():
    keys = {key: arity for key, _, arity in skan.fit_functions()}
    assert len(keys) == 7
    assert keys["tanh_quartic"] == 3
    assert skan.eval_fit_function("multiply", [0.5, -0.4]) == pytest.approx(-0.2)


def test_param_counts():
    assert skan.build_fit_model("ChebyKAN", 2).param_count == 75
    assert skan.build_fit_model("MLP", 2).param_count == 21
    assert skan.build_fit_model("MLP_COMPLEX", 2).param_count == 121


def test_forward_shapes_and_determinism():
    m = skan.build_fit_model("SKAN", 2, seed=3)
    x = np.random.default_rng(0).uniform(-1, 1, size=(7, 2))
    y1 = m(x)
    y2 = skan.build_fit_model("SKAN", 2, seed=3).forward(x)
    assert y1.shape == (7, 1)
    assert np.array_equal(y1, y2)
    with pytest.raises(skan.ContractError):
        m(np.zeros((4, 3)))


def test_selection_and_checkpoint(tmp_path):
    train, test = skan.gen_fit_dataset("multiply", 64, 16, seed=1)
    pool = skan.default_pool()[:3]
    m = skan.build_fit_model("SKAN", 2, pool=pool, seed=1)
    s = skan.TrainSchedule.fitting()
    s.full_epochs_per_cycle = 1
    s.select_epochs_per_cycle = 1
    record, curve, epochs = skan.pretrain_select(m, train, s)
    assert record.cycles == 2
    assert epochs == 4
    assert len(curve) == 4
    assert m.fully_selected
    assert record.table().startswith("Node | Family\n1 | ")
    assert len(record.families()) == 7

    m.collapse()
    curve = skan.train(m, train, test, epochs=3)
    assert len(curve) == 3
    assert math.isfinite(curve[-1].test_metric)

    path = tmp_path / "m.skan"
    m.save(path)
    loaded = skan.load_model(path)
    x = test.inputs
    assert np.array_equal(loaded(x), m(x))
    assert loaded.param_count == m.param_count


def test_prune_renormalises():
    m = skan.build_fit_model("SKAN", 2, pool=skan.default_pool()[:4], seed=0)
    events = m.prune()
    assert len(events) == 7
    for e in events:
        assert len(e["weights_after"]) == 3
        assert sum(e["weights_after"]) == pytest.approx(1.0, abs=1e-12)


def test_protocol_and_classification_dataset():
    x = np.random.default_rng(2).uniform(-1, 1, size=(40, 2))
    labels = [int(a > 0) for a in x[:, 0]]
    data = skan.Dataset.classification(x, labels, 2)
    assert len(data) == 40
    m = skan.build_fit_model("MLP", 2, seed=0)
    assert 0.0 <= skan.evaluate(m, skan.Dataset.regression(x, x[:, :1] * x[:, 1:])) < 10.0
    s = skan.TrainSchedule.fitting()
    s.total_epochs = 5
    reg = skan.Dataset.regression(x, x[:, 0] * x[:, 1])
    out = skan.run_protocol(m, reg, reg, s)
    assert out["selection"] is None
    assert out["final_epochs"] == 5
