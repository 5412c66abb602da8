"""Smoke tests for the _adaloc extension module."""

import json

import numpy as np

import _adaloc as al


def test_lock_unlock_roundtrip():
    spec = al.NetworkSpec.from_json(json.dumps({
        "input_dim": 8, "classes": 4,
        "layers": [
            {"type": "dense", "in": 8, "out": 16},
            {"type": "dense", "in": 16, "out": 4},
        ],
    }))
    store = al.init_network(spec, 42)
    assert store.dim == spec.param_count

    key = al.localize_key(store, rho=0.25)
    assert key.entry_count > 0
    locked = al.lock(store, key)
    restored = al.unlock(locked, key)
    np.testing.assert_array_equal(restored.flatten(), store.flatten())

    # locked forward differs from the source on a generic input
    x = np.linspace(-1.0, 1.0, 8)
    y_source = store.forward(x)
    y_locked = locked.params.forward(x)
    assert y_source.shape == (4,)
    assert not np.allclose(y_source, y_locked)


def test_finetune_and_refresh():
    spec = al.NetworkSpec.from_json(json.dumps({
        "input_dim": 6, "classes": 3,
        "layers": [
            {"type": "dense", "in": 6, "out": 12},
            {"type": "dense", "in": 12, "out": 3},
        ],
    }))
    store = al.init_network(spec, 7)
    train = al.gen_blobs(classes=3, dim=6, per_class=40, spread=0.1, seed=5)
    test = al.gen_blobs(classes=3, dim=6, per_class=20, spread=0.1, seed=5, split="test")

    adapted, metrics = al.finetune(store, train, eta=0.3, epochs=8, batch_size=16, seed=1)
    assert len(metrics) == 8
    assert al.evaluate(adapted, test).accuracy > 0.8

    key = al.localize_key(store, rho=0.2)
    keyed, _ = al.finetune(store, train, eta=0.3, epochs=8, batch_size=16, seed=1,
                           strategy="key-top", key=key)
    # non-key coordinates stay bit-identical
    mask = np.zeros(store.dim, dtype=bool)
    mask[np.asarray(key.indices)] = True
    before = store.flatten()
    after = keyed.flatten()
    np.testing.assert_array_equal(before[~mask], after[~mask])

    refreshed = al.refresh_key(keyed, key)
    locked = al.lock(store, key)
    np.testing.assert_array_equal(al.unlock(locked, refreshed).flatten(), keyed.flatten())


def test_bounds_functions():
    threshold, p2, p3, vacuous = al.distance_threshold(
        depth=3, b_sigma=1.0, b_theta=0.9, b_x=1.0, t=2.0, epsilon=1.0)
    assert abs(threshold - (1.0 / 0.729 - 0.9)) < 1e-12
    assert abs(p2 - 0.894) < 1e-3
    assert p3 < p2 and not vacuous

    assert al.variance_bound(1, 1, 1.0, [0.25], [0.01], 2.0) == 1.01

    m = np.diag([3.0, 4.0])
    assert abs(al.spectral_norm(m) - 4.0) < 1e-8


def test_dataset_from_numpy():
    X = np.random.default_rng(0).normal(size=(30, 5))
    labels = [i % 3 for i in range(30)]
    ds = al.Dataset.from_arrays(X, labels, 3)
    assert ds.size == 30
    assert ds.class_count == 3


def main():
    tests = [v for k, v in sorted(globals().items()) if k.startswith("test_")]
    for test in tests:
        test()
        print(f"ok: {test.__name__}")
    print(f"{len(tests)} python smoke tests passed")


if __name__ == "__main__":
    main()
