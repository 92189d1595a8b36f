"""Smoke test for the cesar_py extension.

Build and install first, e.g. `pip install --no-build-isolation ./crates/python`,
then run `python python/smoke_test.py`.
"""

import math
import os
import tempfile

import cesar_py as cp


def main():
    data = cp.simulate_burgers(seed=3, grid=16, steps=30)
    assert data.dims == [30, 16, 16, 2], data.dims
    assert data.var_names == ["u", "v"]

    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "burgers.gsf")
        data.save(path)
        back = cp.GridSeries.load(path)
        assert back.dims == data.dims
        assert all(abs(a - b) < 1e-6 for a, b in zip(back.values(), data.values()))

        model = cp.CesarModel.train(
            data, 24, cae_filters=[4, 4], cae_epochs=3, esn_nh=16, ensemble=8, seed=1
        )
        assert model.ensemble_size == 8
        assert len(model.loss_history) == 3
        model_path = os.path.join(tmp, "model.csr")
        model.save(model_path)
        model = cp.CesarModel.load(model_path)

    history, truth = data.slice(0, 24), data.slice(24, 30)
    ens = model.forecast(history, 6, n_temporal=8, seed=5)
    assert len(ens) == 8 and ens.horizon == 6
    lo, hi = ens.interval(0.9)
    cov = cp.coverage(lo, hi, truth)
    assert 0.0 <= cov <= 100.0
    med, iqr = cp.median_iqr(cp.mse_map(truth, ens.mean()))
    pers, _ = cp.median_iqr(cp.mse_map(truth, cp.persistence_forecast(history, 6)))
    assert math.isfinite(med) and math.isfinite(pers)

    k = cp.height_multiplier(10.0, 80.0)
    assert abs(k - 1.34590) < 1e-4
    curve = cp.PowerCurve.n100_2500()
    assert curve.rated_kw == 2500.0 and curve.power(2.0) == 0.0 and curve.power(30.0) == 0.0
    wind = cp.GridSeries([13.0] * 4, [1, 2, 2, 1], 1.0, ["wspd"])
    power, mean_kw, std_kw = cp.power_map(wind, curve, source_m=80.0)
    assert (mean_kw, std_kw) == (2500.0, 0.0), (mean_kw, std_kw)

    try:
        cp.GridSeries.load("/nonexistent/file.gsf")
    except FileNotFoundError:
        pass
    else:
        raise AssertionError("missing file should raise FileNotFoundError")

    print(f"ok: forecast median MSE {med:.3e} vs persistence {pers:.3e}, 90% coverage {cov:.1f}%")


if __name__ == "__main__":
    main()
