"""Quick check of the memfail Python bindings.

Build and install first:
    cd crates/python && maturin build --release -o dist && pip install dist/*.whl
"""

import json
import math
import random

import memfail


def check_catalog():
    cat = memfail.catalog()
    assert memfail.catalog_version() == "memfail-catalog/1"
    assert len(cat) == 46
    names = [c[0] for c in cat]
    assert len(set(names)) == len(names)


def check_state():
    st = memfail.DimmState("dimm-a", 168.0, "overall")
    st.ingest(0, "ce.read", 1, 10, 20)
    st.ingest(3600, "ce.read", 1, 10, 20)
    first = st.snapshot()
    assert len(first) == 46
    st.advance_to(1000 * 3600)
    later = st.snapshot()
    assert first != later

    try:
        st.ingest(0, "ce.read", 1, 10, 20)
    except ValueError:
        pass
    else:
        raise AssertionError("out-of-order ingest accepted")


def check_labeling():
    assert memfail.largest_gap_split([0, 10, 11, 100, 101]) == 3
    assert memfail.largest_gap_split([5]) == 0


def check_forest():
    rng = random.Random(3)
    rows, labels = [], []
    for _ in range(400):
        y = rng.random() < 0.5
        x = [rng.gauss(2.0 if y else -2.0, 1.0), rng.gauss(0.0, 1.0)]
        rows.append(x)
        labels.append(int(y))
    model = memfail.Forest.train(rows[:300], labels[:300], n_trees=25, seed=1)
    correct = sum(
        (model.predict_proba(x) >= 0.5) == bool(y) for x, y in zip(rows[300:], labels[300:])
    )
    assert correct / 100 >= 0.95, correct
    imp = model.feature_importance()
    assert abs(sum(imp) - 1.0) < 1e-9
    assert imp[0] > imp[1]

    again = memfail.Forest.from_json(model.to_json())
    assert again.to_json() == model.to_json()
    assert json.loads(model.to_json())["format"] == "memfail-forest/1"


def check_metrics():
    p, r, pu, ru = memfail.metrics(3, 1, 1, 10)
    assert (p, r, pu, ru) == (0.75, 0.75, False, False)
    _, _, pu, _ = memfail.metrics(0, 0, 2, 5)
    assert pu
    assert memfail.error_rate_normal([True, False, False, False]) == 0.25
    assert float(f"{memfail.relative_improvement(0.48, 0.44):.3g}") == 0.0909
    assert float(f"{memfail.relative_improvement(0.41, 0.37):.3g}") == 0.108


def check_simulate():
    records, failures = memfail.simulate(n_normal=20, n_failing=2, duration_hours=1000.0, seed=7)
    again, _ = memfail.simulate(n_normal=20, n_failing=2, duration_hours=1000.0, seed=7)
    assert records == again
    assert len(failures) == 2
    ts = [r[0] for r in records]
    assert ts == sorted(ts)

    failed = {d for d, _ in failures}
    by_dimm = {}
    for t, dimm, kind, *_ in records:
        if kind.startswith("ce."):
            by_dimm.setdefault(dimm, []).append(t)
    sweep = memfail.threshold_baseline([(d in failed, v) for d, v in by_dimm.items()], 168.0)
    assert sweep and all(0.0 <= row[3] <= 1.0 for row in sweep)
    assert not any(math.isnan(row[2]) for row in sweep)


if __name__ == "__main__":
    check_catalog()
    check_state()
    check_labeling()
    check_forest()
    check_metrics()
    check_simulate()
    print("ok")
