"""Writes regression_fixture.json: paired fields for a few designs plus metric
values computed here with exactly rounded sums (math.fsum), independent of the
Rust implementation. Re-run only if the fixture needs to change."""

import json
import math
import random

rng = random.Random(20240917)
designs = []
for design_id, n in [("F_S_WWC_WM_001", 240), ("E_S_WW_WM_648", 310), ("N_D_WWS_WM_077", 175), ("F_D_WM_WW_212", 290)]:
    truth = [rng.gauss(-90.0, 270.0) for _ in range(n)]
    pred = [t + rng.gauss(4.0, 35.0) for t in truth]
    designs.append({"design_id": design_id, "truth": truth, "prediction": pred})

y = [v for d in designs for v in d["truth"]]
p = [v for d in designs for v in d["prediction"]]
n = len(y)
d = [b - a for a, b in zip(y, p)]
mean_y = math.fsum(y) / n


def quantile(values, q):
    v = sorted(values)
    h = (len(v) - 1) * q
    lo = math.floor(h)
    hi = min(lo + 1, len(v) - 1)
    return v[lo] + (h - lo) * (v[hi] - v[lo])


abs_err = [abs(e) for e in d]
mse = math.fsum(e * e for e in d) / n
oracle = {
    "mae": math.fsum(abs_err) / n,
    "mse": mse,
    "rmse": math.sqrt(mse),
    "r2": 1.0 - math.fsum(e * e for e in d) / math.fsum((a - mean_y) ** 2 for a in y),
    "rel_l2": math.sqrt(math.fsum(e * e for e in d) / math.fsum(a * a for a in y)),
    "rel_l1": math.fsum(abs_err) / math.fsum(abs(a) for a in y),
    "max_error": max(abs_err),
    "p50": quantile(abs_err, 0.50),
    "p90": quantile(abs_err, 0.90),
    "p95": quantile(abs_err, 0.95),
    "p99": quantile(abs_err, 0.99),
    "median_rel_error": quantile([abs(e) / (abs(a) + 1e-8) for e, a in zip(d, y)], 0.5),
}

with open("regression_fixture.json", "w") as f:
    json.dump({"model": "AB-UPT", "designs": designs, "oracle": oracle}, f)
    f.write("\n")
