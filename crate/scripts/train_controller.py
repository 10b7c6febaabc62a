"""Fit the bundled fallback controller for the overtaking example.

A small tanh network is regressed onto the lane-change steering law from
configs/dubins_steer.toml and written as configs/dubins_controller.json.

    python3 scripts/train_controller.py [--steps 20000] [--seed 0]
"""

import argparse
import json
import pathlib

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

import numpy as np

ROOT = pathlib.Path(__file__).resolve().parent.parent


def steer(law, x):
    s = (x[:, 0] - law["center"]) / law["width"]
    side = np.tanh(x[:, 1] / law["split"]) if "split" in law else 1.0
    y_ref = side * law["offset"] * np.exp(-s * s)
    u = law["gain_y"] * (y_ref - x[:, 1]) - law["gain_phi"] * x[:, 2]
    return np.clip(u, -law["max_steer"], law["max_steer"])


def init(rng, sizes):
    params = []
    for a, b in zip(sizes[:-1], sizes[1:]):
        params.append([rng.normal(0.0, 1.0 / np.sqrt(a), (b, a)), np.zeros(b)])
    return params


def forward(params, x):
    acts = [x]
    h = x
    for k, (w, b) in enumerate(params):
        z = h @ w.T + b
        h = z if k == len(params) - 1 else np.tanh(z)
        acts.append(h)
    return acts


def grads(params, acts, err):
    out = []
    delta = err
    for k in reversed(range(len(params))):
        w, _ = params[k]
        out.append([delta.T @ acts[k], delta.sum(0)])
        if k:
            delta = (delta @ w) * (1.0 - acts[k] ** 2)
    return out[::-1]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--config", default=ROOT / "configs" / "dubins_steer.toml")
    ap.add_argument("--out", default=ROOT / "configs" / "dubins_controller.json")
    ap.add_argument("--steps", type=int, default=20000)
    ap.add_argument("--hidden", type=int, default=16)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    cfg = tomllib.loads(pathlib.Path(args.config).read_text())
    law = cfg["system"]["steer"]
    lo = np.array(cfg["domain"]["lower"])
    hi = np.array(cfg["domain"]["upper"])

    rng = np.random.default_rng(args.seed)
    params = init(rng, [3, args.hidden, args.hidden, 1])
    m = [[np.zeros_like(p) for p in layer] for layer in params]
    v = [[np.zeros_like(p) for p in layer] for layer in params]
    lr, b1, b2 = 3e-3, 0.9, 0.999
    for t in range(1, args.steps + 1):
        x = lo + (hi - lo) * rng.random((256, 3))
        acts = forward(params, x)
        err = (acts[-1][:, 0] - steer(law, x))[:, None] / len(x)
        for k, g in enumerate(grads(params, acts, err)):
            for j in range(2):
                m[k][j] = b1 * m[k][j] + (1 - b1) * g[j]
                v[k][j] = b2 * v[k][j] + (1 - b2) * g[j] ** 2
                mh = m[k][j] / (1 - b1**t)
                vh = v[k][j] / (1 - b2**t)
                params[k][j] -= lr * mh / (np.sqrt(vh) + 1e-8)
        if t % 5000 == 0:
            lr *= 0.5

    x = lo + (hi - lo) * rng.random((20000, 3))
    u = np.clip(forward(params, x)[-1][:, 0], -law["max_steer"], law["max_steer"])
    rmse = np.sqrt(np.mean((u - steer(law, x)) ** 2))
    print(f"rmse vs steer law: {rmse:.4f}")

    layers = []
    for k, (w, b) in enumerate(params):
        layers.append(
            {
                "weights": w.tolist(),
                "bias": b.tolist(),
                "activation": "identity" if k == len(params) - 1 else "tanh",
            }
        )
    clamp = [-law["max_steer"], law["max_steer"]]
    pathlib.Path(args.out).write_text(json.dumps({"layers": layers, "clamp": clamp}, indent=1) + "\n")


if __name__ == "__main__":
    main()
