"""File-format interop between the braintools CLI and numpy.

Usage: interop.py <braintools executable>
"""

import json
import os
import shutil
import subprocess
import sys
import tempfile

import numpy as np

MASK64 = (1 << 64) - 1


class SplitMix64:
    def __init__(self, seed):
        self.state = seed & MASK64

    def next(self):
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def below(self, n):
        threshold = ((1 << 64) - n) % n
        while True:
            r = self.next()
            if r >= threshold:
                return r % n


def derangement(n, seed):
    p = list(range(n))
    gen = SplitMix64(seed)
    for i in range(n - 1, 0, -1):
        j = gen.below(i)
        p[i], p[j] = p[j], p[i]
    return p


def run(cli, *args):
    env = dict(os.environ, BRAINTOOLS_QUIET="1")
    res = subprocess.run([cli, *args], capture_output=True, text=True, env=env)
    if res.returncode != 0:
        raise AssertionError(f"{args} exited {res.returncode}: {res.stderr}")
    return json.loads(res.stdout) if res.stdout.strip() else None


def check_paired(root, n_delays):
    pair = os.path.join(root, "results", "sub-01", "pair", "default")
    meta = json.load(open(os.path.join(pair, "paired.json")))
    x = np.load(os.path.join(pair, "X.npy"))
    xds = np.load(os.path.join(pair, "Xds.npy"))
    y = np.load(os.path.join(pair, "Y.npy"))
    times = np.load(os.path.join(pair, "tr_times.npy"))
    total = sum(s["n_trs"] for s in meta["stories"])
    assert x.dtype == np.float64
    assert x.shape == (total, xds.shape[1] * n_delays), x.shape
    assert y.shape[0] == total and times.shape == (total,)
    # Delay blocks are per-story shifts of the downsampled features.
    d = xds.shape[1]
    start = 0
    for story in meta["stories"]:
        n = story["n_trs"]
        seg_ds = xds[start:start + n]
        seg_x = x[start:start + n]
        for b, k in enumerate(meta["pairing"]["fir_delays"]):
            block = seg_x[:, b * d:(b + 1) * d]
            assert np.all(block[:k] == 0)
            assert np.array_equal(block[k:], seg_ds[:n - k])
        start += n
    print("paired directory readable by numpy")


def check_mask(root):
    ceil = os.path.join(root, "results", "sub-01", "ceiling")
    mask = np.load(os.path.join(ceil, "mask.npy"))
    nc = np.load(os.path.join(ceil, "nc.npy"))
    threshold = json.load(open(os.path.join(root, "config.json")))["ceiling"]["threshold"]
    assert mask.dtype == np.bool_ and mask.shape == nc.shape
    assert np.array_equal(mask, nc > threshold)
    print("mask.npy matches nc > threshold")


def check_float32_features(cli, root):
    copy = os.path.join(os.path.dirname(root), "f32")
    shutil.copytree(root, copy, ignore=shutil.ignore_patterns("results"))
    stim = os.path.join(copy, "stimuli")
    for name in os.listdir(stim):
        if not name.endswith(".npy"):
            continue
        path = os.path.join(stim, name)
        np.save(path, np.load(path).astype(np.float32))
        side = path[:-4] + ".json"
        meta = json.load(open(side))
        meta.update({"model": "some-model", "layer": 7, "extractor_version": "1.2"})
        json.dump(meta, open(side, "w"))
    summary = run(cli, "run", "--config", os.path.join(copy, "config.json"))
    assert "fit" in summary["ran"], summary
    b = np.genfromtxt(os.path.join(copy, "results", "alignment.csv"), delimiter=",", names=True, dtype=None,
                      encoding=None)["B"]
    assert np.all(np.isfinite(b)), b
    print("float32 features with extra sidecar keys accepted")


def check_permute(cli, root, tmp):
    fmri = os.path.join(root, "sub-01", "fmri", "story-01.npy")
    out = os.path.join(tmp, "perm.npy")
    for block, seed in [(10, 3), (7, 12345678901234), (20, 0)]:
        meta = run(cli, "permute", "--fmri", fmri, "--block", str(block), "--seed", str(seed), "--out", out)
        y = np.load(fmri)
        side = json.load(open(os.path.join(tmp, "perm.permutation.json")))
        n_blocks = -(-y.shape[0] // block)
        expected = derangement(n_blocks, seed)
        assert side["mapping"] == expected, (side["mapping"], expected)
        assert meta["mapping"] == expected
        assert side["block_len"] == block and side["seed"] == seed and side["n_trs"] == y.shape[0]
        rebuilt = np.concatenate([y[s * block:(s + 1) * block] for s in expected])
        assert np.array_equal(np.load(out), rebuilt)
        # Sattolo's algorithm yields one cycle, so no block stays in place.
        assert all(expected[k] != k for k in range(n_blocks))
    print("permuted targets match an independent SplitMix64/Sattolo")


def main():
    cli = sys.argv[1]
    with tempfile.TemporaryDirectory() as tmp:
        spec = os.path.join(tmp, "spec.json")
        json.dump({"n_trs": 300, "n_voxels": 20, "n_participants": 2, "n_repeats": 3, "seed": 21}, open(spec, "w"))
        root = os.path.join(tmp, "data")
        run(cli, "synth", "--spec", spec, "--out", root)
        run(cli, "run", "--config", os.path.join(root, "config.json"), "--stages", "pair,ceiling")
        delays = json.load(open(os.path.join(root, "config.json")))["pairing"]["fir_delays"]
        check_paired(root, len(delays))
        check_mask(root)
        check_float32_features(cli, root)
        check_permute(cli, root, tmp)
    print("interop ok")


if __name__ == "__main__":
    main()
