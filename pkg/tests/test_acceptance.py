"""Acceptance criteria, one test each.

Every test prints a single ``criterion N: PASS|FAIL ...`` line (also
collected into the terminal summary) and then asserts the same condition.
The long ones are marked ``slow`` but are part of the default run.
"""

import os
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest

import oracles
from conftest import ACCEPTANCE, random_arrays
from pass2d.cli import main as cli
from pass2d.dataset import DatasetConfig, FeatureSet, assemble, sort_permutation
from pass2d.evaluation import permutation_importance, unum_shuffle_robustness
from pass2d.features import (BALL_WIDTH, build_schema, extract, nearest_opponents, opp_block,
                             riskiest_opponents, tm_block)
from pass2d.ml.forest import RFConfig, build_tree, fit as rf_fit, gini_importance, rf_train
from pass2d.ml.mlp import MLPConfig, gradient_check, mlp_train
from pass2d.pipeline import PipelineConfig, run_pipeline, split_indices
from pass2d.synthgen import GenConfig, PolicyWeights, generate_arrays

N_CPU = os.cpu_count() or 1
SCALED = (256, 128, 64, 32, 16)


class Check:
    def __init__(self):
        self.ok = True
        self.notes = []

    def __call__(self, cond, note):
        cond = bool(cond)
        self.ok &= cond
        if not cond:
            self.notes.append(note)
        return cond


@contextmanager
def criterion(n, budget, summary):
    """Times the body, prints the verdict line, then asserts it."""
    c = Check()
    t0 = time.perf_counter()
    yield c
    dt = time.perf_counter() - t0
    c(dt < budget, f"took {dt:.1f}s, budget {budget}s")
    detail = summary() if callable(summary) else summary
    line = f"criterion {n}: {'PASS' if c.ok else 'FAIL'} {detail} [{dt:.1f}s < {budget}s]"
    if c.notes:
        line += " -- " + "; ".join(c.notes)
    print(line)
    ACCEPTANCE.append(line)
    assert c.ok, line


def test_c1_feature_width():
    with criterion(1, 1.0, "738 columns, blocks 12 / 42x11 / 24x11") as check:
        s = build_schema(2)
        check(len(s) == 738, f"width {len(s)}")
        check(BALL_WIDTH == 12 and s.columns[11].subject == "ball" and s.columns[12].subject != "ball", "ball block")
        for slot in range(11):
            t, o = tm_block(slot), opp_block(slot)
            check(t.stop - t.start == 42 and t.start == 12 + 42 * slot, f"teammate block {slot}")
            check(o.stop - o.start == 24 and o.start == 12 + 42 * 11 + 24 * slot, f"opponent block {slot}")
        check(extract(random_arrays(20, seed=1)).shape == (20, 738), "extracted shape")


def test_c2_risk_nearest_oracle(arrays_1000):
    a = arrays_1000
    worst = [0.0]
    with criterion(2, 30.0, lambda: f"1000 events, max |diff| {worst[0]:.2e} <= 1e-9") as check:
        X = extract(a)
        for i in range(len(a)):
            ref, picks = oracles.event_vector(a, i)
            worst[0] = max(worst[0], float(np.max(np.abs(X[i] - ref))))
            e = a.event(i)
            for s, p in enumerate(e.snapshot.teammates):
                ru, nu = picks[s]
                if s != a.kicker_slot[i]:
                    check([r.unum for r in riskiest_opponents(e, p, 2)] == ru, f"riskiest pick event {i}")
                check([o.unum for o in nearest_opponents(p, e.snapshot.opponents, 2)] == nu,
                      f"nearest pick event {i}")
        check(worst[0] <= 1e-9, "value mismatch")


def test_c3_sorting_invariants(arrays_1000):
    a = arrays_1000
    with criterion(3, 30.0, "opponent relabeling (x, fe) touches only unum columns; kicker-first is a block "
                            "permutation") as check:
        b = a.copy()
        rng = np.random.default_rng(0)
        for i in range(len(b)):
            b.opp_unum[i] = b.opp_unum[i][rng.permutation(11)]
        base_a, base_b = extract(a), extract(b)
        for sort in ("x", "fe"):
            for kf in (False, True):
                cfg = DatasetConfig(sort, kf)
                t, u = assemble(a, cfg, base_a), assemble(b, cfg, base_b)
                team_unum = np.array([c.group == "Team" and c.name.endswith("_unum") for c in t.schema.columns])
                check(np.array_equal(t.X[:, ~team_unum], u.X[:, ~team_unum]), f"{cfg.name}: non-unum columns")
                check(np.array_equal(t.label_index, u.label_index), f"{cfg.name}: labels")
                check(not np.array_equal(t.X[:, team_unum], u.X[:, team_unum]), f"{cfg.name}: unums unchanged")
        for sort in ("unum", "x", "fe"):
            plain = assemble(a, DatasetConfig(sort, False), base_a)
            first = assemble(a, DatasetConfig(sort, True), base_a)
            check(np.array_equal(plain.X[:, :12], first.X[:, :12]), "ball block moved")
            check(np.array_equal(plain.X[:, 474:], first.X[:, 474:]), "opponent blocks moved")
            p = plain.X[:, 12:474].reshape(-1, 11, 42)
            q = first.X[:, 12:474].reshape(-1, 11, 42)
            perm = sort_permutation(a.tm_pos, a.tm_unum, sort)
            ks = np.argmax(perm == a.kicker_slot[:, None], axis=1)
            for i in range(len(a)):
                order = [ks[i]] + [j for j in range(11) if j != ks[i]]
                check(np.array_equal(q[i], p[i, order]), f"{sort}: event {i} not a block permutation")
            check(np.array_equal(p[np.arange(len(a)), plain.label_index - 1],
                                 q[np.arange(len(a)), first.label_index - 1]), f"{sort}: receiver block")


def test_c4_gradient_check():
    err = [0.0]
    with criterion(4, 10.0, lambda: f"max relative error {err[0]:.2e} < 1e-4") as check:
        rng = np.random.default_rng(0)
        X = rng.normal(size=(24, 10))
        err[0] = max(gradient_check((16, 8, 4), X=X, seed=1), gradient_check((6,), seed=2))
        check(err[0] < 1e-4, "gradient mismatch")


def test_c5_rf_exhaustive():
    with criterion(5, 5.0, "300 tiny trees equal exhaustive Gini enumeration; importances sum to 1") as check:
        rng = np.random.default_rng(5)
        worst = 0.0
        for trial in range(300):
            n = int(rng.integers(2, 17))
            d = int(rng.integers(1, 4))
            depth = int(rng.integers(1, 3))
            X = rng.choice([-1.0, 0.0, 0.5, 1.0, 2.5], (n, d)) if trial % 2 else rng.normal(size=(n, d)).round(2)
            y = rng.integers(0, 3, n)
            cfg = RFConfig(n_trees=1, max_depth=depth, features_per_split="all", bootstrap=False, n_classes=3)
            tree = build_tree(np.asfortranarray(X), y, cfg, None)
            ref = oracles.exhaustive_tree(X.tolist(), y.tolist(), 3, depth)
            stack = [(0, ref)]
            while stack:
                node, r = stack.pop()
                check(tree.n_samples[node] == sum(r["counts"]), f"trial {trial}: node size")
                if "feature" not in r:
                    check(tree.feature[node] == -1, f"trial {trial}: extra split")
                    continue
                check((tree.feature[node], tree.threshold[node]) == (r["feature"], r["threshold"]),
                      f"trial {trial}: split")
                check(abs(tree.decrease[node] - float(r["decrease"])) < 1e-9, f"trial {trial}: decrease")
                stack += [(tree.left[node], r["left"]), (tree.right[node], r["right"])]
            if (tree.feature >= 0).any():
                forest = rf_fit(X, y, cfg)
                worst = max(worst, abs(gini_importance(forest).sum() - 1.0))
        X = rng.normal(size=(500, 6))
        y = (X[:, 0] + X[:, 1] > 0).astype(int)
        worst = max(worst, abs(gini_importance(rf_fit(X, y, RFConfig(n_trees=10))).sum() - 1.0))
        check(worst <= 1e-9, f"importance sum off by {worst:.1e}")


@pytest.mark.slow
def test_c6_end_to_end(tmp_path):
    acc = {}

    def summary():
        if not acc:
            return "no results"
        full = {k: v for k, v in acc.items() if "_all_" in k}
        margin = min(v - acc[k.replace("_all_", "_position_")] for k, v in full.items())
        lo = min(full, key=full.get)
        return (f"50000 events, 6 variants, MLP {list(SCALED)} + RF: min All accuracy {full[lo]:.4f} ({lo}), "
                f"min All - Position margin {margin:+.4f}")

    with criterion(6, 30 * 60.0, summary) as check:
        cfg = PipelineConfig(out_dir=str(tmp_path / "run"), gen=GenConfig(seed=0, n_events=50_000),
                             mlp=MLPConfig(hidden_layers=SCALED, dropout_rate=0.1, epochs=100),
                             rf=RFConfig(n_trees=100), position_baseline=True, save_models=False,
                             workers=N_CPU)
        res = run_pipeline(cfg)
        acc.update(res.accuracy)
        for line in sorted(acc.items()):
            print(f"  {line[0]}: {line[1]:.4f}")
        for d in cfg.datasets:
            pos = d.name.replace("_all_", "_position_")
            for kind in ("mlp", "rf"):
                a, p = acc[f"{d.name}_{kind}"], acc[f"{pos}_{kind}"]
                check(a >= 0.80, f"{d.name}_{kind} accuracy {a:.4f} < 0.80")
                check(a >= p, f"{d.name}_{kind}: All {a:.4f} < Position {p:.4f}")


def robustness_models(events, test_fraction=0.2):
    tr, te = split_indices(len(events), test_fraction, 0)
    train, test = events.subset(tr), events.subset(te)
    base = extract(train)
    out = {}
    for cfg in (DatasetConfig("x", False, feature_set=FeatureSet.NO_UNUM), DatasetConfig("unum", False)):
        t = assemble(train, cfg, base)
        out[(cfg.sort.value, "mlp")] = (cfg, mlp_train(t, MLPConfig(hidden_layers=SCALED, epochs=40)))
        out[(cfg.sort.value, "rf")] = (cfg, rf_train(t, RFConfig(n_trees=100)))
    return out, test


@pytest.mark.slow
def test_c7_robustness():
    curves = {}

    def summary():
        parts = [f"{s}/{k}: " + " ".join(f"{x:.3f}" for x in c.accuracies) for (s, k), c in sorted(curves.items())]
        return "curves at p=0,.1,.25,.5,.75,1 -- " + "; ".join(parts)

    with criterion(7, 10 * 60.0, summary) as check:
        models, test = robustness_models(generate_arrays(GenConfig(seed=1, n_events=20_000)))
        for key, (cfg, m) in models.items():
            curves[key] = unum_shuffle_robustness(m, test, cfg, (0.1, 0.25, 0.50, 0.75, 1.0), seed=7)
        for kind in ("mlp", "rf"):
            x = curves[("x", kind)].accuracies
            check(len(set(x)) == 1, f"x/{kind} curve not constant: {x}")
            u = curves[("unum", kind)].accuracies
            check(u[0] - u[-1] >= 0.10, f"unum/{kind} drop {u[0] - u[-1]:.3f} < 0.10")


@pytest.mark.slow
def test_c8_importance_ground_truth():
    tops = {}

    def summary():
        return "risk-only policy, top group: " + ", ".join(f"{k}={v}" for k, v in sorted(tops.items()))

    with criterion(8, 10 * 60.0, summary) as check:
        gen = GenConfig(seed=2, n_events=20_000, policy_weights=PolicyWeights(w_risk=1.0, w_dist=0.0, w_goal=0.0))
        a = generate_arrays(gen)
        tr, te = split_indices(len(a), 0.2, 0)
        cfg = DatasetConfig("x", False)
        train, test = assemble(a.subset(tr), cfg), assemble(a.subset(te), cfg)
        for kind, model in (("mlp", mlp_train(train, MLPConfig(hidden_layers=SCALED, epochs=40))),
                            ("rf", rf_train(train, RFConfig(n_trees=100)))):
            imp = permutation_importance(model, test, "group", n_repeats=5, seed=0)
            tops[kind] = imp.ranking()[0]
            print(f"  {kind}: " + ", ".join(f"{n} {s:.3f}" for n, s in zip(imp.names, imp.scores)))
            check(tops[kind] == "Riskiest", f"{kind} ranks {tops[kind]} first")


def tree_bytes(root: Path) -> dict:
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def run_stages(root: Path, workers: int) -> None:
    w = ["--workers", str(workers)]
    ev = str(root / "ev.p2dl")
    steps = [
        ["synth", "--seed", "9", "--events", "600", "-o", ev],
        ["build", ev, "--all-variants", "--test-fraction", "0.25", "--out-dir", str(root / "tables")],
        ["train", "--model", "mlp", "--hidden", "32,16", "--epochs", "3", "--data",
         str(root / "tables/fe_kf_all_index_train.csv"), "-o", str(root / "mlp.model")],
        ["train", "--model", "rf", "--trees", "16", "--data", str(root / "tables/fe_kf_all_index_train.csv"),
         "-o", str(root / "rf.model")],
        ["eval", "--model", str(root / "rf.model"), "--data", str(root / "tables/fe_kf_all_index_test.csv"),
         "--report-dir", str(root / "reports"), "--name", "acc"],
        ["robustness", "--model", str(root / "mlp.model"), "--events", ev, "--report-dir", str(root / "reports"),
         "--name", "rob"],
        ["importance", "--model", str(root / "rf.model"), "--data", str(root / "tables/fe_kf_all_index_test.csv"),
         "--repeats", "2", "--report-dir", str(root / "reports"), "--name", "imp"],
        ["importance", "--method", "gini", "--model", str(root / "rf.model"), "--data",
         str(root / "tables/fe_kf_all_index_test.csv"), "--report-dir", str(root / "reports"), "--name", "gini"],
    ]
    for argv in steps:
        assert cli(argv + w) == 0, argv
    cfg = root / "pipeline.json"
    cfg.write_text('{"gen": {"seed": 4, "n_events": 300}, "mlp": {"hidden_layers": [16], "epochs": 2}, '
                   '"rf": {"n_trees": 8}, "robustness": true, "importance": true, "importance_repeats": 2, '
                   '"write_tables": true}')
    assert cli(["pipeline", "--config", str(cfg), "--out-dir", str(root / "pipe")] + w) == 0


@pytest.mark.slow
def test_c9_determinism(tmp_path, capsys):
    counts = {}
    with criterion(9, 5 * 60.0, lambda: f"{counts.get('files', 0)} output files identical across runs with "
                                        f"workers 1, 1 and 8") as check:
        runs = {}
        for name, w in (("w1", 1), ("w1again", 1), ("w8", 8)):
            run_stages(tmp_path / name, w)
            runs[name] = tree_bytes(tmp_path / name)
        capsys.readouterr()
        counts["files"] = len(runs["w1"])
        for name in ("w1again", "w8"):
            check(runs[name].keys() == runs["w1"].keys(), f"{name}: different file set")
            diff = [k for k in runs["w1"] if runs[name].get(k) != runs["w1"][k]]
            check(not diff, f"{name} differs in {diff[:5]}")
