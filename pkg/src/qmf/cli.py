"""Command-line driver: ``qmf run config.json [--seed N] [--out DIR]``.

Exit codes: 0 all checks pass, 1 a check failed, 2 malformed config,
3 truncation (tree too shallow), 4 solver did not converge.
"""

from __future__ import annotations

import argparse
import csv
import json
import re
import sys
from pathlib import Path

import numpy as np

from . import algebra as alg
from . import cayley_chain as cc
from . import emf
from . import kernels as kn
from . import suite
from .graph import GraphError, Tree, TruncationError, build_cayley, tree_from_edges

SCHEMA = "qmf/1"
MODES = ("emf", "chain", "verify")
EXIT_OK, EXIT_CHECK, EXIT_SCHEMA, EXIT_TRUNCATION, EXIT_SOLVER = 0, 1, 2, 3, 4
DECAY_FIELDS = ("kernel", "beta", "n", "delta", "ratio")


class ConfigError(ValueError):
    """Malformed config; the message starts with the offending field."""

    def __init__(self, field: str, msg: str):
        super().__init__(f"{field}: {msg}")
        self.field = field


# ------------------------------------------------------------------ parsing


def _need(obj: dict, key: str, where: str):
    if key not in obj:
        raise ConfigError(f"{where}.{key}" if where else key, "missing")
    return obj[key]


def _path(v, field: str) -> tuple:
    if not isinstance(v, list) or not all(isinstance(i, int) and not isinstance(i, bool) for i in v):
        raise ConfigError(field, f"vertex path must be a list of integers, got {v!r}")
    return tuple(v)


def parse_tree(obj, field: str = "tree") -> Tree:
    if not isinstance(obj, dict):
        raise ConfigError(field, "expected an object")
    if "cayley" in obj:
        c = obj["cayley"]
        if not isinstance(c, dict):
            raise ConfigError(f"{field}.cayley", "expected an object")
        k, depth = _need(c, "k", f"{field}.cayley"), _need(c, "depth", f"{field}.cayley")
        for nm, v in (("k", k), ("depth", depth)):
            if not isinstance(v, int) or isinstance(v, bool) or v < (1 if nm == "k" else 0):
                raise ConfigError(f"{field}.cayley.{nm}", f"invalid value {v!r}")
        return build_cayley(k, depth)
    if "edges" in obj:
        edges = obj["edges"]
        if not isinstance(edges, list) or not edges:
            raise ConfigError(f"{field}.edges", "expected a non-empty list of vertex-path pairs")
        pairs = []
        for j, e in enumerate(edges):
            if not isinstance(e, list) or len(e) != 2:
                raise ConfigError(f"{field}.edges[{j}]", "expected a pair of vertex paths")
            pairs.append((_path(e[0], f"{field}.edges[{j}][0]"), _path(e[1], f"{field}.edges[{j}][1]")))
        root = _path(_need(obj, "root", field), f"{field}.root")
        try:
            t = tree_from_edges(pairs, root)
        except GraphError as exc:
            raise ConfigError(f"{field}.edges", str(exc)) from None
        # keep the caller's vertex names when they already are coordinate paths
        if all(t.labels[v] == v for v in t.vertices):
            return t
        raise ConfigError(f"{field}.edges", "vertex paths must follow the coordinate convention (child = parent + [i], root [])")
    raise ConfigError(field, "expected key 'cayley' or 'edges'")


def parse_matrix(v, field: str, shape=None) -> np.ndarray:
    try:
        if isinstance(v, dict):
            m = np.asarray(_need(v, "re", field), dtype=float) + 1j * np.asarray(v.get("im", 0.0), dtype=float)
        else:
            m = np.asarray(v, dtype=float).astype(complex)
    except (TypeError, ValueError):
        raise ConfigError(field, "expected a numeric matrix or {re, im}") from None
    if m.ndim != 2 or m.shape[0] != m.shape[1] or (shape is not None and m.shape != shape):
        raise ConfigError(field, f"bad matrix shape {m.shape}")
    return m


def parse_field(obj, tree: Tree, rng, field: str = "field") -> emf.AmplitudeField:
    if obj is None:
        raise ConfigError(field, "missing")
    try:
        if obj == "example":
            return emf.AmplitudeField.example(tree)
        if isinstance(obj, dict):
            if "edges" in obj:
                return emf.AmplitudeField.from_json(tree, obj)
            if "constant" in obj:
                return emf.AmplitudeField.constant(tree, parse_matrix(obj["constant"], f"{field}.constant"))
            if "random" in obj:
                r = obj["random"] if isinstance(obj["random"], dict) else {}
                return emf.AmplitudeField.random(tree, int(r.get("d", 2)), rng, bool(r.get("phases", True)))
            if "uniform" in obj:
                r = obj["uniform"] if isinstance(obj["uniform"], dict) else {}
                phases = r.get("phases", "none")
                if phases not in ("none", "random", "signs"):
                    raise ConfigError(f"{field}.uniform.phases", f"expected none|random|signs, got {phases!r}")
                return emf.AmplitudeField.uniform_modulus(
                    tree, int(r.get("d", 2)), None if phases == "none" else rng, signs_only=phases == "signs")
    except (emf.FieldError, GraphError, KeyError, TypeError) as exc:
        if isinstance(exc, TruncationError):
            raise
        raise ConfigError(field, str(exc)) from None
    raise ConfigError(field, "expected 'example' or an object with edges|constant|random|uniform")


_TERM = re.compile(r"^\s*(?:e(\d)(\d)|I)\s*@\s*(\[[-\d,\s]*\])\s*$")


def parse_observable(text: str, d: int, field: str) -> alg.LocalOperator:
    """``"e11@[1,2]"``, ``"I@[]"``; factors joined with ``*`` multiply left to right."""
    if not isinstance(text, str) or not text.strip():
        raise ConfigError(field, "expected an observable string such as 'e11@[1]'")
    op = None
    for part in text.split("*"):
        m = _TERM.match(part)
        if not m:
            raise ConfigError(field, f"cannot parse factor {part.strip()!r}")
        x = _path(json.loads(m.group(3)), field)
        if m.group(1):
            i, j = int(m.group(1)), int(m.group(2))
            if not (1 <= i <= d and 1 <= j <= d):
                raise ConfigError(field, f"matrix unit e{i}{j} out of range for d={d}")
            f = alg.matrix_unit(x, i, j, d)
        else:
            f = alg.identity([x], d)
        op = f if op is None else alg.op_mul(op, f)
    return op


def _check_vertices(a: alg.LocalOperator, tree: Tree, field: str):
    bad = [v for v in a.support if v not in set(tree.vertices)]
    if bad:
        raise ConfigError(field, f"vertex {list(bad[0])} is not in the tree")


def parse_chain(obj, field: str = "chain") -> dict:
    if not isinstance(obj, dict):
        raise ConfigError(field, "expected an object")
    k = obj.get("k", 2)
    if not isinstance(k, int) or isinstance(k, bool) or k < 1:
        raise ConfigError(f"{field}.k", f"invalid order {k!r}")
    kernel = _need(obj, "kernel", field)
    betas = obj.get("betas", [obj["beta"]] if "beta" in obj else None)
    if isinstance(kernel, str):
        if kernel not in kn.KERNELS:
            raise ConfigError(f"{field}.kernel", f"expected one of {list(kn.KERNELS)}, got {kernel!r}")
        if betas is None:
            raise ConfigError(f"{field}.beta", "missing")
    elif isinstance(kernel, dict):
        if "H" in kernel:
            parse_matrix(kernel["H"], f"{field}.kernel.H")
            if betas is None:
                betas = [_need(kernel, "beta", f"{field}.kernel")]
        elif "K" in kernel:
            parse_matrix(kernel["K"], f"{field}.kernel.K")
            betas = betas or [None]
        else:
            raise ConfigError(f"{field}.kernel", "expected 'hopping', 'diagonal', {H, beta} or {K}")
    else:
        raise ConfigError(f"{field}.kernel", "invalid kernel spec")
    if not isinstance(betas, list) or not betas:
        raise ConfigError(f"{field}.betas", "expected a non-empty list")
    for j, b in enumerate(betas):
        if b is not None and (not isinstance(b, (int, float)) or isinstance(b, bool)):
            raise ConfigError(f"{field}.betas[{j}]", f"expected a number, got {b!r}")
    for nm in ("h", "w0"):
        v = obj.get(nm, "solve")
        if v != "solve":
            parse_matrix(v, f"{field}.{nm}")
    return {"k": k, "kernel": kernel, "betas": betas, "h": obj.get("h", "solve"), "w0": obj.get("w0", "solve"),
            "ansatz": obj.get("ansatz", "scalar")}


def _kernel_matrix(kernel, beta) -> tuple[str, np.ndarray]:
    if isinstance(kernel, str):
        return kernel, kn.kernel_matrix(kernel, beta)
    if "H" in kernel:
        H = alg.LocalOperator(("x", "y"), parse_matrix(kernel["H"], "chain.kernel.H"))
        return "custom", alg.herm_exp(H, beta).matrix
    return "custom", parse_matrix(kernel["K"], "chain.kernel.K")


def build_spec(chain: dict, beta) -> cc.ChainSpec:
    name, K = _kernel_matrix(chain["kernel"], beta)
    k = chain["k"]
    if chain["h"] == "solve":
        hsol = cc.solve_h(K, k, ansatz=chain["ansatz"])
        h, alpha = hsol.h, hsol.alpha
    else:
        h, alpha = parse_matrix(chain["h"], "chain.h"), None
    w0 = cc.solve_w0(K, h, k) if chain["w0"] == "solve" else parse_matrix(chain["w0"], "chain.w0")
    try:
        return cc.ChainSpec(k=k, K=K, h=h, w0=w0, alpha=alpha, name=name, beta=beta)
    except cc.ChainError as exc:
        raise ConfigError("chain", str(exc)) from None


# -------------------------------------------------------------------- modes


def _c(z) -> dict:
    z = complex(z)
    return {"re": z.real, "im": z.imag}


def run_emf(cfg: dict, rng) -> tuple[dict, list[suite.Check], list[dict]]:
    tree = parse_tree(_need(cfg, "tree", ""))
    field = parse_field(cfg.get("field"), tree, rng)
    tol = float(cfg.get("tolerance", {}).get("atol", 1e-10))
    obs_text = cfg.get("observables", [])
    if not isinstance(obs_text, list):
        raise ConfigError("observables", "expected a list")
    checks, results = [], []
    chain_dev = 0.0
    for j, text in enumerate(obs_text):
        a = parse_observable(text, field.d, f"observables[{j}]")
        _check_vertices(a, tree, f"observables[{j}]")
        val = emf.emf_expect(field, a, atol=tol)
        row = {"observable": text, "phi": _c(val)}
        n = max((len(v) for v in a.support), default=0)
        try:
            cv = emf.emf_as_chain(field, n + 1, a)
        except (emf.FieldError, GraphError):
            cv = None
        if cv is not None:
            row["phi_chain"] = _c(cv)
            chain_dev = max(chain_dev, abs(cv - val))
        results.append(row)
    checks.append(suite.Check("chain_equals_field", chain_dev, tol))
    # norm law on balls around the root that fit the vector cap
    regions = []
    r = (tree.root,)
    while True:
        try:
            grown = tree.closure(r)
        except TruncationError:
            break
        if len(grown) == len(r) or len(grown) > alg.MAX_VECTOR_SITES:
            break
        r = grown
        regions.append(r)
    norm_dev = emf.norm_law_deviation(field, regions) if regions else 0.0
    checks.append(suite.Check("norm_law", norm_dev, tol, detail={"regions": len(regions)}))
    report = {"observables": results}
    cl = cfg.get("classicality", {"n": 2})
    if cl is not None:
        if not isinstance(cl, dict) or not isinstance(cl.get("n", 2), int):
            raise ConfigError("classicality.n", "expected an integer")
        try:
            report["classicality"] = emf.classicality_report(field, cl.get("n", 2)).to_json()
        except emf.FieldError as exc:
            report["classicality"] = {"skipped": str(exc)}
    return report, checks, []


def run_chain(cfg: dict, rng) -> tuple[dict, list[suite.Check], list[dict]]:
    chain = parse_chain(_need(cfg, "chain", ""))
    tol = float(cfg.get("tolerance", {}).get("atol", 1e-10))
    obs_text = cfg.get("observables", ["e11@[]", "e12@[]"])
    if not isinstance(obs_text, list):
        raise ConfigError("observables", "expected a list")
    observables = [parse_observable(t, 2, f"observables[{j}]") for j, t in enumerate(obs_text)]
    for j, a in enumerate(observables):
        if any(v and max(v) > chain["k"] for v in a.support):
            raise ConfigError(f"observables[{j}]", f"vertex outside the order-{chain['k']} tree")
    cl = cfg.get("clustering", {})
    N = int(cl.get("N", 12))
    a_cl = parse_matrix(cl.get("a", [[1, 0], [0, 0]]), "clustering.a", (2, 2))
    b_cl = parse_matrix(cl.get("b", [[1, 0], [0, 0]]), "clustering.b", (2, 2))
    checks, rows, entries = [], [], []
    for beta in chain["betas"]:
        spec = build_spec(chain, beta)
        res = {
            "beta": beta,
            "kernel": spec.name,
            "alpha": spec.alpha,
            "h": {"re": spec.h.real.tolist(), "im": spec.h.imag.tolist()},
            "w0": {"re": spec.w0.real.tolist(), "im": spec.w0.imag.tolist()},
            "residual_normalization": cc.residual_normalization(spec),
            "residual_boundary": cc.residual_boundary(spec),
            "residual_initial": cc.residual_initial(spec),
        }
        if isinstance(chain["kernel"], str):
            orc = kn.analytic_oracle(chain["kernel"], beta)
            res["alpha_closed_form"] = orc.alpha
        res["compatibility"] = {str(n): cc.compatibility_check(spec, n) for n in (0, 1)}
        res["shift_invariance"] = {str(i): cc.shift_invariance_check(spec, i, observables) for i in range(1, spec.k + 1)}
        res["expectations"] = [{"observable": t, "phi": _c(cc.chain_expect(spec, a))} for t, a in zip(obs_text, observables)]
        T = cc.transfer_superoperator(spec)
        res["transfer"] = {
            "matrix_re": T.matrix.real.tolist(),
            "matrix_im": T.matrix.imag.tolist(),
            "eigenvalue_moduli": [float(abs(x)) for x in T.eigenvalues],
            "rate": T.rate,
        }
        cres = cc.clustering_decay(spec, a_cl, b_cl, N)
        res["clustering"] = {"flags": cres.flags, "brute_force_max_dev": cres.brute_force_max_dev}
        for row in cres.table():
            rows.append({"kernel": spec.name, "beta": beta, **row})
        entries.append(res)
        resid = max(res["residual_normalization"], res["residual_boundary"], res["residual_initial"])
        checks += [
            suite.Check("residuals", resid, tol, detail={"beta": beta}),
            suite.Check("compatibility", max(res["compatibility"].values()), tol, detail={"beta": beta}),
            suite.Check("shift_invariance", max(res["shift_invariance"].values()), tol, detail={"beta": beta}),
            suite.Check("clustering_brute_force", cres.brute_force_max_dev or 0.0, 1e-9, detail={"beta": beta}),
        ]
    return {"chains": entries}, checks, rows


def run_verify(cfg: dict, rng, seed: int) -> tuple[dict, list[suite.Check], list[dict]]:
    checks, rows = suite.run_suite(seed)
    return {}, checks, rows


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, complex):
        return _c(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serializable: {type(o).__name__}")


def write_outputs(out: Path, report: dict, rows: list[dict]):
    out.mkdir(parents=True, exist_ok=True)
    text = json.dumps(report, sort_keys=True, indent=2, default=_json_default)
    (out / "report.json").write_text(text + "\n")
    with open(out / "decay.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=DECAY_FIELDS, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: ("" if r.get(k) is None else r.get(k)) for k in DECAY_FIELDS})


def load_config(path: Path) -> dict:
    try:
        cfg = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError("config", f"file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"invalid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config", "top level must be an object")
    if cfg.get("schema") != SCHEMA:
        raise ConfigError("schema", f"expected {SCHEMA!r}, got {cfg.get('schema')!r}")
    if cfg.get("mode") not in MODES:
        raise ConfigError("mode", f"expected one of {list(MODES)}, got {cfg.get('mode')!r}")
    seed = cfg.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ConfigError("seed", f"expected an integer, got {seed!r}")
    tol = cfg.get("tolerance", {})
    if not isinstance(tol, dict) or not all(isinstance(v, (int, float)) for v in tol.values()):
        raise ConfigError("tolerance", "expected an object of numbers")
    return cfg


def run(config_path, seed: int | None = None, out: str | Path | None = None, stream=None) -> int:
    """Run one config; returns the process exit code."""
    stream = stream or sys.stderr
    try:
        cfg = load_config(Path(config_path))
        seed = cfg.get("seed", 0) if seed is None else seed
        rng = np.random.default_rng(seed)
        mode = cfg["mode"]
        if mode == "emf":
            body, checks, rows = run_emf(cfg, rng)
        elif mode == "chain":
            body, checks, rows = run_chain(cfg, rng)
        else:
            body, checks, rows = run_verify(cfg, rng, seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=stream)
        return EXIT_SCHEMA
    except TruncationError as exc:
        print(f"truncation error: {exc}", file=stream)
        return EXIT_TRUNCATION
    except cc.SolverError as exc:
        print(f"solver error: {exc}", file=stream)
        return EXIT_SOLVER
    report = {
        "schema": SCHEMA,
        "mode": mode,
        "seed": seed,
        **body,
        "checks": [c.to_json() for c in checks],
        "passed": all(c.passed for c in checks),
    }
    out = Path(out) if out is not None else Path(config_path).resolve().parent
    write_outputs(out, report, rows)
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name} [{suite.REFS.get(c.name, 'invented')}] "
              f"value={c.value:.3e} tol={c.tolerance:.1e}", file=stream)
    return EXIT_OK if report["passed"] else EXIT_CHECK


def main(argv=None) -> int:
    p = argparse.ArgumentParser(prog="qmf", description="Quantum Markov fields on trees.")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a JSON config and write report.json and decay.csv")
    r.add_argument("config", type=Path)
    r.add_argument("--seed", type=int, default=None, help="overrides the config's seed")
    r.add_argument("--out", type=Path, default=None, help="output directory (default: next to the config)")
    args = p.parse_args(argv)
    return run(args.config, args.seed, args.out)


if __name__ == "__main__":
    sys.exit(main())
