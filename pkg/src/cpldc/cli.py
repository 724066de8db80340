"""Command-line driver: single fits, hyperparameter sweeps and synthetic data.

Outputs (in ``--out``):

``report.json``
    one run: config, dataset summary, metrics, hard assignment, bound trace.
``trace.csv``
    ``iteration,bound``.
``sweep.csv``
    ``param,value,status,nmi,pwf,modularity,final_bound,iterations``, one row
    per sweep value; per-point reports go to ``point_<i>/``.
``synthetic.content``, ``synthetic.cites``, ``truth.json``
    written by ``--generate``.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from cpldc.inference import FitConfig, fit, hard_assignment
from cpldc.kernel import KernelParams, build_covariance
from cpldc.metrics import modularity, nmi, pwf
from cpldc.network import ContentMatrix, Network, load_linqs, write_linqs
from cpldc.sampler import GenerativeConfig, make_separable_content, sample_network

logger = logging.getLogger("cpldc")

SWEEPABLE = ("theta", "sigma2", "jitter", "a", "b", "k")
DEFAULT_SWEEPS = {
    "sigma2": [0.5, 1.0, 2.0, 5.0, 10.0, 20.0],
    "theta": [0.1, 0.5, 1.0, 2.0, 5.0],
}


@dataclass(frozen=True)
class SyntheticSpec:
    """JSON-configurable synthetic dataset: separable Gaussian content plus a
    network drawn from the generative model with a planted partition."""

    n: int = 150
    K: int = 3
    d: int = 5
    separation: float = 6.0
    a: float = 0.5
    b: float = 0.5
    out_degree: int = 8
    kernel: KernelParams = field(default_factory=KernelParams)
    planted_shift: float = 3.0
    exclude_self_links: bool = False
    seed: int = 0

    @classmethod
    def from_dict(cls, data: dict) -> "SyntheticSpec":
        data = dict(data)
        unknown = set(data) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ValueError(f"unknown synthetic config keys: {sorted(unknown)}")
        if "kernel" in data:
            data["kernel"] = KernelParams(**data["kernel"])
        return cls(**data)

    def to_dict(self) -> dict:
        return asdict(self)


def generate_synthetic(spec: SyntheticSpec):
    content, labels = make_separable_content(spec.n, spec.K, spec.d, spec.separation, seed=spec.seed)
    gen = GenerativeConfig(
        n=spec.n,
        K=spec.K,
        a=spec.a,
        b=spec.b,
        out_degree=spec.out_degree,
        kernel=spec.kernel,
        seed=spec.seed,
        exclude_self_links=spec.exclude_self_links,
        planted_labels=labels,
        planted_shift=spec.planted_shift,
    )
    network, truth = sample_network(gen, content)
    return network, content, truth


@dataclass(frozen=True)
class RunConfig:
    content: str | None = None
    cites: str | None = None
    synthetic: SyntheticSpec | None = None
    K: int | None = None
    kernel: KernelParams = field(default_factory=KernelParams)
    a: float = 1e-3
    b: float = 1e-3
    tol: float = 1e-8
    max_iters: int = 1000
    seed: int = 0
    fixed_popularity: bool = False
    sweep_param: str | None = None
    sweep_values: tuple[float, ...] = ()
    out: str | None = None
    emit_gamma: bool = False

    def __post_init__(self):
        has_files = self.content is not None or self.cites is not None
        if has_files == (self.synthetic is not None):
            raise ValueError("give either --content/--cites or a synthetic config, not both or neither")
        if has_files and (self.content is None or self.cites is None):
            raise ValueError("--content and --cites must be given together")
        if self.sweep_param is not None:
            if self.sweep_param not in SWEEPABLE:
                raise ValueError(f"cannot sweep {self.sweep_param!r}; choose from {SWEEPABLE}")
            if not self.sweep_values:
                raise ValueError("sweep needs at least one value")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["synthetic"] = None if self.synthetic is None else self.synthetic.to_dict()
        d["sweep_values"] = list(self.sweep_values)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        data = dict(data)
        data["kernel"] = KernelParams(**data["kernel"])
        if data.get("synthetic") is not None:
            data["synthetic"] = SyntheticSpec.from_dict(data["synthetic"])
        data["sweep_values"] = tuple(data.get("sweep_values", ()))
        return cls(**data)

    def with_value(self, param: str, value: float, seed: int) -> "RunConfig":
        if param in ("theta", "sigma2", "jitter"):
            cfg = replace(self, kernel=replace(self.kernel, **{param: value}))
        elif param == "k":
            cfg = replace(self, K=int(value))
        else:
            cfg = replace(self, **{param: value})
        return replace(cfg, seed=seed, sweep_param=None, sweep_values=())


def load_data(cfg: RunConfig) -> tuple[Network, ContentMatrix]:
    if cfg.synthetic is not None:
        network, content, _ = generate_synthetic(cfg.synthetic)
        return network, content
    return load_linqs(cfg.content, cfg.cites)


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _write_csv(path: Path, header, rows) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def evaluate(network: Network, assignment: np.ndarray) -> dict:
    metrics = {}
    if network.labels is not None:
        metrics["nmi"] = nmi(network.labels, assignment)
        metrics["pwf"] = pwf(network.labels, assignment)
    if network.num_links:
        metrics["modularity"] = modularity(network, assignment)
    return metrics


def run_single(cfg: RunConfig, data: tuple[Network, ContentMatrix] | None = None) -> dict:
    """Fit one configuration and return (and optionally write) its report."""
    start = time.perf_counter()
    network, content = data if data is not None else load_data(cfg)
    K = cfg.K if cfg.K is not None else network.num_classes()
    if not K:
        raise ValueError("K is required when the dataset has no labels")
    kernel = build_covariance(content, cfg.kernel)
    fit_cfg = FitConfig(
        K=K, a=cfg.a, b=cfg.b, max_iters=cfg.max_iters, tol=cfg.tol, seed=cfg.seed,
        fixed_popularity=cfg.fixed_popularity,
    )
    result = fit(network, content, kernel, fit_cfg)
    partition = hard_assignment(result.gamma)

    warnings_out = []
    if network.dropped_links:
        warnings_out.append(f"dropped {network.dropped_links} cites lines with unknown ids")
    if kernel.floor_count:
        warnings_out.append(f"floored {kernel.floor_count} covariance eigenvalues")
    if result.diagnostics["overflow_trips"]:
        warnings_out.append(f"exp() clamped {result.diagnostics['overflow_trips']} times")
    if not result.converged:
        warnings_out.append(f"not converged after {result.iterations} iterations")

    report = {
        "config": cfg.to_dict(),
        "K": K,
        "dataset": {
            "n": network.n,
            "links": network.num_links,
            "d": content.d,
            "dropped_links": network.dropped_links,
        },
        "metrics": evaluate(network, partition.assignment),
        "assignment": partition.assignment.tolist(),
        "final_bound": result.final_bound,
        "bound_trace": result.bound_trace,
        "iterations": result.iterations,
        "converged": result.converged,
        "wall_time": time.perf_counter() - start,
        "warnings": warnings_out,
    }
    if cfg.emit_gamma:
        report["gamma"] = result.gamma.tolist()
    if cfg.out is not None:
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        _write_json(out / "report.json", report)
        _write_csv(out / "trace.csv", ["iteration", "bound"],
                   [(i + 1, repr(b)) for i, b in enumerate(result.bound_trace)])
    return report


def _sweep_point(args):
    cfg, index, value, data = args
    try:
        point = cfg.with_value(cfg.sweep_param, value, cfg.seed + index)
        if cfg.out is not None:
            point = replace(point, out=str(Path(cfg.out) / f"point_{index}"))
        return run_single(point, data), None
    except Exception as exc:  # recorded per point; the sweep carries on
        return None, f"{type(exc).__name__}: {exc}"


SWEEP_HEADER = ["param", "value", "status", "nmi", "pwf", "modularity", "final_bound", "iterations"]


def run_sweep(cfg: RunConfig, jobs: int = 1) -> tuple[list[dict | None], list[list]]:
    """One fit per sweep value; point i uses seed ``cfg.seed + i``."""
    if cfg.sweep_param is None:
        raise ValueError("no sweep requested")
    data = load_data(cfg)
    points = [(cfg, i, value, data) for i, value in enumerate(cfg.sweep_values)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_sweep_point, points))
    else:
        outcomes = [_sweep_point(p) for p in points]

    reports, rows = [], []
    for value, (report, error) in zip(cfg.sweep_values, outcomes):
        reports.append(report)
        if report is None:
            logger.error("sweep point %s=%s failed: %s", cfg.sweep_param, value, error)
            rows.append([cfg.sweep_param, repr(float(value)), "error", "", "", "", "", ""])
            continue
        m = report["metrics"]
        rows.append([
            cfg.sweep_param, repr(float(value)), "ok",
            *(repr(m[key]) if key in m else "" for key in ("nmi", "pwf", "modularity")),
            repr(report["final_bound"]), report["iterations"],
        ])
    if cfg.out is not None:
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        _write_csv(out / "sweep.csv", SWEEP_HEADER, rows)
    return reports, rows


def run_generate(spec: SyntheticSpec, out) -> dict:
    """Write a synthetic dataset in LINQS format plus its latent truth."""
    network, content, truth = generate_synthetic(spec)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    write_linqs(network, content, out / "synthetic.content", out / "synthetic.cites")
    payload = {
        "config": spec.to_dict(),
        "labels": network.labels.tolist(),
        "t": truth.t.tolist(),
        "gamma": truth.gamma.tolist(),
        "z": truth.z.tolist(),
    }
    _write_json(out / "truth.json", payload)
    return payload


def _parse_sweep(text: str) -> tuple[str, tuple[float, ...]]:
    if "=" not in text:
        name = text.strip()
        if name not in DEFAULT_SWEEPS:
            raise argparse.ArgumentTypeError(f"no default grid for {name!r}; use <param>=<v1,v2,...>")
        return name, tuple(DEFAULT_SWEEPS[name])
    name, values = text.split("=", 1)
    try:
        return name.strip(), tuple(float(v) for v in values.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad sweep values in {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cpldc", description=__doc__.splitlines()[0])
    src = p.add_argument_group("data")
    src.add_argument("--content", help="LINQS .content file")
    src.add_argument("--cites", help="LINQS .cites file")
    src.add_argument("--synthetic", metavar="JSON", help="synthetic dataset config (file path or inline JSON)")
    src.add_argument("--generate", metavar="JSON", help="only write a synthetic dataset to --out")
    model = p.add_argument_group("model")
    model.add_argument("--k", type=int, help="number of communities (default: number of labels)")
    model.add_argument("--kernel", choices=("rbf", "linear"), default="rbf")
    model.add_argument("--theta", type=float, default=1.0)
    model.add_argument("--sigma2", type=float, default=5.0)
    model.add_argument("--jitter", type=float, default=1e-5)
    model.add_argument("--a", type=float, default=1e-3)
    model.add_argument("--b", type=float, default=1e-3)
    model.add_argument("--fixed-popularity", action="store_true", help="pin every popularity at 1")
    run = p.add_argument_group("run")
    run.add_argument("--tol", type=float, default=1e-8)
    run.add_argument("--max-iters", type=int, default=1000)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--sweep", type=_parse_sweep, metavar="PARAM=V1,V2,...")
    run.add_argument("--jobs", type=int, default=1, help="parallel sweep points")
    run.add_argument("--out", help="output directory")
    run.add_argument("--emit-gamma", action="store_true", help="include soft memberships in report.json")
    run.add_argument("-v", "--verbose", action="store_true")
    return p


def _load_json_arg(text: str) -> dict:
    path = Path(text)
    if not text.lstrip().startswith("{") and path.exists():
        text = path.read_text(encoding="utf-8")
    return json.loads(text)


def config_from_args(args) -> RunConfig:
    synthetic = SyntheticSpec.from_dict(_load_json_arg(args.synthetic)) if args.synthetic else None
    sweep_param, sweep_values = args.sweep if args.sweep else (None, ())
    return RunConfig(
        content=args.content,
        cites=args.cites,
        synthetic=synthetic,
        K=args.k,
        kernel=KernelParams(args.kernel, args.theta, args.sigma2, args.jitter),
        a=args.a,
        b=args.b,
        tol=args.tol,
        max_iters=args.max_iters,
        seed=args.seed,
        fixed_popularity=args.fixed_popularity,
        sweep_param=sweep_param,
        sweep_values=sweep_values,
        out=args.out,
        emit_gamma=args.emit_gamma,
    )


def _summary(report: dict) -> str:
    metrics = " ".join(f"{k}={v:.4f}" for k, v in sorted(report["metrics"].items()))
    return f"bound={report['final_bound']:.6f} iterations={report['iterations']} {metrics}"


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.generate:
            if not args.out:
                raise ValueError("--generate needs --out")
            run_generate(SyntheticSpec.from_dict(_load_json_arg(args.generate)), args.out)
            print(f"wrote synthetic dataset to {args.out}")
            return 0
        cfg = config_from_args(args)
        if cfg.sweep_param is not None:
            reports, rows = run_sweep(cfg, jobs=args.jobs)
            for row in rows:
                print(",".join(str(x) for x in row))
            return 0 if all(r is not None for r in reports) else 1
        print(_summary(run_single(cfg)))
        return 0
    except Exception as exc:
        error = {"error": type(exc).__name__, "message": str(exc)}
        details = getattr(exc, "details", None)
        if details:
            error["details"] = {k: (v if isinstance(v, (int, float, str)) else repr(v)) for k, v in details.items()}
        if args.out:
            Path(args.out).mkdir(parents=True, exist_ok=True)
            _write_json(Path(args.out) / "error.json", error)
        print(json.dumps(error, sort_keys=True), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
