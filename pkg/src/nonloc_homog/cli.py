"""Configuration-driven command line producing machine-readable reports.

Four subcommands: ``effective`` (three-method effective matrix),
``constants`` (certified and measured-gap constant chains plus the
auxiliary sandwich checks), ``dispersion`` (band-function table), and
``verify`` (discrepancy sweep, projector inequalities, real-space oracle
cross-validation).  One strict JSON config drives everything; unknown
keys are rejected.  Exit codes: 0 pass, 1 a mathematical check failed,
2 configuration or usage error.
"""

import argparse
import csv
import datetime
import json
import math
import pathlib
import sys

import numpy as np

from . import constants, corrector, fiber, homogenize, model, oracle

SCHEMA_VERSION = "1"

_KERNEL_KEYS = {
    "gaussian": {"family", "dim", "sigma", "mass"},
    "ball": {"family", "dim", "radius", "height"},
    "sampled": {"family", "dim", "x", "values"},
}
_MODULATION_KEYS = {
    "constant": {"kind", "value"},
    "cosine_product": {"kind", "amplitude", "axis"},
    "coefficients": {"kind", "coefficients"},
}
_TOP_KEYS = {
    "kernel",
    "modulation",
    "truncation",
    "xi_grid_per_dim",
    "eps",
    "contour_nodes",
    "max_contour_nodes",
    "hessian_step",
    "agreement_tol",
    "slope_window",
    "sharpness_factor",
    "oracle_tol",
    "oracle_grid",
    "oracle_lattice_radius",
    "xi_samples",
    "seed",
    "d0_source",
    "samples_per_unit",
    "threads",
}


class ConfigError(ValueError):
    """Invalid or unusable run configuration."""


def _require(cond, message):
    if not cond:
        raise ConfigError(message)


def _build_kernel(spec):
    _require(isinstance(spec, dict), "kernel must be an object")
    family = spec.get("family")
    _require(family in _KERNEL_KEYS, "kernel.family must be one of %s" % sorted(_KERNEL_KEYS))
    unknown = set(spec) - _KERNEL_KEYS[family]
    _require(not unknown, "unknown kernel keys for %s: %s" % (family, sorted(unknown)))
    dim = spec.get("dim", 1)
    _require(dim in (1, 2), "kernel.dim must be 1 or 2")
    if family == "gaussian":
        return model.GaussianKernel(spec.get("sigma", 1.0), mass=spec.get("mass", 1.0), dim=dim)
    if family == "ball":
        _require(dim == 1, "ball kernel is one-dimensional")
        return model.BallKernel(spec.get("radius", 1.0), spec.get("height", 0.5))
    _require(dim == 1, "sampled kernel is one-dimensional")
    _require("x" in spec and "values" in spec, "sampled kernel needs x and values arrays")
    return model.SampledKernel(np.asarray(spec["x"], float), np.asarray(spec["values"], float))


def _build_modulation(spec, dim):
    if spec is None:
        return model.Modulation.constant(dim, 1.0)
    _require(isinstance(spec, dict), "modulation must be an object")
    kind = spec.get("kind")
    _require(
        kind in _MODULATION_KEYS, "modulation.kind must be one of %s" % sorted(_MODULATION_KEYS)
    )
    unknown = set(spec) - _MODULATION_KEYS[kind]
    _require(not unknown, "unknown modulation keys for %s: %s" % (kind, sorted(unknown)))
    if kind == "constant":
        return model.Modulation.constant(dim, spec.get("value", 1.0))
    if kind == "cosine_product":
        return model.Modulation.cosine_product(dim, spec.get("amplitude", 0.5), axis=spec.get("axis", 0))
    coeffs = {}
    _require(isinstance(spec.get("coefficients"), list), "coefficients must be a list")
    for item in spec["coefficients"]:
        _require(
            isinstance(item, dict) and set(item) <= {"p", "q", "re", "im"},
            "each coefficient needs p, q, re and optionally im",
        )
        p = tuple(int(v) for v in np.atleast_1d(item["p"]))
        q = tuple(int(v) for v in np.atleast_1d(item["q"]))
        _require(len(p) == dim and len(q) == dim, "coefficient index dimension mismatch")
        coeffs[(p, q)] = complex(item.get("re", 0.0), item.get("im", 0.0))
    return model.Modulation(dim, coeffs)


class RunConfig:
    """Validated run configuration with documented defaults."""

    def __init__(self, raw):
        _require(isinstance(raw, dict), "config root must be a JSON object")
        unknown = set(raw) - _TOP_KEYS
        _require(not unknown, "unknown config keys: %s" % sorted(unknown))
        self.kernel = _build_kernel(raw.get("kernel", {"family": "gaussian"}))
        dim = self.kernel.dim
        self.mu = _build_modulation(raw.get("modulation"), dim)
        n = raw.get("truncation", 32 if dim == 1 else 8)
        _require(isinstance(n, int) and n >= 1, "truncation must be a positive integer")
        try:
            self.trunc = fiber.Truncation(n, dim)
            _require(
                n >= self.mu.bandwidth,
                "truncation %d below modulation bandwidth %d" % (n, self.mu.bandwidth),
            )
        except fiber.TruncationTooSmall as exc:
            raise ConfigError(str(exc))
        self.xi_grid_per_dim = raw.get("xi_grid_per_dim", homogenize.default_grid_per_dim(dim))
        _require(self.xi_grid_per_dim >= 3, "xi_grid_per_dim must be at least 3")
        eps = raw.get("eps", homogenize.default_eps_list(dim))
        _require(isinstance(eps, list) and len(eps) >= 3, "eps must list at least 3 values")
        _require(all(e > 0 for e in eps), "eps values must be positive")
        self.eps = sorted((float(e) for e in eps), reverse=True)
        self.contour_nodes = raw.get("contour_nodes", 64)
        self.max_contour_nodes = raw.get("max_contour_nodes", 4096)
        self.hessian_step = raw.get("hessian_step", 1e-2)
        self.agreement_tol = raw.get("agreement_tol", 1e-6)
        self.slope_window = raw.get("slope_window", [0.9, 1.1] if dim == 1 else [0.85, 1.15])
        _require(
            isinstance(self.slope_window, list) and len(self.slope_window) == 2,
            "slope_window must be [low, high]",
        )
        self.sharpness_factor = raw.get("sharpness_factor", 3.0)
        default_oracle_tol = 1e-3 if isinstance(self.kernel, model.BallKernel) else 1e-6
        self.oracle_tol = raw.get("oracle_tol", default_oracle_tol)
        self.oracle_grid = raw.get("oracle_grid", 512 if dim == 1 else 48)
        self.oracle_lattice_radius = raw.get("oracle_lattice_radius")
        self.xi_samples = raw.get("xi_samples", 50)
        self.seed = raw.get("seed", 1234)
        self.d0_source = raw.get("d0_source", "both")
        _require(
            self.d0_source in ("certified", "measured", "both"),
            "d0_source must be certified, measured, or both",
        )
        self.samples_per_unit = raw.get("samples_per_unit", 2048)
        self.threads = raw.get("threads")
        self.raw = raw


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    raise TypeError("not JSON serializable: %r" % (obj,))


def _write_json(path, payload):
    payload = dict(payload)
    payload["schema_version"] = SCHEMA_VERSION
    payload["timestamp"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _echo_config(cfg):
    return cfg.raw


def cmd_effective(cfg, out_dir):
    results = corrector.effective_all(
        cfg.kernel,
        cfg.mu,
        cfg.trunc,
        h=cfg.hessian_step,
        contour_nodes=cfg.contour_nodes,
        max_nodes=cfg.max_contour_nodes,
    )
    family = fiber.FiberFamily(cfg.kernel, cfg.mu, cfg.trunc)
    corrs = [corrector._solve_cell(family, j) for j in range(cfg.trunc.dim)]
    ok = results["max_relative_distance"] <= cfg.agreement_tol
    payload = {
        "config": _echo_config(cfg),
        "methods": {k: results[k].as_dict() for k in ("corrector", "hessian", "contour")},
        "pairwise_relative_distance": results["pairwise"],
        "max_relative_distance": results["max_relative_distance"],
        "agreement_tol": cfg.agreement_tol,
        "agreement_ok": ok,
        "correctors": [
            {
                "direction": s.direction,
                "modes": [list(map(int, n)) for n in cfg.trunc.indices],
                "v_re": s.v.real.tolist(),
                "v_im": s.v.imag.tolist(),
                "w_re": s.w.real.tolist(),
                "w_im": s.w.imag.tolist(),
                "residual": s.residual,
            }
            for s in corrs
        ],
    }
    _write_json(out_dir / "effective.json", payload)
    return 0 if ok else 1


def cmd_constants(cfg, out_dir):
    payload = {"config": _echo_config(cfg)}
    ok = True
    chain_cert = None
    if cfg.d0_source in ("certified", "both"):
        chain_cert = constants.threshold_chain(
            cfg.kernel, cfg.mu, samples_per_unit=cfg.samples_per_unit
        )
        payload["certified"] = chain_cert.as_dict()
    if cfg.d0_source in ("measured", "both"):
        gap = fiber.FiberFamily(cfg.kernel, cfg.mu, cfg.trunc).gap0()
        chain_meas = constants.threshold_chain(
            cfg.kernel, cfg.mu, d0_override=gap, samples_per_unit=cfg.samples_per_unit
        )
        payload["measured"] = chain_meas.as_dict()
        if chain_cert is not None:
            payload["gap_excess_over_certified"] = gap - chain_cert.d0_certified
            ok = ok and gap >= chain_cert.d0_certified - 1e-12 * max(gap, 1.0)
    appendix = payload.get("certified", payload.get("measured", {})).get("appendix")
    if appendix is None:
        payload["appendix_status"] = "unavailable"
    else:
        payload["appendix_status"] = "present"
        ok = ok and appendix["checks"]["moment_sandwich_holds"]
        ok = ok and appendix["checks"]["tail_mass_seven_eighths"]
        ok = ok and all(c["holds"] for c in appendix["checks"]["exterior_sandwich"].values())
    payload["checks_ok"] = ok
    _write_json(out_dir / "constants.json", payload)
    return 0 if ok else 1


def cmd_dispersion(cfg, out_dir):
    family = fiber.FiberFamily(cfg.kernel, cfg.mu, cfg.trunc)
    g0 = corrector._corrector_from_family(family)
    rows = homogenize.dispersion_table(
        cfg.kernel, cfg.mu, cfg.trunc, g0=g0, xi_grid_per_dim=cfg.xi_grid_per_dim
    )
    dim = cfg.trunc.dim
    header = ["xi_%d" % i for i in range(dim)] + ["lambda1", "lambda2", "q", "lambda1_minus_q"]
    with open(out_dir / "dispersion.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow(["%.17g" % v for v in row])

    chain = constants.threshold_chain(cfg.kernel, cfg.mu, samples_per_unit=cfg.samples_per_unit)
    radii = np.array([np.linalg.norm(r[:dim]) for r in rows])
    lam1 = np.array([r[dim] for r in rows])
    lam2 = np.array([r[dim + 1] for r in rows])
    qv = np.array([r[dim + 2] for r in rows])
    lower_ok = bool(np.all(lam1 >= chain.mu_minus * chain.C_a * radii**2 - 1e-12))
    gap_ok = bool(np.all(lam2 >= chain.mu_minus * chain.A_pi - 1e-12))
    nz = radii > 1e-12
    order = np.argsort(radii[nz])[:10]
    rr = radii[nz][order]
    dd = np.abs(lam1 - qv)[nz][order]
    good = dd > 0
    slope = float(np.polyfit(np.log(rr[good]), np.log(dd[good]), 1)[0]) if good.sum() >= 3 else math.nan
    ok = lower_ok and gap_ok and (math.isnan(slope) or slope >= 2.7)
    payload = {
        "config": _echo_config(cfg),
        "rows": len(rows),
        "quadratic_lower_ok": lower_ok,
        "quadratic_floor_constant": chain.mu_minus * chain.C_a,
        "gap_lower_ok": gap_ok,
        "gap_floor": chain.mu_minus * chain.A_pi,
        "near_zero_mismatch_slope": slope,
        "near_zero_mismatch_slope_floor": 2.7,
        "checks_ok": ok,
    }
    _write_json(out_dir / "dispersion.json", payload)
    return 0 if ok else 1


def _oracle_cross_check(cfg, rng):
    dim = cfg.trunc.dim
    if cfg.oracle_lattice_radius is not None:
        grid = oracle.CellGrid(dim, cfg.oracle_grid, cfg.oracle_lattice_radius)
    else:
        grid = oracle.CellGrid.for_kernel(cfg.kernel, cfg.oracle_grid)
    band = max(1, cfg.trunc.N - 2 * max(cfg.mu.bandwidth, 1))
    band = min(band, 4)
    probe = fiber.Truncation(band, dim)
    coeffs = rng.standard_normal(probe.size) + 1j * rng.standard_normal(probe.size)
    wide = np.zeros(cfg.trunc.size, dtype=complex)
    flat, valid = cfg.trunc.offsets(probe.indices)
    wide[flat[valid]] = coeffs[valid]
    xi = rng.uniform(-np.pi, np.pi, size=dim)
    out_real, v_in = oracle.apply_fiber_realspace(
        cfg.kernel, cfg.mu, xi, wide, cfg.trunc, grid, return_input=True
    )
    mat = fiber.FiberFamily(cfg.kernel, cfg.mu, cfg.trunc).operator(xi).matrix
    out_coeff = mat @ wide
    out_galerkin = oracle._synthesize(out_coeff, cfg.trunc, grid)
    out_real = np.asarray(out_real).ravel()
    num = float(np.linalg.norm(out_real - out_galerkin))
    den = float(np.linalg.norm(out_galerkin))
    action_err = num / max(den, 1e-300)
    form = oracle.quadratic_form_check(cfg.kernel, cfg.mu, xi, wide, cfg.trunc, grid)
    fd = abs(form["direct"] - form["symmetrized"]) / max(abs(form["direct"]), 1e-300)
    return {
        "xi": xi.tolist(),
        "action_relative_error": action_err,
        "form_relative_error": fd,
        "tolerance": cfg.oracle_tol,
        "ok": action_err <= cfg.oracle_tol and fd <= cfg.oracle_tol,
    }


def cmd_verify(cfg, out_dir):
    chain = constants.threshold_chain(cfg.kernel, cfg.mu, samples_per_unit=cfg.samples_per_unit)
    sweep = homogenize.discrepancy_sweep(
        cfg.kernel,
        cfg.mu,
        eps_list=cfg.eps,
        xi_grid_per_dim=cfg.xi_grid_per_dim,
        trunc=cfg.trunc,
        chain=chain,
        threads=cfg.threads,
    )
    with open(out_dir / "sweep.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["eps", "D", "D_over_eps", "certified_bound", "slack"]
            + ["argmax_xi_%d" % i for i in range(cfg.trunc.dim)]
        )
        for i, eps in enumerate(sweep.eps):
            writer.writerow(
                [
                    "%.17g" % v
                    for v in (
                        eps,
                        sweep.D[i],
                        sweep.ratio[i],
                        sweep.certified * eps,
                        sweep.slack[i],
                    )
                ]
                + ["%.17g" % x for x in sweep.argmax_xi[i]]
            )
    ineq = homogenize.fiber_inequality_check(
        cfg.kernel, cfg.mu, cfg.trunc, xi_samples=cfg.xi_samples, seed=cfg.seed, chain=chain
    )
    ineq_report = {k: v for k, v in ineq.items() if k != "rows"}
    rng = np.random.RandomState(cfg.seed + 1)
    oracle_report = _oracle_cross_check(cfg, rng)

    lo, hi = cfg.slope_window
    checks = {
        "slope_in_window": lo <= sweep.slope <= hi,
        "bound_satisfied": sweep.bound_satisfied,
        "sharpness": sweep.sharpness_ratio <= cfg.sharpness_factor,
        "fiber_inequalities": ineq["all_pass"],
        "oracle": oracle_report["ok"],
    }
    payload = {
        "config": _echo_config(cfg),
        "sweep": sweep.as_dict(),
        "fiber_inequalities": ineq_report,
        "oracle": oracle_report,
        "checks": checks,
        "checks_ok": all(checks.values()),
    }
    _write_json(out_dir / "verify.json", payload)
    return 0 if payload["checks_ok"] else 1


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="nonloc-homog",
        description="Effective-diffusion toolkit for periodic nonlocal convolution operators.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("effective", "constants", "dispersion", "verify"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="path to the JSON run configuration")
        p.add_argument("--out", default=".", help="output directory (default: current)")
        p.add_argument("--threads", type=int, default=None, help="worker threads for fiber maps")
    args = parser.parse_args(argv)

    try:
        with open(args.config) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return 2
    try:
        cfg = RunConfig(raw)
    except ConfigError as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return 2
    except (ValueError, TypeError) as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return 2
    if args.threads is not None:
        cfg.threads = args.threads
    out_dir = pathlib.Path(args.out)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print("config error: cannot create output directory: %s" % exc, file=sys.stderr)
        return 2

    handler = {
        "effective": cmd_effective,
        "constants": cmd_constants,
        "dispersion": cmd_dispersion,
        "verify": cmd_verify,
    }[args.command]
    return handler(cfg, out_dir)


if __name__ == "__main__":
    sys.exit(main())
