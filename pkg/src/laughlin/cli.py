"""Command-line front end: configuration, pipelines, reproducible artifacts.

Every subcommand writes its numeric outputs as CSV or JSON into the
output directory, then a ``<subcommand>_manifest.json`` recording the
full configuration, library versions, SHA-256 checksums of the
artifacts, and the wall time.  Apart from the manifest (whose wall time
necessarily varies), reruns with the same configuration and seed
produce byte-identical files.

All floating-point output is printed with 17 significant digits so
doubles round-trip exactly.

Exit codes: 0 success, 1 a verification check failed, 2 invalid
configuration (including an unconverged renewal model without
``--override-unconverged``), 3 a resource cap was exceeded.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import platform
import sys
import time
from importlib import metadata

import numpy as np
import scipy

from laughlin import correlations, expansion, hamiltonian, plasma, renewal
from laughlin.lattice import (
    CapExceeded,
    ConfigError,
    ModelParams,
    total_momentum,
)

CACHE_ENV = "LAUGHLIN_CACHE_DIR"


def default_cache_dir() -> str:
    env = os.environ.get(CACHE_ENV)
    if env:
        return env
    return os.path.join(os.path.expanduser("~"), ".cache", "laughlin")


def fmt(x: float) -> str:
    """17-significant-digit decimal form, exact for doubles."""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.17g}"


def _json_text(obj, indent: int = 0) -> str:
    """JSON with floats rendered by fmt (json.dumps would shorten them)."""
    pad, inner = "  " * indent, "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f'{inner}{json.dumps(str(k))}: {_json_text(v, indent + 1)}'
                 for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        items = [f"{inner}{_json_text(v, indent + 1)}" for v in seq]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isfinite(x):
            return fmt(x)
        return json.dumps(fmt(x))  # inf/nan are not JSON numbers
    if obj is None:
        return "null"
    return json.dumps(str(obj))


class Emitter:
    """Collects artifacts in the output directory and writes the manifest."""

    def __init__(self, out_dir: str, subcommand: str, config: dict):
        self.out_dir = out_dir
        self.subcommand = subcommand
        self.config = config
        self.checksums: dict[str, str] = {}
        self.t0 = time.perf_counter()
        os.makedirs(out_dir, exist_ok=True)

    def _write(self, name: str, text: str) -> str:
        path = os.path.join(self.out_dir, name)
        data = text.encode()
        with open(path, "wb") as fh:
            fh.write(data)
        self.checksums[name] = hashlib.sha256(data).hexdigest()
        return path

    def csv(self, name: str, header: list[str], rows) -> str:
        lines = [",".join(header)]
        for row in rows:
            cells = []
            for v in row:
                if isinstance(v, (bool, np.bool_)):
                    cells.append(str(bool(v)).lower())
                elif isinstance(v, (int, np.integer)):
                    cells.append(str(int(v)))
                elif isinstance(v, (float, np.floating)):
                    cells.append(fmt(v))
                else:
                    cells.append(str(v))
            lines.append(",".join(cells))
        return self._write(name, "\n".join(lines) + "\n")

    def json(self, name: str, obj) -> str:
        return self._write(name, _json_text(obj) + "\n")

    def manifest(self, extra: dict | None = None) -> str:
        try:
            version = metadata.version("artifact")
        except metadata.PackageNotFoundError:
            version = "unknown"
        doc = {
            "subcommand": self.subcommand,
            "inputs": self.config,
            "versions": {
                "python": platform.python_version(),
                "numpy": np.__version__,
                "scipy": scipy.__version__,
                "artifact": version,
            },
            "artifacts": dict(sorted(self.checksums.items())),
            "wall_time_s": time.perf_counter() - self.t0,
        }
        if extra:
            doc.update(extra)
        name = f"{self.subcommand}_manifest.json"
        path = os.path.join(self.out_dir, name)
        with open(path, "wb") as fh:
            fh.write((_json_text(doc) + "\n").encode())
        return path


def _config_dict(args: argparse.Namespace) -> dict:
    skip = {"func"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _load_tables(p: int, Nmax: int, cache_dir: str, no_compute: bool = False,
                 cap: int | None = None) -> list[expansion.CoefficientTable]:
    """Coefficient tables 1..Nmax from cache, computing on a miss."""
    paths = [expansion.cache_path(cache_dir, p, n) for n in range(1, Nmax + 1)]
    if all(os.path.exists(path) for path in paths):
        return [expansion.load_cache(path, expected_p=p, expected_N=n)
                for n, path in enumerate(paths, start=1)]
    if no_compute:
        raise ConfigError(
            f"cache at {cache_dir} lacks tables for p={p}, N<={Nmax}; "
            "run the expand subcommand or drop --no-compute")
    tables = expansion.expand_all(p, Nmax, cap=cap)
    os.makedirs(cache_dir, exist_ok=True)
    for n, (table, path) in enumerate(zip(tables, paths), start=1):
        if not os.path.exists(path):
            expansion.save_cache(table, path)
    return tables


# -- subcommands --------------------------------------------------------------------


def cmd_expand(args) -> int:
    em = Emitter(args.out_dir, "expand", _config_dict(args))
    tables = expansion.expand_all(args.p, args.N, cap=args.cap)
    os.makedirs(args.cache_dir, exist_ok=True)
    entries = []
    for table in tables:
        path = expansion.cache_path(args.cache_dir, args.p, table.N)
        if not os.path.exists(path):
            expansion.save_cache(table, path)
        with open(path, "rb") as fh:
            digest = hashlib.sha256(fh.read()).hexdigest()
        entries.append({"N": table.N, "terms": len(table.coeffs),
                        "cache_file": os.path.basename(path),
                        "sha256": digest})
    em.json("expand_summary.json",
            {"p": args.p, "N": args.N, "tables": entries})
    em.manifest()
    return 0


def cmd_norms(args) -> int:
    em = Emitter(args.out_dir, "norms", _config_dict(args))
    tables = _load_tables(args.p, args.Nmax, args.cache_dir, cap=args.cap)
    C = renewal.norms_from_tables(tables, args.gamma)
    em.csv("norms.csv", ["N", "C_N"],
           [(n, C[n]) for n in range(1, args.Nmax + 1)])
    em.manifest()
    return 0


def cmd_renewal(args) -> int:
    em = Emitter(args.out_dir, "renewal", _config_dict(args))
    tables = _load_tables(args.p, args.Nmax, args.cache_dir, cap=args.cap)
    model = renewal.build_model(args.p, args.Nmax, args.gamma, tables=tables)
    model.require_converged(args.override_unconverged)
    u = model.renewal_sequence(args.Nmax)
    em.csv("renewal.csv", ["n", "alpha_n", "p_n", "u_n"],
           [(n, model.alpha[n - 1], model.pn[n - 1], u[n])
            for n in range(1, args.Nmax + 1)])
    em.json("renewal_summary.json", {
        "r": model.r, "mu": model.mu, "tail_mass": model.tail_mass,
        "c_sub": model.c_sub, "alpha_residual": model.alpha_residual,
        "root_shift": model.root_shift, "converged": not model.unconverged,
    })
    em.manifest()
    return 0


def cmd_corr(args) -> int:
    em = Emitter(args.out_dir, "corr", _config_dict(args))
    tables = _load_tables(args.p, max(args.Nmax, args.N or 0), args.cache_dir,
                          no_compute=args.no_compute, cap=args.cap)
    model = renewal.build_model(args.p, args.Nmax, args.gamma,
                                tables=tables[:args.Nmax])
    model.require_converged(args.override_unconverged)
    rods = correlations.rod_expectations(tables[:args.Nmax], args.gamma)
    override = args.override_unconverged

    occ_inf = correlations.occupation_infinite(model, rods, override=override)
    rows = [(k, occ_inf[k], "renewal", model.tail_mass)
            for k in range(args.p)]
    if args.N:
        amp = expansion.amplitudes(tables[args.N - 1], args.gamma)
        occ_fin = correlations.occupation_finite(amp)
        rows += [(k, occ_fin[k], "exact", 0.0) for k in range(occ_fin.size)]
    em.csv("occupations.csv", ["k", "value", "source", "error_estimate"],
           rows)

    kmax = args.kmax if args.kmax is not None else 5 * args.p
    pair_rows = []
    for l in range(kmax + 1):
        pc = correlations.pair_infinite(model, rods, 0, l, override=override)
        pair_rows.append((l, pc.truncated, "renewal", pc.error_estimate))
    em.csv("pairs.csv", ["l", "value", "source", "error_estimate"], pair_rows)

    step = args.gamma / 10.0
    if args.N:
        occ, k_start = occ_fin, 0
        x_lo, x_hi = -3.0, args.p * (args.N - 1) * args.gamma + 3.0
    else:
        tile = 13
        occ = np.tile(occ_inf, tile)
        k_start = 0
        x_lo = 5 * args.p * args.gamma
        x_hi = 8 * args.p * args.gamma
    xs = np.arange(x_lo, x_hi + 0.5 * step, step)
    rho = correlations.density_profile(occ, args.gamma, xs, k_start=k_start)
    em.csv("profile.csv", ["x", "rho"], zip(xs, rho))

    report = correlations.period_test(model, rods, override=override)
    em.json("period.json", {
        "period": report.period, "margin": report.margin,
        "used": report.used, "tolerance": report.tolerance,
        "deviations": list(report.deviations),
    })
    em.manifest()
    return 0


def cmd_ham(args) -> int:
    em = Emitter(args.out_dir, "ham", _config_dict(args))
    params = ModelParams(args.p, args.N, args.gamma)
    momentum = args.momentum
    if momentum is None:
        momentum = total_momentum(args.p, args.N)
    cap = args.cap if args.cap is not None else hamiltonian.DEFAULT_SECTOR_CAP
    basis = hamiltonian.sector_basis(params, momentum=momentum, cap=cap)
    build = hamiltonian.build_H(params, basis=basis, variant=args.variant)
    doc: dict = {
        "p": args.p, "N": args.N, "gamma": args.gamma,
        "momentum": momentum, "dim": basis.dim,
        "build_deviation": build.deviation,
    }
    failed = False

    if args.spectrum:
        count = min(args.spectrum, basis.dim)
        doc["spectrum"] = list(hamiltonian.spectrum(build.H, count=count,
                                                    seed=args.seed))

    if args.check_ground_state:
        tables = _load_tables(args.p, args.N, args.cache_dir, cap=args.cap)
        amp = expansion.amplitudes(tables[args.N - 1], args.gamma)
        psi = hamiltonian.exact_vector(basis, amp)
        report = hamiltonian.ground_check(build.H, psi)
        ok = report.residual < 1e-8 and report.kernel_dim == 1
        doc["ground_state"] = {
            "residual": report.residual, "kernel_dim": report.kernel_dim,
            "min_eigenvalue": report.min_eigenvalue, "passed": ok,
        }
        failed = failed or not ok

    if args.monomer_dimer:
        md = hamiltonian.build_monomer_dimer(params)
        norm = float(np.linalg.norm(md.psi))
        residual = float(np.linalg.norm(md.H @ md.psi)) / norm
        report = hamiltonian.ground_check(md.H, md.psi)
        ok = residual < 1e-10 and md.deviation < 1e-12
        doc["monomer_dimer"] = {
            "residual": residual, "kernel_dim": report.kernel_dim,
            "build_deviation": md.deviation, "num_terms": md.num_terms,
            "passed": ok,
        }
        failed = failed or not ok

    if args.perturbation_order is not None:
        report = hamiltonian.perturbation_series(params,
                                                 args.perturbation_order,
                                                 cache_dir=args.cache_dir)
        doc["perturbation"] = {
            "order": args.perturbation_order,
            "distances": list(report.distances),
            "decreasing": report.decreasing,
        }

    em.json("ham.json", doc)
    em.manifest()
    return 1 if failed else 0


def cmd_mcmc(args) -> int:
    em = Emitter(args.out_dir, "mcmc", _config_dict(args))
    params = ModelParams(args.p, args.N, args.gamma)
    observables = [s.strip() for s in args.observables.split(",") if s.strip()]
    unknown = set(observables) - {"density", "excess", "phase"}
    if unknown:
        raise ConfigError(f"unknown observables: {sorted(unknown)}")
    mc = plasma.McConfig(sweeps=args.sweeps, burn_in=args.burn_in,
                         thinning=args.thinning, seed=args.seed,
                         chains=args.chains)
    run = plasma.metropolis_run(params, mc)
    pooled = run.pooled()

    run_info = {
        "seed": args.seed, "chains": args.chains,
        "acceptance": run.acceptance,
        "chain_acceptance": list(run.chain_acceptance),
        "rhat": run.rhat, "sigma": list(run.sigma),
        "pathological": run.pathological,
        "nsamples": pooled.shape[0],
    }

    if "density" in observables:
        width = args.gamma / 2.0
        lo = -4.0
        hi = args.p * (args.N - 1) * args.gamma + 4.0
        edges = np.arange(lo, hi + 0.5 * width, width)
        est = plasma.density_histogram(pooled, edges, params)
        em.csv("density.csv", ["bin_center", "density", "stderr"],
               zip(est.centers, est.density, est.stderr))
        run_info["y_ks"] = est.y_ks

    if "excess" in observables:
        cuts = [(k - 0.5) * args.p * args.gamma for k in range(1, args.N)]
        stats = plasma.measure_excess(pooled, cuts, params)
        rows = []
        for xbar in stats.xbars:
            for K in sorted(stats.histogram[xbar]):
                rows.append((xbar, K, stats.histogram[xbar][K]))
        em.csv("excess.csv", ["xbar", "K", "probability"], rows)

    if "phase" in observables:
        tables = _load_tables(args.p, args.Nmax, args.cache_dir, cap=args.cap)
        model = renewal.build_model(args.p, args.Nmax, args.gamma,
                                    tables=tables)
        model.require_converged(args.override_unconverged)
        rods = correlations.rod_expectations(tables, args.gamma)
        occ = correlations.occupation_infinite(
            model, rods, override=args.override_unconverged)
        prof = plasma.phase_profile(pooled, params, occ)
        centers = 0.5 * (prof.edges[:-1] + prof.edges[1:])
        em.csv("phase.csv",
               ["phase_center", "observed", "predicted", "stderr"],
               zip(centers, prof.observed, prof.predicted, prof.stderr))
        run_info["phase_contrast"] = prof.contrast

    em.manifest(extra={"run": run_info})
    return 0


# -- verify-all ---------------------------------------------------------------------


def _verify_checks(args) -> list[dict]:
    """The cross-module consistency suite behind ``verify-all``."""
    p, Nmax, gamma = args.p, args.Nmax, args.gamma
    checks: list[dict] = []

    def record(name: str, measured: float, tol: float, passed: bool,
               note: str = ""):
        checks.append({"name": name, "measured": measured, "tolerance": tol,
                       "passed": bool(passed), "note": note})

    tables = _load_tables(p, Nmax, args.cache_dir, cap=args.cap)

    worst = 0
    for N in range(2, Nmax + 1):
        report = expansion.verify_product_rule(p, N, tables=tables)
        worst = max(worst, len(report.failures))
    record("product-rule", float(worst), 0.0, worst == 0,
           "coefficient recursion failures")

    dev = max(expansion.evaluate_oracle(tables[N - 1])
              for N in range(2, min(4, Nmax) + 1))
    record("expansion-oracle", dev, 0.0, dev == 0.0,
           "exact big-integer evaluation at random points")

    model = renewal.build_model(p, Nmax, gamma, tables=tables)
    record("alpha-residual", model.alpha_residual, 1e-12,
           model.alpha_residual <= 1e-12,
           "direct vs recursive irreducible weights")

    act = abs(float(np.polyval(
        np.concatenate(([0.0], np.asarray(model.alpha)))[::-1], model.r)) - 1.0)
    record("activity-equation", act, 1e-10, act <= 1e-10,
           "sum alpha_n r^n = 1 at the solved activity")

    converged = not model.unconverged
    record("tail-converged", model.tail_mass, renewal.TAIL_THRESHOLD,
           converged or args.override_unconverged,
           "rod-size distribution tail below threshold")
    if not converged and not args.override_unconverged:
        return checks

    override = args.override_unconverged
    rods = correlations.rod_expectations(tables, gamma)
    occ_inf = correlations.occupation_infinite(model, rods, override=override)
    dev = abs(float(occ_inf.sum()) - 1.0)
    record("occupation-normalization", dev, 1e-8, dev <= 1e-8,
           "bulk occupations over one period sum to 1")

    amp = expansion.amplitudes(tables[Nmax - 1], gamma)
    occ_fin = correlations.occupation_finite(amp)
    via = correlations.occupation_finite_via_renewal(model, rods, Nmax)
    dev = float(np.max(np.abs(occ_fin - via)))
    record("finite-renewal-match", dev, 1e-10, dev <= 1e-10,
           "finite occupations reassembled from the renewal form")

    dev = float(np.max(np.abs(occ_fin - occ_fin[::-1])))
    record("occupation-reflection", dev, 1e-12, dev <= 1e-12,
           "finite occupations reflection-symmetric")

    k_mid = p * (Nmax // 2)
    eps = correlations.bulk_epsilon(model, rods, Nmax, k_mid)
    dev = abs(occ_fin[k_mid] - occ_inf[k_mid % p])
    record("bulk-epsilon", dev, eps, dev <= eps,
           f"center occupation at N={Nmax} within the bridge-weight bound")

    N_h = min(4, Nmax)
    params = ModelParams(p, N_h, gamma)
    basis = hamiltonian.sector_basis(params,
                                     momentum=total_momentum(p, N_h))
    build = hamiltonian.build_H(params, basis=basis)
    record("build-agreement", build.deviation, 1e-12,
           build.deviation <= 1e-12,
           "quadruple and bond assemblies of the parent Hamiltonian")

    amp_h = expansion.amplitudes(tables[N_h - 1], gamma)
    psi = hamiltonian.exact_vector(basis, amp_h)
    report = hamiltonian.ground_check(build.H, psi)
    record("ground-residual", report.residual, 1e-8,
           report.residual < 1e-8, f"N={N_h} momentum sector")
    record("ground-kernel", float(report.kernel_dim), 1.0,
           report.kernel_dim == 1, "kernel dimension in the sector")

    if p == 3:
        N_md = min(6, Nmax)
        md = hamiltonian.build_monomer_dimer(ModelParams(3, N_md, gamma))
        residual = float(np.linalg.norm(md.H @ md.psi)
                         / np.linalg.norm(md.psi))
        record("monomer-dimer-residual", residual, 1e-10, residual < 1e-10,
               f"N={N_md} tiling state against the truncated Hamiltonian")

        basis_tt = hamiltonian.sector_basis(ModelParams(3, min(3, Nmax),
                                                        gamma))
        htt = hamiltonian.build_HTT(ModelParams(3, min(3, Nmax), gamma),
                                    basis=basis_tt)
        vec = hamiltonian.tao_thouless(ModelParams(3, min(3, Nmax), gamma),
                                       basis_tt)
        res_tt = float(np.linalg.norm(htt @ vec))
        record("thin-torus-zero-mode", res_tt, 1e-12, res_tt <= 1e-12,
               "one-per-rod state annihilated by the diagonal truncation")

        if gamma >= 1.2:
            rep = hamiltonian.perturbation_series(
                ModelParams(3, min(3, Nmax), gamma), 3,
                cache_dir=args.cache_dir)
            d = rep.distances
            ok = all(b < a for a, b in zip(d, d[1:]))
            record("perturbation-decreasing", d[-1], d[0], ok,
                   "series distances to the exact state shrink per order")

    params2 = ModelParams(p, 2, gamma)
    mc = plasma.McConfig(sweeps=12000, burn_in=500, thinning=3,
                         seed=args.seed, chains=2)
    run = plasma.metropolis_run(params2, mc)
    pooled = run.pooled()
    xbar = 0.5 * p * gamma
    stats = plasma.measure_excess(pooled, [xbar], params2)
    exact = plasma.exact_excess_zero(
        expansion.amplitudes(tables[1], gamma), xbar)
    se = stats.p_zero_stderr[xbar]
    z = abs(stats.p_zero[xbar] - exact) / se if se > 0 else math.inf
    record("mcmc-excess", z, 4.0, z < 4.0,
           "sampled P(K=0) against the exact two-particle value, in sigma")

    est = plasma.density_histogram(
        pooled, np.linspace(-4.0, p * gamma + 4.0, 40), params2)
    crit = 1.63 / math.sqrt(pooled.shape[0] * pooled.shape[1])
    record("mcmc-y-uniform", est.y_ks, crit, est.y_ks < crit,
           "Kolmogorov-Smirnov distance of the angular marginal")
    return checks


def cmd_verify(args) -> int:
    em = Emitter(args.out_dir, "verify", _config_dict(args))
    checks = _verify_checks(args)
    for c in checks:
        status = "PASS" if c["passed"] else "FAIL"
        print(f"{status} {c['name']}: measured {fmt(c['measured'])} "
              f"(tolerance {fmt(c['tolerance'])})")
    all_ok = all(c["passed"] for c in checks)
    em.json("verify.json", {"passed": all_ok, "checks": checks})
    em.manifest()
    return 0 if all_ok else 1


# -- parser -------------------------------------------------------------------------


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--cache-dir", default=default_cache_dir(),
                     help=f"coefficient cache (default ${CACHE_ENV} "
                          "or ~/.cache/laughlin)")
    sub.add_argument("--out-dir", default=".",
                     help="directory for CSV/JSON artifacts")
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--threads", type=int, default=None,
                     help="worker-count hint; outputs do not depend on it")
    sub.add_argument("--override-unconverged", action="store_true",
                     help="proceed when the rod-size tail is above threshold")
    sub.add_argument("--cap", type=int, default=None,
                     help="override the built-in particle-number cap")
    sub.add_argument("--p", type=int, default=3)
    sub.add_argument("--gamma", type=float, default=1.0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="laughlin",
        description="Exact expansions, renewal structure, parent "
                    "Hamiltonians, and Monte Carlo for Laughlin states "
                    "on the cylinder.")
    subs = parser.add_subparsers(dest="subcommand", required=True)

    sub = subs.add_parser("expand", help="build and cache coefficient tables")
    _add_common(sub)
    sub.add_argument("--N", type=int, required=True)
    sub.set_defaults(func=cmd_expand)

    sub = subs.add_parser("norms", help="squared norms C_N at a gamma")
    _add_common(sub)
    sub.add_argument("--Nmax", type=int, default=6)
    sub.set_defaults(func=cmd_norms)

    sub = subs.add_parser("renewal", help="rod weights and renewal model")
    _add_common(sub)
    sub.add_argument("--Nmax", type=int, default=6)
    sub.set_defaults(func=cmd_renewal)

    sub = subs.add_parser("corr", help="occupations, pair correlations, "
                                       "density profile, period test")
    _add_common(sub)
    sub.add_argument("--Nmax", type=int, default=6)
    sub.add_argument("--N", type=int, default=None,
                     help="also emit exact finite-N occupations")
    sub.add_argument("--kmax", type=int, default=None,
                     help="largest pair separation (default 5p)")
    sub.add_argument("--no-compute", action="store_true",
                     help="fail instead of filling a cold cache")
    sub.set_defaults(func=cmd_corr)

    sub = subs.add_parser("ham", help="parent Hamiltonian diagnostics")
    _add_common(sub)
    sub.add_argument("--N", type=int, required=True)
    sub.add_argument("--momentum", type=int, default=None,
                     help="momentum sector (default: ground sector)")
    sub.add_argument("--variant", choices=("parity", "full"),
                     default="parity")
    sub.add_argument("--spectrum", type=int, default=None, metavar="K",
                     help="report the lowest K eigenvalues")
    sub.add_argument("--check-ground-state", action="store_true")
    sub.add_argument("--monomer-dimer", action="store_true")
    sub.add_argument("--perturbation-order", type=int, default=None,
                     metavar="n")
    sub.set_defaults(func=cmd_ham)

    sub = subs.add_parser("mcmc", help="Metropolis sampling of |Psi|^2")
    _add_common(sub)
    sub.add_argument("--N", type=int, required=True)
    sub.add_argument("--sweeps", type=int, default=20000)
    sub.add_argument("--burn-in", type=int, default=1000, dest="burn_in")
    sub.add_argument("--thinning", type=int, default=5)
    sub.add_argument("--chains", type=int, default=2)
    sub.add_argument("--observables", default="density,excess",
                     help="comma list from density,excess,phase")
    sub.add_argument("--Nmax", type=int, default=6,
                     help="rod-size cutoff for the phase prediction")
    sub.set_defaults(func=cmd_mcmc)

    sub = subs.add_parser("verify-all", help="cross-module consistency suite")
    _add_common(sub)
    sub.add_argument("--Nmax", type=int, default=6)
    sub.set_defaults(func=cmd_verify)

    return parser


def _validate_common(args) -> None:
    if args.p < 1:
        raise ConfigError(f"p must be a positive integer, got {args.p}")
    if not (args.gamma > 0 and math.isfinite(args.gamma)):
        raise ConfigError(f"gamma must be finite and > 0, got {args.gamma}")
    for attr in ("N", "Nmax"):
        val = getattr(args, attr, None)
        if val is not None and val < 1:
            raise ConfigError(f"{attr} must be >= 1, got {val}")
    if args.threads is not None and args.threads < 1:
        raise ConfigError(f"--threads must be positive, got {args.threads}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _validate_common(args)
        if args.threads is not None:
            for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                        "MKL_NUM_THREADS"):
                os.environ[var] = str(args.threads)
        return args.func(args)
    except renewal.UnconvergedError as exc:
        print(f"error: {exc} (pass --override-unconverged to proceed)",
              file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except CapExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
