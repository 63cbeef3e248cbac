"""Command-line entry point: ``spreadpide {price,converge,calibrate,simulate,selftest}``."""
from __future__ import annotations

import argparse
import csv
import logging
import sys
import time
from dataclasses import replace
from fractions import Fraction

import numpy as np

from . import calibration, models, oracle, pricer
from .config import RunConfig, load_config


def _levels(text: str) -> list[int]:
    if ".." in text:
        a, b = text.split("..")
        return list(range(int(a), int(b) + 1))
    return [int(x) for x in text.replace(",", " ").split()]


def _header(cfg: RunConfig, extra: str = "") -> str:
    return (extra + "\n" if extra else "") + cfg.to_ini()


def _write_comment(fh, text: str):
    for line in text.splitlines():
        fh.write(f"# {line}\n")


def _numbers(text: str) -> list[float]:
    return [float(Fraction(x)) for x in text.replace(",", " ").split()]


def _write_surface(path, surf, cfg: RunConfig, kind: str, omega: float) -> None:
    g = surf.grid_ext
    x = g.axis[g.interior_slice()]
    x = x[np.abs(x) <= omega + 1e-12]
    X1, X2 = np.meshgrid(x, x)
    with open(path, "w", newline="") as fh:
        _write_comment(fh, _header(cfg, f"model = {kind}\nK = {surf.contract.K!r}"))
        w = csv.writer(fh)
        w.writerow(["x1", "x2", "tau", "price"])
        for k, t in enumerate(surf.taus):
            vals = surf.values_at(k, X1, X2)
            for x1, x2, v in zip(X1.ravel(), X2.ravel(), vals.ravel()):
                w.writerow([f"{x1:.10g}", f"{x2:.10g}", f"{t:.10g}", f"{v:.12g}"])


def cmd_price(a, cfg: RunConfig) -> int:
    model = cfg.model(a.model)
    scheme = cfg.scheme if a.levels is None else replace(cfg.scheme, N=_levels(a.levels)[-1])
    if a.steps is not None:
        scheme = replace(scheme, M=a.steps)
    strikes = _numbers(a.strikes)
    maturities = _numbers(a.maturities)
    rows = []
    for K in strikes:
        for T in maturities:
            c = replace(cfg.contract, K=K, T=T)
            t0 = time.perf_counter()
            surf = pricer.solve(model, c, replace(scheme, store="final"))
            sec = time.perf_counter() - t0
            p = float(pricer.price_at(surf, float(surf.taus[-1]), *c.s0))
            rows.append((K, T, p, surf.mean_iterations, sec))
    print(f"model={a.model} N={scheme.N} M={scheme.steps} s0={cfg.contract.s0}")
    print("K,T,price,iterations_per_step,seconds")
    for K, T, p, it, sec in rows:
        print(f"{K:g},{T:.6g},{p:.8f},{it:.2f},{sec:.2f}")
    if a.out:
        with open(a.out, "w", newline="") as fh:
            _write_comment(fh, _header(cfg, f"model = {a.model}\nN = {scheme.N}\nM = {scheme.steps}"))
            w = csv.writer(fh)
            w.writerow(["K", "T", "price", "iterations_per_step"])
            for K, T, p, it, _ in rows:
                w.writerow([f"{K:.10g}", f"{T:.10g}", f"{p:.12g}", f"{it:.4f}"])
    if a.surface:
        surf = pricer.solve(model, cfg.contract, scheme)
        _write_surface(a.surface, surf, cfg, a.model, scheme.omega)
    return 0


def cmd_converge(a, cfg: RunConfig) -> int:
    model = cfg.model(a.model)
    levels = _levels(a.levels or "4..8")
    table = pricer.convergence_study(model, cfg.contract, levels, a.ref, cfg.scheme,
                                     progress=lambda s: print(s, file=sys.stderr))
    print("N,rel_L2_error,mean_iterations,seconds")
    for r in table.rows:
        print(f"{r.N},{r.rel_L2_error:.6e},{r.mean_iterations:.3f},{r.seconds:.3f}")
    print(f"# fitted rate {table.rate:.4f}")
    if a.out:
        table.to_csv(a.out, _header(cfg, f"model = {a.model}\nreference level = {a.ref}\n"
                                         f"fitted rate = {table.rate:.6f}"))
    return 0


def cmd_calibrate(a, cfg: RunConfig) -> int:
    series = calibration.load_fixture() if a.data is None else calibration.PriceSeries.from_csv(a.data)
    mom = calibration.sample_moments(series)
    print(f"observations={mom.n} dropped={len(series.dropped)}")
    print(f"mean={mom.mean} std={mom.std} skew={mom.skew} kurt={mom.kurt} corr={mom.corr:.6f}")
    if a.model == "merton":
        res = calibration.calibrate_jd(mom, cfg.merton, seed=a.seed)
        section = "merton"
    else:
        res = calibration.calibrate_tc(mom, cfg.gamma_tc, seed=a.seed)
        section = "gamma-tc"
    print(f"residual sum of squares={res.cost:.6e} starts={res.starts}")
    print(f"martingale residual={models.martingale_residual(res.params)}")
    text = f"[{section}]\n" + "\n".join(f"{k} = {v}" for k, v in models.params_to_mapping(res.params).items())
    print(text)
    if a.out:
        with open(a.out, "w") as fh:
            fh.write(text + "\n")
    return 0


def cmd_simulate(a, cfg: RunConfig) -> int:
    model = cfg.model(a.model)
    n = a.paths or cfg.mc.paths
    seed = cfg.mc.seed if a.seed is None else a.seed
    price, se = oracle.mc_price(model, cfg.contract, n, seed)
    print(f"model={a.model} paths={n} price={price:.8f} stderr={se:.3e}")
    if a.out:
        steps = a.steps or cfg.mc.steps
        npaths = min(n, a.save_paths)
        Y = oracle.simulate(model, cfg.contract.T, steps, npaths, seed, paths=True)
        S = np.asarray(cfg.contract.s0) * np.exp(Y)
        t = np.linspace(0, cfg.contract.T, steps + 1)
        with open(a.out, "w", newline="") as fh:
            _write_comment(fh, _header(cfg, f"model = {a.model}\npaths = {npaths}\nseed = {seed}"))
            w = csv.writer(fh)
            w.writerow(["path", "t", "S1", "S2"])
            for i in range(npaths):
                for k in range(steps + 1):
                    w.writerow([i, f"{t[k]:.8g}", f"{S[i, k, 0]:.10g}", f"{S[i, k, 1]:.10g}"])
    return 0


def cmd_selftest(a, cfg: RunConfig) -> int:
    ok = True
    for kind in ("merton", "gamma-tc"):
        res = models.martingale_residual(cfg.model(kind))
        good = bool(np.all(np.abs(res) <= 1e-10))
        ok &= good
        print(f"{kind}: martingale residual {res[0]:+.3e} {res[1]:+.3e} {'ok' if good else 'FAIL'}")
    rep = models.coercivity_report(cfg.merton)
    ok &= rep.holds
    print(f"merton coercivity: C1={rep.C1:.6g} C2={rep.C2:.6g} C3={rep.C3:.6g} "
          f"eig=[{rep.m_eig:.6g}, {rep.M_eig:.6g}] {'ok' if rep.holds else 'FAIL'}")
    adm = models.weight_admissible((0.5, -3.0), 2)
    ok &= adm
    print(f"weight (0.5, -3) admissible in L2: {adm}")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="spreadpide", description="PIDE pricer for spread options")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, model=True):
        p.add_argument("--config", help="INI configuration file")
        p.add_argument("--out", help="output file")
        p.add_argument("--seed", type=int, default=None)
        if model:
            p.add_argument("--model", choices=("merton", "gamma-tc"), default="merton")

    p = sub.add_parser("price", help="strike x maturity price table at s0")
    common(p)
    p.add_argument("--levels", help="refinement level (last value of a range is used)")
    p.add_argument("--steps", type=int, help="time steps (default 2^N)")
    p.add_argument("--strikes", default="0.8,0.9,1,1.1,1.2", help="comma-separated strikes")
    p.add_argument("--maturities", default="1/12,1/4,1/2,1",
                   help="comma-separated maturities in years; fractions allowed")
    p.add_argument("--surface", help="also write the price surface of the configured contract")
    p.set_defaults(func=cmd_price)

    p = sub.add_parser("converge", help="error table against a fine reference solution")
    common(p)
    p.add_argument("--levels", default="4..8")
    p.add_argument("--ref", type=int, default=9)
    p.set_defaults(func=cmd_converge)

    p = sub.add_parser("calibrate", help="moment-matching calibration on a price series")
    common(p)
    p.add_argument("--data", help="CSV with columns date, asset1, asset2 (default: bundled series)")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("simulate", help="Monte Carlo price and optional sample paths")
    common(p)
    p.add_argument("--paths", type=int)
    p.add_argument("--steps", type=int, help="time steps for saved paths")
    p.add_argument("--save-paths", type=int, default=100, help="number of paths written to --out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("selftest", help="martingale, coercivity and weight checks")
    common(p, model=False)
    p.set_defaults(func=cmd_selftest)
    return ap


def run(argv=None) -> int:
    ap = build_parser()
    a = ap.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if a.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(a.config)
        if a.command == "calibrate" and a.seed is None:
            a.seed = 0
        return a.func(a, cfg)
    except (ValueError, KeyError, FileNotFoundError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
