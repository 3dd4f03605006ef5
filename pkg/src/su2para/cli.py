"""Command-line experiment runner.

Every subcommand produces a list of flat records, written as CSV (default)
or JSON.  The run parameters are echoed into a header; the exit status is
nonzero when any record with a pass bound fails.
"""
from __future__ import annotations

import csv
import datetime as _dt
import io
import json
import os
import sys
import tempfile
from dataclasses import asdict, dataclass, field, fields, replace
from fractions import Fraction

import click
import numpy as np

from . import fourier, group, irreps, littlewood_paley as lp, paradiff, spectral, symbols


@dataclass
class RunConfig:
    bandlimit: Fraction = Fraction(8)
    delta: float = 1.0 / 16
    gap: float = 8.0
    sobolev_s: tuple = (-2.0, 0.0, 2.0)
    seed: int = 0
    output_format: str | None = None
    output_path: str | None = None

    @property
    def two_b(self) -> int:
        return group.two(self.bandlimit)

    def header(self) -> dict:
        d = asdict(self)
        d["bandlimit"] = str(self.bandlimit)
        d["sobolev_s"] = list(self.sobolev_s)
        return d


_KEYS = {"bandlimit": "bandlimit", "delta": "delta", "gap": "gap", "s": "sobolev_s",
         "sobolev_s": "sobolev_s", "seed": "seed", "format": "output_format",
         "output_format": "output_format", "out": "output_path", "output_path": "output_path"}


def _coerce(key: str, text: str):
    text = text.strip()
    if key == "bandlimit":
        val = Fraction(text)
        if val <= 0 or (2 * val).denominator != 1:
            raise ValueError(f"bandlimit must be a positive half-integer, got {text!r}")
        return val
    if key in ("delta", "gap"):
        return float(text)
    if key == "sobolev_s":
        return tuple(float(v) for v in text.replace(",", " ").split())
    if key == "seed":
        return int(text)
    if key == "output_format":
        if text not in ("csv", "json"):
            raise ValueError(f"format must be csv or json, got {text!r}")
        return text
    return text


def parse_config(text: str) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {n}: expected key = value")
        k, v = (p.strip() for p in line.split("=", 1))
        if k not in _KEYS:
            raise ValueError(f"line {n}: unknown key {k!r}")
        out[_KEYS[k]] = _coerce(_KEYS[k], v)
    return out


def build_config(config_path, **flags) -> RunConfig:
    cfg = RunConfig()
    values = {}
    if config_path:
        with open(config_path) as fh:
            values.update(parse_config(fh.read()))
    for k, v in flags.items():
        if v is None or v == ():
            continue
        values[_KEYS[k]] = _coerce(_KEYS[k], " ".join(map(str, v)) if isinstance(v, tuple) else str(v))
    return replace(cfg, **values)


# ---------------------------------------------------------------- output

def render(records: list[dict], header: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps({"header": header, "records": records}, indent=1, default=str) + "\n"
    buf = io.StringIO()
    for k, v in header.items():
        buf.write(f"# {k}: {v}\n")
    cols = []
    for r in records:
        cols += [c for c in r if c not in cols]
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    w.writeheader()
    for r in records:
        w.writerow({k: _fmt(v) for k, v in r.items()})
    return buf.getvalue()


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def write_atomic(path: str, text: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def failures(records: list[dict]) -> list[dict]:
    return [r for r in records if r.get("pass") is False]


def emit(ctx: click.Context, name: str, cfg: RunConfig, records: list[dict], default_format="csv", extra=None):
    header = {"command": name, **cfg.header(), **(extra or {}),
              "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")}
    text = render(records, header, cfg.output_format or default_format)
    if cfg.output_path:
        write_atomic(cfg.output_path, text)
    else:
        click.echo(text, nl=False)
    bad = failures(records)
    for r in bad:
        click.echo("FAIL " + ", ".join(f"{k}={v}" for k, v in r.items()), err=True)
    ctx.exit(1 if bad else 0)


# ---------------------------------------------------------------- options

def common(fn):
    opts = [
        click.option("--bandlimit", type=str, default=None, help="Spin bandlimit B (half-integer)."),
        click.option("--delta", type=float, default=None, help="Admissible cutoff parameter."),
        click.option("--gap", type=float, default=None, help="Para-product frequency gap."),
        click.option("--s", "s", type=float, multiple=True, help="Sobolev index (repeatable)."),
        click.option("--seed", type=int, default=None),
        click.option("--format", "format", type=click.Choice(["csv", "json"]), default=None),
        click.option("--out", type=click.Path(dir_okay=False), default=None, help="Output file."),
        click.option("--config", "config", type=click.Path(exists=True, dir_okay=False), default=None,
                     help="Flat key = value file; flags take precedence."),
    ]
    for o in reversed(opts):
        fn = o(fn)
    return fn


def _config(kw) -> RunConfig:
    path = kw.pop("config", None)
    flags = {k: kw.pop(k) for k in ("bandlimit", "delta", "gap", "s", "seed", "format", "out")}
    try:
        return build_config(path, **flags)
    except (ValueError, TypeError) as exc:
        raise click.UsageError(f"malformed configuration: {exc}")


def _rec(check, value, bound=None, **extra) -> dict:
    r = {"check": check, **extra, "value": float(value), "bound": bound}
    r["pass"] = None if bound is None else bool(value <= bound)
    return r


def _paradiff_settings(cfg: RunConfig) -> paradiff.ParadiffSettings:
    tb = cfg.two_b
    if tb < 2 or tb % 2:
        raise click.UsageError("para-differential probes need an integer bandlimit >= 1")
    return paradiff.ParadiffSettings(delta=cfg.delta, gap=cfg.gap, bands=(tb // 2, tb),
                                     s_values=tuple(cfg.sobolev_s), seed=cfg.seed)


def _probe_records(rows) -> list[dict]:
    return [r.record() for r in rows]


def _decay_records(reports) -> list[dict]:
    out = []
    for rep in reports:
        for row in rep.rows():
            out.append({"probe": rep.label, **row, "claimed": rep.claimed, "pass": rep.passed})
    return out


# ---------------------------------------------------------------- commands

@click.group()
def main():
    """Fourier analysis and para-differential probes on SU(2)."""


@main.command()
@common
@click.pass_context
def selftest(ctx, **kw):
    """Schur, Plancherel, homomorphism, Casimir and Leibniz checks."""
    cfg = _config(kw)
    tb = cfg.two_b
    rng = np.random.default_rng(cfg.seed)
    try:
        grid = group.haar_grid(cfg.bandlimit, self_test=True)
    except group.QuadratureError as exc:
        raise click.ClickException(str(exc))
    recs = [_rec("schur", grid.schur_residual(), 1e-10)]
    pgrid = group.grid_for_total(2 * tb)
    worst_round, worst_plan = 0.0, 0.0
    for _ in range(10):
        f = fourier.random_spectral(tb, rng)
        vals = fourier.inverse_values(pgrid, f.coeffs, tb)
        back = fourier.forward_values(pgrid, vals, tb)
        worst_round = max(worst_round, float(np.abs(back - f.coeffs).max()))
        l2 = np.sqrt(pgrid.integrate(np.abs(vals) ** 2))
        worst_plan = max(worst_plan, abs(l2 - fourier.plancherel_norm(f)) / fourier.plancherel_norm(f))
    recs.append(_rec("fourier_round_trip", worst_round, 1e-10))
    recs.append(_rec("plancherel", worst_plan, 1e-10))
    u = group.random_matrices(20, rng)
    v = group.random_matrices(20, rng)
    hom = max(float(np.abs(irreps.wigner_matrices(t, u @ v)
                           - irreps.wigner_matrices(t, u) @ irreps.wigner_matrices(t, v)).max())
              for t in range(tb + 1))
    recs.append(_rec("homomorphism", hom, 1e-12))
    cas = max(float(np.abs(irreps.casimir(t) + irreps.laplace_eigenvalue2(t) * np.eye(t + 1)).max())
              for t in range(tb + 1))
    recs.append(_rec("casimir", cas, 1e-12))
    x = group.random_matrices(200, rng)
    y = group.random_matrices(200, rng)
    recs.append(_rec("leibniz", symbols.leibniz_check(symbols.FundamentalTuple(), x, y), 1e-13))
    emit(ctx, "selftest", cfg, recs)


@main.command("fourier")
@common
@click.pass_context
def fourier_cmd(ctx, **kw):
    """Transform round trip, Plancherel and serialization fidelity on random functions."""
    cfg = _config(kw)
    tb = cfg.two_b
    rng = np.random.default_rng(cfg.seed)
    grid = group.grid_for_total(2 * tb)
    recs = []
    for k in range(5):
        f = fourier.random_spectral(tb, rng)
        g = fourier.inverse(f, grid)
        back = fourier.forward(g, cfg.bandlimit)
        l2 = g.l2_norm()
        js = fourier.SpectralFunction.from_json(f.to_json())
        recs.append(_rec("round_trip", np.abs(back.coeffs - f.coeffs).max(), 1e-10, sample=k))
        recs.append(_rec("plancherel", abs(l2 - fourier.plancherel_norm(f)) / l2, 1e-10, sample=k))
        recs.append(_rec("json", np.abs(js.coeffs - f.coeffs).max() / np.abs(f.coeffs).max(), 1e-15,
                         sample=k))
    emit(ctx, "fourier", cfg, recs)


@main.command("lp")
@common
@click.pass_context
def lp_cmd(ctx, **kw):
    """Per-t Littlewood-Paley block norms (t, L2, Linf, Hs)."""
    cfg = _config(kw)
    f = fourier.random_spectral(cfg.two_b, np.random.default_rng(cfg.seed), real=True)
    recs = []
    for s in cfg.sobolev_s:
        for row in lp.lp_table(f, s):
            recs.append({"s": s, **row})
    res = lp.dyadic_reconstruction_residual(f)
    recs.append({"s": None, "t": None, "L2": None, "Linf": None, "Hs": None,
                 "check": "dyadic_reconstruction", "value": res, "pass": bool(res <= 1e-12)})
    emit(ctx, "lp", cfg, recs)


@main.command()
@click.option("--j1", type=str, required=True)
@click.option("--j2", type=str, required=True)
@common
@click.pass_context
def localize(ctx, j1, j2, **kw):
    """Spectral support of a product of two single-spin functions."""
    cfg = _config(kw)
    rng = np.random.default_rng(cfg.seed)
    try:
        a, b = Fraction(j1), Fraction(j2)
    except ValueError as exc:
        raise click.UsageError(str(exc))
    f = spectral.random_single_spin(group.two(a), rng)
    g = spectral.random_single_spin(group.two(b), rng)
    rep = spectral.verify_spec_prd(f, g)
    rec = {"j1": str(a), "j2": str(b), "inside_mass": rep.inside_mass, "outside_mass": rep.outside_mass,
           "support": [str(s) for s in rep.support], "pass": bool(rep.outside_mass <= 1e-10)}
    if (cfg.output_format or "json") == "csv":
        rec["support"] = " ".join(rec["support"])
    emit(ctx, "localize", cfg, [rec], default_format="json", extra={"j1": str(a), "j2": str(b)})


@main.command()
@click.option("--tmax", type=float, default=20.0)
@click.option("--step", type=float, default=0.5)
@common
@click.pass_context
def weyl(ctx, tmax, step, **kw):
    """Weyl count (t, count, count/t^3)."""
    cfg = _config(kw)
    recs = []
    for t in np.round(np.arange(1.0, tmax + step / 2, step), 10):
        count, ratio = spectral.weyl_count(float(t))
        recs.append({"t": float(t), "count": int(count), "count_over_t3": ratio})
    window = [r["count_over_t3"] for r in recs if 5.0 <= r["t"] <= 20.0]
    if window:
        spread = max(window) / min(window)
        recs.append({"t": None, "count": None, "count_over_t3": None, "check": "bracket_ratio_5_20",
                     "value": spread, "pass": bool(spread <= 3.0)})
    emit(ctx, "weyl", cfg, recs, extra={"tmax": tmax, "step": step})


@main.command()
@common
@click.pass_context
def taylor(ctx, **kw):
    """Biorthogonality residuals and remainder-order slopes for N = 1, 2, 3."""
    cfg = _config(kw)
    recs = []
    for N in (1, 2, 3):
        T = symbols.taylor_operators(None, N)
        _, _, slope = symbols.taylor_remainder_sweep(T, seed=cfg.seed)
        bio = T.biorthogonality_residual()
        recs.append({"N": N, "n_operators": len(T.indices), "biorthogonality": bio, "slope": slope,
                     "pass": bool(bio <= 1e-10 and abs(slope - N) <= 0.2)})
    emit(ctx, "taylor", cfg, recs)


@main.command("symbols")
@click.option("--which", type=click.Choice(["all", "multiplier", "dkappa", "quasi", "regularization"]),
              default="all")
@common
@click.pass_context
def symbols_cmd(ctx, which, **kw):
    """Decay-fit order probes, spectral-condition checks and a - a^chi fits (rows j, norm, fitted_slope)."""
    cfg = _config(kw)
    reps = []
    if which in ("all", "multiplier"):
        reps += [symbols.multiplier_decay(m, o) for m in (-1.0, 0.5, 1.0, 2.0) for o in range(3)]
    if which in ("all", "dkappa"):
        reps += [symbols.dkappa_probe(m) for m in (1.0, 2.0, -1.0)]
    if which in ("all", "quasi"):
        reps += [symbols.quasi_homogeneous_probe(m, o) for m in (0.0, 1.0, -1.0) for o in range(3)]
        reps.append(symbols.commutator_order_probe())
    if which in ("all", "regularization"):
        reps += paradiff.regularization_probe(_paradiff_settings(cfg))
    recs = _decay_records(reps)
    if which in ("all", "regularization"):
        for row in paradiff.spectral_condition_probe(_paradiff_settings(cfg)):
            recs.append(row)
    emit(ctx, "symbols", cfg, recs, extra={"which": which})


@main.command()
@common
@click.pass_context
def paraproduct(ctx, **kw):
    """Para-product boundedness, remainder smoothing and decomposition residual."""
    cfg = _config(kw)
    pcfg = _paradiff_settings(cfg)
    rows = paradiff.paraproduct_probe(pcfg) + paradiff.remainder_probe(pcfg)
    recs = _probe_records(rows)
    rng = np.random.default_rng(cfg.seed)
    a = fourier.random_spectral(cfg.two_b // 2, rng, real=True)
    u = fourier.random_spectral(cfg.two_b // 2, rng, real=True)
    dec = paradiff.para_decompose(a, u, cfg.gap)
    recs.append({"probe": "decomposition_residual", "band": cfg.two_b // 2, "measured_norm": dec.residual,
                 "pass_bound": 1e-9, "pass": bool(dec.residual <= 1e-9)})
    emit(ctx, "paraproduct", cfg, recs)


@main.command()
@click.option("--degree", type=int, multiple=True, help="Polynomial degrees of F(z) = z^k (default 2, 3).")
@common
@click.pass_context
def bony(ctx, degree, **kw):
    """F(u) = F(u_1) + Op(l_u) u on the grid."""
    cfg = _config(kw)
    rng = np.random.default_rng(cfg.seed)
    u = fourier.random_spectral(cfg.two_b, rng, real=True, decay=2.0)
    recs = []
    for k in degree or (2, 3):
        F = np.zeros(k + 1)
        F[k] = 1.0
        res = paradiff.bony_linearize(F, u, r=None)
        recs.append({"F": f"z^{k}", "band": cfg.two_b, "residual": res.residual, "pass_bound": 1e-8,
                     "pass": bool(res.residual <= 1e-8)})
    emit(ctx, "bony", cfg, recs)


@main.command()
@common
@click.pass_context
def compose(ctx, **kw):
    """T_a T_b - T_{a#b} remainder norms across band doubling."""
    cfg = _config(kw)
    emit(ctx, "compose", cfg, _probe_records(paradiff.composition_probe(_paradiff_settings(cfg))))


@main.command()
@common
@click.pass_context
def adjoint(ctx, **kw):
    """T_a^* - T_{a^bullet} remainder norms across band doubling."""
    cfg = _config(kw)
    emit(ctx, "adjoint", cfg, _probe_records(paradiff.adjoint_probe(_paradiff_settings(cfg))))


@main.command()
@common
@click.pass_context
def commutator(ctx, **kw):
    """[T_a, T_b] norms across band doubling."""
    cfg = _config(kw)
    emit(ctx, "commutator", cfg, _probe_records(paradiff.commutator_probe(_paradiff_settings(cfg))))


@main.command()
@common
@click.pass_context
def opnorm(ctx, **kw):
    """Operator-norm sanity checks and the Stein probes."""
    cfg = _config(kw)
    pcfg = _paradiff_settings(cfg)
    rows = paradiff.opnorm_checks(pcfg) + paradiff.stein_probe(pcfg)
    emit(ctx, "opnorm", cfg, _probe_records(rows))


@main.command("cutoff-sweep")
@click.option("--deltas", type=str, default="0.03125,0.0625,0.125,0.25,0.45",
              help="Comma-separated delta values for the composition sweep.")
@click.option("--skip-sweep", is_flag=True, help="Only run the cutoff-freedom and a - a^chi probes.")
@common
@click.pass_context
def cutoff_sweep(ctx, deltas, skip_sweep, **kw):
    """Cutoff freedom, Op(a - a^chi) and the delta sweep of the composition probe."""
    cfg = _config(kw)
    pcfg = _paradiff_settings(cfg)
    rows = paradiff.cutoff_freedom_probe(pcfg) + paradiff.regularization_op_probe(pcfg)
    if not skip_sweep:
        ds = tuple(float(d) for d in deltas.split(","))
        rows += paradiff.delta_sweep(pcfg, ds)
    emit(ctx, "cutoff-sweep", cfg, _probe_records(rows), extra={"deltas": deltas, "skip_sweep": skip_sweep})


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
