"""Command-line front end.

One binary, one subcommand per experiment.  Configuration is a flat typed
key=value store: defaults, overridden by a config file (one key=value per
line, '#' comments), overridden by key=value tokens on the command line.
Unknown keys are rejected; all validation problems are reported at once.

Exit codes: 0 ok, 2 configuration error, 3 runtime error, 4 an
acceptance threshold was missed (for CI gating).  The LOOPSOUP_OUTDIR
environment variable sets the default output directory.
"""

from __future__ import annotations

import json
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import formulas as fx
from . import io as lio
from .campaigns import (CampaignSpec, CampaignError, KnScene,
                        count_kn_squares, estimate_b_tilde, estimate_p0,
                        estimate_Zr_moment, fkg_check, probe_mid_squares,
                        sample_kn_scene)
from .clusters import build_clusters
from .extremal import (annulus_domain, extremal_distance, rectangle_domain,
                       wedge_domain)
from .fitting import FitError
from .paths import Annulus, SoupConfig, sample_loop_soup, stream_rng

__all__ = ["main", "parse_config", "run", "RunConfig", "ConfigError"]

OUTDIR_ENV = "LOOPSOUP_OUTDIR"

SUBCOMMANDS = ["formulas", "sample", "clusters", "disconnect", "ztilt",
               "btilde", "dims", "extremal-tests", "fkg"]


class ConfigError(ValueError):
    pass


def _floats(s):
    return [float(v) for v in str(s).split(",") if v != ""]


def _ints(s):
    return [int(v) for v in str(s).split(",") if v != ""]


def _bool(s):
    if isinstance(s, bool):
        return s
    v = str(s).lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s}")


_COMMON = {
    "seed": (int, 0),
    "workers": (int, 1),
    "outdir": (str, None),  # default resolved from env at parse time
    "tag": (str, ""),
}

# per-subcommand key schemas: name -> (parser, default)
_SCHEMAS = {
    "formulas": {
        "c_min": (float, 0.0), "c_max": (float, 1.0), "c_step": (float, 0.1),
    },
    "sample": {
        "c": (float, 0.5), "x0": (float, -1.0), "y0": (float, -1.0),
        "x1": (float, 1.0), "y1": (float, 1.0),
        "t_min": (float, 1e-3), "t_max": (float, 10.0), "dt": (float, 1e-4),
    },
    "clusters": {
        "c": (float, 0.5), "x0": (float, -1.0), "y0": (float, -1.0),
        "x1": (float, 1.0), "y1": (float, 1.0),
        "t_min": (float, 1e-3), "t_max": (float, 10.0), "dt": (float, 1e-4),
        "cell": (float, 0.02),
    },
    "disconnect": {
        "c": (float, 0.0), "k": (int, 2), "radii": (_floats, [1.0, 2.0, 3.0]),
        "trials": (int, 1000), "grid_n": (int, 256), "margin": (float, 0.2),
        "step_factor": (float, 0.5), "tmin_factor": (float, 1.0),
        "tmax_base": (float, 4.0), "drop_smallest": (_bool, False),
        "use_excursions": (_bool, False), "z_max": (float, math.inf),
    },
    "ztilt": {
        "c": (float, 0.0), "k": (int, 2), "radii": (_floats, [1.0, 1.5, 2.0]),
        "trials": (int, 400), "lam": (float, 0.5), "m": (int, 512),
        "grid_n": (int, 256), "margin": (float, 0.2),
        "step_factor": (float, 0.5), "tmin_factor": (float, 1.0),
        "tmax_base": (float, 4.0), "drop_smallest": (_bool, False),
    },
    "btilde": {
        "c": (float, 0.0), "radii": (_floats, [1.0, 1.5, 2.0]),
        "trials": (int, 200), "lam": (float, 0.5), "grid_n": (int, 256),
        "margin": (float, 0.2), "step_factor": (float, 0.5),
        "tmin_factor": (float, 1.0), "tmax_base": (float, 4.0),
        "drop_smallest": (_bool, False), "levels": (int, 1),
    },
    "dims": {
        "j": (int, 4), "n_list": (_ints, [8, 9, 10, 11]), "k": (int, 1),
        "scenes": (int, 10), "c": (float, 0.0), "duration": (float, 0.25),
        "dt": (float, 1e-7),
    },
    "extremal-tests": {
        "n": (int, 256), "levels": (int, 2), "tol_rect": (float, 0.01),
        "tol_curved": (float, 0.02),
    },
    "fkg": {
        "c": (float, 0.4), "trials": (int, 1000),
        "half_width": (float, 2.0), "t_min": (float, 1e-2),
        "t_max": (float, 10.0), "dt": (float, 1.25e-3),
        "s1": (float, 0.0), "r1": (float, 0.4),
        "s2": (float, 0.5), "r2": (float, 0.9),
    },
}


@dataclass
class RunConfig:
    subcommand: str
    params: dict = field(default_factory=dict)

    def as_dict(self):
        return {"subcommand": self.subcommand, **self.params}


def _parse_pairs(lines, source):
    pairs = []
    for ln, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{ln}: expected key=value, "
                              f"got {line!r}")
        key, _, value = line.partition("=")
        pairs.append((key.strip(), value.strip(), f"{source}:{ln}"))
    return pairs


def parse_config(subcommand, config_file=None, flags=()):
    """Fully validated RunConfig.  Precedence: flags > file > defaults."""
    if subcommand not in SUBCOMMANDS:
        raise ConfigError(f"unknown subcommand {subcommand!r}; "
                          f"choose from {', '.join(SUBCOMMANDS)}")
    schema = dict(_COMMON)
    schema.update(_SCHEMAS[subcommand])
    params = {k: d for k, (_, d) in schema.items()}
    if params.get("outdir") is None:
        params["outdir"] = os.environ.get(OUTDIR_ENV, ".")

    pairs = []
    if config_file is not None:
        try:
            with open(config_file) as f:
                pairs.extend(_parse_pairs(f.readlines(), config_file))
        except OSError as e:
            raise ConfigError(f"cannot read config file: {e}")
    pairs.extend(_parse_pairs(list(flags), "<flag>"))

    errors = []
    for key, value, where in pairs:
        if key not in schema:
            errors.append(f"{where}: unknown key {key!r} for "
                          f"subcommand {subcommand!r}")
            continue
        parser = schema[key][0]
        try:
            params[key] = parser(value)
        except (ValueError, TypeError) as e:
            errors.append(f"{where}: bad value for {key}: {e}")
    errors.extend(_validate(subcommand, params))
    if errors:
        raise ConfigError("; ".join(errors))
    return RunConfig(subcommand=subcommand, params=params)


def _validate(subcommand, p):
    errs = []

    def pos(key):
        if key in p and not p[key] > 0:
            errs.append(f"{key} must be positive, got {p[key]}")

    for key in ("t_min", "t_max", "dt", "cell", "c_step", "trials",
                "grid_n", "margin", "step_factor", "m", "duration",
                "scenes", "half_width", "levels"):
        pos(key)
    if "c" in p and not (0.0 <= p["c"] <= 1.0):
        errs.append(f"c must be in [0, 1], got {p['c']}")
    if "k" in p and p["k"] < 1:
        errs.append(f"k must be >= 1, got {p['k']}")
    if "lam" in p and not p["lam"] > 0:
        errs.append(f"lam must be > 0, got {p['lam']}")
    if "radii" in p:
        rs = p["radii"]
        if not rs or any(r < 1.0 for r in rs) or sorted(rs) != rs:
            errs.append(f"radii must be ascending and >= 1, got {rs}")
    if "t_min" in p and "t_max" in p and p["t_max"] <= p["t_min"]:
        errs.append("t_max must exceed t_min")
    if subcommand == "dims":
        if p["j"] < 4:
            errs.append(f"j must be >= 4, got {p['j']}")
        if any(n < p["j"] + 4 for n in p["n_list"]):
            errs.append(f"every n must be >= j+4, got {p['n_list']}")
    return errs


def _out(p, name):
    os.makedirs(p["outdir"], exist_ok=True)
    tag = ("-" + p["tag"]) if p["tag"] else ""
    return os.path.join(p["outdir"], name + tag)


def _emit_fit(cfg, fit, lam, oracle, base):
    p = cfg.params
    rows = [(p.get("c", 0.0), p.get("k", 2), lam, r, trials, val,
             math.sqrt(max(val * (1 - val), 0.0) / trials) if trials else 0.0)
            for (r, val, trials, _) in fit.per_radius]
    csv_path = base + ".csv"
    lio.write_campaign_csv(csv_path, rows)
    z = ((fit.slope - oracle) / fit.stderr
         if (oracle is not None and fit.stderr > 0) else None)
    lio.write_summary_json(base + ".json", cfg.as_dict(), slope=fit.slope,
                           intercept=fit.intercept, stderr=fit.stderr,
                           oracle=oracle, z_score=z,
                           attrition={str(k): v
                                      for k, v in fit.attrition.items()})
    zs = "n/a" if z is None else f"{z:+.2f}"
    orc = "n/a" if oracle is None else f"{oracle:.4f}"
    print(f"{cfg.subcommand}: slope={fit.slope:.4f} stderr={fit.stderr:.4f} "
          f"oracle={orc} z={zs} -> {csv_path}")
    return z


def _run_formulas(cfg):
    p = cfg.params
    cs = np.arange(p["c_min"], p["c_max"] + p["c_step"] / 2, p["c_step"])
    table = []
    for c in cs:
        c = float(round(c, 12))
        dims = fx.predicted_dimensions(c)
        table.append((c, fx.kappa_of_c(c), fx.xi(c, 2), fx.xi(c, 4),
                      fx.xi(c, 6), dims.d0, dims.d1, dims.d2))
    base = _out(p, "formulas")
    lio.write_formulas_csv(base + ".csv", table)
    lio.write_summary_json(base + ".json", cfg.as_dict(), rows=len(table))
    print(f"formulas: {len(table)} rows -> {base}.csv")
    return 0


def _soup_cfg(p):
    return SoupConfig(c=p["c"], region=(p["x0"], p["y0"], p["x1"], p["y1"]),
                      t_min=p["t_min"], t_max=p["t_max"], dt=p["dt"],
                      seed=p["seed"])


def _run_sample(cfg):
    p = cfg.params
    scfg = _soup_cfg(p)
    loops = sample_loop_soup(scfg, stream_rng(p["seed"], 0))
    base = _out(p, "sample")
    lio.write_loops(base + ".loops", loops, config=cfg.as_dict())
    lio.write_summary_json(base + ".json", cfg.as_dict(), loops=len(loops),
                           expected=scfg.mass)
    print(f"sample: {len(loops)} loops (expected {scfg.mass:.1f}) "
          f"-> {base}.loops")
    return 0


def _run_clusters(cfg):
    p = cfg.params
    loops = sample_loop_soup(_soup_cfg(p), stream_rng(p["seed"], 0))
    cs = build_clusters(loops, cell=p["cell"])
    base = _out(p, "clusters")
    lio.write_cluster_csv(base + ".csv", cs)
    sizes = sorted((len(c.members) for c in cs.clusters), reverse=True)
    lio.write_summary_json(base + ".json", cfg.as_dict(), loops=len(loops),
                           clusters=len(cs.clusters),
                           largest=sizes[0] if sizes else 0)
    print(f"clusters: {len(loops)} loops, {len(cs.clusters)} clusters, "
          f"largest {sizes[0] if sizes else 0} -> {base}.csv")
    return 0


def _campaign_spec(p, lam=0.0, m=0):
    return CampaignSpec(c=p["c"], k=p.get("k", 2), radii=p["radii"],
                        trials_per_radius=p["trials"], lam=lam,
                        inner_samples=m, grid_n=p["grid_n"],
                        margin=p["margin"], step_factor=p["step_factor"],
                        tmin_factor=p["tmin_factor"],
                        tmax_base=p["tmax_base"], seed=p["seed"],
                        drop_smallest=p["drop_smallest"],
                        use_excursions=p.get("use_excursions", False),
                        workers=p["workers"])


def _run_disconnect(cfg):
    p = cfg.params
    fit = estimate_p0(_campaign_spec(p))
    k = p["k"]
    oracle = fx.xi(p["c"], k) if k >= fx.xi_validity_threshold(p["c"]) else None
    z = _emit_fit(cfg, fit, 0.0, oracle, _out(p, "disconnect"))
    if z is not None and abs(z) > p["z_max"]:
        return 4
    return 0


def _run_ztilt(cfg):
    p = cfg.params
    fit = estimate_Zr_moment(_campaign_spec(p, lam=p["lam"], m=p["m"]))
    _emit_fit(cfg, fit, p["lam"], None, _out(p, "ztilt"))
    return 0


def _run_btilde(cfg):
    p = cfg.params
    spec = _campaign_spec(p, lam=p["lam"])
    spec.k = 2
    fit = estimate_b_tilde(spec, lam=p["lam"], levels=p["levels"])
    _emit_fit(cfg, fit, p["lam"], None, _out(p, "btilde"))
    return 0


def _run_dims(cfg):
    p = cfg.params
    counts = np.zeros(len(p["n_list"]), dtype=np.int64)
    probe_hits = np.zeros(len(p["n_list"]), dtype=np.int64)
    probe_tot = np.zeros(len(p["n_list"]), dtype=np.int64)
    for s in range(p["scenes"]):
        rng = stream_rng(p["seed"], s)
        scene = sample_kn_scene(rng, c=p["c"], duration=p["duration"],
                                dt=p["dt"])
        rep = count_kn_squares(p["j"], p["n_list"], p["k"], scene)
        counts += np.array(rep.counts)
        for i, n in enumerate(p["n_list"]):
            h, t = probe_mid_squares(p["j"], n, p["k"], scene)
            probe_hits[i] += h
            probe_tot[i] += t
    ns = np.array(p["n_list"], dtype=float)
    good = counts > 0
    dim = float("nan")
    if good.sum() >= 2:
        dim = float(np.polyfit(ns[good], np.log2(counts[good]), 1)[0])
    base = _out(p, "dims")
    rows = [(p["c"], p["k"], 0.0, float(n), int(t), h / t if t else 0.0, 0.0)
            for n, h, t in zip(p["n_list"], probe_hits, probe_tot)]
    lio.write_campaign_csv(base + ".csv", rows)
    lio.write_summary_json(base + ".json", cfg.as_dict(),
                           counts=[int(v) for v in counts],
                           dimension=dim,
                           probe_hits=[int(v) for v in probe_hits],
                           probe_totals=[int(v) for v in probe_tot])
    print(f"dims: counts={counts.tolist()} dimension={dim:.3f} "
          f"-> {base}.json")
    return 0


def _run_extremal_tests(cfg):
    p = cfg.params
    n, levels = p["n"], p["levels"]
    cases = []
    for L in (1.0, 2.0, 5.0):
        res = extremal_distance(rectangle_domain(L, ny=n), levels=levels)
        cases.append((f"rectangle L={L}", res.value, L, p["tol_rect"]))
    res = extremal_distance(wedge_domain(0.5, 0.0, 2.0, n=n), levels=levels)
    cases.append(("wedge theta=1/2 s=0 r=2", res.value, math.pi * 2.0,
                  p["tol_curved"]))
    res = extremal_distance(annulus_domain(0.0, 2.0, n=n), levels=levels)
    cases.append(("annulus r=2", res.value, 1.0, p["tol_curved"]))
    base = _out(p, "extremal-tests")
    failed = 0
    lines = []
    for name, value, target, tol in cases:
        err = abs(value - target) / target
        ok = err <= tol
        failed += 0 if ok else 1
        lines.append({"case": name, "value": value, "target": target,
                      "rel_error": err, "ok": ok})
    lio.write_summary_json(base + ".json", cfg.as_dict(), cases=lines)
    worst = max(l["rel_error"] for l in lines)
    print(f"extremal-tests: {len(cases) - failed}/{len(cases)} within "
          f"tolerance, worst rel error {worst:.4f} -> {base}.json")
    return 4 if failed else 0


def _run_fkg(cfg):
    p = cfg.params
    w = p["half_width"]
    scfg = SoupConfig(c=p["c"], region=(-w, -w, w, w), t_min=p["t_min"],
                      t_max=p["t_max"], dt=p["dt"], seed=p["seed"])
    ann1 = Annulus(p["s1"], p["r1"])
    ann2 = Annulus(p["s2"], p["r2"])

    def no_crossing(ann):
        lo = math.exp(ann.s)
        hi = math.exp(ann.r)

        def event(loops):
            for lp in loops:
                d = np.hypot(lp.trace[:, 0], lp.trace[:, 1])
                if (d < lo).any() and (d > hi).any():
                    return False
            return True

        return event

    ok = fkg_check(no_crossing(ann1), no_crossing(ann2), scfg, p["trials"])
    base = _out(p, "fkg")
    lio.write_summary_json(base + ".json", cfg.as_dict(), positive=bool(ok))
    print(f"fkg: positive association {'holds' if ok else 'FAILS'} "
          f"-> {base}.json")
    return 0 if ok else 4


_RUNNERS = {
    "formulas": _run_formulas,
    "sample": _run_sample,
    "clusters": _run_clusters,
    "disconnect": _run_disconnect,
    "ztilt": _run_ztilt,
    "btilde": _run_btilde,
    "dims": _run_dims,
    "extremal-tests": _run_extremal_tests,
    "fkg": _run_fkg,
}


def run(cfg: RunConfig):
    return _RUNNERS[cfg.subcommand](cfg)


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv or argv[0] in ("-h", "--help"):
        print("usage: loopsoup SUBCOMMAND [--config FILE] [key=value ...]\n"
              f"subcommands: {', '.join(SUBCOMMANDS)}")
        return 0
    sub = argv.pop(0)
    config_file = None
    flags = []
    i = 0
    while i < len(argv):
        if argv[i] == "--config":
            if i + 1 >= len(argv):
                print("error: --config needs a path", file=sys.stderr)
                return 2
            config_file = argv[i + 1]
            i += 2
        else:
            flags.append(argv[i])
            i += 1
    try:
        cfg = parse_config(sub, config_file, flags)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    try:
        return run(cfg)
    except (CampaignError, FitError, ValueError) as e:
        print(f"runtime error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
