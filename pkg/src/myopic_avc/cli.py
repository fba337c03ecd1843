"""Command-line front end.

Channel files are JSON with probabilities written as decimal strings::

    {
      "name": "xor",
      "alphabets": {"X": ["0", "1"], "S": ["0", "1"], "Y": ["0", "1"], "Z": ["0", "1"]},
      "W":   {"0": {"0": {"0": "1", "1": "0"}, "1": {"0": "0", "1": "1"}},
              "1": {"0": {"0": "0", "1": "1"}, "1": {"0": "1", "1": "0"}}},
      "obs": {"0": {"0": "1", "1": "0"}, "1": {"0": "0", "1": "1"}}
    }

``W[x][s][y]`` is P(y | x, s) and ``obs[s][z]`` is P(z | s); omitted entries
are zero.  Exit codes: 0 success, 1 invalid input, 2 size/guard limit.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation

import numpy as np

from . import __version__, kernels
from .errors import AVCError, CapacityLimitError, InvalidArgumentError, ValidationError
from .prob import Alphabet
from .strategy import SystemSpec

SCHEMA_VERSION = 1
AXES = ("X", "S", "Y", "Z")

CSV_HELP = """\
trial CSV columns:
  trial           trial index (0-based)
  m               transmitted message (1-based)
  event           first error event: E_enc, E_dec1, E_dec2 or none
  error           1 if the decoded message differs from m
  n               block length of the main code
  rate            operating rate in bits per symbol
  adversary_kind  adversary description
  seed            master seed
  K, prefix_len, k, k_hat   (multicode / concat schemes only; k is 1-based)
"""


class UsageError(SystemExit):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems are invalid input (exit 1)
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise UsageError(1)


# ---------------------------------------------------------------------------
# channel spec file
# ---------------------------------------------------------------------------

@dataclass
class ChannelSpecFile:
    alphabets: dict[str, list[str]]
    W: dict  # x -> s -> y -> Decimal
    obs: dict  # s -> z -> Decimal
    name: str = ""
    description: str = ""
    extra: dict = field(default_factory=dict)

    def to_system(self) -> SystemSpec:
        A = {k: Alphabet(tuple(v)) for k, v in self.alphabets.items()}
        W = np.zeros((A["X"].size, A["S"].size, A["Y"].size))
        for x, by_s in self.W.items():
            for s, row in by_s.items():
                for y, p in row.items():
                    W[A["X"].index(x), A["S"].index(s), A["Y"].index(y)] = float(p)
        obs = np.zeros((A["S"].size, A["Z"].size))
        for s, row in self.obs.items():
            for z, p in row.items():
                obs[A["S"].index(s), A["Z"].index(z)] = float(p)
        return SystemSpec(A["X"], A["S"], A["Y"], A["Z"], W, obs, self.name)

    def to_json(self) -> str:
        def dec(d):
            return {k: (dec(v) if isinstance(v, dict) else str(v)) for k, v in d.items()}
        doc = {"name": self.name} if self.name else {}
        if self.description:
            doc["description"] = self.description
        doc["alphabets"] = {k: list(v) for k, v in self.alphabets.items()}
        doc["W"] = dec(self.W)
        doc["obs"] = dec(self.obs)
        doc.update(self.extra)
        return json.dumps(doc, indent=2)

    @classmethod
    def from_system(cls, spec: SystemSpec, digits: int = 17) -> "ChannelSpecFile":
        def d(v):
            return Decimal(repr(float(v))) if digits >= 17 else Decimal(f"{v:.{digits}g}")
        W = {x: {s: {y: d(spec.W[i, j, k]) for k, y in enumerate(spec.y.labels) if spec.W[i, j, k] != 0}
                 for j, s in enumerate(spec.s.labels)} for i, x in enumerate(spec.x.labels)}
        obs = {s: {z: d(spec.obs[j, k]) for k, z in enumerate(spec.z.labels) if spec.obs[j, k] != 0}
               for j, s in enumerate(spec.s.labels)}
        alph = {"X": list(spec.x.labels), "S": list(spec.s.labels), "Y": list(spec.y.labels),
                "Z": list(spec.z.labels)}
        return cls(alph, W, obs, spec.name)


def _decimal(v, where: str) -> Decimal:
    if isinstance(v, bool) or not isinstance(v, (str, int, Decimal)):
        raise ValidationError(f"{where}: probability must be a decimal string or number, got {v!r}")
    try:
        d = Decimal(v) if not isinstance(v, Decimal) else v
    except InvalidOperation:
        raise ValidationError(f"{where}: {v!r} is not a decimal number") from None
    if not d.is_finite() or d < 0:
        raise ValidationError(f"{where}: probability {v!r} must be finite and non-negative")
    return d


def _row(obj, labels, where: str) -> dict:
    if not isinstance(obj, dict):
        raise ValidationError(f"{where}: expected an object mapping symbols to probabilities")
    out = {}
    for k, v in obj.items():
        if k not in labels:
            raise ValidationError(f"{where}: unknown symbol {k!r}")
        out[k] = _decimal(v, f"{where}[{k!r}]")
    return out


def parse_channel_text(text: str) -> ChannelSpecFile:
    try:
        doc = json.loads(text, parse_float=Decimal, parse_int=Decimal)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"malformed channel file: {exc.msg} at line {exc.lineno} column {exc.colno}") from None
    if not isinstance(doc, dict):
        raise ValidationError("channel file must hold a JSON object")
    for key in ("alphabets", "W", "obs"):
        if key not in doc:
            raise ValidationError(f"channel file is missing field {key!r}")
    alph = doc["alphabets"]
    if not isinstance(alph, dict) or any(a not in alph for a in AXES):
        raise ValidationError("field 'alphabets' must name X, S, Y and Z")
    alphabets = {}
    for a in AXES:
        labels = alph[a]
        if not isinstance(labels, list) or not labels:
            raise ValidationError(f"alphabets.{a} must be a nonempty list")
        labels = [str(v) for v in labels]
        if len(set(labels)) != len(labels):
            raise ValidationError(f"alphabets.{a} has repeated symbols")
        alphabets[a] = labels
    W_in = doc["W"]
    if not isinstance(W_in, dict):
        raise ValidationError("field 'W' must map x -> s -> y -> probability")
    W = {}
    for x in alphabets["X"]:
        by_s = W_in.get(x)
        if not isinstance(by_s, dict):
            raise ValidationError(f"W: missing rows for x={x!r}")
        W[x] = {}
        for s in alphabets["S"]:
            if s not in by_s:
                raise ValidationError(f"W row (x={x!r}, s={s!r}) is missing")
            row = _row(by_s[s], alphabets["Y"], f"W row (x={x!r}, s={s!r})")
            total = sum(row.values(), Decimal(0))
            if abs(total - 1) > Decimal("1e-9"):
                raise ValidationError(f"W row (x={x!r}, s={s!r}) sums to {total}, not 1")
            W[x][s] = row
        extra = set(by_s) - set(alphabets["S"])
        if extra:
            raise ValidationError(f"W[{x!r}]: unknown state symbol {sorted(extra)[0]!r}")
    extra = set(W_in) - set(alphabets["X"])
    if extra:
        raise ValidationError(f"W: unknown input symbol {sorted(extra)[0]!r}")
    obs_in = doc["obs"]
    if not isinstance(obs_in, dict):
        raise ValidationError("field 'obs' must map s -> z -> probability")
    obs = {}
    for s in alphabets["S"]:
        if s not in obs_in:
            raise ValidationError(f"obs row s={s!r} is missing")
        row = _row(obs_in[s], alphabets["Z"], f"obs row s={s!r}")
        total = sum(row.values(), Decimal(0))
        if abs(total - 1) > Decimal("1e-9"):
            raise ValidationError(f"obs row s={s!r} sums to {total}, not 1")
        obs[s] = row
    extra = set(obs_in) - set(alphabets["S"])
    if extra:
        raise ValidationError(f"obs: unknown state symbol {sorted(extra)[0]!r}")
    rest = {k: v for k, v in doc.items() if k not in ("alphabets", "W", "obs", "name", "description")}
    return ChannelSpecFile(alphabets, W, obs, str(doc.get("name", "")), str(doc.get("description", "")),
                           _plain(rest))


def _plain(v):
    if isinstance(v, Decimal):
        return str(v)
    if isinstance(v, dict):
        return {k: _plain(x) for k, x in v.items()}
    if isinstance(v, list):
        return [_plain(x) for x in v]
    return v


def load_channel(path: str) -> ChannelSpecFile:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise InvalidArgumentError(f"cannot read channel file {path!r}: {exc.strerror}") from None
    return parse_channel_text(text)


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    return v


def make_report(argv, params: dict, result: dict, t0: float, seed) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "command": ["myopic-avc", *argv],
        "params": _jsonable(params),
        "result": _jsonable(result),
        "wall_time": time.perf_counter() - t0,
        "version": __version__,
        "backend": kernels.backend(),
        "seed": seed,
    }


def _emit(report: dict, path: str | None):
    text = json.dumps(report, indent=2)
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    print(text)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _capacity_result(spec: SystemSpec, mode: str, grid: int, tol: float, seed: int) -> dict:
    from . import solver
    if mode == "myopic":
        return solver.capacity(spec, grid_k=grid, tol=tol, seed=seed).to_dict()
    if mode == "oblivious":
        return {"value": solver.capacity_oblivious(spec, grid_k=grid, tol=tol, seed=seed)}
    if mode == "omniscient":
        return {"value": solver.capacity_omniscient(spec, grid_k=grid, tol=tol, seed=seed)}
    if mode == "oracle":
        return {"value": solver.brute_force_oracle(spec, grid_k=grid)}
    raise InvalidArgumentError(f"unknown mode {mode!r}")


def cmd_capacity(args, argv) -> int:
    t0 = time.perf_counter()
    spec = load_channel(args.channel).to_system()
    res = _capacity_result(spec, args.mode, args.grid, args.tol, args.seed)
    params = {"channel": args.channel, "mode": args.mode, "grid": args.grid, "tol": args.tol}
    _emit(make_report(argv, params, res, t0, args.seed), args.out)
    return 0


def _code_params(args, n=None, rate=None):
    from .coding import CodeParams
    return CodeParams(n=args.n if n is None else n, rate_R=args.rate if rate is None else rate,
                      delta2=args.delta2, gamma=args.gamma, f_eps=args.f_eps, eps_rate=args.eps_rate,
                      seed=args.code_seed, explicit_type=args.explicit_type)


def _simulate(spec, params, args, seed):
    """Returns (MonteCarloResult, records, extra csv columns, extra summary)."""
    from .coding import monte_carlo, parse_adversary
    adversary = parse_adversary(args.adversary)
    if args.trials < 1:
        raise InvalidArgumentError("--trials must be >= 1")
    scheme = getattr(args, "scheme", "random")
    if scheme == "random":
        r = monte_carlo(spec, params, adversary, args.trials, seed, messages=args.messages)
        return r, r.records, (), {}
    from .derandomize import build_concatenated, evaluate_concat, evaluate_multicode, sample_multicode
    mc = sample_multicode(spec, params, seed, K=args.K)
    if scheme == "multicode":
        ev = evaluate_multicode(mc, spec, adversary, args.trials, seed, messages=args.messages)
        r = ev.results[0]
        for rec in r.records:
            rec.extra.setdefault("prefix_len", 0)
            rec.extra.setdefault("k_hat", rec.extra.get("k"))
        return r, r.records, ("K", "prefix_len", "k", "k_hat"), {"K": mc.K}
    if scheme == "concat":
        cc = build_concatenated(spec, mc, rep=args.prefix_rep)
        ce = evaluate_concat(cc, spec, adversary, args.trials, seed, messages=args.messages)
        extra = {"K": mc.K, "prefix_length": ce.prefix_length, "total_length": ce.total_length,
                 "prefix_error": ce.prefix_error, "prefix_error_bound": ce.prefix_error_bound}
        return ce.result, ce.result.records, ("K", "prefix_len", "k", "k_hat"), extra
    raise InvalidArgumentError(f"unknown scheme {scheme!r}")


def cmd_simulate(args, argv) -> int:
    from .coding import write_trials_csv
    t0 = time.perf_counter()
    spec = load_channel(args.channel).to_system()
    params = _code_params(args)
    r, records, cols, extra = _simulate(spec, params, args, args.seed)
    if args.out:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            write_trials_csv(records, params, r.adversary, fh, cols)
    result = dict(r.summary(), **extra)
    p = dict(params.to_dict(), channel=args.channel, trials=args.trials, adversary=args.adversary,
             scheme=args.scheme, messages=args.messages, csv=args.out)
    _emit(make_report(argv, p, result, t0, args.seed), args.report)
    return 0


def _parse_values(text: str, kind) -> list:
    vals = [v.strip() for v in text.split(",") if v.strip()]
    if not vals:
        raise InvalidArgumentError("--values must list at least one value")
    try:
        return [kind(v) for v in vals]
    except ValueError:
        raise InvalidArgumentError(f"bad value list {text!r}") from None


def cmd_sweep(args, argv) -> int:
    import csv
    import io
    t0 = time.perf_counter()
    spec = load_channel(args.channel).to_system()
    buf = io.StringIO()
    header = {"channel": args.channel, "vary": args.vary, "version": __version__, "seed": args.seed}
    if args.vary == "obs_noise":
        values = _parse_values(args.values, float)
        if spec.s.size != 2 or spec.z.size != 2:
            raise InvalidArgumentError("obs_noise sweeps need binary S and Z")
        header.update(grid=args.grid, tol=args.tol, mode=args.mode)
        for k, v in header.items():
            buf.write(f"# {k}={v}\n")
        w = csv.writer(buf)
        w.writerow(["obs_noise", "capacity", "lower_bound", "upper_bound"])
        for q in values:
            if not 0 <= q <= 1:
                raise InvalidArgumentError("obs_noise values must lie in [0, 1]")
            sp = spec.with_obs(np.array([[1 - q, q], [q, 1 - q]]))
            res = _capacity_result(sp, args.mode, args.grid, args.tol, args.seed)
            w.writerow([q, res["value"], res.get("lower_bound", res["value"]),
                        res.get("upper_bound", res["value"])])
    else:
        values = _parse_values(args.values, int if args.vary == "n" else float)
        if args.n is None and args.vary != "n" or args.rate is None and args.vary != "rate":
            raise InvalidArgumentError("simulation sweeps need --n and --rate for the fixed parameter")
        header.update(n=args.n, rate=args.rate, trials=args.trials, adversary=args.adversary,
                      delta2=args.delta2, gamma=args.gamma, f_eps=args.f_eps, eps_rate=args.eps_rate,
                      code_seed=args.code_seed)
        for k, v in header.items():
            buf.write(f"# {k}={v}\n")
        w = csv.writer(buf)
        w.writerow([args.vary, "p_error", "ci_low", "ci_high", "p_enc", "p_dec1", "p_dec2", "trials"])
        for v in values:
            params = _code_params(args, n=v if args.vary == "n" else None,
                                  rate=v if args.vary == "rate" else None)
            r, *_ = _simulate(spec, params, args, args.seed)
            w.writerow([v, r.p_error, r.ci[0], r.ci[1], r.p_enc, r.p_dec1, r.p_dec2, r.trials])
    text = buf.getvalue()
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    sys.stdout.write(text)
    sys.stderr.write(f"sweep finished in {time.perf_counter() - t0:.2f}s\n")
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _add_sim_args(p, require=True):
    p.add_argument("--n", type=int, required=require, help="block length")
    p.add_argument("--rate", type=float, required=require, help="message rate R in bits/symbol")
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--adversary", default="iid:0.5,0.5",
                   help="iid:q0,q1,..  memoryless:q;q;..  marginal:p0,p1,..  custom:file.py[:func]")
    p.add_argument("--delta2", type=float, default=None, help="encoder slack (default 0.25/sqrt(n))")
    p.add_argument("--gamma", type=float, default=None, help="decoder slack (default 0.5/sqrt(n))")
    p.add_argument("--f-eps", dest="f_eps", type=float, default=None,
                   help="state-type slack (default 2/sqrt(n))")
    p.add_argument("--eps-rate", dest="eps_rate", type=float, default=0.1, help="rate backoff")
    p.add_argument("--code-seed", dest="code_seed", type=int, default=None,
                   help="fix the shared code seed (default: fresh code per trial)")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--genie-type", dest="explicit_type", action="store_false",
                   help="observation type reaches the decoder out of band (default)")
    g.add_argument("--explicit-type", dest="explicit_type", action="store_true",
                   help="send the observation type over a repetition prefix")
    p.set_defaults(explicit_type=False)
    p.add_argument("--scheme", choices=("random", "multicode", "concat"), default="random",
                   help="randomized code, K=n^2 code family, or concatenated stochastic encoder")
    p.add_argument("--K", type=int, default=None, help="family size (default n^2)")
    p.add_argument("--prefix-rep", dest="prefix_rep", type=int, default=None,
                   help="repetitions per prefix bit (default ceil(sqrt(n)))")
    p.add_argument("--messages", choices=("uniform", "max"), default="uniform")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="myopic-avc", description=__doc__.split("\n")[0],
                     formatter_class=argparse.RawDescriptionHelpFormatter,
                     epilog="exit codes: 0 success, 1 invalid input, 2 size/guard limit\n"
                            "AVC_THREADS caps worker threads; AVC_NUMBA=0 selects the numpy kernels")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("capacity", help="compute the capacity of a channel file")
    p.add_argument("--channel", required=True)
    p.add_argument("--grid", type=int, default=16)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--mode", choices=("myopic", "oblivious", "omniscient", "oracle"), default="myopic")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")

    p = sub.add_parser("simulate", help="Monte Carlo run of the coding scheme",
                       formatter_class=argparse.RawDescriptionHelpFormatter, epilog=CSV_HELP)
    p.add_argument("--channel", required=True)
    _add_sim_args(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="trial CSV path")
    p.add_argument("--report", help="also write the JSON report here")

    p = sub.add_parser("sweep", help="one row per value of a varied parameter")
    p.add_argument("--channel", required=True)
    p.add_argument("--vary", choices=("n", "rate", "obs_noise"), required=True)
    p.add_argument("--values", required=True, help="comma-separated list")
    _add_sim_args(p, require=False)
    p.add_argument("--grid", type=int, default=16)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--mode", choices=("myopic", "oblivious", "omniscient", "oracle"), default="myopic")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    return parser


COMMANDS = {"capacity": cmd_capacity, "simulate": cmd_simulate, "sweep": cmd_sweep}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        return int(exc.code)
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    try:
        kernels.configure_threads()
        return COMMANDS[args.command](args, argv)
    except CapacityLimitError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except (AVCError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
