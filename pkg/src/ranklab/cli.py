"""Command-line front end: dataset generation, training runs, oracle suites, recipes.

Exit codes: 0 ok, 1 failing oracle, 2 uncertifiable dataset parameters,
3 training divergence (partial CSV flushed), 4 recipe rank assertion failure.
"""

from __future__ import annotations

import argparse
import hashlib
import os
import sys
import tempfile
from importlib import resources

import numpy as np

from . import datagen, oracle
from .errors import AssumptionViolated, DivergenceError, GenerationFailed, InvalidInput
from .linalg import RankTolerance
from .netcore import Activation, Dataset
from .noisekit import NoiseSpec, RngStream
from .trainer import TrainConfig, train

_NOISE_ALIASES = {
    "grad": "gradient_gaussian",
    "input": "input_gaussian",
    "output": "output_gaussian",
    "dropout-b": "dropout_bernoulli",
    "dropout-g": "dropout_gaussian",
}


def parse_noise(text: str, seed: int = 0) -> NoiseSpec:
    """Parse 'none' or '<kind>:<param>' with kind in grad|input|output|dropout-b|dropout-g."""
    if text == "none":
        return NoiseSpec(mode="none", seed=seed)
    if ":" not in text:
        raise InvalidInput(f"noise spec {text!r} must look like 'grad:1e-3'")
    kind, _, value = text.partition(":")
    if kind not in _NOISE_ALIASES:
        raise InvalidInput(f"unknown noise kind {kind!r}")
    return NoiseSpec(mode=_NOISE_ALIASES[kind], param=float(value), seed=seed)


def parse_dims(text: str):
    try:
        dims = [int(part) for part in text.lower().split("x")]
    except ValueError as exc:
        raise InvalidInput(f"bad dims {text!r}, expected e.g. 1000x500x250") from exc
    if len(dims) < 2 or any(d <= 0 for d in dims):
        raise InvalidInput(f"dims need at least two positive widths, got {text!r}")
    return dims


def _atomic_write(path, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".ranklab-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _trajectory_csv(traj) -> str:
    import io

    buf = io.StringIO()
    traj.write_csv(buf)
    return buf.getvalue()


def cmd_gen_data(args) -> int:
    try:
        data = datagen.synth_dataset(args.dx, args.dy, args.m, seed=args.seed)
    except (AssumptionViolated, GenerationFailed, InvalidInput) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    cert = datagen.verify_assumptions(data, [args.dx, args.dy])
    if args.out:
        datagen.save_dataset(args.out, data)
    for name in ("min_dim_ok", "sample_ok", "xx_full_rank", "yx_full_rank", "distinct_singulars"):
        print(f"{name} {getattr(cert, name)}")
    print(f"min_singular_gap {cert.min_singular_gap!r}")
    return 0


def cmd_train(args) -> int:
    data = datagen.load_dataset(args.data)
    dims = parse_dims(args.dims)
    if dims[0] != data.d_x or dims[-1] != data.d_y:
        print(
            f"error: dims {args.dims} do not match dataset ({data.d_x} -> {data.d_y})",
            file=sys.stderr,
        )
        return 2
    init_rank = args.init_rank
    if init_rank is None:
        init_rank = min(min(a, b) for a, b in zip(dims[:-1], dims[1:]))
    W0 = datagen.low_rank_init(dims, init_rank, scale=args.init_scale, seed=args.seed)
    cfg = TrainConfig(
        learning_rate=args.lr,
        iterations=args.iters,
        batch_size=args.batch,
        noise=parse_noise(args.noise, seed=args.seed),
        rank_tol=RankTolerance(args.rank_tol),
        record_layer_ranks=not args.no_layer_ranks,
        seed=args.seed,
    )
    act = Activation(args.act, at_output=args.act_at_output)
    code = 0
    try:
        _, traj = train(W0, act, data, cfg)
    except DivergenceError as exc:
        traj = exc.trajectory
        print(f"error: {exc}", file=sys.stderr)
        code = 3
    csv_text = _trajectory_csv(traj)
    if args.out:
        _atomic_write(args.out, csv_text)
    else:
        sys.stdout.write(csv_text)
    return code


def _verify_suites(args):
    rng_seed = args.seed
    suites = {
        "rank": lambda: [
            oracle.check_rank_lemmas(args.trials or 500, rng=RngStream(rng_seed, 0)),
            oracle.check_rank_bump_lemmas(args.trials or 200, rng=RngStream(rng_seed, 1)),
        ],
        "noise": lambda: [
            oracle.check_input_noise_identity(args.trials or 200, rng=RngStream(rng_seed, 2))
        ],
        "dropout": lambda: [
            oracle.check_dropout_equivalence(args.trials or 100_000, rng=RngStream(rng_seed, 3))
        ],
        "sgd": lambda: [
            oracle.check_sgd_bound(
                datagen.synth_dataset(8, 4, 40, seed=rng_seed),
                batch_size=8,
                sigma=0.5,
                delta=delta,
                trials=args.trials or 10_000,
                rng=RngStream(rng_seed, 4 + i),
            )
            for i, delta in enumerate((0.1, 0.2))
        ],
        "grad": lambda: [
            oracle.check_gradient_paths(args.trials or 20, rng=RngStream(rng_seed, 6))
        ],
    }
    names = list(suites) if args.suite == "all" else [args.suite]
    reports = []
    for name in names:
        reports.extend(suites[name]())
    return reports


def cmd_verify(args) -> int:
    reports = _verify_suites(args)
    for report in reports:
        print(report.format_line())
    return 0 if all(r.passed for r in reports) else 1


def load_recipe(name_or_path: str) -> dict:
    """Recipes are flat key=value text files; '#' starts a comment."""
    if os.path.exists(name_or_path):
        text = open(name_or_path).read()
    else:
        ref = resources.files("ranklab").joinpath(f"recipes/{name_or_path}.cfg")
        if not ref.is_file():
            raise InvalidInput(f"unknown recipe {name_or_path!r}")
        text = ref.read_text()
    recipe = {}
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidInput(f"bad recipe line: {line!r}")
        key, _, value = line.partition("=")
        recipe[key.strip()] = value.strip()
    return recipe


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def cmd_recipe(args) -> int:
    recipe = load_recipe(args.name)
    name = recipe["name"]
    dims = parse_dims(recipe["dims"])
    act = Activation(recipe.get("activation", "linear"), at_output=recipe.get("activation_at_output", "false") == "true")
    data = datagen.synth_dataset(
        int(recipe["dx"]), int(recipe["dy"]), int(recipe["m"]), seed=int(recipe["data_seed"])
    )
    init_scale = None if recipe.get("init_scale", "auto") == "auto" else float(recipe["init_scale"])
    W0 = datagen.low_rank_init(dims, int(recipe["init_rank"]), scale=init_scale, seed=int(recipe["init_seed"]))
    expected = int(recipe["expected_final_rank"])
    record_layers = recipe.get("record_layer_ranks", "false") == "true"

    data_digest = _sha256(data.X.tobytes() + data.Y.tobytes())
    init_digest = _sha256(b"".join(W.tobytes() for W in W0))

    os.makedirs(args.outdir, exist_ok=True)
    log_lines = [f"recipe {name}", f"dataset_sha256 {data_digest}", f"init_sha256 {init_digest}"]
    final_ranks = {}
    code = 0
    for arm in recipe["arms"].split(","):
        arm = arm.strip()
        cfg = TrainConfig(
            learning_rate=float(recipe[f"{arm}.lr"]),
            iterations=int(recipe[f"{arm}.iters"]),
            batch_size=int(recipe.get(f"{arm}.batch", "0")),
            noise=parse_noise(recipe[f"{arm}.noise"], seed=int(recipe["train_seed"])),
            record_layer_ranks=record_layers,
            seed=int(recipe["train_seed"]),
        )
        try:
            _, traj = train(W0, act, data, cfg)
        except DivergenceError as exc:
            traj = exc.trajectory
            code = 3
        out_path = os.path.join(args.outdir, f"{name}_{arm}.csv")
        _atomic_write(out_path, _trajectory_csv(traj))
        final_ranks[arm] = traj.final_rank
        log_lines.append(f"{arm}.final_rank {traj.final_rank}")
        print(f"{arm}: final rank {traj.final_rank} (csv: {out_path})")
    _atomic_write(os.path.join(args.outdir, f"{name}_log.txt"), "\n".join(log_lines) + "\n")
    if code:
        return code

    assert_arm = recipe.get("assert_arm", "perturbed")
    if final_ranks.get(assert_arm) != expected:
        print(
            f"error: arm {assert_arm!r} reached rank {final_ranks.get(assert_arm)}, expected {expected}",
            file=sys.stderr,
        )
        return 4
    if args.gnuplot:
        script = [f"set datafile separator ','", f"set key autotitle columnhead"]
        plots = ", ".join(
            f"'{name}_{arm.strip()}.csv' using 1:3 with lines" for arm in recipe["arms"].split(",")
        )
        script.append(f"plot {plots}")
        _atomic_write(os.path.join(args.outdir, f"{name}.gp"), "\n".join(script) + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ranklab")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a certified synthetic dataset")
    p.add_argument("--dx", type=int, required=True)
    p.add_argument("--dy", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train a network and emit the rank-trajectory CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--dims", required=True, help="e.g. 1000x500x250")
    p.add_argument("--act", choices=("linear", "sigmoid", "tanh"), default="linear")
    p.add_argument("--act-at-output", action="store_true")
    p.add_argument("--noise", default="none", help="none | grad:S | input:B | output:S | dropout-b:P | dropout-g:S")
    p.add_argument("--lr", type=float, required=True)
    p.add_argument("--iters", type=int, required=True)
    p.add_argument("--batch", type=int, default=0)
    p.add_argument("--init-rank", type=int, default=None)
    p.add_argument("--init-scale", type=float, default=None)
    p.add_argument("--rank-tol", type=float, default=1e-9)
    p.add_argument("--no-layer-ranks", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("verify", help="run the numerical certification suites")
    p.add_argument("--suite", choices=("all", "rank", "noise", "dropout", "sgd", "grad"), default="all")
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("recipe", help="run a named experiment recipe")
    p.add_argument("name", help="fig1|fig2|fig3|fig4a|fig4b or a path to a recipe file")
    p.add_argument("--outdir", default=".")
    p.add_argument("--gnuplot", action="store_true")
    p.set_defaults(func=cmd_recipe)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InvalidInput as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
