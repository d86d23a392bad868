"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 validation or bound failure, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .harness import (
    ExperimentReport,
    GridSpec,
    ModelSpec,
    run_online,
    run_protocol,
    grid_search,
    verify_bounds,
    final_depth,
    final_node_count,
)
from .learner_apst import ApstConfig, ApstLearner, Hypothesis, InsertPolicy, Mode, RoundRecord
from .learner_pst import pst_table
from .multiclass import MulticlassLearner
from .sequences import Alphabet, Dataset, DatasetError, load_dataset
from .suffix_tree import tree_from_dict, tree_to_dict
from .synthgen import MixMode, MotifSpec, generate, write_generated
from .weighting import OmegaTable, WeightParams

EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_IO = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _float_list(text):
    return [float(v) for v in text.split(",") if v]


def _int_list(text):
    out = []
    for part in text.split(","):
        if "-" in part.strip("-"):
            a, b = part.split("-")
            out.extend(range(int(a), int(b) + 1))
        elif part:
            out.append(int(part))
    return out


def _meta(args, config=None) -> dict:
    meta = {"version": __version__, "command": args.command, "seed": getattr(args, "seed", None)}
    if config is not None:
        meta["config"] = config
    if not args.no_timestamp:
        meta["timestamp"] = time.strftime("%Y-%m-%dT%H:%M:%S%z")
    return meta


def _add_common(p):
    p.add_argument("--no-timestamp", action="store_true",
                   help="omit wall-clock fields so repeated runs are byte-identical")
    p.add_argument("--format", choices=("json", "csv"), default="json")


def _add_model(p):
    p.add_argument("--model", choices=("pst", "apst", "apst-mc"), default="apst")
    p.add_argument("--mode", choices=[m.value for m in Mode], default=Mode.SELF_BOUNDED.value)
    p.add_argument("--lambda", dest="lam", type=float, default=4.0)
    p.add_argument("--xi", type=float, default=0.9)
    p.add_argument("--epsilon", type=int, default=1)
    p.add_argument("--insert-policy", choices=[p_.value for p_ in InsertPolicy],
                   default=InsertPolicy.EXACT_ONLY.value)
    p.add_argument("--delta", type=float, default=None, help="accepted and ignored")


def _add_data(p, required=True):
    p.add_argument("--data", required=required, help="whitespace-separated symbol file")
    p.add_argument("--inputs", help="side-information file, one vector per line")
    p.add_argument("--mask", help="corruption mask file, one 0/1 per line")
    p.add_argument("--classes", type=int, default=2, help="alphabet size K (2 = binary)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="apst", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="write a synthetic motif stream")
    g.add_argument("--motif", action="append", required=True,
                   help="comma-separated motif; repeat for a mixture")
    g.add_argument("--reps", type=int, help="repetitions of a single motif")
    g.add_argument("--length", type=int, help="target length for a motif mixture")
    g.add_argument("--noise", type=float, default=0.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--classes", type=int, default=2)
    g.add_argument("--redraw-excludes-original", action="store_true")
    g.add_argument("--out", required=True)
    _add_common(g)

    t = sub.add_parser("train", help="run one learner online over a stream")
    _add_data(t)
    _add_model(t)
    t.add_argument("--trace", help="JSON-lines round trace output")
    t.add_argument("--hypothesis", help="final hypothesis JSON output")
    t.add_argument("--strict", action="store_true", help="fail fast on a weight-mass violation")
    t.add_argument("--seed", type=int, default=0)
    _add_common(t)

    e = sub.add_parser("evaluate", help="score one configuration under a split protocol")
    _add_data(e)
    _add_model(e)
    e.add_argument("--protocol", choices=("synthetic_402040", "real_3070"),
                   default="synthetic_402040")
    e.add_argument("--freeze-after-train", action="store_true")
    e.add_argument("--seed", type=int, default=0)
    _add_common(e)

    gr = sub.add_parser("grid", help="hyperparameter grid with validation-based selection")
    _add_data(gr, required=False)
    gr.add_argument("--motif", action="append", help="generate one stream per seed instead")
    gr.add_argument("--reps", type=int)
    gr.add_argument("--length", type=int)
    gr.add_argument("--noise", type=float, default=0.0)
    gr.add_argument("--seeds", type=_int_list, default=[0], help="e.g. 0-19 or 1,2,3")
    gr.add_argument("--models", default="apst", help="comma list of pst,apst,apst-mc")
    gr.add_argument("--mode", choices=[m.value for m in Mode], default=Mode.SELF_BOUNDED.value)
    gr.add_argument("--lambdas", type=_float_list, default=[2, 4, 6, 8, 10, 12])
    gr.add_argument("--xis", type=_float_list, default=[0.5, 0.7, 0.9, 0.99])
    gr.add_argument("--epsilons", type=_int_list, default=None)
    gr.add_argument("--protocol", choices=("synthetic_402040", "real_3070"),
                    default="synthetic_402040")
    gr.add_argument("--freeze-after-train", action="store_true")
    gr.add_argument("--jobs", type=int, default=1)
    gr.add_argument("--out-csv")
    gr.add_argument("--out-json")
    _add_common(gr)

    v = sub.add_parser("verify-bounds", help="check a trace against the loss bounds")
    v.add_argument("--trace", help="JSON-lines trace written by train")
    v.add_argument("--hypothesis", help="hypothesis JSON written by train")
    v.add_argument("--data", help="stream to replay (defaults to the trace's labels)")
    v.add_argument("--inputs")
    v.add_argument("--grid", action="store_true",
                   help="print the weight-mass bound table instead")
    v.add_argument("--lambdas", type=_float_list, default=[0.5, 1, 2, 4, 8, 12])
    v.add_argument("--xis", type=_float_list, default=[0.5, 0.7, 0.9, 0.99])
    v.add_argument("--epsilons", type=_int_list, default=[0, 1, 2])
    v.add_argument("--ts", type=_int_list, default=list(range(2, 31)))
    _add_common(v)

    it = sub.add_parser("inspect-tree", help="summarize a saved hypothesis")
    it.add_argument("--hypothesis", required=True)
    it.add_argument("--dump", action="store_true", help="print the tree JSON too")
    _add_common(it)
    return parser


def _fix_negative_values(argv):
    # let `--motif -1,-1,+1,+1` through; argparse would read the value as a flag
    out = []
    it = iter(argv)
    for tok in it:
        if tok == "--motif":
            nxt = next(it, None)
            if nxt is None:
                out.append(tok)
            else:
                out.append(f"--motif={nxt}")
        else:
            out.append(tok)
    return out


def _config(args) -> ApstConfig:
    return ApstConfig(WeightParams(args.lam, args.xi, args.epsilon), Mode(args.mode),
                      InsertPolicy(args.insert_policy), delta=args.delta)


def _model_spec(args) -> ModelSpec:
    if args.model == "pst":
        return ModelSpec("pst")
    return ModelSpec(args.model, _config(args))


def _load(args) -> Dataset:
    return load_dataset(args.data, Alphabet(args.classes), args.inputs, args.mask)


def _emit(args, doc: dict, csv_text: str | None = None):
    if args.format == "csv" and csv_text is not None:
        sys.stdout.write(csv_text)
    else:
        sys.stdout.write(json.dumps(doc, indent=2) + "\n")


# ---------------------------------------------------------------------------


def hypothesis_to_dict(learner, model: ModelSpec, meta: dict, data: dict) -> dict:
    doc = {"meta": meta, "model": model.kind,
           "config": model.config.to_dict() if model.config else None, "data": data}
    if isinstance(learner, MulticlassLearner):
        doc["alphabet_size"] = learner.alphabet.size
        doc["w"] = [c.w.tolist() for c in learner.classes]
        doc["trees"] = [tree_to_dict(c.tree) for c in learner.classes]
        doc["state"] = [{"d": c.d, "P": c.P, "L": c.L} for c in learner.classes]
    else:
        doc["alphabet_size"] = 2
        doc["w"] = learner.w.tolist()
        doc["tree"] = tree_to_dict(learner.tree)
        doc["state"] = {"d": getattr(learner, "d", 0), "P": getattr(learner, "P", 0.0),
                        "L": learner.L}
    return doc


def hypothesis_from_dict(doc: dict) -> tuple[Hypothesis, ApstConfig | None]:
    """Rebuild a binary hypothesis (aPST or classical PST) from JSON."""
    if doc["model"] == "apst-mc":
        raise ValueError("multiclass hypotheses have no single-tree loss bound")
    tree = tree_from_dict(doc["tree"])
    w = np.asarray(doc["w"], dtype=float)
    if doc["model"] == "pst":
        return Hypothesis(w, tree, pst_table()), None
    config = ApstConfig.from_dict(doc["config"])
    return Hypothesis(w, tree, OmegaTable(config.params)), config


def _cmd_generate(args):
    motifs = [tuple(int(tok) for tok in m.replace("−", "-").split(",") if tok) for m in args.motif]
    alphabet = Alphabet(args.classes)
    if len(motifs) > 1 or args.length is not None:
        spec = MotifSpec(tuple(motifs), alphabet, MixMode.UNIFORM_MIXTURE,
                         target_length=args.length, noise_p=args.noise, seed=args.seed,
                         redraw_includes_original=not args.redraw_excludes_original)
    else:
        spec = MotifSpec(tuple(motifs), alphabet, MixMode.REPEAT_SINGLE,
                         repetitions=args.reps, noise_p=args.noise, seed=args.seed,
                         redraw_includes_original=not args.redraw_excludes_original)
    ds = generate(spec)
    paths = write_generated(args.out, spec, ds, _meta(args, spec.to_dict()))
    _emit(args, {"meta": _meta(args), "files": [str(p) for p in paths], "length": len(ds)})
    return EXIT_OK


def _cmd_train(args):
    ds = _load(args)
    model = _model_spec(args)
    learner = model.build(ds)
    if args.strict and isinstance(learner, ApstLearner):
        learner.strict = True
    trace = run_online(learner, ds)
    meta = _meta(args, model.config.to_dict() if model.config else {"model": "pst"})
    if args.trace:
        with open(args.trace, "w", encoding="utf-8") as fh:
            fh.write(json.dumps({"meta": meta}) + "\n")
            for r in trace:
                fh.write(json.dumps(r.to_dict()) + "\n")
    data = {"data": args.data, "inputs": args.inputs, "mask": args.mask, "classes": args.classes}
    if args.hypothesis:
        doc = hypothesis_to_dict(learner, model, meta, data)
        Path(args.hypothesis).write_text(json.dumps(doc) + "\n", encoding="utf-8")
    mistakes = sum(r.y_hat != r.y for r in trace)
    summary = {
        "meta": meta,
        "model": model.kind,
        "rounds": len(trace),
        "mistakes": mistakes,
        "accuracy": 1 - mistakes / len(trace) if trace else float("nan"),
        "updates": sum(r.updated for r in trace),
        "final_depth": final_depth(learner),
        "node_count": final_node_count(learner),
        "sum_sq_loss": sum(r.loss ** 2 for r in trace),
    }
    _emit(args, summary)
    return EXIT_OK


def _cmd_evaluate(args):
    ds = _load(args)
    model = _model_spec(args)
    row = run_protocol(ds, model, args.protocol, seed=args.seed,
                       freeze_after_train=args.freeze_after_train)
    if args.no_timestamp:
        row.runtime = 0.0
    report = ExperimentReport([row], args.protocol)
    doc = {"meta": _meta(args, model.config.to_dict() if model.config else None),
           "row": asdict(row)}
    _emit(args, doc, report.to_csv())
    return EXIT_OK


def _cmd_grid(args):
    models = tuple(m for m in args.models.split(",") if m)
    multiclass = "apst-mc" in models
    eps = args.epsilons if args.epsilons is not None else ([0, 1, 2] if multiclass else [0, 1])
    grid = GridSpec(lambdas=args.lambdas, xis=args.xis, epsilons=eps, models=models,
                    seeds=args.seeds, mode=Mode(args.mode))
    if args.motif:
        motifs = [tuple(int(tok) for tok in m.replace("−", "-").split(",") if tok)
                  for m in args.motif]
        alphabet = Alphabet(args.classes)
        datasets = []
        for seed in args.seeds:
            if len(motifs) > 1 or args.length is not None:
                spec = MotifSpec(tuple(motifs), alphabet, MixMode.UNIFORM_MIXTURE,
                                 target_length=args.length, noise_p=args.noise, seed=seed)
            else:
                spec = MotifSpec(tuple(motifs), alphabet, repetitions=args.reps,
                                 noise_p=args.noise, seed=seed)
            datasets.append((seed, generate(spec)))
    elif args.data:
        datasets = [(args.seeds[0], _load(args))]
    else:
        raise UsageError("grid needs --data or --motif")
    report = grid_search(datasets, grid, args.protocol, jobs=args.jobs,
                         freeze_after_train=args.freeze_after_train)
    csv_text = report.to_csv(with_runtime=not args.no_timestamp)
    summary = {"meta": _meta(args, {"lambdas": list(grid.lambdas), "xis": list(grid.xis),
                                    "epsilons": list(grid.epsilons), "models": list(models),
                                    "mode": grid.mode.value, "seeds": list(args.seeds),
                                    "protocol": args.protocol}),
               "summary": report.summary()}
    if args.out_csv:
        Path(args.out_csv).write_text(csv_text, encoding="utf-8")
    if args.out_json:
        Path(args.out_json).write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    _emit(args, summary, csv_text)
    return EXIT_OK


def _read_trace(path) -> list[RoundRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            doc = json.loads(line)
            if "meta" in doc:
                continue
            records.append(RoundRecord.from_dict(doc))
    return records


def _bound_table(args):
    from .harness import neighborhood_mass
    from .weighting import cor21_bound, gamma_const, lemma2_bound, lemma3_bound

    lines = ["lambda,xi,epsilon,t,brute_sum,lemma2,lemma3,cor21,gamma"]
    ok = True
    for lam in args.lambdas:
        for xi in args.xis:
            for eps in args.epsilons:
                p = WeightParams(lam, xi, eps)
                for t in args.ts:
                    row = [neighborhood_mass(t, p), lemma2_bound(t, p), lemma3_bound(p),
                           cor21_bound(p), gamma_const(p)]
                    ok &= row[0] <= min(row[1:]) * (1 + 1e-12)
                    lines.append(",".join([repr(lam), repr(xi), str(eps), str(t)]
                                          + [repr(v) for v in row]))
    sys.stdout.write("\n".join(lines) + "\n")
    return EXIT_OK if ok else EXIT_INVALID


def _cmd_verify(args):
    if args.grid:
        return _bound_table(args)
    if not (args.trace and args.hypothesis):
        raise UsageError("verify-bounds needs --trace and --hypothesis (or --grid)")
    trace = _read_trace(args.trace)
    doc = json.loads(Path(args.hypothesis).read_text(encoding="utf-8"))
    multiclass = doc["model"] == "apst-mc"
    if multiclass:
        hyp, config = None, ApstConfig.from_dict(doc["config"])
        symbols = inputs = None
    else:
        hyp, config = hypothesis_from_dict(doc)
        data_path = args.data
        inputs_path = args.inputs or doc.get("data", {}).get("inputs")
        if data_path:
            ds = load_dataset(data_path, Alphabet(2), inputs_path)
            symbols, inputs = ds.symbols, ds.inputs
        else:
            symbols = tuple(1 if r.y == 1 else 0 for r in trace)
            inputs = None
            if inputs_path:
                ds = load_dataset(doc["data"]["data"], Alphabet(2), inputs_path)
                inputs = ds.inputs
    report = verify_bounds(trace, hyp, config, symbols=symbols, inputs=inputs)
    out = {"meta": _meta(args), **report.to_dict()}
    worst = report.worst
    if worst is not None:
        out["worst"] = {"name": worst.name, "slack": worst.slack}
    _emit(args, out)
    return EXIT_OK if report.passed else EXIT_INVALID


def _cmd_inspect(args):
    doc = json.loads(Path(args.hypothesis).read_text(encoding="utf-8"))
    trees = [tree_from_dict(t) for t in doc["trees"]] if "trees" in doc else [tree_from_dict(doc["tree"])]
    out = {
        "meta": _meta(args),
        "model": doc["model"],
        "config": doc.get("config"),
        "depths": [t.max_depth for t in trees],
        "node_counts": [t.node_count for t in trees],
        "max_depth": max(t.max_depth for t in trees),
        "g_squared_norm": [t.squared_norm() for t in trees],
    }
    if args.dump:
        out["trees"] = [tree_to_dict(t) for t in trees]
    _emit(args, out)
    return EXIT_OK


COMMANDS = {
    "generate": _cmd_generate,
    "train": _cmd_train,
    "evaluate": _cmd_evaluate,
    "grid": _cmd_grid,
    "verify-bounds": _cmd_verify,
    "inspect-tree": _cmd_inspect,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(_fix_negative_values(argv))
        return COMMANDS[args.command](args)
    except SystemExit as exc:  # --help / --version
        return exc.code if isinstance(exc.code, int) else EXIT_OK
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"apst: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (DatasetError, ValueError, KeyError) as exc:
        print(f"apst: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
