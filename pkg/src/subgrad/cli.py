"""Command-line entry point: ``subgrad <subcommand> ...``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 verification failure.
Every output file records the generating subcommand, its flags and the seed.
"""

import argparse
import json
import os
import sys

import numpy as np

from . import data, experiments, metrics, models, oracle, pgreedy
from . import autodiff as ad
from .algorithms import algo_from_dict
from .dgreedy import LinkFunction
from .setfn import CutFn, FlidFn, ModularFn
from .train import mean_log_likelihood

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_VERIFY = 0, 1, 2, 3

# flags that name files or tune execution without changing results
_NOT_RECORDED = {"command", "out", "out_dir", "history", "threads", "func", "seed_value"}


class UsageError(Exception):
    pass


class VerificationFailed(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _seed(args):
    if args.seed is not None:
        return args.seed
    env = os.environ.get("SUBGRAD_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"SUBGRAD_SEED must be an integer, got {env!r}") from None


def _provenance(args):
    flags = {k: v for k, v in sorted(vars(args).items()) if k not in _NOT_RECORDED}
    flags["seed"] = args.seed_value
    return {"command": args.command, "flags": flags}


def _comment(args):
    return "subgrad " + json.dumps(_provenance(args), sort_keys=True)


def _write_text(path, text):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _link(args):
    return LinkFunction(args.link, args.t)


# ---------------------------------------------------------------------------
# subcommands

def cmd_gen_maxcut(args):
    ds = data.gen_maxcut_dataset(args.m, args.n, args.d, args.k, args.gamma, args.seed_value,
                                 meta=_provenance(args))
    data.save_maxcut_dataset(ds, args.out)


def cmd_train_maxcut(args):
    ds = data.load_maxcut_dataset(args.train)
    link = _link(args)
    ckpt, history = experiments.train_maxcut(ds, link, args.lr, args.batch, args.epochs, args.seed_value)
    ckpt.meta["provenance"] = _provenance(args)
    data.save_checkpoint(ckpt, args.out)
    rows = [{"epoch": e, "mean_log_likelihood": ll} for e, ll in history]
    cols = ["epoch", "mean_log_likelihood"]
    if args.test:
        test = data.load_maxcut_dataset(args.test)
        model = models.model_from_config(ckpt.model, ckpt.params)
        algo = algo_from_dict(ckpt.algorithm)
        test_ll = mean_log_likelihood(experiments.maxcut_examples(test), model, algo)
        for r in rows:
            r["test_log_likelihood"] = test_ll if r["epoch"] == history[-1][0] else ""
        cols.append("test_log_likelihood")
    history_path = args.history or os.path.splitext(args.out)[0] + ".history.csv"
    _write_text(history_path, metrics.csv_text(rows, cols, _comment(args)))


def cmd_eval_maxcut(args):
    ckpt = data.load_checkpoint(args.ckpt)
    test = data.load_maxcut_dataset(args.test)
    P_learned = ckpt.params["P"]
    if P_learned.shape != (test.k, test.d):
        raise data.CheckpointShapeError(
            f"checkpoint projection has shape {P_learned.shape}, test set needs {(test.k, test.d)}")
    link = LinkFunction.from_dict(ckpt.algorithm["link"])
    projections = {"learned": P_learned}
    for name in [b.strip() for b in args.baselines.split(",") if b.strip()]:
        if name == "original":
            projections[name] = test.P
        elif name == "random":
            projections[name] = experiments.random_projection(test.k, test.d, args.seed_value)
        else:
            raise UsageError(f"unknown baseline {name!r} (choose from original, random)")
    res = experiments.eval_maxcut(test, projections, link, args.mode, args.samples, args.seed_value)
    rows = [{"projection": r.projection, "mean_cut_ratio": r.mean_ratio, "stderr": r.stderr,
             "num_graphs": r.num_graphs} for r in res]
    _write_text(args.out, metrics.csv_text(rows, ["projection", "mean_cut_ratio", "stderr", "num_graphs"],
                                           _comment(args)))


def _flid_link(args):
    return LinkFunction(args.link, args.t)


def cmd_train_flid(args):
    ds = data.load_registries(args.data).assign_folds(args.folds, args.seed_value)
    D = args.D or models.default_latent_dim(ds.n)
    folds = range(args.folds) if args.fold is None else [args.fold]
    os.makedirs(args.out_dir, exist_ok=True)
    for k in folds:
        if not 0 <= k < args.folds:
            raise UsageError(f"fold {k} out of range")
        train_regs, _ = ds.split(k)
        order = data.order_by_frequency(data.RegistryDataset(ds.n, train_regs))
        if args.algo == "dgreedy":
            algo = experiments.make_algo("dgreedy", _flid_link(args), order)
        else:
            mode = pgreedy.SetLikelihoodMode(args.pgreedy_mode, args.samples)
            algo = experiments.make_algo("pgreedy", t=args.t, mode=mode)
        ckpt, history = experiments.train_flid(ds.n, D, train_regs, algo, args.lr, args.lr_decay,
                                               args.batch, args.epochs, args.seed_value)
        ckpt.meta.update({"provenance": _provenance(args), "fold": k, "folds": args.folds,
                          "fold_seed": args.seed_value, "history": [list(h) for h in history]})
        data.save_checkpoint(ckpt, os.path.join(args.out_dir, f"fold{k:02d}.json"))


def cmd_eval_flid(args):
    rows = []
    base = data.load_registries(args.data)
    for path in args.ckpts:
        ckpt = data.load_checkpoint(path)
        meta = ckpt.meta
        try:
            k, folds, fold_seed = meta["fold"], meta["folds"], meta["fold_seed"]
        except KeyError:
            raise data.CheckpointParseError(f"{path}: checkpoint has no fold metadata") from None
        ds = base.assign_folds(folds, fold_seed)
        train_regs, test_regs = ds.split(k)
        model = models.model_from_config(ckpt.model, ckpt.params)
        if getattr(model, "n", ds.n) != ds.n:
            raise data.CheckpointShapeError(f"{path}: model has n={model.n}, data has n={ds.n}")
        algo = algo_from_dict(ckpt.algorithm)
        # the baseline is a double greedy modular model with the trained link (sigmoid for soft greedy)
        link = algo.link if algo.name == "dgreedy" else LinkFunction("g3", 1.0)
        order = data.order_by_frequency(data.RegistryDataset(ds.n, train_regs))
        mod, malgo = experiments.modular_baseline(ds.n, train_regs, link, order)
        ll = experiments.heldout_log_likelihood(model, algo, test_regs, args.seed_value)
        ll_mod = experiments.heldout_log_likelihood(mod, malgo, test_regs, args.seed_value)
        r, sign = metrics.rll(ll, ll_mod)
        acc, mrr = metrics.fill_in_scores(test_regs, metrics.SetScorer(model, algo, seed=args.seed_value),
                                          args.normalized)
        acc_m, mrr_m = metrics.fill_in_scores(test_regs, metrics.SetScorer(mod, malgo), args.normalized)
        rows.append({"fold": k, "test_ll": ll, "modular_ll": ll_mod, "rll": r, "rll_sign": sign,
                     "acc": acc, "mrr": mrr, "modular_acc": acc_m, "modular_mrr": mrr_m})
    cols = ["fold", "test_ll", "modular_ll", "rll", "rll_sign", "acc", "mrr", "modular_acc", "modular_mrr"]
    _write_text(args.out, metrics.csv_text(rows, cols, _comment(args)))


def cmd_verify_guarantees(args):
    rows = []
    rng = np.random.default_rng(args.seed_value)
    seeds = rng.integers(0, 2**31, size=(args.instances, 2))
    for i, (ws, rs) in enumerate(seeds):
        f = CutFn(data.random_cut_weights(args.n, np.random.default_rng(int(ws))))
        cfg = oracle.GuaranteeConfig(args.eps_frac, args.theorem, args.runs, int(rs), relative=True)
        rep = oracle.verify_guarantee(f, cfg)
        rows.append({"instance": i, **rep.to_dict()})
    cols = ["instance", "theorem", "n", "opt", "epsilon", "t", "t_bound", "num_runs", "mean",
            "stderr", "bound", "passed"]
    _write_text(args.out, metrics.csv_text(rows, cols, _comment(args)))
    failed = [r["instance"] for r in rows if not r["passed"]]
    if failed:
        raise VerificationFailed(f"guarantee violated on instances {failed}")


def cmd_sweep_temperature(args):
    ds = data.load_maxcut_dataset(args.train)
    temps = experiments.parse_t_list(args.t_list)
    hist = experiments.sweep_temperature(ds, temps, args.lr, args.batch, args.epochs, args.seed_value)
    rows = [{"t": t, "epoch": e, "train_ll": ll} for t in temps for e, ll in hist[t]]
    _write_text(args.out, metrics.csv_text(rows, ["t", "epoch", "train_ll"], _comment(args)))


def _fmt_set(S):
    return "{" + " ".join(str(e) for e in sorted(S)) + "}"


def cmd_enumerate(args):
    if args.n > 10:
        raise UsageError("enumerate supports n <= 10")
    rng = np.random.default_rng(args.seed_value)
    if args.fn == "cut":
        f = CutFn(data.random_cut_weights(args.n, rng))
    elif args.fn == "flid":
        f = FlidFn(rng.normal(size=args.n), rng.random((args.n, 3)))
    else:
        f = ModularFn(rng.normal(size=args.n))
    if args.algo == "dgreedy":
        table = oracle.enumerate_dgreedy(f, _link(args))
    else:
        if args.k is None:
            raise UsageError("pgreedy enumeration needs --k")
        table = oracle.enumerate_pgreedy(f, args.k, args.t)
    rows = [{"set": _fmt_set(S), "size": len(S), "value": float(f.evaluate(S)), "probability": p}
            for S, p in sorted(table.items(), key=lambda kv: (len(kv[0]), sorted(kv[0])))]
    _write_text(args.out, metrics.csv_text(rows, ["set", "size", "value", "probability"], _comment(args)))


# ---------------------------------------------------------------------------

def _positive_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
    return v


def build_parser():
    p = _Parser(prog="subgrad", description="Differentiable greedy submodular maximization.")
    p.add_argument("--threads", type=int, default=os.cpu_count(),
                   help="worker threads (results do not depend on this)")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, func, help):
        sp = sub.add_parser(name, help=help)
        sp.set_defaults(func=func)
        sp.add_argument("--seed", type=int, default=None, help="random seed (default: $SUBGRAD_SEED or 0)")
        return sp

    sp = add("gen-maxcut", cmd_gen_maxcut, "generate a synthetic max-cut dataset")
    sp.add_argument("--m", type=int, required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--d", type=int, default=10)
    sp.add_argument("--k", type=int, default=5)
    sp.add_argument("--gamma", type=_positive_float, default=0.3)
    sp.add_argument("--out", required=True)

    sp = add("train-maxcut", cmd_train_maxcut, "learn a projection matrix")
    sp.add_argument("--train", required=True)
    sp.add_argument("--test")
    sp.add_argument("--link", default="g4", choices=["g3", "g4"])
    sp.add_argument("--t", type=_positive_float, default=0.125)
    sp.add_argument("--lr", type=float, default=0.02)
    sp.add_argument("--batch", type=int, default=16)
    sp.add_argument("--epochs", type=int, default=10)
    sp.add_argument("--out", required=True)
    sp.add_argument("--history", help="history CSV (default: <out>.history.csv)")

    sp = add("eval-maxcut", cmd_eval_maxcut, "cut ratios of learned and baseline projections")
    sp.add_argument("--ckpt", required=True)
    sp.add_argument("--test", required=True)
    sp.add_argument("--baselines", default="original,random")
    sp.add_argument("--mode", choices=["sample", "map"], default="sample")
    sp.add_argument("--samples", type=int, default=100)
    sp.add_argument("--out", default="-")

    sp = add("train-flid", cmd_train_flid, "train FLID models per cross-validation fold")
    sp.add_argument("--data", required=True)
    sp.add_argument("--algo", choices=["dgreedy", "pgreedy"], default="dgreedy")
    sp.add_argument("--D", type=int, choices=[10, 20], default=None,
                    help="latent dimensions (default: 10 for n <= 40, else 20)")
    sp.add_argument("--folds", type=int, default=10)
    sp.add_argument("--fold", type=int, default=None, help="train only this fold")
    sp.add_argument("--link", default="g3", choices=["g3", "g4"])
    sp.add_argument("--t", type=_positive_float, default=1.0)
    sp.add_argument("--pgreedy-mode", choices=["exact", "greedy", "random"], default="greedy")
    sp.add_argument("--samples", type=int, default=120, help="orderings for the random estimator")
    sp.add_argument("--lr", type=float, default=0.01)
    sp.add_argument("--lr-decay", type=float, default=0.9)
    sp.add_argument("--batch", type=int, default=1)
    sp.add_argument("--epochs", type=int, default=20)
    sp.add_argument("--out-dir", required=True)

    sp = add("eval-flid", cmd_eval_flid, "held-out likelihood, Acc and MRR against a modular baseline")
    sp.add_argument("--ckpts", nargs="+", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--normalized", action="store_true", help="divide per-registry sums by registry size")
    sp.add_argument("--out", default="-")

    sp = add("verify-guarantees", cmd_verify_guarantees, "Monte-Carlo check of the approximation bounds")
    sp.add_argument("--theorem", type=int, choices=[1, 2], required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--eps-frac", type=_positive_float, default=0.05)
    sp.add_argument("--runs", type=int, default=20000)
    sp.add_argument("--instances", type=int, default=20)
    sp.add_argument("--out", default="-")

    sp = add("sweep-temperature", cmd_sweep_temperature, "train at several temperatures")
    sp.add_argument("--train", required=True)
    sp.add_argument("--t-list", default="2^-5..2^3")
    sp.add_argument("--lr", type=float, default=0.02)
    sp.add_argument("--batch", type=int, default=16)
    sp.add_argument("--epochs", type=int, default=10)
    sp.add_argument("--out", default="-")

    sp = add("enumerate", cmd_enumerate, "exact output distribution on a small random instance")
    sp.add_argument("--algo", choices=["dgreedy", "pgreedy"], required=True)
    sp.add_argument("--fn", choices=["cut", "flid", "modular"], default="cut")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--link", default="g3", choices=["g1", "g2", "g3", "g4"])
    sp.add_argument("--t", type=_positive_float, default=1.0)
    sp.add_argument("--k", type=int)
    sp.add_argument("--out", default="-")
    return p


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        args.seed_value = _seed(args)
        args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except VerificationFailed as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except (data.DataError, oracle.InstanceTooLarge, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ad.ConfigError, oracle.PreconditionError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
