"""Command line interface: ``gembed <subcommand> [options]``.

Exit status is 0 on success, 1 on runtime errors and 2 on usage errors.
Reports are flat ``key=value`` lines on standard output. Output files are
written to a temporary name and renamed, so a failed run leaves no partial
files behind.
"""

from __future__ import annotations

import argparse
import contextlib
import logging
import os
import sys
import tempfile
import warnings

import numpy as np

from . import _config, graph, metrics, pipeline, plot, quality, sampling, spectral, synth, transduction
from .errors import GembedError, InvalidInput

log = logging.getLogger("gembed")


@contextlib.contextmanager
def atomic_write(path):
    """Open a temp file next to ``path``; rename it over ``path`` on success."""
    folder = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".gembed-", dir=folder)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(OSError):
            os.unlink(tmp)
        raise


def _emit(out, key, value):
    if isinstance(value, float):
        value = graph.format_float(value)
    out.write(f"{key}={value}\n")


def _read_labels(path):
    """Labels from a points CSV with a ``label`` column, or a one-column file."""
    pc = graph.read_points_csv(path)
    if pc.labels is not None:
        return pc.labels
    if pc.points.shape[1] != 1:
        raise InvalidInput(f"{path}: expected a 'label' column or a single column of labels")
    return graph.dense_labels(pc.points[:, 0].astype(np.int64))


def _labels_arg(args):
    src = args.labels or args.labels_from
    return None if src is None else _read_labels(src)


def _load_embedding(path):
    return graph.read_points_csv(path)


def _parse_num_samples(text):
    """``<int>`` or ``auto[:classes|:diameter|:log]``."""
    if text.startswith("auto"):
        _, _, rule = text.partition(":")
        rule = {"": "plain-log", "log": "plain-log"}.get(rule, rule)
        if rule not in ("plain-log", "classes", "diameter"):
            raise argparse.ArgumentTypeError(f"unknown sample rule {text!r}")
        return rule, None
    try:
        m = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer or auto[:rule], got {text!r}") from None
    if m < 1:
        raise argparse.ArgumentTypeError("sample count must be >= 1")
    return "explicit", m


def _kernel_arg(text):
    try:
        spectral.parse_kernel(text)
    except GembedError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    return text


# -- subcommands -------------------------------------------------------------


def cmd_embed(args, out):
    pc = graph.read_points_csv(args.input)
    rule, m = args.num_samples
    cfg = pipeline.PipelineConfig(
        k_neighbors=args.knn, kernel=args.kernel, diffusion_kernel=args.diffusion_kernel,
        laplacian=args.laplacian, order=args.order, sampling=args.sampling, sample_rule=rule,
        num_samples=m, n_classes=args.classes, embedder=args.embedder,
        external_command=args.external_command, external_timeout=args.timeout,
        diffusion=args.diffusion, mu=args.mu, dim=args.dim, seed=args.seed,
    )
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        E, res = pipeline.compressive_embed(pc, cfg)
    if args.svg and E.shape[1] != 2:
        plot.render_svg(E, None)  # raises the dimension error before any file is written
    with atomic_write(args.output) as fh:
        graph.write_points_csv(fh, E, prefix="e")
    if args.sketch_out:
        with atomic_write(args.sketch_out) as fh:
            labels = None if pc.labels is None else pc.labels[res.vertices]
            fh.write("vertex," + ",".join(f"x{j}" for j in range(res.sketch.shape[1]))
                     + (",label" if labels is not None else "") + "\n")
            for r, v in enumerate(res.vertices):
                vals = [str(int(v))] + [graph.format_float(x) for x in res.sketch[r]]
                if labels is not None:
                    vals.append(str(int(labels[r])))
                fh.write(",".join(vals) + "\n")
    if args.svg:
        with atomic_write(args.svg) as fh:
            fh.write(plot.render_svg(E, pc.labels))
    for key in ("k_neighbors", "kernel", "laplacian", "sampling", "sample_rule", "embedder",
                "diffusion", "dim", "seed"):
        _emit(out, key, getattr(cfg, key))
    for key, value in res.report.items():
        _emit(out, key, value)
    for step in pipeline.STEPS:
        _emit(out, f"time.{step}", round(res.timings[step], 6))
    _emit(out, "time.total", round(res.total_time, 6))
    for i, w in enumerate(caught):
        _emit(out, f"warning.{i}", str(w.message))
    return 0


def cmd_synth(args, out):
    spec = synth.SyntheticSpec(args.family, args.n, args.classes, args.morph, args.noise, args.seed)
    pc = synth.generate(spec)
    with atomic_write(args.output) as fh:
        graph.write_points_csv(fh, pc.points, pc.labels)
    _emit(out, "family", spec.family)
    _emit(out, "n_points", pc.n)
    _emit(out, "n_classes", spec.n_classes)
    _emit(out, "morph", float(spec.morph))
    return 0


def cmd_score(args, out):
    emb = _load_embedding(args.embedding)
    labels = _labels_arg(args)
    if labels is None:
        labels = emb.labels
    if labels is None:
        raise InvalidInput("no labels: pass --labels or --labels-from")
    le = quality.LabeledEmbedding.build(emb.points, labels, k=args.knn)
    wanted = [m.strip() for m in args.metrics.split(",") if m.strip()]
    for m in wanted:
        if m not in ("aci", "acc"):
            raise InvalidInput(f"unknown metric {m!r}")
    if "aci" in wanted:
        total, per = quality.aci(le, per_class=True)
        _emit(out, "aci", total)
        for c, v in enumerate(per):
            _emit(out, f"aci.class{c}", float(v))
    if "acc" in wanted:
        L = quality.embedding_laplacian(le)
        filt = quality.default_acc_filter(L, args.acc_tau_scale)
        if args.acc_mode == "exact":
            total, per = quality.acc_exact(L, filt, le)
        else:
            total, per = quality.acc_randomized(L, filt, le, args.pairs, seed=args.seed)
        _emit(out, "acc", total)
        _emit(out, "acc_mode", args.acc_mode)
        for c, v in enumerate(per):
            _emit(out, f"acc.class{c}", float(v))
    return 0


def _graph_laplacian(args):
    if args.graph:
        G = graph.read_edge_list(args.graph)
    else:
        pc = graph.read_points_csv(args.input)
        G = graph.build_knn_graph(pc, args.knn)
    return graph.laplacian(G, args.laplacian)


def _read_pairs(path):
    pairs = []
    with open(path) as fh:
        for ln in fh:
            tok = ln.split()
            if not tok or tok[0].startswith("#"):
                continue
            if len(tok) != 2:
                raise InvalidInput(f"{path}: expected 'i j' lines, got {ln.strip()!r}")
            pairs.append((int(tok[0]), int(tok[1])))
    return pairs


def cmd_dist(args, out):
    L = _graph_laplacian(args)
    kernel = spectral.parse_kernel(args.kernel)
    filt = kernel if args.mode == "dense" else spectral.make_filter(L, kernel, args.order)
    pairs = _read_pairs(args.pairs)
    fn = metrics.lkd if args.metric == "lkd" else metrics.kdd
    lines = [f"{i} {j} {graph.format_float(fn(L, filt, i, j, mode=args.mode))}\n" for i, j in pairs]
    if args.output:
        with atomic_write(args.output) as fh:
            fh.writelines(lines)
    else:
        out.writelines(lines)
    return 0


def cmd_bounds(args, out):
    if args.theorem == 3:
        if not (args.graph or args.input) or args.kernel is None or args.rank is None:
            raise InvalidInput("theorem 3 needs --graph/--input, --kernel and --rank")
        L = _graph_laplacian(args)
        kernel = spectral.parse_kernel(args.kernel)
        lam, _ = spectral.dense_spectrum(L)
        trunc = spectral.low_rank_truncate(kernel, args.rank, lam)
        inputs = sampling.BoundInputs(args.delta, args.eps, args.rank)
        M, offsets = sampling.bound_samples_node_lowrank(inputs, L, kernel, trunc)
        _emit(out, "M", M)
        _emit(out, "offset_max", float(offsets.max()))
        _emit(out, "offset_mean", float(offsets.mean()))
        return 0
    if args.k is None:
        raise InvalidInput("--k is required")
    inputs = sampling.BoundInputs(args.delta, args.eps, args.k, ratio2=args.ratio2, a_factor=args.a)
    if args.theorem == 1:
        M = sampling.bound_samples_embedding(inputs)
    else:
        M = sampling.bound_samples_node(inputs)
    _emit(out, "M", M)
    return 0


def cmd_plot(args, out):
    emb = _load_embedding(args.embedding)
    labels = _labels_arg(args)
    if labels is None:
        labels = emb.labels
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        text = plot.render_svg(emb.points, labels)
    with atomic_write(args.output) as fh:
        fh.write(text)
    _emit(out, "points", emb.n)
    for i, w in enumerate(caught):
        _emit(out, f"warning.{i}", str(w.message))
    return 0


# -- parser ------------------------------------------------------------------


def _add_graph_opts(p, for_points=True):
    src = p.add_mutually_exclusive_group()
    src.add_argument("--input", help="points CSV; a kNN graph is built on it")
    src.add_argument("--graph", help="edge list file ('N E' header, then 'i j w' lines)")
    p.add_argument("--knn", type=int, default=10, help="neighbours per point (default 10)")
    p.add_argument("--laplacian", choices=("combinatorial", "normalized"), default="combinatorial")


def _add_labels(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--labels", help="labels CSV (one column, optional header)")
    g.add_argument("--labels-from", dest="labels_from", help="points CSV whose 'label' column is used")


def build_parser():
    parser = argparse.ArgumentParser(prog="gembed", description="Compressive graph embedding.")
    parser.add_argument("--threads", type=int, default=None,
                        help="cap library parallelism (0 = one per CPU; env GEMBED_THREADS)")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("embed", help="embed a point cloud from a sampled sketch")
    p.add_argument("--input", required=True, help="points CSV (optional final 'label' column)")
    p.add_argument("--output", "-o", required=True, help="embedding CSV (header e0,e1,...)")
    p.add_argument("--knn", type=int, default=10, help="neighbours of the data graph (default 10)")
    p.add_argument("--kernel", type=_kernel_arg, default="heat:tau=5",
                   help="sampling/diffusion kernel, e.g. heat:tau=5, window:bmax=0.2,a=1, rect:cutoff=0.5")
    p.add_argument("--diffusion-kernel", dest="diffusion_kernel", type=_kernel_arg, default=None,
                   help="separate kernel for the diffusion step (default: --kernel)")
    p.add_argument("--laplacian", choices=("combinatorial", "normalized"), default="normalized")
    p.add_argument("--order", type=int, default=spectral.DEFAULT_ORDER, help="Chebyshev order")
    p.add_argument("--sampling", choices=("uniform", "adapted"), default="adapted")
    p.add_argument("--num-samples", dest="num_samples", type=_parse_num_samples, default="auto:classes",
                   help="M, or auto[:classes|:diameter|:log] (default auto:classes)")
    p.add_argument("--classes", type=int, default=None,
                   help="class count for auto:classes (default: labels of the input)")
    p.add_argument("--embedder", choices=pipeline.EMBEDDERS, default="eigenmaps")
    p.add_argument("--external-command", dest="external_command", default=None,
                   help="command run as '<cmd> <in.csv> <out.csv> <d>' for --embedder external")
    p.add_argument("--timeout", type=float, default=pipeline.BRIDGE_TIMEOUT,
                   help="external embedder timeout in seconds")
    p.add_argument("--diffusion", choices=transduction.VARIANTS, default="chd")
    p.add_argument("--mu", type=float, default=1.0, help="ridge / smoothness weight")
    p.add_argument("--dim", type=int, default=2, help="embedding dimension")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sketch-out", dest="sketch_out", default=None, help="write the sketch rows here")
    p.add_argument("--svg", default=None, help="also write an SVG scatter plot (d = 2)")
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("synth", help="generate a morphing synthetic dataset")
    p.add_argument("--family", choices=synth.FAMILIES, required=True)
    p.add_argument("--classes", type=int, default=4)
    p.add_argument("--n", type=int, default=2000, help="number of points")
    p.add_argument("--morph", type=float, default=0.0, help="deformation parameter in [0, 1]")
    p.add_argument("--noise", type=float, default=0.01, help="gaussian noise std")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", "-o", required=True, help="points CSV with a final label column")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("score", help="ACI / ACC of a labeled embedding")
    p.add_argument("--embedding", required=True, help="embedding CSV")
    _add_labels(p)
    p.add_argument("--metrics", default="aci,acc", help="comma list of aci, acc")
    p.add_argument("--acc-mode", dest="acc_mode", choices=("exact", "random"), default="exact")
    p.add_argument("--pairs", type=int, default=quality.DEFAULT_PAIRS, help="pairs per point (random ACC)")
    p.add_argument("--acc-tau-scale", dest="acc_tau_scale", type=float, default=quality.ACC_TAU_SCALE,
                   help="ACC heat kernel tau = scale / lambda_max")
    p.add_argument("--knn", type=int, default=quality.EMBED_K, help="neighbours of the embedding graph")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("dist", help="LKD / KDD between vertex pairs")
    _add_graph_opts(p)
    p.add_argument("--kernel", type=_kernel_arg, default="heat:tau=1")
    p.add_argument("--metric", choices=("lkd", "kdd"), required=True)
    p.add_argument("--pairs", required=True, help="file of 'i j' lines")
    p.add_argument("--mode", choices=metrics.MODES, default="chebyshev")
    p.add_argument("--order", type=int, default=spectral.ORACLE_ORDER, help="Chebyshev order")
    p.add_argument("--output", "-o", default=None, help="write 'i j d' lines here (default stdout)")
    p.set_defaults(func=cmd_dist)

    p = sub.add_parser("bounds", help="sample counts guaranteed by the sampling bounds")
    p.add_argument("--theorem", type=int, choices=(1, 2, 3), required=True,
                   help="1: embedding energy, 2: per-node energy, 3: per-node with low-rank kernel")
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--k", type=int, default=None, help="kernel rank")
    p.add_argument("--ratio2", type=float, default=None, help="||g||_2^2 / ||g||_inf^2 (default k)")
    p.add_argument("--a", type=float, default=None, help="node factor (default k)")
    _add_graph_opts(p)
    p.add_argument("--kernel", type=_kernel_arg, default=None, help="kernel for --theorem 3")
    p.add_argument("--rank", type=int, default=None, help="truncation rank for --theorem 3")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("plot", help="SVG scatter plot of a 2-D embedding")
    p.add_argument("--embedding", required=True)
    _add_labels(p)
    p.add_argument("--output", "-o", required=True, help="SVG file")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None, out=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    out = sys.stdout if out is None else out
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    if args.threads is not None:
        if args.threads < 0:
            parser.error("--threads must be >= 0")
        _config.set_num_threads(args.threads)
    try:
        return args.func(args, out)
    except (GembedError, OSError, ValueError) as exc:
        print(f"gembed {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
