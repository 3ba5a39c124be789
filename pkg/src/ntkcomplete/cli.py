"""Command-line interface.

Subcommands: precompute, expand, inpaint, heatmap, complete, metrics.
Exit codes: 0 success, 2 usage error, 3 numeric failure, 4 format error.

Heavy imports happen inside main() so --threads can cap the BLAS pools
before numpy initializes them.
"""

from __future__ import annotations

import argparse
import os
import sys
import time


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ntkcomplete",
        description="Matrix completion and image inpainting with exact "
                    "infinite-width network kernels.")
    parser.add_argument("--threads", type=int, default=0,
                        help="cap BLAS worker threads (0 = library default)")
    parser.add_argument("--seed", type=int, default=0, help="global random seed")
    sub = parser.add_subparsers(dest="command", required=True)

    pre = sub.add_parser("precompute", help="build a kernel for an architecture")
    pre.add_argument("--arch", required=True, help="architecture text file")
    pre.add_argument("--prior", required=True,
                     help="prior spec: analytic[:rho=R] | uniform:c=C[,high=H] | "
                          "meshgrid")
    pre.add_argument("--out", required=True, help="output .ntkc path")

    exp = sub.add_parser("expand", help="expand a base kernel to a higher resolution")
    exp.add_argument("--in", dest="input", required=True, help="base kernel file")
    exp.add_argument("--p2", type=int, required=True,
                     help="target resolution exponent (resolution 2^p2)")
    exp.add_argument("--out", required=True)

    inp = sub.add_parser("inpaint", help="fill masked pixels of an image")
    inp.add_argument("--image", required=True, help="input PNG (gray or RGB)")
    inp.add_argument("--mask", required=True,
                     help="mask PNG: zero pixels are missing")
    inp.add_argument("--kernel", required=True, help="precomputed kernel file")
    inp.add_argument("--out", required=True, help="output PNG")
    _solver_flags(inp, default_epochs=10, default_scale=0.5)

    hm = sub.add_parser("heatmap", help="export one kernel row as a PNG")
    hm.add_argument("--kernel", required=True)
    hm.add_argument("--i", type=int, required=True)
    hm.add_argument("--j", type=int, required=True)
    hm.add_argument("--percentile", type=float, default=0.0,
                    help="zero out values below this percentile [0, 100)")
    hm.add_argument("--out", required=True)

    comp = sub.add_parser("complete", help="complete a sparsely observed matrix")
    comp.add_argument("--obs", required=True,
                      help="observations CSV: row,col,value triples with header, "
                           "or a dense matrix with empty/NaN holes (see --obs-format)")
    comp.add_argument("--obs-format", choices=("triples", "dense"), default="triples")
    comp.add_argument("--shape", default=None,
                      help="matrix shape MxN (triples mode; default from indices)")
    comp.add_argument("--prior", required=True,
                      help="'identity' or a dense CSV of column embeddings")
    comp.add_argument("--augment-identity", type=float, default=None, metavar="S",
                      help="append S*I below the prior before normalization")
    comp.add_argument("--depth", type=int, default=1)
    comp.add_argument("--activation", default="relu",
                      help="relu | linear | leaky_relu:SLOPE")
    comp.add_argument("--out", required=True, help="output dense CSV")
    _solver_flags(comp, default_epochs=50, default_scale=1.0)

    met = sub.add_parser("metrics", help="print a metric table for two files")
    met.add_argument("--pred", required=True, help="prediction CSV or PNG")
    met.add_argument("--truth", required=True, help="ground-truth CSV or PNG")
    return parser


def _solver_flags(sub, default_epochs: int, default_scale: float) -> None:
    sub.add_argument("--mode", choices=("direct", "iterative"), default="direct")
    sub.add_argument("--ridge", default="none",
                     help="none | trace_scaled:C | absolute:LAMBDA")
    sub.add_argument("--epochs", type=int, default=default_epochs,
                     help="iterative solver epochs")
    sub.add_argument("--kernel-scale", type=float, default=default_scale)


def _parse_ridge(text: str) -> tuple[str, float]:
    if text == "none":
        return "none", 0.0
    kind, _, value = text.partition(":")
    if kind not in ("trace_scaled", "absolute") or not value:
        raise ValueError(f"bad ridge spec {text!r}; "
                         "use none, trace_scaled:C, or absolute:LAMBDA")
    return kind, float(value)


def _parse_activation(text: str):
    from .activations import Activation
    kind, _, slope = text.partition(":")
    if kind == "relu":
        return Activation.relu()
    if kind == "linear":
        return Activation.linear()
    if kind == "leaky_relu":
        if not slope:
            raise ValueError("leaky_relu needs a slope, e.g. leaky_relu:0.05")
        return Activation.leaky_relu(float(slope))
    raise ValueError(f"unknown activation {text!r}")


def _parse_prior_spec(text: str, shape, seed: int):
    from .priors import analytic_uniform_prior, meshgrid_prior, uniform_random_prior
    name, _, argtext = text.partition(":")
    args = {}
    if argtext:
        for part in argtext.split(","):
            key, _, value = part.partition("=")
            if not value:
                raise ValueError(f"bad prior argument {part!r}")
            args[key] = float(value)
    m, n = shape
    if name == "analytic":
        return analytic_uniform_prior(m, n, rho=args.pop("rho", 0.75))
    if name == "uniform":
        c = int(args.pop("c", 64))
        return uniform_random_prior(c, m, n, high=args.pop("high", 0.1), seed=seed)
    if name == "meshgrid":
        return meshgrid_prior(m, n)
    raise ValueError(f"unknown prior spec {text!r}")


def _solve_options(args):
    from .solve import SolveOptions
    ridge, value = _parse_ridge(args.ridge)
    return SolveOptions(mode=args.mode, ridge=ridge, ridge_value=value,
                        kernel_scale=args.kernel_scale, epochs=args.epochs,
                        seed=args.seed)


def _report_resources(label: str, started: float) -> None:
    try:
        import resource
        peak_mb = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss / 1024.0
        mem = f", peak rss {peak_mb:.0f} MB"
    except ImportError:
        mem = ""
    print(f"# {label}: {time.time() - started:.2f}s{mem}", file=sys.stderr)


# ---------------------------------------------------------------------------
# subcommand bodies


def _cmd_precompute(args) -> int:
    from .cntk import ArchSpec, build_cntk
    from .kernel_io import FLAG_EXPANDABLE, FullKernel, save_kernel

    started = time.time()
    arch = ArchSpec.from_file(args.arch)
    prior = _parse_prior_spec(args.prior, arch.input_shape, args.seed)
    tensor = build_cntk(arch, prior)
    downs, nearest, bilinear = arch.sampling_counts()
    m, n = arch.input_shape
    expandable = (prior.is_analytic and bilinear == 0 and downs == nearest
                  and m == n == 2 ** (downs + 1))
    kernel = FullKernel(tensor, s=downs,
                        rho=prior.rho if prior.is_analytic else float("nan"),
                        arch_hash=arch.arch_hash())
    save_kernel(args.out, kernel, extra_flags=FLAG_EXPANDABLE if expandable else 0)
    _report_resources(f"precompute {m}x{n}", started)
    return 0


def _cmd_expand(args) -> int:
    from .errors import KernelFormatError
    from .expand import expand_kernel
    from .kernel_io import FLAG_EXPANDABLE, FullKernel, load_kernel, save_kernel

    started = time.time()
    loaded = load_kernel(args.input)
    if not isinstance(loaded, FullKernel):
        raise KernelFormatError(f"{args.input}: already a compact kernel")
    if not loaded.meta.get("expandable"):
        raise KernelFormatError(
            f"{args.input}: kernel was not built under the expansion "
            "hypotheses (analytic prior, equal down/up counts, no bilinear, "
            "base resolution 2^(s+1))")
    compact = expand_kernel(loaded.tensor, loaded.s, 2 ** args.p2,
                            rho=loaded.rho, arch_hash=loaded.arch_hash)
    save_kernel(args.out, compact)
    _report_resources(f"expand to {2 ** args.p2}", started)
    return 0


def _cmd_inpaint(args) -> int:
    from .images import MaskedImage, inpaint, load_image, load_mask, save_image
    from .kernel_io import load_kernel
    from .solve import SolveReport

    started = time.time()
    pixels = load_image(args.image)
    mask = load_mask(args.mask)
    kernel = load_kernel(args.kernel)
    report = SolveReport()
    result = inpaint(MaskedImage(pixels, mask), kernel, _solve_options(args), report)
    save_image(args.out, result)
    print(report.as_text(), file=sys.stderr)
    _report_resources("inpaint", started)
    return 0


def _cmd_heatmap(args) -> int:
    from .images import heatmap, save_image
    from .kernel_io import load_kernel

    kernel = load_kernel(args.kernel)
    save_image(args.out, heatmap(kernel, args.i, args.j, args.percentile))
    return 0


def _cmd_complete(args) -> int:
    from .fcntk import ObservationSet, complete_matrix
    from .priors import identity_prior, load_dense_csv, method_output_prior, save_dense_csv

    started = time.time()
    if args.obs_format == "dense":
        obs = ObservationSet.from_dense(load_dense_csv(args.obs))
    else:
        shape = None
        if args.shape:
            m, n = args.shape.lower().split("x")
            shape = (int(m), int(n))
        obs = ObservationSet.from_csv(args.obs, shape)
    if args.prior == "identity":
        if args.augment_identity is not None:
            raise ValueError("--augment-identity applies to CSV priors only")
        prior = identity_prior(obs.shape[1])
    else:
        prior = method_output_prior(args.prior, augment=args.augment_identity)
    completed = complete_matrix(obs, prior, args.depth,
                                _parse_activation(args.activation),
                                _solve_options(args))
    save_dense_csv(args.out, completed)
    _report_resources(f"complete {obs.shape[0]}x{obs.shape[1]}", started)
    return 0


def _cmd_metrics(args) -> int:
    import numpy as np

    from . import metrics as M
    from .images import load_image
    from .priors import load_dense_csv

    def load(path):
        if str(path).lower().endswith(".png"):
            return load_image(path), True
        return load_dense_csv(path), False

    pred, pred_img = load(args.pred)
    truth, truth_img = load(args.truth)
    if pred_img != truth_img:
        raise ValueError("pred and truth must both be CSVs or both be PNGs")
    rows = []
    if pred_img:
        rows.append(("psnr_db", M.psnr(pred, truth)))
        scores = [M.ssim(pc, tc) for pc, tc in zip(pred, truth)]
        rows.append(("ssim", float(np.mean(scores))))
    else:
        rows.append(("pearson_r", M.pearson_r_paper(pred, truth)))
        rows.append(("mean_r2", M.mean_r2(pred, truth)))
        rows.append(("mean_cosine", M.mean_cosine(pred, truth)))
    for name, value in rows:
        print(f"{name}\t{value:.10g}")
    return 0


_COMMANDS = {
    "precompute": _cmd_precompute,
    "expand": _cmd_expand,
    "inpaint": _cmd_inpaint,
    "heatmap": _cmd_heatmap,
    "complete": _cmd_complete,
    "metrics": _cmd_metrics,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads and args.threads > 0:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
                    "NUMEXPR_NUM_THREADS", "VECLIB_MAXIMUM_THREADS"):
            os.environ[var] = str(args.threads)

    from .errors import (DegeneratePriorError, DomainError, KernelFormatError,
                         ShapeError, SingularKernelError, SolverDivergenceError)

    try:
        return _COMMANDS[args.command](args)
    except (SingularKernelError, SolverDivergenceError, DegeneratePriorError,
            DomainError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ShapeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (KernelFormatError, ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
