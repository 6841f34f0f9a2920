"""Command-line entry point: ``subbitsnn <command> ...``.

All tables go to stdout as comma-separated text with a fixed header row;
diagnostics go to stderr. Exit status is 0 only on full success.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import costmodel, pack, weights_io
from .binarize import is_compressible, sign_binarize
from .codebook import NotSubBitError, cluster_stats, cluster_stats_csv, sample_codebook
from .engine import InferenceLayer, InferenceNet, reuse_counters
from .sidecar import read_inference_params, sidecar_path


class CliError(Exception):
    pass


def _read_bytes(path: str) -> bytes:
    p = Path(path)
    if not p.is_file():
        raise CliError(f"no such file: {path}")
    return p.read_bytes()


def _load_weights(path: str):
    try:
        return weights_io.loads(_read_bytes(path))
    except weights_io.WeightsFormatError as exc:
        raise CliError(f"{path}: {exc}") from exc


def _load_model(path: str):
    try:
        return pack.unpack(_read_bytes(path))
    except pack.PackError as exc:
        raise CliError(f"{path}: {exc}") from exc


def _shape_arg(text: str) -> tuple[int, ...]:
    try:
        dims = tuple(int(v) for v in text.replace("x", ",").split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad shape {text!r}; use C,H,W or B,C,H,W")
    if len(dims) not in (3, 4) or any(d < 1 for d in dims):
        raise argparse.ArgumentTypeError(f"bad shape {text!r}; use C,H,W or B,C,H,W")
    return dims


# ---------------------------------------------------------------- commands


def cmd_quantize(args) -> None:
    from .osquant import quantize_layer

    layers = _load_weights(args.weights)
    gamma = None if args.baseline else args.gamma
    for w in layers:
        if is_compressible(w.shape) and not 1 <= args.eta < w.shape[2] * w.shape[3]:
            k2 = w.shape[2] * w.shape[3]
            raise CliError(f"not sub-bit: eta={args.eta} must satisfy 1 <= eta < {k2}")
    out_layers = []
    print("layer,c_out,c_in,k,eta,bits_per_weight,inclusive_bits_per_weight,asymptotic_bits_per_weight,outlier_frac")
    for li, w in enumerate(layers):
        if not is_compressible(w.shape):
            print(f"layer {li}: shape {w.shape} is not a square kxk kernel with k > 1; left uncompressed", file=sys.stderr)
            continue
        c_out, c_in, k, _ = w.shape
        cb = sample_codebook(k, k, args.eta, args.seed + li)
        lq = quantize_layer(w, cb, gamma)
        ql = pack.QuantizedLayer(cb, lq.index, sign_binarize(w).alpha)
        out_layers.append(ql)
        ratio = pack.compression_ratio(ql)
        frac = lq.outlier_fraction if gamma is not None else _occurrence(w, args.gamma)
        print(
            f"{li},{c_out},{c_in},{k},{args.eta},{ratio.exact:.6f},{ratio.inclusive:.6f},"
            f"{args.eta / (k * k):.6f},{frac:.6f}"
        )
    if not out_layers:
        raise CliError("no compressible layers in input")
    pack.save(args.out, out_layers)
    print(f"wrote {args.out}", file=sys.stderr)


def _occurrence(w, gamma):
    from .osquant import outlier_occurrence

    return outlier_occurrence(w, gamma)


def cmd_pack(args) -> None:
    data = _read_bytes(args.model)
    try:
        layers = pack.unpack(data)
        if args.dump_header:
            print(pack.dump_header(data))
    except pack.PackError as exc:
        raise CliError(f"{args.model}: {exc}") from exc
    if args.out:
        pack.save(args.out, layers)
        print(f"wrote {args.out}", file=sys.stderr)
    if not args.dump_header and not args.out:
        print(f"{args.model}: ok, {len(layers)} layers")


def cmd_analyze(args) -> None:
    from .osquant import outlier_occurrence, outlier_rows

    layers = _load_weights(args.weights)
    stats = {}
    occurrence = []
    rows = []
    for li, w in enumerate(layers):
        if not is_compressible(w.shape):
            continue
        name = str(li)
        stats[name] = cluster_stats(sign_binarize(w))
        occurrence.append(f"{name},{args.gamma},{outlier_occurrence(w, args.gamma):.6f}")
        rows.extend(outlier_rows(name, w, args.gamma))
    if not stats:
        raise CliError("no compressible layers in input")
    sys.stdout.write("# cluster_stats\n" + cluster_stats_csv(stats))
    print()
    print("# outlier_occurrence")
    print("layer,gamma,fraction")
    print("\n".join(occurrence))
    print()
    print("# outliers")
    print("layer,kernel_index,i,j,value,omega")
    if rows:
        print("\n".join(rows))


def cmd_report(args) -> None:
    model = _load_model(args.model)
    if not 0.0 <= args.fr <= 1.0:
        raise CliError("--fr must lie in [0, 1]")
    if args.T < 1:
        raise CliError("--T must be at least 1")
    shape = args.input_shape if len(args.input_shape) == 4 else (1,) + args.input_shape
    b, _, h, w = shape
    try:
        energy = costmodel.energy_estimate(model, shape, args.T, args.fr)
        from .engine import count_ops

        ops = count_ops(model, shape, args.T, args.fr)
    except ValueError as exc:
        raise CliError(str(exc)) from exc

    print("# traffic")
    sys.stdout.write(costmodel.traffic_csv(costmodel.traffic_report(model)))
    print(
        f"# reference: measured FPGA DRAM access reduction {costmodel.FPGA_REFERENCE_REDUCTION}x "
        "(not reproduced by the bit-count model)"
    )
    print()
    print("# ops")
    print("layer,flops,sops,pattern_evals_binary,pattern_evals_subbit,adds,lut_hits")
    for li, q in enumerate(model):
        c = reuse_counters(q, b, h, w)
        print(f"{li},{ops.flops[li]},{float(ops.sops[li])!r},{c.adds * args.T},{c.multiplies * args.T},{c.adds * args.T},{c.lut_hits * args.T}")
    print()
    print("# energy")
    print("e_mac_pj,e_ac_pj,first_layer_flops,sops,mac_energy_pj,sop_energy_pj,total_pj")
    print(
        f"{energy.e_mac_pj},{energy.e_ac_pj},{energy.first_layer_flops},{float(energy.sops)!r},"
        f"{float(energy.mac_energy_pj)!r},{float(energy.sop_energy_pj)!r},{float(energy.total_pj)!r}"
    )


def _load_input(path: str, T: int) -> np.ndarray:
    p = Path(path)
    if not p.is_file():
        raise CliError(f"no such file: {path}")
    try:
        x = np.load(p, allow_pickle=False)
    except ValueError as exc:
        raise CliError(f"{path}: not a .npy array ({exc})") from exc
    if x.ndim == 4:
        x = np.broadcast_to(x, (T,) + x.shape)
    elif x.ndim == 5:
        if x.shape[0] != T:
            raise CliError(f"{path}: input has {x.shape[0]} timesteps but --T is {T}")
    else:
        raise CliError(f"{path}: expected [b,c,h,w] or [T,b,c,h,w] spikes, got shape {x.shape}")
    if not np.isin(x, (0, 1)).all():
        raise CliError(f"{path}: spike input must contain only 0 and 1")
    return np.ascontiguousarray(x, dtype=np.uint8)


def cmd_infer(args) -> None:
    model = _load_model(args.model)
    x = _load_input(args.input, args.T)
    side = sidecar_path(args.model)
    params = read_inference_params(side) if side.is_file() else None
    folded = params.folded if params else None
    layers = [InferenceLayer(q, *(folded[i] if folded else (None, None))) for i, q in enumerate(model)]
    if params:
        net = InferenceNet(layers, params.lif, params.readout_weight, params.readout_bias)
    else:
        net = InferenceNet(layers)
    try:
        logits, counters, _ = net.run(x, reference=args.reference)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    print("sample," + ",".join(f"logit{j}" for j in range(logits.shape[1])))
    for i, row in enumerate(logits):
        print(f"{i}," + ",".join(repr(float(v)) for v in row))
    print()
    print("multiplies,adds,lut_hits")
    print(f"{counters.multiplies},{counters.adds},{counters.lut_hits}")


def cmd_train_toy(args) -> None:
    from . import train as tr

    cfg_path = Path(args.config)
    if not cfg_path.is_file():
        raise CliError(f"no such file: {args.config}")
    try:
        cfg = json.loads(cfg_path.read_text())
    except json.JSONDecodeError as exc:
        raise CliError(f"{args.config}: invalid JSON ({exc})") from exc
    base = cfg_path.parent
    try:
        spec = tr.ToyNetSpec(**cfg["net"])
    except (KeyError, TypeError, ValueError) as exc:
        raise CliError(f"{args.config}: bad net config ({exc})") from exc
    if spec.input_shape[0] != 1 or spec.input_shape[1] != spec.input_shape[2] or spec.n_classes != 2:
        raise CliError("the toy stripes task needs input_shape [1, S, S] and n_classes 2")
    tcfg_raw = dict(cfg.get("train", {}))
    gamma = tcfg_raw.get("gamma", 1.5)
    if isinstance(gamma, str):
        gamma = math.inf if gamma in ("inf", "disabled") else float(gamma)
    if tcfg_raw.pop("baseline", False):
        gamma = None
    tcfg_raw["gamma"] = gamma
    if "lambda" in tcfg_raw:
        tcfg_raw["lam"] = tcfg_raw.pop("lambda")
    if tcfg_raw.get("teacher"):
        tcfg_raw["teacher"] = str(base / tcfg_raw["teacher"])
    if tcfg_raw.get("pairing"):
        tcfg_raw["pairing"] = [tuple(p) for p in tcfg_raw["pairing"]]
    tcfg = tr.TrainConfig(**tcfg_raw)
    data_cfg = cfg.get("data", {})
    dataset = tr.stripes_dataset(
        data_cfg.get("samples", 200), spec.T, spec.input_shape[1], data_cfg.get("seed", 0), data_cfg.get("noise", 0.1)
    )
    out = cfg.get("out", {})
    metrics_path = base / out.get("metrics", "metrics.csv")
    model_path = base / out.get("model", "toy.s2nn")
    binary = cfg.get("binary", True)
    try:
        net, log = tr.train_toy(spec, tcfg, dataset, binary=binary)
    except tr.TrainingDiverged as exc:
        raise CliError(str(exc)) from exc
    text = tr.metrics_csv(log)
    metrics_path.write_text(text)
    sys.stdout.write(text)
    folded = tr.fold_batchnorm(net, dataset[0], tcfg.gamma) if binary else None
    if binary:
        pack.save(model_path, tr.export_layers(net, tcfg.gamma))
        print(f"wrote {model_path}", file=sys.stderr)
    tr.save_checkpoint(net, tr.sidecar_path(model_path), folded, tcfg.gamma)
    print(f"wrote {tr.sidecar_path(model_path)} and {metrics_path}", file=sys.stderr)


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="subbitsnn", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("quantize", help="compress a dense-weight file to .s2nn")
    p.add_argument("--weights", required=True)
    p.add_argument("--eta", type=int, required=True)
    p.add_argument("--gamma", type=float, default=1.5)
    p.add_argument("--baseline", action="store_true", help="plain nearest-codeword assignment")
    p.add_argument("--seed", type=int, default=0, help="codebook sampling seed")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_quantize)

    p = sub.add_parser("pack", help="validate, re-encode or describe an .s2nn file")
    p.add_argument("--model", required=True)
    p.add_argument("--dump-header", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_pack)

    p = sub.add_parser("infer", help="run a packed model on spike input")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True, help=".npy spikes [T,b,c,h,w] or [b,c,h,w]")
    p.add_argument("--T", type=int, required=True)
    p.add_argument("--reference", action="store_true", help="use the 1-bit reference convolution")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("analyze", help="codeword clustering and outlier statistics")
    p.add_argument("--weights", required=True)
    p.add_argument("--gamma", type=float, default=1.5)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("report", help="traffic, op-count and energy tables")
    p.add_argument("--model", required=True)
    p.add_argument("--input-shape", type=_shape_arg, required=True)
    p.add_argument("--T", type=int, required=True)
    p.add_argument("--fr", type=float, required=True)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("train-toy", help="train a toy sub-bit SCNN from a JSON config")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_train_toy)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (CliError, NotSubBitError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except BrokenPipeError:
        # output piped into e.g. ``head``; silence the flush at interpreter exit
        sys.stdout = open(os.devnull, "w")
    return 0


if __name__ == "__main__":
    sys.exit(main())
