"""Command-line front end: wires `.nad` datasets through every diagnostic.

Exit codes: 0 success, 2 input-contract violation, 3 empty input,
4 numerical failure.  Every run writes a manifest JSON (command, arguments,
seeds, inputs, and a content hash per output) next to its primary output;
re-running with the same inputs and seeds reproduces identical hashes.
``SSL_VIT_LENS_THREADS`` caps the forward-pass worker count.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from . import attention as attn_mod
from . import images, objectives, probe, representation, spectral, svg, vit
from .bundle import ActivationBundle, ModelConfig, read_bundle_file, write_bundle_file
from .errors import (
    EmptyRun,
    InvalidKernel,
    MixedBundles,
    NumericalError,
    VitLensError,
)
from .nadf import read_nadf_file, write_nadf_file


def _thread_count() -> int:
    cap = os.environ.get("SSL_VIT_LENS_THREADS")
    if cap:
        return max(1, int(cap))
    return min(8, os.cpu_count() or 1)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_manifest(primary_output: Path, args: argparse.Namespace, outputs: list[Path]) -> None:
    manifest = {
        "command": args.command,
        "arguments": {k: v for k, v in sorted(vars(args).items())
                      if k not in ("func",) and not callable(v)},
        "seeds": {k: v for k, v in vars(args).items() if "seed" in k},
        "inputs": [str(getattr(args, k)) for k in ("input", "images", "weights", "labels")
                   if getattr(args, k, None)],
        "tool_version": __version__,
        "outputs": {str(p): _sha256(p) for p in outputs if p.exists()},
    }
    path = primary_output.with_suffix(primary_output.suffix + ".manifest.json")
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")


def _load_dataset(directory: Path) -> list[tuple[str, ActivationBundle]]:
    paths = sorted(directory.glob("*.nad"))
    if not paths:
        raise EmptyRun(f"no .nad files in {directory}")
    bundles = [(p.name, read_bundle_file(p)) for p in paths]
    cfg = bundles[0][1].config
    for name, b in bundles:
        if b.config != cfg:
            raise MixedBundles(f"{name} disagrees with the dataset model config")
    return bundles


def _load_labels(path: Path, names: list[str]) -> np.ndarray:
    table = {}
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0] in ("filename", ""):
                continue
            table[row[0]] = int(row[1])
    try:
        return np.array([table[n] for n in names], dtype=int)
    except KeyError as exc:
        raise MixedBundles(f"labels.csv missing entry for {exc}") from exc


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _config_from_args(args) -> ModelConfig:
    return ModelConfig(
        depth=args.depth, heads=args.heads, dim=args.dim,
        patch_size=args.patch, image_size=args.image_size,
        mlp_ratio=args.mlp_ratio, use_cls=args.cls, channels=args.channels,
    )


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--depth", type=int, default=4)
    p.add_argument("--heads", type=int, default=2)
    p.add_argument("--dim", type=int, default=32)
    p.add_argument("--patch", type=int, default=4)
    p.add_argument("--image-size", type=int, default=32)
    p.add_argument("--mlp-ratio", type=float, default=4.0)
    p.add_argument("--cls", action="store_true")
    p.add_argument("--channels", type=int, default=3)


def load_weights_file(path: Path) -> tuple[ModelConfig, vit.Weights]:
    meta, tensors = read_nadf_file(path)
    config = ModelConfig.from_dict(meta["config"])
    return config, vit.Weights.from_named(config, tensors)


def save_weights_file(path: Path, config: ModelConfig, weights: vit.Weights) -> None:
    write_nadf_file(path, {"kind": "weights", "config": config.to_dict()}, weights.named())


# ---------------------------------------------------------------- dump

def cmd_dump(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.weights:
        config, weights = load_weights_file(Path(args.weights))
    else:
        config = _config_from_args(args)
        weights = vit.random_weights(config, args.weights_seed)
    restriction = None
    if args.restrict_kernel is not None:
        restriction = vit.AttentionRestriction(kernel=args.restrict_kernel)

    items: list[tuple[str, np.ndarray]] = []
    if args.images:
        for p in sorted(Path(args.images).iterdir()):
            if p.suffix.lower() not in (".ppm", ".pgm", ".pnm"):
                continue
            try:
                img = images.read_pnm(p)
            except VitLensError as exc:
                print(f"warning: skipping {p.name}: {exc}", file=sys.stderr)
                continue
            if img.shape[0] != config.channels:
                if img.shape[0] == 1 and config.channels == 3:
                    img = np.repeat(img, 3, axis=0)
                else:
                    print(f"warning: skipping {p.name}: channel mismatch", file=sys.stderr)
                    continue
            items.append((p.stem, img))
    else:
        for i in range(args.synthetic):
            img = images.synthetic_image(
                config.image_size, config.channels,
                np.random.SeedSequence([args.seed, i]))
            items.append((f"synthetic_{i:04d}", img))
    if not items:
        raise EmptyRun("no decodable images")

    def run(item):
        name, img = item
        bundle = vit.forward(img, weights, config, restriction=restriction)
        path = out_dir / f"{name}.nad"
        write_bundle_file(bundle, path)
        return path

    with ThreadPoolExecutor(max_workers=_thread_count()) as ex:
        outputs = list(ex.map(run, items))

    if args.save_weights:
        wpath = Path(args.save_weights)
        save_weights_file(wpath, config, weights)
        outputs.append(wpath)
    _write_manifest(out_dir / "dump", args, outputs)
    print(f"wrote {len(outputs)} files to {out_dir}")
    return 0


# ---------------------------------------------------------------- attn-stats

def cmd_attn_stats(args) -> int:
    bundles = _load_dataset(Path(args.input))
    cfg = bundles[0][1].config
    stats = [
        attn_mod.bundle_attention_stats(
            b.attention, cfg.grid, cfg.grid, args.patch_px or cfg.patch_size,
            nmi_exclude_cls=args.nmi_exclude_cls)
        for _, b in bundles
    ]
    distance = np.mean([s.distance for s in stats], axis=0)
    nmi = np.mean([s.nmi for s in stats], axis=0)
    nmi_mean, nmi_std = attn_mod.nmi_head_stats(nmi)

    rows = []
    for layer in range(cfg.depth):
        for head in range(cfg.heads):
            rows.append([layer, head, "distance", f"{distance[layer, head]:.10g}"])
    for layer in range(cfg.depth):
        for head in range(cfg.heads):
            rows.append([layer, head, "nmi", f"{nmi[layer, head]:.10g}"])
    for layer in range(cfg.depth):
        rows.append([layer, "", "nmi_std", f"{nmi_std[layer]:.10g}"])
    out = Path(args.out)
    _write_csv(out, ["layer", "head", "metric", "value"], rows)
    outputs = [out]
    if args.json:
        jpath = Path(args.json)
        jpath.write_text(json.dumps({
            "distance": distance.tolist(),
            "nmi": nmi.tolist(),
            "nmi_mean": nmi_mean.tolist(),
            "nmi_std": nmi_std.tolist(),
        }, indent=2) + "\n")
        outputs.append(jpath)
    if args.svg:
        layers = list(range(cfg.depth))
        doc = svg.line_chart(
            {"attention distance": (layers, distance.mean(axis=1).tolist()),
             "NMI (mean over heads)": (layers, nmi_mean.tolist())},
            "layer", "value", "attention diagnostics")
        Path(args.svg).write_text(doc)
        outputs.append(Path(args.svg))
    _write_manifest(out, args, outputs)
    return 0


# ---------------------------------------------------------------- repr-stats

def cmd_repr_stats(args) -> int:
    bundles = _load_dataset(Path(args.input))
    cfg = bundles[0][1].config
    rows = []
    head_sims = np.zeros(cfg.depth)
    depth_sims = np.zeros(cfg.depth)
    token_sims = np.zeros(cfg.depth + 1)
    have_heads = all(f"head_out/{i}" in b.extras
                     for _, b in bundles for i in range(cfg.depth))
    for _, b in bundles:
        for layer in range(cfg.depth):
            if have_heads:
                head_sims[layer] += representation.cosine_similarity_heads(
                    b.extras[f"head_out/{layer}"]) / len(bundles)
            depth_sims[layer] += representation.cosine_similarity_depth(
                b.representations[layer], b.representations[layer + 1]) / len(bundles)
        for depth in range(cfg.depth + 1):
            token_sims[depth] += representation.cosine_similarity_tokens(
                b.representations[depth], exclude_cls=cfg.use_cls) / len(bundles)
    for layer in range(cfg.depth):
        if have_heads:
            rows.append([layer, "", "head_cosine", f"{head_sims[layer]:.10g}"])
        rows.append([layer, "", "depth_cosine", f"{depth_sims[layer]:.10g}"])
    for depth in range(cfg.depth + 1):
        rows.append([depth, "", "token_cosine", f"{token_sims[depth]:.10g}"])
    out = Path(args.out)
    _write_csv(out, ["layer", "head", "metric", "value"], rows)
    outputs = [out]
    if args.svg:
        series = {
            "token cosine": (list(range(cfg.depth + 1)), token_sims.tolist()),
            "depth cosine": (list(range(cfg.depth)), depth_sims.tolist()),
        }
        if have_heads:
            series["head cosine"] = (list(range(cfg.depth)), head_sims.tolist())
        Path(args.svg).write_text(
            svg.line_chart(series, "layer", "cosine similarity", "representation similarity"))
        outputs.append(Path(args.svg))
    _write_manifest(out, args, outputs)
    return 0


# ---------------------------------------------------------------- fourier

def cmd_fourier(args) -> int:
    bundles = _load_dataset(Path(args.input))
    cfg = bundles[0][1].config
    n_bins = args.bins
    rows = []
    deltas = []
    for depth in range(cfg.depth + 1):
        sums = np.zeros(n_bins)
        counts = np.zeros(n_bins)
        for _, b in bundles:
            grid = spectral.token_grid(
                b.representations[depth], cfg.grid, cfg.grid, exclude_cls=cfg.use_cls)
            for d in range(grid.shape[2]):
                s, c = spectral.binned_log_amplitude(
                    np.abs(spectral.dft2(grid[:, :, d])), n_bins)
                sums += s
                counts += c
        spec = spectral.spectrum_from_bins(sums, counts, depth, n_bins)
        deltas.append(spec.delta_log_amplitude)
        by_center = dict(spec.bins)
        for i, center in enumerate(spectral.bin_centers(n_bins)):
            value = by_center.get(float(center), float("nan"))
            rows.append([depth, i, f"{value:.10g}", f"{spec.delta_log_amplitude:.10g}"])
    out = Path(args.out)
    _write_csv(out, ["layer", "freq_bin", "log_amplitude", "delta"], rows)
    outputs = [out]
    if args.svg:
        Path(args.svg).write_text(svg.line_chart(
            {"delta log amplitude": (list(range(cfg.depth + 1)), deltas)},
            "layer", "delta log amplitude", "frequency summary"))
        outputs.append(Path(args.svg))
    _write_manifest(out, args, outputs)
    return 0


# ---------------------------------------------------------------- svd

def cmd_svd(args) -> int:
    bundles = _load_dataset(Path(args.input))
    cfg = bundles[0][1].config
    rows = []
    final_deltas = []
    for depth in range(cfg.depth + 1):
        if args.level == "token":
            per_image = []
            for _, b in bundles:
                z = np.asarray(b.representations[depth], dtype=np.float64)
                if cfg.use_cls:
                    z = z[1:]
                if not args.uncentered:
                    z = z - z.mean(axis=0, keepdims=True)
                per_image.append(representation.svd_values(z))
            if args.aggregate == "linear":
                sigma = np.mean(per_image, axis=0)
                ref_idx = 0 if args.reference == "largest" else 1
                logs = np.log(np.maximum(sigma, 1e-12))
                dlog = logs - logs[ref_idx]
            else:
                ref_idx, mean_log, dlog = representation.aggregate_log_sigma(
                    per_image, args.reference)
                sigma = np.exp(mean_log)
        else:
            spec = representation.image_spectrum(
                (b.representations[depth] for _, b in bundles),
                reference=args.reference, center=not args.uncentered, layer=depth)
            sigma, dlog = spec.singular_values, spec.delta_log
        for i, (sv, dl) in enumerate(zip(sigma, dlog)):
            rows.append([depth, i, f"{sv:.10g}", f"{dl:.10g}", args.level])
        final_deltas.append(float(np.mean(dlog)))
    out = Path(args.out)
    _write_csv(out, ["layer", "index", "sigma", "delta_log", "level"], rows)
    outputs = [out]
    if args.svg:
        Path(args.svg).write_text(svg.line_chart(
            {"mean delta log sigma": (list(range(len(final_deltas))), final_deltas)},
            "layer", "mean delta log sigma", f"{args.level}-level spectra"))
        outputs.append(Path(args.svg))
    _write_manifest(out, args, outputs)
    return 0


# ---------------------------------------------------------------- noise

def cmd_noise(args) -> int:
    config, weights = load_weights_file(Path(args.weights))
    head = _load_head(Path(args.head))
    imgs, labels = _load_labeled_images(args, config)
    bands = spectral.tile_bands(args.window)
    points = spectral.robustness_curve(
        weights, config, head, imgs, labels, bands, args.rms, args.seed)
    rows = [
        [f"{p.band.f_low:.10g}", f"{p.band.f_high:.10g}",
         f"{p.accuracy_clean:.10g}", f"{p.accuracy_noisy:.10g}", f"{p.drop:.10g}"]
        for p in points
    ]
    out = Path(args.out)
    _write_csv(out, ["band_low", "band_high", "accuracy_clean", "accuracy_noisy", "drop"], rows)
    outputs = [out]
    if args.svg:
        centers = [(p.band.f_low + p.band.f_high) / 2 for p in points]
        Path(args.svg).write_text(svg.line_chart(
            {"accuracy drop": (centers, [p.drop for p in points])},
            "band center (x pi)", "accuracy drop", "frequency-band robustness"))
        outputs.append(Path(args.svg))
    _write_manifest(out, args, outputs)
    return 0


def _load_head(path: Path) -> probe.ProbeModel:
    doc = json.loads(path.read_text())
    return probe.ProbeModel(
        np.asarray(doc["weights"], dtype=np.float64),
        np.asarray(doc["bias"], dtype=np.float64),
        doc.get("training_log", []),
    )


def _load_labeled_images(args, config: ModelConfig):
    if args.images:
        img_dir = Path(args.images)
        paths = sorted(p for p in img_dir.iterdir()
                       if p.suffix.lower() in (".ppm", ".pgm", ".pnm"))
        if not paths:
            raise EmptyRun(f"no images in {img_dir}")
        imgs = [images.read_pnm(p) for p in paths]
        labels = _load_labels(Path(args.labels), [p.name for p in paths])
        return imgs, labels
    imgs, labels = images.two_class_lowfreq_dataset(
        args.synthetic, config.image_size, config.channels, args.seed)
    return imgs, labels


# ---------------------------------------------------------------- probe

def cmd_probe(args) -> int:
    bundles = _load_dataset(Path(args.input))
    names = [n for n, _ in bundles]
    labels = _load_labels(Path(args.labels), names)
    config = probe.ProbeConfig(
        learning_rate=args.lr, epochs=args.epochs, batch_size=args.batch_size,
        pooling=args.pooling, seed=args.seed)
    results = probe.layerwise_probe([b for _, b in bundles], labels, config)
    rows = [
        [r.depth, f"{r.train_accuracy:.10g}", f"{r.test_accuracy:.10g}",
         args.epochs, args.seed]
        for r in results
    ]
    out = Path(args.out)
    _write_csv(out, ["depth", "train_accuracy", "test_accuracy", "epochs", "seed"], rows)
    outputs = [out]
    if args.save_head:
        model_cfg = bundles[0][1].config
        feats = np.stack([
            probe.pool(b.representations[-1], args.pooling, model_cfg.use_cls)
            for _, b in bundles])
        model = probe.train_probe(feats, labels, config)
        head_path = Path(args.save_head)
        head_path.write_text(json.dumps({
            "weights": model.weights.tolist(),
            "bias": model.bias.tolist(),
            "training_log": model.training_log,
        }) + "\n")
        outputs.append(head_path)
    if args.svg:
        Path(args.svg).write_text(svg.line_chart(
            {"test accuracy": ([r.depth for r in results],
                               [r.test_accuracy for r in results])},
            "depth", "accuracy", "layerwise linear probing"))
        outputs.append(Path(args.svg))
    _write_manifest(out, args, outputs)
    return 0


# ---------------------------------------------------------------- hybrid-eval

def cmd_hybrid_eval(args) -> int:
    view_a = read_bundle_file(Path(args.view_a))
    view_b = read_bundle_file(Path(args.view_b))
    if view_a.config != view_b.config:
        raise MixedBundles("the two views disagree on model configuration")
    cfg = view_a.config
    q = probe.pool(view_a.representations[-1], "mean_tokens", cfg.use_cls)
    pos = probe.pool(view_b.representations[-1], "mean_tokens", cfg.use_cls)
    neg_dir = Path(args.negatives)
    negatives = [
        probe.pool(read_bundle_file(p).representations[-1], "mean_tokens", cfg.use_cls)
        for p in sorted(neg_dir.glob("*.nad"))
        if p.resolve() not in (Path(args.view_a).resolve(), Path(args.view_b).resolve())
    ]
    if not negatives:
        raise EmptyRun(f"no negative bundles in {neg_dir}")
    l_cl = objectives.infonce(q, pos, np.stack(negatives), args.temperature)

    spatial = cfg.grid * cfg.grid
    mask = objectives.random_mask(cfg.grid, cfg.grid, args.mask_ratio, args.mask_seed)
    pred = np.asarray(view_a.representations[-1], dtype=np.float64)
    target = np.asarray(view_a.representations[0], dtype=np.float64)
    if cfg.use_cls:
        pred, target = pred[1:], target[1:]
    assert pred.shape[0] == spatial
    l_mim = objectives.mim_loss(pred, target, mask, args.norm)
    combined = objectives.hybrid_loss(l_mim, l_cl, args.lam)
    doc = {
        "l_mim": l_mim, "l_cl": l_cl, "lambda": args.lam,
        "hybrid": combined, "temperature": args.temperature,
        "mask_ratio": args.mask_ratio, "norm": args.norm,
    }
    text = json.dumps(doc, indent=2) + "\n"
    print(text, end="")
    if args.out:
        out = Path(args.out)
        out.write_text(text)
        _write_manifest(out, args, [out])
    return 0


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ssl-vit-lens",
        description="Diagnostics for self-supervised ViT representations.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dump", help="run the ViT and write .nad bundles")
    _add_config_flags(p)
    p.add_argument("--weights", help="load weights from a NADF file")
    p.add_argument("--weights-seed", type=int, default=0)
    p.add_argument("--images", help="directory of PPM/PGM images")
    p.add_argument("--synthetic", type=int, default=0,
                   help="generate N synthetic images instead of reading --images")
    p.add_argument("--restrict-kernel", type=int, default=None,
                   help="odd local-attention kernel (Chebyshev)")
    p.add_argument("--seed", type=int, default=0, help="synthetic-image seed")
    p.add_argument("--save-weights", help="also save the weights as NADF")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_dump)

    def analysis(name: str, help_: str):
        q = sub.add_parser(name, help=help_)
        q.add_argument("--in", dest="input", required=True)
        q.add_argument("--out", required=True)
        q.add_argument("--svg", default=None)
        return q

    p = analysis("attn-stats", "attention distance and NMI per layer/head")
    p.add_argument("--patch-px", type=int, default=None,
                   help="pixels per patch for distances (default: model patch size)")
    p.add_argument("--nmi-exclude-cls", action="store_true")
    p.add_argument("--json", default=None)
    p.set_defaults(func=cmd_attn_stats)

    p = analysis("repr-stats", "head/depth/token cosine similarities")
    p.set_defaults(func=cmd_repr_stats)

    p = analysis("fourier", "relative log amplitude of token maps")
    p.add_argument("--bins", type=int, default=spectral.DEFAULT_BINS)
    p.set_defaults(func=cmd_fourier)

    p = analysis("svd", "singular value spectra of representations")
    p.add_argument("--level", choices=["token", "image"], default="token")
    p.add_argument("--reference", choices=["largest", "second_largest"],
                   default="second_largest")
    p.add_argument("--aggregate", choices=["log", "linear"], default="log")
    p.add_argument("--uncentered", action="store_true")
    p.set_defaults(func=cmd_svd)

    p = sub.add_parser("noise", help="frequency-band noise robustness curve")
    p.add_argument("--weights", required=True, help="NADF weights file")
    p.add_argument("--head", required=True, help="probe head JSON")
    p.add_argument("--images", help="directory of PPM/PGM images")
    p.add_argument("--labels", help="labels.csv for --images")
    p.add_argument("--synthetic", type=int, default=0,
                   help="size of the built-in two-class low-frequency dataset")
    p.add_argument("--window", type=float, default=0.1)
    p.add_argument("--rms", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--svg", default=None)
    p.set_defaults(func=cmd_noise)

    p = sub.add_parser("probe", help="layerwise linear probing")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--pooling", choices=["mean_tokens", "cls"], default="mean_tokens")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--save-head", default=None,
                   help="save the final-depth probe as JSON (for `noise`)")
    p.add_argument("--out", required=True)
    p.add_argument("--svg", default=None)
    p.set_defaults(func=cmd_probe)

    p = sub.add_parser("hybrid-eval", help="CL/MIM losses and their hybrid")
    p.add_argument("--view-a", required=True)
    p.add_argument("--view-b", required=True)
    p.add_argument("--negatives", required=True, help="directory of negative bundles")
    p.add_argument("--lam", "--lambda", dest="lam", type=float, default=0.2)
    p.add_argument("--temperature", type=float, default=0.2)
    p.add_argument("--mask-ratio", type=float, default=0.6)
    p.add_argument("--mask-seed", type=int, default=0)
    p.add_argument("--norm", choices=["l1", "l2"], default="l1")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_hybrid_eval)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except EmptyRun as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except (VitLensError, InvalidKernel, MixedBundles) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
