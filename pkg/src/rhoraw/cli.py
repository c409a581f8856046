"""Command-line entry point exposing all pipelines.

Exit codes: 0 success, 2 usage error (argparse), 3 data/processing error.
Reports are JSON on stdout (or --report <path>); --human renders them as
key: value lines instead.  All randomness flows from --seed, so identical
invocations produce byte-identical outputs.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import bayer, fileio, invisp, isp, losses, rawstats
from . import ric
from .errors import RhoRawError

log = logging.getLogger("rhoraw")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3


def _threads_default() -> int:
    env = os.environ.get("RHO_RAW_THREADS")
    try:
        return max(1, int(env)) if env else 1
    except ValueError:
        return 1


def _emit_report(report: dict, args) -> None:
    text = json.dumps(report, indent=2, sort_keys=True)
    if getattr(args, "human", False):
        lines = []

        def flatten(prefix, value):
            if isinstance(value, dict):
                for key in sorted(value):
                    flatten(f"{prefix}{key}.", value[key])
            elif isinstance(value, list):
                lines.append(f"{prefix[:-1]}: {value}")
            else:
                lines.append(f"{prefix[:-1]}: {value}")

        flatten("", report)
        text = "\n".join(lines)
    if getattr(args, "report", None):
        Path(args.report).write_text(text + "\n")
    else:
        print(text)


def _load_image_rgb(path) -> bayer.RgbImage:
    """PPM loads directly; .braw is normalized and demosaiced."""
    path = Path(path)
    if path.suffix.lower() == ".braw":
        return bayer.demosaic(bayer.normalize(fileio.read_braw(path)))
    return fileio.read_ppm(path)


def _load_image_gray(path) -> np.ndarray:
    """Normalized 2-D array: the mosaic for .braw, BT.601 luma for PPM."""
    path = Path(path)
    if path.suffix.lower() == ".braw":
        return bayer.normalize(fileio.read_braw(path)).samples
    return isp.luma_bt601(fileio.read_ppm(path).pixels)


def cmd_isp(args) -> dict:
    raw = fileio.read_braw(args.infile)
    params = isp.load_isp_params(args.isp_params) if args.isp_params else isp.default_isp_params()
    x = bayer.normalize(raw)
    if args.auto:
        y = bayer.demosaic(x)
        weights = isp.awb_estimate_grayworld(y, params.awb)
        raw_gain = isp.brightness_estimate(
            isp.awb_apply(y, params.awb, weights),
            alpha=params.brightness_alpha,
            beta=params.brightness_beta,
        )
        params = isp.IspParams(
            awb=params.awb,
            awb_weights=weights,
            ccm=params.ccm,
            cc_weights=params.cc_weights,
            brightness_alpha=params.brightness_alpha,
            brightness_beta=params.brightness_beta,
            raw_gain=raw_gain,
            gamma=params.gamma,
        )
    image = isp.isp_forward(x, params)
    fileio.write_ppm(args.out, image)
    return {
        "out": str(args.out),
        "width": image.width,
        "height": image.height,
        "awb_weights": params.awb_weights.w.tolist(),
        "raw_gain": params.raw_gain,
    }


def cmd_invisp(args) -> dict:
    image = fileio.read_ppm(args.infile)
    params = invisp.load_inv_params(args.params) if args.params else invisp.default_inv_params()
    prior = invisp.load_prior(args.prior) if args.prior else invisp.IlluminationPrior()
    if args.seed is not None:
        prior = invisp.IlluminationPrior(
            mu_theta=prior.mu_theta,
            sigma_theta=prior.sigma_theta,
            mu_phi=prior.mu_phi,
            sigma_phi=prior.sigma_phi,
            rng_seed=args.seed,
        )
    pattern = bayer.BayerPattern.parse(args.pattern)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    draws = invisp.sample_illumination(prior, args.n)
    entries = []
    stem = Path(args.infile).stem
    for j, (theta, phi) in enumerate(draws):
        raw = bayer.denormalize(invisp.inv_isp(image, params, float(theta), float(phi), pattern))
        name = f"{stem}_{j:03d}.braw"
        fileio.write_braw(out_dir / name, raw)
        entries.append({"output": name, "theta": float(theta), "phi": float(phi), "index": j})
    manifest = {
        "input": str(args.infile),
        "pattern": pattern.value,
        "prior": invisp.prior_to_dict(prior),
        "entries": entries,
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2))
    return manifest


def cmd_simraw(args) -> dict:
    params = invisp.load_inv_params(args.params) if args.params else invisp.default_inv_params()
    prior = invisp.load_prior(args.prior) if args.prior else invisp.IlluminationPrior()
    if args.seed is not None:
        prior = invisp.IlluminationPrior(
            mu_theta=prior.mu_theta,
            sigma_theta=prior.sigma_theta,
            mu_phi=prior.mu_phi,
            sigma_phi=prior.sigma_phi,
            rng_seed=args.seed,
        )
    return invisp.simraw_batch(
        args.in_dir,
        args.out_dir,
        params,
        prior,
        args.n_per_image,
        pattern=bayer.BayerPattern.parse(args.pattern),
        threads=args.threads,
    )


def cmd_analyze(args) -> dict:
    image = _load_image_gray(args.infile)
    report = {"input": str(args.infile), "patch_size": args.patch_size}
    if args.gamma:
        k_before, k_after = rawstats.gamma_k_report(image, args.patch_size)
        report.update({"k_before": k_before, "k_after": k_after})
    else:
        report["k"] = rawstats.fit_k_image(image, args.patch_size).k
    return report


def cmd_bnsim(args) -> dict:
    lo, hi = args.k_range
    k_grid = tuple(float(k) for k in np.arange(lo, hi + 1e-9, args.k_step))
    scale = 5000 if args.full else None
    cfg = rawstats.BnSimConfig(
        batch_size=args.batch_size,
        n_batches=scale or args.batches,
        n_repeats=scale or args.repeats,
        k_grid=k_grid,
        seed=args.seed or 0,
    )
    result = rawstats.bn_var_mc(cfg)
    rows = ["k,var_ybn_over_a2"]
    rows += [f"{k:g},{v:.8g}" for k, v in zip(result.k_values, result.values)]
    Path(args.out).write_text("\n".join(rows) + "\n")
    rho = rawstats.spearman_rho(result.k_values, result.values)
    return {
        "out": str(args.out),
        "k_grid": list(result.k_values),
        "values": [float(v) for v in result.values],
        "spearman_rho": rho,
        "batch_size": cfg.batch_size,
        "n_batches": cfg.n_batches,
        "n_repeats": cfg.n_repeats,
    }


def cmd_losses(args) -> dict:
    image_a = _load_image_rgb(args.a)
    image_b = _load_image_rgb(args.b)
    report = {"cycle": losses.cycle_loss(image_a, image_b)}
    latents = json.loads(Path(args.latents).read_text()) if args.latents else {}
    if {"theta1", "phi1", "theta2", "phi2"} <= set(latents):
        report["var"] = losses.var_loss(
            losses.yuv_from_rgb(image_a),
            losses.yuv_from_rgb(image_b),
            latents["theta1"],
            latents["phi1"],
            latents["theta2"],
            latents["phi2"],
        )
    if {"d_real", "d_fake"} <= set(latents):
        loss_g, loss_d = losses.adv_losses(latents["d_real"], latents["d_fake"])
        report["adv_generator"] = loss_g
        report["adv_discriminator"] = loss_d
    hist_a = losses.chroma_hist(image_a)
    report["chroma_hist_l1_distance"] = float(
        np.abs(hist_a.bins - losses.chroma_hist(image_b).bins).sum()
    )
    report["gray_hist_l1_distance"] = float(
        np.abs(losses.gray_hist(image_a).bins - losses.gray_hist(image_b).bins).sum()
    )
    return report


def cmd_encode(args) -> dict:
    raw = fileio.read_braw(args.infile)
    data, stats = ric.encode(raw, profile=args.profile)
    Path(args.out).write_bytes(data)
    return {
        "out": str(args.out),
        "profile": args.profile,
        "bpp": stats.bpp,
        "total_bytes": stats.total_bytes,
        "payload_bits": stats.payload_bits,
        "model_bits": stats.model_bits,
    }


def _preview_to_rgb(planes: np.ndarray, span: int) -> bayer.RgbImage:
    scaled = planes.astype(np.float64) / span
    pixels = np.stack(
        [scaled[0], 0.5 * (scaled[1] + scaled[2]), scaled[3]], axis=-1
    )
    return bayer.RgbImage(pixels=np.clip(pixels, 0.0, 1.0))


def cmd_decode(args) -> dict:
    data = Path(args.infile).read_bytes()
    result = ric.decode(data, max_scale=args.scale)
    header = ric.parse_header(data)
    report = {"scale": args.scale, "complete_scales": ric.available_scales(data, header)}
    if args.scale == 4:
        if args.out:
            fileio.write_braw(args.out, result)
            report["out"] = str(args.out)
        if args.preview:
            planes = bayer.split_planes(
                result.samples.astype(np.int64) - header.meta.black_lev, header.meta.pattern
            )
            fileio.write_ppm(args.preview, _preview_to_rgb(planes, header.meta.span))
            report["preview"] = str(args.preview)
        report["width"], report["height"] = result.width, result.height
    else:
        planes = result.planes.astype(np.int64)
        report["plane_width"] = int(planes.shape[2])
        report["plane_height"] = int(planes.shape[1])
        if args.preview:
            fileio.write_ppm(args.preview, _preview_to_rgb(planes, header.meta.span))
            report["preview"] = str(args.preview)
    return report


def cmd_roundtrip(args) -> dict:
    raw = fileio.read_braw(args.infile)
    data, stats = ric.encode(raw, profile=args.profile)
    back = ric.decode(data)
    lossless = bool(
        np.array_equal(back.samples, raw.samples) and back.meta == raw.meta
    )
    return {
        "lossless": lossless,
        "bpp": stats.bpp,
        "total_bytes": stats.total_bytes,
        "payload_bits": stats.payload_bits,
        "model_bits": stats.model_bits,
    }


def cmd_selftest(args) -> dict:
    from . import selftest

    report = selftest.run_selftest(seed=args.seed or 0)
    for check in report["checks"]:
        status = "PASS" if check["passed"] else "FAIL"
        print(f"[{status}] {check['name']}: {check['detail']}", file=sys.stderr)
    return report


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rhoraw", description="RAW-domain imaging toolkit"
    )
    parser.add_argument("--seed", type=int, default=None, help="global RNG seed")
    parser.add_argument(
        "--threads", type=int, default=_threads_default(),
        help="worker pool size for batch subcommands (env RHO_RAW_THREADS)",
    )
    parser.add_argument("--log-level", default="warning")
    parser.add_argument("--report", help="write the JSON report here instead of stdout")
    parser.add_argument("--human", action="store_true", help="render the report as text")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("isp", help="forward ISP: .braw -> .ppm")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--isp-params", dest="isp_params")
    p.add_argument("--auto", action="store_true", help="estimate AWB weights and brightness")
    p.set_defaults(fn=cmd_isp)

    p = sub.add_parser("invisp", help="inverse ISP: one RGB -> n simRAWs")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--params")
    p.add_argument("--prior")
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--pattern", default="RGGB")
    p.set_defaults(fn=cmd_invisp)

    p = sub.add_parser("simraw", help="batch inverse ISP over a directory of PPMs")
    p.add_argument("--in-dir", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--params")
    p.add_argument("--prior")
    p.add_argument("--n-per-image", type=int, default=1)
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    p.add_argument("--threads", type=int, default=argparse.SUPPRESS)
    p.add_argument("--pattern", default="RGGB")
    p.set_defaults(fn=cmd_simraw)

    p = sub.add_parser("analyze", help="fit the patch-mean distribution curvature")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--gamma", action="store_true", help="also fit after BT.709 gamma")
    p.add_argument("--patch-size", type=int, default=16)
    p.set_defaults(fn=cmd_analyze)

    p = sub.add_parser("bnsim", help="batch-norm variance Monte-Carlo curve")
    p.add_argument("--k", dest="k_range", default="0..12", metavar="LO..HI")
    p.add_argument("--k-step", type=float, default=2.0)
    p.add_argument("--out", required=True, help="CSV path (columns: k, var_ybn_over_a2)")
    p.add_argument("--full", action="store_true", help="full 5000x5000 Monte-Carlo scale")
    p.add_argument("--batch-size", type=int, default=3)
    p.add_argument("--batches", type=int, default=500)
    p.add_argument("--repeats", type=int, default=500)
    p.set_defaults(fn=cmd_bnsim)

    p = sub.add_parser("losses", help="loss report between two images")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--latents", help="JSON with theta1/phi1/theta2/phi2 and optional d_real/d_fake")
    p.set_defaults(fn=cmd_losses)

    p = sub.add_parser("encode", help="compress .braw -> .ric")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--profile", choices=("static", "fitted"), default="fitted")
    p.set_defaults(fn=cmd_encode)

    p = sub.add_parser("decode", help="decompress .ric -> .braw (or preview)")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out")
    p.add_argument("--scale", type=int, default=4, choices=range(5))
    p.add_argument("--preview", help="write a PPM preview at the decoded scale")
    p.set_defaults(fn=cmd_decode)

    p = sub.add_parser("roundtrip", help="encode + decode + verify losslessness")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--profile", choices=("static", "fitted"), default="fitted")
    p.set_defaults(fn=cmd_roundtrip)

    p = sub.add_parser("selftest", help="run the embedded property suite")
    p.set_defaults(fn=cmd_selftest)

    return parser


def _parse_k_range(text: str):
    if ".." in text:
        lo, hi = text.split("..", 1)
        return float(lo), float(hi)
    value = float(text)
    return value, value


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level.upper(), logging.WARNING))
    if hasattr(args, "k_range"):
        try:
            args.k_range = _parse_k_range(args.k_range)
        except ValueError:
            parser.error(f"bad --k range: {args.k_range!r}")
    try:
        report = args.fn(args)
    except (RhoRawError, OSError, json.JSONDecodeError) as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    _emit_report(report, args)
    if args.command == "selftest" and not report["passed"]:
        return EXIT_DATA
    if args.command == "roundtrip" and not report["lossless"]:
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
