"""Inverse ISP: gamma -> color matrix -> brightness -> white balance -> mosaic.

The forward estimators are replaced by deterministic maps steered by sampled
illumination latents: theta (color temperature) drives softmax weights over
the AWB and CCM preset banks, phi (brightness) maps straight onto the
tanh-limited gain.  Sampling different latents from the Gaussian prior turns
one RGB image into many simulated RAWs.

Only the final mosaic clamps to [0, 1]; intermediate inverse stages may leave
the unit range, as linear RAW does before normalization.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bayer import BayerPattern, NormalizedRaw, RawMeta, RgbImage, denormalize, mosaic
from .errors import EstimationError, InvalidMetadataError, SingularMatrixError
from .fileio import read_ppm, write_braw
from .isp import AwbPresets, CcmPresets, bt709_gamma_inverse, default_isp_params


@dataclass(frozen=True)
class IlluminationPrior:
    """Gaussian latents for color temperature (theta) and brightness (phi)."""

    mu_theta: float = 0.0
    sigma_theta: float = 1.0
    mu_phi: float = 0.0
    sigma_phi: float = 1.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.sigma_theta < 0 or self.sigma_phi < 0:
            raise InvalidMetadataError("prior standard deviations must be >= 0")


@dataclass(frozen=True)
class InvIspParams:
    """Preset banks plus the deterministic latent-to-weight maps."""

    awb: AwbPresets
    ccm: CcmPresets
    awb_score_coeffs: np.ndarray = None  # (N,), default linspace(-1, 1, N)
    cc_score_coeffs: tuple = (1.0, -1.0)
    brightness_alpha: float = 0.3
    brightness_beta: float = 1.0
    bit_depth: int = 12
    black_lev: int = 64
    saturation_lev: int = 4095

    def __post_init__(self):
        n = len(self.awb)
        coeffs = self.awb_score_coeffs
        if coeffs is None:
            coeffs = np.linspace(-1.0, 1.0, n) if n > 1 else np.zeros(1)
        coeffs = np.asarray(coeffs, dtype=np.float64).ravel()
        if coeffs.size != n:
            raise InvalidMetadataError("awb_score_coeffs length must match preset count")
        object.__setattr__(self, "awb_score_coeffs", coeffs)

    def sensor_meta(self, pattern: BayerPattern) -> RawMeta:
        return RawMeta(
            pattern=pattern,
            bit_depth=self.bit_depth,
            black_lev=self.black_lev,
            saturation_lev=self.saturation_lev,
        )


def default_inv_params() -> InvIspParams:
    base = default_isp_params()
    return InvIspParams(awb=base.awb, ccm=base.ccm)


def sample_illumination(prior: IlluminationPrior, n: int) -> np.ndarray:
    """Draw n i.i.d. (theta, phi) pairs; bit-reproducible for a given seed."""
    if n < 1:
        raise ValueError("need at least one sample")
    rng = np.random.default_rng(prior.rng_seed)
    theta = prior.mu_theta + prior.sigma_theta * rng.standard_normal(n)
    phi = prior.mu_phi + prior.sigma_phi * rng.standard_normal(n)
    return np.column_stack([theta, phi])


def _softmax(scores: np.ndarray) -> np.ndarray:
    e = np.exp(scores - scores.max())
    return e / e.sum()


def default_awb_score_coeffs(n: int) -> np.ndarray:
    return np.linspace(-1.0, 1.0, n) if n > 1 else np.zeros(1)


def rho_awb(theta: float, n_presets: int, score_coeffs=None) -> np.ndarray:
    """Inverse AWB weights: softmax over preset scores linear in theta.

    theta = 0 gives uniform weights, the neutral setting.
    """
    coeffs = default_awb_score_coeffs(n_presets) if score_coeffs is None else np.asarray(score_coeffs)
    return _softmax(theta * coeffs)


def rho_cc(theta: float, score_coeffs=(1.0, -1.0)) -> tuple:
    """Inverse CCM weights (rho_d, rho_n); uniform at theta = 0."""
    cd, cn = score_coeffs
    w = _softmax(np.array([theta * cd, theta * cn]))
    return float(w[0]), float(w[1])


def b_inv(phi: float) -> float:
    """Brightness latent -> raw gain; the identity map by construction."""
    return float(phi)


def inv_awb(y: RgbImage, presets: AwbPresets, theta: float, score_coeffs=None) -> RgbImage:
    """Undo white balance with mixed reciprocal gains: sum_i rho_i / gain_i.

    Note the asymmetry with the forward mix: the reciprocals are mixed, not
    the mixed gain inverted.  Plain per-channel multiply, no clamping.
    """
    rho = rho_awb(theta, len(presets), score_coeffs)
    inv_r, inv_b = rho @ (1.0 / presets.gains)
    if inv_r <= 0 or inv_b <= 0 or not np.isfinite(inv_r) or not np.isfinite(inv_b):
        raise EstimationError("degenerate inverse white-balance gains")
    return RgbImage(pixels=y.pixels * np.array([inv_r, 1.0, inv_b]))


def inv_brightness(
    y: RgbImage, phi: float, alpha: float = 0.3, beta: float = 1.0
) -> RgbImage:
    """Divide by the tanh-limited gain derived from the brightness latent."""
    gain = beta + alpha * np.tanh(b_inv(phi))
    return RgbImage(pixels=y.pixels / gain)


def inv_cc(
    y: RgbImage, presets: CcmPresets, theta: float, score_coeffs=(1.0, -1.0)
) -> RgbImage:
    """Apply the inverse of the rho-mixed color correction matrix."""
    rho_d, rho_n = rho_cc(theta, score_coeffs)
    mixed = rho_d * presets.day + rho_n * presets.night
    if abs(np.linalg.det(mixed)) < 1e-6:
        raise SingularMatrixError("mixed CCM is singular")
    inverse = np.linalg.inv(mixed)
    return RgbImage(pixels=y.pixels @ inverse.T)


def inv_isp(
    y: RgbImage,
    params: InvIspParams,
    theta: float,
    phi: float,
    pattern: BayerPattern,
) -> NormalizedRaw:
    """Full inverse pipeline; clamps to [0, 1] only at the mosaic step."""
    z = RgbImage(pixels=bt709_gamma_inverse(np.clip(y.pixels, 0.0, 1.0)))
    z = inv_cc(z, params.ccm, theta, params.cc_score_coeffs)
    z = inv_brightness(z, phi, params.brightness_alpha, params.brightness_beta)
    z = inv_awb(z, params.awb, theta, params.awb_score_coeffs)
    return mosaic(z, params.sensor_meta(pattern))


def simraw_batch(
    in_dir,
    out_dir,
    params: InvIspParams,
    prior: IlluminationPrior,
    n_per_image: int,
    pattern: BayerPattern = BayerPattern.RGGB,
    threads: int = 1,
) -> dict:
    """Generate n simRAW .braw files per input PPM, with a JSON manifest.

    Latents for image number i come from the stream seeded by
    (prior.rng_seed, i), so outputs do not depend on scheduling and any row
    can be replayed through :func:`inv_isp` individually.
    """
    in_dir, out_dir = Path(in_dir), Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    inputs = sorted(p for p in in_dir.iterdir() if p.suffix.lower() == ".ppm")
    manifest = {
        "seed": prior.rng_seed,
        "n_per_image": n_per_image,
        "pattern": pattern.value,
        "prior": prior_to_dict(prior),
        "entries": [],
        "errors": [],
    }

    def process(args):
        index, path = args
        rng = np.random.default_rng([prior.rng_seed, index])
        theta = prior.mu_theta + prior.sigma_theta * rng.standard_normal(n_per_image)
        phi = prior.mu_phi + prior.sigma_phi * rng.standard_normal(n_per_image)
        rows = []
        try:
            image = read_ppm(path)
            for j in range(n_per_image):
                raw = denormalize(inv_isp(image, params, theta[j], phi[j], pattern))
                out_name = f"{path.stem}_{j:03d}.braw"
                write_braw(out_dir / out_name, raw)
                rows.append(
                    {
                        "input": path.name,
                        "output": out_name,
                        "theta": float(theta[j]),
                        "phi": float(phi[j]),
                        "index": j,
                    }
                )
        except Exception as exc:  # keep the batch going; report per file
            return rows, {"input": path.name, "error": f"{type(exc).__name__}: {exc}"}
        return rows, None

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        for rows, error in pool.map(process, enumerate(inputs)):
            manifest["entries"].extend(rows)
            if error is not None:
                manifest["errors"].append(error)

    manifest["entries"].sort(key=lambda e: (e["input"], e["index"]))
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2))
    return manifest


def prior_to_dict(prior: IlluminationPrior) -> dict:
    return {
        "mu_theta": prior.mu_theta,
        "sigma_theta": prior.sigma_theta,
        "mu_phi": prior.mu_phi,
        "sigma_phi": prior.sigma_phi,
        "rng_seed": prior.rng_seed,
    }


def prior_from_dict(data: dict) -> IlluminationPrior:
    return IlluminationPrior(
        mu_theta=data.get("mu_theta", 0.0),
        sigma_theta=data.get("sigma_theta", 1.0),
        mu_phi=data.get("mu_phi", 0.0),
        sigma_phi=data.get("sigma_phi", 1.0),
        rng_seed=data.get("rng_seed", 0),
    )


def load_prior(path) -> IlluminationPrior:
    return prior_from_dict(json.loads(Path(path).read_text()))


def inv_params_to_dict(params: InvIspParams) -> dict:
    return {
        "awb": {
            "presets": params.awb.gains.tolist(),
            "score_coeffs": params.awb_score_coeffs.tolist(),
        },
        "cc": {
            "ccm_day": params.ccm.day.tolist(),
            "ccm_night": params.ccm.night.tolist(),
            "score_coeffs": list(params.cc_score_coeffs),
        },
        "brightness": {"alpha": params.brightness_alpha, "beta": params.brightness_beta},
        "sensor": {
            "bit_depth": params.bit_depth,
            "black_lev": params.black_lev,
            "saturation_lev": params.saturation_lev,
        },
    }


def inv_params_from_dict(data: dict) -> InvIspParams:
    base = default_inv_params()
    awb = data.get("awb", {})
    cc = data.get("cc", {})
    sensor = data.get("sensor", {})
    brightness = data.get("brightness", {})
    presets = AwbPresets(gains=np.asarray(awb["presets"])) if "presets" in awb else base.awb
    ccm = (
        CcmPresets(day=np.asarray(cc["ccm_day"]), night=np.asarray(cc["ccm_night"]))
        if "ccm_day" in cc
        else base.ccm
    )
    return InvIspParams(
        awb=presets,
        ccm=ccm,
        awb_score_coeffs=np.asarray(awb["score_coeffs"]) if "score_coeffs" in awb else None,
        cc_score_coeffs=tuple(cc.get("score_coeffs", (1.0, -1.0))),
        brightness_alpha=brightness.get("alpha", 0.3),
        brightness_beta=brightness.get("beta", 1.0),
        bit_depth=sensor.get("bit_depth", 12),
        black_lev=sensor.get("black_lev", 64),
        saturation_lev=sensor.get("saturation_lev", 4095),
    )


def load_inv_params(path) -> InvIspParams:
    return inv_params_from_dict(json.loads(Path(path).read_text()))
