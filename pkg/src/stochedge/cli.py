"""Command-line experiments: encoding, gate checks, edge detection, sweeps."""

from __future__ import annotations

import json
import math
import os
import sys
from pathlib import Path

import click
import numpy as np

from . import __version__
from .bitstream import CorrelationMode, EntropySource, FlipMode, FlipSpec, decode, encode, encode_pair, scc
from .device import (
    MemristorParams,
    SneTransfer,
    load_params,
    ou_stationary_std,
    ou_trajectory,
    params_dict,
    sample_switching_voltages,
)
from .imaging import (
    FrameSequence,
    atomic_write,
    config_echo,
    process_sequence,
    read_image,
    write_csv,
    write_image,
    write_json,
    write_streams,
)
from .logic import GateKind, verify_gate
from .metrics import psnr, ssim, ssim_map_to_image
from .roberts import DetectorConfig, binary_reference_with_flips, gradient_to_image, reference_roberts
from .testimage import bundled_frame

OUT_ENV = "STOCHEDGE_OUT"
MODES = [m.value for m in CorrelationMode]
FLIP_MODES = [m.value for m in FlipMode]


def _default_out() -> str:
    return os.environ.get(OUT_ENV, "out")


def _emit(obj) -> None:
    click.echo(json.dumps(obj, indent=2))


def _float_list(text: str, name: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise click.BadParameter(f"expected comma-separated numbers, got {text!r}", param_hint=name)


def _load_input(path: str | None) -> tuple[np.ndarray, str]:
    if path is None:
        return bundled_frame(), "bundled:horse_standin.pgm"
    return read_image(path), str(path)


def _fidelity(gradient: np.ndarray, reference: np.ndarray) -> tuple[float, float, object]:
    out = gradient_to_image(gradient)
    ref = gradient_to_image(reference)
    s = ssim(out, ref)
    return s.mean, psnr(out, ref).db, s


def _db(x: float):
    return "inf" if math.isinf(x) else x


def _write_matrix(path: Path, m: np.ndarray) -> None:
    lines = [",".join(repr(float(v)) for v in row) for row in m]
    atomic_write(path, "\n".join(lines) + "\n")


def _flip_from(mode: str | None, rate: float | None) -> FlipSpec | None:
    if rate is None and mode is None:
        return None
    if mode is None:
        raise click.UsageError("--flip-rate needs an explicit --flip-mode")
    if rate is None:
        raise click.UsageError("--flip-mode needs --flip-rate")
    return FlipSpec(mode, rate)


def _device_option(f):
    return click.option("--params", "params_file", type=click.Path(exists=True, dir_okay=False),
                        help="Device constants (JSON or key = value lines).")(f)


def _device_params(params_file):
    if params_file is None:
        return MemristorParams(), SneTransfer()
    return load_params(params_file)


@click.group()
@click.version_option(__version__)
@click.option("--config", "config_file", type=click.Path(exists=True, dir_okay=False),
              help="JSON file of option defaults (same keys as the flags); flags win.")
@click.pass_context
def cli(ctx, config_file):
    """Memristor stochastic-computing edge detection experiments."""
    if config_file:
        raw = json.loads(Path(config_file).read_text())
        flat = {k.replace("-", "_"): v for k, v in raw.items()}
        ctx.default_map = {name: flat for name in cli.commands}


@cli.command("encode")
@click.option("--p", "pa", type=float, required=True, help="Value of the (first) stream.")
@click.option("--pb", type=float, help="Second stream value; produces a pair.")
@click.option("--mode", type=click.Choice(MODES), default="uncorrelated", show_default=True)
@click.option("--bits", type=int, required=True)
@click.option("--seed", type=int, required=True)
@click.option("--out", type=click.Path(dir_okay=False), help="Stream file to write.")
@click.option("--packed", is_flag=True, help="Write the binary SNB1 format instead of text.")
def cmd_encode(pa, pb, mode, bits, seed, out, packed):
    """Encode values as stochastic bitstreams."""
    src = EntropySource(seed, ("cli", "encode"))
    if pb is None:
        streams = [encode(pa, bits, src)]
        summary = {"values": [decode(streams[0])]}
    else:
        streams = list(encode_pair(pa, pb, bits, mode, src))
        summary = {"values": [decode(s) for s in streams], "scc": scc(*streams)}
    if out:
        write_streams(streams, out, packed=packed)
        summary["file"] = out
    _emit({"bits": bits, "seed": seed, "mode": mode if pb is not None else None, **summary})


@cli.command("gate")
@click.option("--kind", type=click.Choice([k.value for k in GateKind]), required=True)
@click.option("--mode", type=click.Choice(MODES), required=True)
@click.option("--pa", type=float, required=True)
@click.option("--pb", type=float, required=True)
@click.option("--ps", type=float, default=0.5, show_default=True, help="MUX select value.")
@click.option("--bits", type=int, default=100_000, show_default=True)
@click.option("--seed", type=int, required=True)
def cmd_gate(kind, mode, pa, pb, ps, bits, seed):
    """Check one stochastic gate against its closed-form output."""
    report = verify_gate(kind, mode, pa, pb, bits, EntropySource(seed, ("cli", "gate")), ps=ps)
    _emit(report.to_dict())


def _detect_to(out_dir: Path, img, cfg: DetectorConfig, input_label: str, write_csv_matrix: bool):
    maps, report = process_sequence(FrameSequence((img,), (input_label,)), cfg)
    gradient = maps[0]
    reference = reference_roberts(img)
    s = ssim(gradient_to_image(gradient), gradient_to_image(reference))
    files = {
        "gradient": "gradient.pgm",
        "reference": "reference.pgm",
        "ssim_map": "ssim_map.pgm",
    }
    write_image(gradient_to_image(gradient), out_dir / files["gradient"])
    write_image(gradient_to_image(reference), out_dir / files["reference"])
    write_image(ssim_map_to_image(s), out_dir / files["ssim_map"])
    if write_csv_matrix:
        files["gradient_csv"] = "gradient.csv"
        _write_matrix(out_dir / files["gradient_csv"], gradient)
    files["report"] = "report.json"
    report.artifacts = files
    doc = report.to_dict()
    doc["config"]["input"] = input_label
    doc["ssim_window"] = s.window
    write_json(out_dir / files["report"], doc)
    return doc


@cli.command("detect")
@click.option("--input", "input_path", type=click.Path(exists=True, dir_okay=False),
              help="Grayscale PGM/PNG; defaults to the bundled test frame.")
@click.option("--bits", type=int, required=True)
@click.option("--seed", type=int, required=True)
@click.option("--flip-mode", type=click.Choice(FLIP_MODES))
@click.option("--flip-rate", type=float)
@click.option("--source", type=click.Choice(["analytic", "device"]), default="analytic", show_default=True)
@_device_option
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=_default_out, show_default=True)
@click.option("--csv/--no-csv", "csv_matrix", default=False, help="Also write the raw gradient matrix.")
def cmd_detect(input_path, bits, seed, flip_mode, flip_rate, source, params_file, out_dir, csv_matrix):
    """Stochastic Roberts cross edge detection on one image."""
    img, label = _load_input(input_path)
    params, transfer = _device_params(params_file)
    cfg = DetectorConfig(bits=bits, seed=seed, flip=_flip_from(flip_mode, flip_rate), source=source,
                         params=params, transfer=transfer)
    _emit(_detect_to(Path(out_dir), img, cfg, label, csv_matrix))


@cli.command("sweep-bits")
@click.option("--input", "input_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--bits-list", default="4,16,64,256", show_default=True)
@click.option("--seed", type=int, required=True)
@click.option("--source", type=click.Choice(["analytic", "device"]), default="analytic", show_default=True)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=_default_out, show_default=True)
def cmd_sweep_bits(input_path, bits_list, seed, source, out_dir):
    """Fidelity of the stochastic detector across bit lengths."""
    img, label = _load_input(input_path)
    out_dir = Path(out_dir)
    reference = reference_roberts(img)
    rows = []
    for bits in (int(b) for b in _float_list(bits_list, "--bits-list")):
        cfg = DetectorConfig(bits=bits, seed=seed, source=source)
        maps, _ = process_sequence(FrameSequence((img,), (label,)), cfg)
        s_mean, p_db, s = _fidelity(maps[0], reference)
        write_image(gradient_to_image(maps[0]), out_dir / f"gradient_{bits}bit.pgm")
        write_image(ssim_map_to_image(s), out_dir / f"ssim_map_{bits}bit.pgm")
        rows.append({"bits": bits, "ssim": s_mean, "psnr_db": _db(p_db)})
    write_image(gradient_to_image(reference), out_dir / "reference.pgm")
    write_csv(out_dir / "sweep_bits.csv", rows)
    _emit({"input": label, "seed": seed, "source": source, "rows": rows})


@cli.command("sweep-flips")
@click.option("--input", "input_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--bits", type=int, default=256, show_default=True)
@click.option("--rates", default="0,0.025,0.05,0.1,0.2,0.3,0.4,0.5", show_default=True)
@click.option("--flip-mode", type=click.Choice(FLIP_MODES), required=True)
@click.option("--seed", type=int, required=True)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=_default_out, show_default=True)
def cmd_sweep_flips(input_path, bits, rates, flip_mode, seed, out_dir):
    """Bit-flip tolerance of the stochastic detector against the binary baseline."""
    img, label = _load_input(input_path)
    out_dir = Path(out_dir)
    reference = reference_roberts(img)
    rows = []
    for rate in _float_list(rates, "--rates"):
        cfg = DetectorConfig(bits=bits, seed=seed, flip=FlipSpec(flip_mode, rate))
        maps, _ = process_sequence(FrameSequence((img,), (label,)), cfg)
        st_ssim, st_psnr, _ = _fidelity(maps[0], reference)
        baseline = binary_reference_with_flips(img, rate, EntropySource(seed, ("cli", "baseline", repr(rate))))
        bl_ssim, bl_psnr, _ = _fidelity(baseline, reference)
        tag = f"{rate:g}".replace(".", "p")
        write_image(gradient_to_image(maps[0]), out_dir / f"stochastic_r{tag}.pgm")
        write_image(gradient_to_image(baseline), out_dir / f"binary_r{tag}.pgm")
        rows.append({
            "rate": rate,
            "stochastic_ssim": st_ssim,
            "stochastic_psnr_db": _db(st_psnr),
            "binary_ssim": bl_ssim,
            "binary_psnr_db": _db(bl_psnr),
        })
    write_csv(out_dir / "sweep_flips.csv", rows)
    _emit({"input": label, "bits": bits, "flip_mode": flip_mode, "seed": seed, "rows": rows})


@cli.command("device")
@click.option("--cycles", type=int, required=True)
@click.option("--seed", type=int, required=True)
@click.option("--mode", type=click.Choice(["ou", "iid"]), default="ou", show_default=True,
              help="ou: drifting threshold; iid: independent Gaussian switching voltages.")
@click.option("--scheme", type=click.Choice(["exact", "euler"]), default="exact", show_default=True)
@_device_option
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=_default_out, show_default=True)
def cmd_device(cycles, seed, mode, scheme, params_file, out_dir):
    """Simulate cycle-to-cycle threshold-voltage statistics."""
    if cycles < 1:
        raise click.BadParameter("need at least one cycle", param_hint="--cycles")
    params, transfer = _device_params(params_file)
    rng = EntropySource(seed, ("cli", "device", mode)).generator()
    if mode == "ou":
        vth = ou_trajectory(cycles, params, rng, scheme=scheme)
        expected_mean, expected_std = params.mu, ou_stationary_std(params, scheme)
        columns = {"cycle": np.arange(cycles), "vth": vth}
    else:
        vth, vhold = sample_switching_voltages(cycles, params, rng)
        expected_mean, expected_std = params.vth_mean, params.vth_std
        columns = {"cycle": np.arange(cycles), "vth": vth, "vhold": vhold}
    std_defined = cycles > 1
    std = float(np.std(vth, ddof=1)) if std_defined else None
    lines = [",".join(columns)]
    lines += [",".join(repr(v.item()) for v in row) for row in zip(*columns.values())]
    out = Path(out_dir) / f"trajectory_{mode}.csv"
    atomic_write(out, "\n".join(lines) + "\n")
    summary = {
        "cycles": cycles,
        "seed": seed,
        "mode": mode,
        "scheme": scheme if mode == "ou" else None,
        "params": params_dict(params, transfer),
        "mean": float(np.mean(vth)),
        "std": std,
        "std_defined": std_defined,
        "expected_mean": expected_mean,
        "expected_std": expected_std,
        "std_ratio": std / expected_std if std_defined and expected_std > 0 else None,
        "trajectory": out.name,
    }
    write_json(Path(out_dir) / f"device_{mode}.json", summary)
    _emit(summary)


@cli.command("compare")
@click.option("--a", "path_a", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--b", "path_b", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--ssim-map", type=click.Path(dir_okay=False), help="Write the SSIM map as an image.")
def cmd_compare(path_a, path_b, ssim_map):
    """SSIM and PSNR between two grayscale images."""
    a, b = read_image(path_a), read_image(path_b)
    s = ssim(a, b)
    if ssim_map:
        write_image(ssim_map_to_image(s), ssim_map)
    _emit({"a": path_a, "b": path_b, "ssim": s.mean, "ssim_window": s.window, "psnr_db": psnr(a, b).to_json()})


def main(argv=None) -> int:
    """Console entry point; failures become one JSON object on stderr."""
    try:
        cli.main(args=argv, prog_name="stochedge", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.Abort:
        _error("Abort", "aborted")
        return 1
    except click.ClickException as exc:
        _error(type(exc).__name__, exc.format_message())
        return exc.exit_code
    except Exception as exc:
        _error(type(exc).__name__, str(exc))
        return 1
    return 0


def _error(kind: str, message: str) -> None:
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
