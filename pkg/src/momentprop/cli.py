"""Command-line front end.

Subcommands:
  propagate --network F --input F --output F      forward moments through a network
  oracle    --network F --input F --samples N --seed S --sigmas K --report F
                                                  per-layer analytic-vs-sampled comparison
  figure    --which relu|bce --output F           CSV sweeps of the activation/loss curves

Exit codes: 0 success, 1 validation or tolerance failure, 2 I/O or parse error.
Output files are written atomically; a nonzero exit leaves no partial file.
"""

import argparse
import csv
import io
import json
import os
import sys
import tempfile

import numpy as np

from .network import NetworkSpec, forward_trace, load_network
from .nonlinear import relu_moments, sigmoid
from .oracle import MC_ABS_FLOOR, sample_forward
from .tensors import MomentTensor, ValidationError

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2

# Fixed pass tolerance for sigmoid layers in oracle reports: their moment
# formulas are approximations, so they are judged against this absolute band
# (plus the sampling band) instead of standard errors alone.  The calibrated
# worst-case approximation error over mu in [-6, 6], sigma <= 2 is 0.019 for
# the mean and 0.017 for the variance.
SIGMOID_ABS_TOL = 0.03

_FIGURE_SIGMAS = (0.5, 1.0, 2.0)


def _read_text(path: str) -> str:
    with open(path, "r", encoding="utf-8") as handle:
        return handle.read()


def _write_atomic(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _load_network_file(path: str) -> NetworkSpec:
    return load_network(_read_text(path))


def cmd_propagate(network_path: str, input_path: str, output_path: str) -> int:
    net = _load_network_file(network_path)
    tensor = MomentTensor.from_json(_read_text(input_path))
    trace = forward_trace(net, tensor)
    result = trace[-1] if trace else tensor
    _write_atomic(output_path, result.to_json() + "\n")
    print(f"propagated {len(net.layers)} layers -> {output_path}")
    return EXIT_OK


def _layer_report(index, layer, analytic, estimate, sigmas):
    mean_diff = np.abs(analytic.means - estimate.means)
    var_diff = np.abs(analytic.variances - estimate.variances)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(
            estimate.variances > 0.0,
            np.abs(analytic.variances / np.where(estimate.variances > 0, estimate.variances, 1.0) - 1.0),
            np.where(analytic.variances == 0.0, 0.0, np.inf),
        )
    if layer.kind == "sigmoid":
        mean_band = SIGMOID_ABS_TOL + sigmas * estimate.se_mean
        var_band = SIGMOID_ABS_TOL + sigmas * estimate.se_var
    else:
        mean_band = sigmas * estimate.se_mean + MC_ABS_FLOOR
        var_band = sigmas * estimate.se_var + MC_ABS_FLOOR
    ok = bool(np.all(mean_diff <= mean_band) and np.all(var_diff <= var_band))
    report = {
        "index": index,
        "kind": layer.kind,
        "pass": ok,
        "max_abs_mean_diff": float(mean_diff.max()),
        "max_var_ratio_dev": float(ratio.max()),
        "analytic": analytic.to_json_dict(),
        "oracle": estimate.to_json_dict(),
    }
    table = {
        "mean_diff": mean_diff.ravel(),
        "mean_band": np.broadcast_to(mean_band, analytic.shape).ravel(),
        "var_diff": var_diff.ravel(),
        "var_band": np.broadcast_to(var_band, analytic.shape).ravel(),
    }
    return report, ok, table


def _print_diff_table(index, kind, table, limit=50):
    print(f"layer {index} ({kind}) exceeded tolerance; per-element diffs:")
    print("  elem  |mean diff|   mean band    |var diff|    var band")
    count = table["mean_diff"].size
    for e in range(min(count, limit)):
        print(
            f"  {e:4d}  {table['mean_diff'][e]:.6e}  {table['mean_band'][e]:.6e}"
            f"  {table['var_diff'][e]:.6e}  {table['var_band'][e]:.6e}"
        )
    if count > limit:
        print(f"  ... ({count - limit} more elements)")


def cmd_oracle(
    network_path: str,
    input_path: str,
    samples: int,
    seed: int,
    sigmas: float,
    report_path: str,
) -> int:
    net = _load_network_file(network_path)
    tensor = MomentTensor.from_json(_read_text(input_path))
    trace = forward_trace(net, tensor)

    layers = []
    all_ok = True
    current = tensor
    for i, layer in enumerate(net.layers):
        estimate = sample_forward(layer, current, samples, seed + i)
        report, ok, table = _layer_report(i, layer, trace[i], estimate, sigmas)
        layers.append(report)
        status = "pass" if ok else "FAIL"
        print(
            f"layer {i} ({layer.kind}): {status}  "
            f"max|mean diff|={report['max_abs_mean_diff']:.3e}  "
            f"max var ratio dev={report['max_var_ratio_dev']:.3e}"
        )
        if not ok:
            all_ok = False
            _print_diff_table(i, layer.kind, table)
        current = trace[i]

    if not all_ok:
        print("oracle comparison FAILED; no report written")
        return EXIT_VALIDATION
    document = {
        "samples": samples,
        "seed": seed,
        "sigmas": sigmas,
        "pass": True,
        "layers": layers,
    }
    _write_atomic(report_path, json.dumps(document, indent=2) + "\n")
    print(f"oracle comparison passed -> {report_path}")
    return EXIT_OK


def _relu_figure_rows():
    mus = np.linspace(-5.0, 5.0, 201)
    for sig in _FIGURE_SIGMAS:
        means, variances = relu_moments(mus, np.full_like(mus, sig * sig))
        for mu, m, v in zip(mus, means, variances):
            yield (float(mu), sig, float(m), float(v))


def _bce_figure_rows():
    mus = np.linspace(-6.0, 6.0, 241)
    standard = np.logaddexp(0.0, -mus)  # label y = 1
    for sig in (0.0,) + _FIGURE_SIGMAS:
        p = sigmoid(mus)
        expected = standard + 0.5 * p * (1.0 - p) * (sig * sig)
        for mu, e, s in zip(mus, expected, standard):
            yield (float(mu), sig, float(e), float(s))


def cmd_figure(which: str, output_path: str) -> int:
    if which == "relu":
        header = ("mu", "sigma", "mean_out", "var_out")
        rows = _relu_figure_rows()
    elif which == "bce":
        header = ("mu", "sigma", "expected_loss", "standard_loss")
        rows = _bce_figure_rows()
    else:
        raise ValidationError(f"unknown figure name {which!r}")
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    _write_atomic(output_path, buffer.getvalue())
    print(f"wrote figure data -> {output_path}")
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="momentprop",
        description="Propagate element-wise Gaussian moments through CNN building blocks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("propagate", help="forward moments through a network file")
    p.add_argument("--network", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)

    o = sub.add_parser("oracle", help="compare analytic moments against the sampling oracle")
    o.add_argument("--network", required=True)
    o.add_argument("--input", required=True)
    o.add_argument("--samples", type=int, default=100_000)
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--sigmas", type=float, default=6.0)
    o.add_argument("--report", required=True)

    f = sub.add_parser("figure", help="emit activation/loss sweep data as CSV")
    f.add_argument("--which", required=True, choices=("relu", "bce"))
    f.add_argument("--output", required=True)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "propagate":
            return cmd_propagate(args.network, args.input, args.output)
        if args.command == "oracle":
            if args.samples < 2:
                raise ValidationError(f"--samples must be >= 2, got {args.samples}")
            return cmd_oracle(
                args.network, args.input, args.samples, args.seed, args.sigmas, args.report
            )
        return cmd_figure(args.which, args.output)
    except json.JSONDecodeError as exc:
        print(
            f"error: parse error at offset {exc.pos} "
            f"(line {exc.lineno}, column {exc.colno}): {exc.msg}",
            file=sys.stderr,
        )
        return EXIT_IO
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
