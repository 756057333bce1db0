"""Command-line entry point for grid-shield."""

from __future__ import annotations

import argparse
import asyncio
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from grid_shield.crypto.bench import bench_ciphers
from grid_shield.crypto.curve import CURVES
from grid_shield.crypto.ecdh import KeyPair
from grid_shield.crypto.keystore import KeyStore, load_keypair, save_keypair
from grid_shield.data.ingest import IngestSchema, ingest_csv, write_csv
from grid_shield.data.series import MeterSeries
from grid_shield.data.stats import NormStats, correlation_matrix, describe, split_series
from grid_shield.data.synth import synth
from grid_shield.data.theft import inject_theft
from grid_shield.data.windows import windowize
from grid_shield.errors import (
    ConfigurationError,
    ContractError,
    DataError,
    GridShieldError,
    ProtocolError,
)
from grid_shield.evaluation.attack import AttackReport, intercept, reconstruction_attack
from grid_shield.evaluation.experiments import experiment_auc, fit_baseline, train_detector
from grid_shield.evaluation.reports import write_table, write_trace_csv
from grid_shield.model.checkpoint import load_checkpoint, restore_parts
from grid_shield.model.config import ModelConfig
from grid_shield.model.params import init_params
from grid_shield.model.trainer import LossRecord
from grid_shield.protocol.session import ClientSession
from grid_shield.protocol.transport import WS_PATH, WebSocketTransport, create_app
from grid_shield.settings import Settings, configure_logging, load_settings
from grid_shield.splitlearn.engine import Detection, detect, score_windows, train_epoch
from grid_shield.splitlearn.manifest import RunManifest, write_loss_log
from grid_shield.splitlearn.parties import ServerEndpoint, SplitClient, local_pair
from grid_shield.splitlearn.threshold import DriftMonitor, calibrate_threshold

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_PROTOCOL = 2
EXIT_DATA = 3

CLIENT_CHECKPOINT = "client.ckpt"
SERVER_CHECKPOINT = "server.ckpt"
NORM_FILE = "norm.json"
CALIBRATION_FILE = "calibration.json"
MANIFEST_FILE = "manifest.txt"
LOSS_LOG_FILE = "loss_log.csv"


class UsageError(Exception):
    """Bad command line."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="settings JSON file")
    parser = _Parser(prog="grid-shield", description="Privacy-preserving split-learning theft detection")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("keygen", help="create a key file and register its public key", parents=[common])
    p.add_argument("--out", required=True, help="key file to write")
    p.add_argument("--registry", help="registry file to add the public key to")
    p.add_argument("--party", help="party id for the registry entry")
    p.add_argument("--curve", default="P-256", choices=sorted(CURVES))

    p = sub.add_parser("server", help="serve split training over WebSocket", parents=[common])
    p.add_argument("--listen", required=True, help="HOST:PORT")
    p.add_argument("--keys", required=True)
    p.add_argument("--registry", required=True)
    p.add_argument("--id", default="server")
    p.add_argument("--checkpoint", help="start from a server checkpoint")
    p.add_argument("--save", help="write the last session's server checkpoint here on shutdown")

    p = sub.add_parser("client", help="train against a remote server", parents=[common])
    p.add_argument("--connect", required=True, help="HOST:PORT or ws:// URL")
    p.add_argument("--keys", required=True)
    p.add_argument("--registry", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--id", default="client")
    p.add_argument("--server-id", default="server")
    p.add_argument("--out", default="run", help="run directory")

    p = sub.add_parser("synth", help="write a synthetic meter series", parents=[common])
    p.add_argument("--days", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--households", type=int, default=1)
    p.add_argument("--out", default="synth.csv")

    p = sub.add_parser("inject", help="under-report the grid total over one episode", parents=[common])
    p.add_argument("--data", required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--start", type=int, required=True)
    p.add_argument("--duration", type=int, required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("train", help="train both parties in-process over the protocol", parents=[common])
    p.add_argument("--data", help="meter CSV; synthetic data when omitted")
    p.add_argument("--out", default="run", help="run directory")

    p = sub.add_parser("detect", help="score a series with a trained run", parents=[common])
    p.add_argument("--run", default="run")
    p.add_argument("--data", help="meter CSV; synthetic data when omitted")
    p.add_argument("--quantile", type=float, default=None)
    p.add_argument("--out", help="per-window CSV")

    p = sub.add_parser("attack", help="reconstruction attack on intercepted T_Mid", parents=[common])
    p.add_argument("--mode", choices=["plain", "masked", "both"], default="both")
    p.add_argument("--data", help="meter CSV; synthetic data when omitted")

    p = sub.add_parser("eval", help="evaluation experiments")
    eval_sub = p.add_subparsers(dest="experiment", required=True, parser_class=_Parser)
    q = eval_sub.add_parser("auc", help="AUC per theft level", parents=[common])
    q.add_argument("--levels", type=float, nargs="+", default=None)
    q.add_argument("--data", help="meter CSV; synthetic data when omitted")
    q.add_argument("--baseline", action="store_true", help="add the autoencoder column")

    p = sub.add_parser("bench", help="masking against block-cipher baselines", parents=[common])
    p.add_argument("--payload-mib", type=float, default=1.0)
    p.add_argument("--runs", type=int, default=9)

    p = sub.add_parser("stats", help="exploratory statistics")
    stats_sub = p.add_subparsers(dest="stat", required=True, parser_class=_Parser)
    for name in ("corr", "describe"):
        q = stats_sub.add_parser(name, parents=[common])
        q.add_argument("--data", help="meter CSV; synthetic data when omitted")
        q.add_argument("--out", help="CSV output")
    return parser


def _load_series(path: Optional[str], settings: Settings) -> MeterSeries:
    if path:
        return ingest_csv(path, IngestSchema(gaps=settings.data.gaps))
    if settings.data.source:
        return ingest_csv(settings.data.source, IngestSchema(gaps=settings.data.gaps))
    d = settings.data
    return synth(d.synth_seed, d.synth_days, d.households)


def _websocket_url(address: str) -> str:
    if address.startswith(("ws://", "wss://")):
        return address
    return f"ws://{address}{WS_PATH}"


def _split_address(address: str) -> tuple[str, int]:
    host, sep, port = address.rpartition(":")
    if not sep or not port.isdigit():
        raise ConfigurationError(f"expected HOST:PORT, got {address!r}")
    return host or "0.0.0.0", int(port)


def _save_run(
    out: Path,
    client: SplitClient,
    norm: NormStats,
    model_cfg: ModelConfig,
    settings: Settings,
    loss_log: list[LossRecord],
    calibration: np.ndarray,
    dataset_hash: str,
    server_save: Optional[ServerEndpoint] = None,
) -> RunManifest:
    out.mkdir(parents=True, exist_ok=True)
    client.save(out / CLIENT_CHECKPOINT)
    if server_save is not None and server_save.latest is not None:
        server_save.latest.save(out / SERVER_CHECKPOINT)
    (out / NORM_FILE).write_text(json.dumps(norm.to_dict(), indent=2), encoding="utf-8")
    (out / CALIBRATION_FILE).write_text(
        json.dumps({"scores": [float(s) for s in calibration]}), encoding="utf-8"
    )
    write_loss_log(loss_log, out / LOSS_LOG_FILE)
    manifest = RunManifest.for_run(
        settings.train.seed,
        dataset_hash,
        model=model_cfg.to_dict(),
        train=settings.train.to_dict(),
        protocol=settings.protocol.to_dict(),
        data=settings.data.to_dict(),
        steps=len(loss_log),
    )
    manifest.save(out / MANIFEST_FILE)
    return manifest


def cmd_keygen(args: argparse.Namespace, settings: Settings) -> int:
    curve = CURVES[args.curve]
    keypair = KeyPair.generate(curve)
    save_keypair(keypair, args.out)
    print(f"wrote {args.out}")
    if args.registry:
        if not args.party:
            raise UsageError("--registry needs --party")
        KeyStore(args.registry, curve).register(args.party, keypair.pk)
        print(f"registered {args.party} in {args.registry}")
    return EXIT_OK


def cmd_server(args: argparse.Namespace, settings: Settings) -> int:
    from aiohttp import web

    curve = settings.protocol.curve_params
    keypair = load_keypair(args.keys, curve)
    registry = KeyStore(args.registry, curve)
    params = init_params(settings.model, seed=settings.train.seed)
    if args.checkpoint:
        endpoint = ServerEndpoint.from_checkpoint(
            args.checkpoint, args.id, keypair, registry, params, settings.model, settings.train, settings.protocol
        )
    else:
        endpoint = ServerEndpoint(
            args.id, keypair, registry, params, settings.model, settings.train, settings.protocol
        )
    app = create_app(endpoint.handle, on_disconnect=endpoint.disconnect)

    async def on_cleanup(_: web.Application) -> None:
        endpoint.close()
        if args.save and endpoint.latest is not None:
            endpoint.latest.save(args.save)
            logger.info("Saved server checkpoint to %s", args.save)

    app.on_cleanup.append(on_cleanup)
    host, port = _split_address(args.listen)
    web.run_app(app, host=host, port=port, print=None)
    return EXIT_OK


async def _client_run(args: argparse.Namespace, settings: Settings) -> int:
    series = _load_series(args.data, settings)
    train, evaluation = split_series(series, settings.data.train_frac)
    norm = NormStats.fit(train)
    norm.audit(train, evaluation)
    model_cfg = replace(settings.model, feature_dim=norm.feature_dim)
    tc = settings.train

    curve = settings.protocol.curve_params
    keypair = load_keypair(args.keys, curve)
    registry = KeyStore(args.registry, curve)
    session = ClientSession(args.id, keypair, registry, args.server_id, settings.protocol)
    params = init_params(model_cfg, seed=tc.seed)
    client = SplitClient(session, params.enc, model_cfg, tc)

    transport = WebSocketTransport(
        _websocket_url(args.connect), settings.protocol.retries, settings.protocol.timeout
    )
    async with transport:
        windows = windowize(train, tc.seq_len, tc.stride, norm)
        loss_log: list[LossRecord] = []
        for epoch in range(tc.epochs):
            loss_log.extend(await train_epoch(client, transport, windows, tc, epoch=epoch))
        calibration = await score_windows(
            client, transport, windowize(evaluation, tc.seq_len, tc.stride, norm), tc.batch_size
        )
    session.close()
    _save_run(Path(args.out), client, norm, model_cfg, settings, loss_log, calibration, series.fingerprint())
    print(f"trained {len(loss_log)} steps, run saved to {args.out}")
    return EXIT_OK


def cmd_synth(args: argparse.Namespace, settings: Settings) -> int:
    series = synth(args.seed, args.days, args.households)
    write_csv(series, args.out)
    print(f"wrote {len(series)} steps to {args.out}")
    return EXIT_OK


def cmd_inject(args: argparse.Namespace, settings: Settings) -> int:
    series = ingest_csv(args.data, IngestSchema(gaps=settings.data.gaps))
    tampered = inject_theft(series, args.alpha, args.start, args.duration)
    write_csv(tampered, args.out)
    print(f"wrote {args.out} ({len(tampered.episodes)} episodes)")
    return EXIT_OK


async def _train_run(args: argparse.Namespace, settings: Settings) -> int:
    series = _load_series(args.data, settings)
    run = await train_detector(
        series, settings.model, settings.train, settings.protocol, settings.data.train_frac
    )
    calibration = await run.score(run.windows(run.evaluation))
    run.client.session.close()
    _save_run(
        Path(args.out),
        run.client,
        run.norm,
        run.model_cfg,
        settings,
        run.loss_log,
        calibration,
        series.fingerprint(),
        server_save=run.endpoint,
    )
    print(f"trained {len(run.loss_log)} steps, run saved to {args.out}")
    return EXIT_OK


async def _detect_run(args: argparse.Namespace, settings: Settings) -> int:
    run_dir = Path(args.run)
    manifest = RunManifest.load(run_dir / MANIFEST_FILE)
    model_cfg = ModelConfig.from_dict(manifest["model"])
    norm_file = run_dir / NORM_FILE
    calibration_file = run_dir / CALIBRATION_FILE
    if not norm_file.exists() or not calibration_file.exists():
        raise ConfigurationError(f"{run_dir} is not a trained run")
    norm = NormStats.from_dict(json.loads(norm_file.read_text(encoding="utf-8")))
    calibration = np.asarray(json.loads(calibration_file.read_text(encoding="utf-8"))["scores"])

    params = init_params(model_cfg)
    restore_parts(params, load_checkpoint(run_dir / SERVER_CHECKPOINT), ["dec", "dis"])
    client, endpoint, transport = local_pair(model_cfg, settings.train, settings.protocol, params=params)
    client.load(run_dir / CLIENT_CHECKPOINT)

    quantile = args.quantile if args.quantile is not None else settings.data.quantile
    threshold = calibrate_threshold(calibration, quantile)
    series = _load_series(args.data, settings)
    windows = windowize(series, settings.train.seq_len, settings.train.stride, norm)
    detection: Detection = await detect(client, transport, windows, threshold)
    client.session.close()
    endpoint.close()

    monitor = DriftMonitor.from_scores(calibration, settings.drift)
    chunk = max(1, 96 // settings.train.stride)
    state = monitor.state
    for begin in range(0, len(detection.scores), chunk):
        state = monitor.observe(detection.scores[begin:begin + chunk])

    frame = pd.DataFrame(
        {
            "end_index": windows.end_index,
            "timestamp": pd.to_datetime(series.timestamps[windows.end_index]).strftime("%Y-%m-%dT%H:%M:%S"),
            "score": detection.scores,
            "anomaly": detection.anomalies.astype(int),
        }
    )
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(args.out, index=False, lineterminator="\n")
    flagged = int(detection.anomalies.sum())
    print(f"threshold {threshold:.6f} (quantile {quantile})")
    print(f"{flagged} of {len(detection.scores)} windows flagged as anomaly")
    print(f"drift: {state.value}")
    return EXIT_OK


async def _attack_run(args: argparse.Namespace, settings: Settings) -> int:
    series = _load_series(args.data, settings)
    modes = ["plain", "masked"] if args.mode == "both" else [args.mode]
    reports: dict[str, AttackReport] = {}
    for mode in modes:
        protocol = replace(settings.protocol, masking=(mode == "masked"))
        run = await train_detector(series, settings.model, settings.train, protocol, settings.data.train_frac)
        windows = windowize(series, settings.train.seq_len, settings.attack.stride, run.norm)
        pairs = await intercept(run.client, run.transport, windows, settings.train.batch_size)
        run.client.session.close()
        reports[mode] = reconstruction_attack(pairs, mode, settings.attack)  # type: ignore[arg-type]

    reports_dir = Path(settings.reports_dir)
    summary = "\n\n".join(r.summary() for r in reports.values())
    frame = pd.DataFrame(
        [{"mode": m, "mean_r2": r.mean_r2, "samples": r.per_sample_r2.size} for m, r in reports.items()]
    )
    write_table(frame, summary, reports_dir, "attack")
    if len(reports) == 2:
        real, recon_plain = reports["plain"].trace(0)
        _, recon_masked = reports["masked"].trace(0)
        write_trace_csv(reports_dir / "attack_trace.csv", real, recon_plain, recon_masked)
    manifest = RunManifest.for_run(settings.train.seed, series.fingerprint(), attack=settings.attack.to_dict())
    manifest.save(reports_dir / "attack_manifest.txt")
    print(summary)
    return EXIT_OK


async def _eval_auc_run(args: argparse.Namespace, settings: Settings) -> int:
    series = _load_series(args.data, settings)
    tc = settings.train
    run = await train_detector(series, settings.model, tc, settings.protocol, settings.data.train_frac)
    baseline = fit_baseline(run.windows(run.train), seed=tc.seed) if args.baseline else None
    levels = args.levels if args.levels is not None else settings.data.levels
    table = await experiment_auc(run.score, run.evaluation, run.norm, tc.seq_len, tc.stride, levels, baseline)
    run.client.session.close()
    write_table(table.to_frame(), table.format(), settings.reports_dir, "auc")
    print(table.format())
    return EXIT_OK


def cmd_bench(args: argparse.Namespace, settings: Settings) -> int:
    table = bench_ciphers(int(args.payload_mib * 1024 * 1024), runs=args.runs)
    write_table(table.to_frame(), table.format(), settings.reports_dir, "bench")
    print(table.format())
    return EXIT_OK


def cmd_stats(args: argparse.Namespace, settings: Settings) -> int:
    series = _load_series(args.data, settings)
    if args.stat == "corr":
        frame = correlation_matrix(series).to_frame()
    else:
        frame = describe(series)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(args.out, lineterminator="\n", float_format="%.6f")
    print(frame.to_string(float_format=lambda v: f"{v:.3f}"))
    return EXIT_OK


def _dispatch(args: argparse.Namespace, settings: Settings) -> int:
    command = args.command
    if command == "keygen":
        return cmd_keygen(args, settings)
    if command == "server":
        return cmd_server(args, settings)
    if command == "client":
        return asyncio.run(_client_run(args, settings))
    if command == "synth":
        return cmd_synth(args, settings)
    if command == "inject":
        return cmd_inject(args, settings)
    if command == "train":
        return asyncio.run(_train_run(args, settings))
    if command == "detect":
        return asyncio.run(_detect_run(args, settings))
    if command == "attack":
        return asyncio.run(_attack_run(args, settings))
    if command == "eval":
        return asyncio.run(_eval_auc_run(args, settings))
    if command == "bench":
        return cmd_bench(args, settings)
    if command == "stats":
        return cmd_stats(args, settings)
    raise UsageError(f"unknown command {command!r}")


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run one command and return its exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        settings = load_settings(args.config)
        configure_logging(settings.log_level)
        return _dispatch(args, settings)
    except SystemExit as e:
        return int(e.code or 0)
    except UsageError as e:
        print(e, file=sys.stderr)
        return EXIT_USAGE
    except ProtocolError as e:
        logger.error("Protocol aborted: %s", e)
        return EXIT_PROTOCOL
    except DataError as e:
        logger.error("Data error: %s", e)
        return EXIT_DATA
    except (ConfigurationError, ContractError) as e:
        logger.error("%s", e)
        return EXIT_USAGE
    except GridShieldError as e:
        logger.error("%s", e)
        return EXIT_USAGE
    except OSError as e:
        logger.error("File error: %s", e)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
