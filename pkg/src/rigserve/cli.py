"""Operator entry points.

Subcommands: serve, validate, play, replay-aus, say, puppet.  Every
subcommand has deterministic exit codes and a --json output mode; --dry-run
outputs are byte-identical across runs.
"""

from __future__ import annotations

import json
import os
import sys
import time
from importlib import resources

import click

from rigserve import lipsync, replay, rig
from rigserve.client import ClientError, LineClient
from rigserve.config import ConfigError, ServerConfig

EXIT_OK = 0
EXIT_FINDINGS = 1
EXIT_CONFIG = 2
EXIT_BIND = 3

_JSON = {"separators": (",", ":"), "sort_keys": True}


def _parse_server(value: str) -> tuple[str, int]:
    host, _, port = value.rpartition(":")
    if not host or not port.isdigit():
        raise click.BadParameter(f"expected host:port, got {value!r}")
    return host, int(port)


@click.group()
@click.option("--server", "server_addr", default="127.0.0.1:4618", show_default=True,
              help="Rig server address (host:port).")
@click.option("--json", "json_mode", is_flag=True, help="Machine-parseable output.")
@click.option("--virtual-time", is_flag=True,
              help="Do not sleep between scripted messages; replay offline where supported.")
@click.pass_context
def main(ctx: click.Context, server_addr: str, json_mode: bool, virtual_time: bool) -> None:
    """Control a rigserve avatar server."""
    ctx.obj = {
        "server": _parse_server(server_addr),
        "json": json_mode,
        "virtual_time": virtual_time,
    }


def _load_config(config_path: str | None) -> ServerConfig:
    path = config_path or os.environ.get("RIGSERVE_CONFIG")
    if path:
        return ServerConfig.from_file(path)
    return ServerConfig()


@main.command()
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="Config file (JSON); defaults to $RIGSERVE_CONFIG or built-ins.")
@click.option("--print-config", is_flag=True, help="Echo the effective config and exit.")
@click.pass_context
def serve(ctx: click.Context, config_path: str | None, print_config: bool) -> None:
    """Run the avatar server until interrupted."""
    try:
        config = _load_config(config_path)
        # surface rig problems as config errors before binding anything
        defs = rig.load_rig_file(config.rig_path) if config.rig_path else rig.load_default_rig()
    except (ConfigError, rig.RigError, OSError) as e:
        click.echo(f"config error: {e}", err=True)
        ctx.exit(EXIT_CONFIG)
    if print_config:
        click.echo(json.dumps(config.to_dict(), **_JSON))
        ctx.exit(EXIT_OK)
    from rigserve.server import RigServer  # deferred: pulls in asyncio/websockets
    import asyncio

    async def _run() -> None:
        server = RigServer(config, defs)
        await server.start()
        import signal

        loop = asyncio.get_running_loop()
        for sig in (signal.SIGINT, signal.SIGTERM):
            try:
                loop.add_signal_handler(sig, server.request_stop)
            except NotImplementedError:
                pass
        await server.serve_forever()

    try:
        asyncio.run(_run())
    except OSError as e:
        click.echo(f"bind error: {e}", err=True)
        ctx.exit(EXIT_BIND)
    ctx.exit(EXIT_OK)


@main.command()
@click.argument("rig_path", type=click.Path())
@click.pass_context
def validate(ctx: click.Context, rig_path: str) -> None:
    """Validate a rig definition file; exit 0 only if the report is empty."""
    json_mode = ctx.obj["json"]
    try:
        with open(rig_path, "r", encoding="utf-8") as f:
            defs = rig.load_rig_definition(f.read())
    except (OSError, rig.RigError) as e:
        if json_mode:
            click.echo(json.dumps({"error": str(e)}, **_JSON))
        else:
            click.echo(f"invalid rig: {e}", err=True)
        ctx.exit(EXIT_CONFIG)
    report = rig.validate_presets(defs)
    if json_mode:
        click.echo(json.dumps({"findings": report.lines()}, **_JSON))
    else:
        for line in report.lines():
            click.echo(line)
        click.echo(f"{len(report.findings)} finding(s)")
    ctx.exit(EXIT_OK if report.ok else EXIT_FINDINGS)


def _compiled_table(track: lipsync.PhonemeTrack, tick_hz: float,
                    ramp: lipsync.RampConfig, defs: rig.RigDefinition) -> list[str]:
    period = 1000.0 / tick_hz
    return [
        json.dumps({"tick": k, "t_ms": k * period, "weights": weights.weights}, **_JSON)
        for k, weights in lipsync.compile_track(track, tick_hz, ramp, defs)
    ]


def _play_track(ctx: click.Context, track: lipsync.PhonemeTrack, offset_ms: float,
                dry_run: bool, tick_hz: float) -> None:
    defs = rig.load_default_rig()
    ramp = lipsync.RampConfig()
    if dry_run:
        for line in _compiled_table(track, tick_hz, ramp, defs):
            click.echo(line)
        ctx.exit(EXIT_OK)
    host, port = ctx.obj["server"]
    try:
        with LineClient(host, port) as client:
            events = [
                {"ph": e.phoneme, "start_ms": e.start_ms, "dur_ms": e.duration_ms}
                for e in track.events
            ]
            resp = client.request_ok(
                {"cmd": "PlayVisemeTrack", "track": events, "offset_ms": offset_ms}
            )
            start = (resp.payload or {}).get("track_start_ms")
            if ctx.obj["json"]:
                click.echo(json.dumps(
                    {"track_start_ms": start, "total_ms": track.total_ms}, **_JSON))
            else:
                click.echo(f"track started at server time {start} ms "
                           f"({track.total_ms} ms long)")
            if not ctx.obj["virtual_time"]:
                time.sleep((track.total_ms + ramp.ramp_ms) / 1000.0)
    except ClientError as e:
        click.echo(f"error: {e}", err=True)
        ctx.exit(EXIT_FINDINGS)
    ctx.exit(EXIT_OK)


@main.command()
@click.argument("track_path", type=click.Path())
@click.option("--offset-ms", default=0.0, show_default=True,
              help="Signed playback offset for audio alignment.")
@click.option("--dry-run", is_flag=True, help="Print the compiled tick table; do not connect.")
@click.option("--tick-hz", default=60.0, show_default=True, help="Tick rate for --dry-run.")
@click.pass_context
def play(ctx: click.Context, track_path: str, offset_ms: float, dry_run: bool, tick_hz: float) -> None:
    """Stream a phoneme track file to the server and wait for completion."""
    defs = rig.load_default_rig()
    try:
        with open(track_path, "r", encoding="utf-8") as f:
            track = lipsync.parse_phoneme_track(f.read(), defs)
    except (OSError, lipsync.LipsyncError) as e:
        click.echo(f"track error: {e}", err=True)
        ctx.exit(EXIT_CONFIG)
    _play_track(ctx, track, offset_ms, dry_run, tick_hz)


@main.command("replay-aus")
@click.argument("stream_path", type=click.Path())
@click.option("--alpha", type=float, default=None, help="Smoothing EMA coefficient (0, 1].")
@click.option("--threshold", type=float, default=None, help="Enable threshold rounding at this value.")
@click.option("--speed", default=1.0, show_default=True, help="Timestamp playback speed factor.")
@click.pass_context
def replay_aus(ctx: click.Context, stream_path: str, alpha: float | None,
               threshold: float | None, speed: float) -> None:
    """Replay a recorded AU probability stream as AuFrame commands."""
    from rigserve.retarget import AuStreamError, parse_au_stream

    try:
        with open(stream_path, "r", encoding="utf-8") as f:
            frames = parse_au_stream(f.read())
    except (OSError, AuStreamError) as e:
        click.echo(f"stream error: {e}", err=True)
        ctx.exit(EXIT_CONFIG)
    if speed <= 0:
        click.echo("error: --speed must be > 0", err=True)
        ctx.exit(EXIT_CONFIG)
    host, port = ctx.obj["server"]
    sent = 0
    try:
        with LineClient(host, port) as client:
            started = time.monotonic()
            for frame in frames:
                if not ctx.obj["virtual_time"]:
                    due = frame.timestamp_ms / 1000.0 / speed
                    lag = due - (time.monotonic() - started)
                    if lag > 0:
                        time.sleep(lag)
                obj = {"cmd": "AuFrame", "t_ms": frame.timestamp_ms,
                       "probs": list(frame.probabilities)}
                if alpha is not None:
                    obj["alpha"] = alpha
                if threshold is not None:
                    obj["threshold"] = threshold
                client.request_ok(obj)
                sent += 1
    except ClientError as e:
        click.echo(f"error: {e}", err=True)
        ctx.exit(EXIT_FINDINGS)
    if ctx.obj["json"]:
        click.echo(json.dumps({"frames_sent": sent}, **_JSON))
    else:
        click.echo(f"sent {sent} AU frame(s)")
    ctx.exit(EXIT_OK)


def _default_lexicon_text() -> str:
    return resources.files("rigserve.data").joinpath("demo_lexicon.txt").read_text("utf-8")


@main.command()
@click.argument("text")
@click.option("--lexicon", "lexicon_path", type=click.Path(), default=None,
              help="Pronunciation table (word: ph1 ph2 ...); default is the demo lexicon.")
@click.option("--rate", default=10.0, show_default=True, help="Phonemes per second.")
@click.option("--offset-ms", default=0.0, show_default=True)
@click.option("--dry-run", is_flag=True, help="Print the compiled tick table; do not connect.")
@click.option("--tick-hz", default=60.0, show_default=True, help="Tick rate for --dry-run.")
@click.pass_context
def say(ctx: click.Context, text: str, lexicon_path: str | None, rate: float,
        offset_ms: float, dry_run: bool, tick_hz: float) -> None:
    """Lip-sync an utterance end to end via the lexicon."""
    defs = rig.load_default_rig()
    try:
        raw = (open(lexicon_path, encoding="utf-8").read()
               if lexicon_path else _default_lexicon_text())
        lexicon = lipsync.parse_lexicon(raw, defs)
    except (OSError, lipsync.LipsyncError) as e:
        click.echo(f"lexicon error: {e}", err=True)
        ctx.exit(EXIT_CONFIG)
    try:
        track = lipsync.text_to_phoneme_track(text, lexicon, rate)
    except lipsync.LexiconError as e:
        click.echo(f"error: {e}", err=True)
        ctx.exit(EXIT_FINDINGS)
    if not track.events:
        ctx.exit(EXIT_OK)
    _play_track(ctx, track, offset_ms, dry_run, tick_hz)


@main.command()
@click.argument("script_path", type=click.Path())
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="Server config for offline replay (tick rate, blink seed, smoothing).")
@click.option("--duration-ms", type=float, default=None,
              help="Replay length; defaults to the last command time + 2 s.")
@click.pass_context
def puppet(ctx: click.Context, script_path: str, config_path: str | None,
           duration_ms: float | None) -> None:
    """Run a timestamped command script.

    With --virtual-time the script replays offline against a virtual clock
    and prints one frame per line (byte-identical across runs); otherwise
    the commands stream to the server at their at_ms times.
    """
    try:
        with open(script_path, "r", encoding="utf-8") as f:
            script = replay.parse_puppet_script(f.read())
    except (OSError, replay.ScriptError) as e:
        click.echo(f"script error: {e}", err=True)
        ctx.exit(EXIT_CONFIG)
    if ctx.obj["virtual_time"]:
        try:
            config = _load_config(config_path)
        except ConfigError as e:
            click.echo(f"config error: {e}", err=True)
            ctx.exit(EXIT_CONFIG)
        result = replay.run_script(script, config, duration_ms=duration_ms)
        for line in result.frames:
            click.echo(line)
        ctx.exit(EXIT_OK)
    host, port = ctx.obj["server"]
    try:
        with LineClient(host, port) as client:
            started = time.monotonic()
            for entry in script.commands:
                lag = entry.at_ms / 1000.0 - (time.monotonic() - started)
                if lag > 0:
                    time.sleep(lag)
                resp = client.request(json.loads(entry.line))
                if ctx.obj["json"]:
                    click.echo(json.dumps(
                        {"id": resp.id, "status": resp.status, "code": resp.code}, **_JSON))
    except ClientError as e:
        click.echo(f"error: {e}", err=True)
        ctx.exit(EXIT_FINDINGS)
    ctx.exit(EXIT_OK)


if __name__ == "__main__":
    main()
