"""Command-line entry points: simulate, serve, render-frame, calibrate, benchmark."""
from __future__ import annotations

import json

import click
import numpy as np
import yaml

from .benchmark import run_receiver_benchmark
from .calib import registration_rmse, solve_rigid_registration
from .imaging import save_raster
from .scenario import load_scenario
from .session import Session, cadence_times, run_scenario, PORTRAIT_HZ, SKELETON_HZ
from .wire import KIND_PORTRAIT, KIND_SKELETON, KIND_VIEWPOINT


@click.group()
def main():
    """Two-site touch-emulation engine on synthetic fixtures."""


@main.command()
@click.option("--scenario", "scenario_path", required=True,
              type=click.Path(exists=True), help="Scenario YAML file.")
@click.option("--trace", "trace_path", required=True, type=click.Path(),
              help="Output trace file (JSONL).")
@click.option("--seed", type=int, default=None, help="Override scenario seed.")
def simulate(scenario_path, trace_path, seed):
    """Run a two-site scenario and write its deterministic trace."""
    scenario = load_scenario(scenario_path)
    if seed is not None:
        scenario.seed = seed
    trace = run_scenario(scenario)
    trace.save(trace_path)
    touches = trace.touch_events()
    click.echo(f"trace hash {trace.hash()}")
    click.echo(f"{len(trace.of_type('frame'))} frames, {len(touches)} touch events")


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True),
              default=None, help="Serve config YAML (optional).")
@click.option("--port", type=int, default=8787)
@click.option("--host", default="127.0.0.1")
def serve(config_path, port, host):
    """Run the live session endpoint for the cockpit."""
    import uvicorn

    from .serve import create_app, load_serve_config

    config = load_serve_config(config_path) if config_path else None
    uvicorn.run(create_app(config), host=host, port=port, log_level="warning")


@main.command(name="render-frame")
@click.option("--scenario", "scenario_path", required=True,
              type=click.Path(exists=True))
@click.option("--t", "t_ms", required=True, type=int,
              help="Simulated time of the frame to dump (ms).")
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--site", default="A", type=click.Choice(["A", "B"]))
def render_frame(scenario_path, t_ms, out_path, site):
    """Run a scenario up to a timestamp and dump that receiver frame."""
    scenario = load_scenario(scenario_path)
    session = Session(scenario)
    other = {"A": "B", "B": "A"}
    events = []
    for name in ("A", "B"):
        for t in cadence_times(PORTRAIT_HZ, t_ms + 1):
            events.append((t, name, (KIND_PORTRAIT,)))
        for t in cadence_times(SKELETON_HZ, t_ms + 1):
            kinds = (KIND_VIEWPOINT, KIND_SKELETON) if t == 0 else (KIND_SKELETON,)
            events.append((t, name, kinds))
    arrivals = []
    for t, name, kinds in sorted(events, key=lambda e: e[0]):
        for msg in session.sender_step(name, t, kinds):
            at = session.channels[(name, msg.kind)].arrival_time(t)
            if at is not None and at <= t_ms:
                arrivals.append((at, other[name], msg))
    for at, dest, msg in sorted(arrivals, key=lambda a: a[0]):
        session.deliver(dest, msg, at)
    result = session.receiver_step(site, t_ms)
    if result is None:
        raise click.ClickException(f"no portrait delivered to site {site} by t={t_ms}")
    save_raster(out_path, {"rgb": result.frame})
    click.echo(f"wrote {out_path} (d={result.d}, alpha_g={result.alpha_g:.4f})")


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True),
              help="YAML with 'points_screen' and 'points_tracker' lists.")
def calibrate(config_path):
    """Solve the rigid registration from recorded touch correspondences."""
    with open(config_path) as fh:
        data = yaml.safe_load(fh)
    p = np.asarray(data["points_screen"], dtype=float)
    q = np.asarray(data["points_tracker"], dtype=float)
    T = solve_rigid_registration(p, q)
    rmse = registration_rmse(T, p, q)
    click.echo(json.dumps({"transform": [[round(v, 9) for v in row] for row in T],
                           "rmse_m": rmse}, indent=2))


@main.command()
@click.option("--frames", type=int, default=300)
@click.option("--width", type=int, default=320)
@click.option("--height", type=int, default=240)
def benchmark(frames, width, height):
    """Measure the receiver frame time (mesh render + fusion + detection)."""
    result = run_receiver_benchmark(frames, width, height)
    click.echo(result.summary())
    budget = 1000.0 / 30.0
    status = "OK" if result.median_ms <= budget else "OVER BUDGET"
    click.echo(f"30 FPS budget {budget:.1f} ms: {status}")


if __name__ == "__main__":
    main()
