"""Command-line interface: serve, chat, eval, native tool passthrough, fixtures."""
from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .backends import make_backend_provider
from .core import decode_raster, detections_from_json, encode_raster, polygons_from_json, to_gray
from .evaluation import emit_report, load_queries, run_benchmark, score
from .fixture_server import BackgroundServer, create_fixture_app, load_manifest, run_fixture_server
from .fixtures import write_fixture_tree
from .gateway import GatewayConfig, create_app, engine_from_config
from .planner import PlannerLimits
from .registry import default_registry
from .vision import CannyParams, CountRequest, MaskRegion, canny, count_objects, polygonize


@click.group()
def main():
    """Tool-orchestrating agent for remote sensing imagery."""


def _config_from(config, **overrides) -> GatewayConfig:
    if config:
        return GatewayConfig.from_yaml(config, **overrides)
    values = {k: v for k, v in overrides.items() if v is not None}
    return GatewayConfig(**values)


@main.command()
@click.option("--config", type=click.Path(exists=True), help="gateway config YAML")
@click.option("--host", default=None)
@click.option("--port", type=int, default=None)
@click.option("--store", "store_root", type=click.Path(), default=None, help="file store root")
@click.option("--backend", default=None, help="openai:<model> or mock:<script.yaml>")
@click.option("--tool-server", default=None, help="base URL of the remote tool server")
@click.option("--tools", "tools_config", type=click.Path(exists=True), default=None,
              help="custom tool catalog YAML")
@click.option("--max-steps", type=int, default=None)
def serve(config, host, port, store_root, backend, tool_server, tools_config, max_steps):
    """Run the HTTP gateway."""
    import uvicorn

    cfg = _config_from(
        config, host=host, port=port, store_root=store_root, backend=backend,
        tool_server=tool_server, tools_config=tools_config, max_steps=max_steps,
    )
    engine = engine_from_config(cfg)
    click.echo(f"gateway listening on http://{cfg.host}:{cfg.port}")
    uvicorn.run(create_app(engine), host=cfg.host, port=cfg.port, log_level="info")


@main.command()
@click.option("--backend", required=True, help="openai:<model> or mock:<script.yaml>")
@click.option("--store", "store_root", type=click.Path(), default="./rsagent-store")
@click.option("--tool-server", default=None, help="base URL of the remote tool server")
@click.option("--image", "images", type=click.Path(exists=True), multiple=True,
              help="image(s) to upload before chatting")
@click.option("--max-steps", type=int, default=10)
def chat(backend, store_root, tool_server, images, max_steps):
    """Terminal REPL against one session; prints the agent's steps inline."""
    from .engine import Engine

    engine = Engine(
        registry=default_registry(remote_url=tool_server),
        backend_provider=make_backend_provider(backend),
        store_root=store_root,
        limits=PlannerLimits(max_steps=max_steps),
    )
    session = engine.new_session()
    for path in images:
        path = Path(path)
        mime = "image/jpeg" if path.suffix.lower() in (".jpg", ".jpeg") else "image/png"
        ref, caption = engine.upload(session, path.read_bytes(), mime, stem=path.stem)
        click.echo(f"uploaded {ref.name}: {caption}")

    def show(event):
        if event.kind == "thought" and event.payload["text"]:
            click.echo(click.style(f"  thought: {event.payload['text']}", dim=True))
        elif event.kind == "action":
            click.echo(f"  action: {event.payload['tool']} {json.dumps(event.payload['input'])}")
        elif event.kind == "observation":
            click.echo(f"  {event.payload['text']}")

    click.echo("type a request (empty line or Ctrl-D to quit)")
    while True:
        try:
            line = input("> ").strip()
        except EOFError:
            break
        if not line:
            break
        trace = engine.ask(session, line, on_event=show)
        outcome = trace.final
        if outcome.kind == "final_answer":
            click.echo(f"agent: {outcome.text}")
        elif outcome.kind == "clarify":
            click.echo(f"agent asks: {outcome.text}")
        else:
            click.echo(f"plan aborted ({outcome.reason}): {outcome.text}", err=True)


@main.command(name="eval")
@click.option("--dataset", required=True, type=click.Path(exists=True))
@click.option("--backend", required=True, help="openai:<model> or mock:<script.yaml>")
@click.option("--fixtures", type=click.Path(exists=True), default=None,
              help="fixture manifest.json; starts an in-process tool server")
@click.option("--out", "out_path", type=click.Path(), default=None, help="write structured report")
@click.option("--credit", type=click.Choice(["executed", "planned"]), default="executed",
              show_default=True, help="essential-task credit rule")
@click.option("--store", "store_root", type=click.Path(), default=None)
def eval_command(dataset, backend, fixtures, out_path, credit, store_root):
    """Run the task-planning benchmark and print a correctness table."""
    server = None
    tool_server_url = None
    fixtures_dir = None
    try:
        if fixtures:
            manifest = load_manifest(fixtures)
            server = BackgroundServer(create_fixture_app(manifest))
            tool_server_url = server.start()
            fixtures_dir = Path(fixtures).parent
        registry = default_registry(remote_url=tool_server_url)
        queries = load_queries(dataset, registry)
        provider = make_backend_provider(backend)
        results = run_benchmark(
            queries, registry, provider, fixtures=fixtures_dir,
            store_root=store_root, credit=credit,
        )
        report = score(results)
        click.echo(emit_report(report, "table"))
        failures = [r for r in results if not r.correct]
        if failures:
            click.echo(f"\nincorrect: {', '.join(r.query_id for r in failures)}")
        if out_path:
            Path(out_path).write_text(emit_report(report, "structured"))
            click.echo(f"report written to {out_path}")
    finally:
        if server is not None:
            server.stop()


@main.group()
def tool():
    """Run a native tool on local files."""


@tool.command(name="canny")
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--sigma", type=float, default=1.4, show_default=True)
@click.option("--low", type=float, default=0.10, show_default=True)
@click.option("--high", type=float, default=0.20, show_default=True)
def tool_canny(in_path, out_path, sigma, low, high):
    """Edge-detect an image into a binary PNG edge map."""
    data = Path(in_path).read_bytes()
    mime = "image/jpeg" if Path(in_path).suffix.lower() in (".jpg", ".jpeg") else "image/png"
    gray = to_gray(decode_raster(data, mime))
    try:
        edges = canny(gray, CannyParams(sigma=sigma, low_ratio=low, high_ratio=high))
    except ValueError as exc:
        raise click.ClickException(str(exc))
    Path(out_path).write_bytes(encode_raster(edges))
    click.echo(f"wrote {out_path}")


@tool.command(name="polygonize")
@click.option("--mask", "mask_path", required=True, type=click.Path(exists=True))
@click.option("--class-id", type=int, default=None, help="class id in the mask (default: non-zero)")
@click.option("--epsilon", type=float, default=1.0, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
def tool_polygonize(mask_path, class_id, epsilon, out_path):
    """Vectorize one class of a label mask into simplified polygons."""
    import numpy as np

    from .core import Raster, polygons_to_json

    mask = decode_raster(Path(mask_path).read_bytes(), "image/png")
    if mask.channels != 1:
        raise click.ClickException("mask must be a single-channel image")
    if class_id is None:
        mask = Raster((mask.pixels != 0).astype(np.uint8))
        class_id = 1
    polygons = polygonize(mask, class_id, epsilon)
    Path(out_path).write_text(polygons_to_json(polygons))
    click.echo(f"wrote {out_path} ({len(polygons)} polygon(s))")


@tool.command(name="count")
@click.option("--detections", "det_path", required=True, type=click.Path(exists=True))
@click.option("--category", default=None)
@click.option("--region", "region_path", type=click.Path(exists=True), default=None,
              help="polygons .json, or a mask .png with a .palette.json sidecar")
@click.option("--region-class", default=None, help="palette class name for mask regions")
def tool_count(det_path, category, region_path, region_class):
    """Count detections, optionally within a region."""
    detections = detections_from_json(Path(det_path).read_text())
    region = None
    if region_path:
        region_path = Path(region_path)
        if region_path.suffix == ".json":
            polygons = polygons_from_json(region_path.read_text())
            if not polygons:
                raise click.ClickException("region file contains no polygons")
            region = tuple(polygons)
        else:
            from .core import Palette

            mask = decode_raster(region_path.read_bytes(), "image/png")
            sidecar = region_path.with_name(region_path.name + ".palette.json")
            if not region_class or not sidecar.is_file():
                raise click.ClickException(
                    "mask regions need --region-class and a .palette.json sidecar"
                )
            palette = Palette.from_json(sidecar.read_text())
            class_id = palette.id_for(region_class)
            if class_id is None:
                raise click.ClickException(
                    f"no class {region_class!r}; available: {', '.join(palette.names())}"
                )
            region = MaskRegion(mask=mask, class_id=class_id)
    result = count_objects(CountRequest(detections=detections, category=category, region=region))
    click.echo(f"count = {result.count}")


@main.group()
def fixtures():
    """Deterministic demo fixtures."""


@fixtures.command(name="export")
@click.argument("directory", type=click.Path())
def fixtures_export(directory):
    """Write demo images, manifest, benchmark queries and scripts to a directory."""
    manifest_path = write_fixture_tree(directory)
    click.echo(f"fixture tree written; manifest at {manifest_path}")


@fixtures.command(name="serve")
@click.option("--manifest", required=True, type=click.Path(exists=True))
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8766, show_default=True)
def fixtures_serve(manifest, host, port):
    """Run the fixture tool server in the foreground."""
    run_fixture_server(load_manifest(manifest), host=host, port=port)


if __name__ == "__main__":
    sys.exit(main())
