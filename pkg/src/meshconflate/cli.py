"""Command line entry point: ``meshconflate conflate | evaluate | cameras``."""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numba
import numpy as np

from .config import ConfigError, ConflationConfig, load_config
from .evaluate import DEFAULT_SAMPLES, DEFAULT_TAU, TABLE_HEADER, distance_samples, f_score
from .extract import marching_cubes
from .mesh_io import MeshError, TriangleMesh, load_mesh, save_mesh, save_point_cloud, sample_surface_points
from .tsdf import ConflationStats, SourceProfile, conflate, place_cameras

log = logging.getLogger("meshconflate")

EXIT_OK = 0
EXIT_FAIL = 1


def load_sources(config: ConflationConfig) -> list[tuple[TriangleMesh, SourceProfile]]:
    """Read every source mesh; ids are file stems, suffixed when two stems collide."""
    out, used = [], set()
    for k, src in enumerate(config.sources):
        mesh = load_mesh(src.path)
        mesh_id = Path(src.path).stem
        if mesh_id in used:
            mesh_id = f"{mesh_id}#{k}"
        used.add(mesh_id)
        out.append((mesh, SourceProfile(mesh_id, src.weight, config.bandwidth_of(src), src.note)))
        log.info("source %s: %d vertices, %d faces, C=%g, m=%g", mesh_id, mesh.n_vertices, mesh.n_faces, src.weight, config.bandwidth_of(src))
    return out


def set_threads(n: int | None) -> None:
    if n is None:
        return
    limit = numba.config.NUMBA_NUM_THREADS
    if n > limit:
        log.warning("requested %d threads, numba allows %d (set NUMBA_NUM_THREADS to raise it)", n, limit)
        n = limit
    numba.set_num_threads(n)


def _print_rows(rows) -> None:
    for key, value in rows:
        print(f"{key}\t{value}")


def cmd_conflate(args) -> int:
    config = load_config(args.config).with_overrides(output=args.output, threads=args.threads)
    config.validate()
    if config.output is None:
        raise ConfigError("no output path: set 'output' in the config or pass --output")
    set_threads(config.threads)
    sources = load_sources(config)

    stats = ConflationStats()
    tic = time.perf_counter()
    volume = conflate(sources, config, stats=stats)
    toc = time.perf_counter()
    mesh = marching_cubes(volume)
    stats.stage_seconds["extract"] = time.perf_counter() - toc
    if mesh.n_faces == 0:
        raise MeshError("extraction produced an empty mesh")
    save_mesh(mesh, config.output)
    total = time.perf_counter() - tic

    if config.cameras_ply:
        _, cameras = place_cameras([m for m, _ in sources], config)
        save_point_cloud(np.array([c.center for c in cameras]), config.cameras_ply)
    if config.volume_dump:
        volume.save(config.volume_dump)

    rows = [
        ("cameras", stats.cameras),
        ("rays", stats.rays),
        ("hits", stats.hits),
        ("voxels", stats.voxels),
        ("vertices", mesh.n_vertices),
        ("faces", mesh.n_faces),
    ]
    rows += [(f"seconds_{k}", f"{v:.3f}") for k, v in stats.stage_seconds.items()]
    rows += [("seconds_total", f"{total:.3f}"), ("output", config.output)]
    _print_rows(rows)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    if not args.tau > 0:
        raise ValueError("--tau must be positive")
    if args.samples < 1:
        raise ValueError("--samples must be >= 1")
    result = load_mesh(args.result)
    reference = load_mesh(args.reference)
    samples = distance_samples(result, reference, args.samples, args.seed)
    report = f_score(result, reference, args.tau, args.samples, args.seed, samples=samples)
    _print_rows(report.to_dict().items())
    print()
    print(TABLE_HEADER)
    print(report.table_row(args.label or Path(args.result).stem))
    if args.report:
        report.save(args.report)
    if args.figures:
        from .plotting import evaluation_figures

        for path in evaluation_figures(samples, args.tau, args.figures, stem=Path(args.result).stem):
            log.info("wrote %s", path)
    return EXIT_OK


def cmd_cameras(args) -> int:
    config = load_config(args.config)
    config.validate()
    sources = load_sources(config)
    meshes = [m for m, _ in sources]
    grid, cameras = place_cameras(meshes, config)
    centers = np.array([c.center for c in cameras])
    save_point_cloud(centers, args.out)
    _print_rows([("cameras", len(cameras)), ("grid", "x".join(map(str, grid.dims))), ("output", args.out)])
    if args.figure:
        from .plotting import plot_cameras

        surface = np.concatenate([sample_surface_points(m, 20_000, 0).points for m in meshes])
        plot_cameras(centers, args.figure, surface)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="meshconflate", description="Conflate overlapping triangle meshes via a virtual-camera TSDF")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("conflate", help="fuse the configured source meshes into one mesh")
    p.add_argument("--config", required=True, type=Path)
    p.add_argument("--output", help="output mesh (.ply or .obj); overrides the config")
    p.add_argument("--threads", type=int, help="numba worker threads")
    p.set_defaults(func=cmd_conflate)

    p = sub.add_parser("evaluate", help="mean distance and F-score of a result against a reference")
    p.add_argument("result", type=Path)
    p.add_argument("reference", type=Path)
    p.add_argument("--tau", type=float, default=DEFAULT_TAU, help="F-score threshold in meters (default %(default)s)")
    p.add_argument("--samples", type=int, default=DEFAULT_SAMPLES, help="surface samples per mesh (default %(default)s)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--label", help="row label of the summary table")
    p.add_argument("--report", type=Path, help="also write the report (.json or key: value text)")
    p.add_argument("--figures", type=Path, help="directory for distance histogram and F-score curve")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("cameras", help="export virtual camera centers as a PLY point cloud")
    p.add_argument("--config", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--figure", type=Path, help="top-view plot of the camera field")
    p.set_defaults(func=cmd_cameras)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(name)s %(levelname)s: %(message)s",
    )
    try:
        return args.func(args)
    except (ConfigError, MeshError, ValueError, OverflowError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
