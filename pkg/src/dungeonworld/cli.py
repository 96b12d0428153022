"""Staged pipeline CLI: generate -> voxelize -> bake -> simulate / serve."""

from __future__ import annotations

import argparse
import sys

from .serialization import dumps_canonical, load_json, save_canonical
from .worldgen import WorldConfig, WorldGenError, generate_world


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="dungeonworld")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a world from a config + seed")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--obj", default=None, help="directory for OBJ exports")

    p = sub.add_parser("voxelize", help="quantize a world into layered grids")
    p.add_argument("--world", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--voxel", type=float, default=None)
    p.add_argument("--layers", type=int, default=None)

    p = sub.add_parser("bake", help="bake lightmap atlases")
    p.add_argument("--world", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--atlas-size", type=int, default=1024)
    p.add_argument("--ao-rays", type=int, default=64)
    p.add_argument("--texels-per-unit", type=float, default=4.0)
    p.add_argument("--gamma", action="store_true")

    p = sub.add_parser("simulate", help="run a scenario deterministically")
    p.add_argument("--world", required=True)
    p.add_argument("--grids", required=True)
    p.add_argument("--scenario", required=True)
    p.add_argument("--trace", required=True)
    p.add_argument("--metrics", default=None)
    p.add_argument("--audit", action="store_true")

    p = sub.add_parser("serve", help="interactive wire server for the viewer")
    p.add_argument("--world", required=True)
    p.add_argument("--grids", required=True)
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--static", default=None, help="viewer asset directory")
    p.add_argument("--max-ticks", type=int, default=None)

    args = parser.parse_args(argv)
    try:
        return _dispatch(args)
    except (WorldGenError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


def _dispatch(args) -> int:
    if args.command == "generate":
        config = WorldConfig.from_json(load_json(args.config), seed=args.seed)
        world = generate_world(config)
        from .world_io import export_obj, save_world
        save_world(world, args.out)
        if args.obj:
            import os
            os.makedirs(args.obj, exist_ok=True)
            export_obj(world, os.path.join(args.obj, "deploy.obj"), "deploy")
            export_obj(world, os.path.join(args.obj, "bake.obj"), "bake")
        print(f"generated {len(world.dungeons)} dungeons, "
              f"{len(world.connectors)} connectors, "
              f"{len(world.elements)} elements -> {args.out}")
        return 0

    if args.command == "voxelize":
        from .voxelizer import quantize_world, save_grids
        from .world_io import load_world
        world = load_world(args.world)
        grids = quantize_world(world, voxel_size=args.voxel, layers=args.layers)
        save_grids(grids, args.out)
        cells = sum(g.frame.nx * g.frame.nz * g.layer_count for g in grids.values())
        print(f"quantized {len(grids)} grids, {cells} cells -> {args.out}")
        return 0

    if args.command == "bake":
        from .lightmap import BakeConfig, bake, save_bake
        from .metastore import MetaStore
        from .world_io import load_world
        world = load_world(args.world)
        store = MetaStore(world)
        config = BakeConfig(texels_per_unit=args.texels_per_unit,
                            atlas_size=args.atlas_size,
                            ao_rays=args.ao_rays, gamma=args.gamma)
        result = bake(world, store, config)
        save_bake(result, args.out, config)
        print(f"baked {len(result.atlases)} atlases, "
              f"{len(result.charts)} charts -> {args.out}")
        return 0

    if args.command == "simulate":
        from .simharness import load_inputs, load_scenario, run_scenario, write_trace
        world, grids = load_inputs(args.world, args.grids)
        scenario = load_scenario(args.scenario)
        sim, metrics = run_scenario(world, grids, scenario, audit=args.audit)
        write_trace(sim, args.trace)
        doc = metrics.to_json()
        if args.metrics:
            save_canonical(doc, args.metrics)
        print(dumps_canonical(doc))
        return 0

    if args.command == "serve":
        import asyncio

        from .simharness import load_inputs, serve
        world, grids = load_inputs(args.world, args.grids)
        asyncio.run(serve(world, grids, port=args.port, static_dir=args.static,
                          max_ticks=args.max_ticks))
        return 0

    raise ValueError(f"unknown command {args.command}")


if __name__ == "__main__":
    raise SystemExit(main())
