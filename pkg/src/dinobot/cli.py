"""Command-line interface.

Subcommands: ``buffer add``, ``buffer list``, ``retrieve``, ``match``,
``align``, ``run``, and ``bench retrieval|alignment|suite``. The buffer
directory defaults to the DINOBOT_BUFFER environment variable. Exit codes:
0 success, 1 domain error (reported to stderr as ``error: <Code>:
<message>``), 2 usage error. All output is deterministic for equal inputs
and seeds.
"""

from __future__ import annotations

import argparse
import os
import sys
from typing import Optional

import numpy as np

from . import config as cfg
from .alignment import alignment_benchmark, back_project, solve_alignment
from .errors import ConfigError, DinobotError
from .matching import MatchConfig, best_buddies
from .model import MemoryBuffer
from .persistence import (
    MANIFEST_NAME,
    load_buffer,
    load_record_blob,
    read_feature_bundle,
    save_buffer,
)
from .retrieval import RetrievalConfig, retrieve, retrieval_benchmark
from .servoing import AlignmentGoal
from .sim import (
    SuiteEntry,
    make_cross_object_pairs,
    make_demonstration,
    make_same_object_pairs,
    overhead_pose,
    render,
    run_suite,
    run_trial,
    sample_test_pose,
    sibling_object,
)

_BUFFER_ENV = "DINOBOT_BUFFER"


def _buffer_dir(args) -> str:
    path = args.buffer or os.environ.get(_BUFFER_ENV)
    if not path:
        raise ConfigError(
            f"no buffer directory: pass --buffer or set {_BUFFER_ENV}"
        )
    return path


def _load_buffer(args) -> MemoryBuffer:
    return load_buffer(_buffer_dir(args))


def _scene_spec(args) -> cfg.SceneSpec:
    if getattr(args, "scene", None):
        return cfg.load_scene_spec(args.scene)
    return cfg.SceneSpec()


def _write_text(path: Optional[str], text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


# ---------------------------------------------------------------------------
# buffer


def _cmd_buffer_add(args) -> int:
    path = _buffer_dir(args)
    if os.path.exists(os.path.join(path, MANIFEST_NAME)):
        buffer = load_buffer(path)
    else:
        buffer = MemoryBuffer()
    if args.blob:
        record = load_record_blob(args.blob, record_id=args.id, task=args.task)
    else:
        spec = _scene_spec(args)
        record = cfg.demo_from_spec(spec, record_id=args.id, task=args.task).record
    buffer.add(record)
    save_buffer(buffer, path)
    print(f"added {record.record_id} ({record.task}, {len(record.trajectory)} steps)")
    return 0


def _cmd_buffer_list(args) -> int:
    buffer = _load_buffer(args)
    for record_id in buffer.ids():
        record = buffer.get(record_id)
        label = record.metadata.get("class", "-")
        grid = record.bottleneck_features.grid_size
        print(
            f"{record_id}\t{record.task}\t{label}\t"
            f"{len(record.trajectory)} steps\t{grid}x{grid}"
        )
    return 0


# ---------------------------------------------------------------------------
# retrieve / match / align


def _cmd_retrieve(args) -> int:
    buffer = _load_buffer(args)
    bundle, _ = read_feature_bundle(args.features)
    result = retrieve(
        bundle, args.task, buffer, RetrievalConfig(novelty_threshold=args.novelty)
    )
    for record_id, similarity in result.ranking:
        print(f"{record_id} {similarity:.6f}")
    return 0


def _match_pairs(args):
    fa, _ = read_feature_bundle(args.a)
    fb, _ = read_feature_bundle(args.b)
    match_config = MatchConfig(
        min_similarity=args.min_similarity, max_pairs=args.max_pairs
    )
    return fa, fb, best_buddies(fa, fb, match_config)


def _cmd_match(args) -> int:
    fa, fb, pairs = _match_pairs(args)
    print(f"pairs {len(pairs)}")
    for pair in pairs:
        ua, va = pair.pixel_a
        ub, vb = pair.pixel_b
        print(
            f"{pair.patch_a[0]},{pair.patch_a[1]} {pair.patch_b[0]},{pair.patch_b[1]} "
            f"{ua} {va} {ub} {vb} {pair.similarity:.6f}"
        )
    if args.viz:
        _write_match_viz(args.viz, fa, fb, pairs)
    return 0


def _cmd_align(args) -> int:
    live = load_record_blob(args.live, record_id="live")
    goal = load_record_blob(args.goal, record_id="goal")
    match_config = MatchConfig(min_similarity=args.min_similarity)
    pairs = best_buddies(live.bottleneck_features, goal.bottleneck_features, match_config)
    c_live, c_goal = back_project(
        pairs, live.bottleneck_obs.depth, goal.bottleneck_obs.depth, goal.intrinsics
    )
    solution = solve_alignment(c_live, c_goal, args.mode)
    r = solution.transform.rotation
    t = solution.transform.translation
    values = [*r.reshape(-1), *t]
    print(" ".join(f"{v:.9f}" for v in values))
    print(f"residual {solution.residual:.9f}")
    return 0


# ---------------------------------------------------------------------------
# closed-loop run


def _cmd_run(args) -> int:
    buffer = _load_buffer(args)
    spec = _scene_spec(args)
    obj = cfg.object_from_spec(spec)
    entry = SuiteEntry(obj=obj, demo_pose=cfg.origin_pose())
    suite_config = cfg.suite_from_spec(spec)
    trial_rng = np.random.default_rng([args.seed, 0, 0])
    background_seed = int(
        np.random.default_rng([args.seed, 0, 0, 0xB6]).integers(2**31)
    )
    outcome, err, object_pose = run_trial(
        entry, buffer, suite_config, trial_rng, background_seed
    )
    alignment = outcome.alignment
    lines = ["iter,residual,tx,ty,tz,yaw_err_deg"]
    for rec in alignment.history:
        tx, ty, tz = rec.translation
        lines.append(
            f"{rec.index},{rec.residual:.9f},{tx:.9f},{ty:.9f},{tz:.9f},"
            f"{rec.yaw_error_deg:.6f}"
        )
    _write_text(args.csv, "\n".join(lines) + "\n")
    status = "converged" if alignment.converged else "not-converged"
    print(
        f"{status} iterations={alignment.iterations} "
        f"residual={alignment.final_residual:.6f} retrieved={outcome.retrieval.record.record_id}"
    )
    px, py = object_pose.translation[0], object_pose.translation[1]
    print(f"object-at {px:.4f} {py:.4f}")
    print(f"final-error {err[0] * 1000:.3f} mm {err[1]:.4f} deg")
    if alignment.error:
        print(f"aborted: {alignment.error}")
    return 0


# ---------------------------------------------------------------------------
# benchmarks


def _cmd_bench_retrieval(args) -> int:
    spec = _scene_spec(args)
    rng = np.random.default_rng([args.seed, 0xBE7])
    buffer = MemoryBuffer()
    test_set = []
    for c in range(args.classes):
        class_seed = int(rng.integers(1, 2**31))
        base = cfg.object_from_spec(
            spec,
            object_id=f"class{c}-base",
            class_label=f"class-{c}",
            class_seed=class_seed,
        )
        members = [base] + [
            sibling_object(
                base,
                object_id=f"class{c}-m{m}",
                descriptor_cone=0.0,
                shape_jitter=0.001,
                seed=int(rng.integers(1, 2**31)),
            )
            for m in range(1, args.per_class)
        ]
        for m, obj in enumerate(members):
            demo_scene = cfg.scene_from_spec(spec, obj, cfg.origin_pose())
            setup = make_demonstration(
                demo_scene,
                task=spec.task,
                record_id=f"c{c}-m{m}",
                trajectory=cfg.trajectory_from_spec(spec),
                bottleneck_height=spec.bottleneck_height,
            )
            buffer.add(setup.record)
        for q in range(args.queries_per_class):
            query_obj = sibling_object(
                base,
                object_id=f"class{c}-q{q}",
                descriptor_cone=0.0,
                shape_jitter=0.001,
                seed=int(rng.integers(1, 2**31)),
            )
            pose = sample_test_pose(
                np.random.default_rng([args.seed, c, q]),
                cfg.region_from_spec(spec),
            )
            scene = cfg.scene_from_spec(spec, query_obj, pose)
            camera = overhead_pose(0.0, 0.0, spec.search_height)
            obs = render(scene, camera)
            test_set.append((obs.features, f"class-{c}"))
    accuracy = retrieval_benchmark(test_set, buffer)
    print(f"accuracy {accuracy:.4f} ({len(test_set)} queries)")
    return 0


def _cmd_bench_alignment(args) -> int:
    if args.cross:
        pairs = make_cross_object_pairs(args.pairs, seed=args.seed)
    else:
        pairs = make_same_object_pairs(args.pairs, seed=args.seed)
    stats = alignment_benchmark(
        pairs, args.mode, MatchConfig(min_similarity=args.min_similarity)
    )
    print(f"pairs {stats.count}")
    print(f"median_translation_m {stats.median_translation:.9e}")
    print(f"mean_translation_m {stats.mean_translation:.9e}")
    print(f"median_rotation_deg {stats.median_rotation_deg:.9e}")
    print(f"mean_rotation_deg {stats.mean_rotation_deg:.9e}")
    return 0


def _cmd_bench_suite(args) -> int:
    spec = _scene_spec(args)
    entries, buffer = cfg.suite_entries_from_spec(spec, args.objects, args.seed)
    suite_config = cfg.suite_from_spec(spec, trials=args.trials)
    result = run_suite(buffer, entries, suite_config, seed=args.seed)
    _write_text(args.csv, result.to_csv())
    print(f"rate {result.successes}/{result.trials} {result.rate:.4f}")
    return 0


# ---------------------------------------------------------------------------
# match visualisation


def _bresenham(x0: int, y0: int, x1: int, y1: int):
    dx = abs(x1 - x0)
    dy = -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    while True:
        yield x0, y0
        if x0 == x1 and y0 == y1:
            return
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x0 += sx
        if e2 <= dx:
            err += dx
            y0 += sy


def _descriptor_panel(bundle, size: int) -> np.ndarray:
    rng = np.random.default_rng(0xFEA7)
    projection = rng.standard_normal((bundle.descriptor_dim, 3))
    values = bundle.patches.astype(np.float64) @ projection
    lo, hi = values.min(), values.max()
    span = hi - lo if hi > lo else 1.0
    cells = ((values - lo) / span * 205 + 30).astype(np.uint8)
    per_cell = max(size // bundle.grid_size, 1)
    panel = np.repeat(np.repeat(cells, per_cell, axis=0), per_cell, axis=1)
    out = np.zeros((size, size, 3), dtype=np.uint8)
    h = min(size, panel.shape[0])
    w = min(size, panel.shape[1])
    out[:h, :w] = panel[:h, :w]
    return out


def _write_match_viz(path: str, fa, fb, pairs) -> None:
    """Side-by-side descriptor projections with match lines, P6 PPM."""
    size = max(fa.image_size[0], fb.image_size[0])
    gap = 8
    canvas = np.zeros((size, size * 2 + gap, 3), dtype=np.uint8)
    canvas[:, :size] = _descriptor_panel(fa, size)
    canvas[:, size + gap :] = _descriptor_panel(fb, size)
    x_offset = size + gap
    for pair in pairs:
        ua, va = (int(round(c)) for c in pair.pixel_a)
        ub, vb = (int(round(c)) for c in pair.pixel_b)
        shade = int(80 + 175 * (pair.similarity + 1) / 2)
        color = np.array([shade, shade, 40], dtype=np.uint8)
        for x, y in _bresenham(ua, va, ub + x_offset, vb):
            if 0 <= y < canvas.shape[0] and 0 <= x < canvas.shape[1]:
                canvas[y, x] = color
    header = f"P6\n{canvas.shape[1]} {canvas.shape[0]}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header + canvas.tobytes())


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dinobot",
        description="demonstration retrieval, correspondence alignment, and replay",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_buffer = sub.add_parser("buffer", help="manage the demonstration buffer")
    buffer_sub = p_buffer.add_subparsers(dest="buffer_command", required=True)

    p_add = buffer_sub.add_parser("add", help="record or import a demonstration")
    p_add.add_argument("--buffer", help=f"buffer directory (default ${_BUFFER_ENV})")
    p_add.add_argument("--id", required=True, help="record id")
    p_add.add_argument("--task", default="grasp", help="task name")
    p_add.add_argument("--scene", help="scene config for a synthetic recording")
    p_add.add_argument("--blob", help="import an existing .demo blob instead")
    p_add.set_defaults(func=_cmd_buffer_add)

    p_list = buffer_sub.add_parser("list", help="list buffer records")
    p_list.add_argument("--buffer", help=f"buffer directory (default ${_BUFFER_ENV})")
    p_list.set_defaults(func=_cmd_buffer_list)

    p_retrieve = sub.add_parser("retrieve", help="rank demos against live features")
    p_retrieve.add_argument("--buffer", help=f"buffer directory (default ${_BUFFER_ENV})")
    p_retrieve.add_argument("--features", required=True, help="live .dfea file")
    p_retrieve.add_argument("--task", required=True)
    p_retrieve.add_argument("--novelty", type=float, default=None,
                            help="reject queries whose best similarity is below this")
    p_retrieve.set_defaults(func=_cmd_retrieve)

    p_match = sub.add_parser("match", help="mutual best matches between two feature files")
    p_match.add_argument("--a", required=True, help="first .dfea file")
    p_match.add_argument("--b", required=True, help="second .dfea file")
    p_match.add_argument("--min-similarity", type=float, default=0.0)
    p_match.add_argument("--max-pairs", type=int, default=None)
    p_match.add_argument("--viz", help="write a side-by-side PPM visualisation here")
    p_match.set_defaults(func=_cmd_match)

    p_align = sub.add_parser("align", help="solve the rigid transform between two demos")
    p_align.add_argument("--live", required=True, help="live .demo blob")
    p_align.add_argument("--goal", required=True, help="goal .demo blob")
    p_align.add_argument("--mode", choices=("4dof", "6dof"), default="4dof")
    p_align.add_argument("--min-similarity", type=float, default=0.0)
    p_align.set_defaults(func=_cmd_align)

    p_run = sub.add_parser("run", help="one closed-loop trial in the synthetic scene")
    p_run.add_argument("--buffer", help=f"buffer directory (default ${_BUFFER_ENV})")
    p_run.add_argument("--scene", help="scene config")
    p_run.add_argument("--seed", type=int, default=0)
    p_run.add_argument("--csv", help="per-iteration CSV output path (- for stdout)")
    p_run.set_defaults(func=_cmd_run)

    p_bench = sub.add_parser("bench", help="benchmarks")
    bench_sub = p_bench.add_subparsers(dest="bench_command", required=True)

    p_br = bench_sub.add_parser("retrieval", help="clustered retrieval accuracy")
    p_br.add_argument("--scene", help="scene config")
    p_br.add_argument("--classes", type=int, default=5)
    p_br.add_argument("--per-class", type=int, default=3)
    p_br.add_argument("--queries-per-class", type=int, default=10)
    p_br.add_argument("--seed", type=int, default=0)
    p_br.set_defaults(func=_cmd_bench_retrieval)

    p_ba = bench_sub.add_parser("alignment", help="correspondence alignment error")
    p_ba.add_argument("--pairs", type=int, default=50)
    p_ba.add_argument("--seed", type=int, default=0)
    p_ba.add_argument("--mode", choices=("4dof", "6dof"), default="4dof")
    p_ba.add_argument("--min-similarity", type=float, default=0.5)
    p_ba.add_argument("--cross", action="store_true",
                      help="cross-instance pairs instead of same-object")
    p_ba.set_defaults(func=_cmd_bench_alignment)

    p_bs = bench_sub.add_parser("suite", help="closed-loop success-rate suite")
    p_bs.add_argument("--scene", help="scene config")
    p_bs.add_argument("--objects", type=int, default=2)
    p_bs.add_argument("--trials", type=int, default=None)
    p_bs.add_argument("--seed", type=int, default=0)
    p_bs.add_argument("--csv", help="suite CSV output path (- for stdout)")
    p_bs.set_defaults(func=_cmd_bench_suite)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DinobotError as e:
        print(f"error: {e.code}: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"error: IoError: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
