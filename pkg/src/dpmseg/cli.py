"""Subcommand CLI tying the pipeline together.

Exit codes: 0 success, 1 domain error (message on stderr), 2 usage error,
3 rollout non-convergence (partial trajectory still written when --traj is
given).
"""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import agent, field, io, metrics, model, patches, poincare, svg, synth
from .config import RunConfig, load_config
from .errors import DpmError, NonConvergence


def _config(args) -> RunConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    return cfg.validate()


def _cmd_synth(args):
    spec = synth.ShapeSpec(
        family=args.family, seed=args.seed,
        size_range=(args.size_min, args.size_max),
        noise_sigma=args.noise, blur_sigma=args.blur,
        image_size=args.image_size,
    )
    if args.spec:
        with open(args.spec) as f:
            raw = json.load(f)
        spec = synth.ShapeSpec(**raw)
    pairs = synth.gen_dataset(args.n, spec)
    mpath = io.write_manifest(pairs, spec.__dict__, args.out)
    print(mpath)
    return 0


def _cmd_field(args):
    mask = io.read_mask_pgm(args.mask)
    fb = field.build_dynamic(mask)
    field.save_field(fb, args.out)
    return 0


def _select_pairs(manifest_pairs, parity):
    if parity == "even":
        return [p for p in manifest_pairs if p[0] % 2 == 0]
    if parity == "odd":
        return [p for p in manifest_pairs if p[0] % 2 == 1]
    return list(manifest_pairs)


def _cmd_dataset(args):
    cfg = _config(args)
    entries, _ = io.read_manifest(args.manifest)
    entries = _select_pairs(entries, args.parity)
    pairs = [(io.read_image_pgm(ip), io.read_mask_pgm(mp)) for _, ip, mp in entries]
    dcfg = patches.DatasetConfig(
        rho=cfg.rho, band_px=cfg.band_px, offsets_deg=cfg.offsets_deg,
        step=cfg.step, patch_size=cfg.patch_size, seed=cfg.dataset_seed)
    ds = patches.build_dataset(pairs, dcfg)
    patches.save_dataset(ds, args.out)
    print(f"{len(ds)} samples")
    return 0


def _cmd_train(args):
    cfg = _config(args)
    ds = patches.load_dataset(args.dataset)
    tcfg = model.TrainConfig(
        epochs=cfg.epochs, batch=cfg.batch, lr=cfg.lr, beta1=cfg.beta1,
        beta2=cfg.beta2, eps=cfg.adam_eps, seed=cfg.train_seed,
        arch=cfg.arch, init_seed=cfg.init_seed)
    m, history = model.train(ds, tcfg)
    model.save_checkpoint(m, args.out)
    for i, loss in enumerate(history):
        print(f"epoch {i + 1}: loss {loss:.6f}")
    return 0


def _cmd_segment(args):
    cfg = _config(args)
    img = io.read_image_pgm(args.image)
    if args.oracle_field:
        fb = field.load_field(args.oracle_field)
        policy = agent.OraclePolicy(fb, step=cfg.step)
    elif args.model:
        policy = agent.LearnedPolicy(model.load_checkpoint(args.model))
    else:
        print("segment: need --model or --oracle-field", file=sys.stderr)
        return 2
    rng = np.random.default_rng(args.heading_seed)
    state = agent.init_state((args.seed_x, args.seed_y), img.shape, rng=rng,
                             patch_size=cfg.patch_size)
    scfg = agent.StepConfig(step=cfg.step, h_min=cfg.h_min, h_max=cfg.h_max,
                            renormalize=cfg.renormalize, patch_size=cfg.patch_size)
    pcfg = agent.StopConfig(warmup=cfg.warmup, eps=cfg.eps,
                            consecutive=cfg.consecutive, max_steps=cfg.max_steps,
                            cycle_points=cfg.cycle_points)
    try:
        traj, contour, _, _ = agent.rollout(policy, img, state, pcfg, scfg)
    except NonConvergence as e:
        if args.traj and e.trajectory is not None:
            io.write_trajectory_csv(e.trajectory, args.traj)
        print(f"segment: {e}", file=sys.stderr)
        return 3
    io.write_contour_csv(contour, args.out)
    if args.traj:
        io.write_trajectory_csv(traj, args.traj)
    return 0


def _cmd_eval(args):
    from skimage import measure

    pred = io.read_contour_csv(args.pred)
    truth = io.read_mask_pgm(args.truth)
    # truth contour traced at the 0.5 level; skimage returns (row, col)
    curves = measure.find_contours(truth.astype(float), 0.5)
    if not curves:
        raise DpmError("truth mask has no contour at level 0.5")
    longest = max(curves, key=len)
    truth_contour = longest[:, ::-1]
    report = metrics.evaluate_case(pred, truth, truth_contour,
                                   spacing_mm=args.spacing)
    io.write_report_json(metrics.build_report([report]), args.out)
    agg = metrics.aggregate([report])
    print("dice", metrics.format_mean_std(**agg["dice"]),
          "apd_mm", metrics.format_mean_std(**agg["apd_mm"]))
    return 0


def _cmd_render(args):
    fb = field.load_field(args.field) if args.field else None
    traj = None
    if args.traj:
        pos, hd = io.read_trajectory_csv(args.traj)
        traj = agent.Trajectory(pos, hd)
    contour = io.read_contour_csv(args.contour) if args.contour else None
    svg.render_svg(fb=fb, traj=traj, contour=contour, path=args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dpmseg",
                                description="limit-cycle contour segmentation")
    sub = p.add_subparsers(dest="cmd", required=True)

    s = sub.add_parser("synth", help="generate synthetic image/mask pairs")
    s.add_argument("--spec", help="ShapeSpec JSON file (overrides other flags)")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--family", default="blob", choices=["circle", "ellipse", "blob"])
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--size-min", type=float, default=30.0)
    s.add_argument("--size-max", type=float, default=48.0)
    s.add_argument("--noise", type=float, default=0.03)
    s.add_argument("--blur", type=float, default=0.8)
    s.add_argument("--image-size", type=int, default=synth.DEFAULT_IMAGE_SIZE)
    s.set_defaults(fn=_cmd_synth)

    s = sub.add_parser("field", help="build the vector field for a mask")
    s.add_argument("--mask", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(fn=_cmd_field)

    s = sub.add_parser("dataset", help="build patch-policy training data")
    s.add_argument("--manifest", required=True)
    s.add_argument("--config")
    s.add_argument("--out", required=True)
    s.add_argument("--parity", default="all", choices=["all", "even", "odd"])
    s.set_defaults(fn=_cmd_dataset)

    s = sub.add_parser("train", help="train the policy model")
    s.add_argument("--dataset", required=True)
    s.add_argument("--config")
    s.add_argument("--out", required=True)
    s.set_defaults(fn=_cmd_train)

    s = sub.add_parser("segment", help="roll out the agent on an image")
    s.add_argument("--image", required=True)
    s.add_argument("--model")
    s.add_argument("--oracle-field")
    s.add_argument("--seed-x", type=float, required=True)
    s.add_argument("--seed-y", type=float, required=True)
    s.add_argument("--heading-seed", type=int, default=0)
    s.add_argument("--config")
    s.add_argument("--out", required=True)
    s.add_argument("--traj")
    s.set_defaults(fn=_cmd_segment)

    s = sub.add_parser("eval", help="score a predicted contour against truth")
    s.add_argument("--pred", required=True)
    s.add_argument("--truth", required=True)
    s.add_argument("--spacing", type=float, default=1.0)
    s.add_argument("--out", required=True)
    s.set_defaults(fn=_cmd_eval)

    s = sub.add_parser("render", help="render field/trajectory/contour to SVG")
    s.add_argument("--field")
    s.add_argument("--traj")
    s.add_argument("--contour")
    s.add_argument("--out", required=True)
    s.set_defaults(fn=_cmd_render)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except NonConvergence as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except DpmError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
