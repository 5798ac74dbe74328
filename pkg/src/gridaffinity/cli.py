"""Command-line entry point: ``gridaffinity {prepare,train,predict,analyze}``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error. Every
failure prints one line ``ERROR <CODE>: <message>`` to stderr.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from . import analysis
from .dataset import DatasetRecord, read_dataset, read_manifest, write_dataset
from .errors import ContainerFormatError, DegenerateRegressionError, GridAffinityError, \
    ManifestError, MissingLabelError
from .features import ChargeScaler, featurize_complex, fit_charge_scaler
from .metrics import metrics
from .mol2 import all_charges, read_mol2
from .nn import NetworkConfig, init_network, load_checkpoint, save_checkpoint
from .training import predict, train, write_epoch_log
from .voxel import CubeRotation, ROT_X180, crop_count, cube_rotations, ligand_centroid

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3

log = logging.getLogger("gridaffinity")


class UsageError(Exception):
    code = "USAGE"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _complex_id(ligand_path: str) -> str:
    stem = Path(ligand_path).stem
    for suffix in ("_ligand", "_lig"):
        if stem.endswith(suffix):
            return stem[: -len(suffix)]
    return stem


def read_affinity_table(path) -> dict[str, float]:
    """CSV rows ``id,pKa``; a non-numeric first row is treated as a header."""
    table = {}
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or not row[0].strip() or row[0].startswith("#"):
                continue
            if len(row) < 2:
                raise ManifestError(f"{path}:{lineno}: expected 'id,pKa'")
            try:
                table[row[0].strip()] = float(row[1])
            except ValueError:
                if lineno == 1:
                    continue
                raise ManifestError(f"{path}:{lineno}: non-numeric affinity {row[1]!r}") from None
    return table


def _load_scaler(source: str) -> ChargeScaler:
    try:
        return ChargeScaler(float(source))
    except ValueError:
        pass
    with open(source, "rb") as fh:
        magic = fh.read(4)
    if magic == b"PFDS":
        return ChargeScaler(read_dataset(source).charge_std)
    if magic == b"PFNC":
        std = load_checkpoint(source).charge_std
        if std is None:
            raise ContainerFormatError(f"{source}: checkpoint carries no charge scaler")
        return ChargeScaler(std)
    raise ContainerFormatError(f"{source}: --scaler must be a number, dataset or checkpoint")


def _with_file(path, fn):
    try:
        return fn(path)
    except GridAffinityError as exc:
        raise type(exc)(f"{path}: {exc}") from None


def cmd_prepare(args) -> int:
    if len(args.ligand) != len(args.pocket):
        raise UsageError(f"{len(args.ligand)} ligand files but {len(args.pocket)} pocket files")
    ids = args.ids or [_complex_id(p) for p in args.ligand]
    if len(ids) != len(args.ligand):
        raise UsageError("--ids must list one id per ligand")
    affinities = read_affinity_table(args.affinities) if args.affinities else None
    if affinities is not None:
        missing = [i for i in ids if i not in affinities]
        if missing:
            raise MissingLabelError(f"no affinity for: {', '.join(missing)}")

    pairs = [(_with_file(lp, read_mol2), _with_file(pp, read_mol2))
             for lp, pp in zip(args.ligand, args.pocket)]
    if args.scaler:
        scaler = _load_scaler(args.scaler)
        print(f"charge scaler std {scaler.std!r} (from {args.scaler})")
    else:
        scaler = fit_charge_scaler(all_charges(m for pair in pairs for m in pair))
        print(f"charge scaler std {scaler.std!r} (fitted on {len(pairs)} complexes)")

    records = []
    print("id\tligand_atoms\tpocket_atoms\tin_box\tcropped")
    for cid, (lig, pocket) in zip(ids, pairs):
        atoms = featurize_complex(pocket, lig, scaler)
        n_lig = int(atoms.ligand_mask.sum())
        center = ligand_centroid(atoms) if n_lig else None
        inside = crop_count(atoms, center, args.box_size) if n_lig else 0
        print(f"{cid}\t{n_lig}\t{len(atoms) - n_lig}\t{inside}\t{len(atoms) - inside}")
        records.append(DatasetRecord(cid, atoms, affinities[cid] if affinities else None))
    write_dataset(records, args.output, scaler.std)
    print(f"wrote {len(records)} records to {args.output}")
    return EXIT_OK


def _config_from_args(args) -> NetworkConfig:
    n = int(round(args.box_size)) + 1
    return NetworkConfig(
        conv_filters=args.conv_filters, conv_kernel=args.kernel, dense_sizes=args.dense_sizes,
        dropout_keep=args.keep_prob, lambda_l2=args.lambda_l2, learning_rate=args.lr,
        input_shape=(n, n, n, 19), dtype=args.dtype)


def cmd_train(args) -> int:
    dataset = read_dataset(args.dataset)
    train_ids = read_manifest(args.train)
    val_ids = read_manifest(args.val)
    overlap = set(train_ids) & set(val_ids)
    if overlap:
        raise ManifestError(f"ids in both train and validation: {', '.join(sorted(overlap))}")
    train_recs = dataset.select(train_ids)
    val_recs = dataset.select(val_ids)
    init_rng, train_rng = (np.random.default_rng(s)
                           for s in np.random.SeedSequence(args.seed).spawn(2))
    if args.init:
        net = load_checkpoint(args.init)
    else:
        net = init_network(_config_from_args(args), init_rng)
    net.charge_std = dataset.charge_std
    result = train(net, train_recs, val_recs, epochs=args.epochs, rng=train_rng,
                   batch_size=args.batch_size, schedule=args.schedule)
    save_checkpoint(result.best, args.output)
    log_path = args.log or f"{args.output}.log.csv"
    write_epoch_log(result.log, log_path)
    print(f"best epoch {result.best_epoch} "
          f"(validation RMSE {result.log[result.best_epoch - 1].val_rmse:.4f})")
    print(f"wrote checkpoint {args.output} and epoch log {log_path}")
    return EXIT_OK


def cmd_predict(args) -> int:
    dataset = read_dataset(args.dataset)
    net = load_checkpoint(args.checkpoint)
    preds = predict(net, dataset.records, charge_std=dataset.charge_std)
    with open(args.output, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "prediction"])
        for cid, p in preds:
            w.writerow([cid, repr(p)])
    print(f"wrote {len(preds)} predictions to {args.output}")
    if dataset.labeled and len(preds) >= 3:
        t = [r.affinity for r in dataset.records]
        y = [p for _, p in preds]
        try:
            print(metrics(t, y).format())
        except DegenerateRegressionError as exc:
            print(f"{exc.partial.format()} ({exc})")
    return EXIT_OK


def _rotation(index: int) -> CubeRotation:
    rots = cube_rotations()
    if not 0 <= index < len(rots):
        raise UsageError(f"rotation index must be in 0..{len(rots) - 1}, got {index}")
    return rots[index]


def cmd_analyze(args) -> int:
    net = load_checkpoint(args.checkpoint)
    if args.mode == "importance":
        analysis.write_importance_csv(analysis.feature_importance(net), args.output)
        print(f"wrote feature importance to {args.output}")
        return EXIT_OK
    if not args.dataset:
        raise UsageError(f"--dataset is required for mode {args.mode}")
    dataset = read_dataset(args.dataset)
    if net.charge_std is not None and dataset.charge_std != net.charge_std:
        log.warning("dataset and checkpoint charge scalers differ")
    if args.mode == "stability":
        rows = analysis.rotation_stability(net, dataset.records)
        analysis.write_stability_csv(rows, args.output)
        print(f"wrote {len(rows)} stability rows to {args.output}")
        return EXIT_OK
    if not args.id:
        raise UsageError(f"--id is required for mode {args.mode}")
    record = dataset.select([args.id])[0]
    if args.mode == "occlusion":
        scan = analysis.occlusion_scan(net, record, _rotation(args.rotation))
        analysis.write_occlusion_csv(scan, args.output)
        print(f"baseline {scan.baseline:.4f}; top drops:")
        for r in scan.top(args.top):
            print(f"  box {r.box_origin}: prediction {r.prediction:.4f}, drop {r.drop:.4f}")
    else:
        rows = analysis.activation_comparison(net, record, _rotation(args.rot_a),
                                              _rotation(args.rot_b))
        analysis.write_activation_csv(rows, args.output)
        for r in rows:
            print(f"{r.layer}\taligned {r.distance_aligned:.4f}\traw {r.distance_raw:.4f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gridaffinity", description=__doc__.splitlines()[0])
    parser.add_argument("--threads", type=int, default=None, help="cap BLAS worker threads")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("prepare", help="featurize mol2 complexes into a dataset file")
    p.add_argument("-l", "--ligand", nargs="+", required=True)
    p.add_argument("-p", "--pocket", nargs="+", required=True)
    p.add_argument("-a", "--affinities", help="CSV of id,pKa")
    p.add_argument("--ids", nargs="+", help="complex ids (default: ligand file stems)")
    p.add_argument("--scaler", help="charge std: number, dataset or checkpoint to copy it from")
    p.add_argument("--box-size", type=float, default=20.0)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("train", help="train a network and keep the best validation epoch")
    p.add_argument("-i", "--dataset", required=True)
    p.add_argument("--train", required=True, help="manifest of training ids")
    p.add_argument("--val", required=True, help="manifest of validation ids")
    p.add_argument("-o", "--output", required=True, help="checkpoint path")
    p.add_argument("--log", help="epoch log CSV (default: <output>.log.csv)")
    p.add_argument("--init", help="start from this checkpoint instead of a fresh network")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--batch-size", type=int, default=5)
    p.add_argument("--lr", type=float, default=1e-5)
    p.add_argument("--lambda-l2", type=float, default=0.001)
    p.add_argument("--keep-prob", type=float, default=0.5)
    p.add_argument("--conv-filters", type=_int_list, default=(64, 128, 256))
    p.add_argument("--dense-sizes", type=_int_list, default=(1000, 500, 200))
    p.add_argument("--kernel", type=int, default=5)
    p.add_argument("--box-size", type=float, default=20.0)
    p.add_argument("--schedule", choices=("expanded", "per-batch"), default="expanded")
    p.add_argument("--dtype", choices=("float32", "float64"), default="float32")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="predict affinities for a dataset")
    p.add_argument("-i", "--dataset", required=True)
    p.add_argument("-n", "--checkpoint", required=True)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("analyze", help="interpretability analyses")
    p.add_argument("-n", "--checkpoint", required=True)
    p.add_argument("-i", "--dataset")
    p.add_argument("--mode", required=True,
                   choices=("importance", "occlusion", "activations", "stability"))
    p.add_argument("--id", help="complex id (occlusion, activations)")
    p.add_argument("--rotation", type=int, default=0, help="rotation index for occlusion")
    p.add_argument("--rot-a", type=int, default=0)
    p.add_argument("--rot-b", type=int, default=None,
                   help="default: 180 degrees about x")
    p.add_argument("--top", type=int, default=10)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_analyze)
    return parser


def _thread_limit(n):
    if n is None:
        return contextlib.nullcontext()
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:
        log.warning("threadpoolctl not installed; --threads ignored")
        return contextlib.nullcontext()
    return threadpool_limits(limits=n)


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if getattr(args, "rot_b", 0) is None:
            args.rot_b = cube_rotations().index(CubeRotation(ROT_X180))
        if args.threads is not None and args.threads < 1:
            raise UsageError("--threads must be positive")
    except UsageError as exc:
        print(f"ERROR USAGE: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s")
    try:
        with _thread_limit(args.threads):
            return args.func(args)
    except UsageError as exc:
        print(f"ERROR USAGE: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except GridAffinityError as exc:
        print(f"ERROR {exc.code}: {exc}".replace("\n", " "), file=sys.stderr)
        return EXIT_DATA
    except (OSError, ValueError) as exc:
        print(f"ERROR DATA: {exc}".replace("\n", " "), file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        print(f"ERROR INTERNAL: {type(exc).__name__}: {exc}".replace("\n", " "), file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
