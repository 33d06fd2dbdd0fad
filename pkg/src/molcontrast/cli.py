"""Command-line entry point.

Subcommands: fp, fragment, pretrain, finetune, embed, similar. Exit status is
0 on success, 1 for usage errors, 2 for bad data or files and 3 for numeric
failures.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .chem import featurize, parse_smiles
from .errors import MolContrastError
from .fingerprint import DEFAULT_NBITS, DEFAULT_RADIUS, ecfp
from .fragment import brics_partition
from .nn import atomic_write, forward, load_checkpoint
from .train.config import load_config, require
from .train.data import read_corpus, read_dataset_csv
from .train.finetune import finetune
from .train.pretrain import pretrain

EXIT_USAGE = 1
EXIT_DATA = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def cmd_fp(args) -> int:
    out = io.StringIO()
    for _, _, mol in read_corpus(args.corpus):
        out.write(ecfp(mol, args.radius, args.nbits).to_hex() + "\n")
    _emit(args, out.getvalue())
    return 0


def format_fragments(smiles: str, fm) -> str:
    """``SMILES<TAB>count<TAB>groups``; groups comma-separated, atoms space-separated."""
    groups = ",".join(" ".join(str(a) for a in g) for g in fm.members())
    return f"{smiles}\t{fm.n_fragments}\t{groups}"


def cmd_fragment(args) -> int:
    out = io.StringIO()
    for _, smi, mol in read_corpus(args.corpus):
        out.write(format_fragments(smi, brics_partition(mol)) + "\n")
    _emit(args, out.getvalue())
    return 0


def _emit(args, text: str) -> None:
    if getattr(args, "out", None):
        atomic_write(args.out, text.encode("utf-8"))
    else:
        sys.stdout.write(text)


def _train_config(args):
    overrides = {"out": args.out, "seed": args.seed, "feature_set": args.feature_set}
    if args.deterministic:
        overrides["deterministic"] = True
    return load_config(args.config, **overrides)


def cmd_pretrain(args) -> int:
    cfg = _train_config(args)
    require(cfg, "corpus", "out")
    mols = [m for _, _, m in read_corpus(cfg.corpus)]
    result = pretrain(mols, cfg, cfg.out)
    print(f"best epoch {result.best_epoch}; checkpoint {Path(cfg.out) / 'model.ckpt'}")
    return 0


def cmd_finetune(args) -> int:
    cfg = _train_config(args)
    require(cfg, "dataset", "task_types", "out")
    ds = read_dataset_csv(cfg.dataset, cfg.task_types)
    result = finetune(ds, cfg, cfg.out)
    test = result.report["test"]
    print("test metrics: " + ("absent (empty test split)" if test is None else
                              ", ".join(f"{k}={v:.4f}" for k, v in sorted(test.items()) if k != "n")))
    return 0


def file_sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def embed_rows(model, mols) -> np.ndarray:
    graphs = [featurize(m, model.feature_set) for m in mols]
    if not graphs:
        return np.zeros((0, model.d), dtype=model.dtype)
    return forward(model, graphs, ("mol",), None)[0]["mol"]


def cmd_embed(args) -> int:
    model, _ = load_checkpoint(args.checkpoint)
    corpus = read_corpus(args.corpus)
    h = embed_rows(model, [m for _, _, m in corpus])
    buf = io.StringIO()
    buf.write(f"# checkpoint sha256 {file_sha256(args.checkpoint)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["line", "smiles"] + [f"h{i}" for i in range(model.d)])
    for (lineno, smi, _), row in zip(corpus, h):
        writer.writerow([lineno, smi] + [repr(float(x)) for x in row])
    _emit(args, buf.getvalue())
    return 0


def read_embeddings(path):
    """Return (checkpoint sha256 or None, line numbers, SMILES, matrix)."""
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
        digest = first.split()[-1] if first.startswith("# checkpoint sha256") else None
        if digest is None:
            fh.seek(0)
        reader = csv.reader(fh)
        next(reader, None)
        lines, smiles, rows = [], [], []
        for rec in reader:
            lines.append(int(rec[0]))
            smiles.append(rec[1])
            rows.append([float(x) for x in rec[2:]])
    return digest, lines, smiles, np.array(rows, dtype=np.float64)


def rank_similar(query: np.ndarray, table: np.ndarray, lines, k: int):
    """Top-k (index, cosine), descending cosine, ties by line number."""
    qn = query / np.linalg.norm(query)
    tn = table / np.linalg.norm(table, axis=1, keepdims=True)
    cos = tn @ qn
    order = sorted(range(len(lines)), key=lambda i: (-cos[i], lines[i]))
    return [(i, float(cos[i])) for i in order[:k]]


def cmd_similar(args) -> int:
    digest, lines, smiles, table = read_embeddings(args.embeddings)
    if args.k < 1 or args.k > len(lines):
        raise UsageError(f"--k must lie in 1..{len(lines)} (table size), got {args.k}")
    if digest is not None and digest != file_sha256(args.checkpoint):
        raise MolContrastError("embedding table was written with a different checkpoint")
    model, _ = load_checkpoint(args.checkpoint)
    query = embed_rows(model, [parse_smiles(args.query)])[0].astype(np.float64)
    out = io.StringIO()
    for rank, (i, c) in enumerate(rank_similar(query, table, lines, args.k), 1):
        out.write(f"{rank}\t{c:.6f}\t{smiles[i]}\n")
    _emit(args, out.getvalue())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="molcontrast", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log training progress")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fp", help="ECFP fingerprints as hex, one line per molecule")
    p.add_argument("corpus")
    p.add_argument("--radius", type=int, default=DEFAULT_RADIUS)
    p.add_argument("--nbits", type=int, default=DEFAULT_NBITS)
    p.add_argument("--out")
    p.set_defaults(func=cmd_fp)

    p = sub.add_parser("fragment", help="BRICS partition of each molecule")
    p.add_argument("corpus")
    p.add_argument("--out")
    p.set_defaults(func=cmd_fragment)

    for name, func in (("pretrain", cmd_pretrain), ("finetune", cmd_finetune)):
        p = sub.add_parser(name, help=f"{name} from a key = value config file")
        p.add_argument("--config", required=True)
        p.add_argument("--out", help="output directory (overrides the config)")
        p.add_argument("--seed", type=int)
        p.add_argument("--deterministic", action="store_true")
        p.add_argument("--feature-set", choices=("original", "extended"))
        p.set_defaults(func=func)

    p = sub.add_parser("embed", help="graph representations for a corpus (CSV)")
    p.add_argument("corpus")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("similar", help="nearest molecules to a query by cosine similarity")
    p.add_argument("query")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--out")
    p.set_defaults(func=cmd_similar)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"molcontrast: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except MolContrastError as exc:
        print(f"molcontrast: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except (OSError, ValueError) as exc:
        print(f"molcontrast: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
