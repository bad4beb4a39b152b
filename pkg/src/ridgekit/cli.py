"""Command-line entry point: ``ridgekit <subcommand> ...``.

Exit codes: 0 success, 1 usage, 2 data error, 3 pipeline failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from .config import Config
from .encode import encode_fingerprint, read_fingercode, write_fingercode
from .evaluation import (
    encode_all,
    genuine_pairs,
    impostor_pairs,
    run_protocol,
    sweep_grid,
    write_report,
    write_sweep,
)
from .exceptions import ConfigError, PipelineError, RidgekitError
from .imgio import DatasetIndex, load_dataset, load_image, save_pgm, write_manifest
from .match import match_fingercodes, params_from_config
from .minutiae import MINUTIAE_HEADER, read_minutiae, write_minutiae
from .pipeline import extract, process_image
from .ridgefield import write_grid
from .synth import generate, read_spec, synthetic_dataset, truth_to_minutiae

log = logging.getLogger("ridgekit")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_PIPELINE = 0, 1, 2, 3
GALLERY_HEADER = "#ridgekit-gallery v1"
GALLERY_INDEX = "gallery.idx"

# flag -> Config field
OVERRIDES = {
    "block_size": "b",
    "neighbors": "n",
    "matched_threshold": "t",
    "rho_tol": "rho_tol",
    "theta_tol": "theta_tol",
    "phi_tol": "phi_tol",
    "mode": "mode",
    "passes": "passes",
    "rule": "rule",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--block-size", type=int)
    p.add_argument("--neighbors", type=int)
    p.add_argument("--matched-threshold", type=int)
    p.add_argument("--rho-tol", type=float)
    p.add_argument("--theta-tol", type=float)
    p.add_argument("--phi-tol", type=float)
    p.add_argument("--mode", choices=["normalized", "literal"])
    p.add_argument("--passes", type=int)
    p.add_argument("--rule", choices=["at_least", "exact"])
    p.add_argument("--out", help="output file or directory")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ridgekit", description="Fingerprint enhancement, encoding and matching.")
    parser.add_argument("--version", action="version", version=f"ridgekit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("enhance", help="write enhanced/binary/skeleton images and block grids")
    p.add_argument("image")
    _common(p)

    p = sub.add_parser("extract", help="write the minutiae of one image")
    p.add_argument("image")
    _common(p)

    p = sub.add_parser("encode", help="write the finger-code of one image or minutiae file")
    p.add_argument("input")
    p.add_argument("--subject", default="")
    p.add_argument("--sample", default="")
    _common(p)

    p = sub.add_parser("enroll", help="encode every manifest image into a gallery directory")
    p.add_argument("manifest")
    _common(p)

    p = sub.add_parser("identify", help="rank gallery entries against a probe image")
    p.add_argument("probe")
    p.add_argument("--gallery", required=True)
    p.add_argument("--top-k", type=int, default=5)
    _common(p)

    p = sub.add_parser("evaluate", help="genuine/impostor protocol, FMR/FNMR report")
    p.add_argument("manifest")
    p.add_argument("--ordered-genuine", action="store_true", help="score genuine pairs in both directions")
    _common(p)

    p = sub.add_parser("sweep", help="EER grid over neighbour count and matched threshold")
    p.add_argument("manifest")
    p.add_argument("--n-range", default="1-10")
    p.add_argument("--t-range", default="1-10")
    p.add_argument("--ordered-genuine", action="store_true", help="score genuine pairs in both directions")
    _common(p)

    p = sub.add_parser("synth", help="render a synthetic dataset (or one spec file)")
    p.add_argument("--spec", help="render this key=value spec instead of a dataset")
    p.add_argument("--fingers", type=int, default=20)
    p.add_argument("--impressions", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise", type=float, default=0.02)
    _common(p)
    return parser


def resolve_config(args) -> Config:
    cfg = Config.load(args.config) if args.config else Config()
    changes = {field: getattr(args, flag) for flag, field in OVERRIDES.items() if getattr(args, flag) is not None}
    return cfg.replace(**changes) if changes else cfg


def _stamp(cfg: Config) -> str:
    return f"ridgekit {__version__} config={cfg.fingerprint()}"


def _need_file(path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"no such file: {path}")
    return p


def _need_out(args, what: str) -> Path:
    if not args.out:
        raise UsageError(f"--out is required ({what})")
    return Path(args.out)


def _parse_range(text: str) -> list[int]:
    try:
        if "-" in text:
            lo, hi = (int(v) for v in text.split("-", 1))
            values = list(range(lo, hi + 1))
        else:
            values = [int(v) for v in text.split(",")]
    except ValueError:
        raise UsageError(f"bad range {text!r}; use 'lo-hi' or 'a,b,c'") from None
    if not values or min(values) < 1:
        raise UsageError(f"bad range {text!r}")
    return values


def _extract_job(job):
    key, path, cfg = job
    try:
        return key, extract(load_image(path), cfg, f"{key[0]}/{key[1]}"), None
    except RidgekitError as exc:
        return key, None, str(exc)


def extract_dataset(idx: DatasetIndex, cfg: Config, jobs: int = 1) -> dict:
    """Minutiae for every manifest entry; failures map to ``None`` and are logged."""
    work = [(key, idx.paths[key], cfg) for key in idx.keys()]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_extract_job, work))
    else:
        results = [_extract_job(w) for w in work]
    out = {}
    for key, ml, err in results:
        if err:
            log.warning("%s/%s: %s", key[0], key[1], err)
        out[key] = ml
    return out


# --- subcommands ------------------------------------------------------------


def cmd_enhance(args, cfg: Config) -> int:
    src = _need_file(args.image)
    out = _need_out(args, "output directory")
    res = process_image(load_image(src), cfg, src.stem)
    out.mkdir(parents=True, exist_ok=True)
    stamp = _stamp(cfg)
    save_pgm(res.enhanced, out / f"{src.stem}_enhanced.pgm", stamp)
    save_pgm(res.binary, out / f"{src.stem}_binary.pgm", stamp)
    save_pgm(res.skeleton, out / f"{src.stem}_skeleton.pgm", stamp)
    write_grid(out / f"{src.stem}_orientation.txt", res.orientation.angles, cfg.b, "orientation", stamp)
    write_grid(out / f"{src.stem}_frequency.txt", res.frequency.freqs, cfg.b, "frequency", stamp)
    return EXIT_OK


def cmd_extract(args, cfg: Config) -> int:
    src = _need_file(args.image)
    out = _need_out(args, "minutiae file")
    ml = extract(load_image(src), cfg, src.stem)
    write_minutiae(ml, out, _stamp(cfg))
    print(f"{len(ml)} minutiae -> {out}")
    return EXIT_OK


def cmd_encode(args, cfg: Config) -> int:
    src = _need_file(args.input)
    out = _need_out(args, "finger-code file")
    with open(src, "rb") as fh:
        is_minutiae = fh.read(len(MINUTIAE_HEADER)) == MINUTIAE_HEADER.encode("ascii")
    ml = read_minutiae(src) if is_minutiae else extract(load_image(src), cfg, src.stem)
    code = encode_fingerprint(ml, cfg.n, cfg.mode, args.subject or src.stem, args.sample or "1")
    write_fingercode(code, out, _stamp(cfg))
    return EXIT_OK


def cmd_enroll(args, cfg: Config) -> int:
    idx = load_dataset(_need_file(args.manifest))
    gallery = _need_out(args, "gallery directory")
    gallery.mkdir(parents=True, exist_ok=True)
    minutiae = extract_dataset(idx, cfg, args.jobs)
    codes = encode_all(minutiae, cfg.n, cfg.mode)
    stamp = _stamp(cfg)
    lines = [f"{GALLERY_HEADER} config={cfg.fingerprint()}"]
    for key in idx.keys():
        code = codes[key]
        if code is None:
            lines.append(f"{key[0]}\t{key[1]}\t-")
            continue
        name = f"{key[0]}_{key[1]}.fc"
        write_fingercode(code, gallery / name, stamp)
        lines.append(f"{key[0]}\t{key[1]}\t{name}")
    (gallery / "config.txt").write_text(cfg.serialize(), encoding="utf-8")
    (gallery / GALLERY_INDEX).write_text("\n".join(lines) + "\n", encoding="utf-8")
    enrolled = sum(c is not None for c in codes.values())
    print(f"enrolled {enrolled}/{len(idx)} -> {gallery}")
    return EXIT_OK if enrolled else EXIT_PIPELINE


def read_gallery(gallery: Path):
    """``(config fingerprint, [(subject, sample, path or None)])``."""
    index = gallery / GALLERY_INDEX
    try:
        lines = index.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise RidgekitError(f"cannot read gallery index {index}: {exc}") from exc
    if not lines or not lines[0].startswith(GALLERY_HEADER + " config="):
        raise RidgekitError(f"{index}: missing '{GALLERY_HEADER}' header")
    fp = lines[0].split("config=", 1)[1].strip()
    entries = []
    for line in lines[1:]:
        if not line.strip():
            continue
        subject, sample, name = line.split("\t")
        entries.append((subject, int(sample), None if name == "-" else gallery / name))
    return fp, entries


def cmd_identify(args, cfg: Config) -> int:
    probe = _need_file(args.probe)
    if args.top_k < 1:
        raise UsageError("--top-k must be >= 1")
    fp, entries = read_gallery(Path(args.gallery))
    if fp != cfg.fingerprint():
        raise ConfigError(f"gallery built with config {fp}, current config is {cfg.fingerprint()}")
    entries = [e for e in entries if e[2] is not None]
    if not entries:
        raise RidgekitError("empty gallery")
    cand = encode_fingerprint(extract(load_image(probe), cfg, probe.stem), cfg.n, cfg.mode)
    p = params_from_config(cfg)
    ranked = []
    for subject, sample, path in entries:
        r = match_fingercodes(cand, read_fingercode(path), p)
        ranked.append((subject, sample, r.score))
    ranked.sort(key=lambda e: (-e[2], e[0], e[1]))
    text = "".join(f"{s}\t{k}\t{v:.6f}\n" for s, k, v in ranked[: args.top_k])
    if args.out:
        Path(args.out).write_text(f"# {_stamp(cfg)}\n" + text, encoding="utf-8")
    sys.stdout.write(text)
    return EXIT_OK


def cmd_evaluate(args, cfg: Config) -> int:
    idx = load_dataset(_need_file(args.manifest))
    out = _need_out(args, "report CSV")
    minutiae = extract_dataset(idx, cfg, args.jobs)
    codes = encode_all(minutiae, cfg.n, cfg.mode)
    n_gen, n_imp = len(genuine_pairs(idx, args.ordered_genuine)), len(impostor_pairs(idx))
    report = run_protocol(idx, codes, params_from_config(cfg), args.ordered_genuine)
    write_report(report, out, f"# {_stamp(cfg)}")
    print(f"genuine={n_gen} impostor={n_imp} matches={n_gen + n_imp} failures={len(report.failures)}")
    print(f"EER={100 * report.eer:.2f}% at threshold {report.eer_threshold:.4f}")
    return EXIT_OK


def cmd_sweep(args, cfg: Config) -> int:
    n_range, t_range = _parse_range(args.n_range), _parse_range(args.t_range)
    idx = load_dataset(_need_file(args.manifest))
    out = _need_out(args, "sweep CSV")
    minutiae = extract_dataset(idx, cfg, args.jobs)
    result = sweep_grid(idx, minutiae, n_range, t_range, params_from_config(cfg), args.ordered_genuine)
    write_sweep(result, out, f"# {_stamp(cfg)}")
    print(out.read_text(encoding="utf-8"), end="")
    return EXIT_OK


def cmd_synth(args, cfg: Config) -> int:
    out = _need_out(args, "output directory")
    out.mkdir(parents=True, exist_ok=True)
    stamp = _stamp(cfg)
    if args.spec:
        spec = read_spec(_need_file(args.spec))
        img, truth = generate(spec)
        stem = Path(args.spec).stem
        save_pgm(img, out / f"{stem}.pgm", stamp)
        write_minutiae(truth_to_minutiae(truth, stem), out / f"{stem}_truth.min", stamp)
        write_manifest([("s0", 1, f"{stem}.pgm")], out / "manifest.tsv")
        return EXIT_OK
    if args.fingers < 2 or args.impressions < 2:
        raise UsageError("need at least 2 fingers and 2 impressions")
    entries = []
    for subject, sample, img, truth in synthetic_dataset(args.fingers, args.impressions, args.seed, args.noise):
        name = f"{subject}_{sample}"
        save_pgm(img, out / f"{name}.pgm", stamp)
        write_minutiae(truth_to_minutiae(truth, name), out / f"{name}_truth.min", stamp)
        entries.append((subject, sample, f"{name}.pgm"))
    write_manifest(entries, out / "manifest.tsv")
    print(f"{len(entries)} images -> {out / 'manifest.tsv'}")
    return EXIT_OK


COMMANDS = {
    "enhance": cmd_enhance,
    "extract": cmd_extract,
    "encode": cmd_encode,
    "enroll": cmd_enroll,
    "identify": cmd_identify,
    "evaluate": cmd_evaluate,
    "sweep": cmd_sweep,
    "synth": cmd_synth,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        print(f"ridgekit: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PipelineError as exc:
        print(f"ridgekit: pipeline failure: {exc}", file=sys.stderr)
        return EXIT_PIPELINE
    except (RidgekitError, OSError, ValueError) as exc:
        print(f"ridgekit: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
